//! Nominal and functional sensing graphs.
//!
//! The nominal graph is the designed, undirected topology (stored as
//! bidirectional pairs). The functional graph is the per-step subset of
//! directed edges and nodes that are actually available; availability may
//! be one-way. Loss models produce functional graphs from the nominal one.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::rng::{StreamDomain, StreamRng};

pub type NodeId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("node index {0} out of range 1..={1}")]
    NodeOutOfRange(usize, usize),
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("graph needs at least one node")]
    Empty,
    #[error("loss schedule has no interval covering step {0}")]
    ScheduleGap(u64),
    #[error("loss schedule intervals overlap at step {0}")]
    ScheduleOverlap(u64),
}

/// The designed undirected sensing topology, stored as directed pairs
/// closed under reversal.
///
/// Directed edges are kept in canonical order: lexicographic by
/// `(source, destination)`, which groups the columns of the incidence
/// matrix per source agent.
#[derive(Clone, Debug)]
pub struct NominalGraph {
    n_nodes: usize,
    /// All M directed edges, lexicographically sorted, 0-based.
    edges: Vec<(NodeId, NodeId)>,
    /// Neighbor list per node, destination order matching `edges`.
    neighbors: Vec<Vec<NodeId>>,
    /// Edge index of each node's k-th neighbor edge.
    neighbor_edges: Vec<Vec<usize>>,
    /// Undirected pair id shared by an edge and its reverse.
    undirected_id: Vec<usize>,
    /// Dense (src * n + dst) -> edge index lookup; usize::MAX when absent.
    edge_lookup: Vec<usize>,
}

impl NominalGraph {
    /// Build from undirected pairs given 0-based; each pair is expanded to
    /// both directions.
    pub fn from_undirected_edges(
        n_nodes: usize,
        undirected: &[(NodeId, NodeId)],
    ) -> Result<Self, GraphError> {
        if n_nodes == 0 {
            return Err(GraphError::Empty);
        }
        let mut directed = Vec::with_capacity(undirected.len() * 2);
        for &(i, j) in undirected {
            directed.push((i, j));
            directed.push((j, i));
        }
        Self::from_directed_edges(n_nodes, &directed)
    }

    /// Build from an explicit directed list that must already be closed
    /// under reversal (the bidirectional representation of an undirected
    /// graph).
    pub fn from_directed_edges(
        n_nodes: usize,
        directed: &[(NodeId, NodeId)],
    ) -> Result<Self, GraphError> {
        if n_nodes == 0 {
            return Err(GraphError::Empty);
        }
        let mut edges = directed.to_vec();
        for &(i, j) in &edges {
            if i >= n_nodes || j >= n_nodes {
                return Err(GraphError::NodeOutOfRange(i.max(j) + 1, n_nodes));
            }
            if i == j {
                return Err(GraphError::SelfLoop(i + 1));
            }
        }
        edges.sort_unstable();
        for w in edges.windows(2) {
            if w[0] == w[1] {
                return Err(GraphError::DuplicateEdge(w[0].0 + 1, w[0].1 + 1));
            }
        }
        // Undirectedness: every edge must have its reverse present.
        for &(i, j) in &edges {
            if edges.binary_search(&(j, i)).is_err() {
                return Err(GraphError::DuplicateEdge(j + 1, i + 1));
            }
        }

        let mut neighbors = vec![Vec::new(); n_nodes];
        let mut neighbor_edges = vec![Vec::new(); n_nodes];
        let mut edge_lookup = vec![usize::MAX; n_nodes * n_nodes];
        for (m, &(i, j)) in edges.iter().enumerate() {
            neighbors[i].push(j);
            neighbor_edges[i].push(m);
            edge_lookup[i * n_nodes + j] = m;
        }
        // Pair ids: the lexicographically smaller direction defines the pair.
        let mut undirected_id = vec![0usize; edges.len()];
        let mut next_pair = 0usize;
        for (m, &(i, j)) in edges.iter().enumerate() {
            if i < j {
                undirected_id[m] = next_pair;
                next_pair += 1;
            }
        }
        for (m, &(i, j)) in edges.iter().enumerate() {
            if i > j {
                let rev = edge_lookup[j * n_nodes + i];
                undirected_id[m] = undirected_id[rev];
            }
        }

        Ok(NominalGraph {
            n_nodes,
            edges,
            neighbors,
            neighbor_edges,
            undirected_id,
            edge_lookup,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Number of directed edges M.
    pub fn n_directed_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_undirected_edges(&self) -> usize {
        self.edges.len() / 2
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn neighbors(&self, i: NodeId) -> &[NodeId] {
        &self.neighbors[i]
    }

    /// Edge indices of node `i`'s outgoing edges, canonical order.
    pub fn neighbor_edges(&self, i: NodeId) -> &[usize] {
        &self.neighbor_edges[i]
    }

    pub fn degree(&self, i: NodeId) -> usize {
        self.neighbors[i].len()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n_nodes).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    pub fn edge_index(&self, i: NodeId, j: NodeId) -> Option<usize> {
        let idx = self.edge_lookup[i * self.n_nodes + j];
        (idx != usize::MAX).then_some(idx)
    }

    /// Undirected pair id shared between an edge and its reverse.
    pub fn undirected_pair_id(&self, edge: usize) -> usize {
        self.undirected_id[edge]
    }

    /// Full bidirectional incidence matrix B (N x M): column m for edge
    /// (i, j) has +1 at row i and -1 at row j.
    pub fn incidence(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.n_nodes, self.edges.len());
        for (m, &(i, j)) in self.edges.iter().enumerate() {
            b[(i, m)] = 1.0;
            b[(j, m)] = -1.0;
        }
        b
    }

    /// Per-agent incidence blocks B_i (N x N_i); B = [B_1, ..., B_N].
    pub fn incidence_blocks(&self) -> Vec<DMatrix<f64>> {
        (0..self.n_nodes)
            .map(|i| {
                let mut b = DMatrix::zeros(self.n_nodes, self.neighbors[i].len());
                for (col, &j) in self.neighbors[i].iter().enumerate() {
                    b[(i, col)] = 1.0;
                    b[(j, col)] = -1.0;
                }
                b
            })
            .collect()
    }
}

/// Per-step availability: which nodes and directed edges exist at step k.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalGraph {
    pub step: u64,
    /// Mask over nodes, length N.
    pub active_nodes: Vec<bool>,
    /// Mask over directed edges, length M, canonical order.
    pub active_edges: Vec<bool>,
}

impl FunctionalGraph {
    pub fn full(g: &NominalGraph, step: u64) -> Self {
        FunctionalGraph {
            step,
            active_nodes: vec![true; g.n_nodes()],
            active_edges: vec![true; g.n_directed_edges()],
        }
    }

    pub fn n_active_edges(&self) -> usize {
        self.active_edges.iter().filter(|&&a| a).count()
    }

    pub fn n_active_nodes(&self) -> usize {
        self.active_nodes.iter().filter(|&&a| a).count()
    }

    /// Available neighbor count N_{i,k}.
    pub fn available_degree(&self, g: &NominalGraph, i: NodeId) -> usize {
        g.neighbor_edges(i)
            .iter()
            .filter(|&&m| self.active_edges[m])
            .count()
    }

    /// Iterate `(edge index, neighbor)` over node i's available edges,
    /// canonical order.
    pub fn available_neighbors<'a>(
        &'a self,
        g: &'a NominalGraph,
        i: NodeId,
    ) -> impl Iterator<Item = (usize, NodeId)> + 'a {
        g.neighbor_edges(i)
            .iter()
            .zip(g.neighbors(i))
            .filter(|(&m, _)| self.active_edges[m])
            .map(|(&m, &j)| (m, j))
    }
}

/// A scheduled availability window with an explicit edge set.
#[derive(Clone, Debug)]
pub struct ScheduleInterval {
    /// First step of the interval (inclusive).
    pub from_step: u64,
    /// One past the last step (exclusive).
    pub to_step: u64,
    /// Directed edge availability mask, canonical order.
    pub edges: Vec<bool>,
    /// Node availability mask; `None` keeps every node active.
    pub nodes: Option<Vec<bool>>,
}

/// One availability layer; layers compose conjunctively.
#[derive(Clone, Debug)]
pub enum LossLayer {
    /// Every nominal edge available.
    None,
    /// I.i.d. Bernoulli availability per directed edge per step. With
    /// `symmetric` set, both directions of a pair share one draw.
    Bernoulli { lambda: f64, symmetric: bool },
    /// Explicit availability per step interval.
    Schedule(Vec<ScheduleInterval>),
    /// A node leaves the swarm at `depart_step` and optionally returns.
    NodeDeparture {
        node: NodeId,
        depart_step: u64,
        return_step: Option<u64>,
    },
}

/// Composition of loss layers plus the RNG seed for stochastic draws.
///
/// An edge is available at step k iff every layer keeps it; a node is
/// active iff every layer keeps it.
#[derive(Clone, Debug)]
pub struct LossModel {
    pub layers: Vec<LossLayer>,
    pub seed: u64,
}

impl LossModel {
    pub fn none(seed: u64) -> Self {
        LossModel {
            layers: vec![LossLayer::None],
            seed,
        }
    }

    pub fn bernoulli(lambda: f64, symmetric: bool, seed: u64) -> Self {
        LossModel {
            layers: vec![LossLayer::Bernoulli { lambda, symmetric }],
            seed,
        }
    }

    /// Validate schedule coverage of `[0, horizon_steps)`; gaps and overlaps
    /// are configuration errors surfaced before a run starts.
    pub fn validate_schedule(&self, horizon_steps: u64) -> Result<(), GraphError> {
        for layer in &self.layers {
            if let LossLayer::Schedule(intervals) = layer {
                let mut sorted: Vec<_> = intervals.iter().collect();
                sorted.sort_by_key(|iv| iv.from_step);
                let mut cursor = 0u64;
                for iv in sorted {
                    if iv.from_step > cursor {
                        return Err(GraphError::ScheduleGap(cursor));
                    }
                    if iv.from_step < cursor {
                        return Err(GraphError::ScheduleOverlap(iv.from_step));
                    }
                    cursor = iv.to_step;
                }
                if cursor < horizon_steps {
                    return Err(GraphError::ScheduleGap(cursor));
                }
            }
        }
        Ok(())
    }
}

/// Realize the functional graph at step `k`. Deterministic given
/// `(model seed, run_salt, k)`.
pub fn realize_functional(
    g: &NominalGraph,
    model: &LossModel,
    k: u64,
    run_salt: u64,
) -> Result<FunctionalGraph, GraphError> {
    let mut fg = FunctionalGraph::full(g, k);
    for (layer_idx, layer) in model.layers.iter().enumerate() {
        match layer {
            LossLayer::None => {}
            LossLayer::Bernoulli { lambda, symmetric } => {
                for (m, avail) in fg.active_edges.iter_mut().enumerate() {
                    if !*avail {
                        continue;
                    }
                    // Key by the undirected pair when draws are coupled.
                    let entity_base = if *symmetric {
                        g.undirected_pair_id(m)
                    } else {
                        m
                    } as u64;
                    let entity = ((layer_idx as u64) << 32) | entity_base;
                    let mut rng = StreamRng::for_key(
                        model.seed,
                        StreamDomain::EdgeAvailability,
                        run_salt,
                        entity,
                        k,
                    );
                    *avail = rng.next_bool(*lambda);
                }
            }
            LossLayer::Schedule(intervals) => {
                let interval = intervals
                    .iter()
                    .find(|iv| iv.from_step <= k && k < iv.to_step)
                    .ok_or(GraphError::ScheduleGap(k))?;
                for (m, avail) in fg.active_edges.iter_mut().enumerate() {
                    *avail = *avail && interval.edges[m];
                }
                if let Some(nodes) = &interval.nodes {
                    for (i, active) in fg.active_nodes.iter_mut().enumerate() {
                        *active = *active && nodes[i];
                    }
                }
            }
            LossLayer::NodeDeparture {
                node,
                depart_step,
                return_step,
            } => {
                let away =
                    k >= *depart_step && return_step.map_or(true, |r| k < r);
                if away {
                    fg.active_nodes[*node] = false;
                }
            }
        }
    }
    // An edge requires both endpoints active.
    for (m, &(i, j)) in g.edges().iter().enumerate() {
        if !fg.active_nodes[i] || !fg.active_nodes[j] {
            fg.active_edges[m] = false;
        }
    }
    Ok(fg)
}

/// Functional incidence blocks B_{i,k}: the columns of B_i whose edges are
/// available at step k, canonical order preserved.
pub fn functional_incidence(fg: &FunctionalGraph, g: &NominalGraph) -> Vec<DMatrix<f64>> {
    (0..g.n_nodes())
        .map(|i| functional_incidence_block(fg, g, i))
        .collect()
}

/// Single agent's functional incidence block (N x N_{i,k}).
pub fn functional_incidence_block(
    fg: &FunctionalGraph,
    g: &NominalGraph,
    i: NodeId,
) -> DMatrix<f64> {
    let avail: Vec<NodeId> = fg.available_neighbors(g, i).map(|(_, j)| j).collect();
    let mut b = DMatrix::zeros(g.n_nodes(), avail.len());
    for (col, &j) in avail.iter().enumerate() {
        b[(i, col)] = 1.0;
        b[(j, col)] = -1.0;
    }
    b
}
