//! Stress-matrix computation: the universal-rigidity certificate behind the
//! formation controller gains.
//!
//! The returned matrix L is symmetric with the graph's sparsity pattern,
//! satisfies L 1 = 0 and L P^T = 0, and is positive semidefinite with rank
//! N - D - 1. Among the equilibrium null-space candidates the search picks
//! the combination maximizing the (D+2)-th smallest eigenvalue under unit
//! Frobenius norm, then rescales to ||L||_F = N.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use super::Configuration;
use crate::graph::NominalGraph;
use crate::rng::{StreamDomain, StreamRng};

#[derive(Debug, Error, PartialEq)]
pub enum StressError {
    #[error("nominal configuration does not affinely span R^{0}")]
    NonGenericConfiguration(usize),
    #[error("framework admits no PSD stress of rank N-D-1: not universally rigid")]
    NotUniversallyRigid,
    #[error("graph has {graph} nodes but configuration has {config}")]
    SizeMismatch { graph: usize, config: usize },
    #[error("explicit stress rejected: {0}")]
    InvalidExplicit(String),
}

/// A validated stress matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct StressMatrix {
    l: DMatrix<f64>,
}

impl StressMatrix {
    /// Matrix entries; [L]_ij = -l_ij off-diagonal where l_ij is the edge
    /// stress used by the control laws.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Edge stress l_ij (zero for non-edges).
    pub fn edge_stress(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            -self.l[(i, j)]
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.l.nrows()
    }

    /// Principal submatrix over the given node indices.
    pub fn principal_submatrix(&self, nodes: &[usize]) -> DMatrix<f64> {
        let n = nodes.len();
        let mut m = DMatrix::zeros(n, n);
        for (a, &i) in nodes.iter().enumerate() {
            for (b, &j) in nodes.iter().enumerate() {
                m[(a, b)] = self.l[(i, j)];
            }
        }
        m
    }

    /// Accept a user-supplied stress after checking every invariant.
    pub fn from_matrix(
        g: &NominalGraph,
        p: &Configuration,
        l: DMatrix<f64>,
    ) -> Result<Self, StressError> {
        let n = g.n_nodes();
        if l.nrows() != n || l.ncols() != n {
            return Err(StressError::InvalidExplicit(format!(
                "expected {n}x{n} matrix, got {}x{}",
                l.nrows(),
                l.ncols()
            )));
        }
        let scale = l.norm().max(1.0);
        if (&l - l.transpose()).amax() > 1e-10 * scale {
            return Err(StressError::InvalidExplicit("not symmetric".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && g.edge_index(i, j).is_none() && l[(i, j)].abs() > 1e-10 * scale {
                    return Err(StressError::InvalidExplicit(format!(
                        "nonzero entry at non-edge ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let ones = DVector::from_element(n, 1.0);
        if (&l * ones).amax() > 1e-9 * scale {
            return Err(StressError::InvalidExplicit("L 1 != 0".into()));
        }
        if (&l * p.matrix().transpose()).amax() > 1e-9 * scale {
            return Err(StressError::InvalidExplicit("L P^T != 0".into()));
        }
        let d = p.dim();
        let eig = SymmetricEigen::new(l.clone());
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let zero_tol = 1e-8 * scale;
        if vals[0] < -zero_tol {
            return Err(StressError::InvalidExplicit("not PSD".into()));
        }
        let zeros = vals.iter().filter(|&&v| v.abs() <= zero_tol).count();
        if zeros != d + 1 {
            return Err(StressError::InvalidExplicit(format!(
                "rank {} != N-D-1 = {}",
                n - zeros,
                n - d - 1
            )));
        }
        Ok(StressMatrix { l })
    }
}

/// Assemble L from per-undirected-edge stresses.
fn stress_matrix_from_weights(
    g: &NominalGraph,
    pairs: &[(usize, usize)],
    omega: &[f64],
) -> DMatrix<f64> {
    let n = g.n_nodes();
    let mut l = DMatrix::zeros(n, n);
    for (&(i, j), &w) in pairs.iter().zip(omega) {
        l[(i, j)] -= w;
        l[(j, i)] -= w;
        l[(i, i)] += w;
        l[(j, j)] += w;
    }
    l
}

/// Compute a best-conditioned PSD stress for the framework `(g, p)`.
pub fn compute_stress(g: &NominalGraph, p: &Configuration) -> Result<StressMatrix, StressError> {
    let n = g.n_nodes();
    let d = p.dim();
    if p.n_agents() != n {
        return Err(StressError::SizeMismatch {
            graph: n,
            config: p.n_agents(),
        });
    }

    // The configuration must affinely span R^D, otherwise the equilibrium
    // system is degenerate.
    let mut aug = DMatrix::zeros(d + 1, n);
    aug.view_mut((0, 0), (d, n)).copy_from(p.matrix());
    for c in 0..n {
        aug[(d, c)] = 1.0;
    }
    let aug_svals = aug.singular_values();
    if aug_svals.min() <= 1e-10 * aug_svals.max() {
        return Err(StressError::NonGenericConfiguration(d));
    }

    // Equilibrium operator: omega (per undirected edge) -> stacked
    // per-node force sums sum_j omega_ij (p_i - p_j).
    let pairs: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .copied()
        .filter(|&(i, j)| i < j)
        .collect();
    let m_u = pairs.len();
    let mut a = DMatrix::zeros(n * d, m_u);
    for (col, &(i, j)) in pairs.iter().enumerate() {
        let diff = p.relative(i, j);
        for r in 0..d {
            a[(i * d + r, col)] = diff[r];
            a[(j * d + r, col)] = -diff[r];
        }
    }

    // Null-space basis of the equilibrium operator via the eigenvectors of
    // A^T A with vanishing eigenvalue.
    let gram = a.transpose() * &a;
    let eig = SymmetricEigen::new(gram);
    let max_ev = eig.eigenvalues.amax().max(1e-300);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for (idx, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev.abs() <= 1e-12 * max_ev {
            basis.push(eig.eigenvectors.column(idx).into_owned());
        }
    }
    if basis.is_empty() {
        return Err(StressError::NotUniversallyRigid);
    }

    // Candidate stress matrices for each basis direction, compressed onto
    // the orthogonal complement W of span{1, rows of P}; the D+1 trivial
    // null directions are shared by every candidate, so lambda_{D+2}(L)
    // equals lambda_min of the compression.
    let l_basis: Vec<DMatrix<f64>> = basis
        .iter()
        .map(|w| stress_matrix_from_weights(g, &pairs, w.as_slice()))
        .collect();
    let w_basis = orthogonal_complement(&aug);
    let compressed: Vec<DMatrix<f64>> = l_basis
        .iter()
        .map(|l| w_basis.transpose() * l * &w_basis)
        .collect();

    // Gram matrix for the Frobenius normalization ||L(c)||_F^2 = c^T G c.
    let r = basis.len();
    let mut fro_gram = DMatrix::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            fro_gram[(i, j)] = l_basis[i].dot(&l_basis[j]);
        }
    }

    let best = maximize_lambda_min(&compressed, &fro_gram);
    let (best_val, best_c) = match best {
        Some(v) => v,
        None => return Err(StressError::NotUniversallyRigid),
    };
    if best_val <= 1e-6 {
        return Err(StressError::NotUniversallyRigid);
    }

    let mut l = DMatrix::zeros(n, n);
    for (coef, lb) in best_c.iter().zip(&l_basis) {
        l += lb * *coef;
    }
    // Rescale to ||L||_F = N so control gains are comparable across sizes.
    l *= n as f64 / l.norm();

    // Final certificate check.
    let eig = SymmetricEigen::new(l.clone());
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let zeros = vals.iter().filter(|&&v| v.abs() <= 1e-8).count();
    if vals[0] < -1e-8 || zeros != d + 1 {
        return Err(StressError::NotUniversallyRigid);
    }
    Ok(StressMatrix { l })
}

/// Orthonormal basis of the complement of the row space of `aug`
/// ((D+1) x N): the eigenvectors of the projector I - U (U^T U)^-1 U^T
/// with eigenvalue 1.
fn orthogonal_complement(aug: &DMatrix<f64>) -> DMatrix<f64> {
    let n = aug.ncols();
    let u = aug.transpose(); // N x (D+1)
    let gram_inv = (u.transpose() * &u)
        .try_inverse()
        .expect("affine span verified full rank");
    let proj = DMatrix::identity(n, n) - &u * gram_inv * u.transpose();
    let eig = SymmetricEigen::new(proj);
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for (idx, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > 0.5 {
            cols.push(eig.eigenvectors.column(idx).into_owned());
        }
    }
    let mut out = DMatrix::zeros(n, cols.len());
    for (c, v) in cols.iter().enumerate() {
        out.set_column(c, v);
    }
    out
}

/// Projected supergradient ascent on c -> lambda_min(sum_r c_r M_r) over
/// the ellipsoid c^T G c = 1, with deterministic random restarts.
fn maximize_lambda_min(
    compressed: &[DMatrix<f64>],
    fro_gram: &DMatrix<f64>,
) -> Option<(f64, DVector<f64>)> {
    let r = compressed.len();
    let normalize = |c: &mut DVector<f64>| {
        let norm2 = (c.transpose() * fro_gram * &*c)[(0, 0)];
        if norm2 > 1e-300 {
            *c /= norm2.sqrt();
        }
    };
    let eval = |c: &DVector<f64>| -> (f64, DVector<f64>) {
        let dim = compressed[0].nrows();
        let mut m = DMatrix::zeros(dim, dim);
        for (coef, cm) in c.iter().zip(compressed) {
            m += cm * *coef;
        }
        let eig = SymmetricEigen::new(m);
        let mut min_idx = 0;
        for (i, &ev) in eig.eigenvalues.iter().enumerate() {
            if ev < eig.eigenvalues[min_idx] {
                min_idx = i;
            }
        }
        (
            eig.eigenvalues[min_idx],
            eig.eigenvectors.column(min_idx).into_owned(),
        )
    };

    let mut best: Option<(f64, DVector<f64>)> = None;
    let restarts = if r == 1 { 2 } else { 24 };
    for restart in 0..restarts {
        let mut c = if r == 1 {
            // One-dimensional stress space: only the sign matters.
            DVector::from_element(1, if restart == 0 { 1.0 } else { -1.0 })
        } else {
            let mut rng = StreamRng::for_key(
                0xA11E_57E5,
                StreamDomain::InitialPosition,
                restart as u64,
                0,
                0,
            );
            DVector::from_fn(r, |_, _| rng.next_gaussian())
        };
        normalize(&mut c);
        let (mut val, _) = eval(&c);
        if r > 1 {
            let iters = 400;
            for it in 0..iters {
                let (_, v) = eval(&c);
                // Supergradient of lambda_min: d/dc_r = v^T M_r v.
                let grad = DVector::from_fn(r, |row, _| (v.transpose() * &compressed[row] * &v)[(0, 0)]);
                let step = 0.5 / (1.0 + it as f64 / 40.0);
                c += grad * step;
                normalize(&mut c);
                let (new_val, _) = eval(&c);
                val = new_val;
            }
        }
        if best.as_ref().map_or(true, |(bv, _)| val > *bv) {
            best = Some((val, c));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    /// K4 on a generic triangle-plus-interior-point configuration is
    /// universally rigid with a rank-1 stress (N - D - 1 = 1).
    fn k4() -> (NominalGraph, Configuration) {
        let g = NominalGraph::from_undirected_edges(
            4,
            &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        )
        .unwrap();
        let p = Configuration::from_rows(&[
            vec![0.0, 0.0],
            vec![2.1, 0.2],
            vec![0.3, 1.9],
            vec![0.8, 0.7],
        ])
        .unwrap();
        (g, p)
    }

    #[test]
    fn k4_certificate() {
        let (g, p) = k4();
        let stress = compute_stress(&g, &p).unwrap();
        let l = stress.matrix();
        let n = 4.0;
        assert!((l.norm() - n).abs() < 1e-9);
        let ones = DVector::from_element(4, 1.0);
        assert!((l * ones).amax() < 1e-10 * l.norm());
        assert!((l * p.matrix().transpose()).amax() < 1e-10 * l.norm());
        let eig = SymmetricEigen::new(l.clone());
        let zeros = eig.eigenvalues.iter().filter(|&&v| v.abs() < 1e-8).count();
        assert_eq!(zeros, 3);
        assert!(eig.eigenvalues.min() > -1e-8);
    }

    #[test]
    fn collinear_configuration_is_rejected() {
        let g = NominalGraph::from_undirected_edges(
            4,
            &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        )
        .unwrap();
        let p = Configuration::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![2.0, 0.0],
            vec![3.0, 0.0],
        ])
        .unwrap();
        assert_eq!(
            compute_stress(&g, &p),
            Err(StressError::NonGenericConfiguration(2))
        );
    }

    #[test]
    fn sparse_graph_without_stress_is_rejected() {
        // A path graph has no equilibrium stress on generic points.
        let g = NominalGraph::from_undirected_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let p = Configuration::from_rows(&[
            vec![0.0, 0.0],
            vec![1.1, 0.3],
            vec![2.0, 1.2],
            vec![2.9, 0.4],
        ])
        .unwrap();
        assert!(matches!(
            compute_stress(&g, &p),
            Err(StressError::NotUniversallyRigid)
        ));
    }

    #[test]
    fn explicit_stress_roundtrip_and_rejection() {
        let (g, p) = k4();
        let stress = compute_stress(&g, &p).unwrap();
        let ok = StressMatrix::from_matrix(&g, &p, stress.matrix().clone());
        assert!(ok.is_ok());

        let mut bad = stress.matrix().clone();
        bad[(0, 1)] += 0.5;
        assert!(StressMatrix::from_matrix(&g, &p, bad).is_err());

        let negated = -stress.matrix().clone();
        assert!(matches!(
            StressMatrix::from_matrix(&g, &p, negated),
            Err(StressError::InvalidExplicit(ref s)) if s.contains("PSD")
        ));
    }

    #[test]
    fn edge_stress_sign_convention() {
        let (g, p) = k4();
        let stress = compute_stress(&g, &p).unwrap();
        for (i, j) in [(0usize, 1usize), (2, 3)] {
            assert_eq!(stress.edge_stress(i, j), -stress.matrix()[(i, j)]);
        }
        // Equilibrium in stress form: sum_j l_ij (p_i - p_j) = 0.
        for i in 0..4 {
            let mut acc = DVector::zeros(2);
            for &j in g.neighbors(i) {
                acc += stress.edge_stress(i, j) * p.relative(i, j);
            }
            assert!(acc.amax() < 1e-10);
        }
    }
}
