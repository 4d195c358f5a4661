//! Configurations, affine transformations, target trajectories, and the
//! stress matrix that certifies universal rigidity.

mod stress;
mod trajectory;

pub use stress::{compute_stress, StressError, StressMatrix};
pub use trajectory::{Interpolation, TrajectoryError, TrajectorySegment, TrajectorySpec};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Relative numerical-rank threshold: a singular value counts as nonzero
/// when it exceeds `RANK_TOLERANCE` times the largest one.
pub const RANK_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum FormationError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("configuration dimension must be 2 or 3, got {0}")]
    BadDimension(usize),
}

/// Agent positions as columns of a D x N matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    points: DMatrix<f64>,
}

impl Configuration {
    pub fn new(points: DMatrix<f64>) -> Result<Self, FormationError> {
        let d = points.nrows();
        if d != 2 && d != 3 {
            return Err(FormationError::BadDimension(d));
        }
        Ok(Configuration { points })
    }

    /// Build from per-agent position rows (N entries of length D).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, FormationError> {
        let d = rows.first().map_or(0, |r| r.len());
        if d != 2 && d != 3 {
            return Err(FormationError::BadDimension(d));
        }
        let mut m = DMatrix::zeros(d, rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(FormationError::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            for (r, &v) in row.iter().enumerate() {
                m[(r, i)] = v;
            }
        }
        Ok(Configuration { points: m })
    }

    pub fn dim(&self) -> usize {
        self.points.nrows()
    }

    pub fn n_agents(&self) -> usize {
        self.points.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn position(&self, i: usize) -> DVector<f64> {
        self.points.column(i).into_owned()
    }

    /// p_ij = p_i - p_j.
    pub fn relative(&self, i: usize, j: usize) -> DVector<f64> {
        (self.points.column(i) - self.points.column(j)).into_owned()
    }
}

/// An affine map z = theta * p + t.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineTransform {
    pub theta: DMatrix<f64>,
    pub translation: DVector<f64>,
}

impl AffineTransform {
    pub fn new(theta: DMatrix<f64>, translation: DVector<f64>) -> Result<Self, FormationError> {
        if theta.nrows() != theta.ncols() {
            return Err(FormationError::DimensionMismatch {
                expected: theta.nrows(),
                got: theta.ncols(),
            });
        }
        if theta.nrows() != translation.len() {
            return Err(FormationError::DimensionMismatch {
                expected: theta.nrows(),
                got: translation.len(),
            });
        }
        Ok(AffineTransform { theta, translation })
    }

    pub fn identity(dim: usize) -> Self {
        AffineTransform {
            theta: DMatrix::identity(dim, dim),
            translation: DVector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    /// Uniform scaling by `s`, no translation.
    pub fn scaling(dim: usize, s: f64) -> Self {
        AffineTransform {
            theta: DMatrix::identity(dim, dim) * s,
            translation: DVector::zeros(dim),
        }
    }

    /// Planar rotation by `angle` radians.
    pub fn rotation2(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        AffineTransform {
            theta: DMatrix::from_row_slice(2, 2, &[c, -s, s, c]),
            translation: DVector::zeros(2),
        }
    }

    pub fn with_translation(mut self, t: &[f64]) -> Self {
        self.translation = DVector::from_row_slice(t);
        self
    }

    pub fn apply(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.theta * p + &self.translation
    }
}

/// Z* = theta * P + t * 1^T.
pub fn target_configuration(
    p: &Configuration,
    a: &AffineTransform,
) -> Result<Configuration, FormationError> {
    if a.dim() != p.dim() {
        return Err(FormationError::DimensionMismatch {
            expected: p.dim(),
            got: a.dim(),
        });
    }
    let mut z = &a.theta * p.matrix();
    for mut col in z.column_iter_mut() {
        col += &a.translation;
    }
    Ok(Configuration { points: z })
}

/// Geometric feasibility of local affine localization: H_{i,k} = P B_{i,k}
/// must have full row rank D (singular values relative to `RANK_TOLERANCE`).
pub fn check_geometric_feasibility(p: &Configuration, b_ik: &DMatrix<f64>) -> bool {
    if b_ik.ncols() < p.dim() {
        return false;
    }
    let h = p.matrix() * b_ik;
    let svals = h.singular_values();
    let max = svals.max();
    if max <= 0.0 {
        return false;
    }
    svals.iter().filter(|&&s| s > RANK_TOLERANCE * max).count() == p.dim()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tri_config() -> Configuration {
        Configuration::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn identity_transform_is_a_fixed_point() {
        let p = tri_config();
        let z = target_configuration(&p, &AffineTransform::identity(2)).unwrap();
        assert_eq!(z, p);
    }

    #[test]
    fn pure_scaling() {
        let p = tri_config();
        let z = target_configuration(&p, &AffineTransform::scaling(2, 2.0)).unwrap();
        let expected =
            Configuration::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_relative_eq!(z.matrix(), expected.matrix(), epsilon = 1e-14);
    }

    #[test]
    fn rotation_then_translation() {
        let a = AffineTransform::rotation2(std::f64::consts::FRAC_PI_2).with_translation(&[1.0, 0.0]);
        let z = a.apply(&DVector::from_row_slice(&[1.0, 0.0]));
        assert_relative_eq!(z[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(z[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = tri_config();
        let a = AffineTransform::identity(3);
        assert!(target_configuration(&p, &a).is_err());
    }

    #[test]
    fn feasibility_requires_d_spanning_neighbors() {
        // Agent 0 with neighbors arranged via incidence columns.
        let p = Configuration::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![2.0, 0.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        // One neighbor: infeasible (N_i < D).
        let mut b1 = DMatrix::zeros(4, 1);
        b1[(0, 0)] = 1.0;
        b1[(1, 0)] = -1.0;
        assert!(!check_geometric_feasibility(&p, &b1));
        // Two collinear neighbors (1 and 2 lie on the x-axis with 0).
        let mut b2 = DMatrix::zeros(4, 2);
        b2[(0, 0)] = 1.0;
        b2[(1, 0)] = -1.0;
        b2[(0, 1)] = 1.0;
        b2[(2, 1)] = -1.0;
        assert!(!check_geometric_feasibility(&p, &b2));
        // Two non-collinear neighbors: feasible.
        let mut b3 = DMatrix::zeros(4, 2);
        b3[(0, 0)] = 1.0;
        b3[(1, 0)] = -1.0;
        b3[(0, 1)] = 1.0;
        b3[(3, 1)] = -1.0;
        assert!(check_geometric_feasibility(&p, &b3));
    }

    #[test]
    fn feasibility_invariant_under_invertible_reexpression() {
        let p = Configuration::from_rows(&[
            vec![0.1, 0.4],
            vec![1.3, 0.2],
            vec![0.7, 1.1],
            vec![-0.5, 0.6],
        ])
        .unwrap();
        let theta = DMatrix::from_row_slice(2, 2, &[1.7, 0.3, -0.4, 2.2]);
        let q = Configuration::new(&theta * p.matrix()).unwrap();
        for cols in [[1usize, 2], [1, 3], [2, 3]] {
            let mut b = DMatrix::zeros(4, 2);
            for (c, &j) in cols.iter().enumerate() {
                b[(0, c)] = 1.0;
                b[(j, c)] = -1.0;
            }
            assert_eq!(
                check_geometric_feasibility(&p, &b),
                check_geometric_feasibility(&q, &b)
            );
        }
    }
}
