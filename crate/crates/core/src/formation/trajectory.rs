//! Piecewise target trajectories over affine transforms.

use nalgebra::{DMatrix, Rotation3, UnitQuaternion};
use thiserror::Error;

use super::AffineTransform;

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("time {time} outside trajectory range [0, {horizon}]")]
    TimeOutOfRange { time: f64, horizon: f64 },
    #[error("segment {0} has non-positive duration")]
    BadDuration(usize),
    #[error("segment {index} dimension {got} differs from trajectory dimension {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
}

/// How a segment interpolates between its endpoint transforms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interpolation {
    /// Entrywise linear interpolation of theta and the translation.
    LinearMatrix,
    /// Rotation angle interpolated geodesically; the symmetric (stretch)
    /// factor and the translation linearly. Keeps scaled rotations proper
    /// along the whole segment.
    RotationGeodesic,
}

#[derive(Clone, Debug)]
pub struct TrajectorySegment {
    pub duration: f64,
    pub end: AffineTransform,
    pub mode: Interpolation,
}

/// A continuous piecewise trajectory: each segment runs from the previous
/// segment's end transform to its own.
#[derive(Clone, Debug)]
pub struct TrajectorySpec {
    pub initial: AffineTransform,
    pub segments: Vec<TrajectorySegment>,
}

impl TrajectorySpec {
    /// Static target: identity transform held forever.
    pub fn hold(dim: usize, duration: f64) -> Self {
        TrajectorySpec {
            initial: AffineTransform::identity(dim),
            segments: vec![TrajectorySegment {
                duration,
                end: AffineTransform::identity(dim),
                mode: Interpolation::LinearMatrix,
            }],
        }
    }

    pub fn horizon(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn validate(&self) -> Result<(), TrajectoryError> {
        let dim = self.initial.dim();
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.duration <= 0.0 {
                return Err(TrajectoryError::BadDuration(i));
            }
            if seg.end.dim() != dim {
                return Err(TrajectoryError::DimensionMismatch {
                    index: i,
                    expected: dim,
                    got: seg.end.dim(),
                });
            }
        }
        Ok(())
    }

    /// Transform at `time` seconds into the trajectory.
    pub fn evaluate(&self, time: f64) -> Result<AffineTransform, TrajectoryError> {
        let horizon = self.horizon();
        if time < 0.0 || time > horizon + 1e-9 {
            return Err(TrajectoryError::TimeOutOfRange { time, horizon });
        }
        let mut start = self.initial.clone();
        let mut elapsed = 0.0;
        for seg in &self.segments {
            if time <= elapsed + seg.duration || seg as *const _ == self.segments.last().unwrap() {
                let alpha = ((time - elapsed) / seg.duration).clamp(0.0, 1.0);
                return Ok(interpolate(&start, &seg.end, alpha, seg.mode));
            }
            elapsed += seg.duration;
            start = seg.end.clone();
        }
        Ok(self.initial.clone())
    }
}

fn interpolate(
    a: &AffineTransform,
    b: &AffineTransform,
    alpha: f64,
    mode: Interpolation,
) -> AffineTransform {
    let translation = &a.translation * (1.0 - alpha) + &b.translation * alpha;
    let theta = match mode {
        Interpolation::LinearMatrix => &a.theta * (1.0 - alpha) + &b.theta * alpha,
        Interpolation::RotationGeodesic => {
            let (ra, sa) = polar_decompose(&a.theta);
            let (rb, sb) = polar_decompose(&b.theta);
            let r = rotation_geodesic(&ra, &rb, alpha);
            let s = sa * (1.0 - alpha) + sb * alpha;
            r * s
        }
    };
    AffineTransform { theta, translation }
}

/// Polar decomposition theta = R * S with R a proper rotation and S
/// symmetric.
fn polar_decompose(theta: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let svd = theta.clone().svd(true, true);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        // Flip the weakest singular direction to stay in SO(D).
        let d = theta.nrows();
        let mut flip = DMatrix::identity(d, d);
        flip[(d - 1, d - 1)] = -1.0;
        r = u * flip * vt;
    }
    let s = r.transpose() * theta;
    let s = (&s + s.transpose()) * 0.5;
    (r, s)
}

fn rotation_geodesic(ra: &DMatrix<f64>, rb: &DMatrix<f64>, alpha: f64) -> DMatrix<f64> {
    let d = ra.nrows();
    let rel = ra.transpose() * rb;
    match d {
        2 => {
            let angle = rel[(1, 0)].atan2(rel[(0, 0)]) * alpha;
            let (s, c) = angle.sin_cos();
            ra * DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
        }
        3 => {
            let rot = Rotation3::from_matrix_unchecked(rel.fixed_view::<3, 3>(0, 0).into_owned());
            let q = UnitQuaternion::from_rotation_matrix(&rot).powf(alpha);
            let m = q.to_rotation_matrix();
            let mut out = DMatrix::zeros(3, 3);
            out.view_mut((0, 0), (3, 3)).copy_from(m.matrix());
            ra * out
        }
        _ => unreachable!("configuration dimension is 2 or 3"),
    }
}
