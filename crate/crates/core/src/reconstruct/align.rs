//! Least-squares rigid alignment (orthogonal Procrustes / Kabsch).

use nalgebra::SVD;

use crate::frames::{Mat3, Vec3};

use super::ReconstructError;

#[derive(Clone, Debug)]
pub struct Alignment {
    pub rotation: Mat3,
    pub translation: Vec3,
    /// RMS of |R aᵢ + t − bᵢ|.
    pub rms: f64,
    pub max: f64,
}

impl Alignment {
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }
}

/// The proper rotation R and translation t minimizing Σ|R aᵢ + t − bᵢ|².
pub fn align_points(a: &[Vec3], b: &[Vec3]) -> Result<Alignment, ReconstructError> {
    if a.len() != b.len() {
        return Err(ReconstructError::GridMismatch { expected: a.len(), found: b.len() });
    }
    if a.is_empty() {
        return Err(ReconstructError::Empty);
    }
    let n = a.len() as f64;
    let ca = a.iter().fold(Vec3::zeros(), |s, p| s + p) / n;
    let cb = b.iter().fold(Vec3::zeros(), |s, p| s + p) / n;
    let cov = a.iter().zip(b).fold(Mat3::zeros(), |m, (p, q)| m + (q - cb) * (p - ca).transpose());
    let svd = SVD::new(cov, true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(ReconstructError::InvalidParameter("SVD failed".into())),
    };
    let d = (u * vt).determinant().signum();
    let rotation = u * Mat3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * vt;
    let translation = cb - rotation * ca;
    let (mut sq, mut max) = (0.0, 0.0f64);
    for (p, q) in a.iter().zip(b) {
        let e = (rotation * p + translation - q).norm();
        sq += e * e;
        max = max.max(e);
    }
    Ok(Alignment {
        rotation,
        translation,
        rms: (sq / n).sqrt(),
        max,
    })
}

/// max entry of σ_a Rᵀ − σ_b: frame rows are directions, so aligning the
/// curve by R carries σ to σRᵀ.
pub fn frame_distance(a: &[Mat3], b: &[Mat3], r: &Mat3) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x * r.transpose() - y).abs().max()).fold(0.0, f64::max)
}
