//! Unit-quaternion (Cayley) parametrization of SO(3).

use serde::{Deserialize, Serialize};

use crate::frames::{Mat3, Vec3};

use super::ReconstructError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CayleyParams {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub x4: f64,
}

impl CayleyParams {
    pub fn new(x1: f64, x2: f64, x3: f64, x4: f64) -> Self {
        CayleyParams { x1, x2, x3, x4 }
    }

    pub fn norm(&self) -> f64 {
        (self.x1 * self.x1 + self.x2 * self.x2 + self.x3 * self.x3 + self.x4 * self.x4).sqrt()
    }
}

/// Φ(x) for x₁² + x₂² + x₃² + x₄² = 1 (renormalized here): the rotation with
/// axis (x₂, x₃, x₄) and cos ψ = 2x₁² − 1.
pub fn cayley_phi(p: CayleyParams) -> Result<Mat3, ReconstructError> {
    let n = p.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(ReconstructError::ZeroQuaternion);
    }
    let (a, b, c, d) = (p.x1 / n, p.x2 / n, p.x3 / n, p.x4 / n);
    Ok(Mat3::new(
        a * a + b * b - c * c - d * d,
        -2.0 * (a * d - b * c),
        2.0 * (a * c + b * d),
        2.0 * (a * d + b * c),
        a * a - b * b + c * c - d * d,
        -2.0 * (a * b - c * d),
        -2.0 * (a * c - b * d),
        2.0 * (a * b + c * d),
        a * a - b * b - c * c + d * d,
    ))
}

/// R(ψ, a): rotation by ψ about `axis`.
pub fn rotation(psi: f64, axis: &Vec3) -> Result<Mat3, ReconstructError> {
    let n = axis.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(ReconstructError::ZeroAxis);
    }
    let (c, s) = ((psi / 2.0).cos(), (psi / 2.0).sin());
    cayley_phi(CayleyParams::new(c, s * axis.x / n, s * axis.y / n, s * axis.z / n))
}
