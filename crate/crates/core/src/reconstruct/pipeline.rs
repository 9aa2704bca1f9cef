//! Frame, position and checks in one pass, with a serializable report.

use serde::Serialize;

use crate::frames::{CurveSamples, Mat3, Vec3};
use crate::variational::noether::{first_integrals, FirstIntegrals};
use crate::variational::InvariantTrajectory;

use super::align::{align_points, frame_distance};
use super::direct::reconstruct_direct;
use super::position::{reconstruct_position, PositionMethod, PositionReconstruction};
use super::sigma::{reconstruct_sigma, ReconstructionCase, SigmaOptions, SigmaReconstruction};
use super::ReconstructError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineOptions {
    pub psi0: f64,
    pub z0: f64,
    /// Translate the result so that P(s₀) = p0.
    pub p0: Option<Vec3>,
    pub sigma: SigmaOptions,
    /// Also integrate σ′ = Qσ directly and compare.
    pub compare_direct: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            psi0: 0.0,
            z0: 0.0,
            p0: None,
            sigma: SigmaOptions::default(),
            compare_direct: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub position_rms: f64,
    pub position_max: f64,
    /// max entry of σ_aligned − σ_reference.
    pub frame_distance: f64,
}

/// Rigidly align `a` onto `b` and measure what is left.
pub fn compare(a: &CurveSamples, sa: &[Mat3], b: &CurveSamples, sb: &[Mat3]) -> Result<Comparison, ReconstructError> {
    let al = align_points(&a.points, &b.points)?;
    Ok(Comparison {
        position_rms: al.rms,
        position_max: al.max,
        frame_distance: frame_distance(sa, sb, &al.rotation),
    })
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub sigma: SigmaReconstruction,
    pub position: PositionReconstruction,
    pub first_integrals: FirstIntegrals,
    pub direct: Option<Comparison>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReconstructionReport {
    pub nodes: usize,
    pub c: [f64; 6],
    pub psi0: f64,
    pub case_log: ReconstructionCase,
    pub sigma_c1_residual: f64,
    pub sigma_c1_residual_ok: bool,
    pub curvature_matrix_residual: f64,
    pub orthonormality_error: f64,
    pub position_method: PositionMethod,
    pub dual_path_max: Option<f64>,
    pub first_integral_drift: [f64; 2],
    pub noether_vs_direct: Option<Comparison>,
}

pub fn reconstruct(traj: &InvariantTrajectory, c: &[f64; 6], opts: &PipelineOptions) -> Result<Reconstruction, ReconstructError> {
    let sigma = reconstruct_sigma(traj, c, opts.psi0, opts.sigma)?;
    let position = reconstruct_position(&sigma.frame, traj, c, opts.z0, opts.p0)?;
    let direct = if opts.compare_direct {
        let d = reconstruct_direct(traj, &sigma.frame.rows[0], &position.curve.points[0])?;
        Some(compare(&position.curve, &sigma.frame.rows, &d.curve, &d.frame.rows)?)
    } else {
        None
    };
    Ok(Reconstruction {
        first_integrals: first_integrals(&traj.v, Some(c)),
        sigma,
        position,
        direct,
    })
}

impl Reconstruction {
    pub fn report(&self, c: &[f64; 6], psi0: f64) -> ReconstructionReport {
        ReconstructionReport {
            nodes: self.sigma.frame.len(),
            c: *c,
            psi0,
            case_log: self.sigma.case_log.clone(),
            sigma_c1_residual: self.sigma.c1_residual,
            sigma_c1_residual_ok: self.sigma.c1_residual_ok,
            curvature_matrix_residual: self.sigma.curvature_matrix_residual,
            orthonormality_error: self.sigma.frame.orthonormality_error(),
            position_method: self.position.methods.first().copied().unwrap_or(PositionMethod::Quadrature),
            dual_path_max: self.position.dual_path_max,
            first_integral_drift: self.first_integrals.relative_drift,
            noether_vs_direct: self.direct.clone(),
        }
    }
}
