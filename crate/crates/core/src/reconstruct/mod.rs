//! Recovery of extremal curves from invariant trajectories: the frame from
//! the conservation laws by one quadrature for an angle ψ, the position
//! algebraically, a direct frame-ODE oracle, rigid alignment and tube meshes.

pub mod align;
pub mod cayley;
pub mod direct;
pub mod pipeline;
pub mod position;
pub mod sigma;
pub mod sweep;

pub use align::{align_points, frame_distance, Alignment};
pub use cayley::{cayley_phi, rotation, CayleyParams};
pub use direct::{reconstruct_direct, DirectReconstruction};
pub use pipeline::{compare, reconstruct, Comparison, PipelineOptions, Reconstruction, ReconstructionReport};
pub use position::{reconstruct_position, PositionMethod, PositionReconstruction, EPS_ALG};
pub use sigma::{reconstruct_sigma, Case, CaseSwitch, ReconstructionCase, SigmaOptions, SigmaReconstruction};
pub use sweep::{sweep_surface, twist_metric, Mesh, MeshStats};

pub use crate::variational::noether::{first_integrals, FirstIntegrals};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReconstructError {
    #[error("zero quaternion")]
    ZeroQuaternion,
    #[error("zero rotation axis")]
    ZeroAxis,
    #[error("c1 vanishes; the frame cannot be recovered from the conservation laws")]
    ZeroC1,
    #[error("neither case is admissible at s = {s}: distances {case1:e} and {case2:e} are below {eps:e}")]
    Inadmissible { s: f64, case1: f64, case2: f64, eps: f64 },
    #[error("trajectory is empty")]
    Empty,
    #[error("grids differ: expected {expected} nodes, found {found}")]
    GridMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value at s = {0}")]
    NonFinite(f64),
}
