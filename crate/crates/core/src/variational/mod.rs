//! Invariant calculus of variations for curves under the rotation
//! minimizing frame: the syzygy operator, Euler–Lagrange assembly, Noether
//! conservation laws and their numeric checks.

pub mod compat;
pub mod el;
pub mod fixtures;
pub mod io;
pub mod linop;
pub mod noether;

pub use compat::{check_syzygy_compatibility, compatibility_order, CompatibilityReport, CurveFamily, EvolutionField, HelixPitchFamily, RigidMotionFamily, StaticFamily};
pub use el::{assemble_el_system, assemble_el_system_with, residuals_along, solve_el, trajectory_from_invariants, ElSystem, FrameInit, InvariantTrajectory, SolveOptions, Truncation};
pub use linop::{syzygy_adjoint, syzygy_operator, syzygy_symbolic, GridOperator, LinOp, LinOpMatrix};
pub use noether::{check_diffv, conservation_constants, first_integrals, noether_vector, DiffvReport, FirstIntegrals, NoetherState, NoetherVector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VariationalError {
    #[error("grid has {nodes} nodes; the stencils need at least {needed}")]
    GridTooShort { nodes: usize, needed: usize },
    #[error("grids differ: expected {expected} nodes, found {found}")]
    GridMismatch { expected: usize, found: usize },
    #[error("the top-derivative coefficient matrix is identically singular: {matrix}")]
    NonSolvableTopOrder { matrix: String },
    #[error("residual {residual} is not linear in the top derivatives")]
    NonlinearTopOrder { residual: usize },
    #[error("variable `{0}` is not allowed here")]
    UnsupportedVariable(String),
    #[error("missing initial condition for `{0}`")]
    MissingInitialCondition(String),
    #[error("initial condition `{0}` is not part of the state")]
    UnknownInitialCondition(String),
    #[error("step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("algebra: {0}")]
    Algebra(String),
}
