//! Rotation minimizing frames and the invariant calculus of variations for
//! space curves.

pub mod jet;
pub mod odesolve;
pub mod frames;
pub mod par;
pub mod reconstruct;
pub mod variational;
pub mod verify;
