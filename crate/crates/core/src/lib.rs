//! carleman: a numerical laboratory for functional models of nondissipative
//! perturbations A = A0 + i psi(A0) F psi(A0) of a self-adjoint operator,
//! attached to parabolic spectral domains.
//!
//! The crate builds the operator triple (A, B, C) at finite matrix scale,
//! constructs the parabolic enclosure and its boundary contour with certified
//! constants, evaluates the generalized characteristic function delta_kappa
//! and the model transforms on that contour, and verifies the theorem-level
//! identities (observation model, duality, control model, H-infinity bound)
//! as numerical properties with explicit tolerances.

pub mod boundary;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod operator;
pub mod transforms;

pub use error::{Error, Result};
pub use operator::{DomainCase, SpectralDiagonal, SystemTriple, WeightFamily, C64};
