//! Certified finite-key secret key rates for discrete-variable QKD.
//!
//! Entropy bounds come from two semidefinite programs (a relative-entropy
//! approximation and a fidelity formulation); every reported bound is the
//! objective of an exactly feasible dual point.

pub mod channels;
pub mod error;
pub mod finitekey;
pub mod matqi;
pub mod minent;
pub mod pipeline;
pub mod protocols;
pub mod relent;
pub mod sdp;

pub use error::{Error, Result};
pub use matqi::{DensityMatrix, HermitianMatrix, C64, CMat, CVec};
