//! Pathwise laboratory for the stochastic 3D vorticity equation: rough-path
//! enhancement of Brownian drivers, periodic spectral calculus, the
//! exponential noise transformation, a Picard solver for the transformed
//! mild equation, and numerical checks of the rough weak formulation.

pub mod error;
pub mod exact;
pub mod fit;
pub mod gamma;
pub mod harness;
pub mod roughpath;
pub mod solver;
pub mod spectral;
pub mod verifier;

pub use error::{Error, Result};
