//! Pseudospectral simulation and inverse-problem workbench for the
//! dissipative active scalar equation on the 2-torus.
//!
//! The equation is d_t theta + u . grad theta + (-Delta)^alpha theta = f with
//! u = (-d2 K theta, d1 K theta) for an order -1 multiplier K. The crate
//! provides the spectral kernels, the linear/dual/nonlinear solvers, the
//! linearization experiments, adjoint-based approximate control, and the
//! kernel-difference reconstruction from exterior pairings.

pub mod control;
pub mod diffusion;
pub mod error;
pub mod field;
pub mod inverse;
pub mod lattice;
pub mod linearize;
pub mod multiplier;
pub mod scalar;
pub mod snapshot;
pub mod time;
pub mod window;

pub use error::{Error, Result};
pub use field::{SobolevKind, SpectralField};
pub use lattice::FourierLattice;
pub use multiplier::{MultiplierSpec, Symbol, VectorField};
pub use time::{SourceTerm, TimeGrid, TimeProfile, Trajectory};
pub use window::Window;
