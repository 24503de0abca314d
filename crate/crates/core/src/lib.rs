//! Classical and quantum mechanics on `R^{2N}` with the modified two-form
//! `omega = omega_0 - eF + rG`, for constant antisymmetric fields.
//!
//! - [`forms`]: the two-form, its regularity, and the Poisson matrix.
//! - [`darboux`]: linear maps to canonical coordinates.
//! - [`dynamics`]: quadratic Hamiltonians, frequencies, propagation.
//! - [`constrained`]: the degenerate regime and the constraint chain.
//! - [`spectrum`]: quantum levels and the `chi -> 0` limit.
//! - [`symmetry`]: rotations, momenta, and field invariance.

pub mod constrained;
pub mod darboux;
pub mod dynamics;
pub mod error;
pub mod forms;
pub mod linalg;
pub mod spectrum;
pub mod sweep;
pub mod symmetry;

pub use error::{Error, Result};
pub use forms::{FieldConfig, OmegaMatrix, PoissonMatrix, Tolerances};
pub use sweep::Execution;
