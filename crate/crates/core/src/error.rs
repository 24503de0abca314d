use thiserror::Error;

use crate::constrained::ConstraintChain;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field configuration: {0}")]
    InvalidField(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The two-form is degenerate (det Ψ below the singularity tolerance).
    #[error(
        "two-form is singular: |det Psi| = {det_psi:e} (condition estimate {condition:e}, kernel dimension {kernel_dim})"
    )]
    SingularOmega {
        det_psi: f64,
        condition: f64,
        kernel_dim: usize,
    },

    #[error("chi = {chi:e} is degenerate; use the constrained module")]
    DegenerateChi { chi: f64 },

    #[error("chi = {chi:e} is negative; no closed-form Darboux map, use symplectic_gram_schmidt")]
    NegativeChi { chi: f64 },

    #[error("both charges are nonzero; single-charge Darboux map does not apply")]
    BothChargesNonzero,

    #[error("implicit midpoint resolvent is singular at dt = {dt:e}; try dt <= {suggested_dt:e}")]
    StepRejected { dt: f64, suggested_dt: f64 },

    #[error("two-form is nondegenerate; there are no secondary constraints")]
    NoKernel,

    #[error("constraint system is inconsistent at step {step} (residual {residual:e})")]
    InconsistentSystem {
        step: usize,
        residual: f64,
        chain: Box<ConstraintChain>,
    },

    #[error("initial state violates the secondary constraints (residual {residual:e})")]
    OffConstraint { residual: f64 },

    #[error("matrix is not a rotation (|R^T R - I| = {residual:e})")]
    NotARotation { residual: f64 },
}
