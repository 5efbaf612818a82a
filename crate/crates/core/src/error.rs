use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("operator is not Hermitian: max |A_ij - conj(A_ji)| = {residual:e}")]
    HermiticityViolation { residual: f64 },

    #[error("expected a unit-norm state, got norm {norm}")]
    Normalization { norm: f64 },

    #[error("state has squared norm {norm_sqr}, which exceeds 1")]
    NormTooLarge { norm_sqr: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time {t} lies outside the sampled range [{start}, {end}]")]
    Domain { t: f64, start: f64, end: f64 },

    #[error("{operation} is not supported for {variant} paths")]
    UnsupportedVariant {
        operation: &'static str,
        variant: &'static str,
    },

    #[error("path derivative does not preserve the norm: |Re<f|fdot>| = {residual:e}")]
    PathNormDrift { residual: f64 },

    #[error(
        "initial state is not orthogonal to the monitored state: \
         |<f|psi0>| = {overlap:e} exceeds {tolerance:e}"
    )]
    Setup { overlap: f64, tolerance: f64 },

    #[error(
        "generator and Hamiltonian do not commute (||[K,H]||_F = {norm:e}); \
         no closed form exists, integrate with continuous_dark_run instead"
    )]
    Commutator { norm: f64 },

    #[error("three-level discriminant xi^2 - 4 eta = {discriminant:e} is negative")]
    NegativeDiscriminant { discriminant: f64 },

    #[error("degenerate target: N_f^-2 = {value:e}, the monitored state is undefined")]
    DegenerateTarget { value: f64 },

    #[error("parallel-transport condition violated: sum p_j nu_j = {residual:e}")]
    ParallelTransport { residual: f64 },

    #[error(
        "trajectory is not dark-compatible: max |i<psi|psi'> - <psi|H|psi>| = \
         {residual:e} exceeds {tolerance:e}"
    )]
    Compatibility { residual: f64, tolerance: f64 },

    #[error("phase undefined: consecutive overlap magnitude {magnitude:e}")]
    UndefinedPhase { magnitude: f64 },

    #[error("time step {dt} is too coarse for energy {energy}: need dt <= {max_dt}")]
    Resolution { dt: f64, energy: f64, max_dt: f64 },

    #[error("path is aperiodic")]
    Aperiodic,

    #[error("eigendecomposition failed to converge")]
    EigenConvergence,
}

impl Error {
    /// Errors that reject the physics of a well-formed input, as opposed to
    /// malformed or out-of-range input.
    pub fn is_physics(&self) -> bool {
        matches!(
            self,
            Error::Setup { .. }
                | Error::Commutator { .. }
                | Error::Compatibility { .. }
                | Error::ParallelTransport { .. }
                | Error::DegenerateTarget { .. }
                | Error::PathNormDrift { .. }
                | Error::NegativeDiscriminant { .. }
                | Error::UndefinedPhase { .. }
                | Error::Aperiodic
        )
    }
}
