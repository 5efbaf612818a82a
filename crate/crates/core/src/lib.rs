//! Dark evolution of an N-level system under sequential negative-result
//! projective measurements onto a time-varying monitored state `|f(t)>`.
//!
//! The crate covers the discrete measurement map and its continuous limit,
//! the effective and co-moving Hamiltonians, the Zeno spectrum with its
//! closed-form solutions, inverse design of the monitored state for a
//! prescribed trajectory, and the energy-shift embedding that reproduces
//! dark evolution without measurements.

// Negated comparisons such as `!(x > 0.0)` are used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convergence;
pub mod dark;
pub mod design;
pub mod embedding;
pub mod error;
pub mod linalg;
pub mod output;
pub mod path;
pub mod phase;
pub mod propagate;
pub mod spectrum;
mod stencil;
pub mod tolerances;

pub use convergence::{loglog_fit, LogLogFit};
pub use dark::{
    comoving_hamiltonian, continuous_dark_run, discrete_dark_run, discrete_dark_step,
    effective_hamiltonian, DarkTrajectory, RunMode,
};
pub use design::{
    design_monitored_state, mode_design, validate_dark_compatibility, ClosureTrajectory,
    DesignResult, ModeTrajectory, PrescribedTrajectory,
};
pub use embedding::{
    adiabatic_alpha_check, embedded_run, zeno_deviation, AdiabaticCheck, EmbeddedTrajectory,
};
pub use error::{Error, Result};
pub use linalg::{
    hermitian_eigendecomposition, projector_from_state, unitary_exp, CMatrix, CVector,
    EigenDecomposition, HermitianOperator, Projector, StateVector,
};
pub use num_complex::Complex64;
pub use path::{
    DesignedPath, GeneratorPath, ModePath, MonitoredPath, PathPeriod, PathPoint, SampledPath,
};
pub use phase::{
    local_phase_increments, pancharatnam_phase, parallel_transport_residual, GeometricPhase,
};
pub use propagate::Propagator;
pub use spectrum::{
    closed_form_solution, cyclic_return_fidelity, cyclic_return_fidelity_at,
    three_level_frequencies, zeno_spectrum, ThreeLevelSpectrum, ZenoSpectrum,
};
pub use tolerances::{Settings, Tolerances};
