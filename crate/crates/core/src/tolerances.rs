//! Numerical tolerances shared by every module, gathered in one record.

use crate::propagate::Propagator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Absolute bound on `|A_ij - conj(A_ji)|`.
    pub hermiticity: f64,
    /// Slack allowed above unit squared norm for sub-normalized states.
    pub state_norm_slack: f64,
    /// Bound on `| ||f|| - 1 |` for states that must be unit.
    pub unit_norm: f64,
    /// Components smaller than this do not fix an eigenvector's phase.
    pub phase_significance: f64,
    /// Bound on `|Re<f|fdot>|` accepted by the effective Hamiltonian.
    pub path_norm_drift: f64,
    /// Bound on `|<f|psi0>|` for runs that need an orthogonal start.
    pub setup_orthogonality: f64,
    /// Relative bound on `||[K,H]||_F / (||K||_F ||H||_F)`.
    pub commutator: f64,
    /// Bound on `max |i<psi|psi'> - <psi|H|psi>|` for inverse design.
    pub compatibility: f64,
    /// Smallest acceptable `N_f^-2`.
    pub degenerate_target: f64,
    /// Smallest overlap magnitude with a defined argument.
    pub overlap_floor: f64,
    /// Closed-path detection threshold for the Pancharatnam phase.
    pub closure: f64,
    /// Bound on `|r q - p|` for accepting `p/q` as a frequency ratio.
    pub rational: f64,
    pub max_denominator: u64,
    /// Bound on the phase mismatch of a detected period.
    pub period_closure: f64,
    /// Embedded runs require `dt * E <= embedding_resolution`.
    pub embedding_resolution: f64,
    /// Width of the fast-oscillation filter, in periods of `2 pi / E`.
    pub alpha_filter_periods: f64,
    /// Minimum `E / max(|<f|psi'>|, |<f|fdot>|)` for the adiabatic regime.
    pub adiabatic_ratio: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        hermiticity: 1e-12,
        state_norm_slack: 1e-12,
        unit_norm: 1e-10,
        phase_significance: 1e-10,
        path_norm_drift: 1e-8,
        setup_orthogonality: 1e-8,
        commutator: 1e-10,
        compatibility: 1e-8,
        degenerate_target: 1e-20,
        overlap_floor: 1e-12,
        closure: 1e-6,
        rational: 1e-9,
        max_denominator: 1_000_000,
        period_closure: 1e-8,
        embedding_resolution: 0.1,
        alpha_filter_periods: 4.0,
        adiabatic_ratio: 10.0,
    };

    /// Tighter physics checks for scenario validation.
    pub const STRICT: Tolerances = Tolerances {
        path_norm_drift: 1e-10,
        setup_orthogonality: 1e-10,
        commutator: 1e-12,
        compatibility: 1e-10,
        ..Tolerances::DEFAULT
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances::DEFAULT
    }
}

/// Options threaded through every time-stepping run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Settings {
    pub tolerances: Tolerances,
    pub propagator: Propagator,
}

impl Settings {
    pub fn strict() -> Self {
        Settings {
            tolerances: Tolerances::STRICT,
            ..Settings::default()
        }
    }

    pub fn with_propagator(mut self, propagator: Propagator) -> Self {
        self.propagator = propagator;
        self
    }
}
