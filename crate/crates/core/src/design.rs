//! Inverse design: the monitored state that steers the system along a
//! prescribed trajectory.
//!
//! Dark evolution forces `H psi - i psi'` to be parallel to `f`, so the
//! monitored state is that vector normalized. The overlap `<psi|f>` then
//! vanishes only if the trajectory obeys `i<psi|psi'> = <psi|H|psi>`; any
//! trajectory violating it is rejected rather than repaired.
//!
//! The normalization is taken from the vector itself,
//! `N_f^-2 = ||H psi - i psi'||^2 = <psi'|psi'> + <psi|H^2|psi> + 2 Im<psi|H|psi'>`.
//! The cross term vanishes for `H = 0`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CVector, HermitianOperator};
use crate::path::{DesignedPath, ModePath, MonitoredPath};
use crate::stencil::central_derivative;
use crate::tolerances::Settings;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// A target trajectory `psi(t)` with unit norm at every time.
pub trait PrescribedTrajectory: Send + Sync {
    fn dim(&self) -> usize;

    fn state_at(&self, t: f64) -> CVector;

    fn derivative_at(&self, t: f64) -> CVector;

    /// Analytic second derivative, when available. Designed paths use it for
    /// an exact `f'`; otherwise `f'` is differentiated numerically.
    fn second_derivative_at(&self, _t: f64) -> Option<CVector> {
        None
    }
}

/// `psi(t) = sum_j sqrt(p_j) e^{-i nu_j t} |j>`.
///
/// Construction checks only that `p` is a probability vector; whether the
/// trajectory is dark-compatible is a separate question, see
/// [`ModeTrajectory::transport_residual`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTrajectory {
    probabilities: Vec<f64>,
    frequencies: Vec<f64>,
}

impl ModeTrajectory {
    pub fn new(probabilities: Vec<f64>, frequencies: Vec<f64>) -> Result<Self> {
        if probabilities.len() != frequencies.len() {
            return Err(Error::InvalidInput(format!(
                "{} probabilities for {} frequencies",
                probabilities.len(),
                frequencies.len()
            )));
        }
        if probabilities.len() < 2 {
            return Err(Error::InvalidInput("at least two levels are required".into()));
        }
        if probabilities.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidInput("probabilities must be nonnegative".into()));
        }
        if frequencies.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidInput("frequencies must be finite".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Normalization { norm: total.sqrt() });
        }
        Ok(ModeTrajectory {
            probabilities,
            frequencies,
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// `sum_j p_j nu_j`, which must vanish for a parallel-transported target.
    pub fn transport_residual(&self) -> f64 {
        self.probabilities
            .iter()
            .zip(&self.frequencies)
            .map(|(p, w)| p * w)
            .sum()
    }

    /// `sum_j p_j nu_j^2 = <psi'|psi'>`.
    pub fn speed_squared(&self) -> f64 {
        self.probabilities
            .iter()
            .zip(&self.frequencies)
            .map(|(p, w)| p * w * w)
            .sum()
    }

    fn weighted(&self, t: f64, power: i32) -> CVector {
        CVector::from_iterator(
            self.probabilities.len(),
            self.probabilities
                .iter()
                .zip(&self.frequencies)
                .map(|(&p, &w)| p.sqrt() * (-I * w).powi(power) * (-I * w * t).exp()),
        )
    }
}

impl PrescribedTrajectory for ModeTrajectory {
    fn dim(&self) -> usize {
        self.probabilities.len()
    }

    fn state_at(&self, t: f64) -> CVector {
        self.weighted(t, 0)
    }

    fn derivative_at(&self, t: f64) -> CVector {
        self.weighted(t, 1)
    }

    fn second_derivative_at(&self, t: f64) -> Option<CVector> {
        Some(self.weighted(t, 2))
    }
}

type StateFn = dyn Fn(f64) -> CVector + Send + Sync;

/// A trajectory given by closures. Without an explicit derivative, `psi'` is
/// taken with the central fourth-order stencil.
#[derive(Clone)]
pub struct ClosureTrajectory {
    dim: usize,
    state: Arc<StateFn>,
    derivative: Option<Arc<StateFn>>,
    step: f64,
}

impl fmt::Debug for ClosureTrajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosureTrajectory")
            .field("dim", &self.dim)
            .field("analytic_derivative", &self.derivative.is_some())
            .field("step", &self.step)
            .finish()
    }
}

impl ClosureTrajectory {
    pub const DEFAULT_STEP: f64 = 1e-3;

    pub fn new<F>(dim: usize, state: F) -> Self
    where
        F: Fn(f64) -> CVector + Send + Sync + 'static,
    {
        ClosureTrajectory {
            dim,
            state: Arc::new(state),
            derivative: None,
            step: Self::DEFAULT_STEP,
        }
    }

    pub fn with_derivative<F>(mut self, derivative: F) -> Self
    where
        F: Fn(f64) -> CVector + Send + Sync + 'static,
    {
        self.derivative = Some(Arc::new(derivative));
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }
}

impl PrescribedTrajectory for ClosureTrajectory {
    fn dim(&self) -> usize {
        self.dim
    }

    fn state_at(&self, t: f64) -> CVector {
        (self.state)(t)
    }

    fn derivative_at(&self, t: f64) -> CVector {
        match &self.derivative {
            Some(d) => d(t),
            None => central_derivative(|s| (self.state)(s), t, self.step),
        }
    }
}

/// Output of [`design_monitored_state`].
#[derive(Debug, Clone)]
pub struct DesignResult {
    /// Designed path; evaluable at any time, not only on the grid.
    pub path: MonitoredPath,
    pub grid: Vec<f64>,
    /// `N_f` at each grid point.
    pub normalization: Vec<f64>,
    /// `max |i<psi|psi'> - <psi|H|psi>|` over the grid.
    pub compatibility_residual: f64,
    /// `max |<psi|f>|` over the grid.
    pub orthogonality_residual: f64,
}

/// `max_t |i<psi|psi'> - <psi|H|psi>|` over the grid.
pub fn validate_dark_compatibility(
    traj: &dyn PrescribedTrajectory,
    h: &HermitianOperator,
    grid: &[f64],
) -> Result<f64> {
    if traj.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: traj.dim(),
        });
    }
    Ok(grid
        .iter()
        .map(|&t| compatibility_at(traj, h, t))
        .fold(0.0, f64::max))
}

fn compatibility_at(traj: &dyn PrescribedTrajectory, h: &HermitianOperator, t: f64) -> f64 {
    let psi = traj.state_at(t);
    let dpsi = traj.derivative_at(t);
    let energy = psi.dotc(&h.apply(&psi));
    (I * psi.dotc(&dpsi) - energy).norm()
}

/// `f(t) = N_f (H psi - i psi')` with `N_f` real positive.
pub fn design_monitored_state(
    traj: Arc<dyn PrescribedTrajectory>,
    h: &HermitianOperator,
    grid: &[f64],
    settings: &Settings,
) -> Result<DesignResult> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("design grid is empty".into()));
    }
    let tolerance = settings.tolerances.compatibility;
    let residual = validate_dark_compatibility(traj.as_ref(), h, grid)?;
    if residual > tolerance {
        return Err(Error::Compatibility {
            residual,
            tolerance,
        });
    }
    let designed = DesignedPath::new(traj.clone(), h.clone())?;
    let mut normalization = Vec::with_capacity(grid.len());
    let mut orthogonality = 0.0f64;
    for &t in grid {
        let w = designed.direction(t);
        let norm_sqr = w.norm_squared();
        if norm_sqr < settings.tolerances.degenerate_target {
            return Err(Error::DegenerateTarget { value: norm_sqr });
        }
        let n_f = norm_sqr.sqrt().recip();
        let psi = traj.state_at(t);
        orthogonality = orthogonality.max((psi.dotc(&w) * n_f).norm());
        normalization.push(n_f);
    }
    Ok(DesignResult {
        path: MonitoredPath::Designed(designed),
        grid: grid.to_vec(),
        normalization,
        compatibility_residual: residual,
        orthogonality_residual: orthogonality,
    })
}

/// Closed-form design for the mode trajectory with `H = 0`:
/// `f(t) = N_f sum_j sqrt(p_j) nu_j e^{-i nu_j t} |j>`, `N_f = (sum_j p_j nu_j^2)^{-1/2}`.
///
/// This is `i N_f psi'`, the designed state up to the global phase `-1`.
pub fn mode_design(
    probabilities: Vec<f64>,
    frequencies: Vec<f64>,
) -> Result<(ModeTrajectory, MonitoredPath)> {
    let traj = ModeTrajectory::new(probabilities, frequencies)?;
    let speed_sqr = traj.speed_squared();

    let mut active: Vec<f64> = traj
        .probabilities
        .iter()
        .zip(&traj.frequencies)
        .filter(|(p, _)| **p > 0.0)
        .map(|(_, &w)| w)
        .collect();
    active.sort_by(f64::total_cmp);
    active.dedup();
    if active.len() < 2 {
        return Err(Error::DegenerateTarget { value: speed_sqr });
    }

    let scale = traj.frequencies.iter().fold(1.0f64, |m, w| m.max(w.abs()));
    let residual = traj.transport_residual();
    if residual.abs() > 1e-12 * scale {
        return Err(Error::ParallelTransport { residual });
    }
    if speed_sqr < Settings::default().tolerances.degenerate_target {
        return Err(Error::DegenerateTarget { value: speed_sqr });
    }
    let n_f = speed_sqr.sqrt().recip();
    let amplitudes = traj
        .probabilities
        .iter()
        .zip(&traj.frequencies)
        .map(|(p, w)| Complex64::from(n_f * p.sqrt() * w))
        .collect();
    let path = ModePath::in_standard_basis(amplitudes, traj.frequencies.clone())?;
    Ok((traj, MonitoredPath::Mode(path)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm_hermitian, StateVector};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid(end: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| end * k as f64 / n as f64).collect()
    }

    /// Distance between two unit vectors modulo a global phase.
    fn phase_distance(a: &CVector, b: &CVector) -> f64 {
        let ov = a.dotc(b);
        if ov.norm() == 0.0 {
            return b.norm();
        }
        (b - a * (ov / ov.norm())).norm()
    }

    #[test]
    fn compatibility_residuals() {
        let zero = HermitianOperator::zeros(2);
        let g = grid(3.0, 30);
        let ok = ModeTrajectory::new(vec![0.5, 0.5], vec![1.0, -1.0]).unwrap();
        assert!(validate_dark_compatibility(&ok, &zero, &g).unwrap() < 1e-15);

        let bad = ModeTrajectory::new(vec![0.5, 0.5], vec![1.0, 0.0]).unwrap();
        for &t in &g {
            assert!((compatibility_at(&bad, &zero, t) - 0.5).abs() < 1e-15);
        }
        assert!((validate_dark_compatibility(&bad, &zero, &g).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn free_evolution_is_compatible_but_has_nothing_to_measure() {
        let h = HermitianOperator::from_rows(&[
            vec![c(0.3, 0.), c(0.5, -0.2), c(0., 0.)],
            vec![c(0.5, 0.2), c(-1., 0.), c(0.1, 0.)],
            vec![c(0., 0.), c(0.1, 0.), c(0.7, 0.)],
        ])
        .unwrap();
        let psi0 = StateVector::normalized(vec![c(1., 0.), c(0., 1.), c(0.5, 0.)]).unwrap();
        let (hm, p0, hm2) = (h.matrix().clone(), psi0.as_vector().clone(), h.matrix().clone());
        let p1 = p0.clone();
        let traj = ClosureTrajectory::new(3, move |t| expm_hermitian(&hm, t).unwrap() * &p0)
            .with_derivative(move |t| {
                (&hm2 * (expm_hermitian(&hm2, t).unwrap() * &p1)) * c(0., -1.)
            });
        let g = grid(2.0, 20);
        assert!(validate_dark_compatibility(&traj, &h, &g).unwrap() < 1e-13);
        let err = design_monitored_state(Arc::new(traj), &h, &g, &Settings::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateTarget { .. }));
    }

    #[test]
    fn designed_state_for_two_mode_trajectory() {
        let traj = Arc::new(ModeTrajectory::new(vec![0.5, 0.5], vec![1.0, -1.0]).unwrap());
        let zero = HermitianOperator::zeros(2);
        let g = grid(4.0, 40);
        let res = design_monitored_state(traj, &zero, &g, &Settings::default()).unwrap();
        assert!(res.normalization.iter().all(|n| (n - 1.0).abs() < 1e-15));
        assert!(res.orthogonality_residual < 1e-15);
        for &t in &g {
            let f = res.path.evaluate(t).unwrap().f;
            let expected = CVector::from_vec(vec![
                c(0., -t).exp() * FRAC_1_SQRT_2,
                -c(0., t).exp() * FRAC_1_SQRT_2,
            ]);
            assert!(phase_distance(&expected, f.as_vector()) < 1e-14);
        }
    }

    #[test]
    fn designed_state_for_three_mode_trajectory() {
        let traj = Arc::new(ModeTrajectory::new(vec![0.5, 0.25, 0.25], vec![0.0, 2.0, -2.0]).unwrap());
        let zero = HermitianOperator::zeros(3);
        let g = grid(5.0, 50);
        let res = design_monitored_state(traj.clone(), &zero, &g, &Settings::default()).unwrap();
        assert!(res
            .normalization
            .iter()
            .all(|n| (n - FRAC_1_SQRT_2).abs() < 1e-15));
        let (_, closed) = mode_design(vec![0.5, 0.25, 0.25], vec![0.0, 2.0, -2.0]).unwrap();
        for &t in &g {
            let designed = res.path.evaluate(t).unwrap();
            let exact = closed.evaluate(t).unwrap();
            let expected = CVector::from_vec(vec![
                c(0., 0.),
                c(0., -2.0 * t).exp() * FRAC_1_SQRT_2,
                -c(0., 2.0 * t).exp() * FRAC_1_SQRT_2,
            ]);
            assert!((exact.f.as_vector() - &expected).norm() < 1e-14);
            // The normalized direction differs from the closed form by the phase -1.
            assert!((designed.f.as_vector() + &expected).norm() < 1e-14);
            assert!((&designed.fdot + &exact.fdot).norm() < 1e-13);
            assert!(traj.state_at(t).dotc(designed.f.as_vector()).norm() < 1e-15);
        }
    }

    #[test]
    fn stationary_target_is_degenerate() {
        let traj = Arc::new(ModeTrajectory::new(vec![0.5, 0.5], vec![0.0, 0.0]).unwrap());
        let err = design_monitored_state(traj, &HermitianOperator::zeros(2), &[0.0, 1.0], &Settings::default())
            .unwrap_err();
        assert!(matches!(err, Error::DegenerateTarget { .. }));
    }

    #[test]
    fn incompatible_target_is_rejected() {
        let traj = Arc::new(ModeTrajectory::new(vec![0.5, 0.5], vec![1.0, 0.0]).unwrap());
        let err = design_monitored_state(traj, &HermitianOperator::zeros(2), &[0.0, 1.0], &Settings::default())
            .unwrap_err();
        assert!(matches!(err, Error::Compatibility { .. }));
        assert!(err.is_physics());
    }

    #[test]
    fn mode_design_errors() {
        assert!(matches!(
            mode_design(vec![0.5, 0.5], vec![1.0, 0.0]),
            Err(Error::ParallelTransport { .. })
        ));
        assert!(matches!(
            mode_design(vec![1.0, 0.0, 0.0], vec![0.0, 3.0, 1.0]),
            Err(Error::DegenerateTarget { .. })
        ));
        assert!(matches!(
            mode_design(vec![1.0, 0.0, 0.0], vec![2.0, 3.0, 1.0]),
            Err(Error::DegenerateTarget { .. })
        ));
        assert!(matches!(
            mode_design(vec![0.5, 0.5], vec![1.5, 1.5]),
            Err(Error::DegenerateTarget { .. })
        ));
    }

    #[test]
    fn frequency_scaling_keeps_amplitude_profile() {
        let (_, a) = mode_design(vec![0.5, 0.25, 0.25], vec![0.0, 2.0, -2.0]).unwrap();
        let (_, b) = mode_design(vec![0.5, 0.25, 0.25], vec![0.0, 4.0, -4.0]).unwrap();
        let (MonitoredPath::Mode(a), MonitoredPath::Mode(b)) = (a, b) else {
            unreachable!()
        };
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x - y).norm() < 1e-15);
        }
        assert_eq!(b.frequencies(), &[0.0, 4.0, -4.0]);
    }

    #[test]
    fn closure_trajectory_uses_stencil_derivative() {
        let traj = ModeTrajectory::new(vec![0.5, 0.25, 0.25], vec![0.0, 2.0, -2.0]).unwrap();
        let copy = traj.clone();
        let numeric = ClosureTrajectory::new(3, move |t| copy.state_at(t));
        for t in [0.0, 0.7, 3.1] {
            assert!((numeric.derivative_at(t) - traj.derivative_at(t)).norm() < 1e-10);
        }
    }
}
