//! Measurement-free realization of dark evolution: a large energy shift `E`
//! on the monitored state, `H(t) = E |f(t)><f(t)|`.
//!
//! The full state splits as `psi_s = Psi + alpha f` with `<f|Psi> = 0`. For
//! large `E` the component `alpha` follows its quasi-static value
//! `i<f|Psi'>/E = -i<f'|Psi>/E` and `Psi` approaches the dark trajectory.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::dark::{check_setup, uniform_grid, DarkTrajectory, RunMode};
use crate::error::{Error, Result};
use crate::linalg::{outer, CMatrix, CVector, StateVector};
use crate::path::MonitoredPath;
use crate::tolerances::Settings;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone)]
pub struct EmbeddedTrajectory {
    pub times: Vec<f64>,
    /// Unit-norm state under the full Hamiltonian.
    pub full_states: Vec<StateVector>,
    /// `Psi = psi_s - alpha f`
    pub dark_component: Vec<StateVector>,
    /// `alpha = <f|psi_s>`
    pub alpha: Vec<Complex64>,
    pub energy: f64,
    pub step: f64,
}

impl EmbeddedTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `max_t |1 - ||psi_s||^2|`
    pub fn max_norm_deviation(&self) -> f64 {
        self.full_states
            .iter()
            .map(|s| (1.0 - s.norm_sqr()).abs())
            .fold(0.0, f64::max)
    }

    /// `max_t |||Psi||^2 + |alpha|^2 - ||psi_s||^2|`
    pub fn decomposition_residual(&self) -> f64 {
        self.dark_component
            .iter()
            .zip(&self.alpha)
            .zip(&self.full_states)
            .map(|((d, a), s)| (d.norm_sqr() + a.norm_sqr() - s.norm_sqr()).abs())
            .fold(0.0, f64::max)
    }

    /// The dark component as a trajectory, with residuals against `path`.
    pub fn to_dark_trajectory(&self, path: &MonitoredPath) -> Result<DarkTrajectory> {
        let mut traj =
            DarkTrajectory::from_states(self.times.clone(), self.dark_component.clone(), path)?;
        traj.mode = RunMode::Continuous;
        traj.step = self.step;
        Ok(traj)
    }
}

/// Integrates `i psi_s' = E f <f|psi_s>` from `psi0` with the configured
/// propagator.
pub fn embedded_run(
    psi0: &StateVector,
    path: &MonitoredPath,
    energy: f64,
    t_final: f64,
    dt: f64,
    settings: &Settings,
) -> Result<EmbeddedTrajectory> {
    if !(energy >= 0.0) || !energy.is_finite() {
        return Err(Error::InvalidInput(format!(
            "energy must be finite and nonnegative, got {energy}"
        )));
    }
    if path.dim() != psi0.dim() {
        return Err(Error::DimensionMismatch {
            expected: path.dim(),
            found: psi0.dim(),
        });
    }
    psi0.require_unit(settings.tolerances.unit_norm)?;
    let max_dt = settings.tolerances.embedding_resolution / energy;
    if dt > max_dt {
        return Err(Error::Resolution {
            dt,
            energy,
            max_dt,
        });
    }
    let (steps, dt) = uniform_grid(t_final, dt)?;
    let f0 = path.state_raw(0.0)?;
    check_setup(&f0, psi0.as_vector(), &settings.tolerances)?;

    let hamiltonian = |s: f64| -> Result<CMatrix> {
        let f = path.state_raw(s)?;
        Ok(outer(&f, &f) * Complex64::from(energy))
    };

    let mut out = EmbeddedTrajectory {
        times: Vec::with_capacity(steps + 1),
        full_states: Vec::with_capacity(steps + 1),
        dark_component: Vec::with_capacity(steps + 1),
        alpha: Vec::with_capacity(steps + 1),
        energy,
        step: dt,
    };
    let mut record = |t: f64, psi: &CVector, f: &CVector| {
        let alpha = f.dotc(psi);
        out.times.push(t);
        out.dark_component
            .push(StateVector::from_raw(psi - f * alpha));
        out.alpha.push(alpha);
        out.full_states.push(StateVector::from_raw(psi.clone()));
    };

    let mut psi = psi0.as_vector().clone();
    record(0.0, &psi, &f0);
    for k in 0..steps {
        let t = k as f64 * dt;
        psi = settings.propagator.step(&hamiltonian, t, dt, &psi)?;
        let t_next = if k + 1 == steps { t_final } else { (k + 1) as f64 * dt };
        let f = path.state_raw(t_next)?;
        record(t_next, &psi, &f);
    }
    Ok(out)
}

/// `max_t ||Psi_embedded(t) - Psi_dark(t)||` over a shared time grid.
pub fn zeno_deviation(embedded: &EmbeddedTrajectory, dark: &DarkTrajectory) -> Result<f64> {
    if embedded.len() != dark.len() {
        return Err(Error::InvalidInput(format!(
            "grids differ: {} embedded points, {} dark points",
            embedded.len(),
            dark.len()
        )));
    }
    let mut worst = 0.0f64;
    for ((te, e), (td, d)) in embedded
        .times
        .iter()
        .zip(&embedded.dark_component)
        .zip(dark.times.iter().zip(&dark.states))
    {
        if (te - td).abs() > 1e-9 * te.abs().max(1.0) {
            return Err(Error::InvalidInput(format!("grids differ at t = {te} vs {td}")));
        }
        worst = worst.max((e.as_vector() - d.as_vector()).norm());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticCheck {
    /// `max_t |<alpha> - <i<f|Psi'>/E>|` with `<.>` the moving average over
    /// the filter window; points closer than half a window to either end are
    /// skipped.
    pub residual: f64,
    /// `E / max_t max(|<f|Psi'>|, |<f|f'>|)`
    pub regime_ratio: f64,
    /// `max_t |<f|Psi'>|`
    pub max_transfer: f64,
    pub in_regime: bool,
}

/// Compares `alpha` with its adiabatic value after averaging out
/// oscillations at frequency `E`.
pub fn adiabatic_alpha_check(
    traj: &EmbeddedTrajectory,
    path: &MonitoredPath,
    settings: &Settings,
) -> Result<AdiabaticCheck> {
    let tol = settings.tolerances;
    let n = traj.len();
    let mut predicted = Vec::with_capacity(n);
    let mut max_transfer = 0.0f64;
    let mut max_self = 0.0f64;
    for (&t, psi) in traj.times.iter().zip(&traj.dark_component) {
        let (f, fdot) = path.evaluate_raw(t)?;
        // <f|Psi'> = -<f'|Psi> because <f|Psi> vanishes identically.
        let transfer = -fdot.dotc(psi.as_vector());
        max_transfer = max_transfer.max(transfer.norm());
        max_self = max_self.max(f.dotc(&fdot).norm());
        predicted.push(if traj.energy > 0.0 {
            I * transfer / traj.energy
        } else {
            Complex64::from(0.0)
        });
    }
    let scale = max_transfer.max(max_self);
    let regime_ratio = if scale == 0.0 {
        f64::INFINITY
    } else {
        traj.energy / scale
    };
    let in_regime = regime_ratio >= tol.adiabatic_ratio;
    if !in_regime {
        log::warn!(
            "E = {} is only {:.3} times the transfer rate; adiabatic elimination is unreliable",
            traj.energy,
            regime_ratio
        );
    }

    let residual = if traj.energy == 0.0 || max_transfer == 0.0 {
        traj.alpha
            .iter()
            .zip(&predicted)
            .map(|(a, p)| (a - p).norm())
            .fold(0.0, f64::max)
    } else {
        let window = tol.alpha_filter_periods * TAU / traj.energy;
        let a = moving_average(&traj.times, &traj.alpha, window);
        let p = moving_average(&traj.times, &predicted, window);
        a.iter()
            .zip(&p)
            .filter_map(|(a, p)| Some((a.as_ref()? - p.as_ref()?).norm()))
            .fold(0.0, f64::max)
    };
    Ok(AdiabaticCheck {
        residual,
        regime_ratio,
        max_transfer,
        in_regime,
    })
}

/// Centered trapezoid average over `[t - w/2, t + w/2]` on a uniform grid.
/// Points whose window leaves the grid yield `None`.
fn moving_average(times: &[f64], values: &[Complex64], window: f64) -> Vec<Option<Complex64>> {
    let n = times.len();
    if n < 2 {
        return vec![None; n];
    }
    let dt = times[1] - times[0];
    let half = ((window / 2.0) / dt).round().max(1.0) as usize;
    // Prefix sums of trapezoid panels.
    let mut prefix = vec![Complex64::from(0.0); n];
    for i in 1..n {
        prefix[i] = prefix[i - 1] + (values[i - 1] + values[i]) * 0.5;
    }
    (0..n)
        .map(|i| {
            if i < half || i + half >= n {
                None
            } else {
                Some((prefix[i + half] - prefix[i - half]) / (2 * half) as f64)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dark::continuous_dark_run;
    use crate::linalg::HermitianOperator;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn equal_amplitude_path() -> MonitoredPath {
        let k = HermitianOperator::from_real_diagonal(&[1.0, 2.0, 3.0]);
        let f0 = StateVector::normalized(vec![c(1., 0.); 3]).unwrap();
        MonitoredPath::generator(k, f0).unwrap()
    }

    fn quiet_start() -> StateVector {
        StateVector::normalized(vec![c(1., 0.), c(-2., 0.), c(1., 0.)]).unwrap()
    }

    #[test]
    fn constant_path_leaves_state_untouched() {
        let f0 = StateVector::normalized(vec![c(1., 0.), c(0., 1.), c(0., 0.)]).unwrap();
        let path = MonitoredPath::constant(f0).unwrap();
        let psi0 = StateVector::normalized(vec![c(0., 1.), c(1., 0.), c(2., 0.)]).unwrap();
        let run = embedded_run(&psi0, &path, 50.0, 1.0, 1e-3, &Settings::default()).unwrap();
        let drift = run
            .full_states
            .iter()
            .map(|s| (s.as_vector() - psi0.as_vector()).norm())
            .fold(0.0, f64::max);
        assert!(drift < 1e-12, "drift {drift:e}");
        assert!(run.alpha.iter().all(|a| a.norm() < 1e-15));
        let check = adiabatic_alpha_check(&run, &path, &Settings::default()).unwrap();
        assert!(check.residual < 1e-15);
    }

    #[test]
    fn zero_energy_is_free_evolution() {
        let path = equal_amplitude_path();
        let psi0 = quiet_start();
        let run = embedded_run(&psi0, &path, 0.0, 1.0, 1e-2, &Settings::default()).unwrap();
        for s in &run.full_states {
            assert!((s.as_vector() - psi0.as_vector()).norm() < 1e-15);
        }
    }

    #[test]
    fn coarse_step_is_rejected() {
        let err = embedded_run(
            &quiet_start(),
            &equal_amplitude_path(),
            100.0,
            1.0,
            2e-3,
            &Settings::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Resolution { .. }));
    }

    #[test]
    fn overlapping_start_is_rejected() {
        let psi0 = StateVector::normalized(vec![c(1., 0.), c(0., 0.), c(0., 0.)]).unwrap();
        let err = embedded_run(&psi0, &equal_amplitude_path(), 10.0, 1.0, 1e-3, &Settings::default())
            .unwrap_err();
        assert!(matches!(err, Error::Setup { .. }));
    }

    #[test]
    fn decomposition_and_alpha_bound() {
        let path = equal_amplitude_path();
        let energy = 100.0;
        let run = embedded_run(&quiet_start(), &path, energy, 2.0, 5e-4, &Settings::default()).unwrap();
        assert!(run.max_norm_deviation() < 1e-10);
        assert!(run.decomposition_residual() < 1e-10);
        let check = adiabatic_alpha_check(&run, &path, &Settings::default()).unwrap();
        assert!(check.in_regime);
        let bound = check.max_transfer / energy * 1.5;
        assert!(run.alpha.iter().all(|a| a.norm() <= bound));
    }

    #[test]
    fn deviation_from_dark_run_shrinks_with_energy() {
        let path = equal_amplitude_path();
        let psi0 = quiet_start();
        let settings = Settings::default();
        let zero = HermitianOperator::zeros(3);
        let dark = continuous_dark_run(&psi0, &path, &zero, 2.0, 2.5e-4, &settings).unwrap();
        let dev = |e: f64| {
            let run = embedded_run(&psi0, &path, e, 2.0, 2.5e-4, &settings).unwrap();
            zeno_deviation(&run, &dark).unwrap()
        };
        let (d100, d200) = (dev(100.0), dev(200.0));
        let ratio = d100 / d200;
        assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn moving_average_of_linear_data_is_exact() {
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.01).collect();
        let values: Vec<Complex64> = times.iter().map(|t| c(2.0 * t, -t)).collect();
        let avg = moving_average(&times, &values, 0.2);
        for (i, a) in avg.iter().enumerate() {
            match a {
                Some(a) => assert!((a - values[i]).norm() < 1e-13),
                None => assert!(!(10..=90).contains(&i)),
            }
        }
    }
}
