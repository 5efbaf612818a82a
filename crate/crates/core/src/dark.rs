//! Dark evolution: the discrete negative-result measurement map, its
//! continuous limit under the effective Hamiltonian, and the co-moving frame.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    expm_hermitian, outer, sandwich_complement, symmetrize, CMatrix, CVector, HermitianOperator,
    StateVector,
};
use crate::path::MonitoredPath;
use crate::tolerances::{Settings, Tolerances};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Sequential projective measurements every `tau`; states unnormalized.
    Discrete,
    /// Continuous-limit Schroedinger evolution under the effective Hamiltonian.
    Continuous,
    /// States sampled from a prescribed or closed-form trajectory.
    Prescribed,
}

/// Time-indexed states with the diagnostics recorded at every grid point.
#[derive(Debug, Clone)]
pub struct DarkTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub norms: Vec<f64>,
    /// Squared norm; the probability that every measurement so far said "No".
    pub survival_probability: Vec<f64>,
    /// `|<f(t)|psi(t)>|`
    pub orthogonality_residual: Vec<f64>,
    pub mode: RunMode,
    /// `tau` for discrete runs, `dt` otherwise.
    pub step: f64,
}

impl DarkTrajectory {
    /// Builds a trajectory from externally computed states, recording the
    /// orthogonality residual against `path`.
    pub fn from_states(
        times: Vec<f64>,
        states: Vec<StateVector>,
        path: &MonitoredPath,
    ) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{} times for {} states",
                times.len(),
                states.len()
            )));
        }
        let mut traj = DarkTrajectory::with_capacity(RunMode::Prescribed, 0.0, times.len());
        if times.len() > 1 {
            traj.step = times[1] - times[0];
        }
        for (t, s) in times.into_iter().zip(states) {
            let f = path.state_raw(t)?;
            traj.push(t, s.into_vector(), &f);
        }
        Ok(traj)
    }

    /// A bare sequence of states with no monitored path attached; residuals
    /// are recorded as zero.
    pub fn from_samples(times: Vec<f64>, states: Vec<StateVector>) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{} times for {} states",
                times.len(),
                states.len()
            )));
        }
        let step = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        let norms: Vec<f64> = states.iter().map(|s| s.norm()).collect();
        Ok(DarkTrajectory {
            survival_probability: norms.iter().map(|n| n * n).collect(),
            orthogonality_residual: vec![0.0; times.len()],
            norms,
            times,
            states,
            mode: RunMode::Prescribed,
            step,
        })
    }

    fn with_capacity(mode: RunMode, step: f64, n: usize) -> Self {
        DarkTrajectory {
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            norms: Vec::with_capacity(n),
            survival_probability: Vec::with_capacity(n),
            orthogonality_residual: Vec::with_capacity(n),
            mode,
            step,
        }
    }

    fn push(&mut self, t: f64, psi: CVector, f: &CVector) {
        let norm = psi.norm();
        self.orthogonality_residual.push(f.dotc(&psi).norm());
        self.norms.push(norm);
        self.survival_probability.push(norm * norm);
        self.times.push(t);
        self.states.push(StateVector::from_raw(psi));
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("trajectory is never empty")
    }

    /// `1 - ||psi_final||^2`
    pub fn norm_deficit(&self) -> f64 {
        1.0 - self.survival_probability.last().copied().unwrap_or(1.0)
    }

    pub fn max_norm_deviation(&self) -> f64 {
        self.norms.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Largest `|<f|psi>|` after the initial point.
    pub fn max_orthogonality_residual(&self) -> f64 {
        self.orthogonality_residual
            .iter()
            .skip(1)
            .copied()
            .fold(0.0, f64::max)
    }

    /// States rescaled to unit norm, for comparing discrete runs with
    /// continuous ones. Zero states stay zero.
    pub fn normalized_states(&self) -> Vec<CVector> {
        self.states
            .iter()
            .map(|s| {
                let n = s.norm();
                if n > 0.0 {
                    s.as_vector().unscale(n)
                } else {
                    s.as_vector().clone()
                }
            })
            .collect()
    }
}

/// One measurement cycle: `(I - |f><f|) e^{-iH tau} psi`, left unnormalized.
pub fn discrete_dark_step(
    psi: &StateVector,
    f_next: &StateVector,
    h: &HermitianOperator,
    tau: f64,
) -> Result<StateVector> {
    check_dims(h, psi)?;
    check_dims(h, f_next)?;
    f_next.require_unit(Tolerances::DEFAULT.unit_norm)?;
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("tau must be positive, got {tau}")));
    }
    let evolved = expm_hermitian(h.matrix(), tau)? * psi.as_vector();
    Ok(StateVector::from_raw(project_out(evolved, f_next.as_vector())))
}

/// `M` measurement cycles with `f_n = f(n tau)`.
///
/// The initial state must be orthogonal to the first measured state
/// `f(tau)`, or to the path origin `f(0)` so that discrete and continuous
/// runs can share a starting state.
pub fn discrete_dark_run(
    psi0: &StateVector,
    path: &MonitoredPath,
    h: &HermitianOperator,
    tau: f64,
    steps: usize,
    settings: &Settings,
) -> Result<DarkTrajectory> {
    check_dims(h, psi0)?;
    check_path_dim(h, path)?;
    psi0.require_unit(settings.tolerances.unit_norm)?;
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidInput(format!("tau must be positive, got {tau}")));
    }
    if steps == 0 {
        return Err(Error::InvalidInput("at least one measurement is required".into()));
    }
    let f_first = path.state_raw(tau)?;
    let f_origin = path.state_raw(0.0)?;
    let overlap = f_first
        .dotc(psi0.as_vector())
        .norm()
        .min(f_origin.dotc(psi0.as_vector()).norm());
    let tolerance = settings.tolerances.setup_orthogonality;
    if overlap > tolerance {
        return Err(Error::Setup { overlap, tolerance });
    }

    let free = expm_hermitian(h.matrix(), tau)?;
    let mut traj = DarkTrajectory::with_capacity(RunMode::Discrete, tau, steps + 1);
    traj.push(0.0, psi0.as_vector().clone(), &f_origin);
    let mut psi = psi0.as_vector().clone();
    for n in 1..=steps {
        let t = n as f64 * tau;
        let f = if n == 1 { f_first.clone() } else { path.state_raw(t)? };
        psi = project_out(&free * psi, &f);
        traj.push(t, psi.clone(), &f);
    }
    Ok(traj)
}

/// `H_D = P H P + i(|f'><f| - |f><f'|)` with `P = I - |f><f|`.
pub fn effective_hamiltonian(
    h: &HermitianOperator,
    f: &StateVector,
    fdot: &CVector,
    tol: &Tolerances,
) -> Result<HermitianOperator> {
    check_dims(h, f)?;
    if fdot.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: fdot.len(),
        });
    }
    f.require_unit(tol.unit_norm)?;
    let residual = f.as_vector().dotc(fdot).re.abs();
    if residual > tol.path_norm_drift {
        return Err(Error::PathNormDrift { residual });
    }
    Ok(HermitianOperator::from_raw(effective_matrix(
        h.matrix(),
        f.as_vector(),
        fdot,
    )))
}

pub(crate) fn effective_matrix(h: &CMatrix, f: &CVector, fdot: &CVector) -> CMatrix {
    let mut m = if h.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        CMatrix::zeros(f.len(), f.len())
    } else {
        sandwich_complement(h, f)
    };
    let rotation = outer(fdot, f) - outer(f, fdot);
    m += rotation * I;
    symmetrize(&m)
}

/// Continuous-limit evolution `i psi' = H_D(t) psi` on a uniform grid of
/// `round(T / dt)` steps (the step is adjusted to land exactly on `T`).
///
/// `<f|psi>` is not re-projected; its drift is recorded as a diagnostic.
pub fn continuous_dark_run(
    psi0: &StateVector,
    path: &MonitoredPath,
    h: &HermitianOperator,
    t_final: f64,
    dt: f64,
    settings: &Settings,
) -> Result<DarkTrajectory> {
    check_dims(h, psi0)?;
    check_path_dim(h, path)?;
    psi0.require_unit(settings.tolerances.unit_norm)?;
    let (steps, dt) = uniform_grid(t_final, dt)?;
    let f0 = path.state_raw(0.0)?;
    check_setup(&f0, psi0.as_vector(), &settings.tolerances)?;

    let hm = h.matrix();
    let tol = settings.tolerances;
    let generator = |s: f64| -> Result<CMatrix> {
        let (f, fdot) = path.evaluate_raw(s)?;
        let residual = f.dotc(&fdot).re.abs();
        if residual > tol.path_norm_drift {
            return Err(Error::PathNormDrift { residual });
        }
        Ok(effective_matrix(hm, &f, &fdot))
    };

    let mut traj = DarkTrajectory::with_capacity(RunMode::Continuous, dt, steps + 1);
    traj.push(0.0, psi0.as_vector().clone(), &f0);
    let mut psi = psi0.as_vector().clone();
    for k in 0..steps {
        let t = k as f64 * dt;
        psi = settings.propagator.step(&generator, t, dt, &psi)?;
        let t_next = if k + 1 == steps { t_final } else { (k + 1) as f64 * dt };
        let f = path.state_raw(t_next)?;
        traj.push(t_next, psi.clone(), &f);
    }
    Ok(traj)
}

/// `P(0) (e^{iKt} H e^{-iKt} - K) P(0)`, the generator in the frame where
/// `f` is stationary.
pub fn comoving_hamiltonian(
    h: &HermitianOperator,
    k: &HermitianOperator,
    f0: &StateVector,
    t: f64,
) -> Result<HermitianOperator> {
    check_dims(h, f0)?;
    check_dims(k, f0)?;
    f0.require_unit(Tolerances::DEFAULT.unit_norm)?;
    let rotated = if h.is_zero() {
        CMatrix::zeros(h.dim(), h.dim())
    } else {
        let u = expm_hermitian(k.matrix(), t)?;
        u.adjoint() * h.matrix() * u
    };
    Ok(HermitianOperator::from_raw(sandwich_complement(
        &(rotated - k.matrix()),
        f0.as_vector(),
    )))
}

pub(crate) fn project_out(mut psi: CVector, f: &CVector) -> CVector {
    let overlap = f.dotc(&psi);
    psi.axpy(-overlap, f, 1.0.into());
    psi
}

pub(crate) fn check_setup(f0: &CVector, psi0: &CVector, tol: &Tolerances) -> Result<()> {
    let overlap = f0.dotc(psi0).norm();
    if overlap > tol.setup_orthogonality {
        return Err(Error::Setup {
            overlap,
            tolerance: tol.setup_orthogonality,
        });
    }
    Ok(())
}

/// Number of steps and adjusted step size covering `[0, T]`.
pub(crate) fn uniform_grid(t_final: f64, dt: f64) -> Result<(usize, f64)> {
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidInput(format!("final time must be positive, got {t_final}")));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    let ratio = t_final / dt;
    let steps = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) {
        ratio.round()
    } else {
        ratio.ceil()
    }
    .max(1.0) as usize;
    Ok((steps, t_final / steps as f64))
}

pub(crate) fn check_dims(h: &HermitianOperator, s: &StateVector) -> Result<()> {
    if h.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: s.dim(),
        });
    }
    Ok(())
}

pub(crate) fn check_path_dim(h: &HermitianOperator, path: &MonitoredPath) -> Result<()> {
    if h.dim() != path.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: path.dim(),
        });
    }
    Ok(())
}
