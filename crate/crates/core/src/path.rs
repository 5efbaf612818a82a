//! The monitored state `|f(t)>` and its time derivative.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::design::PrescribedTrajectory;
use crate::error::{Error, Result};
use crate::linalg::{CVector, EigenDecomposition, HermitianOperator, StateVector};
use crate::stencil::{central_derivative, node_derivatives};
use crate::tolerances::Tolerances;

const I: Complex64 = Complex64::new(0.0, 1.0);
/// Drift in `||f||` above which an evaluated state is renormalized.
const RENORMALIZE_DRIFT: f64 = 1e-12;
/// Relative tolerance on uniform spacing of sampled paths.
const UNIFORM_SPACING: f64 = 1e-9;
/// Amplitudes below this do not contribute a frequency to the period search.
const SUPPORT_FLOOR: f64 = 1e-12;
/// Step for differentiating designed paths without an analytic second derivative.
const DESIGNED_FD_STEP: f64 = 1e-3;

/// A point on a monitored path: the unit state and its derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub f: StateVector,
    pub fdot: CVector,
}

/// `f(t) = e^{-iKt} f(0)` for a time-independent Hermitian generator `K`.
#[derive(Debug, Clone)]
pub struct GeneratorPath {
    generator: HermitianOperator,
    initial: StateVector,
    eigen: EigenDecomposition,
    /// `<v_k|f(0)>` in the eigenbasis of `K`.
    weights: Vec<Complex64>,
}

impl GeneratorPath {
    pub fn new(generator: HermitianOperator, initial: StateVector) -> Result<Self> {
        if generator.dim() != initial.dim() {
            return Err(Error::DimensionMismatch {
                expected: generator.dim(),
                found: initial.dim(),
            });
        }
        initial.require_unit(Tolerances::DEFAULT.unit_norm)?;
        let eigen = crate::linalg::hermitian_eigendecomposition(&generator)?;
        let weights = eigen.eigenvectors.iter().map(|v| v.inner(&initial)).collect();
        Ok(GeneratorPath {
            generator,
            initial,
            eigen,
            weights,
        })
    }

    pub fn generator(&self) -> &HermitianOperator {
        &self.generator
    }

    pub fn initial(&self) -> &StateVector {
        &self.initial
    }

    fn eval(&self, t: f64) -> (CVector, CVector) {
        let n = self.initial.dim();
        let mut f = CVector::zeros(n);
        let mut fdot = CVector::zeros(n);
        for ((v, &w), &lambda) in self
            .eigen
            .eigenvectors
            .iter()
            .zip(&self.weights)
            .zip(&self.eigen.eigenvalues)
        {
            let amp = w * (-I * lambda * t).exp();
            f.axpy(amp, v.as_vector(), 1.0.into());
            fdot.axpy(-I * lambda * amp, v.as_vector(), 1.0.into());
        }
        (f, fdot)
    }

    /// Expresses the path in the eigenbasis of its generator.
    pub fn to_mode_path(&self) -> Result<ModePath> {
        ModePath::new(
            self.weights.clone(),
            self.eigen.eigenvalues.clone(),
            self.eigen.eigenvectors.clone(),
        )
    }
}

/// `f(t) = sum_j a_j e^{-i Omega_j t} |k_j>` over orthonormal modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModePath {
    amplitudes: Vec<Complex64>,
    frequencies: Vec<f64>,
    modes: Vec<StateVector>,
}

impl ModePath {
    pub fn new(
        amplitudes: Vec<Complex64>,
        frequencies: Vec<f64>,
        modes: Vec<StateVector>,
    ) -> Result<Self> {
        if amplitudes.len() != frequencies.len() || amplitudes.len() != modes.len() {
            return Err(Error::InvalidInput(format!(
                "mode path needs matching lengths, got {} amplitudes, {} frequencies, {} modes",
                amplitudes.len(),
                frequencies.len(),
                modes.len()
            )));
        }
        let Some(first) = modes.first() else {
            return Err(Error::InvalidInput("mode path has no modes".into()));
        };
        let dim = first.dim();
        if let Some(bad) = modes.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        if modes.len() > dim {
            return Err(Error::InvalidInput(format!(
                "{} modes cannot be orthonormal in dimension {dim}",
                modes.len()
            )));
        }
        if frequencies.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidInput("mode frequencies must be finite".into()));
        }
        let tol = Tolerances::DEFAULT.unit_norm;
        for (i, a) in modes.iter().enumerate() {
            for (j, b) in modes.iter().enumerate().skip(i) {
                let expected = if i == j { 1.0 } else { 0.0 };
                if (a.inner(b) - expected).norm() > tol {
                    return Err(Error::InvalidInput(format!(
                        "modes {i} and {j} are not orthonormal"
                    )));
                }
            }
        }
        let weight: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (weight - 1.0).abs() > tol {
            return Err(Error::Normalization { norm: weight.sqrt() });
        }
        Ok(ModePath {
            amplitudes,
            frequencies,
            modes,
        })
    }

    /// Modes taken as the standard basis `|1>, ..., |N>`.
    pub fn in_standard_basis(amplitudes: Vec<Complex64>, frequencies: Vec<f64>) -> Result<Self> {
        let n = amplitudes.len();
        let modes = (0..n)
            .map(|j| StateVector::basis(n, j))
            .collect::<Result<Vec<_>>>()?;
        Self::new(amplitudes, frequencies, modes)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn modes(&self) -> &[StateVector] {
        &self.modes
    }

    fn eval(&self, t: f64) -> (CVector, CVector) {
        let n = self.modes[0].dim();
        let mut f = CVector::zeros(n);
        let mut fdot = CVector::zeros(n);
        for ((a, &w), k) in self.amplitudes.iter().zip(&self.frequencies).zip(&self.modes) {
            let amp = a * (-I * w * t).exp();
            f.axpy(amp, k.as_vector(), 1.0.into());
            fdot.axpy(-I * w * amp, k.as_vector(), 1.0.into());
        }
        (f, fdot)
    }

    /// The equivalent generator `K = sum_j Omega_j |k_j><k_j|`. Directions
    /// outside the span of the modes are assigned zero frequency; they never
    /// carry amplitude so the path is unchanged.
    pub fn to_generator_path(&self) -> Result<GeneratorPath> {
        let n = self.modes[0].dim();
        let mut k = crate::linalg::CMatrix::zeros(n, n);
        let mut f0 = CVector::zeros(n);
        for ((a, &w), mode) in self.amplitudes.iter().zip(&self.frequencies).zip(&self.modes) {
            let v = mode.as_vector();
            k += v * v.adjoint() * Complex64::from(w);
            f0.axpy(*a, v, 1.0.into());
        }
        GeneratorPath::new(HermitianOperator::new(k)?, StateVector::from_vector(f0)?)
    }
}

/// Unit states sampled on a uniform time grid.
///
/// Between nodes the state is interpolated along the great circle joining the
/// phase-aligned neighbours, carrying the relative phase linearly, which keeps
/// the norm exactly one. Node derivatives come from fourth-order stencils and
/// are interpolated with cubic Lagrange weights.
#[derive(Debug, Clone)]
pub struct SampledPath {
    times: Vec<f64>,
    samples: Vec<CVector>,
    derivatives: Vec<CVector>,
    step: f64,
}

impl SampledPath {
    pub fn new(times: Vec<f64>, samples: Vec<StateVector>) -> Result<Self> {
        if times.len() != samples.len() {
            return Err(Error::InvalidInput(format!(
                "{} sample times for {} samples",
                times.len(),
                samples.len()
            )));
        }
        if times.len() < 5 {
            return Err(Error::InvalidInput(
                "a sampled path needs at least 5 samples".into(),
            ));
        }
        let dim = samples[0].dim();
        if let Some(bad) = samples.iter().find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        let step = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        if !(step > 0.0) {
            return Err(Error::InvalidInput("sample times must ascend".into()));
        }
        for (k, w) in times.windows(2).enumerate() {
            if ((w[1] - w[0]) - step).abs() > UNIFORM_SPACING * step.max(times[k].abs()) {
                return Err(Error::InvalidInput(format!(
                    "sample times must be uniformly spaced (interval {k})"
                )));
            }
        }
        let tol = Tolerances::DEFAULT.unit_norm;
        let samples: Vec<CVector> = samples
            .into_iter()
            .map(|s| {
                s.require_unit(tol)?;
                let norm = s.norm();
                Ok(s.into_vector().unscale(norm))
            })
            .collect::<Result<_>>()?;
        let derivatives = node_derivatives(&samples, step);
        Ok(SampledPath {
            times,
            samples,
            derivatives,
            step,
        })
    }

    /// Samples another path at `count` uniformly spaced times on `[start, end]`.
    pub fn from_path(path: &MonitoredPath, start: f64, end: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidInput("need at least two samples".into()));
        }
        let h = (end - start) / (count - 1) as f64;
        let times: Vec<f64> = (0..count).map(|k| start + k as f64 * h).collect();
        let samples = times
            .iter()
            .map(|&t| path.evaluate(t).map(|p| p.f))
            .collect::<Result<Vec<_>>>()?;
        Self::new(times, samples)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    fn eval(&self, t: f64) -> Result<(CVector, CVector)> {
        let (start, end) = (self.start(), self.end());
        let slack = 1e-12 * self.step;
        if !(t >= start - slack && t <= end + slack) {
            return Err(Error::Domain { t, start, end });
        }
        let last = self.times.len() - 1;
        let x = ((t - start) / self.step).clamp(0.0, last as f64);
        let i = (x.floor() as usize).min(last - 1);
        let u = x - i as f64;

        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        let overlap = a.dotc(b);
        let f = if overlap.norm() < 1e-15 {
            // Orthogonal neighbours: no preferred phase, fall back to a chord.
            let chord = a.scale(1.0 - u) + b.scale(u);
            let norm = chord.norm();
            chord.unscale(norm)
        } else {
            let phase = overlap.arg();
            let aligned = b * Complex64::from_polar(1.0, -phase);
            let theta = overlap.norm().min(1.0).acos();
            let mixed = if theta < 1e-12 {
                a.scale(1.0 - u) + aligned.scale(u)
            } else {
                a.scale(((1.0 - u) * theta).sin() / theta.sin())
                    + aligned.scale((u * theta).sin() / theta.sin())
            };
            let norm = mixed.norm();
            mixed.unscale(norm) * Complex64::from_polar(1.0, u * phase)
        };

        // Cubic Lagrange over the four nodes nearest the interval.
        let j0 = i.saturating_sub(1).min(last.saturating_sub(3));
        let mut fdot = CVector::zeros(f.len());
        for m in j0..(j0 + 4).min(last + 1) {
            let mut w = 1.0;
            for q in j0..(j0 + 4).min(last + 1) {
                if q != m {
                    w *= (x - q as f64) / (m as f64 - q as f64);
                }
            }
            fdot.axpy(w.into(), &self.derivatives[m], 1.0.into());
        }
        // Remove the norm-changing component left by interpolation.
        let drift = f.dotc(&fdot).re;
        fdot.axpy((-drift).into(), &f, 1.0.into());
        Ok((f, fdot))
    }
}

/// The monitored state required to steer a prescribed trajectory,
/// `f = (H psi - i psi') / ||H psi - i psi'||`.
#[derive(Clone)]
pub struct DesignedPath {
    trajectory: Arc<dyn PrescribedTrajectory>,
    hamiltonian: HermitianOperator,
}

impl fmt::Debug for DesignedPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DesignedPath")
            .field("dim", &self.trajectory.dim())
            .field("hamiltonian", &self.hamiltonian)
            .finish_non_exhaustive()
    }
}

impl DesignedPath {
    pub fn new(
        trajectory: Arc<dyn PrescribedTrajectory>,
        hamiltonian: HermitianOperator,
    ) -> Result<Self> {
        if trajectory.dim() != hamiltonian.dim() {
            return Err(Error::DimensionMismatch {
                expected: hamiltonian.dim(),
                found: trajectory.dim(),
            });
        }
        Ok(DesignedPath {
            trajectory,
            hamiltonian,
        })
    }

    pub fn trajectory(&self) -> &Arc<dyn PrescribedTrajectory> {
        &self.trajectory
    }

    /// `H psi(t) - i psi'(t)`, the unnormalized monitored state.
    pub(crate) fn direction(&self, t: f64) -> CVector {
        let psi = self.trajectory.state_at(t);
        let dpsi = self.trajectory.derivative_at(t);
        self.hamiltonian.apply(&psi) - dpsi * I
    }

    /// The positive normalization `N_f(t)`.
    pub fn normalization_at(&self, t: f64) -> Result<f64> {
        let norm_sqr = self.direction(t).norm_squared();
        if norm_sqr < Tolerances::DEFAULT.degenerate_target {
            return Err(Error::DegenerateTarget { value: norm_sqr });
        }
        Ok(norm_sqr.sqrt().recip())
    }

    fn unit_direction(&self, t: f64) -> Result<CVector> {
        let w = self.direction(t);
        let norm_sqr = w.norm_squared();
        if norm_sqr < Tolerances::DEFAULT.degenerate_target {
            return Err(Error::DegenerateTarget { value: norm_sqr });
        }
        Ok(w.unscale(norm_sqr.sqrt()))
    }

    fn eval(&self, t: f64) -> Result<(CVector, CVector)> {
        let w = self.direction(t);
        let norm_sqr = w.norm_squared();
        if norm_sqr < Tolerances::DEFAULT.degenerate_target {
            return Err(Error::DegenerateTarget { value: norm_sqr });
        }
        let norm = norm_sqr.sqrt();
        let f = w.unscale(norm);
        let fdot = match self.trajectory.second_derivative_at(t) {
            Some(ddpsi) => {
                let dpsi = self.trajectory.derivative_at(t);
                let dw = self.hamiltonian.apply(&dpsi) - ddpsi * I;
                let radial = f.dotc(&dw).re;
                (dw - &f * Complex64::from(radial)).unscale(norm)
            }
            None => {
                // Differentiate the normalized direction; its phase is smooth
                // because N_f is real positive.
                let mut failure = None;
                let d = central_derivative(
                    |s| match self.unit_direction(s) {
                        Ok(v) => v,
                        Err(e) => {
                            failure = Some(e);
                            CVector::zeros(f.len())
                        }
                    },
                    t,
                    DESIGNED_FD_STEP,
                );
                if let Some(e) = failure {
                    return Err(e);
                }
                let radial = f.dotc(&d).re;
                d - &f * Complex64::from(radial)
            }
        };
        Ok((f, fdot))
    }
}

/// The time-varying monitored state.
#[derive(Debug, Clone)]
pub enum MonitoredPath {
    Generator(GeneratorPath),
    Mode(ModePath),
    Sampled(SampledPath),
    Designed(DesignedPath),
}

impl MonitoredPath {
    pub fn generator(k: HermitianOperator, f0: StateVector) -> Result<Self> {
        GeneratorPath::new(k, f0).map(MonitoredPath::Generator)
    }

    /// A path that never moves: `K = 0`.
    pub fn constant(f0: StateVector) -> Result<Self> {
        let n = f0.dim();
        Self::generator(HermitianOperator::zeros(n), f0)
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            MonitoredPath::Generator(_) => "generator",
            MonitoredPath::Mode(_) => "mode",
            MonitoredPath::Sampled(_) => "sampled",
            MonitoredPath::Designed(_) => "designed",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MonitoredPath::Generator(p) => p.initial.dim(),
            MonitoredPath::Mode(p) => p.modes[0].dim(),
            MonitoredPath::Sampled(p) => p.samples[0].len(),
            MonitoredPath::Designed(p) => p.trajectory.dim(),
        }
    }

    /// `(f(t), f'(t))` with `f` renormalized if it drifted from unit norm.
    pub fn evaluate(&self, t: f64) -> Result<PathPoint> {
        let (f, fdot) = self.evaluate_raw(t)?;
        Ok(PathPoint {
            f: StateVector::from_raw(f),
            fdot,
        })
    }

    pub(crate) fn evaluate_raw(&self, t: f64) -> Result<(CVector, CVector)> {
        let (mut f, fdot) = match self {
            MonitoredPath::Generator(p) => p.eval(t),
            MonitoredPath::Mode(p) => p.eval(t),
            MonitoredPath::Sampled(p) => p.eval(t)?,
            MonitoredPath::Designed(p) => p.eval(t)?,
        };
        let norm = f.norm();
        if (norm - 1.0).abs() > RENORMALIZE_DRIFT {
            f.unscale_mut(norm);
        }
        Ok((f, fdot))
    }

    /// Monitored state alone.
    pub(crate) fn state_raw(&self, t: f64) -> Result<CVector> {
        self.evaluate_raw(t).map(|(f, _)| f)
    }

    /// The generator of a generator or mode path; mode paths are converted.
    pub fn generator_path(&self) -> Result<GeneratorPath> {
        match self {
            MonitoredPath::Generator(p) => Ok(p.clone()),
            MonitoredPath::Mode(p) => p.to_generator_path(),
            other => Err(Error::UnsupportedVariant {
                operation: "generator extraction",
                variant: other.variant_name(),
            }),
        }
    }

    /// Period of the path up to a global phase.
    ///
    /// For generator paths every eigenvalue of `K` takes part, so that a
    /// period also satisfies `e^{-iKT} = e^{i phi}`; for mode paths only the
    /// frequencies that carry amplitude do.
    pub fn period_of(&self) -> Result<PathPeriod> {
        let frequencies: Vec<f64> = match self {
            MonitoredPath::Generator(p) => p.eigen.eigenvalues.clone(),
            MonitoredPath::Mode(p) => p
                .amplitudes
                .iter()
                .zip(&p.frequencies)
                .filter(|(a, _)| a.norm() > SUPPORT_FLOOR)
                .map(|(_, &w)| w)
                .collect(),
            other => {
                return Err(Error::UnsupportedVariant {
                    operation: "period detection",
                    variant: other.variant_name(),
                })
            }
        };
        Ok(commensurate_period(&frequencies, &Tolerances::DEFAULT))
    }
}

/// Outcome of the period search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathPeriod {
    /// `f(t + period) = e^{-i reference_frequency period} f(t)`.
    Periodic {
        period: f64,
        reference_frequency: f64,
    },
    /// Every frequency coincides: `f` only accumulates a global phase.
    Stationary { reference_frequency: f64 },
    Aperiodic,
}

impl PathPeriod {
    pub fn period(&self) -> Option<f64> {
        match *self {
            PathPeriod::Periodic { period, .. } => Some(period),
            _ => None,
        }
    }

    /// The phase `phi` with `f(t + T) = e^{i phi} f(t)`.
    pub fn global_phase(&self) -> Option<f64> {
        match *self {
            PathPeriod::Periodic {
                period,
                reference_frequency,
            } => Some(-reference_frequency * period),
            _ => None,
        }
    }
}

/// Smallest `T > 0` with every `(Omega_i - Omega_0) T` a multiple of `2 pi`.
pub(crate) fn commensurate_period(frequencies: &[f64], tol: &Tolerances) -> PathPeriod {
    let Some(&reference) = frequencies.first() else {
        return PathPeriod::Aperiodic;
    };
    let scale = frequencies.iter().fold(0.0f64, |m, w| m.max(w.abs())).max(1.0);
    let diffs: Vec<f64> = frequencies[1..]
        .iter()
        .map(|w| w - reference)
        .filter(|d| d.abs() > 1e-14 * scale)
        .collect();
    let Some(base) = diffs.iter().copied().min_by(|a, b| a.abs().total_cmp(&b.abs())) else {
        return PathPeriod::Stationary {
            reference_frequency: reference,
        };
    };

    let mut ratios = Vec::with_capacity(diffs.len());
    for d in &diffs {
        match rational_approximation(d / base, tol.rational, tol.max_denominator) {
            Some(pq) => ratios.push(pq),
            None => return PathPeriod::Aperiodic,
        }
    }
    let mut lcm_q: u64 = 1;
    for &(_, q) in &ratios {
        lcm_q = lcm(lcm_q, q);
        if lcm_q > tol.max_denominator {
            return PathPeriod::Aperiodic;
        }
    }
    // Every difference is base / lcm_q times an integer; divide out their gcd.
    let common = ratios
        .iter()
        .map(|&(p, q)| (p.unsigned_abs()) * (lcm_q / q))
        .fold(0u64, gcd);
    let fundamental = base.abs() * common as f64 / lcm_q as f64;
    let period = TAU / fundamental;

    let worst = diffs
        .iter()
        .map(|d| {
            let turns = d * period / TAU;
            (turns - turns.round()).abs() * TAU
        })
        .fold(0.0, f64::max);
    if worst > tol.period_closure {
        return PathPeriod::Aperiodic;
    }
    PathPeriod::Periodic {
        period,
        reference_frequency: reference,
    }
}

/// Continued-fraction convergent `p/q` of `r` with `|r q - p| <= tol` and
/// `q <= max_denominator`.
fn rational_approximation(r: f64, tol: f64, max_denominator: u64) -> Option<(i64, u64)> {
    if !r.is_finite() {
        return None;
    }
    let sign = if r < 0.0 { -1 } else { 1 };
    let target = r.abs();
    let (mut h_prev, mut h) = (0i64, 1i64);
    let (mut k_prev, mut k) = (1u64, 0u64);
    let mut x = target;
    for _ in 0..64 {
        let a = x.floor();
        if a > i64::MAX as f64 / 4.0 {
            return None;
        }
        let a_int = a as i64;
        let h_next = a_int.checked_mul(h)?.checked_add(h_prev)?;
        let k_next = (a_int as u64).checked_mul(k)?.checked_add(k_prev)?;
        if k_next > max_denominator {
            return None;
        }
        (h_prev, h, k_prev, k) = (h, h_next, k, k_next);
        if (target * k as f64 - h as f64).abs() <= tol {
            return Some((sign * h, k));
        }
        let frac = x - a;
        if frac <= f64::EPSILON {
            return None;
        }
        x = frac.recip();
    }
    None
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}
