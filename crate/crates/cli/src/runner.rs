//! Executes scenarios and writes their artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use zeno_dark_core::output::{fmt, write_embedded_csv, write_trajectory_csv};
use zeno_dark_core::{
    adiabatic_alpha_check, continuous_dark_run, cyclic_return_fidelity, design_monitored_state,
    discrete_dark_run, embedded_run, loglog_fit, mode_design, pancharatnam_phase,
    parallel_transport_residual, three_level_frequencies, validate_dark_compatibility,
    zeno_deviation, zeno_spectrum, CVector, Complex64, DarkTrajectory, HermitianOperator,
    ModeTrajectory, MonitoredPath, PathPeriod, PrescribedTrajectory, Settings, StateVector,
};

use crate::scenario::{Format, Mode, Scenario, SweepParameter};
use crate::CliError;

pub const THREADS_ENV: &str = "ZENO_DARK_THREADS";

#[derive(Debug, Clone, Default)]
pub struct Options {
    /// Overrides the scenario's output directory.
    pub out: Option<PathBuf>,
    pub strict: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub scenario: String,
    pub command: String,
    pub mode: Option<String>,
    pub metrics: BTreeMap<String, Value>,
    pub files: Vec<PathBuf>,
    pub wall_clock_seconds: f64,
}

type Metrics = BTreeMap<String, Value>;

/// Everything a run needs, resolved from the scenario.
struct Setup {
    settings: Settings,
    h: HermitianOperator,
    path: MonitoredPath,
    psi0: StateVector,
    target: Option<ModeTrajectory>,
}

enum Artifact {
    Trajectory(DarkTrajectory),
    Embedded(zeno_dark_core::EmbeddedTrajectory, DarkTrajectory),
}

struct Outcome {
    metrics: Metrics,
    artifact: Option<Artifact>,
}

fn settings(scenario: &Scenario, opts: &Options) -> Result<Settings, CliError> {
    let base = if opts.strict {
        Settings::strict()
    } else {
        Settings::default()
    };
    Ok(base.with_propagator(scenario.propagator()?))
}

fn require(value: Option<f64>, name: &str) -> Result<f64, CliError> {
    match value {
        Some(v) if v.is_finite() && v > 0.0 => Ok(v),
        Some(v) => Err(CliError::Config(format!("run.{name} must be positive, got {v}"))),
        None => Err(CliError::Config(format!("run.{name} is required for this mode"))),
    }
}

fn design_grid(scenario: &Scenario) -> Vec<f64> {
    let end = scenario.run.t_final.unwrap_or(1.0);
    (0..=200).map(|k| end * k as f64 / 200.0).collect()
}

fn setup(scenario: &Scenario, opts: &Options) -> Result<Setup, CliError> {
    let settings = settings(scenario, opts)?;
    let h = scenario.hamiltonian()?;
    let (path, target) = match scenario.designed_target() {
        Some((p, nu)) => {
            if p.len() != scenario.dimension {
                return Err(CliError::Config(format!(
                    "path: {} probabilities in dimension {}",
                    p.len(),
                    scenario.dimension
                )));
            }
            if h.is_zero() {
                let (target, path) = mode_design(p, nu)?;
                (path, Some(target))
            } else {
                let target = ModeTrajectory::new(p, nu)?;
                let grid = design_grid(scenario);
                let designed =
                    design_monitored_state(Arc::new(target.clone()), &h, &grid, &settings)?;
                (designed.path, Some(target))
            }
        }
        None => (scenario.explicit_path()?, None),
    };
    let psi0 = match (scenario.initial_state()?, &target) {
        (Some(psi), _) => psi,
        (None, Some(t)) => StateVector::from_vector(t.state_at(0.0))?,
        (None, None) => {
            return Err(CliError::Config(
                "initial_state is required unless the path is designed".into(),
            ))
        }
    };
    Ok(Setup {
        settings,
        h,
        path,
        psi0,
        target,
    })
}

/// `|<psi0|psi(T)>| / ||psi(T)||`
fn return_fidelity(psi0: &StateVector, traj: &DarkTrajectory) -> f64 {
    let last = traj.final_state();
    psi0.inner(last).norm() / last.norm()
}

fn trajectory_metrics(s: &Setup, traj: &DarkTrajectory, m: &mut Metrics) {
    m.insert("norm_deficit".into(), json!(traj.norm_deficit()));
    m.insert(
        "final_survival_probability".into(),
        json!(traj.survival_probability.last()),
    );
    m.insert("max_norm_deviation".into(), json!(traj.max_norm_deviation()));
    m.insert(
        "max_orthogonality_residual".into(),
        json!(traj.max_orthogonality_residual()),
    );
    m.insert("return_fidelity".into(), json!(return_fidelity(&s.psi0, traj)));
    m.insert(
        "parallel_transport_residual".into(),
        json!(parallel_transport_residual(traj)),
    );
    m.insert(
        "pancharatnam_phase".into(),
        match pancharatnam_phase(traj) {
            Ok(p) => json!({"phase": p.phase, "closed": p.closed}),
            Err(e) => json!({"error": e.to_string()}),
        },
    );
}

fn discrete(s: &Setup, scenario: &Scenario, tau: f64) -> Result<Outcome, CliError> {
    let steps = match (scenario.run.steps, scenario.run.t_final) {
        (Some(m), _) if m > 0 => m,
        (Some(_), _) => return Err(CliError::Config("run.M must be positive".into())),
        (None, Some(t)) => (t / tau).round().max(1.0) as usize,
        (None, None) => return Err(CliError::Config("run.M or run.T is required".into())),
    };
    let traj = discrete_dark_run(&s.psi0, &s.path, &s.h, tau, steps, &s.settings)?;
    let mut metrics = Metrics::new();
    metrics.insert("tau".into(), json!(tau));
    metrics.insert("steps".into(), json!(steps));
    trajectory_metrics(s, &traj, &mut metrics);
    Ok(Outcome {
        metrics,
        artifact: Some(Artifact::Trajectory(traj)),
    })
}

fn continuous(s: &Setup, t_final: f64, dt: f64) -> Result<Outcome, CliError> {
    let traj = continuous_dark_run(&s.psi0, &s.path, &s.h, t_final, dt, &s.settings)?;
    let mut metrics = Metrics::new();
    metrics.insert("dt".into(), json!(traj.step));
    metrics.insert("propagator".into(), json!(s.settings.propagator.name()));
    trajectory_metrics(s, &traj, &mut metrics);
    Ok(Outcome {
        metrics,
        artifact: Some(Artifact::Trajectory(traj)),
    })
}

fn spectrum_metrics(s: &Setup) -> Result<(Metrics, zeno_dark_core::ZenoSpectrum), CliError> {
    let generator = s.path.generator_path()?;
    let k = generator.generator();
    let f0 = generator.initial();
    let spectrum = zeno_spectrum(&s.h, k, f0, &s.psi0, &s.settings)?;
    let mut m = Metrics::new();
    m.insert("omegas".into(), json!(spectrum.omegas));
    m.insert(
        "coefficients".into(),
        json!(spectrum
            .coefficients
            .iter()
            .map(|c| [c.re, c.im])
            .collect::<Vec<_>>()),
    );
    m.insert("weight".into(), json!(spectrum.weight()));
    let period = s.path.period_of()?;
    m.insert(
        "period".into(),
        match period {
            PathPeriod::Periodic { period, .. } => json!(period),
            PathPeriod::Stationary { .. } => json!("stationary"),
            PathPeriod::Aperiodic => json!("aperiodic"),
        },
    );
    m.insert(
        "cyclic_return_fidelity".into(),
        match cyclic_return_fidelity(&spectrum, &period) {
            Ok(f) => json!(f),
            Err(_) => Value::Null,
        },
    );
    if s.h.is_zero() && f0.dim() == 3 {
        let modes = generator.to_mode_path()?;
        let a = modes.amplitudes();
        let w = modes.frequencies();
        let r = three_level_frequencies([a[0], a[1], a[2]], [w[0], w[1], w[2]])?;
        m.insert(
            "three_level".into(),
            json!({"xi": r.xi, "eta": r.eta, "omega_plus": r.omega_plus, "omega_minus": r.omega_minus}),
        );
    }
    Ok((m, spectrum))
}

fn closed_form(s: &Setup, t_final: f64, dt: f64) -> Result<Outcome, CliError> {
    let (mut metrics, spectrum) = spectrum_metrics(s)?;
    let generator = s.path.generator_path()?;
    let n = (t_final / dt).round().max(1.0) as usize;
    let times: Vec<f64> = (0..=n).map(|i| t_final * i as f64 / n as f64).collect();
    let states = times
        .iter()
        .map(|&t| spectrum.evolve(generator.generator(), t))
        .collect::<Result<Vec<_>, _>>()?;
    let traj = DarkTrajectory::from_states(times, states, &s.path)?;
    trajectory_metrics(s, &traj, &mut metrics);
    Ok(Outcome {
        metrics,
        artifact: Some(Artifact::Trajectory(traj)),
    })
}

fn embedded(s: &Setup, energy: f64, t_final: f64, dt: f64) -> Result<Outcome, CliError> {
    let run = embedded_run(&s.psi0, &s.path, energy, t_final, dt, &s.settings)?;
    let dark = continuous_dark_run(&s.psi0, &s.path, &s.h, t_final, dt, &s.settings)?;
    let check = adiabatic_alpha_check(&run, &s.path, &s.settings)?;
    let view = run.to_dark_trajectory(&s.path)?;
    let mut metrics = Metrics::new();
    metrics.insert("E".into(), json!(energy));
    metrics.insert("dt".into(), json!(run.step));
    metrics.insert("zeno_deviation".into(), json!(zeno_deviation(&run, &dark)?));
    metrics.insert("alpha_residual".into(), json!(check.residual));
    metrics.insert("regime_ratio".into(), json!(check.regime_ratio));
    metrics.insert("in_adiabatic_regime".into(), json!(check.in_regime));
    metrics.insert("max_norm_deviation".into(), json!(run.max_norm_deviation()));
    metrics.insert(
        "decomposition_residual".into(),
        json!(run.decomposition_residual()),
    );
    metrics.insert(
        "max_abs_alpha".into(),
        json!(run.alpha.iter().map(|a| a.norm()).fold(0.0, f64::max)),
    );
    Ok(Outcome {
        metrics,
        artifact: Some(Artifact::Embedded(run, view)),
    })
}

fn inverse(s: &Setup, t_final: f64, dt: f64) -> Result<Outcome, CliError> {
    let target = s
        .target
        .as_ref()
        .ok_or_else(|| CliError::Config("inverse mode needs a designed path".into()))?;
    let traj = continuous_dark_run(&s.psi0, &s.path, &s.h, t_final, dt, &s.settings)?;
    let min_fidelity = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, psi)| target.state_at(t).dotc(psi.as_vector()).norm() / psi.norm())
        .fold(1.0, f64::min);
    let compatibility = validate_dark_compatibility(target, &s.h, &traj.times)?;
    let mut metrics = Metrics::new();
    metrics.insert("dt".into(), json!(traj.step));
    metrics.insert("min_target_fidelity".into(), json!(min_fidelity));
    metrics.insert("compatibility_residual".into(), json!(compatibility));
    trajectory_metrics(s, &traj, &mut metrics);
    Ok(Outcome {
        metrics,
        artifact: Some(Artifact::Trajectory(traj)),
    })
}

fn execute(s: &Setup, scenario: &Scenario) -> Result<Outcome, CliError> {
    let run = &scenario.run;
    match run.mode {
        Mode::Discrete => discrete(s, scenario, require(run.tau, "tau")?),
        Mode::Continuous => continuous(s, require(run.t_final, "T")?, require(run.dt, "dt")?),
        Mode::ClosedForm => closed_form(s, require(run.t_final, "T")?, require(run.dt, "dt")?),
        Mode::Embedded => {
            let energy = match run.energy {
                Some(e) if e.is_finite() && e >= 0.0 => e,
                Some(e) => return Err(CliError::Config(format!("run.E must be >= 0, got {e}"))),
                None => return Err(CliError::Config("run.E is required for this mode".into())),
            };
            embedded(s, energy, require(run.t_final, "T")?, require(run.dt, "dt")?)
        }
        Mode::Inverse => inverse(s, require(run.t_final, "T")?, require(run.dt, "dt")?),
    }
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Discrete => "discrete",
        Mode::Continuous => "continuous",
        Mode::ClosedForm => "closed_form",
        Mode::Embedded => "embedded",
        Mode::Inverse => "inverse",
    }
}

fn output_dir(scenario: &Scenario, opts: &Options) -> Result<PathBuf, CliError> {
    let dir = opts
        .out
        .clone()
        .unwrap_or_else(|| scenario.output.directory.clone());
    fs::create_dir_all(&dir).map_err(|source| io_error(&dir, source))?;
    Ok(dir)
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| io_error(path, source))
}

fn finish(
    scenario: &Scenario,
    opts: &Options,
    command: &str,
    mode: Option<Mode>,
    metrics: Metrics,
    mut files: Vec<PathBuf>,
    started: Instant,
) -> Result<RunReport, CliError> {
    let mut report = RunReport {
        schema: 1,
        scenario: scenario.name.clone(),
        command: command.into(),
        mode: mode.map(|m| mode_name(m).into()),
        metrics,
        files: Vec::new(),
        wall_clock_seconds: 0.0,
    };
    if scenario.output.formats.contains(&Format::Json) {
        let suffix = if command == "run" {
            String::new()
        } else {
            format!("_{command}")
        };
        let path = output_dir(scenario, opts)?.join(format!("{}{suffix}.json", scenario.name));
        files.push(path.clone());
        report.files = files;
        report.wall_clock_seconds = started.elapsed().as_secs_f64();
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        write_file(&path, format!("{text}\n").as_bytes())?;
    } else {
        report.files = files;
        report.wall_clock_seconds = started.elapsed().as_secs_f64();
    }
    Ok(report)
}

/// `run <config>`: one run in the configured mode.
pub fn run_scenario(scenario: &Scenario, opts: &Options) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let s = setup(scenario, opts)?;
    let outcome = execute(&s, scenario)?;
    let mut files = Vec::new();
    if scenario.output.formats.contains(&Format::Csv) {
        if let Some(artifact) = &outcome.artifact {
            let path = output_dir(scenario, opts)?.join(format!("{}.csv", scenario.name));
            let mut bytes = Vec::new();
            match artifact {
                Artifact::Trajectory(t) => write_trajectory_csv(&mut bytes, t),
                Artifact::Embedded(run, view) => write_embedded_csv(&mut bytes, run, view),
            }
            .map_err(|e| io_error(&path, e))?;
            write_file(&path, &bytes)?;
            files.push(path);
        }
    }
    finish(
        scenario,
        opts,
        "run",
        Some(scenario.run.mode),
        outcome.metrics,
        files,
        started,
    )
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let n: usize = value
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::Config(format!("{THREADS_ENV}={value:?} is not a positive integer")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))
}

/// Final-state error of a continuous run against the closed form when the
/// generator commutes with `H`, otherwise against a run at an eighth of the
/// finest step.
fn dt_reference(s: &Setup, t_final: f64, finest: f64) -> Result<CVector, CliError> {
    if let Ok(generator) = s.path.generator_path() {
        let k = generator.generator();
        if let Ok(spectrum) = zeno_spectrum(&s.h, k, generator.initial(), &s.psi0, &s.settings) {
            return Ok(spectrum.evolve(k, t_final)?.into_vector());
        }
    }
    let fine = continuous_dark_run(&s.psi0, &s.path, &s.h, t_final, finest / 8.0, &s.settings)?;
    Ok(fine.final_state().as_vector().clone())
}

/// `sweep <config>`: the convergence metric at each sweep value and its
/// log-log slope.
pub fn run_sweep(scenario: &Scenario, opts: &Options) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let sweep = scenario
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("scenario has no sweep block".into()))?;
    let mut distinct = sweep.values.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(CliError::Config(format!(
            "a sweep needs at least 3 distinct values, got {}",
            distinct.len()
        )));
    }
    if sweep.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(CliError::Config("sweep values must be positive".into()));
    }
    let s = setup(scenario, opts)?;
    let run = &scenario.run;
    let (metric_name, mode) = match sweep.parameter {
        SweepParameter::Tau => ("norm_deficit", Mode::Discrete),
        SweepParameter::Energy => ("zeno_deviation", Mode::Embedded),
        SweepParameter::Dt => ("final_state_error", Mode::Continuous),
    };
    let t_final = require(run.t_final, "T")?;
    let reference = match sweep.parameter {
        SweepParameter::Dt => Some(dt_reference(&s, t_final, distinct[0])?),
        _ => None,
    };
    let dt = run.dt;

    let evaluate = |value: f64| -> Result<f64, CliError> {
        match sweep.parameter {
            SweepParameter::Tau => {
                let steps = (t_final / value).round().max(1.0) as usize;
                let traj = discrete_dark_run(&s.psi0, &s.path, &s.h, value, steps, &s.settings)?;
                Ok(traj.norm_deficit())
            }
            SweepParameter::Energy => {
                let dt = require(dt, "dt")?;
                let outcome = embedded(&s, value, t_final, dt)?;
                Ok(outcome.metrics["zeno_deviation"].as_f64().unwrap_or(f64::NAN))
            }
            SweepParameter::Dt => {
                let traj = continuous_dark_run(&s.psi0, &s.path, &s.h, t_final, value, &s.settings)?;
                let reference = reference.as_ref().expect("reference computed for dt sweeps");
                Ok((traj.final_state().as_vector() - reference).norm())
            }
        }
    };
    let pool = thread_pool()?;
    let results: Vec<f64> = pool.install(|| {
        sweep
            .values
            .par_iter()
            .map(|&v| evaluate(v))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let fit = loglog_fit(&sweep.values, &results).ok();
    let mut files = Vec::new();
    if scenario.output.formats.contains(&Format::Csv) {
        let path = output_dir(scenario, opts)?.join(format!("{}_sweep.csv", scenario.name));
        let mut text = String::from("#schema=1\nvalue,metric\n");
        for (v, m) in sweep.values.iter().zip(&results) {
            text.push_str(&format!("{},{}\n", fmt(*v), fmt(*m)));
        }
        write_file(&path, text.as_bytes())?;
        files.push(path);
    }
    let mut metrics = Metrics::new();
    metrics.insert(
        "parameter".into(),
        json!(match sweep.parameter {
            SweepParameter::Tau => "tau",
            SweepParameter::Energy => "E",
            SweepParameter::Dt => "dt",
        }),
    );
    metrics.insert("metric".into(), json!(metric_name));
    metrics.insert("values".into(), json!(sweep.values));
    metrics.insert("results".into(), json!(results));
    metrics.insert("slope".into(), json!(fit.map(|f| f.slope)));
    metrics.insert("intercept".into(), json!(fit.map(|f| f.intercept)));
    finish(scenario, opts, "sweep", Some(mode), metrics, files, started)
}

/// `spectrum <config>`: Zeno frequencies, coefficients and cyclic return.
pub fn spectrum(scenario: &Scenario, opts: &Options) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let s = setup(scenario, opts)?;
    let (metrics, _) = spectrum_metrics(&s)?;
    finish(scenario, opts, "spectrum", None, metrics, Vec::new(), started)
}

/// `design <config>`: samples the designed monitored state on a grid.
pub fn design(scenario: &Scenario, opts: &Options) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let s = setup(scenario, opts)?;
    let target = s
        .target
        .as_ref()
        .ok_or_else(|| CliError::Config("design needs a designed path".into()))?;
    let grid = match (scenario.run.t_final, scenario.run.dt) {
        (Some(t), Some(dt)) if t > 0.0 && dt > 0.0 => {
            let n = (t / dt).round().max(1.0) as usize;
            (0..=n).map(|k| t * k as f64 / n as f64).collect()
        }
        _ => design_grid(scenario),
    };
    // Recomputed on the output grid so the reported normalization and
    // residuals refer to the samples written.
    let result = design_monitored_state(Arc::new(target.clone()), &s.h, &grid, &s.settings)?;
    let mut files = Vec::new();
    if scenario.output.formats.contains(&Format::Csv) {
        let path = output_dir(scenario, opts)?.join(format!("{}_design.csv", scenario.name));
        let n = scenario.dimension;
        let mut text = String::from("#schema=1\nt");
        for j in 0..n {
            text.push_str(&format!(",re_f_{j}"));
        }
        for j in 0..n {
            text.push_str(&format!(",im_f_{j}"));
        }
        text.push_str(",n_f\n");
        for (&t, n_f) in grid.iter().zip(&result.normalization) {
            let f = result.path.evaluate(t)?.f;
            let mut row = vec![fmt(t)];
            row.extend(f.amplitudes().iter().map(|z| fmt(z.re)));
            row.extend(f.amplitudes().iter().map(|z| fmt(z.im)));
            row.push(fmt(*n_f));
            text.push_str(&row.join(","));
            text.push('\n');
        }
        write_file(&path, text.as_bytes())?;
        files.push(path);
    }
    let mut metrics = Metrics::new();
    let (lo, hi) = result
        .normalization
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &n| (lo.min(n), hi.max(n)));
    metrics.insert("normalization_min".into(), json!(lo));
    metrics.insert("normalization_max".into(), json!(hi));
    metrics.insert(
        "compatibility_residual".into(),
        json!(result.compatibility_residual),
    );
    metrics.insert(
        "orthogonality_residual".into(),
        json!(result.orthogonality_residual),
    );
    metrics.insert("transport_residual".into(), json!(target.transport_residual()));
    let f0 = result.path.evaluate(0.0)?.f;
    metrics.insert(
        "f0".into(),
        json!(f0.amplitudes().iter().map(|z: &Complex64| [z.re, z.im]).collect::<Vec<_>>()),
    );
    finish(scenario, opts, "design", None, metrics, files, started)
}
