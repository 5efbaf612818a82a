use std::sync::Arc;

use zeno_dark_core::{
    adiabatic_alpha_check, continuous_dark_run, design_monitored_state, embedded_run,
    local_phase_increments, loglog_fit, mode_design, parallel_transport_residual,
    pancharatnam_phase, zeno_deviation, Complex64, HermitianOperator, ModeTrajectory,
    MonitoredPath, PrescribedTrajectory, Settings, StateVector,
};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn worst_infidelity(run: &zeno_dark_core::DarkTrajectory, target: &ModeTrajectory) -> f64 {
    run.times
        .iter()
        .zip(&run.states)
        .map(|(&t, s)| 1.0 - target.state_at(t).dotc(s.as_vector()).norm() / s.norm())
        .fold(0.0, f64::max)
}

#[test]
fn closed_form_design_steers_the_target() {
    let dt = 1e-4;
    let (target, path) = mode_design(vec![0.5, 0.25, 0.25], vec![0.0, 2.0, -2.0]).unwrap();
    let psi0 = StateVector::from_vector(target.state_at(0.0)).unwrap();
    let zero = HermitianOperator::zeros(3);
    let run = continuous_dark_run(&psi0, &path, &zero, 5.0, dt, &Settings::default()).unwrap();
    assert!(worst_infidelity(&run, &target) <= 1e-6);
    assert!(run.max_orthogonality_residual() <= 1e-10);
    assert!(parallel_transport_residual(&run) <= 10.0 * dt);
    let increments = local_phase_increments(&run).unwrap();
    assert!(increments.iter().all(|p| p.abs() <= 10.0 * dt * dt));
}

#[test]
fn numerical_design_steers_other_targets() {
    let dt = 1e-3;
    let targets = [
        (vec![0.5, 0.5], vec![1.0, -1.0]),
        (vec![0.2, 0.3, 0.5], vec![1.5, -2.0, 0.6]),
        (vec![0.1, 0.2, 0.3, 0.4], vec![4.0, 1.0, -2.0, 0.0]),
    ];
    for (p, nu) in targets {
        let target = ModeTrajectory::new(p, nu).unwrap();
        assert!(target.transport_residual().abs() < 1e-15);
        let n = target.dim();
        let zero = HermitianOperator::zeros(n);
        let grid: Vec<f64> = (0..=50).map(|k| 0.1 * k as f64).collect();
        let designed = design_monitored_state(
            Arc::new(target.clone()),
            &zero,
            &grid,
            &Settings::default(),
        )
        .unwrap();
        assert!(designed.orthogonality_residual <= 1e-10);
        let psi0 = StateVector::from_vector(target.state_at(0.0)).unwrap();
        let run = continuous_dark_run(&psi0, &designed.path, &zero, 5.0, dt, &Settings::default())
            .unwrap();
        assert!(worst_infidelity(&run, &target) <= 1e-6);
    }
}

#[test]
fn designed_path_with_hamiltonian() {
    // A target that rotates against a nonzero Hamiltonian; compatibility
    // holds because the energy expectation matches the phase rate.
    let h = HermitianOperator::from_real_diagonal(&[1.0, -1.0, 0.0]);
    let target = ModeTrajectory::new(vec![0.25, 0.25, 0.5], vec![-1.0, 3.0, -1.0]).unwrap();
    let grid: Vec<f64> = (0..=40).map(|k| 0.1 * k as f64).collect();
    let designed =
        design_monitored_state(Arc::new(target.clone()), &h, &grid, &Settings::default()).unwrap();
    assert!(designed.compatibility_residual < 1e-14);
    let psi0 = StateVector::from_vector(target.state_at(0.0)).unwrap();
    let run = continuous_dark_run(&psi0, &designed.path, &h, 4.0, 1e-3, &Settings::default())
        .unwrap();
    assert!(worst_infidelity(&run, &target) <= 1e-6);
}

#[test]
fn integer_mode_trajectory_closes_without_phase() {
    let (target, path) = mode_design(vec![0.5, 0.25, 0.25], vec![0.0, 2.0, -2.0]).unwrap();
    let psi0 = StateVector::from_vector(target.state_at(0.0)).unwrap();
    let zero = HermitianOperator::zeros(3);
    let run = continuous_dark_run(
        &psi0,
        &path,
        &zero,
        2.0 * std::f64::consts::PI,
        1e-3,
        &Settings::default(),
    )
    .unwrap();
    let phase = pancharatnam_phase(&run).unwrap();
    assert!(phase.closed);
    assert!(phase.phase.abs() < 1e-6);
}

fn embedding_setup() -> (MonitoredPath, StateVector) {
    let k = HermitianOperator::from_real_diagonal(&[0.0, 1.0, 2.0]);
    let f0 = StateVector::normalized(vec![c(1., 0.); 3]).unwrap();
    let psi0 = StateVector::normalized(vec![c(1., 0.), c(-2., 0.), c(1., 0.)]).unwrap();
    (MonitoredPath::generator(k, f0).unwrap(), psi0)
}

#[test]
fn embedding_recovers_dark_evolution_as_one_over_energy() {
    let (path, psi0) = embedding_setup();
    let settings = Settings::default();
    let (t_final, dt) = (2.0, 2.5e-4);
    let zero = HermitianOperator::zeros(3);
    let dark = continuous_dark_run(&psi0, &path, &zero, t_final, dt, &settings).unwrap();
    let energies = [50.0, 100.0, 200.0, 400.0];
    let deviations: Vec<f64> = energies
        .iter()
        .map(|&e| {
            let run = embedded_run(&psi0, &path, e, t_final, dt, &settings).unwrap();
            assert!(run.max_norm_deviation() <= 1e-9 * t_final);
            assert!(run.decomposition_residual() <= 1e-10);
            zeno_deviation(&run, &dark).unwrap()
        })
        .collect();
    for pair in deviations.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((1.7..=2.3).contains(&ratio), "deviations {deviations:?}");
    }
    let fit = loglog_fit(&energies, &deviations).unwrap();
    assert!((fit.slope + 1.0).abs() <= 0.15);
    // Pinned prefactor of the 1/E law at E = 100.
    assert!((deviations[1] * 100.0 - 0.6623).abs() < 0.01, "C = {}", deviations[1] * 100.0);
}

#[test]
fn alpha_follows_its_adiabatic_value() {
    let (path, psi0) = embedding_setup();
    let settings = Settings::default();
    let residual = |e: f64| {
        let run = embedded_run(&psi0, &path, e, 2.0, 2.5e-4, &settings).unwrap();
        let check = adiabatic_alpha_check(&run, &path, &settings).unwrap();
        assert!(check.in_regime);
        let bound = 1.5 * check.max_transfer / e;
        assert!(run.alpha.iter().all(|a| a.norm() <= bound));
        check.residual
    };
    let (r100, r200) = (residual(100.0), residual(200.0));
    assert!(r200 <= 0.65 * r100, "residuals {r100:e} {r200:e}");
}
