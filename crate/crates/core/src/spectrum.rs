//! Closed-form dark evolution when the generator commutes with the
//! Hamiltonian: the co-moving generator `P(0)(H - K)P(0)` is then static and
//! its spectrum on the complement of `f(0)` fixes the motion.

use num_complex::Complex64;

use crate::dark::{check_dims, check_setup};
use crate::error::{Error, Result};
use crate::linalg::{
    commutator, eigh, expm_hermitian, fix_phase, sandwich_complement, CVector,
    HermitianOperator, StateVector,
};
use crate::path::PathPeriod;
use crate::tolerances::{Settings, Tolerances};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Eigenfrequencies `omega_k` of the co-moving generator restricted to the
/// complement of `f(0)`, their eigenvectors `u_k`, and the initial-state
/// coefficients `c_k = <u_k|psi0>`. Frequencies ascend.
#[derive(Debug, Clone, PartialEq)]
pub struct ZenoSpectrum {
    pub omegas: Vec<f64>,
    pub modes: Vec<StateVector>,
    pub coefficients: Vec<Complex64>,
}

impl ZenoSpectrum {
    /// `psi(t) = e^{-iKt} sum_k c_k e^{-i omega_k t} u_k`.
    pub fn evolve(&self, generator: &HermitianOperator, t: f64) -> Result<StateVector> {
        let n = generator.dim();
        if self.modes.first().map(|m| m.dim()) != Some(n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.modes.first().map_or(0, |m| m.dim()),
            });
        }
        let mut comoving = CVector::zeros(n);
        for ((c, &w), u) in self.coefficients.iter().zip(&self.omegas).zip(&self.modes) {
            comoving.axpy(c * (-I * w * t).exp(), u.as_vector(), 1.0.into());
        }
        let lab = if generator.is_zero() {
            comoving
        } else {
            expm_hermitian(generator.matrix(), t)? * comoving
        };
        Ok(StateVector::from_raw(lab))
    }

    /// `sum_k |c_k|^2`
    pub fn weight(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// The two Zeno frequencies of a three-level system with `H = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeLevelSpectrum {
    pub xi: f64,
    pub eta: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
}

pub fn zeno_spectrum(
    h: &HermitianOperator,
    k: &HermitianOperator,
    f0: &StateVector,
    psi0: &StateVector,
    settings: &Settings,
) -> Result<ZenoSpectrum> {
    check_dims(h, f0)?;
    check_dims(k, f0)?;
    check_dims(h, psi0)?;
    f0.require_unit(settings.tolerances.unit_norm)?;
    require_commuting(h, k, &settings.tolerances)?;

    let n = h.dim();
    let comoving = sandwich_complement(&(h.matrix() - k.matrix()), f0.as_vector());

    // Orthonormal basis of the complement: the unit-eigenvalue eigenvectors
    // of P(0), which sort after the single zero eigenvalue.
    let projector = crate::linalg::complement_projector(f0.as_vector());
    let (_, p_vectors) = eigh(&projector)?;
    let basis = p_vectors.columns(1, n - 1).into_owned();

    let restricted = basis.adjoint() * &comoving * &basis;
    let (omegas, w) = eigh(&restricted)?;
    let threshold = Tolerances::DEFAULT.phase_significance;
    let modes: Vec<StateVector> = w
        .column_iter()
        .map(|col| {
            let mut u = &basis * col;
            fix_phase(&mut u, threshold);
            StateVector::from_raw(u)
        })
        .collect();
    let coefficients = modes.iter().map(|u| u.inner(psi0)).collect();
    Ok(ZenoSpectrum {
        omegas,
        modes,
        coefficients,
    })
}

/// Eigenvalues of `P(0) K P(0)` on the complement of
/// `f(0) = sum_j a_j |k_j>`, where `K |k_j> = Omega_j |k_j>`.
pub fn three_level_frequencies(a: [Complex64; 3], omega: [f64; 3]) -> Result<ThreeLevelSpectrum> {
    let p = a.map(|z| z.norm_sqr());
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > Tolerances::DEFAULT.unit_norm {
        return Err(Error::Normalization { norm: total.sqrt() });
    }
    let xi = omega.iter().sum::<f64>() - p.iter().zip(&omega).map(|(p, w)| p * w).sum::<f64>();
    let eta = p[0] * omega[1] * omega[2] + p[1] * omega[0] * omega[2] + p[2] * omega[0] * omega[1];
    let discriminant = xi * xi - 4.0 * eta;
    let scale = xi.abs().max(eta.abs().sqrt()).max(1.0);
    if discriminant < -1e-12 * scale * scale {
        return Err(Error::NegativeDiscriminant { discriminant });
    }
    let root = discriminant.max(0.0).sqrt();
    Ok(ThreeLevelSpectrum {
        xi,
        eta,
        omega_plus: 0.5 * (xi + root),
        omega_minus: 0.5 * (xi - root),
    })
}

/// `psi(t) = e^{-iKt} e^{-i P(0)(H-K)P(0) t} psi0` for commuting `K`, `H`.
pub fn closed_form_solution(
    psi0: &StateVector,
    h: &HermitianOperator,
    k: &HermitianOperator,
    f0: &StateVector,
    t: f64,
    settings: &Settings,
) -> Result<StateVector> {
    psi0.require_unit(settings.tolerances.unit_norm)?;
    check_dims(h, psi0)?;
    check_setup(f0.as_vector(), psi0.as_vector(), &settings.tolerances)?;
    zeno_spectrum(h, k, f0, psi0, settings)?.evolve(k, t)
}

/// `|sum_k |c_k|^2 e^{-i omega_k T}|` at the path period.
pub fn cyclic_return_fidelity(spectrum: &ZenoSpectrum, period: &PathPeriod) -> Result<f64> {
    match *period {
        PathPeriod::Periodic { period, .. } => Ok(cyclic_return_fidelity_at(spectrum, period)),
        PathPeriod::Aperiodic => Err(Error::Aperiodic),
        PathPeriod::Stationary { .. } => Err(Error::InvalidInput(
            "a stationary path has no fundamental period; pick T explicitly".into(),
        )),
    }
}

/// Return overlap `|<psi(0)|psi(T)>|` at an explicit return time, valid when
/// `e^{-iKT}` is a global phase.
pub fn cyclic_return_fidelity_at(spectrum: &ZenoSpectrum, period: f64) -> f64 {
    let sum: Complex64 = spectrum
        .coefficients
        .iter()
        .zip(&spectrum.omegas)
        .map(|(c, &w)| c.norm_sqr() * (-I * w * period).exp())
        .sum();
    sum.norm().min(1.0)
}

fn require_commuting(h: &HermitianOperator, k: &HermitianOperator, tol: &Tolerances) -> Result<()> {
    let norm = commutator(h.matrix(), k.matrix()).norm();
    let bound = tol.commutator * h.frobenius_norm() * k.frobenius_norm();
    if norm > bound {
        return Err(Error::Commutator { norm });
    }
    Ok(())
}

/// `P(0)(H - K)P(0)` as a full N x N operator.
pub fn static_comoving_generator(
    h: &HermitianOperator,
    k: &HermitianOperator,
    f0: &StateVector,
) -> HermitianOperator {
    HermitianOperator::from_raw(sandwich_complement(
        &(h.matrix() - k.matrix()),
        f0.as_vector(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn equal() -> StateVector {
        StateVector::normalized(vec![c(1., 0.); 3]).unwrap()
    }

    fn k3() -> HermitianOperator {
        HermitianOperator::from_real_diagonal(&[0.0, 1.0, 2.0])
    }

    #[test]
    fn equal_amplitude_three_level_frequencies() {
        let s = 1.0 / 3f64.sqrt();
        let r = three_level_frequencies([c(s, 0.); 3], [0.0, 1.0, 2.0]).unwrap();
        assert!((r.xi - 2.0).abs() < 1e-15);
        assert!((r.eta - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.omega_plus - (1.0 + s)).abs() < 1e-15);
        assert!((r.omega_minus - (1.0 - s)).abs() < 1e-15);
    }

    #[test]
    fn three_level_degenerate_and_eigenmode_cases() {
        let s = 1.0 / 3f64.sqrt();
        let r = three_level_frequencies([c(s, 0.), c(0., s), c(-s, 0.)], [0.4, 0.4, 0.4]).unwrap();
        assert!((r.omega_plus - 0.4).abs() < 1e-7 && (r.omega_minus - 0.4).abs() < 1e-7);
        let r = three_level_frequencies([c(1., 0.), c(0., 0.), c(0., 0.)], [0.5, 3.0, -1.0]).unwrap();
        assert_eq!((r.omega_plus, r.omega_minus), (3.0, -1.0));
        assert!(three_level_frequencies([c(1., 0.), c(1., 0.), c(0., 0.)], [0.; 3]).is_err());
    }

    #[test]
    fn zeno_spectrum_of_equal_superposition() {
        let zero = HermitianOperator::zeros(3);
        let psi0 = StateVector::normalized(vec![c(1., 0.), c(-1., 0.), c(0., 0.)]).unwrap();
        let s = zeno_spectrum(&zero, &k3(), &equal(), &psi0, &Settings::default()).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert!((s.omegas[0] + 1.0 + r).abs() < 1e-12);
        assert!((s.omegas[1] + 1.0 - r).abs() < 1e-12);
        assert!((s.weight() - 1.0).abs() < 1e-12);
        for u in &s.modes {
            assert!(u.inner(&equal()).norm() < 1e-12);
        }
    }

    #[test]
    fn zeno_spectrum_on_eigenmode_and_cancellation() {
        let zero = HermitianOperator::zeros(3);
        let k = HermitianOperator::from_real_diagonal(&[0.3, 1.0, 2.5]);
        let f0 = StateVector::basis(3, 0).unwrap();
        let psi0 = StateVector::basis(3, 1).unwrap();
        let s = zeno_spectrum(&zero, &k, &f0, &psi0, &Settings::default()).unwrap();
        assert!((s.omegas[0] + 2.5).abs() < 1e-14 && (s.omegas[1] + 1.0).abs() < 1e-14);

        let s = zeno_spectrum(&k, &k, &equal(), &psi0, &Settings::default()).unwrap();
        assert!(s.omegas.iter().all(|w| w.abs() < 1e-14));
    }

    #[test]
    fn non_commuting_generator_is_rejected() {
        let h = HermitianOperator::from_rows(&[
            vec![c(0., 0.), c(1., 0.), c(0., 0.)],
            vec![c(1., 0.), c(0., 0.), c(0., 0.)],
            vec![c(0., 0.), c(0., 0.), c(0., 0.)],
        ])
        .unwrap();
        let psi0 = StateVector::normalized(vec![c(1., 0.), c(-1., 0.), c(0., 0.)]).unwrap();
        let err = zeno_spectrum(&h, &k3(), &equal(), &psi0, &Settings::default()).unwrap_err();
        assert!(matches!(err, Error::Commutator { .. }));
        let err = closed_form_solution(&psi0, &h, &k3(), &equal(), 1.0, &Settings::default())
            .unwrap_err();
        assert!(err.to_string().contains("continuous_dark_run"));
    }

    #[test]
    fn closed_form_reductions() {
        let psi0 = StateVector::normalized(vec![c(1., 0.), c(-1., 0.), c(0., 0.)]).unwrap();
        let zero = HermitianOperator::zeros(3);
        let s = Settings::default();
        let at0 = closed_form_solution(&psi0, &zero, &k3(), &equal(), 0.0, &s).unwrap();
        assert!((at0.as_vector() - psi0.as_vector()).norm() < 1e-14);

        // K = 0: stationary Zeno subspace, e^{-i PHP t}.
        let h = HermitianOperator::from_real_diagonal(&[0.2, -0.7, 1.1]);
        let t = 1.7;
        let got = closed_form_solution(&psi0, &h, &zero, &equal(), t, &s).unwrap();
        let php = static_comoving_generator(&h, &zero, &equal());
        let expected = expm_hermitian(php.matrix(), t).unwrap() * psi0.as_vector();
        assert!((got.as_vector() - expected).norm() < 1e-13);
    }

    #[test]
    fn expansion_matches_matrix_exponential() {
        let h = HermitianOperator::from_real_diagonal(&[0.2, -0.7, 1.1]);
        let psi0 = StateVector::normalized(vec![c(1., 0.), c(0., -1.), c(-1., 1.)]).unwrap();
        let s = Settings::default();
        for t in [0.3, 2.0, 9.5] {
            let got = closed_form_solution(&psi0, &h, &k3(), &equal(), t, &s).unwrap();
            let g = static_comoving_generator(&h, &k3(), &equal());
            let expected = expm_hermitian(k3().matrix(), t).unwrap()
                * expm_hermitian(g.matrix(), t).unwrap()
                * psi0.as_vector();
            assert!((got.as_vector() - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn cyclic_fidelity_cases() {
        let zero = HermitianOperator::zeros(3);
        let base = zeno_spectrum(&zero, &k3(), &equal(), &equal(), &Settings::default()).unwrap();
        let period = PathPeriod::Periodic {
            period: TAU,
            reference_frequency: 0.0,
        };

        let single = ZenoSpectrum {
            coefficients: vec![c(1., 0.), c(0., 0.)],
            ..base.clone()
        };
        assert!((cyclic_return_fidelity(&single, &period).unwrap() - 1.0).abs() < 1e-15);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mixed = ZenoSpectrum {
            coefficients: vec![c(h, 0.), c(h, 0.)],
            ..base.clone()
        };
        let fid = cyclic_return_fidelity(&mixed, &period).unwrap();
        let expected = (TAU / 3f64.sqrt()).cos().powi(2);
        assert!((fid * fid - expected).abs() < 1e-12);
        assert!((expected - 0.781_819_297).abs() < 1e-9);

        let flat = ZenoSpectrum {
            omegas: vec![0.9, 0.9],
            coefficients: vec![c(h, 0.), c(0., h)],
            ..base
        };
        assert!((cyclic_return_fidelity(&flat, &period).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            cyclic_return_fidelity(&flat, &PathPeriod::Aperiodic),
            Err(Error::Aperiodic)
        ));
    }
}
