//! Dense complex linear algebra: states, Hermitian operators, projectors and
//! spectral matrix exponentials.
//!
//! Exponentials are always formed spectrally, `e^{-iAt} = V diag(e^{-i lambda t}) V^dag`,
//! so the result is unitary to rounding for every Hermitian `A`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tolerances::Tolerances;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);
const EIGEN_MAX_SWEEPS: usize = 10_000;

/// Probability amplitudes of an N-level system, N >= 2.
///
/// The squared norm may be below one: the discrete dark map never
/// renormalizes, and the missing weight is the probability of a "Yes".
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(CVector);

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        Self::from_vector(CVector::from_vec(amplitudes))
    }

    pub fn from_vector(v: CVector) -> Result<Self> {
        if v.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "state dimension {} is below 2",
                v.len()
            )));
        }
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("state has non-finite amplitudes".into()));
        }
        let norm_sqr = v.norm_squared();
        if norm_sqr > 1.0 + Tolerances::DEFAULT.state_norm_slack {
            return Err(Error::NormTooLarge { norm_sqr });
        }
        Ok(StateVector(v))
    }

    /// Scales the amplitudes to unit norm.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let v = CVector::from_vec(amplitudes);
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Normalization { norm });
        }
        Self::from_vector(v.unscale(norm))
    }

    /// Basis state `|index>` in dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidInput(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut v = CVector::zeros(dim);
        v[index] = Complex64::new(1.0, 0.0);
        Self::from_vector(v)
    }

    /// Wraps a vector produced internally by a norm-non-increasing map.
    pub(crate) fn from_raw(v: CVector) -> Self {
        debug_assert!(v.norm_squared() <= 1.0 + 1e-9, "raw state norm {}", v.norm());
        StateVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        self.0.as_slice()
    }

    pub fn as_vector(&self) -> &CVector {
        &self.0
    }

    pub fn into_vector(self) -> CVector {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.norm_squared()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.0.dotc(&other.0)
    }

    pub fn is_unit(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    pub(crate) fn require_unit(&self, tol: f64) -> Result<()> {
        if self.is_unit(tol) {
            Ok(())
        } else {
            Err(Error::Normalization { norm: self.norm() })
        }
    }
}

/// N x N complex Hermitian matrix, in angular-frequency units.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(CMatrix);

impl HermitianOperator {
    /// Validates Hermiticity within the absolute tolerance and stores the
    /// exactly symmetrized matrix `(A + A^dag) / 2`.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidInput(format!(
                "operator must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() < 2 {
            return Err(Error::InvalidInput(format!(
                "operator dimension {} is below 2",
                m.nrows()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("operator has non-finite entries".into()));
        }
        let residual = hermiticity_residual(&m);
        if residual > Tolerances::DEFAULT.hermiticity {
            return Err(Error::HermiticityViolation { residual });
        }
        Ok(HermitianOperator(symmetrize(&m)))
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("operator rows must form a square matrix".into()));
        }
        Self::new(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianOperator(CMatrix::zeros(dim, dim))
    }

    pub fn from_real_diagonal(diagonal: &[f64]) -> Self {
        let d = CVector::from_iterator(diagonal.len(), diagonal.iter().map(|&x| x.into()));
        HermitianOperator(CMatrix::from_diagonal(&d))
    }

    /// Symmetrizes a matrix that is Hermitian up to rounding by construction.
    pub(crate) fn from_raw(m: CMatrix) -> Self {
        debug_assert!(hermiticity_residual(&m) <= 1e-8 * (1.0 + m.norm()));
        HermitianOperator(symmetrize(&m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.0 * v
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| *z == Complex64::new(0.0, 0.0))
    }

    /// `||[self, other]||_F`
    pub fn commutator_norm(&self, other: &HermitianOperator) -> f64 {
        commutator(&self.0, &other.0).norm()
    }
}

/// Orthogonal projector `I - |f><f|` onto the complement of a unit state.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector(CMatrix);

impl Projector {
    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.0 * v
    }
}

/// Ascending eigenvalues with an orthonormal eigenbasis. The first
/// significant component of every eigenvector is real and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<StateVector>,
}

impl EigenDecomposition {
    /// Eigenvectors as the columns of a unitary matrix.
    pub fn vectors_matrix(&self) -> CMatrix {
        let n = self.eigenvectors.len();
        CMatrix::from_fn(n, n, |i, k| self.eigenvectors[k].as_vector()[i])
    }

    pub fn reconstruct(&self) -> CMatrix {
        let v = self.vectors_matrix();
        let d = CVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&l| l.into()),
        );
        &v * CMatrix::from_diagonal(&d) * v.adjoint()
    }
}

pub fn hermitian_eigendecomposition(a: &HermitianOperator) -> Result<EigenDecomposition> {
    let (eigenvalues, vectors) = eigh(a.matrix())?;
    let eigenvectors = vectors
        .column_iter()
        .map(|c| StateVector::from_raw(c.into_owned()))
        .collect();
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// `e^{-iAt}`
pub fn unitary_exp(a: &HermitianOperator, t: f64) -> Result<CMatrix> {
    expm_hermitian(a.matrix(), t)
}

pub fn projector_from_state(f: &StateVector) -> Result<Projector> {
    f.require_unit(Tolerances::DEFAULT.unit_norm)?;
    Ok(Projector(complement_projector(f.as_vector())))
}

pub(crate) fn hermiticity_residual(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).unscale(2.0)
}

pub(crate) fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub(crate) fn outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.adjoint()
}

/// `I - |f><f|`
pub(crate) fn complement_projector(f: &CVector) -> CMatrix {
    CMatrix::identity(f.len(), f.len()) - outer(f, f)
}

/// `P A P` with `P = I - |f><f|`, expanded to avoid two dense products.
pub(crate) fn sandwich_complement(a: &CMatrix, f: &CVector) -> CMatrix {
    let af = a * f;
    let fa = f.adjoint() * a;
    let faf = f.dotc(&af);
    a - &af * f.adjoint() - f * &fa + (f * f.adjoint()).scale_complex(faf)
}

trait ScaleComplex {
    fn scale_complex(self, z: Complex64) -> Self;
}

impl ScaleComplex for CMatrix {
    fn scale_complex(mut self, z: Complex64) -> Self {
        self.iter_mut().for_each(|x| *x *= z);
        self
    }
}

/// Ascending eigenpairs of a Hermitian matrix with the phase convention
/// applied. Accepts any square size, including the restricted blocks used by
/// the Zeno spectrum.
pub(crate) fn eigh(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = m.nrows();
    if n == 1 {
        return Ok((vec![m[(0, 0)].re], CMatrix::identity(1, 1)));
    }
    let eig = SymmetricEigen::try_new(symmetrize(m), f64::EPSILON, EIGEN_MAX_SWEEPS)
        .ok_or(Error::EigenConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        // Re-orthonormalization is unnecessary; only the phase is fixed.
        fix_phase(&mut col, Tolerances::DEFAULT.phase_significance);
        vectors.set_column(dst, &col);
    }
    Ok((values, vectors))
}

/// Rotates `v` so that its first component above `threshold` is real positive.
pub(crate) fn fix_phase(v: &mut CVector, threshold: f64) {
    if let Some(lead) = v.iter().find(|z| z.norm() > threshold).copied() {
        let rot = lead.conj() / lead.norm();
        v.iter_mut().for_each(|z| *z *= rot);
    }
}

pub(crate) fn expm_hermitian(h: &CMatrix, t: f64) -> Result<CMatrix> {
    let (values, v) = eigh(h)?;
    let phases = CVector::from_iterator(values.len(), values.iter().map(|&l| (-I * l * t).exp()));
    Ok(&v * CMatrix::from_diagonal(&phases) * v.adjoint())
}

/// `e^{-iht} psi` without forming the full exponential.
pub(crate) fn expm_hermitian_apply(h: &CMatrix, t: f64, psi: &CVector) -> Result<CVector> {
    let (values, v) = eigh(h)?;
    let mut coeffs = v.ad_mul(psi);
    for (c, &l) in coeffs.iter_mut().zip(&values) {
        *c *= (-I * l * t).exp();
    }
    Ok(&v * coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn pauli_x() -> HermitianOperator {
        HermitianOperator::from_rows(&[vec![c(0., 0.), c(1., 0.)], vec![c(1., 0.), c(0., 0.)]])
            .unwrap()
    }

    #[test]
    fn diagonal_eigendecomposition_is_standard_basis() {
        let d = hermitian_eigendecomposition(&HermitianOperator::from_real_diagonal(&[
            0.0, 1.0, 2.0,
        ]))
        .unwrap();
        assert_eq!(d.eigenvalues, vec![0.0, 1.0, 2.0]);
        for (k, v) in d.eigenvectors.iter().enumerate() {
            let e = StateVector::basis(3, k).unwrap();
            assert!((v.as_vector() - e.as_vector()).norm() < 1e-14);
        }
    }

    #[test]
    fn pauli_x_eigenpairs_follow_phase_convention() {
        let d = hermitian_eigendecomposition(&pauli_x()).unwrap();
        assert!((d.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((d.eigenvalues[1] - 1.0).abs() < 1e-14);
        let minus = CVector::from_vec(vec![c(FRAC_1_SQRT_2, 0.), c(-FRAC_1_SQRT_2, 0.)]);
        let plus = CVector::from_vec(vec![c(FRAC_1_SQRT_2, 0.), c(FRAC_1_SQRT_2, 0.)]);
        assert!((d.eigenvectors[0].as_vector() - minus).norm() < 1e-14);
        assert!((d.eigenvectors[1].as_vector() - plus).norm() < 1e-14);
    }

    #[test]
    fn zero_time_exponential_is_identity() {
        let u = unitary_exp(&pauli_x(), 0.0).unwrap();
        assert!(max_abs_diff(&u, &CMatrix::identity(2, 2)) < 1e-15);
    }

    #[test]
    fn diagonal_exponential_at_pi() {
        let u = unitary_exp(&HermitianOperator::from_real_diagonal(&[0.0, 1.0, 2.0]), PI).unwrap();
        let expected = CMatrix::from_diagonal(&CVector::from_vec(vec![
            c(1., 0.),
            c(-1., 0.),
            c(1., 0.),
        ]));
        assert!(max_abs_diff(&u, &expected) < 1e-14);
    }

    #[test]
    fn pauli_x_quarter_turn_matches_taylor_series() {
        // Independent oracle: 20-term Taylor series of e^{-iAt}.
        let a = pauli_x();
        let t = PI / 2.0;
        let step = a.matrix().clone().scale_complex(-I * t);
        let mut term = CMatrix::identity(2, 2);
        let mut series = CMatrix::identity(2, 2);
        for k in 1..=20 {
            term = &term * &step / Complex64::from(k as f64);
            series += &term;
        }
        let expected = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., -1.), c(0., 0.)]);
        assert!(max_abs_diff(&series, &expected) < 1e-12);
        let u = unitary_exp(&a, t).unwrap();
        assert!(max_abs_diff(&u, &series) < 1e-12);
    }

    #[test]
    fn projector_examples() {
        let p = projector_from_state(&StateVector::basis(3, 0).unwrap()).unwrap();
        let expected = CMatrix::from_diagonal(&CVector::from_vec(vec![
            c(0., 0.),
            c(1., 0.),
            c(1., 0.),
        ]));
        assert!(max_abs_diff(p.matrix(), &expected) < 1e-15);

        let f = StateVector::new(vec![c(FRAC_1_SQRT_2, 0.), c(FRAC_1_SQRT_2, 0.)]).unwrap();
        let p = projector_from_state(&f).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.), c(-0.5, 0.), c(-0.5, 0.), c(0.5, 0.)]);
        assert!(max_abs_diff(p.matrix(), &expected) < 1e-15);

        let f = StateVector::new(vec![c(FRAC_1_SQRT_2, 0.), c(0., FRAC_1_SQRT_2)]).unwrap();
        let p = projector_from_state(&f).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.), c(0., 0.5), c(0., -0.5), c(0.5, 0.)]);
        assert!(max_abs_diff(p.matrix(), &expected) < 1e-15);
        assert!(p.apply(f.as_vector()).norm() < 1e-15);
    }

    #[test]
    fn projector_rejects_non_unit_state() {
        let f = StateVector::new(vec![c(0.5, 0.), c(0.5, 0.)]).unwrap();
        assert!(matches!(projector_from_state(&f), Err(Error::Normalization { .. })));
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(2., 0.), c(0., 0.)]);
        assert!(matches!(
            HermitianOperator::new(m),
            Err(Error::HermiticityViolation { .. })
        ));
        let m = CMatrix::from_row_slice(2, 2, &[c(0., 1.), c(0., 0.), c(0., 0.), c(0., 0.)]);
        assert!(HermitianOperator::new(m).is_err());
    }

    #[test]
    fn state_invariants() {
        assert!(StateVector::new(vec![c(1., 0.)]).is_err());
        assert!(matches!(
            StateVector::new(vec![c(1., 0.), c(1., 0.)]),
            Err(Error::NormTooLarge { .. })
        ));
        let sub = StateVector::new(vec![c(0.3, 0.), c(0.0, 0.4)]).unwrap();
        assert!((sub.norm_sqr() - 0.25).abs() < 1e-15);
        assert!(StateVector::normalized(vec![c(0., 0.), c(0., 0.)]).is_err());
    }

    #[test]
    fn degenerate_spectrum_still_orthonormal() {
        let a = HermitianOperator::from_real_diagonal(&[1.0, 1.0, 1.0, 2.0]);
        let d = hermitian_eigendecomposition(&a).unwrap();
        let v = d.vectors_matrix();
        assert!(max_abs_diff(&(v.adjoint() * &v), &CMatrix::identity(4, 4)) < 1e-14);
        assert!(max_abs_diff(&d.reconstruct(), a.matrix()) < 1e-14);
    }

    #[test]
    fn sandwich_matches_dense_product() {
        let a = CMatrix::from_fn(3, 3, |i, j| c((i + 2 * j) as f64, i as f64 - j as f64));
        let f = StateVector::normalized(vec![c(1., 0.5), c(-0.2, 0.3), c(0.7, 0.)]).unwrap();
        let p = complement_projector(f.as_vector());
        let dense = &p * &a * &p;
        assert!(max_abs_diff(&sandwich_complement(&a, f.as_vector()), &dense) < 1e-13);
    }
}
