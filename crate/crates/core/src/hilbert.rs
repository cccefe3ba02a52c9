//! Dense state-vector and operator algebra on small Hilbert spaces.
//!
//! Collapse bases are always diagonal in the canonical basis, so a
//! [`ProjectorSet`] stores each projector as a block of basis indices and
//! `P_k ψ` is a masked copy rather than a matrix product.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Allowed deviation of `‖ψ‖²` from one for a normalized state.
pub const NORM_TOLERANCE: f64 = 1e-10;
/// Entrywise tolerance for `A = A†`.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
/// Allowed deviation of `Tr ρ` from one.
pub const TRACE_TOLERANCE: f64 = 1e-10;
/// Smallest eigenvalue accepted for a density matrix.
pub const EIGENVALUE_FLOOR: f64 = -1e-10;
/// Largest imaginary part tolerated in an expectation value of a Hermitian operator.
pub const IMAGINARY_TOLERANCE: f64 = 1e-10;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// A wave function over the canonical basis of an `N`-dimensional space.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateVector {
    amplitudes: DVector<Complex64>,
}

impl StateVector {
    /// Builds a state from amplitudes that must already be normalized.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let state = Self::from_amplitudes(DVector::from_vec(amplitudes))?;
        let norm_sqr = state.norm_sqr();
        if (norm_sqr - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(state)
    }

    /// Wraps arbitrary nonzero amplitudes; the norm is not constrained.
    pub fn from_amplitudes(amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::DimensionTooSmall(amplitudes.len()));
        }
        let norm_sqr = amplitudes.norm_squared();
        if !norm_sqr.is_finite() || norm_sqr == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(Self { amplitudes })
    }

    /// Real amplitudes, normalized on construction.
    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        let v = DVector::from_iterator(
            amplitudes.len(),
            amplitudes.iter().map(|&a| Complex64::new(a, 0.0)),
        );
        normalize(&Self::from_amplitudes(v)?)
    }

    /// The state with amplitudes `√p_k`.
    pub fn from_populations(populations: &[f64]) -> Result<Self> {
        if let Some(p) = populations.iter().find(|p| !(**p >= 0.0)) {
            return Err(Error::param("populations", format!("negative or NaN entry {p}")));
        }
        let amps: Vec<f64> = populations.iter().map(|p| p.sqrt()).collect();
        Self::from_real(&amps)
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::DimensionMismatch { expected: dim, found: index + 1 });
        }
        let mut v = DVector::from_element(dim, ZERO);
        v[index] = Complex64::new(1.0, 0.0);
        Self::from_amplitudes(v)
    }

    pub fn uniform(dim: usize) -> Result<Self> {
        Self::from_real(&vec![1.0; dim])
    }

    /// Crate-internal constructor used by integrators on hot paths.
    pub(crate) fn from_raw(amplitudes: DVector<Complex64>) -> Self {
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOLERANCE
    }

    pub fn is_finite(&self) -> bool {
        self.amplitudes.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    /// `e^{iθ} ψ`.
    pub fn with_global_phase(&self, theta: f64) -> Self {
        let phase = Complex64::from_polar(1.0, theta);
        Self { amplitudes: self.amplitudes.map(|a| a * phase) }
    }
}

/// A Hermitian matrix: a Hamiltonian, an order parameter, or an observable.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HermitianOperator {
    matrix: DMatrix<Complex64>,
}

impl HermitianOperator {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        let deviation = hermitian_deviation(&matrix);
        if deviation > HERMITIAN_TOLERANCE {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self { matrix })
    }

    pub fn from_real_diagonal(diagonal: &[f64]) -> Self {
        let d = DVector::from_iterator(diagonal.len(), diagonal.iter().map(|&x| Complex64::new(x, 0.0)));
        Self { matrix: DMatrix::from_diagonal(&d) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { matrix: DMatrix::from_element(dim, dim, ZERO) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: DMatrix::identity(dim, dim) }
    }

    pub fn pauli_x() -> Self {
        let one = Complex64::new(1.0, 0.0);
        Self { matrix: DMatrix::from_row_slice(2, 2, &[ZERO, one, one, ZERO]) }
    }

    pub fn pauli_z() -> Self {
        Self::from_real_diagonal(&[1.0, -1.0])
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        &self.matrix * v
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { matrix: &self.matrix * Complex64::new(factor, 0.0) }
    }

    /// True when the operator commutes with every projector of `projectors`,
    /// i.e. it has no matrix elements between distinct blocks.
    pub fn commutes_with(&self, projectors: &ProjectorSet) -> bool {
        let n = self.dim();
        (0..n).all(|i| {
            (0..n).all(|j| {
                projectors.owner(i) == projectors.owner(j)
                    || self.matrix[(i, j)].norm() <= HERMITIAN_TOLERANCE
            })
        })
    }
}

/// A set of mutually orthogonal projectors diagonal in the canonical basis.
///
/// Each projector is the sum of `|i⟩⟨i|` over a block of basis indices;
/// canonical rank-1 projectors have single-index blocks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectorSet {
    dim: usize,
    blocks: Vec<Vec<usize>>,
    #[serde(skip)]
    owner: Vec<Option<usize>>,
}

impl ProjectorSet {
    /// The rank-1 projectors `|k⟩⟨k|` for `k = 0..dim`.
    pub fn canonical(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimensionTooSmall(dim));
        }
        Self::from_blocks(dim, (0..dim).map(|k| vec![k]).collect())
    }

    /// Builds projectors from disjoint, nonempty index blocks.
    pub fn from_blocks(dim: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimensionTooSmall(dim));
        }
        if blocks.is_empty() {
            return Err(Error::InvalidProjectors("no projectors given".into()));
        }
        let mut owner = vec![None; dim];
        for (k, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidProjectors(format!("projector {k} is empty")));
            }
            for &i in block {
                if i >= dim {
                    return Err(Error::InvalidProjectors(format!(
                        "projector {k} references basis index {i} outside dimension {dim}"
                    )));
                }
                if let Some(other) = owner[i] {
                    return Err(Error::InvalidProjectors(format!(
                        "basis index {i} appears in projectors {other} and {k}"
                    )));
                }
                owner[i] = Some(k);
            }
        }
        Ok(Self { dim, blocks, owner })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Index of the projector containing basis state `i`.
    pub fn owner(&self, i: usize) -> Option<usize> {
        self.owner.get(i).copied().flatten()
    }

    pub fn is_complete(&self) -> bool {
        self.owner.iter().all(Option::is_some)
    }

    pub fn require_complete(&self) -> Result<()> {
        let covered = self.owner.iter().filter(|o| o.is_some()).count();
        if covered == self.dim {
            Ok(())
        } else {
            Err(Error::IncompleteProjectors { covered, dim: self.dim })
        }
    }

    /// `⟨ψ|P_k|ψ⟩` without normalization.
    pub fn weight(&self, k: usize, psi: &DVector<Complex64>) -> f64 {
        self.blocks[k].iter().map(|&i| psi[i].norm_sqr()).sum()
    }

    /// `⟨P_k⟩` for every `k`, divided by `⟨ψ|ψ⟩` so unnormalized
    /// intermediate states are handled consistently.
    pub fn populations(&self, psi: &DVector<Complex64>) -> Vec<f64> {
        let total = psi.norm_squared();
        (0..self.len()).map(|k| self.weight(k, psi) / total).collect()
    }

    /// `P_k ψ` as a masked copy.
    pub fn apply(&self, k: usize, psi: &DVector<Complex64>) -> DVector<Complex64> {
        let mut out = DVector::from_element(psi.len(), ZERO);
        for &i in &self.blocks[k] {
            out[i] = psi[i];
        }
        out
    }

    pub fn matrix(&self, k: usize) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(self.dim, self.dim, ZERO);
        for &i in &self.blocks[k] {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// `Σ_k P_k ρ P_k`: keeps entries whose row and column lie in the same block.
    pub fn dephase(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| match (self.owner(i), self.owner(j)) {
            (Some(a), Some(b)) if a == b => rho[(i, j)],
            _ => ZERO,
        })
    }
}

/// A noise-averaged statistical operator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityMatrix {
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        let rho = Self { matrix };
        rho.check()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<Complex64>) -> Self {
        Self { matrix }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let w = Complex64::new(1.0 / dim as f64, 0.0);
        Self { matrix: DMatrix::identity(dim, dim) * w }
    }

    /// Returns a description of the first violated invariant, if any.
    pub fn check(&self) -> Result<()> {
        let deviation = hermitian_deviation(&self.matrix);
        if deviation > HERMITIAN_TOLERANCE {
            return Err(Error::InvalidDensityMatrix(format!("not Hermitian (deviation {deviation:e})")));
        }
        let trace = self.trace();
        if (trace - 1.0).abs() > TRACE_TOLERANCE {
            return Err(Error::InvalidDensityMatrix(format!("trace {trace} differs from 1")));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < EIGENVALUE_FLOOR {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `Tr ρ²`, which for Hermitian ρ is the squared Frobenius norm.
    pub fn purity(&self) -> f64 {
        self.matrix.norm_squared()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `Tr[ρ A]`.
    pub fn expectation(&self, op: &HermitianOperator) -> Result<f64> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: op.dim() });
        }
        Ok((op.matrix() * &self.matrix).trace().re)
    }
}

fn hermitian_deviation(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `⟨ψ|A|ψ⟩` for a normalized state.
pub fn expectation(op: &HermitianOperator, psi: &StateVector) -> Result<f64> {
    if op.dim() != psi.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), found: psi.dim() });
    }
    let amps = psi.amplitudes();
    let value = amps.dotc(&op.apply(amps));
    if value.im.abs() > IMAGINARY_TOLERANCE {
        return Err(Error::ImaginaryResidue { residue: value.im });
    }
    Ok(value.re)
}

/// The two-state order parameter `Ŝ_z = 𝒩 σ_z`.
pub fn build_order_parameter(n_size: f64) -> Result<HermitianOperator> {
    if !(n_size > 0.0) || !n_size.is_finite() {
        return Err(Error::param("system_size", format!("must be positive, got {n_size}")));
    }
    Ok(HermitianOperator::from_real_diagonal(&[n_size, -n_size]))
}

pub fn canonical_projectors(n_dim: usize) -> Result<ProjectorSet> {
    ProjectorSet::canonical(n_dim)
}

/// Rescales to unit norm. States already within `1e-15` of unit norm are
/// returned unchanged.
pub fn normalize(psi: &StateVector) -> Result<StateVector> {
    let norm = psi.norm();
    if !norm.is_finite() || norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    if (norm - 1.0).abs() < 1e-15 {
        return Ok(psi.clone());
    }
    let inv = Complex64::new(1.0 / norm, 0.0);
    Ok(StateVector::from_raw(psi.amplitudes() * inv))
}

/// `|ψ⟩⟨ψ|`.
pub fn pure_projector(psi: &StateVector) -> DensityMatrix {
    let a = psi.amplitudes();
    DensityMatrix::from_matrix_unchecked(a * a.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn expectation_examples() {
        let p0 = HermitianOperator::from_real_diagonal(&[1.0, 0.0]);
        let up = StateVector::basis(2, 0).unwrap();
        assert_eq!(expectation(&p0, &up).unwrap(), 1.0);

        let sz = HermitianOperator::pauli_z();
        let plus = StateVector::uniform(2).unwrap();
        assert!(expectation(&sz, &plus).unwrap().abs() < 1e-15);

        for theta in [0.0, 0.3, 1.7, -2.9] {
            let psi = StateVector::new(vec![
                c(0.3f64.sqrt()),
                Complex64::from_polar(0.7f64.sqrt(), theta),
            ])
            .unwrap();
            assert!((expectation(&sz, &psi).unwrap() + 0.4).abs() < 1e-14);
        }
    }

    #[test]
    fn expectation_rejects_dimension_mismatch() {
        let sz = HermitianOperator::pauli_z();
        let psi = StateVector::uniform(3).unwrap();
        assert_eq!(
            expectation(&sz, &psi),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        );
    }

    #[test]
    fn order_parameter_scaling_and_projector_relation() {
        assert_eq!(build_order_parameter(1.0).unwrap(), HermitianOperator::pauli_z());
        assert_eq!(
            build_order_parameter(100.0).unwrap(),
            HermitianOperator::from_real_diagonal(&[100.0, -100.0])
        );
        let n = 7.5;
        let p = canonical_projectors(2).unwrap();
        let diff = (p.matrix(0) - p.matrix(1)) * c(n);
        assert_eq!(&diff, build_order_parameter(n).unwrap().matrix());
        assert!(build_order_parameter(0.0).is_err());
    }

    #[test]
    fn canonical_projector_examples() {
        let p = canonical_projectors(2).unwrap();
        assert_eq!(p.matrix(0), HermitianOperator::from_real_diagonal(&[1.0, 0.0]).matrix().clone());
        assert_eq!(p.matrix(1), HermitianOperator::from_real_diagonal(&[0.0, 1.0]).matrix().clone());

        let p5 = canonical_projectors(5).unwrap();
        let sum = (0..5).fold(DMatrix::zeros(5, 5), |acc, k| acc + p5.matrix(k));
        assert_eq!(sum, DMatrix::identity(5, 5));
        assert_eq!(p5.matrix(1) * p5.matrix(3), DMatrix::zeros(5, 5));

        assert_eq!(canonical_projectors(1), Err(Error::DimensionTooSmall(1)));
    }

    #[test]
    fn projector_algebra_invariants() {
        let sets = [
            canonical_projectors(6).unwrap(),
            ProjectorSet::from_blocks(6, vec![vec![0, 3], vec![1], vec![2, 4, 5]]).unwrap(),
        ];
        for p in &sets {
            assert!(p.is_complete());
            let n = p.dim();
            let mut sum = DMatrix::zeros(n, n);
            for j in 0..p.len() {
                let pj = p.matrix(j);
                assert!((&pj * &pj - &pj).norm() < 1e-12);
                for k in 0..p.len() {
                    if j != k {
                        assert!((&pj * p.matrix(k)).norm() < 1e-12);
                    }
                }
                sum += pj;
            }
            assert!((sum - DMatrix::<Complex64>::identity(n, n)).norm() < 1e-12);
        }
    }

    #[test]
    fn overlapping_or_out_of_range_blocks_rejected() {
        assert!(ProjectorSet::from_blocks(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(ProjectorSet::from_blocks(3, vec![vec![0, 3]]).is_err());
        let partial = ProjectorSet::from_blocks(3, vec![vec![0], vec![1]]).unwrap();
        assert_eq!(
            partial.require_complete(),
            Err(Error::IncompleteProjectors { covered: 2, dim: 3 })
        );
    }

    #[test]
    fn normalize_examples() {
        let v = StateVector::from_amplitudes(DVector::from_vec(vec![c(2.0), c(0.0)])).unwrap();
        assert_eq!(normalize(&v).unwrap().amplitudes().as_slice(), &[c(1.0), c(0.0)]);

        let v = StateVector::from_amplitudes(DVector::from_vec(vec![c(1.0), c(1.0)])).unwrap();
        let n = normalize(&v).unwrap();
        for a in n.amplitudes().iter() {
            assert!((a - c(FRAC_1_SQRT_2)).norm() < 1e-15);
        }

        let psi = StateVector::from_populations(&[0.3, 0.2, 0.5]).unwrap();
        let again = normalize(&psi).unwrap();
        assert_eq!(again, psi);

        let zero = DVector::from_element(2, ZERO);
        assert_eq!(StateVector::from_amplitudes(zero), Err(Error::ZeroNorm));
        let raw = StateVector::from_raw(DVector::from_element(2, ZERO));
        assert_eq!(normalize(&raw), Err(Error::ZeroNorm));
    }

    #[test]
    fn pure_projector_examples() {
        let rho = pure_projector(&StateVector::basis(2, 0).unwrap());
        assert_eq!(rho.matrix(), HermitianOperator::from_real_diagonal(&[1.0, 0.0]).matrix());

        let rho = pure_projector(&StateVector::uniform(2).unwrap());
        for x in rho.matrix().iter() {
            assert!((x - c(0.5)).norm() < 1e-15);
        }
        assert!(rho.check().is_ok());
    }

    #[test]
    fn density_matrix_validation() {
        let bad_trace = DMatrix::from_diagonal(&DVector::from_vec(vec![c(0.5), c(0.4)]));
        assert!(DensityMatrix::new(bad_trace).is_err());
        let negative = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.2), c(-0.2)]));
        assert!(DensityMatrix::new(negative).is_err());
        let mut non_herm = DMatrix::from_diagonal(&DVector::from_vec(vec![c(0.5), c(0.5)]));
        non_herm[(0, 1)] = c(0.1);
        assert!(DensityMatrix::new(non_herm).is_err());
        assert!(DensityMatrix::new(DensityMatrix::maximally_mixed(4).matrix().clone()).is_ok());
    }

    #[test]
    fn operator_validation() {
        let mut m = DMatrix::from_element(2, 2, ZERO);
        m[(0, 1)] = Complex64::new(0.0, 1.0);
        m[(1, 0)] = Complex64::new(0.0, 1.0);
        assert!(matches!(HermitianOperator::new(m), Err(Error::NotHermitian { .. })));
        assert!(HermitianOperator::pauli_z().commutes_with(&canonical_projectors(2).unwrap()));
        assert!(!HermitianOperator::pauli_x().commutes_with(&canonical_projectors(2).unwrap()));
    }

    fn random_state(dim: usize, seeds: &[f64]) -> StateVector {
        let amps: Vec<Complex64> = (0..dim)
            .map(|i| Complex64::new(seeds[2 * i], seeds[2 * i + 1]))
            .collect();
        normalize(&StateVector::from_amplitudes(DVector::from_vec(amps)).unwrap()).unwrap()
    }

    fn random_hermitian(dim: usize, seeds: &[f64]) -> HermitianOperator {
        let a = DMatrix::from_fn(dim, dim, |i, j| Complex64::new(seeds[i * dim + j], seeds[j * dim + i] - 0.3));
        let h = (&a + a.adjoint()) * c(0.5);
        HermitianOperator::new(h).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn expectation_is_phase_invariant(
            seeds in proptest::collection::vec(-1.0f64..1.0, 16),
            op_seeds in proptest::collection::vec(-1.0f64..1.0, 64),
            theta in -10.0f64..10.0,
        ) {
            prop_assume!(seeds.iter().map(|x| x * x).sum::<f64>() > 1e-3);
            let psi = random_state(8, &seeds);
            let op = random_hermitian(8, &op_seeds);
            let a = expectation(&op, &psi).unwrap();
            let b = expectation(&op, &psi.with_global_phase(theta)).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn projectors_sum_to_unit_expectation(
            seeds in proptest::collection::vec(-1.0f64..1.0, 16),
        ) {
            prop_assume!(seeds.iter().map(|x| x * x).sum::<f64>() > 1e-3);
            let psi = random_state(8, &seeds);
            let p = canonical_projectors(8).unwrap();
            let sum = (0..8).fold(DMatrix::zeros(8, 8), |acc, k| acc + p.matrix(k));
            let total = expectation(&HermitianOperator::new(sum).unwrap(), &psi).unwrap();
            prop_assert!((total - 1.0).abs() < 1e-12);
            let trace = pure_projector(&psi).trace();
            prop_assert!((trace - 1.0).abs() < 1e-12);
        }
    }
}
