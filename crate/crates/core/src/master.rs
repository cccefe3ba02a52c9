//! The noise-averaged dephasing master equation
//! `ħ ∂ρ/∂t = -i[H, ρ] + 𝒥𝒩 (Σ_k P_k ρ P_k - ρ)`, integrated with RK4.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, HermitianOperator, I, TRACE_TOLERANCE};
use crate::models::ModelSpec;

/// Snapshot positivity floor.
pub const POSITIVITY_FLOOR: f64 = -1e-8;
const SNAPSHOT_HERMITIAN_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MasterConfig {
    pub dt: f64,
    pub t_max: f64,
    pub record_stride: usize,
}

impl MasterConfig {
    pub fn new(dt: f64, t_max: f64) -> Self {
        Self { dt, t_max, record_stride: 1 }
    }

    pub fn with_record_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::param("t_max", format!("must be nonnegative, got {}", self.t_max)));
        }
        if self.record_stride == 0 {
            return Err(Error::param("record_stride", "must be at least 1"));
        }
        Ok(())
    }

    pub fn step_count(&self) -> usize {
        (self.t_max / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MasterSolution {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl MasterSolution {
    /// The recorded snapshot nearest to `t`, if one lies within half a step.
    pub fn at(&self, t: f64) -> Option<&DensityMatrix> {
        let (i, gap) = self
            .times
            .iter()
            .enumerate()
            .map(|(i, s)| (i, (s - t).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))?;
        (gap <= 0.5 * self.dt * (1.0 + 1e-9)).then(|| &self.states[i])
    }

    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("solutions hold at least the initial state")
    }

    /// `Tr[ρ(t) A]` at every snapshot.
    pub fn expectation_series(&self, op: &HermitianOperator) -> Result<Vec<f64>> {
        self.states.iter().map(|rho| rho.expectation(op)).collect()
    }
}

fn commutator_term(h: &HermitianOperator, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (h.matrix() * rho - rho * h.matrix()) * (-I)
}

fn rhs_matrix(spec: &ModelSpec, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut out = (spec.projectors.dephase(rho) - rho) * Complex64::from(spec.coupling * spec.system_size);
    if let Some(h) = &spec.hamiltonian {
        out += commutator_term(h, rho);
    }
    out / Complex64::from(spec.hbar)
}

/// `∂ρ/∂t`.
pub fn gksl_rhs(spec: &ModelSpec, rho: &DensityMatrix) -> Result<DMatrix<Complex64>> {
    spec.projectors.require_complete()?;
    if rho.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), found: rho.dim() });
    }
    Ok(rhs_matrix(spec, rho.matrix()))
}

fn check_snapshot(step: usize, m: &DMatrix<Complex64>) -> Result<()> {
    let invariant = |reason: String| Err(Error::MasterInvariant { step, reason });
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return invariant("non-finite entry".into());
    }
    let deviation = (m - m.adjoint()).camax();
    if deviation > SNAPSHOT_HERMITIAN_TOLERANCE {
        return invariant(format!("Hermiticity deviation {deviation:e}"));
    }
    let trace = m.trace();
    if (trace.re - 1.0).abs() > TRACE_TOLERANCE || trace.im.abs() > TRACE_TOLERANCE {
        return invariant(format!("trace {trace}"));
    }
    let min_eig = DensityMatrix::from_matrix_unchecked(m.clone()).min_eigenvalue();
    if min_eig < POSITIVITY_FLOOR {
        return invariant(format!("minimum eigenvalue {min_eig:e}"));
    }
    Ok(())
}

/// Classical RK4 from `rho0`, validating every recorded snapshot.
pub fn integrate_master(spec: &ModelSpec, rho0: &DensityMatrix, config: &MasterConfig) -> Result<MasterSolution> {
    config.validate()?;
    spec.projectors.require_complete()?;
    rho0.check()?;
    if rho0.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), found: rho0.dim() });
    }
    let dt = config.dt;
    let n_steps = config.step_count();
    let mut times = vec![0.0];
    let mut states = vec![rho0.clone()];
    let mut rho = rho0.matrix().clone();
    let (h, half, sixth) = (Complex64::from(dt), Complex64::from(dt / 2.0), Complex64::from(dt / 6.0));
    let two = Complex64::from(2.0);
    for step in 1..=n_steps {
        let k1 = rhs_matrix(spec, &rho);
        let k2 = rhs_matrix(spec, &(&rho + &k1 * half));
        let k3 = rhs_matrix(spec, &(&rho + &k2 * half));
        let k4 = rhs_matrix(spec, &(&rho + &k3 * h));
        rho += (k1 + k2 * two + k3 * two + k4) * sixth;
        if step % config.record_stride == 0 || step == n_steps {
            check_snapshot(step, &rho)?;
            times.push(step as f64 * dt);
            states.push(DensityMatrix::from_matrix_unchecked(rho.clone()));
        }
    }
    Ok(MasterSolution { dt, times, states })
}

/// Largest entrywise modulus of `ensemble_mean - ρ(t)`.
pub fn compare_ensemble_to_master(ensemble_mean: &DMatrix<Complex64>, solution: &MasterSolution, t: f64) -> Result<f64> {
    let rho = solution
        .at(t)
        .ok_or_else(|| Error::Mismatch(format!("master solution has no snapshot at t = {t}")))?;
    if ensemble_mean.shape() != rho.matrix().shape() {
        return Err(Error::Mismatch(format!(
            "ensemble mean is {:?} but the master state is {:?}",
            ensemble_mean.shape(),
            rho.matrix().shape()
        )));
    }
    Ok((ensemble_mean - rho.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{pure_projector, ProjectorSet, StateVector, ZERO};
    use crate::models::Variant;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(dim: usize, coupling: f64, n: f64) -> ModelSpec {
        ModelSpec::n_state(Variant::NStateIto, ProjectorSet::canonical(dim).unwrap(), coupling, n).unwrap()
    }

    fn random_rho(rng: &mut ChaCha8Rng, dim: usize) -> DensityMatrix {
        let a = DMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let m = &a * a.adjoint();
        let tr = m.trace();
        DensityMatrix::new(m / tr).unwrap()
    }

    fn random_hamiltonian(rng: &mut ChaCha8Rng, dim: usize) -> HermitianOperator {
        let a = DMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        HermitianOperator::new((&a + a.adjoint()) * Complex64::from(0.5)).unwrap()
    }

    /// Block-diagonal Hamiltonian for blocks {0, 2} and {1, 3}.
    fn commuting_setup(rng: &mut ChaCha8Rng) -> ModelSpec {
        let blocks = ProjectorSet::from_blocks(4, vec![vec![0, 2], vec![1, 3]]).unwrap();
        let mut h = DMatrix::from_element(4, 4, ZERO);
        for &(i, j) in &[(0usize, 2usize), (1, 3)] {
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
        for i in 0..4 {
            h[(i, i)] = Complex64::from(rng.random_range(-2.0..2.0));
        }
        let h = HermitianOperator::new(h).unwrap();
        assert!(h.commutes_with(&blocks));
        ModelSpec::n_state(Variant::NStateIto, blocks, 0.8, 1.5).unwrap().with_hamiltonian(h)
    }

    #[test]
    fn rhs_examples() {
        let s = spec(2, 1.0, 1.0);
        let diag = DensityMatrix::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::from(0.3),
            Complex64::from(0.7),
        ])))
        .unwrap();
        assert_eq!(gksl_rhs(&s, &diag).unwrap().camax(), 0.0);

        let plus = pure_projector(&StateVector::uniform(2).unwrap());
        let r = gksl_rhs(&s, &plus).unwrap();
        assert!((r[(0, 1)] - Complex64::from(-0.5)).norm() < 1e-15);
        assert!((r[(1, 0)] - Complex64::from(-0.5)).norm() < 1e-15);
        assert!(r[(0, 0)].norm() < 1e-15 && r[(1, 1)].norm() < 1e-15);
    }

    #[test]
    fn rhs_is_traceless() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let dim = rng.random_range(2..6);
            let s = spec(dim, 1.3, 0.7).with_hamiltonian(random_hamiltonian(&mut rng, dim));
            let r = gksl_rhs(&s, &random_rho(&mut rng, dim)).unwrap();
            assert!(r.trace().norm() < 1e-13);
        }
    }

    #[test]
    fn incomplete_projectors_rejected() {
        let partial = ProjectorSet::from_blocks(2, vec![vec![0]]).unwrap();
        let s = ModelSpec::n_state(Variant::NStateIto, partial, 1.0, 1.0).unwrap();
        assert!(gksl_rhs(&s, &DensityMatrix::maximally_mixed(2)).is_err());
    }

    #[test]
    fn coherences_decay_at_the_collapse_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for dim in [2, 3] {
            let s = spec(dim, 0.5, 2.0);
            let rho0 = random_rho(&mut rng, dim);
            let sol = integrate_master(&s, &rho0, &MasterConfig::new(1e-4, 1.0).with_record_stride(1000)).unwrap();
            let rho1 = sol.final_state();
            assert!((sol.times.last().unwrap() - 1.0).abs() < 1e-12);
            for j in 0..dim {
                for k in 0..dim {
                    let expected = if j == k { rho0.matrix()[(j, k)].norm() } else { rho0.matrix()[(j, k)].norm() * (-1.0f64).exp() };
                    let got = rho1.matrix()[(j, k)].norm();
                    assert!((got - expected).abs() <= 1e-6 * expected, "{j}{k}: {got} vs {expected}");
                }
            }
        }
    }

    #[test]
    fn coherences_vanish_at_long_times() {
        let s = spec(2, 1.0, 1.0);
        let plus = pure_projector(&StateVector::uniform(2).unwrap());
        let sol = integrate_master(&s, &plus, &MasterConfig::new(1e-3, 25.0).with_record_stride(25_000)).unwrap();
        assert!(sol.final_state().matrix()[(0, 1)].norm() < 1e-8);
    }

    #[test]
    fn commuting_hamiltonian_keeps_diagonals_and_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = commuting_setup(&mut rng);
        let h = s.hamiltonian.clone().unwrap();
        let rho0 = random_rho(&mut rng, 4);
        let sol = integrate_master(&s, &rho0, &MasterConfig::new(1e-3, 3.0).with_record_stride(100)).unwrap();
        let e0 = rho0.expectation(&h).unwrap();
        for rho in &sol.states {
            // Diagonal blocks of P_k ρ P_k are preserved; the basis diagonal only
            // for singleton blocks, so compare block populations.
            for k in 0..s.projectors.len() {
                let p: f64 = s.projectors.blocks()[k].iter().map(|&i| rho.matrix()[(i, i)].re).sum();
                let p0: f64 = s.projectors.blocks()[k].iter().map(|&i| rho0.matrix()[(i, i)].re).sum();
                assert!((p - p0).abs() < 1e-12);
            }
            assert!((rho.expectation(&h).unwrap() - e0).abs() < 1e-10);
        }
    }

    #[test]
    fn diagonals_constant_for_diagonal_hamiltonian() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = HermitianOperator::from_real_diagonal(&[0.3, -1.2, 2.0]);
        let s = spec(3, 1.0, 1.0).with_hamiltonian(h);
        let rho0 = random_rho(&mut rng, 3);
        let sol = integrate_master(&s, &rho0, &MasterConfig::new(1e-3, 2.0).with_record_stride(50)).unwrap();
        for rho in &sol.states {
            for i in 0..3 {
                assert!((rho.matrix()[(i, i)] - rho0.matrix()[(i, i)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn trace_positivity_and_purity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let psi = StateVector::from_amplitudes(nalgebra::DVector::from_fn(3, |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            }))
            .unwrap();
            let rho0 = pure_projector(&crate::hilbert::normalize(&psi).unwrap());
            let s = spec(3, 1.0, 1.0);
            let sol = integrate_master(&s, &rho0, &MasterConfig::new(1e-3, 5.0).with_record_stride(10)).unwrap();
            let mut last = f64::INFINITY;
            for rho in &sol.states {
                assert!((rho.trace() - 1.0).abs() < 1e-10);
                assert!(rho.min_eigenvalue() > POSITIVITY_FLOOR);
                let purity = rho.purity();
                assert!(purity <= last + 1e-14);
                last = purity;
            }
        }
    }

    #[test]
    fn evolution_is_linear_in_the_initial_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let alpha = 0.3;
        for _ in 0..10 {
            let s = spec(3, 0.9, 1.1).with_hamiltonian(random_hamiltonian(&mut rng, 3));
            let (a, b) = (random_rho(&mut rng, 3), random_rho(&mut rng, 3));
            let mix = DensityMatrix::new(a.matrix() * Complex64::from(alpha) + b.matrix() * Complex64::from(1.0 - alpha)).unwrap();
            let config = MasterConfig::new(1e-3, 1.0).with_record_stride(100);
            let (sa, sb, sm) = (
                integrate_master(&s, &a, &config).unwrap(),
                integrate_master(&s, &b, &config).unwrap(),
                integrate_master(&s, &mix, &config).unwrap(),
            );
            for ((ra, rb), rm) in sa.states.iter().zip(&sb.states).zip(&sm.states) {
                let combo = ra.matrix() * Complex64::from(alpha) + rb.matrix() * Complex64::from(1.0 - alpha);
                assert!((combo - rm.matrix()).camax() < 1e-10);
            }
        }
    }

    #[test]
    fn comparison_at_initial_time_is_exact() {
        let psi = StateVector::from_real(&[0.8f64.sqrt(), 0.2f64.sqrt()]).unwrap();
        let rho0 = pure_projector(&psi);
        let sol = integrate_master(&spec(2, 1.0, 1.0), &rho0, &MasterConfig::new(0.01, 0.5)).unwrap();
        assert_eq!(compare_ensemble_to_master(rho0.matrix(), &sol, 0.0).unwrap(), 0.0);
        assert!(compare_ensemble_to_master(rho0.matrix(), &sol, 7.0).is_err());
        let wrong = DMatrix::from_element(3, 3, ZERO);
        assert!(compare_ensemble_to_master(&wrong, &sol, 0.5).is_err());
    }

    #[test]
    fn snapshot_violations_name_the_step() {
        let bad = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![Complex64::from(1.5), Complex64::from(-0.5)]));
        match check_snapshot(7, &bad) {
            Err(Error::MasterInvariant { step: 7, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
