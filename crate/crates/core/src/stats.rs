//! Ensembles and the statistical checks run on them.
//!
//! Every check reports its statistic together with the threshold it was held
//! to. Significance is 5% for KS and chi-square tests and 3σ for Born and
//! martingale bands.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::hilbert::{ProjectorSet, StateVector, ZERO};
use crate::models::{derive_fdr_params, ModelSpec, Variant};
use crate::noise::{check_sbm_step, mix64, NoiseKind};
use crate::sde::{run_trajectory, IntegratorConfig, Outcome};

pub const SIGNIFICANCE: f64 = 0.05;
/// Width of the Born and martingale bands in standard errors.
pub const SIGMA_BAND: f64 = 3.0;
/// Allowed rounding in the martingale check, where the band collapses to zero
/// at `t = 0`.
pub const MARTINGALE_ROUNDING: f64 = 1e-12;
/// Born statistics require fewer than this fraction of unresolved runs.
pub const MAX_UNRESOLVED_FRACTION: f64 = 0.01;

const REFERENCE_SEED_SALT: u64 = 0x5245_4645_5245_4e43;
const COLORED_SEED_SALT: u64 = 0x434f_4c4f_5245_4453;

/// Hex SHA-256 of the JSON encoding of `value`, truncated to 32 digits.
pub fn fingerprint<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("plain data always serializes");
    hex::encode(&Sha256::digest(&bytes)[..16])
}

#[derive(Serialize)]
struct EnsembleInputs<'a> {
    spec: &'a ModelSpec,
    psi0: &'a StateVector,
    config: &'a IntegratorConfig,
    m: usize,
    master_seed: u64,
}

pub fn ensemble_fingerprint(spec: &ModelSpec, psi0: &StateVector, config: &IntegratorConfig, m: usize, master_seed: u64) -> String {
    fingerprint(&EnsembleInputs { spec, psi0, config, m, master_seed })
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleSummary {
    pub fingerprint: String,
    pub variant: Variant,
    pub m_trajectories: usize,
    pub master_seed: u64,
    pub projectors: ProjectorSet,
    pub initial_populations: Vec<f64>,
    pub outcome_counts: Vec<usize>,
    pub unresolved_count: usize,
    pub mean_collapse_time: Option<f64>,
    pub checkpoint_times: Vec<f64>,
    /// `[checkpoint][k]`.
    pub checkpoint_means: Vec<Vec<f64>>,
    /// Sample standard deviation, `[checkpoint][k]`.
    pub checkpoint_std: Vec<Vec<f64>>,
    #[serde(skip)]
    pub collapse_times: Vec<Option<f64>>,
    /// `[checkpoint][k][trajectory]`.
    #[serde(skip)]
    pub checkpoint_samples: Vec<Vec<Vec<f64>>>,
    /// Mean of `|ψ⟩⟨ψ|` at each checkpoint.
    #[serde(skip)]
    pub mean_density: Vec<DMatrix<Complex64>>,
    /// Standard errors of the real and imaginary parts of `mean_density`,
    /// stored as the real and imaginary parts of each entry.
    #[serde(skip)]
    pub density_std_error: Vec<DMatrix<Complex64>>,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Equality of everything but the wall time.
impl PartialEq for EnsembleSummary {
    fn eq(&self, other: &Self) -> bool {
        self.fingerprint == other.fingerprint
            && self.variant == other.variant
            && self.m_trajectories == other.m_trajectories
            && self.master_seed == other.master_seed
            && self.projectors == other.projectors
            && self.initial_populations == other.initial_populations
            && self.outcome_counts == other.outcome_counts
            && self.unresolved_count == other.unresolved_count
            && self.mean_collapse_time == other.mean_collapse_time
            && self.checkpoint_times == other.checkpoint_times
            && self.checkpoint_means == other.checkpoint_means
            && self.checkpoint_std == other.checkpoint_std
            && self.collapse_times == other.collapse_times
            && self.checkpoint_samples == other.checkpoint_samples
            && self.mean_density == other.mean_density
            && self.density_std_error == other.density_std_error
    }
}

impl EnsembleSummary {
    pub fn checkpoint_index(&self, t: f64) -> Option<usize> {
        self.checkpoint_times.iter().position(|c| (c - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    /// `⟨P_k⟩` across trajectories at checkpoint `c`.
    pub fn sample(&self, c: usize, k: usize) -> &[f64] {
        &self.checkpoint_samples[c][k]
    }
}

struct TrajectorySummary {
    outcome: Outcome,
    collapse_time: Option<f64>,
    checkpoint_states: Vec<StateVector>,
}

/// Runs `m` trajectories on the global thread pool.
pub fn run_ensemble(spec: &ModelSpec, psi0: &StateVector, config: &IntegratorConfig, m: usize, master_seed: u64) -> Result<EnsembleSummary> {
    run_ensemble_with_workers(spec, psi0, config, m, master_seed, None)
}

/// Runs `m` trajectories with indices `0..m` on `workers` threads (all cores
/// when `None`). The summary does not depend on the worker count.
pub fn run_ensemble_with_workers(
    spec: &ModelSpec,
    psi0: &StateVector,
    config: &IntegratorConfig,
    m: usize,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<EnsembleSummary> {
    if m == 0 {
        return Err(Error::param("m", "need at least one trajectory"));
    }
    spec.validate()?;
    config.validate()?;
    let start = Instant::now();
    let run = |i: usize| -> Result<TrajectorySummary> {
        let index = i as u64;
        let rec = run_trajectory(spec, psi0, config, index, master_seed)
            .map_err(|e| Error::Trajectory { index, source: Box::new(e) })?;
        Ok(TrajectorySummary { outcome: rec.final_outcome, collapse_time: rec.collapse_time, checkpoint_states: rec.checkpoint_states })
    };
    let results: Result<Vec<TrajectorySummary>> = match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::param("workers", e.to_string()))?;
            pool.install(|| (0..m).into_par_iter().map(run).collect())
        }
        None => (0..m).into_par_iter().map(run).collect(),
    };
    let results = results?;

    let k_count = spec.projectors.len();
    let mut outcome_counts = vec![0; k_count];
    let mut unresolved_count = 0;
    for r in &results {
        match r.outcome {
            Outcome::Collapsed(j) => {
                let k = spec.projectors.owner(j).expect("complete projector set");
                outcome_counts[k] += 1;
            }
            Outcome::Unresolved => unresolved_count += 1,
        }
    }
    let collapse_times: Vec<Option<f64>> = results.iter().map(|r| r.collapse_time).collect();
    let collapsed: Vec<f64> = collapse_times.iter().flatten().copied().collect();
    let mean_collapse_time = (!collapsed.is_empty()).then(|| collapsed.iter().sum::<f64>() / collapsed.len() as f64);

    let dim = spec.dim();
    let mut checkpoint_samples = Vec::new();
    let mut checkpoint_means = Vec::new();
    let mut checkpoint_std = Vec::new();
    let mut mean_density = Vec::new();
    let mut density_std_error = Vec::new();
    for c in 0..config.checkpoints.len() {
        let mut per_k = vec![Vec::with_capacity(m); k_count];
        for r in &results {
            for (k, p) in spec.projectors.populations(r.checkpoint_states[c].amplitudes()).into_iter().enumerate() {
                per_k[k].push(p);
            }
        }
        checkpoint_means.push(per_k.iter().map(|s| mean(s)).collect());
        checkpoint_std.push(per_k.iter().map(|s| sample_std(s)).collect());
        checkpoint_samples.push(per_k);

        let outer = |psi: &StateVector| {
            let a = psi.amplitudes();
            a * a.adjoint()
        };
        let mut sum = DMatrix::from_element(dim, dim, ZERO);
        for r in &results {
            sum += outer(&r.checkpoint_states[c]);
        }
        let avg = sum / Complex64::from(m as f64);
        let mut sq = DMatrix::from_element(dim, dim, ZERO);
        for r in &results {
            let d = outer(&r.checkpoint_states[c]) - &avg;
            sq += d.map(|z| Complex64::new(z.re * z.re, z.im * z.im));
        }
        let denom = if m > 1 { (m - 1) as f64 * m as f64 } else { 1.0 };
        density_std_error.push(sq.map(|z| Complex64::new((z.re / denom).sqrt(), (z.im / denom).sqrt())));
        mean_density.push(avg);
    }

    Ok(EnsembleSummary {
        fingerprint: ensemble_fingerprint(spec, psi0, config, m, master_seed),
        variant: spec.variant,
        m_trajectories: m,
        master_seed,
        projectors: spec.projectors.clone(),
        initial_populations: spec.projectors.populations(psi0.amplitudes()),
        outcome_counts,
        unresolved_count,
        mean_collapse_time,
        checkpoint_times: config.checkpoints.clone(),
        checkpoint_means,
        checkpoint_std,
        collapse_times,
        checkpoint_samples,
        mean_density,
        density_std_error,
        wall_time: start.elapsed(),
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mu = mean(xs);
    (xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// One pass/fail line of a JSON report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub fingerprint: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BornRow {
    pub k: usize,
    pub expected: f64,
    pub observed: f64,
    pub count: usize,
    pub margin: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BornReport {
    pub fingerprint: String,
    pub m: usize,
    pub unresolved: usize,
    pub sigma_band: f64,
    pub rows: Vec<BornRow>,
    pub pass: bool,
}

impl BornReport {
    pub fn records(&self) -> Vec<CheckRecord> {
        self.rows
            .iter()
            .map(|r| CheckRecord {
                name: format!("born_fraction_{}", r.k),
                fingerprint: self.fingerprint.clone(),
                statistic: r.margin,
                threshold: r.threshold,
                pass: r.pass,
            })
            .collect()
    }
}

fn check_initial(summary: &EnsembleSummary, psi0: &StateVector) -> Result<Vec<f64>> {
    if psi0.dim() != summary.projectors.dim() {
        return Err(Error::DimensionMismatch { expected: summary.projectors.dim(), found: psi0.dim() });
    }
    let expected = summary.projectors.populations(psi0.amplitudes());
    if expected.iter().zip(&summary.initial_populations).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(Error::Mismatch("psi0 differs from the ensemble's initial state".into()));
    }
    Ok(expected)
}

/// Outcome fractions against `|⟨P_k⟩(0)|` within `3√(p(1-p)/m)`.
pub fn born_check(summary: &EnsembleSummary, psi0: &StateVector) -> Result<BornReport> {
    let expected = check_initial(summary, psi0)?;
    let m = summary.m_trajectories;
    if summary.unresolved_count as f64 >= MAX_UNRESOLVED_FRACTION * m as f64 {
        return Err(Error::TooManyUnresolved { unresolved: summary.unresolved_count, m });
    }
    let rows: Vec<BornRow> = expected
        .iter()
        .zip(&summary.outcome_counts)
        .enumerate()
        .map(|(k, (&p, &count))| {
            let observed = count as f64 / m as f64;
            let threshold = SIGMA_BAND * (p * (1.0 - p) / m as f64).sqrt();
            let margin = (observed - p).abs();
            BornRow { k, expected: p, observed, count, margin, threshold, pass: margin <= threshold }
        })
        .collect();
    Ok(BornReport {
        fingerprint: summary.fingerprint.clone(),
        m,
        unresolved: summary.unresolved_count,
        sigma_band: SIGMA_BAND,
        pass: rows.iter().all(|r| r.pass),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MartingaleRow {
    pub t: f64,
    pub k: usize,
    pub expected: f64,
    pub mean: f64,
    pub std: f64,
    pub deviation: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MartingaleReport {
    pub fingerprint: String,
    pub m: usize,
    pub sigma_band: f64,
    pub rows: Vec<MartingaleRow>,
    pub pass: bool,
}

impl MartingaleReport {
    pub fn records(&self) -> Vec<CheckRecord> {
        self.rows
            .iter()
            .map(|r| CheckRecord {
                name: format!("martingale_t{}_k{}", r.t, r.k),
                fingerprint: self.fingerprint.clone(),
                statistic: r.deviation,
                threshold: r.threshold,
                pass: r.pass,
            })
            .collect()
    }
}

/// Checkpoint means of `⟨P_k⟩` against their initial values within
/// `3·s/√m`.
pub fn martingale_check(summary: &EnsembleSummary, psi0: &StateVector) -> Result<MartingaleReport> {
    let expected = check_initial(summary, psi0)?;
    let m = summary.m_trajectories;
    let mut rows = Vec::new();
    for (c, &t) in summary.checkpoint_times.iter().enumerate() {
        for (k, &p) in expected.iter().enumerate() {
            let mean = summary.checkpoint_means[c][k];
            let std = summary.checkpoint_std[c][k];
            let threshold = SIGMA_BAND * std / (m as f64).sqrt() + MARTINGALE_ROUNDING;
            let deviation = (mean - p).abs();
            rows.push(MartingaleRow { t, k, expected: p, mean, std, deviation, threshold, pass: deviation <= threshold });
        }
    }
    Ok(MartingaleReport { fingerprint: summary.fingerprint.clone(), m, sigma_band: SIGMA_BAND, pass: rows.iter().all(|r| r.pass), rows })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityComparison {
    pub t: f64,
    pub max_deviation: f64,
    /// Largest `|deviation| / standard error` over real and imaginary parts.
    pub max_z: f64,
    pub sigma_band: f64,
    pub pass: bool,
}

/// Entrywise comparison of the ensemble mean `|ψ⟩⟨ψ|` with a master-equation
/// state, each real and imaginary part within 3 standard errors.
pub fn density_band_check(summary: &EnsembleSummary, c: usize, rho: &DMatrix<Complex64>) -> Result<DensityComparison> {
    let mean = summary.mean_density.get(c).ok_or_else(|| Error::Mismatch(format!("no checkpoint {c}")))?;
    if mean.shape() != rho.shape() {
        return Err(Error::Mismatch("density matrix shapes differ".into()));
    }
    let se = &summary.density_std_error[c];
    let mut max_z = 0.0f64;
    let mut pass = true;
    for ((a, b), s) in mean.iter().zip(rho.iter()).zip(se.iter()) {
        for (d, e) in [((a.re - b.re).abs(), s.re), ((a.im - b.im).abs(), s.im)] {
            if d > SIGMA_BAND * e + MARTINGALE_ROUNDING {
                pass = false;
            }
            if e > 0.0 {
                max_z = max_z.max(d / e);
            }
        }
    }
    let max_deviation = (mean - rho).iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(DensityComparison { t: summary.checkpoint_times[c], max_deviation, max_z, sigma_band: SIGMA_BAND, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub significance: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub pass: bool,
}

/// Asymptotic two-sample critical value `c(α)·√((n+m)/(nm))`.
pub fn ks_critical_value(n_a: usize, n_b: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n_a + n_b) as f64 / (n_a as f64 * n_b as f64)).sqrt()
}

/// `Q(λ) = 2 Σ (-1)^{j-1} e^{-2j²λ²}`, the Kolmogorov survival function.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::param("sample", "contains a non-finite value"));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample Kolmogorov–Smirnov test at 5% significance.
pub fn ks_statistic(sample_a: &[f64], sample_b: &[f64]) -> Result<KsResult> {
    let a = sorted(sample_a)?;
    let b = sorted(sample_b)?;
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na as f64 * nb as f64) / (na + nb) as f64;
    let root = ne.sqrt();
    let p_value = kolmogorov_survival((root + 0.12 + 0.11 / root) * d);
    let critical_value = ks_critical_value(na, nb, SIGNIFICANCE);
    Ok(KsResult { statistic: d, n_a: na, n_b: nb, significance: SIGNIFICANCE, critical_value, p_value, pass: d < critical_value })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub significance: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub pass: bool,
}

/// Pearson goodness of fit of binned counts to expected counts, with
/// `bins - 1` degrees of freedom.
pub fn chi_square_test(observed: &[u64], expected: &[f64]) -> Result<ChiSquareResult> {
    if observed.len() != expected.len() {
        return Err(Error::DimensionMismatch { expected: expected.len(), found: observed.len() });
    }
    if observed.len() < 2 {
        return Err(Error::param("bins", "need at least two bins"));
    }
    if expected.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::param("expected", "every expected count must be positive"));
    }
    let statistic: f64 = observed.iter().zip(expected).map(|(&o, &e)| (o as f64 - e).powi(2) / e).sum();
    let df = observed.len() - 1;
    let dist = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    let critical_value = dist.inverse_cdf(1.0 - SIGNIFICANCE);
    Ok(ChiSquareResult {
        statistic,
        degrees_of_freedom: df,
        significance: SIGNIFICANCE,
        critical_value,
        p_value: 1.0 - dist.cdf(statistic),
        pass: statistic <= critical_value,
    })
}

/// Counts of `samples` in `bins` equal-width bins over `[lo, hi]`; values
/// on the upper edge go to the last bin.
pub fn histogram(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    let width = (hi - lo) / bins as f64;
    for &x in samples {
        if x >= lo && x <= hi {
            let b = (((x - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
    }
    counts
}

fn lag_steps(dt: f64, max_lag: f64) -> Result<usize> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    if !(max_lag >= 0.0) {
        return Err(Error::param("max_lag", format!("must be nonnegative, got {max_lag}")));
    }
    Ok((max_lag / dt).round() as usize)
}

fn autocovariance_at(path: &[f64], mu: f64, lag: usize, n_norm: usize) -> f64 {
    path.iter().zip(&path[lag..]).map(|(a, b)| (a - mu) * (b - mu)).sum::<f64>() / n_norm as f64
}

/// Biased empirical autocovariance `(1/n) Σ (x_i - x̄)(x_{i+l} - x̄)` for lags
/// `0, dt, ..., max_lag`. The path must be at least ten times longer than
/// the largest lag.
pub fn autocorrelation_estimate(path: &[f64], dt: f64, max_lag: f64) -> Result<Vec<(f64, f64)>> {
    let lags = lag_steps(dt, max_lag)?;
    if path.len() < 2 || path.len() < 10 * lags.max(1) {
        return Err(Error::PathTooShort { len: path.len(), lags });
    }
    let mu = mean(path);
    Ok((0..=lags).map(|l| (l as f64 * dt, autocovariance_at(path, mu, l, path.len()))).collect())
}

/// Autocovariance at `lag` with a batch-means standard error over
/// `batches` contiguous segments.
pub fn autocovariance_with_error(path: &[f64], dt: f64, lag: f64, batches: usize) -> Result<(f64, f64)> {
    let l = lag_steps(dt, lag)?;
    if batches < 2 {
        return Err(Error::param("batches", "need at least two batches"));
    }
    let seg = path.len() / batches;
    if seg < 10 * l.max(1) {
        return Err(Error::PathTooShort { len: path.len(), lags: l });
    }
    let mu = mean(path);
    let estimate = autocovariance_at(path, mu, l, path.len());
    let per_batch: Vec<f64> = path.chunks_exact(seg).map(|c| autocovariance_at(c, mu, l, c.len())).collect();
    Ok((estimate, sample_std(&per_batch) / (per_batch.len() as f64).sqrt()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSettings {
    /// Strictly decreasing correlation times.
    pub taus: Vec<f64>,
    /// Time at which the law of `⟨P_0⟩` is compared.
    pub observation_time: f64,
    pub m: usize,
    pub master_seed: u64,
    #[serde(skip)]
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub tau: f64,
    pub noise_amplitude: f64,
    pub ks: KsResult,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HomogenizationReport {
    pub fingerprint: String,
    pub noise_kind: NoiseKind,
    pub diffusion: f64,
    pub observation_time: f64,
    pub dt: f64,
    pub points: Vec<SweepPoint>,
    pub strictly_decreasing: bool,
    pub smallest_tau_passes: bool,
    pub pass: bool,
}

impl HomogenizationReport {
    pub fn records(&self) -> Vec<CheckRecord> {
        let mut out: Vec<CheckRecord> = self
            .points
            .iter()
            .map(|p| CheckRecord {
                name: format!("ks_{}_tau{}", self.noise_kind.name(), p.tau),
                fingerprint: self.fingerprint.clone(),
                statistic: p.ks.statistic,
                threshold: p.ks.critical_value,
                pass: p.ks.pass,
            })
            .collect();
        out.push(CheckRecord {
            name: format!("ks_{}_strictly_decreasing", self.noise_kind.name()),
            fingerprint: self.fingerprint.clone(),
            statistic: if self.strictly_decreasing { 1.0 } else { 0.0 },
            threshold: 1.0,
            pass: self.strictly_decreasing,
        });
        out
    }
}

/// Compares the law of `⟨P_0⟩(T)` under the colored law at each `τ` with the
/// white-noise Stratonovich reference, holding `𝒟` fixed and rescaling `G`.
///
/// The reference ensemble uses its own seed; the colored ensembles share one
/// seed across the sweep so their differences reflect `τ` rather than
/// sampling noise. All ensembles use `config.dt`, which must respect `τ/10`
/// at the smallest `τ`.
pub fn homogenization_sweep(
    spec_colored: &ModelSpec,
    psi0: &StateVector,
    config: &IntegratorConfig,
    settings: &SweepSettings,
) -> Result<HomogenizationReport> {
    if spec_colored.variant != Variant::ColoredNState {
        return Err(Error::VariantMismatch { expected: Variant::ColoredNState.name().into(), found: spec_colored.variant.name().into() });
    }
    let taus = &settings.taus;
    if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0)) || taus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("taus", "must be positive and strictly decreasing"));
    }
    let t_obs = settings.observation_time;
    if !(t_obs > 0.0) {
        return Err(Error::param("observation_time", "must be positive"));
    }
    check_sbm_step(config.dt, *taus.last().unwrap())?;

    let base = derive_fdr_params(spec_colored)?;
    let diffusion = base.diffusion.expect("derived");
    let kind = base.noise_kind.expect("derived");
    let mut run_config = config.clone();
    run_config.t_max = t_obs;
    run_config.checkpoints = vec![t_obs];

    let reference_spec = base.white_noise_limit()?;
    let reference_seed = mix64(settings.master_seed ^ REFERENCE_SEED_SALT);
    let colored_seed = mix64(settings.master_seed ^ COLORED_SEED_SALT);
    let reference = run_ensemble_with_workers(&reference_spec, psi0, &run_config, settings.m, reference_seed, settings.workers)?;
    let reference_sample = reference.sample(0, 0);

    let mut points = Vec::new();
    for &tau in taus {
        let mut s = base.clone();
        s.tau = Some(tau);
        s.noise_amplitude = None;
        s.diffusion = Some(diffusion);
        let s = derive_fdr_params(&s)?;
        let ensemble = run_ensemble_with_workers(&s, psi0, &run_config, settings.m, colored_seed, settings.workers)?;
        let ks = ks_statistic(ensemble.sample(0, 0), reference_sample)?;
        points.push(SweepPoint { tau, noise_amplitude: s.noise_amplitude.expect("derived"), ks });
    }
    let strictly_decreasing = points.windows(2).all(|w| w[1].ks.statistic < w[0].ks.statistic);
    let smallest_tau_passes = points.last().map(|p| p.ks.pass).unwrap_or(false);

    #[derive(Serialize)]
    struct SweepInputs<'a> {
        spec: &'a ModelSpec,
        psi0: &'a StateVector,
        config: &'a IntegratorConfig,
        settings: &'a SweepSettings,
    }
    Ok(HomogenizationReport {
        fingerprint: fingerprint(&SweepInputs { spec: &base, psi0, config, settings }),
        noise_kind: kind,
        diffusion,
        observation_time: t_obs,
        dt: config.dt,
        points,
        strictly_decreasing,
        smallest_tau_passes,
        pass: strictly_decreasing && smallest_tau_passes,
    })
}
