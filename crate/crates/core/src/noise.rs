//! Seeded random streams, Wiener increments, and the two colored-noise
//! processes: Ornstein–Uhlenbeck (OU) and the cosine-latitude of Brownian
//! motion on the unit sphere (SBM).
//!
//! Streams are counter-based ChaCha8 generators keyed by a master seed and a
//! 64-bit stream index, so a given `(trajectory, channel)` pair always sees
//! the same numbers regardless of thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// SplitMix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Stream index for one noise channel of one trajectory:
/// `mix64(mix64(trajectory) ^ (channel * φ64))`, with φ64 the 64-bit golden
/// ratio constant.
pub fn stream_index(trajectory_index: u64, channel_index: u64) -> u64 {
    mix64(mix64(trajectory_index) ^ channel_index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// A reproducible source of random samples.
#[derive(Clone, Debug)]
pub struct RandomStream {
    master_seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_index);
        Self { master_seed, stream_index, rng }
    }

    pub fn for_channel(master_seed: u64, trajectory_index: u64, channel_index: u64) -> Self {
        Self::new(master_seed, stream_index(trajectory_index, channel_index))
    }

    /// One stream per channel for the given trajectory.
    pub fn channels(master_seed: u64, trajectory_index: u64, count: usize) -> Vec<Self> {
        (0..count as u64)
            .map(|k| Self::for_channel(master_seed, trajectory_index, k))
            .collect()
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform draw on `[-1, 1]`.
    pub fn symmetric_uniform(&mut self) -> f64 {
        self.rng.random_range(-1.0..=1.0)
    }
}

/// A Gaussian increment with mean 0 and variance `dt`.
pub fn wiener_increment(dt: f64, stream: &mut RandomStream) -> Result<f64> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    Ok(dt.sqrt() * stream.standard_normal())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// `dξ = -ξ dt/τ + √(2/τ) dW`, stationary law N(0, 1).
    Ou,
    /// `dξ = -ξ dt/τ + √((1-ξ²)/τ) dW` (Itô), stationary law uniform on [-1, 1].
    Sbm,
}

impl NoiseKind {
    /// `E∞[ξ²]` under the stationary law.
    pub fn stationary_second_moment(self) -> f64 {
        match self {
            NoiseKind::Ou => 1.0,
            NoiseKind::Sbm => 1.0 / 3.0,
        }
    }

    /// Stationary autocovariance at lag `lag`.
    pub fn autocovariance(self, lag: f64, tau: f64) -> f64 {
        self.stationary_second_moment() * (-lag.abs() / tau).exp()
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Ou => "ou",
            NoiseKind::Sbm => "sbm",
        }
    }
}

/// Per-channel colored-noise values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColoredNoiseState {
    kind: NoiseKind,
    tau: f64,
    xi: Vec<f64>,
}

impl ColoredNoiseState {
    pub fn new(kind: NoiseKind, tau: f64, xi: Vec<f64>) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::param("tau", format!("must be positive, got {tau}")));
        }
        if xi.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("xi", "non-finite noise value"));
        }
        if kind == NoiseKind::Sbm && xi.iter().any(|x| x.abs() > 1.0) {
            return Err(Error::param("xi", "SBM values must lie in [-1, 1]"));
        }
        Ok(Self { kind, tau, xi })
    }

    /// Draws every channel from the stationary law.
    pub fn stationary(kind: NoiseKind, tau: f64, streams: &mut [RandomStream]) -> Result<Self> {
        let xi = streams.iter_mut().map(|s| stationary_sample(kind, s)).collect();
        Self::new(kind, tau, xi)
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn channels(&self) -> usize {
        self.xi.len()
    }

    /// Advances every channel with the kind's own update rule.
    pub fn step(&self, dt: f64, streams: &mut [RandomStream]) -> Result<Self> {
        match self.kind {
            NoiseKind::Ou => ou_step(self, dt, streams),
            NoiseKind::Sbm => sbm_step(self, dt, streams),
        }
    }

    fn check_streams(&self, streams: &[RandomStream]) -> Result<()> {
        if streams.len() != self.xi.len() {
            return Err(Error::ChannelMismatch { expected: self.xi.len(), found: streams.len() });
        }
        Ok(())
    }
}

/// Exact OU transition over `dt` driven by a standard normal `eta`.
pub fn ou_update(xi: f64, dt: f64, tau: f64, eta: f64) -> f64 {
    let decay = (-dt / tau).exp();
    let spread = (-(-2.0 * dt / tau).exp_m1()).sqrt();
    xi * decay + spread * eta
}

/// One Euler–Maruyama SBM step with Wiener increment `dw`, clamped to `[-1, 1]`.
pub fn sbm_update(xi: f64, dt: f64, tau: f64, dw: f64) -> f64 {
    let diffusion = ((1.0 - xi * xi).max(0.0) / tau).sqrt();
    (xi - xi * dt / tau + diffusion * dw).clamp(-1.0, 1.0)
}

pub fn ou_step(state: &ColoredNoiseState, dt: f64, streams: &mut [RandomStream]) -> Result<ColoredNoiseState> {
    if state.kind != NoiseKind::Ou {
        return Err(Error::VariantMismatch { expected: "ou".into(), found: state.kind.name().into() });
    }
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    state.check_streams(streams)?;
    let xi = state
        .xi
        .iter()
        .zip(streams.iter_mut())
        .map(|(&x, s)| ou_update(x, dt, state.tau, s.standard_normal()))
        .collect();
    Ok(ColoredNoiseState { kind: state.kind, tau: state.tau, xi })
}

pub fn sbm_step(state: &ColoredNoiseState, dt: f64, streams: &mut [RandomStream]) -> Result<ColoredNoiseState> {
    if state.kind != NoiseKind::Sbm {
        return Err(Error::VariantMismatch { expected: "sbm".into(), found: state.kind.name().into() });
    }
    check_sbm_step(dt, state.tau)?;
    state.check_streams(streams)?;
    let sqrt_dt = dt.sqrt();
    let xi = state
        .xi
        .iter()
        .zip(streams.iter_mut())
        .map(|(&x, s)| sbm_update(x, dt, state.tau, sqrt_dt * s.standard_normal()))
        .collect();
    Ok(ColoredNoiseState { kind: state.kind, tau: state.tau, xi })
}

/// SBM Euler–Maruyama is only used with `dt ≤ τ/10`.
pub fn check_sbm_step(dt: f64, tau: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    let bound = tau / 10.0;
    if dt > bound * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt, bound });
    }
    Ok(())
}

/// A draw from the stationary law: N(0, 1) for OU, U[-1, 1] for SBM.
pub fn stationary_sample(kind: NoiseKind, stream: &mut RandomStream) -> f64 {
    match kind {
        NoiseKind::Ou => stream.standard_normal(),
        NoiseKind::Sbm => stream.symmetric_uniform(),
    }
}

/// A single-channel path of `len` values sampled every `dt`, started from the
/// stationary law.
pub fn noise_path(kind: NoiseKind, tau: f64, dt: f64, len: usize, stream: &mut RandomStream) -> Result<Vec<f64>> {
    let mut state = ColoredNoiseState::stationary(kind, tau, std::slice::from_mut(stream))?;
    if kind == NoiseKind::Sbm {
        check_sbm_step(dt, tau)?;
    }
    let mut path = Vec::with_capacity(len);
    for _ in 0..len {
        path.push(state.xi[0]);
        state = state.step(dt, std::slice::from_mut(stream))?;
    }
    Ok(path)
}

/// `P_0(x) .. P_{n_max}(x)` by Bonnet's recurrence
/// `(n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}`.
pub fn legendre_values(x: f64, n_max: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(n_max + 1);
    p.push(1.0);
    if n_max >= 1 {
        p.push(x);
    }
    for n in 1..n_max {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0) * x * p[n] - nf * p[n - 1]) / (nf + 1.0);
        p.push(next);
    }
    p
}

/// Weighting of the Legendre modes in the SBM transition series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesWeight {
    /// `½ Σ (2n+1) P_n(ξ) P_n(ξ₀) e^{-n(n+1)t/2τ}`: the eigenfunction
    /// expansion of the SBM generator, orthonormal under the uniform law.
    Standard,
    /// The same series with an extra `(n!)²` on every mode. Kept only so the
    /// two can be compared; it is not a probability density for `n_max ≥ 2`.
    FactorialSquared,
}

fn mode_weight(n: usize, weight: SeriesWeight) -> f64 {
    match weight {
        SeriesWeight::Standard => 1.0,
        SeriesWeight::FactorialSquared => {
            let f: f64 = (1..=n).map(|k| k as f64).product();
            f * f
        }
    }
}

fn mode_decay(n: usize, dt: f64, tau: f64) -> f64 {
    let nf = n as f64;
    (-nf * (nf + 1.0) * dt.abs() / (2.0 * tau)).exp()
}

/// Truncated Legendre series for the SBM transition density
/// `T(ξ, t₀+dt | ξ₀, t₀)`. Zero outside `[-1, 1]`.
pub fn sbm_transition_density(xi: f64, xi0: f64, dt: f64, tau: f64, n_max: usize) -> f64 {
    sbm_transition_density_with(xi, xi0, dt, tau, n_max, SeriesWeight::Standard)
}

pub fn sbm_transition_density_with(
    xi: f64,
    xi0: f64,
    dt: f64,
    tau: f64,
    n_max: usize,
    weight: SeriesWeight,
) -> f64 {
    if xi.abs() > 1.0 {
        return 0.0;
    }
    let p = legendre_values(xi, n_max);
    let p0 = legendre_values(xi0, n_max);
    let sum: f64 = (0..=n_max)
        .map(|n| (2 * n + 1) as f64 * mode_weight(n, weight) * p[n] * p0[n] * mode_decay(n, dt, tau))
        .sum();
    0.5 * sum
}

/// Probability mass of the truncated series on `[lo, hi] ⊂ [-1, 1]`, using
/// `(2n+1)∫P_n = P_{n+1} - P_{n-1}` term by term.
pub fn sbm_transition_probability(
    lo: f64,
    hi: f64,
    xi0: f64,
    dt: f64,
    tau: f64,
    n_max: usize,
    weight: SeriesWeight,
) -> f64 {
    let lo = lo.clamp(-1.0, 1.0);
    let hi = hi.clamp(-1.0, 1.0);
    let pl = legendre_values(lo, n_max + 1);
    let ph = legendre_values(hi, n_max + 1);
    let p0 = legendre_values(xi0, n_max);
    let mut sum = hi - lo;
    for n in 1..=n_max {
        let integral = (ph[n + 1] - ph[n - 1]) - (pl[n + 1] - pl[n - 1]);
        sum += mode_weight(n, weight) * p0[n] * mode_decay(n, dt, tau) * integral;
    }
    0.5 * sum
}
