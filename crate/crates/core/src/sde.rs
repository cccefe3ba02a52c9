//! Time stepping and the single-trajectory driver.
//!
//! The step functions return the raw (unnormalized) state; the driver
//! renormalizes when [`IntegratorConfig::renormalize_each_step`] is set.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::hilbert::{normalize, StateVector};
use crate::models::{colored_rhs, white_terms, Calculus, ModelSpec, Variant};
use crate::noise::{check_sbm_step, wiener_increment, ColoredNoiseState, RandomStream};

pub const DEFAULT_COLLAPSE_EPSILON: f64 = 1e-6;

/// Steps per collapse time `ħ/(𝒥𝒩)` in the default step size.
const STEPS_PER_COLLAPSE_TIME: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_max: f64,
    pub renormalize_each_step: bool,
    pub collapse_epsilon: f64,
    pub record_stride: usize,
    /// Times at which the full state is kept for ensemble statistics. Each is
    /// taken at the nearest step.
    pub checkpoints: Vec<f64>,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_max: f64) -> Self {
        Self {
            dt,
            t_max,
            renormalize_each_step: true,
            collapse_epsilon: DEFAULT_COLLAPSE_EPSILON,
            record_stride: 1,
            checkpoints: Vec::new(),
        }
    }

    /// Uses [`default_dt`] for the given model.
    pub fn for_spec(spec: &ModelSpec, t_max: f64) -> Result<Self> {
        Ok(Self::new(default_dt(spec)?, t_max))
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<f64>) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    pub fn with_record_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_renormalization(mut self, on: bool) -> Self {
        self.renormalize_each_step = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::param("t_max", format!("must be positive, got {}", self.t_max)));
        }
        if !(self.collapse_epsilon > 0.0 && self.collapse_epsilon < 0.5) {
            return Err(Error::param("collapse_epsilon", format!("must lie in (0, 0.5), got {}", self.collapse_epsilon)));
        }
        if self.record_stride == 0 {
            return Err(Error::param("record_stride", "must be at least 1"));
        }
        if let Some(t) = self.checkpoints.iter().find(|t| !(**t >= 0.0 && **t <= self.t_max)) {
            return Err(Error::param("checkpoints", format!("{t} lies outside [0, t_max]")));
        }
        Ok(())
    }

    pub fn step_count(&self) -> usize {
        (self.t_max / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    fn checkpoint_steps(&self) -> Vec<usize> {
        self.checkpoints.iter().map(|t| (t / self.dt).round() as usize).collect()
    }
}

/// `0.01·ħ/(𝒥𝒩)`, capped at `τ/10` for the colored law.
pub fn default_dt(spec: &ModelSpec) -> Result<f64> {
    let rate = spec.collapse_rate();
    if !(rate > 0.0) {
        return Err(Error::param("dt", "no collapse timescale when 𝒥 = 0; give dt explicitly"));
    }
    let dt = 1.0 / (STEPS_PER_COLLAPSE_TIME * rate);
    Ok(match (spec.variant, spec.tau) {
        (Variant::ColoredNState, Some(tau)) => dt.min(tau / 10.0),
        _ => dt,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Collapsed(usize),
    Unresolved,
}

impl Outcome {
    pub fn collapsed(self) -> Option<usize> {
        match self {
            Outcome::Collapsed(k) => Some(k),
            Outcome::Unresolved => None,
        }
    }
}

impl Serialize for Outcome {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Outcome::Collapsed(k) => s.serialize_u64(*k as u64),
            Outcome::Unresolved => s.serialize_str("unresolved"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub trajectory_index: u64,
    pub master_seed: u64,
    pub stream_indices: Vec<u64>,
    pub times: Vec<f64>,
    pub populations: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
    pub final_outcome: Outcome,
    pub collapse_time: Option<f64>,
    pub steps_taken: usize,
    #[serde(skip)]
    pub checkpoint_states: Vec<StateVector>,
    #[serde(skip)]
    pub final_state: StateVector,
}

impl TrajectoryRecord {
    /// Populations at each configured checkpoint.
    pub fn checkpoint_populations(&self, spec: &ModelSpec) -> Vec<Vec<f64>> {
        self.checkpoint_states.iter().map(|s| spec.projectors.populations(s.amplitudes())).collect()
    }
}

fn require_calculus(spec: &ModelSpec, calculus: Calculus) -> Result<()> {
    if spec.variant.calculus() == Some(calculus) {
        Ok(())
    } else {
        let expected = match calculus {
            Calculus::Ito => "an Itô variant",
            Calculus::Stratonovich => "a Stratonovich variant",
        };
        Err(Error::VariantMismatch { expected: expected.into(), found: spec.variant.name().into() })
    }
}

fn check_inputs(spec: &ModelSpec, psi: &StateVector, increments: &[f64]) -> Result<()> {
    if psi.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), found: psi.dim() });
    }
    if increments.len() != spec.channel_count() {
        return Err(Error::IncrementCount { expected: spec.channel_count(), found: increments.len() });
    }
    Ok(())
}

fn euler_update(
    spec: &ModelSpec,
    psi: &DVector<Complex64>,
    at: &DVector<Complex64>,
    dt: f64,
    increments: &[f64],
) -> Result<DVector<Complex64>> {
    let terms = white_terms(spec, at)?;
    let mut next = psi + terms.drift * Complex64::from(dt);
    for (b, dw) in terms.diffusion.iter().zip(increments) {
        next += b * Complex64::from(*dw);
    }
    Ok(next)
}

/// Euler–Maruyama step of an Itô law.
pub fn em_step(spec: &ModelSpec, psi: &StateVector, dt: f64, increments: &[f64]) -> Result<StateVector> {
    require_calculus(spec, Calculus::Ito)?;
    check_inputs(spec, psi, increments)?;
    let a = psi.amplitudes();
    Ok(StateVector::from_raw(euler_update(spec, a, a, dt, increments)?))
}

/// Heun predictor with midpoint corrector for a Stratonovich law: both the
/// drift and the diffusion of the corrector are evaluated at `(ψ + ψ̃)/2`.
pub fn heun_step(spec: &ModelSpec, psi: &StateVector, dt: f64, increments: &[f64]) -> Result<StateVector> {
    require_calculus(spec, Calculus::Stratonovich)?;
    check_inputs(spec, psi, increments)?;
    let a = psi.amplitudes();
    let predicted = euler_update(spec, a, a, dt, increments)?;
    let midpoint = (a + predicted) * Complex64::from(0.5);
    Ok(StateVector::from_raw(euler_update(spec, a, &midpoint, dt, increments)?))
}

/// Advances `ξ` first, then takes one RK4 step of the colored law with `ξ`
/// interpolated linearly over the step: stage 1 sees the old value, stages 2
/// and 3 the average, stage 4 the new value.
pub fn colored_step(
    spec: &ModelSpec,
    psi: &StateVector,
    xi: &ColoredNoiseState,
    dt: f64,
    streams: &mut [RandomStream],
) -> Result<(StateVector, ColoredNoiseState)> {
    if spec.variant != Variant::ColoredNState {
        return Err(Error::VariantMismatch { expected: Variant::ColoredNState.name().into(), found: spec.variant.name().into() });
    }
    if psi.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), found: psi.dim() });
    }
    check_sbm_step(dt, xi.tau())?;
    let next_xi = xi.step(dt, streams)?;
    let mid_xi: Vec<f64> = xi.xi().iter().zip(next_xi.xi()).map(|(a, b)| 0.5 * (a + b)).collect();
    let y = psi.amplitudes();
    let h = Complex64::from(dt);
    let half = Complex64::from(dt / 2.0);
    let k1 = colored_rhs(spec, y, xi.xi())?;
    let k2 = colored_rhs(spec, &(y + &k1 * half), &mid_xi)?;
    let k3 = colored_rhs(spec, &(y + &k2 * half), &mid_xi)?;
    let k4 = colored_rhs(spec, &(y + &k3 * h), next_xi.xi())?;
    let next = y + (k1 + k2 * Complex64::from(2.0) + k3 * Complex64::from(2.0) + k4) * Complex64::from(dt / 6.0);
    Ok((StateVector::from_raw(next), next_xi))
}

/// Argmax with ties going to the lowest index.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    best
}

enum Driver {
    White(Vec<RandomStream>),
    Colored { streams: Vec<RandomStream>, xi: ColoredNoiseState },
}

/// Integrates one realization until collapse or `t_max`.
///
/// Wiener and colored-noise channel `k` of trajectory `i` draw from
/// `RandomStream::for_channel(master_seed, i, k)`, so the record depends only
/// on its inputs and not on what else runs concurrently. Checkpoints after
/// the collapse time hold the final state.
pub fn run_trajectory(
    spec: &ModelSpec,
    psi0: &StateVector,
    config: &IntegratorConfig,
    trajectory_index: u64,
    master_seed: u64,
) -> Result<TrajectoryRecord> {
    spec.validate()?;
    config.validate()?;
    if psi0.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), found: psi0.dim() });
    }
    if !psi0.is_normalized() {
        return Err(Error::NotNormalized { norm_sqr: psi0.norm_sqr() });
    }

    let channels = spec.channel_count();
    let mut streams = RandomStream::channels(master_seed, trajectory_index, channels);
    let stream_indices = streams.iter().map(RandomStream::stream_index).collect();
    let mut driver = if spec.variant == Variant::ColoredNState {
        let tau = spec.tau.expect("validated");
        check_sbm_step(config.dt, tau)?;
        let xi = ColoredNoiseState::stationary(spec.noise_kind.expect("validated"), tau, &mut streams)?;
        Driver::Colored { streams, xi }
    } else {
        Driver::White(streams)
    };

    let dt = config.dt;
    let n_steps = config.step_count();
    let checkpoint_steps = config.checkpoint_steps();
    let mut checkpoint_states: Vec<Option<StateVector>> = vec![None; checkpoint_steps.len()];
    let mut record = TrajectoryRecord {
        trajectory_index,
        master_seed,
        stream_indices,
        times: Vec::new(),
        populations: Vec::new(),
        norms: Vec::new(),
        final_outcome: Outcome::Unresolved,
        collapse_time: None,
        steps_taken: 0,
        checkpoint_states: Vec::new(),
        final_state: psi0.clone(),
    };

    let mut psi = psi0.clone();
    let mut step = 0usize;
    let mut increments = vec![0.0; channels];
    loop {
        let pops = spec.projectors.populations(psi.amplitudes());
        let leader = argmax(&pops);
        let collapsed = pops[leader] >= 1.0 - config.collapse_epsilon;
        let last = collapsed || step == n_steps;
        if step % config.record_stride == 0 || last {
            record.times.push(step as f64 * dt);
            record.populations.push(pops.clone());
            record.norms.push(psi.norm());
        }
        for (slot, &at) in checkpoint_states.iter_mut().zip(&checkpoint_steps) {
            if at == step {
                *slot = Some(normalized_copy(&psi));
            }
        }
        if last {
            if collapsed {
                record.final_outcome = Outcome::Collapsed(leader);
                record.collapse_time = Some(step as f64 * dt);
            }
            break;
        }

        let next = match &mut driver {
            Driver::White(streams) => {
                for (dw, stream) in increments.iter_mut().zip(streams.iter_mut()) {
                    *dw = wiener_increment(dt, stream)?;
                }
                match spec.variant.calculus() {
                    Some(Calculus::Ito) => em_step(spec, &psi, dt, &increments)?,
                    _ => heun_step(spec, &psi, dt, &increments)?,
                }
            }
            Driver::Colored { streams, xi } => {
                let (next, next_xi) = colored_step(spec, &psi, xi, dt, streams)?;
                *xi = next_xi;
                next
            }
        };
        step += 1;
        let normalized = match normalize(&next) {
            Ok(n) if next.is_finite() => n,
            _ => return Err(Error::NonFinite { step, trajectory_index, master_seed }),
        };
        psi = if config.renormalize_each_step { normalized } else { next };
    }

    record.steps_taken = step;
    let final_copy = normalized_copy(&psi);
    record.checkpoint_states = checkpoint_states.into_iter().map(|s| s.unwrap_or_else(|| final_copy.clone())).collect();
    record.final_state = psi;
    Ok(record)
}

/// The state is known to be finite and nonzero here.
fn normalized_copy(psi: &StateVector) -> StateVector {
    normalize(psi).expect("finite nonzero state")
}
