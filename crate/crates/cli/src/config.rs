//! Run configuration: JSON parsing, mode-dependent defaults, and conversion
//! into the core library's types.
//!
//! Every field is optional in the input. [`parse_config`] fills the defaults
//! for the chosen mode, so the returned [`RunConfig`] serializes to a canonical
//! document that parses back to itself.

use std::fmt;
use std::path::PathBuf;

use collapse_core::hilbert::{normalize, HermitianOperator, ProjectorSet, StateVector};
use collapse_core::master::MasterConfig;
use collapse_core::models::{derive_fdr_params, ModelSpec, Variant};
use collapse_core::noise::NoiseKind;
use collapse_core::sde::{default_dt, IntegratorConfig, DEFAULT_COLLAPSE_EPSILON};
use collapse_core::stats::SweepSettings;
use collapse_core::Error as CoreError;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Trajectory,
    Ensemble,
    Master,
    NoiseValidate,
    Homogenize,
    BornSuite,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Trajectory => "trajectory",
            Mode::Ensemble => "ensemble",
            Mode::Master => "master",
            Mode::NoiseValidate => "noise-validate",
            Mode::Homogenize => "homogenize",
            Mode::BornSuite => "born-suite",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_kind: Option<NoiseKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fdr_enforced: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<MatrixConfig>,
}

/// Exactly one of `populations` (real, nonnegative amplitudes) or
/// `amplitudes` (`[re, im]` pairs).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub populations: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub renormalize_each_step: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collapse_epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_index: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MasterSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_stride: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<NoiseKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_lag: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batches: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taus: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation_time: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi0: Option<InitialStateConfig>,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub master: MasterSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    /// Malformed JSON or a schema violation, located by JSON path.
    Parse { path: String, message: String },
    /// A value that parses but violates a model or integrator invariant.
    Invalid { path: String, source: CoreError },
    /// The config's `mode` disagrees with the subcommand.
    ModeConflict { config: Mode, requested: Mode },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { path, message } => write!(f, "at `{path}`: {message}"),
            ConfigError::Invalid { path, source } => write!(f, "at `{path}`: {source}"),
            ConfigError::ModeConflict { config, requested } => {
                write!(f, "config mode `{}` conflicts with subcommand `{}`", config.name(), requested.name())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(path: &str) -> impl Fn(CoreError) -> ConfigError + '_ {
    move |source| ConfigError::Invalid { path: path.to_string(), source }
}

fn bad(path: &str, name: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { path: path.to_string(), source: CoreError::InvalidParameter { name, reason: reason.into() } }
}

/// Parses a document whose mode comes from its own `mode` key (default
/// `ensemble`).
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_for(text, None)
}

/// Parses and resolves a document for `mode`, which must agree with any
/// `mode` key in the document.
pub fn parse_config_for(text: &str, mode: Option<Mode>) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
        path: match e.path().to_string() {
            p if p == "." => "$".to_string(),
            p => p,
        },
        message: e.inner().to_string(),
    })?;
    let mode = match (raw.mode, mode) {
        (Some(c), Some(r)) if c != r => return Err(ConfigError::ModeConflict { config: c, requested: r }),
        (Some(c), _) => c,
        (None, Some(r)) => r,
        (None, None) => Mode::Ensemble,
    };
    raw.complete(mode)
}

/// Everything a run needs, in the core library's types.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub mode: Mode,
    pub spec: ModelSpec,
    pub psi0: StateVector,
    pub integrator: IntegratorConfig,
    pub trajectory_index: u64,
    pub master: MasterConfig,
    pub noise: NoiseSettings,
    pub sweep: SweepSettings,
    pub m: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSettings {
    pub kind: NoiseKind,
    pub tau: f64,
    pub dt: f64,
    pub length: usize,
    pub max_lag: f64,
    pub bins: usize,
    pub batches: usize,
}

fn matrix(path: &str, m: &MatrixConfig, dim: usize) -> Result<HermitianOperator, ConfigError> {
    let rows_ok = |rows: &Vec<Vec<f64>>| rows.len() == dim && rows.iter().all(|r| r.len() == dim);
    if !rows_ok(&m.re) || !m.im.as_ref().map(rows_ok).unwrap_or(true) {
        return Err(bad(path, "hamiltonian", format!("must be {dim}x{dim}")));
    }
    let mat = DMatrix::from_fn(dim, dim, |i, j| {
        Complex64::new(m.re[i][j], m.im.as_ref().map(|im| im[i][j]).unwrap_or(0.0))
    });
    HermitianOperator::new(mat).map_err(invalid(path))
}

fn initial_state(psi0: &InitialStateConfig) -> Result<StateVector, ConfigError> {
    let path = "psi0";
    match (&psi0.populations, &psi0.amplitudes) {
        (Some(p), None) => StateVector::from_populations(p).map_err(invalid(path)),
        (None, Some(a)) => {
            let v = DVector::from_iterator(a.len(), a.iter().map(|[re, im]| Complex64::new(*re, *im)));
            let psi = StateVector::from_amplitudes(v).map_err(invalid(path))?;
            normalize(&psi).map_err(invalid(path))
        }
        _ => Err(bad(path, "psi0", "give exactly one of populations, amplitudes")),
    }
}

impl RunConfig {
    /// Fills every default for `mode` and validates the result.
    pub fn complete(mut self, mode: Mode) -> Result<RunConfig, ConfigError> {
        self.mode = Some(mode);
        let m = &mut self.model;
        let psi_len = self.psi0.as_ref().and_then(|p| p.populations.as_ref().map(Vec::len).or(p.amplitudes.as_ref().map(Vec::len)));
        let variant = *m.variant.get_or_insert(if mode == Mode::Homogenize { Variant::ColoredNState } else { Variant::TwoStateIto });
        let dim = *m.dim.get_or_insert(if variant.is_two_state() { 2 } else { psi_len.unwrap_or(2) });
        m.blocks.get_or_insert_with(|| (0..dim).map(|i| vec![i]).collect());
        m.coupling.get_or_insert(1.0);
        m.system_size.get_or_insert(1.0);
        m.hbar.get_or_insert(1.0);
        m.fdr_enforced.get_or_insert(true);
        if variant == Variant::ColoredNState {
            m.noise_kind.get_or_insert(NoiseKind::Ou);
            let first_tau = self.sweep.taus.as_ref().and_then(|t| t.first().copied());
            m.tau.get_or_insert(first_tau.unwrap_or(0.01));
        }
        self.psi0.get_or_insert_with(|| InitialStateConfig {
            populations: Some(if dim == 2 { vec![0.8, 0.2] } else { vec![1.0 / dim as f64; dim] }),
            amplitudes: None,
        });

        let mut spec = self.base_spec()?;
        if variant == Variant::ColoredNState && spec.diffusion.is_none() && spec.noise_amplitude.is_none() {
            spec.diffusion = Some(spec.white_limit_diffusion());
        }
        if self.model.fdr_enforced == Some(true) {
            spec = derive_fdr_params(&spec).map_err(invalid("model"))?;
        }
        self.model.diffusion = spec.diffusion;
        self.model.noise_amplitude = spec.noise_amplitude;
        spec.validate().map_err(invalid("model"))?;
        let rate = spec.collapse_rate();
        let per_rate = |x: f64| if rate > 0.0 { x / rate } else { x };

        self.m.get_or_insert(match mode {
            Mode::BornSuite => 5000,
            Mode::Homogenize => 2000,
            _ => 1000,
        });
        self.seed.get_or_insert(0);

        let sweep = &mut self.sweep;
        if mode == Mode::Homogenize {
            sweep.taus.get_or_insert_with(|| [0.1, 0.03, 0.01].iter().map(|&t| per_rate(t)).collect());
            sweep.observation_time.get_or_insert(per_rate(0.5));
        }

        let integ = &mut self.integrator;
        if integ.dt.is_none() {
            let dt = match mode {
                Mode::Homogenize => {
                    let tau_min = sweep.taus.as_ref().and_then(|t| t.last().copied()).unwrap_or(f64::INFINITY);
                    default_dt(&spec).map(|d| d.min(tau_min / 10.0))
                }
                _ => default_dt(&spec).map(|d| spec.tau.map_or(d, |tau| d.min(tau / 10.0))),
            };
            integ.dt = Some(dt.map_err(invalid("integrator.dt"))?);
        }
        integ.t_max.get_or_insert(match mode {
            Mode::Homogenize => sweep.observation_time.unwrap_or(per_rate(0.5)),
            _ => per_rate(30.0),
        });
        integ.renormalize_each_step.get_or_insert(true);
        integ.collapse_epsilon.get_or_insert(DEFAULT_COLLAPSE_EPSILON);
        integ.record_stride.get_or_insert(1);
        integ.checkpoints.get_or_insert_with(|| match mode {
            Mode::Ensemble | Mode::BornSuite => vec![per_rate(0.25), per_rate(0.5), per_rate(1.0)],
            _ => Vec::new(),
        });
        integ.trajectory_index.get_or_insert(0);

        let master = &mut self.master;
        master.dt.get_or_insert(per_rate(1e-3));
        master.t_max.get_or_insert(per_rate(5.0));
        master.record_stride.get_or_insert(10);

        let noise = &mut self.noise;
        let kind = *noise.kind.get_or_insert(NoiseKind::Ou);
        let tau = *noise.tau.get_or_insert(0.1);
        // Clamped Euler-Maruyama for SBM needs a much finer step than the
        // exact OU update to reproduce the correlation law.
        noise.dt.get_or_insert(match kind {
            NoiseKind::Ou => tau / 10.0,
            NoiseKind::Sbm => tau / 1000.0,
        });
        noise.length.get_or_insert(match kind {
            NoiseKind::Ou => 1_000_000,
            NoiseKind::Sbm => 10_000_000,
        });
        noise.max_lag.get_or_insert(5.0 * tau);
        noise.bins.get_or_insert(20);
        noise.batches.get_or_insert(50);

        self.resolve()?;
        Ok(self)
    }

    fn base_spec(&self) -> Result<ModelSpec, ConfigError> {
        let m = &self.model;
        let dim = m.dim.expect("filled");
        let projectors = ProjectorSet::from_blocks(dim, m.blocks.clone().expect("filled")).map_err(invalid("model.blocks"))?;
        let hamiltonian = m.hamiltonian.as_ref().map(|h| matrix("model.hamiltonian", h, dim)).transpose()?;
        Ok(ModelSpec {
            variant: m.variant.expect("filled"),
            hamiltonian,
            projectors,
            coupling: m.coupling.expect("filled"),
            system_size: m.system_size.expect("filled"),
            hbar: m.hbar.expect("filled"),
            diffusion: m.diffusion,
            noise_amplitude: m.noise_amplitude,
            tau: m.tau,
            noise_kind: m.noise_kind,
            fdr_enforced: m.fdr_enforced.expect("filled"),
        })
    }

    /// Converts a completed config into core types, checking every invariant.
    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let mode = self.mode.expect("complete() sets the mode");
        let spec = self.base_spec()?;
        spec.validate().map_err(invalid("model"))?;
        let psi0 = initial_state(self.psi0.as_ref().expect("filled"))?;
        if psi0.dim() != spec.dim() {
            return Err(ConfigError::Invalid {
                path: "psi0".into(),
                source: CoreError::DimensionMismatch { expected: spec.dim(), found: psi0.dim() },
            });
        }

        let i = &self.integrator;
        let integrator = IntegratorConfig {
            dt: i.dt.expect("filled"),
            t_max: i.t_max.expect("filled"),
            renormalize_each_step: i.renormalize_each_step.expect("filled"),
            collapse_epsilon: i.collapse_epsilon.expect("filled"),
            record_stride: i.record_stride.expect("filled"),
            checkpoints: i.checkpoints.clone().expect("filled"),
        };
        integrator.validate().map_err(invalid("integrator"))?;

        let ms = &self.master;
        let master = MasterConfig { dt: ms.dt.expect("filled"), t_max: ms.t_max.expect("filled"), record_stride: ms.record_stride.expect("filled") };
        master.validate().map_err(invalid("master"))?;

        let n = &self.noise;
        let noise = NoiseSettings {
            kind: n.kind.expect("filled"),
            tau: n.tau.expect("filled"),
            dt: n.dt.expect("filled"),
            length: n.length.expect("filled"),
            max_lag: n.max_lag.expect("filled"),
            bins: n.bins.expect("filled"),
            batches: n.batches.expect("filled"),
        };
        if !(noise.tau > 0.0) || !(noise.dt > 0.0) {
            return Err(bad("noise", "noise", "tau and dt must be positive"));
        }
        if noise.bins < 2 || noise.batches < 2 {
            return Err(bad("noise", "noise", "bins and batches must be at least 2"));
        }

        let m = self.m.expect("filled");
        if m == 0 {
            return Err(bad("m", "m", "need at least one trajectory"));
        }
        let seed = self.seed.expect("filled");
        let sweep = SweepSettings {
            taus: self.sweep.taus.clone().unwrap_or_default(),
            observation_time: self.sweep.observation_time.unwrap_or(0.0),
            m,
            master_seed: seed,
            workers: None,
        };
        if mode == Mode::Homogenize && spec.variant != Variant::ColoredNState {
            return Err(ConfigError::Invalid {
                path: "model.variant".into(),
                source: CoreError::VariantMismatch { expected: "colored_n_state".into(), found: spec.variant.name().into() },
            });
        }
        if let (Variant::ColoredNState, Some(tau), Mode::Trajectory | Mode::Ensemble | Mode::BornSuite) = (spec.variant, spec.tau, mode) {
            if integrator.dt > tau / 10.0 {
                return Err(ConfigError::Invalid {
                    path: "integrator.dt".into(),
                    source: CoreError::StepTooLarge { dt: integrator.dt, bound: tau / 10.0 },
                });
            }
        }
        if mode == Mode::NoiseValidate && noise.kind == NoiseKind::Sbm && noise.dt > noise.tau / 10.0 {
            return Err(ConfigError::Invalid {
                path: "noise.dt".into(),
                source: CoreError::StepTooLarge { dt: noise.dt, bound: noise.tau / 10.0 },
            });
        }
        Ok(Resolved {
            mode,
            spec,
            psi0,
            integrator,
            trajectory_index: i.trajectory_index.expect("filled"),
            master,
            noise,
            sweep,
            m,
            seed,
        })
    }

    /// The canonical document: every default explicit.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data always serializes")
    }

    /// Hash of the canonical document without the output location.
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        collapse_core::stats::fingerprint(&c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config(r#"{"mode": "trajectory", "model": {"variant": "two_state_ito"}}"#).unwrap();
        assert_eq!(c.integrator.dt, Some(0.01));
        assert_eq!(c.model.diffusion, Some(0.5));
        assert_eq!(c.model.fdr_enforced, Some(true));
        let r = c.resolve().unwrap();
        assert_eq!(r.spec.variant, Variant::TwoStateIto);
        assert!((r.psi0.amplitudes()[0].re - 0.8f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn every_mode_works_from_an_empty_document() {
        for mode in [Mode::Trajectory, Mode::Ensemble, Mode::Master, Mode::NoiseValidate, Mode::Homogenize, Mode::BornSuite] {
            let c = parse_config_for("{}", Some(mode)).unwrap();
            assert_eq!(c.mode, Some(mode));
        }
    }

    #[test]
    fn canonical_round_trip() {
        for text in [
            r#"{"model": {"variant": "n_state_strat", "dim": 3}, "psi0": {"amplitudes": [[0.6, 0.0], [0.0, 0.6], [0.52915, 0.0]]}}"#,
            r#"{"mode": "homogenize", "model": {"noise_kind": "sbm", "noise_amplitude": 3.0}}"#,
            r#"{"mode": "master", "model": {"hamiltonian": {"re": [[0, 1], [1, 0]]}}}"#,
        ] {
            let c = parse_config(text).unwrap();
            let again = parse_config(&c.to_canonical_json()).unwrap();
            assert_eq!(c, again);
            assert_eq!(c.fingerprint(), again.fingerprint());
        }
    }

    #[test]
    fn conflicting_colored_parameters_name_both_keys() {
        let text = r#"{"model": {"variant": "colored_n_state", "tau": 0.01, "diffusion": 1.0, "noise_amplitude": 3.0}}"#;
        match parse_config(text) {
            Err(ConfigError::Invalid { source: CoreError::FdrConflict(msg), .. }) => {
                assert!(msg.contains("diffusion") && msg.contains("noise_amplitude"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_violations_carry_a_path() {
        match parse_config(r#"{"model": {"coupling": "strong"}}"#) {
            Err(ConfigError::Parse { path, .. }) => assert_eq!(path, "model.coupling"),
            other => panic!("{other:?}"),
        }
        match parse_config(r#"{"integrator": {"step": 0.1}}"#) {
            Err(ConfigError::Parse { path, message }) => {
                assert_eq!(path, "integrator.step");
                assert!(message.contains("step"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invariants_are_checked_before_running() {
        assert!(matches!(parse_config(r#"{"integrator": {"dt": -1}}"#), Err(ConfigError::Invalid { .. })));
        assert!(matches!(parse_config(r#"{"model": {"coupling": 0}}"#), Err(ConfigError::Invalid { .. })));
        assert!(parse_config(r#"{"model": {"coupling": 0}, "integrator": {"dt": 0.01}}"#).is_ok());
        assert!(matches!(parse_config(r#"{"psi0": {"populations": [0.5, 0.25, 0.25]}}"#), Err(ConfigError::Invalid { .. })));
        assert!(matches!(
            parse_config_for(r#"{"mode": "master"}"#, Some(Mode::Ensemble)),
            Err(ConfigError::ModeConflict { .. })
        ));
    }

    #[test]
    fn schema_lists_every_top_level_key() {
        let schema: serde_json::Value = serde_json::from_str(include_str!("../../../docs/config.schema.json")).unwrap();
        let props = schema["properties"].as_object().unwrap();
        let canonical: serde_json::Value = serde_json::from_str(&parse_config("{}").unwrap().to_canonical_json()).unwrap();
        for (key, value) in canonical.as_object().unwrap() {
            assert!(props.contains_key(key), "schema lacks {key}");
            if let (Some(section), Some(fields)) = (props[key]["properties"].as_object(), value.as_object()) {
                for field in fields.keys() {
                    assert!(section.contains_key(field), "schema lacks {key}.{field}");
                }
            }
        }
    }
}
