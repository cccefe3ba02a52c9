//! Executes a resolved run and writes its output files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use collapse_core::hilbert::pure_projector;
use collapse_core::master::integrate_master;
use collapse_core::noise::{noise_path, NoiseKind, RandomStream};
use collapse_core::sde::run_trajectory;
use collapse_core::stats::{
    autocorrelation_estimate, autocovariance_with_error, born_check, chi_square_test, histogram, homogenization_sweep,
    martingale_check, run_ensemble_with_workers, CheckRecord, SIGMA_BAND,
};
use collapse_core::Error as CoreError;
use serde::Serialize;
use serde_json::json;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::{ConfigError, Mode, NoiseSettings, Resolved, RunConfig};

pub const TOOL: &str = concat!("collapse ", env!("CARGO_PKG_VERSION"));

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_UNRESOLVED: i32 = 5;
pub const EXIT_CHECKS_FAILED: i32 = 6;
pub const EXIT_IO: i32 = 7;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Core(CoreError),
    Io { path: PathBuf, message: String },
    Usage(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(ConfigError::Invalid { source, .. }) => core_exit_code(source),
            RunError::Config(_) | RunError::Usage(_) => EXIT_USAGE,
            RunError::Core(e) => core_exit_code(e),
            RunError::Io { .. } => EXIT_IO,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            EXIT_USAGE => "usage",
            EXIT_INVALID => "invalid_parameters",
            EXIT_NUMERICAL => "numerical_failure",
            EXIT_UNRESOLVED => "unresolved_trajectories",
            _ => "io",
        }
    }

    /// The JSON object written to stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let (message, path) = match self {
            RunError::Config(ConfigError::Parse { path, message }) => (message.clone(), Some(path.clone())),
            RunError::Config(ConfigError::Invalid { path, source }) => (source.to_string(), Some(path.clone())),
            RunError::Config(e @ ConfigError::ModeConflict { .. }) => (e.to_string(), Some("mode".to_string())),
            RunError::Core(e) => (e.to_string(), None),
            RunError::Io { path, message } => (message.clone(), Some(path.display().to_string())),
            RunError::Usage(m) => (m.clone(), None),
        };
        json!({ "error": self.kind(), "exit_code": self.exit_code(), "message": message, "path": path })
    }
}

fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::NonFinite { .. } | CoreError::MasterInvariant { .. } | CoreError::ImaginaryResidue { .. } => EXIT_NUMERICAL,
        CoreError::TooManyUnresolved { .. } => EXIT_UNRESOLVED,
        CoreError::Trajectory { source, .. } => core_exit_code(source),
        _ => EXIT_INVALID,
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        RunError::Core(e)
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    pub mode: Mode,
    pub fingerprint: String,
    pub files: Vec<PathBuf>,
    /// `None` for modes without pass/fail checks.
    pub pass: Option<bool>,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        if self.pass == Some(false) {
            EXIT_CHECKS_FAILED
        } else {
            EXIT_OK
        }
    }
}

struct Writer {
    dir: PathBuf,
    stem: String,
    fingerprint: String,
    files: Vec<PathBuf>,
}

impl Writer {
    fn write(&mut self, suffix: &str, ext: &str, body: &str) -> Result<(), RunError> {
        fs::create_dir_all(&self.dir).map_err(|e| io_error(&self.dir, e))?;
        let path = self.dir.join(format!("{}{suffix}.{ext}", self.stem));
        fs::write(&path, body).map_err(|e| io_error(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    fn csv(&mut self, suffix: &str, header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), RunError> {
        let mut body = format!("# {TOOL} fingerprint={}\n{}\n", self.fingerprint, header.join(","));
        for row in rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            writeln!(body, "{}", cells.join(",")).expect("writing to a String");
        }
        self.write(suffix, "csv", &body)
    }

    fn json(&mut self, suffix: &str, config: &RunConfig, mut value: serde_json::Value) -> Result<(), RunError> {
        let obj = value.as_object_mut().expect("reports are objects");
        obj.insert("tool".into(), json!(TOOL));
        obj.insert("fingerprint".into(), json!(self.fingerprint));
        obj.insert("config".into(), serde_json::to_value(config).expect("plain data"));
        let body = serde_json::to_string_pretty(&value).expect("plain data") + "\n";
        self.write(suffix, "json", &body)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> RunError {
    RunError::Io { path: path.to_path_buf(), message: e.to_string() }
}

fn all_pass(records: &[CheckRecord]) -> bool {
    records.iter().all(|r| r.pass)
}

/// Runs `config` (already completed by the parser) and writes its outputs
/// under `out_dir`. `workers = Some(1)` forces serial execution.
pub fn execute(config: &RunConfig, workers: Option<usize>, out_dir: &Path) -> Result<RunOutput, RunError> {
    if workers == Some(0) {
        return Err(RunError::Usage("--workers must be at least 1".into()));
    }
    let r = config.resolve()?;
    let mut echo = config.clone();
    echo.output_dir = None;
    let fingerprint = config.fingerprint();
    let mut w = Writer { dir: out_dir.to_path_buf(), stem: format!("{}_{fingerprint}", r.mode.name()), fingerprint: fingerprint.clone(), files: Vec::new() };
    let pass = match r.mode {
        Mode::Trajectory => trajectory(&r, &echo, &mut w)?,
        Mode::Ensemble => ensemble(&r, &echo, workers, &mut w)?,
        Mode::Master => master(&r, &mut w)?,
        Mode::NoiseValidate => noise_validate(&r, &echo, &mut w)?,
        Mode::Homogenize => homogenize(&r, &echo, workers, &mut w)?,
        Mode::BornSuite => born_suite(&r, &echo, workers, &mut w)?,
    };
    Ok(RunOutput { mode: r.mode, fingerprint, files: w.files, pass })
}

fn trajectory(r: &Resolved, echo: &RunConfig, w: &mut Writer) -> Result<Option<bool>, RunError> {
    let rec = run_trajectory(&r.spec, &r.psi0, &r.integrator, r.trajectory_index, r.seed)?;
    let k = r.spec.projectors.len();
    let mut header = vec!["t".to_string()];
    header.extend((0..k).map(|i| format!("pop_{i}")));
    header.push("norm".into());
    let rows = (0..rec.times.len()).map(|i| {
        let mut row = vec![rec.times[i]];
        row.extend(&rec.populations[i]);
        row.push(rec.norms[i]);
        row
    });
    w.csv("", &header, rows)?;
    w.json(
        "",
        echo,
        json!({
            "trajectory_index": rec.trajectory_index,
            "master_seed": rec.master_seed,
            "stream_indices": rec.stream_indices,
            "final_outcome": rec.final_outcome,
            "collapse_time": rec.collapse_time,
            "steps_taken": rec.steps_taken,
            "checkpoint_times": r.integrator.checkpoints,
            "checkpoint_populations": rec.checkpoint_populations(&r.spec),
        }),
    )?;
    Ok(None)
}

fn ensemble(r: &Resolved, echo: &RunConfig, workers: Option<usize>, w: &mut Writer) -> Result<Option<bool>, RunError> {
    let s = run_ensemble_with_workers(&r.spec, &r.psi0, &r.integrator, r.m, r.seed, workers)?;
    let k = r.spec.projectors.len();
    let mut header = vec!["t".to_string()];
    header.extend((0..k).map(|i| format!("mean_pop_{i}")));
    header.extend((0..k).map(|i| format!("std_pop_{i}")));
    let rows = s.checkpoint_times.iter().enumerate().map(|(c, &t)| {
        let mut row = vec![t];
        row.extend(&s.checkpoint_means[c]);
        row.extend(&s.checkpoint_std[c]);
        row
    });
    w.csv("", &header, rows)?;
    w.json("", echo, json!({ "summary": s }))?;
    Ok(None)
}

fn master(r: &Resolved, w: &mut Writer) -> Result<Option<bool>, RunError> {
    let sol = integrate_master(&r.spec, &pure_projector(&r.psi0), &r.master)?;
    let d = r.spec.dim();
    let mut header = vec!["t".to_string()];
    for j in 0..d {
        for k in 0..d {
            header.push(format!("re_rho_{j}_{k}"));
            header.push(format!("im_rho_{j}_{k}"));
        }
    }
    header.push("purity".into());
    let rows = sol.times.iter().zip(&sol.states).map(|(&t, rho)| {
        let mut row = vec![t];
        // Row-major, unlike nalgebra's storage order.
        for j in 0..d {
            for k in 0..d {
                let z = rho.matrix()[(j, k)];
                row.push(z.re);
                row.push(z.im);
            }
        }
        row.push(rho.purity());
        row
    });
    w.csv("", &header, rows)?;
    Ok(None)
}

/// Bin probabilities under the stationary law, with the outer bins
/// absorbing the tails.
fn stationary_bin_probabilities(kind: NoiseKind, lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let width = (hi - lo) / bins as f64;
    match kind {
        NoiseKind::Sbm => vec![1.0 / bins as f64; bins],
        NoiseKind::Ou => {
            let n = Normal::standard();
            (0..bins)
                .map(|b| {
                    let a = if b == 0 { 0.0 } else { n.cdf(lo + b as f64 * width) };
                    let z = if b == bins - 1 { 1.0 } else { n.cdf(lo + (b + 1) as f64 * width) };
                    z - a
                })
                .collect()
        }
    }
}

fn stationary_density(kind: NoiseKind, x: f64) -> f64 {
    match kind {
        NoiseKind::Ou => (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
        NoiseKind::Sbm => 0.5,
    }
}

fn band_record(name: &str, fingerprint: &str, estimate: f64, se: f64, expected: f64) -> CheckRecord {
    let statistic = (estimate - expected).abs();
    let threshold = SIGMA_BAND * se;
    CheckRecord { name: name.into(), fingerprint: fingerprint.into(), statistic, threshold, pass: statistic <= threshold }
}

fn noise_validate(r: &Resolved, echo: &RunConfig, w: &mut Writer) -> Result<Option<bool>, RunError> {
    let NoiseSettings { kind, tau, dt, length, max_lag, bins, batches } = r.noise.clone();
    let mut stream = RandomStream::new(r.seed, 0);
    let path = noise_path(kind, tau, dt, length, &mut stream)?;
    let m2 = kind.stationary_second_moment();
    let fp = w.fingerprint.clone();

    // Subsample so the lag grid has about fifty points; the autocovariance
    // of the subsampled path at those lags is unchanged.
    let stride = ((max_lag / dt / 50.0).round() as usize).max(1);
    let coarse: Vec<f64> = path.iter().step_by(stride).copied().collect();
    let acf = autocorrelation_estimate(&coarse, dt * stride as f64, max_lag)?;
    w.csv(
        "_autocorr",
        &["lag".into(), "empirical_autocorr".into(), "analytic_autocorr".into()],
        acf.iter().map(|&(lag, c)| vec![lag, c, kind.autocovariance(lag, tau)]),
    )?;

    let (lo, hi) = match kind {
        NoiseKind::Ou => (-4.0, 4.0),
        NoiseKind::Sbm => (-1.0, 1.0),
    };
    let width = (hi - lo) / bins as f64;
    let counts = histogram(&path, lo, hi, bins);
    w.csv(
        "_density",
        &["bin_center".into(), "empirical_density".into(), "analytic_density".into()],
        counts.iter().enumerate().map(|(b, &n)| {
            let center = lo + (b as f64 + 0.5) * width;
            vec![center, n as f64 / (path.len() as f64 * width), stationary_density(kind, center)]
        }),
    )?;

    let (c0, se0) = autocovariance_with_error(&path, dt, 0.0, batches)?;
    let (c1, se1) = autocovariance_with_error(&path, dt, tau, batches)?;
    // Samples five correlation times apart are close to independent.
    let thin = ((5.0 * tau / dt).ceil() as usize).max(1);
    let thinned: Vec<f64> = path.iter().step_by(thin).map(|x| x.clamp(lo, hi)).collect();
    let probs = stationary_bin_probabilities(kind, lo, hi, bins);
    let expected: Vec<f64> = probs.iter().map(|p| p * thinned.len() as f64).collect();
    let chi = chi_square_test(&histogram(&thinned, lo, hi, bins), &expected)?;

    let records = vec![
        band_record("second_moment", &fp, c0, se0, m2),
        band_record("autocovariance_at_tau", &fp, c1, se1, kind.autocovariance(tau, tau)),
        CheckRecord { name: "stationary_chi_square".into(), fingerprint: fp.clone(), statistic: chi.statistic, threshold: chi.critical_value, pass: chi.pass },
    ];
    let pass = all_pass(&records);
    w.json(
        "",
        echo,
        json!({
            "noise_kind": kind,
            "tau": tau,
            "dt": dt,
            "length": length,
            "thinned_samples": thinned.len(),
            "stationary_chi_square": chi,
            "records": records,
            "pass": pass,
        }),
    )?;
    Ok(Some(pass))
}

fn homogenize(r: &Resolved, echo: &RunConfig, workers: Option<usize>, w: &mut Writer) -> Result<Option<bool>, RunError> {
    let mut settings = r.sweep.clone();
    settings.workers = workers;
    let report = homogenization_sweep(&r.spec, &r.psi0, &r.integrator, &settings)?;
    let records = report.records();
    w.json("", echo, json!({ "report": report, "records": records, "pass": report.pass }))?;
    Ok(Some(report.pass))
}

fn born_suite(r: &Resolved, echo: &RunConfig, workers: Option<usize>, w: &mut Writer) -> Result<Option<bool>, RunError> {
    let s = run_ensemble_with_workers(&r.spec, &r.psi0, &r.integrator, r.m, r.seed, workers)?;
    let born = born_check(&s, &r.psi0)?;
    let martingale = martingale_check(&s, &r.psi0)?;
    let mut records = born.records();
    records.extend(martingale.records());
    let pass = all_pass(&records);
    w.json(
        "",
        echo,
        json!({
            "summary": s,
            "born": born,
            "martingale": martingale,
            "records": records,
            "pass": pass,
        }),
    )?;
    Ok(Some(pass))
}
