use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn collapse(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_collapse"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("COLLAPSE_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn files(out: &Output) -> Vec<PathBuf> {
    let v: Value = serde_json::from_slice(&out.stdout).expect("stdout is JSON");
    v["files"].as_array().unwrap().iter().map(|f| PathBuf::from(f.as_str().unwrap())).collect()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn master_coherence_decays_at_the_collapse_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = collapse(&["master"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&files(&out)[0]).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# collapse "));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header, ["t", "re_rho_0_0", "im_rho_0_0", "re_rho_0_1", "im_rho_0_1", "re_rho_1_0", "im_rho_1_0", "re_rho_1_1", "im_rho_1_1", "purity"]);
    let c0 = (0.8f64 * 0.2).sqrt();
    let mut rows = 0;
    for line in lines {
        let row: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let t = row[0];
        assert!((row[3] - c0 * (-t).exp()).abs() < 1e-6, "t = {t}");
        assert!((row[1] - 0.8).abs() < 1e-12);
        rows += 1;
    }
    assert!(rows > 100);
}

#[test]
fn born_suite_default_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = collapse(&["born-suite"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(&files(&out)[0]).unwrap()).unwrap();
    assert_eq!(report["pass"], Value::Bool(true));
    let records = report["records"].as_array().unwrap();
    assert!(!records.is_empty());
    assert!(records.iter().all(|r| r["pass"] == Value::Bool(true)));
    assert_eq!(report["summary"]["m_trajectories"], 5000);
}

#[test]
fn reruns_are_byte_identical_and_worker_count_is_invisible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"m": 300, "integrator": {"t_max": 5}}"#);
    let cfg = cfg.to_str().unwrap();
    let runs: Vec<Vec<Vec<u8>>> = [["1"], ["1"], ["4"]]
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let out_dir = dir.path().join(format!("run{i}"));
            let out = collapse(&["ensemble", "--config", cfg, "--seed", "11", "--workers", w[0]], &out_dir);
            assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
            files(&out).iter().map(|f| fs::read(f).unwrap()).collect()
        })
        .collect();
    assert_eq!(runs[0].len(), 2);
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);

    let other = collapse(&["ensemble", "--config", cfg, "--seed", "12"], &dir.path().join("other"));
    assert_ne!(fs::read(&files(&other)[1]).unwrap(), runs[0][1]);
}

#[test]
fn output_names_carry_mode_and_fingerprint() {
    let dir = tempfile::tempdir().unwrap();
    let out = collapse(&["trajectory"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let fp = serde_json::from_slice::<Value>(&out.stdout).unwrap()["fingerprint"].as_str().unwrap().to_string();
    let names: Vec<String> = files(&out).iter().map(|f| f.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, [format!("trajectory_{fp}.csv"), format!("trajectory_{fp}.json")]);
    let csv = fs::read_to_string(dir.path().join(&names[0])).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "t,pop_0,pop_1,norm");
    assert!(csv.lines().next().unwrap().ends_with(&format!("fingerprint={fp}")));
    let sidecar: Value = serde_json::from_str(&fs::read_to_string(dir.path().join(&names[1])).unwrap()).unwrap();
    assert_eq!(sidecar["fingerprint"], Value::String(fp));
    assert!(sidecar["tool"].as_str().unwrap().starts_with("collapse "));
}

#[test]
fn env_var_sets_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_collapse"))
        .arg("master")
        .env("COLLAPSE_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(files(&out)[0].starts_with(dir.path()));
}

#[test]
fn noise_validate_default_ou_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = collapse(&["noise-validate"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let f = files(&out);
    assert_eq!(f.len(), 3);
    let header = |p: &Path| fs::read_to_string(p).unwrap().lines().nth(1).unwrap().to_string();
    assert_eq!(header(&f[0]), "lag,empirical_autocorr,analytic_autocorr");
    assert_eq!(header(&f[1]), "bin_center,empirical_density,analytic_density");
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"model": {"coupling": "strong"}}"#, 2, "model.coupling"),
        (r#"{"integrator": {"step": 0.1}}"#, 2, "integrator.step"),
        (r#"{"mode": "master"}"#, 2, "mode"),
        (r#"{"model": {"variant": "colored_n_state", "tau": 0.01, "diffusion": 1.0, "noise_amplitude": 3.0}}"#, 3, "model"),
        (r#"{"model": {"variant": "two_state_ito", "fdr_enforced": false}}"#, 3, "model"),
        (r#"{"model": {"coupling": 1e200}, "integrator": {"dt": 0.01, "t_max": 1}, "m": 10}"#, 4, ""),
        (r#"{"integrator": {"t_max": 0.1, "checkpoints": [0.05]}}"#, 5, ""),
    ];
    for (text, code, path) in cases {
        let cfg = write_config(dir.path(), text);
        let mode = if text.contains("checkpoints") { "born-suite" } else { "ensemble" };
        let out = collapse(&[mode, "--config", cfg.to_str().unwrap()], &dir.path().join("o"));
        let err: Value = serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("{text}: {}", String::from_utf8_lossy(&out.stderr)));
        assert_eq!(out.status.code(), Some(code), "{text}: {err}");
        assert_eq!(err["exit_code"], code);
        if !path.is_empty() {
            assert_eq!(err["path"], path, "{text}");
        }
        if code == 3 && text.contains("noise_amplitude") {
            let msg = err["message"].as_str().unwrap();
            assert!(msg.contains("diffusion") && msg.contains("noise_amplitude"), "{msg}");
        }
    }

    let out = collapse(&["ensemble", "--config", "/nonexistent/config.json"], dir.path());
    assert_eq!(out.status.code(), Some(7));
    let out = collapse(&["ensemble", "--workers", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = collapse(&["no-such-mode"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_checks_exit_six() {
    let dir = tempfile::tempdir().unwrap();
    // Twice the fluctuation-dissipation diffusion breaks the Born rule.
    let cfg = write_config(dir.path(), r#"{"model": {"variant": "two_state_strat", "fdr_enforced": false, "diffusion": 1.0}}"#);
    let out = collapse(&["born-suite", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(6), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(&files(&out)[0]).unwrap()).unwrap();
    assert_eq!(report["pass"], Value::Bool(false));
}
