use std::path::Path;
use std::process::{Command, Output};

use netstress::output::read_output;
use netstress::run::execute;
use netstress::Engine;

fn netstress(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netstress"))
        .args(args)
        .env_remove("NETSTRESS_THREADS")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn expansion_prints_json_breakdown() {
    let o = netstress(&["expansion", "--matrix", "identity", "--n", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["format"], "netstress-output v1");
    let stress = &doc["stress"];
    // Identity: first contraction N - 1, second 2(N - 1).
    let (s, b, g, t, n) = (1.0f64, 0.1f64, 0.5f64, 0.2f64, 4.0f64);
    let order_gamma = s * s * b.sqrt() * g / (n - 1.0) * (n - 1.0) * (1.0 - b * t / 3.0) * t * t;
    let order_gamma2 = s * s * b * g * g / (3.0 * (n - 1.0)) * 2.0 * (n - 1.0) * t.powi(3);
    approx::assert_relative_eq!(stress["order_gamma"].as_f64().unwrap(), order_gamma, max_relative = 1e-12);
    approx::assert_relative_eq!(stress["order_gamma2"].as_f64().unwrap(), order_gamma2, max_relative = 1e-12);
    approx::assert_relative_eq!(stress["total"].as_f64().unwrap(), t + order_gamma + order_gamma2, max_relative = 1e-12);
}

#[test]
fn csv_is_refused_for_expansion() {
    let o = netstress(&["expansion", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn quadrature_agrees_with_expansion_at_short_times() {
    let o = netstress(&["quadrature", "--n", "5", "--t", "0.02", "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(doc["rel_diff"].as_f64().unwrap() < 1e-6, "{}", doc["rel_diff"]);
}

#[test]
fn fig2_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let base = ["fig2", "--n", "8", "--matrices", "10", "--trials", "20", "--seed", "11", "--output"];
    assert!(netstress(&[&base[..], &[path_arg(&a), "--threads", "1"]].concat()).status.success());
    assert!(netstress(&[&base[..], &[path_arg(&b), "--threads", "2"]].concat()).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn threads_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_netstress"))
        .args(["expansion"])
        .env("NETSTRESS_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn missing_matrix_file_names_the_path() {
    let o = netstress(&["simulate", "--matrix-file", "/nonexistent/exposures.txt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/exposures.txt"), "{}", stderr(&o));
}

#[test]
fn matrix_file_sets_bank_count() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.txt");
    std::fs::write(&m, "# exposures\n0 1 0\n0 0 1\n1 0 0\n").unwrap();
    let o = netstress(&["expansion", "--matrix-file", path_arg(&m)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["config"]["params"]["n_banks"], 3);
    let o = netstress(&["expansion", "--n", "4", "--matrix-file", path_arg(&m)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_without_interactions_is_brownian() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.csv");
    let o = netstress(&["simulate", "--trials", "4000", "--seed", "5", "--output", path_arg(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, r) = read_output(&out).unwrap();
    assert!((r.mc_mean[0] - 1.0).abs() <= 3.0 * r.mc_stderr[0], "{:?}", r.mc_mean);
    assert!((r.mc_mean[1] - 0.1).abs() <= 3.0 * r.mc_stderr[1], "{:?}", r.mc_mean);
}

#[test]
fn variance_check_reports_ratio() {
    let o = netstress(&["variance-check", "--matrices", "2000", "--n", "10", "--beta", "0.1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "axis,mc_mean,mc_stderr,theory,n_diverged,ratio");
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 4);
}

#[test]
fn non_stationary_horizon_exits_with_divergence() {
    let o = netstress(&["fig2", "--gammas", "0.5,50", "--t", "20", "--matrices", "2", "--trials", "4"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("gamma = 50"), "{}", stderr(&o));
}

#[test]
fn invalid_parameter_is_a_usage_error() {
    let o = netstress(&["simulate", "--beta", "-2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("beta"), "{}", stderr(&o));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "n = 5\nbogus_key = 1\n").unwrap();
    let o = netstress(&["expansion", "--config", path_arg(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus_key"), "{}", stderr(&o));
}

#[test]
fn config_file_values_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "n = 6\ngamma = 0.25\nmatrix = \"identity\"\n").unwrap();
    let o = netstress(&["expansion", "--config", path_arg(&cfg), "--gamma", "0.75"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["config"]["params"]["n_banks"], 6);
    assert_eq!(doc["config"]["params"]["gamma"], 0.75);
    assert_eq!(doc["config"]["matrix_source"], "identity");
}

#[test]
fn outputs_round_trip_and_rerun_identically() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, format) in [("fig3", "csv"), ("fig3", "json"), ("stochvol-check", "csv"), ("figA1", "json")] {
        let out = dir.path().join(format!("{cmd}.{format}"));
        let o = netstress(&[
            cmd, "--n", "6", "--matrices", "100", "--trials", "16", "--k-values", "0,0.01", "--l-values", "2",
            "--format", format, "--output", path_arg(&out),
        ]);
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
        let written = std::fs::read_to_string(&out).unwrap();
        let (config, result) = read_output(&out).unwrap();
        assert_eq!(result.experiment, cmd);
        let again = execute(&config, &Engine::new(Some(2)).unwrap()).unwrap();
        assert_eq!(again, written, "{cmd} {format}");
    }
}

#[test]
fn help_and_version_succeed() {
    assert!(netstress(&["--help"]).status.success());
    assert!(netstress(&["--version"]).status.success());
    assert_eq!(netstress(&["no-such-command"]).status.code(), Some(2));
}
