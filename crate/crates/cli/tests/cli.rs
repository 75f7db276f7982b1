use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn spinmech(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinmech"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_config(dir: &Path, name: &str, cmd: &str, toml: &str, extra: &[&str]) -> Output {
    let cfg = dir.join(format!("{name}.toml"));
    fs::write(&cfg, toml).unwrap();
    let out = dir.join(name);
    let mut args = vec![
        cmd,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    spinmech(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn help_exits_cleanly() {
    let o = spinmech(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for c in [
        "battery",
        "cool",
        "cool-map",
        "otto",
        "otto-sweep",
        "validate",
    ] {
        assert!(text.contains(c), "{text}");
    }
}

#[test]
fn usage_errors_are_config_errors() {
    assert_eq!(spinmech(&["bogus"]).status.code(), Some(1));
    assert_eq!(spinmech(&["cool"]).status.code(), Some(1));
    assert_eq!(
        spinmech(&["cool", "--format", "xml"]).status.code(),
        Some(1)
    );
}

#[test]
fn missing_protocol_lists_valid_ones() {
    let d = TempDir::new().unwrap();
    let o = run_config(d.path(), "empty", "battery", "workers = 1\n", &[]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    for p in [
        "[battery]",
        "[cool]",
        "[cool_map]",
        "[otto]",
        "[otto_sweep]",
    ] {
        assert!(e.contains(p), "{e}");
    }
}

#[test]
fn bad_configs_exit_one() {
    let d = TempDir::new().unwrap();
    let cases = [
        ("workers", "workers = 0\n[battery]\nn_charge_kicks = 1\n"),
        (
            "units",
            "[model]\nomega_m = 314.0\nomega_m_hz = 50\n[battery]\nn_charge_kicks = 1\n",
        ),
        ("unknown", "[battery]\nn_charge_kicks = 1\ncharge = 3\n"),
        ("required", "[battery]\nn_discharge_kicks = 1\n"),
    ];
    for (name, toml) in cases {
        let o = run_config(d.path(), name, "battery", toml, &[]);
        assert_eq!(o.status.code(), Some(1), "{name}: {}", stderr(&o));
        assert!(!d.path().join(name).join("summary.json").exists());
    }
    let o = run_config(
        d.path(),
        "flag",
        "battery",
        "[battery]\nn_charge_kicks = 1\n",
        &["--workers", "0"],
    );
    assert_eq!(o.status.code(), Some(1));
    let o = run_config(
        d.path(),
        "mismatch",
        "cool",
        "[battery]\nn_charge_kicks = 1\n",
        &[],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn minimal_battery_run() {
    let d = TempDir::new().unwrap();
    let o = run_config(
        d.path(),
        "b",
        "battery",
        "[battery]\nn_charge_kicks = 3\n",
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = d.path().join("b");
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(
        csv.starts_with("t_seconds,n_mean,re_a,im_a,sigma_z,z_over_zpf,n_fluct,trace,entropy\n")
    );
    assert!(csv.lines().count() > 10);
    let s = summary(&out);
    assert_eq!(s["protocol"], "battery");
    assert_eq!(s["config"]["model"]["gamma_2"], 1000.0);
    assert_eq!(s["config"]["battery"]["n_discharge_kicks"], 3);
    assert_eq!(s["invariants"]["ok"], true);
    assert!(s["metrics"]["final_fidelity"].as_f64().unwrap() > 0.9);
    assert!(s["diagnostics"]["truncation_headroom"].as_f64().unwrap() > 0.0);
    assert!(out.join("config.resolved.toml").exists());
}

#[test]
fn resolved_config_reproduces_the_run() {
    let d = TempDir::new().unwrap();
    let o = run_config(
        d.path(),
        "a",
        "cool",
        "[model]\ngamma_1 = 0\ngamma_2 = 0\n[cool]\nn_cycles = 2\ng_over_wm = 0.3\n",
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let a = d.path().join("a");
    let b = d.path().join("b");
    let o = spinmech(&[
        "cool",
        "--config",
        a.join("config.resolved.toml").to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["trajectory.csv", "cycles.csv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn cool_map_is_rectangular_and_worker_independent() {
    let d = TempDir::new().unwrap();
    let toml = "[model]\ngamma_1 = 0\ngamma_2 = 0\n[cool_map]\nn_cycles = 2\nresolution = [3, 2]\n";
    let one = run_config(d.path(), "w1", "cool-map", toml, &["--workers", "1"]);
    assert_eq!(one.status.code(), Some(0), "{}", stderr(&one));
    let two = run_config(d.path(), "w2", "cool-map", toml, &["--workers", "2"]);
    assert_eq!(two.status.code(), Some(0), "{}", stderr(&two));
    let a = fs::read_to_string(d.path().join("w1/map.csv")).unwrap();
    let b = fs::read_to_string(d.path().join("w2/map.csv")).unwrap();
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "Delta_over_wm,g_over_wm,ratio");
    assert_eq!(lines.len(), 1 + 6);
    for l in &lines[1..] {
        let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(f.len(), 3);
        assert!(f[2] > 0.0);
    }
    // first row is the smallest g, Δ runs fastest
    assert_eq!(&lines[1][..17], "1.333333,0.500000");
    assert_eq!(&lines[4][..17], "1.333333,1.000000");
}

#[test]
fn otto_sweep_records_out_of_range_points() {
    let d = TempDir::new().unwrap();
    let o = run_config(
        d.path(),
        "s",
        "otto-sweep",
        "[model]\nn_th = 7\n[otto_sweep]\nn_cooling = 250\nomega_m_t_over_pi = [4, 5]\n",
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(d.path().join("s/sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "omega_m_T,lambda,T3_over_T4,eta,eta_C,eta_CA");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].ends_with(",,,,"));
    let s = summary(&d.path().join("s"));
    assert_eq!(s["metrics"]["failed_points"], 2);
    assert!(s["metrics"]["results"][0]["error"]
        .as_str()
        .unwrap()
        .contains("λ"));
}

#[test]
fn otto_writes_ledger_and_ts() {
    let d = TempDir::new().unwrap();
    let toml = "[model]\nn_th = 2\ngamma_1 = 0\ngamma_2 = 0\nquality_factor = 20\n\
                [otto]\nn_cooling = 2\nlambda = 0.1\nt_stroke = 2e-3\nmax_cycles = 2\n";
    let o = run_config(d.path(), "o", "otto", toml, &["--fock-cutoff", "45"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = d.path().join("o");
    let ledger = fs::read_to_string(out.join("ledger.csv")).unwrap();
    assert!(ledger
        .starts_with("cycle,E1_J,E2_J,E3_J,E4_J,E1_next_J,W_e_J,Q_c_J,W_c_J,Q_h_J,closure_J,"));
    assert!(ledger.lines().count() >= 2);
    let ts = fs::read_to_string(out.join("ts.csv")).unwrap();
    assert!(ts.starts_with("label,entropy_nats,temperature_K\n"));
    let s = summary(&out);
    assert_eq!(s["metrics"]["fock_cutoff"], 45);
    assert_eq!(s["config"]["numerics"]["fock_cutoff"], 45);
    let l = &s["metrics"]["ledger"];
    let closure = l["closure_J"].as_f64().unwrap();
    let sum: f64 = ["W_e_J", "Q_c_J", "W_c_J", "Q_h_J"]
        .iter()
        .map(|k| l[k].as_f64().unwrap())
        .sum();
    assert!((closure - sum).abs() <= 1e-12 * l["Q_h_J"].as_f64().unwrap().abs());
}

#[test]
fn json_format_embeds_the_tables() {
    let d = TempDir::new().unwrap();
    let o = run_config(
        d.path(),
        "j",
        "cool",
        "[cool]\nn_cycles = 1\n",
        &["--format", "json"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = d.path().join("j");
    assert!(!out.join("trajectory.csv").exists());
    let s = summary(&out);
    assert_eq!(s["data"]["cycles"].as_array().unwrap().len(), 2);
    assert!(s["data"]["trajectory"][0]["n_mean"].as_f64().is_some());
}

#[test]
fn truncation_breach_exits_two() {
    let d = TempDir::new().unwrap();
    let o = run_config(
        d.path(),
        "t",
        "cool",
        "[cool]\nn_cycles = 1\n",
        &["--fock-cutoff", "6"],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("truncation"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_is_a_config_error() {
    let d = TempDir::new().unwrap();
    let blocker = d.path().join("file");
    fs::write(&blocker, "").unwrap();
    let cfg = d.path().join("c.toml");
    fs::write(&cfg, "[cool]\nn_cycles = 1\n").unwrap();
    let o = spinmech(&[
        "cool",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        blocker.join("x").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_reports_every_criterion() {
    let d = TempDir::new().unwrap();
    let o = spinmech(&["validate", "--out", d.path().to_str().unwrap()]);
    let text = String::from_utf8_lossy(&o.stdout);
    for id in ["1", "2", "3", "4a", "4b", "8"] {
        assert!(
            text.lines()
                .any(|l| l.starts_with(&format!("PASS {id} "))
                    || l.starts_with(&format!("FAIL {id} "))),
            "{text}"
        );
    }
    let any_fail = text.lines().any(|l| l.starts_with("FAIL"));
    assert_eq!(o.status.code(), Some(if any_fail { 2 } else { 0 }));
    let csv = fs::read_to_string(d.path().join("validate.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}
