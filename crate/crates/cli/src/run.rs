//! Protocol dispatch and output files.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use spinmech::dynamics::{RunDiagnostics, Trajectory};
use spinmech::protocols::{
    run_battery_thermal, run_cooling_thermal, CoolingMap, OttoReport, SweepPoint,
};
use spinmech::thermo::{CycleLedger, CSV_HEADER};
use spinmech::validate::{cptp_check, run_suite, Check};
use spinmech::{cooling_map, otto_sweep, run_otto, Error, ModelParams};

use crate::config::{Format, Protocol, RunConfig};

#[derive(Debug)]
pub enum RunError {
    /// Bad parameters or an unusable output location.
    Config(String),
    /// A state left its tolerance band.
    Invariant(String),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 1,
            RunError::Invariant(_) => 2,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(s) => write!(f, "configuration error: {s}"),
            RunError::Invariant(s) => write!(f, "invariant breach: {s}"),
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::Truncation { .. } | Error::Invariant(_) => RunError::Invariant(e.to_string()),
            _ => RunError::Config(e.to_string()),
        }
    }
}

fn io(path: &Path, e: std::io::Error) -> RunError {
    RunError::Config(format!("cannot write {}: {e}", path.display()))
}

/// Whether a recorded point failure came from a state invariant rather than
/// from its parameters.
fn is_breach(msg: &str) -> bool {
    msg.starts_with("Fock truncation breached") || msg.starts_with("state invariant violated")
}

/// Result of a finished run.
pub struct Outcome {
    pub summary: Value,
    pub files: Vec<String>,
    /// The CPTP and truncation checks held over every run.
    pub healthy: bool,
    pub health: Check,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        if self.healthy {
            0
        } else {
            2
        }
    }
}

struct Writer<'a> {
    dir: &'a Path,
    format: Format,
    files: Vec<String>,
    data: serde_json::Map<String, Value>,
}

impl Writer<'_> {
    fn text(&mut self, name: &str, body: &str) -> Result<(), RunError> {
        let p = self.dir.join(name);
        fs::write(&p, body).map_err(|e| io(&p, e))?;
        self.files.push(name.into());
        Ok(())
    }

    /// A table: CSV file, or an entry of the summary's `data` in JSON mode.
    fn table(&mut self, stem: &str, csv: String, json: impl Serialize) -> Result<(), RunError> {
        match self.format {
            Format::Csv => self.text(&format!("{stem}.csv"), &csv),
            Format::Json => {
                let v = serde_json::to_value(json).map_err(|e| RunError::Config(e.to_string()))?;
                self.data.insert(stem.into(), v);
                Ok(())
            }
        }
    }
}

fn diagnostics_json(d: &RunDiagnostics, tol: f64) -> Value {
    let min_eig = d.min_eigenvalue.is_finite().then_some(d.min_eigenvalue);
    json!({
        "steps": d.steps,
        "max_trace_error": d.max_trace_error,
        "max_hermiticity_error": d.max_hermiticity_error,
        "min_eigenvalue": min_eig,
        "max_top_population": d.max_top_population,
        "truncation_tol": tol,
        "truncation_headroom": tol - d.max_top_population,
        "positivity_checks": d.positivity_checks,
        "parked_segments": d.parked_segments,
    })
}

fn trajectory_table<T: spinmech::Real>(
    t: &Trajectory<T>,
    stride: usize,
) -> (String, Vec<spinmech::thermo::ObservableRecord>) {
    let n = t.samples.len();
    let rows: Vec<_> = t
        .samples
        .iter()
        .enumerate()
        .filter(|(i, _)| i % stride == 0 || i + 1 == n)
        .map(|(_, r)| *r)
        .collect();
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    (s, rows)
}

const LEDGER_HEADER: &str = "cycle,E1_J,E2_J,E3_J,E4_J,E1_next_J,W_e_J,Q_c_J,W_c_J,Q_h_J,closure_J,T1_K,T2_K,T3_K,T4_K,eta,eta_C,eta_CA";

fn ledger_csv(ledgers: &[CycleLedger]) -> String {
    let f = |x: Option<f64>| x.map(|v| format!("{v:.12e}")).unwrap_or_default();
    let mut s = format!("{LEDGER_HEADER}\n");
    for (i, l) in ledgers.iter().enumerate() {
        let _ = write!(s, "{}", i + 1);
        for v in l
            .energies
            .iter()
            .chain([&l.energy_next, &l.w_e, &l.q_c, &l.w_c, &l.q_h])
        {
            let _ = write!(s, ",{v:.12e}");
        }
        let _ = write!(s, ",{:.12e}", l.closure());
        for t in &l.temperatures {
            let _ = write!(s, ",{t:.12e}");
        }
        let _ = writeln!(s, ",{},{:.12e},{}", f(l.eta), l.eta_c, f(l.eta_ca));
    }
    s
}

fn ts_csv(l: &CycleLedger) -> String {
    let mut s = String::from("label,entropy_nats,temperature_K\n");
    for p in &l.path {
        let _ = writeln!(
            s,
            "{},{:.12e},{:.12e}",
            p.label, p.entropy, p.temperature_kelvin
        );
    }
    s
}

fn ledger_json(l: &CycleLedger) -> Value {
    json!({
        "energies_J": l.energies,
        "energy_next_J": l.energy_next,
        "W_e_J": l.w_e,
        "Q_c_J": l.q_c,
        "W_c_J": l.w_c,
        "Q_h_J": l.q_h,
        "closure_J": l.closure(),
        "temperatures_K": l.temperatures,
        "entropies_nats": l.entropies,
        "lambda": l.lambda,
        "eta": l.eta,
        "eta_C": l.eta_c,
        "eta_CA": l.eta_ca,
        "is_engine": l.is_engine(),
    })
}

/// Runs the configured protocol and writes its files under the output
/// directory.
pub fn dispatch(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let start = Instant::now();
    let dir = cfg.output.path.as_path();
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut w = Writer {
        dir,
        format: cfg.output.format,
        files: vec![],
        data: Default::default(),
    };
    let tol = cfg.numerics.truncation_tol;
    let wm = cfg.model.omega_m;
    let mut runs: Vec<RunDiagnostics> = vec![];
    let mut breaches: Vec<String> = vec![];
    let stride = cfg.output.sample_stride;

    let metrics = match &cfg.protocol {
        Protocol::Battery { plan, n0, g } => {
            let params = ModelParams {
                g: *g,
                ..cfg.model.clone()
            };
            let r = run_battery_thermal(&params, plan, *n0, cfg.fock_cutoff, &cfg.numerics)?;
            runs.push(r.trajectory.diagnostics);
            let (csv, rows) = trajectory_table(&r.trajectory, stride);
            w.table("trajectory", csv, rows)?;
            json!({
                "fock_cutoff": r.trajectory.final_state.space().fock_cutoff(),
                "n_initial": r.initial.n_mean,
                "n_after_charge": r.after_charge.n_mean,
                "n_after_storage": r.after_storage.n_mean,
                "n_final": r.last.n_mean,
                "lossless_charge": r.oracle_charge,
                "stored_energy_J": r.stored_energy,
                "retrieved_energy_J": r.retrieved_energy,
                "charge_efficiency": r.charge_efficiency,
                "discharge_efficiency": r.discharge_efficiency,
                "final_fidelity": r.final_fidelity,
            })
        }
        Protocol::Cool { plan, n0 } => {
            let r = run_cooling_thermal(&cfg.model, plan, *n0, cfg.fock_cutoff, &cfg.numerics)?;
            runs.push(r.trajectory.diagnostics);
            let (csv, rows) = trajectory_table(&r.trajectory, stride);
            w.table("trajectory", csv, rows)?;
            let mut cyc = String::from("cycle,n_bar\n");
            for (i, n) in r.n_bar_per_cycle.iter().enumerate() {
                let _ = writeln!(cyc, "{i},{n:.12e}");
            }
            w.table("cycles", cyc, &r.n_bar_per_cycle)?;
            json!({
                "fock_cutoff": r.fock_cutoff,
                "n_initial": n0,
                "n_final": r.n_stationary,
                "ratio": r.n_stationary / n0,
                "effective_temperature_K": r.t_eff.kelvin,
            })
        }
        Protocol::CoolMap {
            grid,
            n_cycles,
            n0,
            rabi,
        } => {
            let params = ModelParams {
                rabi: *rabi,
                ..cfg.model.clone()
            };
            let m: CoolingMap =
                cooling_map(&params, grid, *n_cycles, *n0, &cfg.numerics, cfg.workers)?;
            for p in &m.points {
                runs.extend(p.diagnostics);
                if let Some(e) = p.error.as_ref().filter(|e| is_breach(e)) {
                    breaches.push(e.clone());
                }
            }
            w.table("map", m.to_csv(wm), &m.points)?;
            let failures: Vec<Value> = m
                .points
                .iter()
                .filter_map(|p| {
                    p.error.as_ref().map(|e| {
                        json!({"Delta_over_wm": p.detuning / wm, "g_over_wm": p.coupling / wm, "error": e})
                    })
                })
                .collect();
            json!({
                "points": m.points.len(),
                "cooling_regions": m.cooling_regions().len(),
                "coupling_threshold_over_wm": m.coupling_threshold().map(|g| g / wm),
                "min_ratio": m.points.iter().filter_map(|p| p.ratio).reduce(f64::min),
                "failed_points": failures,
            })
        }
        Protocol::Otto { plan } => {
            let r: OttoReport = run_otto(&cfg.model, plan, &cfg.numerics)?;
            runs.push(r.trajectory.diagnostics);
            let (csv, rows) = trajectory_table(&r.trajectory, stride);
            w.table("trajectory", csv, rows)?;
            let cycles: Vec<Value> = r.cycles.iter().map(ledger_json).collect();
            w.table("ledger", ledger_csv(&r.cycles), cycles)?;
            w.table("ts", ts_csv(&r.ledger), &r.ledger.path)?;
            json!({
                "fock_cutoff": r.fock_cutoff,
                "lambda": r.lambda,
                "omega2": r.omega2,
                "cycles": r.cycles.len(),
                "steady": r.steady,
                "hot_converged": r.hot_converged,
                "hot_duration_s": r.hot_duration,
                "ledger": ledger_json(&r.ledger),
            })
        }
        Protocol::OttoSweep { base, stroke_times } => {
            let pts = otto_sweep(&cfg.model, base, stroke_times, &cfg.numerics, cfg.workers)?;
            let mut csv = format!("{}\n", SweepPoint::CSV_HEADER);
            for p in &pts {
                runs.extend(p.diagnostics);
                if let Some(e) = p.error.as_ref().filter(|e| is_breach(e)) {
                    breaches.push(e.clone());
                }
                csv.push_str(&p.csv_row(wm));
                csv.push('\n');
            }
            let rows: Vec<Value> = pts
                .iter()
                .map(|p| {
                    json!({
                        "omega_m_T": wm * p.t_stroke,
                        "omega_m_T_over_pi": wm * p.t_stroke / PI,
                        "lambda": p.lambda,
                        "steady": p.steady,
                        "ledger": p.ledger.as_ref().map(ledger_json),
                        "error": p.error,
                    })
                })
                .collect();
            w.table("sweep", csv, &rows)?;
            json!({
                "points": pts.len(),
                "failed_points": pts.iter().filter(|p| p.ledger.is_none()).count(),
                "results": rows,
            })
        }
    };

    let mut all = RunDiagnostics::default();
    for d in &runs {
        all.merge(d);
    }
    let health = cptp_check("cptp", &runs, &breaches, tol);
    let mut summary = json!({
        "protocol": cfg.protocol.name(),
        "config": cfg.resolved,
        "metrics": metrics,
        "diagnostics": diagnostics_json(&all, tol),
        "invariants": {"ok": health.pass, "detail": health.detail},
        "wall_clock_s": start.elapsed().as_secs_f64(),
        "files": w.files,
    });
    if cfg.output.format == Format::Json {
        summary["data"] = Value::Object(std::mem::take(&mut w.data));
    }
    let text =
        serde_json::to_string_pretty(&summary).map_err(|e| RunError::Config(e.to_string()))?;
    w.text("summary.json", &text)?;
    w.text("config.resolved.toml", &cfg.resolved_toml())?;
    Ok(Outcome {
        summary,
        files: w.files,
        healthy: health.pass,
        health,
    })
}

/// The oracle and invariant suite. Writes `validate.csv` and
/// `summary.json` when `out` is given.
pub fn validate(out: Option<&Path>) -> Result<(Vec<Check>, u8), RunError> {
    let start = Instant::now();
    let checks = run_suite();
    let code = if checks.iter().all(|c| c.pass) { 0 } else { 2 };
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let mut csv = String::from("id,name,value,tolerance,pass\n");
        for c in &checks {
            let _ = writeln!(
                csv,
                "{},\"{}\",{:.6e},{:.1e},{}",
                c.id, c.name, c.value, c.tolerance, c.pass
            );
        }
        let p = dir.join("validate.csv");
        fs::write(&p, csv).map_err(|e| io(&p, e))?;
        let summary = json!({
            "checks": checks,
            "all_pass": code == 0,
            "wall_clock_s": start.elapsed().as_secs_f64(),
        });
        let p = dir.join("summary.json");
        fs::write(&p, serde_json::to_string_pretty(&summary).unwrap()).map_err(|e| io(&p, e))?;
    }
    Ok((checks, code))
}
