//! Four-stroke Otto engine with the mechanical mode as working fluid, the
//! ambient bath as hot bath and reset cooling as cold bath.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::cooling::{cool_cycles, cooling_cutoff, CoolingPlan};
use super::{at_cutoff, parallel_map};
use crate::dynamics::{
    step_plan, FrequencyRamp, IntegratorConfig, ResetMode, RunDiagnostics, Runner, Segment,
    StopCondition, Trajectory,
};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::space::make_space;
use crate::state::{thermal_populations, thermal_state};
use crate::thermo::{effective_temperature, CycleLedger, CyclePoint, ObservableRecord, TsPoint};

/// How fast the frequency is ramped during the adiabatic strokes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum StrokeRate {
    /// Fractional change λ = 1 − ω₂/ω₁.
    Lambda(f64),
    /// Ramp rate d_tω (rad/s²); λ = d_tω·T/ω_m.
    Ramp(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OttoPlan {
    pub rate: StrokeRate,
    /// Duration T of each adiabatic stroke (s).
    pub t_stroke: f64,
    /// Cooling cycles N_c on the cold isochore.
    pub n_cooling: usize,
    /// Cold-isochore overrides (rad/s, s); defaults g = ω_m/4, Δ = 3ω₂,
    /// Ω = ω₂/2, t_interact = π/ω₂.
    pub coupling: Option<f64>,
    pub detuning: Option<f64>,
    pub rabi: Option<f64>,
    pub t_interact: Option<f64>,
    pub reset: ResetMode,
    /// Occupation n̄₁ at point 1 of the first cycle; defaults to the bath n̄_th.
    pub n_initial: Option<f64>,
    /// The first hot isochore ends once ⟨a†a⟩ is within hot_tol·|n̄_th − n̄₄|
    /// of the bath occupation in the truncated space, or after `hot_max`.
    /// Later cycles reuse its duration.
    pub hot_tol: f64,
    /// Cap on the hot isochore (s); `None` means 10/γ_m.
    pub hot_max: Option<f64>,
    /// Cycles repeat until |E₁' − E₁| ≤ steady_tol·|Q_h|.
    pub steady_tol: f64,
    pub max_cycles: usize,
    /// T–S samples per stroke.
    pub stroke_samples: usize,
    pub fock_cutoff: Option<usize>,
}

impl OttoPlan {
    pub fn new(rate: StrokeRate, t_stroke: f64, n_cooling: usize) -> Self {
        Self {
            rate,
            t_stroke,
            n_cooling,
            coupling: None,
            detuning: None,
            rabi: None,
            t_interact: None,
            reset: ResetMode::InstantChannel,
            n_initial: None,
            hot_tol: 1e-3,
            hot_max: None,
            steady_tol: 1e-6,
            max_cycles: 8,
            stroke_samples: 16,
            fock_cutoff: None,
        }
    }

    pub fn lambda(&self, omega_m: f64) -> f64 {
        match self.rate {
            StrokeRate::Lambda(l) => l,
            StrokeRate::Ramp(r) => r * self.t_stroke / omega_m,
        }
    }

    /// Cooling plan of the cold isochore at ω₂.
    pub fn cooling_plan(&self, params: &ModelParams) -> CoolingPlan {
        let w2 = params.omega_m * (1.0 - self.lambda(params.omega_m));
        CoolingPlan {
            n_cycles: self.n_cooling,
            t_interact: Some(self.t_interact.unwrap_or(PI / w2)),
            detuning: Some(self.detuning.unwrap_or(3.0 * w2)),
            coupling: Some(self.coupling.unwrap_or(0.25 * params.omega_m)),
            rabi: Some(self.rabi.unwrap_or(0.5 * w2)),
            reset: self.reset,
        }
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        let l = self.lambda(params.omega_m);
        if !(0.0..1.0).contains(&l) {
            return Err(Error::InvalidParameter(format!(
                "λ = {l:.6} must lie in [0, 1)"
            )));
        }
        if !(self.t_stroke > 0.0 && self.t_stroke.is_finite()) {
            return Err(Error::InvalidParameter("stroke time must be > 0".into()));
        }
        if self.max_cycles == 0 || self.stroke_samples == 0 {
            return Err(Error::InvalidParameter(
                "max_cycles and stroke_samples must be ≥ 1".into(),
            ));
        }
        if !(self.hot_tol > 0.0 && self.steady_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be > 0".into()));
        }
        if params.n_th <= 0.0 {
            return Err(Error::InvalidParameter(
                "the hot bath needs n̄_th > 0".into(),
            ));
        }
        if self.hot_max.is_none() && params.gamma_m <= 0.0 {
            return Err(Error::InvalidParameter(
                "hot isochore needs γ_m > 0 or an explicit hot_max".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct OttoReport {
    /// Ledger of the reported (last) cycle.
    pub ledger: CycleLedger,
    /// Ledgers of every cycle run, in order.
    pub cycles: Vec<CycleLedger>,
    pub lambda: f64,
    pub omega2: f64,
    /// Whether the first hot isochore met its tolerance before the cap.
    pub hot_converged: bool,
    /// Duration of every hot isochore (s).
    pub hot_duration: f64,
    /// Whether the cycle closed within `steady_tol`.
    pub steady: bool,
    pub cooling: CoolingPlan,
    pub fock_cutoff: usize,
    pub trajectory: Trajectory<f64>,
}

fn point(r: &ObservableRecord) -> CyclePoint {
    CyclePoint::from_record(r)
}

fn ts(label: &str, r: &ObservableRecord) -> TsPoint {
    TsPoint {
        label: label.into(),
        entropy: r.entropy,
        temperature_kelvin: effective_temperature(r.n_fluct.max(0.0), r.omega)
            .map(|t| t.kelvin)
            .unwrap_or(f64::NAN),
    }
}

/// Linear ramp from `from` to `to` over `t`, cut into `k` sampled pieces.
fn ramp(
    r: &mut Runner<f64>,
    params: &ModelParams,
    from: f64,
    to: f64,
    t: f64,
    k: usize,
    label: &str,
    path: &mut Vec<TsPoint>,
) -> Result<ObservableRecord> {
    let mut last = None;
    for i in 0..k {
        let (a, b) = (
            from + (to - from) * i as f64 / k as f64,
            from + (to - from) * (i + 1) as f64 / k as f64,
        );
        let seg = Segment::from_params(
            params,
            t / k as f64,
            FrequencyRamp::linear(a, b, t / k as f64),
            0.0,
        )
        .labelled(label);
        r.segment(&seg)?;
        let rec = r.sample_now()?;
        if i + 1 < k {
            path.push(ts(label, &rec));
        }
        last = Some(rec);
    }
    Ok(last.expect("k ≥ 1"))
}

fn run_at_cutoff(
    params: &ModelParams,
    plan: &OttoPlan,
    n: usize,
    cfg: &IntegratorConfig,
) -> Result<OttoReport> {
    let w1 = params.omega_m;
    let lambda = plan.lambda(w1);
    let w2 = w1 * (1.0 - lambda);
    let cool = plan.cooling_plan(params);
    let n1 = plan.n_initial.unwrap_or(params.n_th);
    let hot_max = plan.hot_max.unwrap_or(10.0 / params.gamma_m);
    let k = plan.stroke_samples;
    // the bath's fixed point in the truncated space
    let n_hot: f64 = thermal_populations(params.n_th, n + 1)
        .iter()
        .enumerate()
        .map(|(i, p)| i as f64 * p)
        .sum();

    let rho = thermal_state::<f64>(make_space(n)?, n1, cfg.truncation_tol)?;
    let mut r = Runner::new(rho, *cfg, false)?;
    r.set_frequency(w1);
    let mut p1 = r.sample_now()?;
    let mut cycles = vec![];
    let mut hot_converged = false;
    let mut t_hot = None;
    let mut steady = false;

    for _ in 0..plan.max_cycles {
        let mut path = vec![];
        let p2 = ramp(&mut r, params, w1, w2, plan.t_stroke, k, "1-2", &mut path)?;

        let cooled = cool_cycles(&mut r, params, &cool, w2, plan.n_cooling)?;
        let p3 = r.sample_now()?;
        let stride = (cooled.len() / k).max(1);
        for (i, rec) in cooled.iter().enumerate() {
            if (i + 1) % stride == 0 && i + 1 < cooled.len() {
                path.push(ts("2-3", rec));
            }
        }

        let p4 = ramp(&mut r, params, w2, w1, plan.t_stroke, k, "3-4", &mut path)?;

        let (target, duration) = match t_hot {
            Some(t) => (None, t),
            None => {
                let tol = (plan.hot_tol * (n_hot - p4.n_mean).abs() / n_hot).max(1e-12);
                (
                    Some(StopCondition::PhononTarget {
                        target: n_hot,
                        rel_tol: tol,
                    }),
                    hot_max,
                )
            }
        };
        let mut hot = Segment::from_params(params, duration, FrequencyRamp::constant(w1), 0.0)
            .labelled("4-1");
        hot.stop = target;
        let steps = step_plan(&hot, r.state().space(), true, cfg)?.steps;
        let hot = hot.sampled((steps / k).max(1));
        let before = r.samples().len();
        let t0 = r.clock();
        r.segment(&hot)?;
        if t_hot.is_none() {
            t_hot = Some(r.clock() - t0);
            hot_converged = r.clock() - t0 < hot_max * (1.0 - 1e-12);
        }
        let p1_next = r.sample_now()?;
        let n_hot = r.samples().len() - before;
        for rec in &r.samples()[before..before + n_hot.saturating_sub(1)] {
            path.push(ts("4-1", rec));
        }

        let ledger = CycleLedger::new(
            [point(&p1), point(&p2), point(&p3), point(&p4)],
            point(&p1_next),
            lambda,
            path,
        )?;
        let closed = ledger.closure().abs() <= plan.steady_tol * ledger.q_h.abs();
        cycles.push(ledger);
        p1 = p1_next;
        if closed {
            steady = true;
            break;
        }
    }
    let trajectory = r.finish()?;
    Ok(OttoReport {
        ledger: cycles.last().cloned().expect("max_cycles ≥ 1"),
        cycles,
        lambda,
        omega2: w2,
        hot_converged,
        hot_duration: t_hot.unwrap_or(0.0),
        steady,
        cooling: cool,
        fock_cutoff: n,
        trajectory,
    })
}

/// Runs Otto cycles from a thermal state at ω_m until E₁ is steady.
pub fn run_otto(
    params: &ModelParams,
    plan: &OttoPlan,
    cfg: &IntegratorConfig,
) -> Result<OttoReport> {
    params.validate()?;
    plan.validate(params)?;
    let w2 = params.omega_m * (1.0 - plan.lambda(params.omega_m));
    let cool = plan.cooling_plan(params);
    let n1 = plan.n_initial.unwrap_or(params.n_th).max(params.n_th);
    let auto = || cooling_cutoff(n1, cool.coupling.unwrap_or(0.0), w2, cfg.truncation_tol);
    at_cutoff(plan.fock_cutoff, auto, |n| {
        run_at_cutoff(params, plan, n, cfg)
    })
}

/// One stroke time of an Otto sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub t_stroke: f64,
    pub lambda: f64,
    pub ledger: Option<CycleLedger>,
    pub steady: bool,
    pub diagnostics: Option<RunDiagnostics>,
    pub error: Option<String>,
}

impl SweepPoint {
    pub const CSV_HEADER: &'static str = "omega_m_T,lambda,T3_over_T4,eta,eta_C,eta_CA";

    pub fn csv_row(&self, omega_m: f64) -> String {
        let f = |x: Option<f64>| x.map(|v| format!("{v:.12e}")).unwrap_or_default();
        let l = self.ledger.as_ref();
        format!(
            "{:.6},{:.12e},{},{},{},{}",
            omega_m * self.t_stroke,
            self.lambda,
            f(l.map(|l| l.temperature_ratio())),
            f(l.and_then(|l| l.eta)),
            f(l.map(|l| l.eta_c)),
            f(l.and_then(|l| l.eta_ca)),
        )
    }
}

/// Steady-state ledgers over stroke times at a fixed ramp rate. Failures
/// (including λ ≥ 1) are recorded per point.
pub fn otto_sweep(
    params: &ModelParams,
    base: &OttoPlan,
    stroke_times: &[f64],
    cfg: &IntegratorConfig,
    workers: usize,
) -> Result<Vec<SweepPoint>> {
    params.validate()?;
    parallel_map(stroke_times, workers, |&t| {
        let plan = OttoPlan {
            t_stroke: t,
            ..base.clone()
        };
        let lambda = plan.lambda(params.omega_m);
        match run_otto(params, &plan, cfg) {
            Ok(rep) => SweepPoint {
                t_stroke: t,
                lambda,
                steady: rep.steady,
                diagnostics: Some(rep.trajectory.diagnostics),
                ledger: Some(rep.ledger),
                error: None,
            },
            Err(e) => SweepPoint {
                t_stroke: t,
                lambda,
                ledger: None,
                steady: false,
                diagnostics: None,
                error: Some(e.to_string()),
            },
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InsetPoint {
    pub n_cooling: usize,
    pub lambda: f64,
    pub eta: Option<f64>,
    pub eta_over_lambda: Option<f64>,
    pub steady: bool,
    pub diagnostics: Option<RunDiagnostics>,
    pub error: Option<String>,
}

/// η/λ against the number of cooling cycles at a fixed stroke.
pub fn otto_inset(
    params: &ModelParams,
    base: &OttoPlan,
    n_cooling: &[usize],
    cfg: &IntegratorConfig,
    workers: usize,
) -> Result<Vec<InsetPoint>> {
    params.validate()?;
    parallel_map(n_cooling, workers, |&nc| {
        let plan = OttoPlan {
            n_cooling: nc,
            ..base.clone()
        };
        let lambda = plan.lambda(params.omega_m);
        match run_otto(params, &plan, cfg) {
            Ok(rep) => {
                let eta = rep.ledger.eta;
                let err = eta
                    .is_none()
                    .then(|| format!("not an engine cycle: Q_h = {:.3e} J", rep.ledger.q_h));
                InsetPoint {
                    n_cooling: nc,
                    lambda,
                    eta,
                    eta_over_lambda: eta.map(|e| e / lambda),
                    steady: rep.steady,
                    diagnostics: Some(rep.trajectory.diagnostics),
                    error: err,
                }
            }
            Err(e) => InsetPoint {
                n_cooling: nc,
                lambda,
                eta: None,
                eta_over_lambda: None,
                steady: false,
                diagnostics: None,
                error: Some(e.to_string()),
            },
        }
    })
}
