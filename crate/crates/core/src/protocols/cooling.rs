//! Repeated drive-and-reset cooling, and its (Δ, g) map.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{at_cutoff, auto_cutoff, parallel_map};
use crate::dynamics::{
    FrequencyRamp, InstantEvent, IntegratorConfig, ResetMode, RunDiagnostics, Runner, Segment,
    Trajectory,
};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::Real;
use crate::space::make_space;
use crate::state::{thermal_state, DensityMatrix};
use crate::thermo::{effective_temperature, ObservableRecord, Temperature};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoolingPlan {
    pub n_cycles: usize,
    /// Drive-on time per cycle (s); `None` means π/ω at the cooling frequency.
    pub t_interact: Option<f64>,
    /// Overrides of the model's Δ, g and Ω (rad/s).
    pub detuning: Option<f64>,
    pub coupling: Option<f64>,
    pub rabi: Option<f64>,
    pub reset: ResetMode,
}

impl CoolingPlan {
    pub fn new(n_cycles: usize) -> Self {
        Self {
            n_cycles,
            t_interact: None,
            detuning: None,
            coupling: None,
            rabi: None,
            reset: ResetMode::InstantChannel,
        }
    }

    /// Model with the overrides applied.
    pub fn apply(&self, params: &ModelParams) -> ModelParams {
        ModelParams {
            detuning: self.detuning.unwrap_or(params.detuning),
            g: self.coupling.unwrap_or(params.g),
            rabi: self.rabi.unwrap_or(params.rabi),
            ..params.clone()
        }
    }

    pub fn interaction_time(&self, omega: f64) -> f64 {
        self.t_interact.unwrap_or(PI / omega)
    }

    pub fn validate(&self, omega: f64) -> Result<()> {
        if self.n_cycles == 0 {
            return Err(Error::InvalidParameter("N_c must be ≥ 1".into()));
        }
        let t = self.interaction_time(omega);
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_interact must be > 0, got {t}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CoolingReport<T: Real> {
    /// One sample at the start and one after every cycle.
    pub trajectory: Trajectory<T>,
    /// n̄ = ⟨a†a⟩ − |⟨a⟩|², initial value first.
    pub n_bar_per_cycle: Vec<f64>,
    /// Mean n̄ over the last tenth of the cycles.
    pub n_stationary: f64,
    pub t_eff: Temperature,
    pub fock_cutoff: usize,
}

/// Runs `n_cycles` drive-then-reset cycles at constant frequency `omega`
/// on an existing runner. Returns n̄ after each cycle.
pub(crate) fn cool_cycles<T: Real>(
    r: &mut Runner<T>,
    params: &ModelParams,
    plan: &CoolingPlan,
    omega: f64,
    n_cycles: usize,
) -> Result<Vec<ObservableRecord>> {
    let p = plan.apply(params);
    let seg = Segment::from_params(
        &p,
        plan.interaction_time(omega),
        FrequencyRamp::constant(omega),
        p.rabi,
    )
    .labelled("cool");
    let mut out = Vec::with_capacity(n_cycles);
    for _ in 0..n_cycles {
        r.segment(&seg)?;
        r.event(InstantEvent::SpinReset(plan.reset))?;
        out.push(r.sample_now()?);
    }
    Ok(out)
}

/// Cooling from `rho0` at the model frequency ω_m.
pub fn run_cooling<T: Real>(
    params: &ModelParams,
    plan: &CoolingPlan,
    rho0: &DensityMatrix<T>,
    cfg: &IntegratorConfig,
) -> Result<CoolingReport<T>> {
    params.validate()?;
    let w = params.omega_m;
    plan.validate(w)?;
    let mut r = Runner::new(rho0.clone(), *cfg, false)?;
    r.set_frequency(w);
    let mut n_bar = vec![r.sample_now()?.n_fluct];
    n_bar.extend(
        cool_cycles(&mut r, params, plan, w, plan.n_cycles)?
            .iter()
            .map(|rec| rec.n_fluct),
    );
    let trajectory = r.finish()?;
    let tail = (plan.n_cycles / 10).max(1);
    let n_stationary = n_bar[n_bar.len() - tail..].iter().sum::<f64>() / tail as f64;
    Ok(CoolingReport {
        trajectory,
        t_eff: effective_temperature(n_stationary.max(0.0), w)?,
        n_stationary,
        fock_cutoff: rho0.space().fock_cutoff(),
        n_bar_per_cycle: n_bar,
    })
}

/// Cutoff for cooling from n̄₀ with coupling g at frequency ω: the thermal
/// tail plus the largest spin-dependent displacement 2g/ω.
pub fn cooling_cutoff(n0: f64, g: f64, omega: f64, tol: f64) -> usize {
    let alpha = 2.0 * g / omega;
    auto_cutoff(n0 + alpha * alpha, tol)
}

/// Cooling from a thermal state n̄₀ at `fock_cutoff`, or at an automatic cutoff
/// that grows on truncation breaches.
pub fn run_cooling_thermal(
    params: &ModelParams,
    plan: &CoolingPlan,
    n0: f64,
    fock_cutoff: Option<usize>,
    cfg: &IntegratorConfig,
) -> Result<CoolingReport<f64>> {
    let p = plan.apply(params);
    let auto = || cooling_cutoff(n0, p.g, p.omega_m, cfg.truncation_tol);
    at_cutoff(fock_cutoff, auto, |n| {
        let rho = thermal_state::<f64>(make_space(n)?, n0, cfg.truncation_tol)?;
        run_cooling(params, plan, &rho, cfg)
    })
}

/// Grid of the cooling map. Ranges are half-open `(lo, hi]` and sampled at
/// `lo + (hi − lo)(i + 1)/n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapGrid {
    /// Δ range (rad/s).
    pub delta_range: (f64, f64),
    /// g range (rad/s).
    pub g_range: (f64, f64),
    /// Points along (Δ, g).
    pub resolution: (usize, usize),
}

impl MapGrid {
    pub fn validate(&self) -> Result<()> {
        let ok = |r: (f64, f64)| r.0 >= 0.0 && r.1 > r.0 && r.1.is_finite();
        if !ok(self.delta_range) || !ok(self.g_range) {
            return Err(Error::InvalidParameter(
                "grid bounds must satisfy 0 ≤ lo < hi".into(),
            ));
        }
        if self.resolution.0 == 0 || self.resolution.1 == 0 {
            return Err(Error::InvalidParameter(
                "grid resolution must be ≥ 1".into(),
            ));
        }
        Ok(())
    }

    fn axis(range: (f64, f64), n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| range.0 + (range.1 - range.0) * (i + 1) as f64 / n as f64)
            .collect()
    }

    pub fn deltas(&self) -> Vec<f64> {
        Self::axis(self.delta_range, self.resolution.0)
    }

    pub fn couplings(&self) -> Vec<f64> {
        Self::axis(self.g_range, self.resolution.1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    pub detuning: f64,
    pub coupling: f64,
    /// n̄ / n̄₀ after the cycles; `None` when the point failed.
    pub ratio: Option<f64>,
    pub fock_cutoff: usize,
    pub diagnostics: Option<RunDiagnostics>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoolingMap {
    pub grid: MapGrid,
    pub n_cycles: usize,
    pub n0: f64,
    /// Row-major in g: index `j·n_Δ + i` for (Δ_i, g_j).
    pub points: Vec<MapPoint>,
}

impl CoolingMap {
    pub fn ratio(&self, i: usize, j: usize) -> Option<f64> {
        self.points[j * self.grid.resolution.0 + i].ratio
    }

    /// Linear interpolation of ratio = 1 along grid edges, as (Δ, g) pairs.
    pub fn unit_contour(&self) -> Vec<(f64, f64)> {
        let (nd, ng) = self.grid.resolution;
        let mut out = vec![];
        let p = |i: usize, j: usize| &self.points[j * nd + i];
        let mut edge = |a: &MapPoint, b: &MapPoint| {
            if let (Some(ra), Some(rb)) = (a.ratio, b.ratio) {
                if (ra - 1.0) * (rb - 1.0) < 0.0 {
                    let s = (1.0 - ra) / (rb - ra);
                    out.push((
                        a.detuning + s * (b.detuning - a.detuning),
                        a.coupling + s * (b.coupling - a.coupling),
                    ));
                }
            }
        };
        for j in 0..ng {
            for i in 0..nd {
                if i + 1 < nd {
                    edge(p(i, j), p(i + 1, j));
                }
                if j + 1 < ng {
                    edge(p(i, j), p(i, j + 1));
                }
            }
        }
        out
    }

    /// Connected components (4-neighbour) of the cells with ratio < 1, as
    /// lists of `(i, j)`.
    pub fn cooling_regions(&self) -> Vec<Vec<(usize, usize)>> {
        let (nd, ng) = self.grid.resolution;
        let cools = |i: usize, j: usize| self.ratio(i, j).is_some_and(|r| r < 1.0);
        let mut seen = vec![false; nd * ng];
        let mut regions = vec![];
        for j0 in 0..ng {
            for i0 in 0..nd {
                if seen[j0 * nd + i0] || !cools(i0, j0) {
                    continue;
                }
                let mut stack = vec![(i0, j0)];
                seen[j0 * nd + i0] = true;
                let mut region = vec![];
                while let Some((i, j)) = stack.pop() {
                    region.push((i, j));
                    let mut nb = vec![];
                    if i > 0 {
                        nb.push((i - 1, j));
                    }
                    if i + 1 < nd {
                        nb.push((i + 1, j));
                    }
                    if j > 0 {
                        nb.push((i, j - 1));
                    }
                    if j + 1 < ng {
                        nb.push((i, j + 1));
                    }
                    for (a, b) in nb {
                        if !seen[b * nd + a] && cools(a, b) {
                            seen[b * nd + a] = true;
                            stack.push((a, b));
                        }
                    }
                }
                region.sort_unstable();
                regions.push(region);
            }
        }
        regions
    }

    /// Smallest grid coupling from which every row up to the top has
    /// ratio ≥ 1 at every detuning; `None` if the top row still cools or
    /// has failed points.
    pub fn coupling_threshold(&self) -> Option<f64> {
        let (nd, ng) = self.grid.resolution;
        let hot_row = |j: usize| (0..nd).all(|i| self.ratio(i, j).is_some_and(|r| r >= 1.0));
        let mut first = None;
        for j in (0..ng).rev() {
            if hot_row(j) {
                first = Some(j);
            } else {
                break;
            }
        }
        first.map(|j| self.points[j * nd].coupling)
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.ratio.is_none()).count()
    }

    /// `Delta_over_wm,g_over_wm,ratio` rows; failed points are left empty.
    pub fn to_csv(&self, omega_m: f64) -> String {
        let mut s = String::from("Delta_over_wm,g_over_wm,ratio\n");
        for p in &self.points {
            let r = p.ratio.map(|r| format!("{r:.12e}")).unwrap_or_default();
            s.push_str(&format!(
                "{:.6},{:.6},{r}\n",
                p.detuning / omega_m,
                p.coupling / omega_m
            ));
        }
        s
    }
}

/// n̄/n̄₀ after `n_cycles` over the (Δ, g) grid; Ω and the rest come from
/// `params`. Point failures are recorded, not propagated.
pub fn cooling_map(
    params: &ModelParams,
    grid: &MapGrid,
    n_cycles: usize,
    n0: f64,
    cfg: &IntegratorConfig,
    workers: usize,
) -> Result<CoolingMap> {
    params.validate()?;
    grid.validate()?;
    if !(n0 > 0.0) {
        return Err(Error::InvalidParameter(
            "initial occupation must be > 0 for a ratio".into(),
        ));
    }
    let mut cells = vec![];
    for &g in &grid.couplings() {
        for &d in &grid.deltas() {
            cells.push((d, g));
        }
    }
    let points = parallel_map(&cells, workers, |&(d, g)| {
        let plan = CoolingPlan {
            detuning: Some(d),
            coupling: Some(g),
            ..CoolingPlan::new(n_cycles)
        };
        let cut = cooling_cutoff(n0, g, params.omega_m, cfg.truncation_tol);
        let cfg = IntegratorConfig {
            record_entropy: false,
            ..*cfg
        };
        match run_cooling_thermal(params, &plan, n0, None, &cfg) {
            Ok(rep) => MapPoint {
                detuning: d,
                coupling: g,
                ratio: Some(rep.n_bar_per_cycle.last().copied().unwrap_or(n0) / n0),
                fock_cutoff: rep.fock_cutoff,
                diagnostics: Some(rep.trajectory.diagnostics),
                error: None,
            },
            Err(e) => MapPoint {
                detuning: d,
                coupling: g,
                ratio: None,
                fock_cutoff: cut,
                diagnostics: None,
                error: Some(e.to_string()),
            },
        }
    })?;
    Ok(CoolingMap {
        grid: grid.clone(),
        n_cycles,
        n0,
        points,
    })
}
