//! Run configuration: a TOML file with one model, numerics and output block
//! and exactly one protocol block.
//!
//! Frequencies may be given in rad/s (`g`), in Hz (`g_hz`) or in units of
//! ω_m (`g_over_wm`); giving two forms of the same quantity is an error.
//! Times are in seconds.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spinmech::dynamics::{IntegratorConfig, ResetMode, DEFAULT_DT_DIVISOR};
use spinmech::{
    BatteryPlan, CoolingPlan, GradientInputs, MapGrid, ModelParams, OttoPlan, StrokeRate,
    DEFAULT_TRUNCATION_TOL,
};

pub const PROTOCOLS: [&str; 5] = ["battery", "cool", "cool_map", "otto", "otto_sweep"];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Res<T> = Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Res<T> {
    Err(ConfigError(msg.into()))
}

// ---- file layout ----

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub model: RawModel,
    #[serde(default)]
    pub numerics: RawNumerics,
    #[serde(default)]
    pub output: RawOutput,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub battery: Option<RawBattery>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cool: Option<RawCool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cool_map: Option<RawCoolMap>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub otto: Option<RawOtto>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub otto_sweep: Option<RawOttoSweep>,
}

macro_rules! raw_struct {
    ($(#[$m:meta])* $name:ident { $($field:ident : $ty:ty),* $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            $(
                #[serde(skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }
    };
}

raw_struct!(RawModel {
    omega_m: f64,
    omega_m_hz: f64,
    g: f64,
    g_hz: f64,
    g_over_wm: f64,
    detuning: f64,
    detuning_hz: f64,
    detuning_over_wm: f64,
    rabi: f64,
    rabi_hz: f64,
    rabi_over_wm: f64,
    gamma_m: f64,
    quality_factor: f64,
    n_th: f64,
    gamma_1: f64,
    t1: f64,
    gamma_2: f64,
    t2_star: f64,
    spin_bath_n: f64,
    gamma_gl: f64,
    t_laser: f64,
    gradient: GradientInputs,
});

raw_struct!(RawNumerics {
    fock_cutoff: usize,
    dt_divisor: f64,
    dissipative_safety: f64,
    dt: f64,
    truncation_tol: f64,
    check_positivity: bool,
    record_entropy: bool,
    spin_parking: bool,
});

raw_struct!(RawOutput {
    path: PathBuf,
    format: Format,
    sample_stride: usize,
});

raw_struct!(RawBattery {
    n_charge_kicks: usize,
    n_discharge_kicks: usize,
    tau1: f64,
    tau1_periods: f64,
    k: usize,
    storage_periods: usize,
    discharge_delay: f64,
    n0: f64,
    sample_every: usize,
    reset: Reset,
    g: f64,
    g_hz: f64,
    g_over_wm: f64,
});

raw_struct!(RawCool {
    n_cycles: usize,
    n0: f64,
    t_interact: f64,
    reset: Reset,
    g: f64,
    g_hz: f64,
    g_over_wm: f64,
    detuning: f64,
    detuning_hz: f64,
    detuning_over_wm: f64,
    rabi: f64,
    rabi_hz: f64,
    rabi_over_wm: f64,
});

raw_struct!(RawCoolMap {
    n_cycles: usize,
    n0: f64,
    detuning_range: [f64; 2],
    detuning_range_over_wm: [f64; 2],
    g_range: [f64; 2],
    g_range_over_wm: [f64; 2],
    resolution: [usize; 2],
    rabi: f64,
    rabi_hz: f64,
    rabi_over_wm: f64,
});

raw_struct!(RawOtto {
    n_cooling: usize,
    ramp_rate: f64,
    lambda: f64,
    t_stroke: f64,
    omega_m_t: f64,
    omega_m_t_over_pi: f64,
    g: f64,
    g_hz: f64,
    g_over_wm: f64,
    detuning: f64,
    detuning_hz: f64,
    detuning_over_wm: f64,
    rabi: f64,
    rabi_hz: f64,
    rabi_over_wm: f64,
    t_interact: f64,
    reset: Reset,
    n_initial: f64,
    hot_tol: f64,
    hot_max: f64,
    steady_tol: f64,
    max_cycles: usize,
    stroke_samples: usize,
});

raw_struct!(RawOttoSweep {
    n_cooling: usize,
    ramp_rate: f64,
    t_stroke: Vec<f64>,
    omega_m_t: Vec<f64>,
    omega_m_t_over_pi: Vec<f64>,
    g: f64,
    g_hz: f64,
    g_over_wm: f64,
    detuning: f64,
    detuning_hz: f64,
    detuning_over_wm: f64,
    rabi: f64,
    rabi_hz: f64,
    rabi_over_wm: f64,
    t_interact: f64,
    reset: Reset,
    n_initial: f64,
    hot_tol: f64,
    hot_max: f64,
    steady_tol: f64,
    max_cycles: usize,
    stroke_samples: usize,
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Spin reset after each kick or cooling cycle: an instantaneous channel or
/// the optical-pumping rate integrated over the model's `t_laser`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reset {
    Instant,
    Laser,
}

// ---- resolved ----

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub path: PathBuf,
    pub format: Format,
    pub sample_stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Protocol {
    /// `g` is the kick coupling (rad/s).
    Battery {
        plan: BatteryPlan,
        n0: f64,
        g: f64,
    },
    Cool {
        plan: CoolingPlan,
        n0: f64,
    },
    /// `rabi` is the drive used at every grid point (rad/s).
    CoolMap {
        grid: MapGrid,
        n_cycles: usize,
        n0: f64,
        rabi: f64,
    },
    Otto {
        plan: OttoPlan,
    },
    OttoSweep {
        base: OttoPlan,
        stroke_times: Vec<f64>,
    },
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Battery { .. } => "battery",
            Protocol::Cool { .. } => "cool",
            Protocol::CoolMap { .. } => "cool_map",
            Protocol::Otto { .. } => "otto",
            Protocol::OttoSweep { .. } => "otto_sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelParams,
    pub numerics: IntegratorConfig,
    pub fock_cutoff: Option<usize>,
    pub protocol: Protocol,
    pub output: OutputConfig,
    pub workers: usize,
    /// The configuration with every default filled in and every frequency
    /// in rad/s; parsing it again yields the same run.
    pub resolved: RawConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub fock_cutoff: Option<usize>,
    pub format: Option<Format>,
}

pub fn read_config(path: &Path, over: &Overrides) -> Res<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, over)
}

pub fn parse_config(text: &str, over: &Overrides) -> Res<RunConfig> {
    let mut raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
    if let Some(w) = over.workers {
        raw.workers = Some(w);
    }
    if let Some(n) = over.fock_cutoff {
        raw.numerics.fock_cutoff = Some(n);
    }
    if let Some(p) = &over.out {
        raw.output.path = Some(p.clone());
    }
    if let Some(f) = over.format {
        raw.output.format = Some(f);
    }
    resolve(raw)
}

fn one(name: &str, forms: &[(&str, Option<f64>)]) -> Res<Option<(usize, f64)>> {
    let given: Vec<_> = forms
        .iter()
        .enumerate()
        .filter_map(|(i, (_, v))| v.map(|v| (i, v)))
        .collect();
    match given.len() {
        0 => Ok(None),
        1 => Ok(Some(given[0])),
        _ => {
            let keys: Vec<_> = given.iter().map(|&(i, _)| forms[i].0).collect();
            err(format!(
                "conflicting units for {name}: give only one of {}",
                keys.join(", ")
            ))
        }
    }
}

/// Frequency in rad/s from its rad/s, Hz or ω_m-relative form.
fn freq(
    name: &str,
    wm: f64,
    rad: Option<f64>,
    hz: Option<f64>,
    rel: Option<f64>,
) -> Res<Option<f64>> {
    let k_hz = format!("{name}_hz");
    let k_rel = format!("{name}_over_wm");
    Ok(
        one(name, &[(name, rad), (&k_hz, hz), (&k_rel, rel)])?.map(|(i, v)| match i {
            0 => v,
            1 => 2.0 * PI * v,
            _ => v * wm,
        }),
    )
}

fn positive(name: &str, v: f64) -> Res<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        err(format!("{name} must be > 0, got {v}"))
    }
}

fn resolve_model(m: &RawModel) -> Res<ModelParams> {
    let table = ModelParams::table_one();
    let wm = one(
        "omega_m",
        &[("omega_m", m.omega_m), ("omega_m_hz", m.omega_m_hz)],
    )?
    .map(|(i, v)| if i == 0 { v } else { 2.0 * PI * v })
    .unwrap_or(table.omega_m);
    let wm = positive("omega_m", wm)?;
    let gamma_m = one(
        "gamma_m",
        &[("gamma_m", m.gamma_m), ("quality_factor", m.quality_factor)],
    )?
    .map(|(i, v)| {
        if i == 0 {
            Ok(v)
        } else {
            positive("quality_factor", v).map(|q| wm / q)
        }
    })
    .transpose()?
    .unwrap_or(wm / ModelParams::QUALITY_FACTOR);
    let rate = |name: &str,
                rate: Option<f64>,
                time_key: &str,
                time: Option<f64>,
                default: f64|
     -> Res<f64> {
        match one(name, &[(name, rate), (time_key, time)])? {
            Some((0, v)) => Ok(v),
            Some((_, t)) => positive(time_key, t).map(|t| 1.0 / t),
            None => Ok(default),
        }
    };
    let mut p = ModelParams {
        omega_m: wm,
        g: freq("g", wm, m.g, m.g_hz, m.g_over_wm)?.unwrap_or(table.g),
        detuning: freq(
            "detuning",
            wm,
            m.detuning,
            m.detuning_hz,
            m.detuning_over_wm,
        )?
        .unwrap_or(table.detuning),
        rabi: freq("rabi", wm, m.rabi, m.rabi_hz, m.rabi_over_wm)?.unwrap_or(table.rabi),
        gamma_m,
        n_th: m.n_th.unwrap_or(table.n_th),
        gamma_1: rate("gamma_1", m.gamma_1, "t1", m.t1, table.gamma_1)?,
        spin_bath_n: m.spin_bath_n.unwrap_or(table.spin_bath_n),
        gamma_2: rate("gamma_2", m.gamma_2, "t2_star", m.t2_star, table.gamma_2)?,
        gamma_gl: m.gamma_gl.unwrap_or(table.gamma_gl),
        t_laser: m.t_laser.unwrap_or(table.t_laser),
        gradient: None,
    };
    if let Some(gi) = m.gradient {
        let given = m.g.is_some() || m.g_hz.is_some() || m.g_over_wm.is_some();
        let g_given = p.g;
        p = p.with_gradient(gi);
        if given && (g_given - p.g).abs() > 1e-9 * p.g.abs() {
            return err(format!(
                "g = {g_given} rad/s conflicts with the gradient-derived value {} rad/s",
                p.g
            ));
        }
    }
    p.validate().map_err(|e| ConfigError(e.to_string()))?;
    Ok(p)
}

fn echo_model(p: &ModelParams) -> RawModel {
    RawModel {
        omega_m: Some(p.omega_m),
        g: Some(p.g),
        detuning: Some(p.detuning),
        rabi: Some(p.rabi),
        gamma_m: Some(p.gamma_m),
        n_th: Some(p.n_th),
        gamma_1: Some(p.gamma_1),
        gamma_2: Some(p.gamma_2),
        spin_bath_n: Some(p.spin_bath_n),
        gamma_gl: Some(p.gamma_gl),
        t_laser: Some(p.t_laser),
        gradient: p.gradient,
        ..Default::default()
    }
}

fn reset_mode(r: Option<Reset>, p: &ModelParams) -> ResetMode {
    match r.unwrap_or(Reset::Instant) {
        Reset::Instant => ResetMode::InstantChannel,
        Reset::Laser => ResetMode::RateIntegration {
            gamma_gl: p.gamma_gl,
            duration: p.t_laser,
        },
    }
}

fn reset_key(m: ResetMode) -> Reset {
    match m {
        ResetMode::InstantChannel => Reset::Instant,
        ResetMode::RateIntegration { .. } => Reset::Laser,
    }
}

fn range(
    name: &str,
    wm: f64,
    rad: Option<[f64; 2]>,
    rel: Option<[f64; 2]>,
    default: [f64; 2],
) -> Res<(f64, f64)> {
    let rel_key = format!("{name}_over_wm");
    let r = match (rad, rel) {
        (Some(_), Some(_)) => {
            return err(format!(
                "conflicting units for {name}: give only one of {name}, {rel_key}"
            ))
        }
        (Some(r), None) => r,
        (None, Some(r)) => [r[0] * wm, r[1] * wm],
        (None, None) => [default[0] * wm, default[1] * wm],
    };
    Ok((r[0], r[1]))
}

/// Shared fields of `[otto]` and `[otto_sweep]`.
struct OttoCommon {
    n_cooling: Option<usize>,
    g: Option<f64>,
    detuning: Option<f64>,
    rabi: Option<f64>,
    t_interact: Option<f64>,
    reset: Option<Reset>,
    n_initial: Option<f64>,
    hot_tol: Option<f64>,
    hot_max: Option<f64>,
    steady_tol: Option<f64>,
    max_cycles: Option<usize>,
    stroke_samples: Option<usize>,
}

fn otto_plan(
    c: &OttoCommon,
    rate: StrokeRate,
    t_stroke: f64,
    p: &ModelParams,
    fock: Option<usize>,
) -> Res<OttoPlan> {
    let Some(n_cooling) = c.n_cooling else {
        return err("n_cooling is required");
    };
    let d = OttoPlan::new(rate, t_stroke, n_cooling);
    Ok(OttoPlan {
        coupling: c.g,
        detuning: c.detuning,
        rabi: c.rabi,
        t_interact: c.t_interact,
        reset: reset_mode(c.reset, p),
        n_initial: c.n_initial,
        hot_tol: c.hot_tol.unwrap_or(d.hot_tol),
        hot_max: c.hot_max,
        steady_tol: c.steady_tol.unwrap_or(d.steady_tol),
        max_cycles: c.max_cycles.unwrap_or(d.max_cycles),
        stroke_samples: c.stroke_samples.unwrap_or(d.stroke_samples),
        fock_cutoff: fock,
        ..d
    })
}

/// Fig. 3 cooling point: Δ = 2ω_m, g = ω_m/2, Ω = ω_m/2.
fn cool_defaults(wm: f64) -> (f64, f64, f64) {
    (2.0 * wm, 0.5 * wm, 0.5 * wm)
}

pub fn resolve(raw: RawConfig) -> Res<RunConfig> {
    let present: Vec<&str> = [
        raw.battery.is_some(),
        raw.cool.is_some(),
        raw.cool_map.is_some(),
        raw.otto.is_some(),
        raw.otto_sweep.is_some(),
    ]
    .iter()
    .zip(PROTOCOLS)
    .filter_map(|(&p, n)| p.then_some(n))
    .collect();
    if present.is_empty() {
        return err(format!(
            "missing protocol block; add exactly one of: {}",
            PROTOCOLS.map(|p| format!("[{p}]")).join(", ")
        ));
    }
    if present.len() > 1 {
        return err(format!(
            "exactly one protocol block is allowed, found {}",
            present
                .iter()
                .map(|p| format!("[{p}]"))
                .collect::<Vec<_>>()
                .join(", ")
        ));
    }

    let workers = raw.workers.unwrap_or(1);
    if workers == 0 {
        return err("workers must be ≥ 1");
    }

    let model = resolve_model(&raw.model)?;
    let wm = model.omega_m;

    let n = &raw.numerics;
    let d = IntegratorConfig::default();
    let numerics = IntegratorConfig {
        dt_divisor: n.dt_divisor.unwrap_or(DEFAULT_DT_DIVISOR),
        dissipative_safety: n.dissipative_safety.unwrap_or(d.dissipative_safety),
        dt: n.dt,
        truncation_tol: n.truncation_tol.unwrap_or(DEFAULT_TRUNCATION_TOL),
        check_positivity: n.check_positivity.unwrap_or(d.check_positivity),
        record_entropy: n.record_entropy.unwrap_or(d.record_entropy),
        spin_parking: n.spin_parking.unwrap_or(d.spin_parking),
    };
    positive("dt_divisor", numerics.dt_divisor)?;
    positive("dissipative_safety", numerics.dissipative_safety)?;
    positive("truncation_tol", numerics.truncation_tol)?;
    if let Some(dt) = numerics.dt {
        positive("dt", dt)?;
    }
    let fock_cutoff = n.fock_cutoff;
    if fock_cutoff.is_some_and(|c| c < 2) {
        return err("fock_cutoff must be ≥ 2");
    }

    let output = OutputConfig {
        path: raw
            .output
            .path
            .clone()
            .unwrap_or_else(|| PathBuf::from("out")),
        format: raw.output.format.unwrap_or(Format::Csv),
        sample_stride: raw.output.sample_stride.unwrap_or(1),
    };
    if output.sample_stride == 0 {
        return err("sample_stride must be ≥ 1");
    }

    let mut resolved = RawConfig {
        workers: Some(workers),
        model: echo_model(&model),
        numerics: RawNumerics {
            fock_cutoff,
            dt_divisor: Some(numerics.dt_divisor),
            dissipative_safety: Some(numerics.dissipative_safety),
            dt: numerics.dt,
            truncation_tol: Some(numerics.truncation_tol),
            check_positivity: Some(numerics.check_positivity),
            record_entropy: Some(numerics.record_entropy),
            spin_parking: Some(numerics.spin_parking),
        },
        output: RawOutput {
            path: Some(output.path.clone()),
            format: Some(output.format),
            sample_stride: Some(output.sample_stride),
        },
        ..Default::default()
    };

    let protocol = if let Some(b) = &raw.battery {
        let Some(n_charge) = b.n_charge_kicks else {
            return err("[battery] needs n_charge_kicks");
        };
        let tau1 = match one(
            "tau1",
            &[("tau1", b.tau1), ("tau1_periods", b.tau1_periods)],
        )? {
            Some((0, t)) => t,
            Some((_, f)) => f * model.period(),
            None => model.period() / 128.0,
        };
        let g = freq("g", wm, b.g, b.g_hz, b.g_over_wm)?.unwrap_or(2.0 * PI * 3.0);
        let plan = BatteryPlan {
            n_discharge_kicks: b.n_discharge_kicks.unwrap_or(n_charge),
            k: b.k.unwrap_or(1),
            storage_periods: b.storage_periods.unwrap_or(0),
            discharge_delay: b.discharge_delay,
            reset: reset_mode(b.reset, &model),
            sample_every: b.sample_every.unwrap_or(4),
            ..BatteryPlan::new(n_charge, 0, tau1)
        };
        if plan.sample_every == 0 {
            return err("sample_every must be ≥ 1");
        }
        let n0 = b.n0.unwrap_or(2.0);
        resolved.battery = Some(RawBattery {
            n_charge_kicks: Some(plan.n_charge_kicks),
            n_discharge_kicks: Some(plan.n_discharge_kicks),
            tau1: Some(plan.tau1),
            k: Some(plan.k),
            storage_periods: Some(plan.storage_periods),
            discharge_delay: plan.discharge_delay,
            n0: Some(n0),
            sample_every: Some(plan.sample_every),
            reset: Some(reset_key(plan.reset)),
            g: Some(g),
            ..Default::default()
        });
        Protocol::Battery { plan, n0, g }
    } else if let Some(c) = &raw.cool {
        let Some(n_cycles) = c.n_cycles else {
            return err("[cool] needs n_cycles");
        };
        let (d0, g0, r0) = cool_defaults(wm);
        let plan = CoolingPlan {
            t_interact: c.t_interact,
            detuning: Some(
                freq(
                    "detuning",
                    wm,
                    c.detuning,
                    c.detuning_hz,
                    c.detuning_over_wm,
                )?
                .unwrap_or(d0),
            ),
            coupling: Some(freq("g", wm, c.g, c.g_hz, c.g_over_wm)?.unwrap_or(g0)),
            rabi: Some(freq("rabi", wm, c.rabi, c.rabi_hz, c.rabi_over_wm)?.unwrap_or(r0)),
            reset: reset_mode(c.reset, &model),
            ..CoolingPlan::new(n_cycles)
        };
        let n0 = c.n0.unwrap_or(8.0);
        resolved.cool = Some(RawCool {
            n_cycles: Some(n_cycles),
            n0: Some(n0),
            t_interact: plan.t_interact,
            reset: Some(reset_key(plan.reset)),
            g: plan.coupling,
            detuning: plan.detuning,
            rabi: plan.rabi,
            ..Default::default()
        });
        Protocol::Cool { plan, n0 }
    } else if let Some(c) = &raw.cool_map {
        if fock_cutoff.is_some() {
            return err("fock_cutoff is chosen per point in a cooling map and cannot be fixed");
        }
        let grid = MapGrid {
            delta_range: range(
                "detuning_range",
                wm,
                c.detuning_range,
                c.detuning_range_over_wm,
                [0.0, 4.0],
            )?,
            g_range: range("g_range", wm, c.g_range, c.g_range_over_wm, [0.0, 1.0])?,
            resolution: c.resolution.map(|r| (r[0], r[1])).unwrap_or((32, 32)),
        };
        let rabi = freq("rabi", wm, c.rabi, c.rabi_hz, c.rabi_over_wm)?.unwrap_or(0.5 * wm);
        let n_cycles = c.n_cycles.unwrap_or(100);
        let n0 = c.n0.unwrap_or(8.0);
        resolved.cool_map = Some(RawCoolMap {
            n_cycles: Some(n_cycles),
            n0: Some(n0),
            detuning_range: Some([grid.delta_range.0, grid.delta_range.1]),
            g_range: Some([grid.g_range.0, grid.g_range.1]),
            resolution: Some([grid.resolution.0, grid.resolution.1]),
            rabi: Some(rabi),
            ..Default::default()
        });
        Protocol::CoolMap {
            grid,
            n_cycles,
            n0,
            rabi,
        }
    } else if let Some(o) = &raw.otto {
        let common = OttoCommon {
            n_cooling: o.n_cooling,
            g: freq("g", wm, o.g, o.g_hz, o.g_over_wm)?,
            detuning: freq(
                "detuning",
                wm,
                o.detuning,
                o.detuning_hz,
                o.detuning_over_wm,
            )?,
            rabi: freq("rabi", wm, o.rabi, o.rabi_hz, o.rabi_over_wm)?,
            t_interact: o.t_interact,
            reset: o.reset,
            n_initial: o.n_initial,
            hot_tol: o.hot_tol,
            hot_max: o.hot_max,
            steady_tol: o.steady_tol,
            max_cycles: o.max_cycles,
            stroke_samples: o.stroke_samples,
        };
        let rate = match one(
            "stroke rate",
            &[("ramp_rate", o.ramp_rate), ("lambda", o.lambda)],
        )? {
            Some((0, r)) => StrokeRate::Ramp(r),
            Some((_, l)) => StrokeRate::Lambda(l),
            None => StrokeRate::Ramp(1e4),
        };
        let t = match one(
            "t_stroke",
            &[
                ("t_stroke", o.t_stroke),
                ("omega_m_t", o.omega_m_t),
                ("omega_m_t_over_pi", o.omega_m_t_over_pi),
            ],
        )? {
            Some((0, t)) => t,
            Some((1, x)) => x / wm,
            Some((_, x)) => x * PI / wm,
            None => {
                return err("[otto] needs a stroke time: t_stroke, omega_m_t or omega_m_t_over_pi")
            }
        };
        let plan = otto_plan(&common, rate, t, &model, fock_cutoff)?;
        plan.validate(&model)
            .map_err(|e| ConfigError(e.to_string()))?;
        resolved.otto = Some(echo_otto(&plan));
        Protocol::Otto { plan }
    } else if let Some(o) = &raw.otto_sweep {
        let common = OttoCommon {
            n_cooling: o.n_cooling,
            g: freq("g", wm, o.g, o.g_hz, o.g_over_wm)?,
            detuning: freq(
                "detuning",
                wm,
                o.detuning,
                o.detuning_hz,
                o.detuning_over_wm,
            )?,
            rabi: freq("rabi", wm, o.rabi, o.rabi_hz, o.rabi_over_wm)?,
            t_interact: o.t_interact,
            reset: o.reset,
            n_initial: o.n_initial,
            hot_tol: o.hot_tol,
            hot_max: o.hot_max,
            steady_tol: o.steady_tol,
            max_cycles: o.max_cycles,
            stroke_samples: o.stroke_samples,
        };
        let forms = [
            o.t_stroke.is_some(),
            o.omega_m_t.is_some(),
            o.omega_m_t_over_pi.is_some(),
        ];
        let times: Vec<f64> = match forms.iter().filter(|&&f| f).count() {
            0 => return err("[otto_sweep] needs t_stroke, omega_m_t or omega_m_t_over_pi"),
            1 => {
                if let Some(t) = &o.t_stroke {
                    t.clone()
                } else if let Some(x) = &o.omega_m_t {
                    x.iter().map(|x| x / wm).collect()
                } else {
                    o.omega_m_t_over_pi.as_ref().unwrap().iter().map(|x| x * PI / wm).collect()
                }
            }
            _ => return err("conflicting units for t_stroke: give only one of t_stroke, omega_m_t, omega_m_t_over_pi"),
        };
        if times.is_empty() {
            return err("[otto_sweep] needs at least one stroke time");
        }
        for &t in &times {
            positive("t_stroke", t)?;
        }
        let base = otto_plan(
            &common,
            StrokeRate::Ramp(o.ramp_rate.unwrap_or(1e4)),
            times[0],
            &model,
            fock_cutoff,
        )?;
        let StrokeRate::Ramp(ramp) = base.rate else {
            unreachable!()
        };
        let e = echo_otto(&base);
        resolved.otto_sweep = Some(RawOttoSweep {
            n_cooling: e.n_cooling,
            ramp_rate: Some(ramp),
            t_stroke: Some(times.clone()),
            g: e.g,
            detuning: e.detuning,
            rabi: e.rabi,
            t_interact: e.t_interact,
            reset: e.reset,
            n_initial: e.n_initial,
            hot_tol: e.hot_tol,
            hot_max: e.hot_max,
            steady_tol: e.steady_tol,
            max_cycles: e.max_cycles,
            stroke_samples: e.stroke_samples,
            ..Default::default()
        });
        Protocol::OttoSweep {
            base,
            stroke_times: times,
        }
    } else {
        unreachable!()
    };

    Ok(RunConfig {
        model,
        numerics,
        fock_cutoff,
        protocol,
        output,
        workers,
        resolved,
    })
}

fn echo_otto(p: &OttoPlan) -> RawOtto {
    let (ramp_rate, lambda) = match p.rate {
        StrokeRate::Ramp(r) => (Some(r), None),
        StrokeRate::Lambda(l) => (None, Some(l)),
    };
    RawOtto {
        n_cooling: Some(p.n_cooling),
        ramp_rate,
        lambda,
        t_stroke: Some(p.t_stroke),
        g: p.coupling,
        detuning: p.detuning,
        rabi: p.rabi,
        t_interact: p.t_interact,
        reset: Some(reset_key(p.reset)),
        n_initial: p.n_initial,
        hot_tol: Some(p.hot_tol),
        hot_max: p.hot_max,
        steady_tol: Some(p.steady_tol),
        max_cycles: Some(p.max_cycles),
        stroke_samples: Some(p.stroke_samples),
        ..Default::default()
    }
}

impl RunConfig {
    /// The resolved configuration as TOML.
    pub fn resolved_toml(&self) -> String {
        toml::to_string(&self.resolved).expect("resolved config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Res<RunConfig> {
        parse_config(s, &Overrides::default())
    }

    #[test]
    fn minimal_battery_gets_table_one() {
        let c = parse("[battery]\nn_charge_kicks = 3\n").unwrap();
        let t = ModelParams::table_one();
        assert_eq!(c.model.omega_m, 2.0 * PI * 50.0);
        assert_eq!(c.model.gamma_m, t.omega_m / 1e4);
        assert_eq!(c.model.gamma_1, 500.0);
        assert_eq!(c.model.gamma_2, 1000.0);
        assert_eq!(c.model.gamma_gl, 1e5);
        assert_eq!(c.model.t_laser, 5e-5);
        let Protocol::Battery { plan, .. } = &c.protocol else {
            panic!()
        };
        assert_eq!(plan.n_discharge_kicks, 3);
        assert!((plan.tau1 - 0.02 / 128.0).abs() < 1e-15);
    }

    #[test]
    fn hz_and_relative_units() {
        let c = parse("[model]\nomega_m_hz = 50\ng_hz = 3\nrabi_over_wm = 0.5\n[battery]\nn_charge_kicks = 1\n").unwrap();
        assert!((c.model.omega_m - 2.0 * PI * 50.0).abs() < 1e-12);
        assert!((c.model.g - 2.0 * PI * 3.0).abs() < 1e-12);
        assert!((c.model.rabi - PI * 50.0).abs() < 1e-12);
    }

    #[test]
    fn times_become_rates() {
        let c = parse("[model]\nt1 = 4e-3\nt2_star = 2e-3\nquality_factor = 100\n[battery]\nn_charge_kicks = 1\n").unwrap();
        assert_eq!(c.model.gamma_1, 250.0);
        assert_eq!(c.model.gamma_2, 500.0);
        assert!((c.model.gamma_m - c.model.omega_m / 100.0).abs() < 1e-12);
    }

    #[test]
    fn conflicting_units() {
        let e = parse("[model]\ng = 1.0\ng_hz = 1.0\n[battery]\nn_charge_kicks = 1\n").unwrap_err();
        assert!(e.0.contains("conflicting units for g"), "{e}");
        let e =
            parse("[model]\nt1 = 1.0\ngamma_1 = 1.0\n[battery]\nn_charge_kicks = 1\n").unwrap_err();
        assert!(e.0.contains("conflicting units"), "{e}");
    }

    #[test]
    fn missing_protocol_lists_choices() {
        let e = parse("workers = 2\n").unwrap_err();
        for p in PROTOCOLS {
            assert!(e.0.contains(&format!("[{p}]")), "{e}");
        }
    }

    #[test]
    fn two_protocols_rejected() {
        let e = parse("[battery]\nn_charge_kicks = 1\n[cool]\nn_cycles = 1\n").unwrap_err();
        assert!(e.0.contains("exactly one"), "{e}");
    }

    #[test]
    fn zero_workers_rejected() {
        let e = parse("workers = 0\n[battery]\nn_charge_kicks = 1\n").unwrap_err();
        assert!(e.0.contains("workers"), "{e}");
        let e = parse_config(
            "[battery]\nn_charge_kicks = 1\n",
            &Overrides {
                workers: Some(0),
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(e.0.contains("workers"), "{e}");
    }

    #[test]
    fn unknown_keys_fail() {
        assert!(parse("[battery]\nn_charge_kicks = 1\nfoo = 2\n").is_err());
        assert!(parse("[model]\nomega = 1\n[battery]\nn_charge_kicks = 1\n").is_err());
        assert!(parse("bogus = 1\n[battery]\nn_charge_kicks = 1\n").is_err());
    }

    #[test]
    fn resolved_config_reparses_to_the_same_run() {
        let srcs = [
            "[model]\ng_hz = 3\n[battery]\nn_charge_kicks = 2\nreset = \"laser\"\n",
            "[cool]\nn_cycles = 5\ndetuning_over_wm = 3\n",
            "[cool_map]\nresolution = [4, 3]\n",
            "[model]\nn_th = 7\n[otto]\nn_cooling = 10\nomega_m_t_over_pi = 0.1\n",
            "[model]\nn_th = 7\n[otto]\nn_cooling = 10\nlambda = 0.2\nt_stroke = 1e-3\n",
            "[model]\nn_th = 7\n[otto_sweep]\nn_cooling = 10\nomega_m_t_over_pi = [3, 4]\n",
        ];
        for s in srcs {
            let a = parse(s).unwrap();
            let b = parse(&a.resolved_toml()).unwrap();
            assert_eq!(a, b, "{s}");
        }
    }

    #[test]
    fn otto_needs_engine_range() {
        let e =
            parse("[model]\nn_th = 7\n[otto]\nn_cooling = 1\nomega_m_t_over_pi = 4\n").unwrap_err();
        assert!(e.0.contains("λ"), "{e}");
    }

    #[test]
    fn overrides_win() {
        let c = parse_config(
            "workers = 1\n[model]\nn_th = 7\n[otto]\nn_cooling = 1\nlambda = 0.1\nt_stroke = 1e-3\n",
            &Overrides {
                workers: Some(3),
                fock_cutoff: Some(30),
                format: Some(Format::Json),
                out: Some("elsewhere".into()),
            },
        )
        .unwrap();
        assert_eq!(c.workers, 3);
        assert_eq!(c.fock_cutoff, Some(30));
        assert_eq!(c.output.format, Format::Json);
        let Protocol::Otto { plan } = &c.protocol else {
            panic!()
        };
        assert_eq!(plan.fock_cutoff, Some(30));
    }
}
