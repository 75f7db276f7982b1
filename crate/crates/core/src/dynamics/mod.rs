//! Lindblad time evolution: segments, instantaneous events and schedules.
//!
//! Segments are integrated with fixed-step RK4 in the interaction picture of
//! the diagonal part `ω(t)a†a + Δ·|−1⟩⟨−1|`, which removes the fast phonon
//! phases without approximation. All jump operators used here are
//! phase-covariant under that frame, so the dissipators are unchanged.

mod engine;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::operator::{annihilation, spin_operator, OperatorMatrix, SpinOp};
use crate::scalar::{CMatrix, Real};
use crate::space::{HilbertSpace, DEFAULT_TRUNCATION_TOL};
use crate::state::{partial_trace, DensityMatrix, Subsystem};
use crate::thermo::ObservableRecord;

pub use engine::{step_plan, StepPlan};

/// A dissipative channel and its rate (1/s).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DissipatorKind {
    /// `(γ/2)[(n̄+1)ℒ[a] + n̄ℒ[a†]]`
    MechanicalThermal { rate: f64, n_th: f64 },
    /// `(γ₁/2)[(n̄+1)ℒ[σ−] + n̄ℒ[σ+]]`
    SpinDamping { rate: f64, n_bath: f64 },
    /// `(γ₂/2)ℒ[σz]`
    SpinDephasing { rate: f64 },
    /// `(Γ_GL/2)ℒ[σ−]`
    GreenReset { rate: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JumpOp {
    A,
    ADag,
    SigmaMinus,
    SigmaPlus,
    SigmaZ,
}

impl JumpOp {
    pub fn operator<T: Real>(self, space: HilbertSpace) -> OperatorMatrix<T> {
        match self {
            JumpOp::A => annihilation(space),
            JumpOp::ADag => annihilation(space).dagger(),
            JumpOp::SigmaMinus => spin_operator(space, SpinOp::Minus),
            JumpOp::SigmaPlus => spin_operator(space, SpinOp::Plus),
            JumpOp::SigmaZ => spin_operator(space, SpinOp::Z),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipatorSpec {
    pub kind: DissipatorKind,
    pub enabled: bool,
}

impl DissipatorSpec {
    pub fn on(kind: DissipatorKind) -> Self {
        Self {
            kind,
            enabled: true,
        }
    }

    pub fn rate(&self) -> f64 {
        match self.kind {
            DissipatorKind::MechanicalThermal { rate, .. }
            | DissipatorKind::SpinDamping { rate, .. }
            | DissipatorKind::SpinDephasing { rate }
            | DissipatorKind::GreenReset { rate } => rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let occ = match self.kind {
            DissipatorKind::MechanicalThermal { n_th, .. } => n_th,
            DissipatorKind::SpinDamping { n_bath, .. } => n_bath,
            _ => 0.0,
        };
        if !(self.rate() >= 0.0 && self.rate().is_finite() && occ >= 0.0 && occ.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bad dissipator {:?}",
                self.kind
            )));
        }
        Ok(())
    }

    /// `(x, c)` pairs contributing `c·ℒ[x]ρ`; empty when disabled.
    pub fn jumps(&self) -> Vec<(JumpOp, f64)> {
        if !self.enabled {
            return vec![];
        }
        let v = match self.kind {
            DissipatorKind::MechanicalThermal { rate, n_th } => {
                vec![
                    (JumpOp::A, 0.5 * rate * (n_th + 1.0)),
                    (JumpOp::ADag, 0.5 * rate * n_th),
                ]
            }
            DissipatorKind::SpinDamping { rate, n_bath } => vec![
                (JumpOp::SigmaMinus, 0.5 * rate * (n_bath + 1.0)),
                (JumpOp::SigmaPlus, 0.5 * rate * n_bath),
            ],
            DissipatorKind::SpinDephasing { rate } => vec![(JumpOp::SigmaZ, 0.5 * rate)],
            DissipatorKind::GreenReset { rate } => vec![(JumpOp::SigmaMinus, 0.5 * rate)],
        };
        v.into_iter().filter(|&(_, c)| c > 0.0).collect()
    }
}

/// Mechanical frequency profile of a segment, `ω(t) = start + slope·t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRamp {
    pub start: f64,
    pub slope: f64,
}

impl FrequencyRamp {
    pub fn constant(omega: f64) -> Self {
        Self {
            start: omega,
            slope: 0.0,
        }
    }

    /// Linear ramp from `from` to `to` over `duration`.
    pub fn linear(from: f64, to: f64, duration: f64) -> Self {
        Self {
            start: from,
            slope: (to - from) / duration,
        }
    }

    pub fn omega(&self, t: f64) -> f64 {
        self.start + self.slope * t
    }

    /// `∫₀ᵗ ω`
    pub fn phase(&self, t: f64) -> f64 {
        self.start * t + 0.5 * self.slope * t * t
    }
}

/// Early termination of a segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum StopCondition {
    /// Stop once `|⟨a†a⟩ − target| ≤ rel_tol·target`.
    PhononTarget { target: f64, rel_tol: f64 },
}

/// Constant-generator stretch of evolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    /// Ω; either 0 or Ω_L in the protocols.
    pub drive_amplitude: f64,
    pub detuning: f64,
    pub coupling: f64,
    pub ramp: FrequencyRamp,
    pub dissipators: Vec<DissipatorSpec>,
    /// Record every this many steps; 0 keeps only the final sample.
    pub sample_every: usize,
    pub label: String,
    pub stop: Option<StopCondition>,
}

impl Segment {
    pub fn new(duration: f64, ramp: FrequencyRamp) -> Self {
        Self {
            duration,
            drive_amplitude: 0.0,
            detuning: 0.0,
            coupling: 0.0,
            ramp,
            dissipators: vec![],
            sample_every: 0,
            label: String::new(),
            stop: None,
        }
    }

    /// Segment under the model Hamiltonian with the standard decoherence
    /// channels of `params` (green reset off).
    pub fn from_params(
        params: &ModelParams,
        duration: f64,
        ramp: FrequencyRamp,
        drive: f64,
    ) -> Self {
        Self {
            drive_amplitude: drive,
            detuning: params.detuning,
            coupling: params.g,
            dissipators: standard_dissipators(params),
            ..Self::new(duration, ramp)
        }
    }

    pub fn with_drive(mut self, omega: f64) -> Self {
        self.drive_amplitude = omega;
        self
    }

    pub fn with_detuning(mut self, delta: f64) -> Self {
        self.detuning = delta;
        self
    }

    pub fn with_coupling(mut self, g: f64) -> Self {
        self.coupling = g;
        self
    }

    pub fn with_dissipator(mut self, kind: DissipatorKind) -> Self {
        self.dissipators.push(DissipatorSpec::on(kind));
        self
    }

    pub fn sampled(mut self, every: usize) -> Self {
        self.sample_every = every;
        self
    }

    pub fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn until(mut self, stop: StopCondition) -> Self {
        self.stop = Some(stop);
        self
    }

    pub fn omega_end(&self) -> f64 {
        self.ramp.omega(self.duration)
    }

    pub fn jumps(&self) -> Vec<(JumpOp, f64)> {
        self.dissipators.iter().flat_map(|d| d.jumps()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "segment duration {} invalid",
                self.duration
            )));
        }
        let (w0, w1) = (self.ramp.omega(0.0), self.omega_end());
        if !(w0 > 0.0 && w1 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mechanical frequency must stay positive (ω goes {w0} → {w1})"
            )));
        }
        for v in [self.drive_amplitude, self.detuning, self.coupling] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(
                    "non-finite segment coefficient".into(),
                ));
            }
        }
        for d in &self.dissipators {
            d.validate()?;
        }
        Ok(())
    }
}

/// Mechanical bath, spin damping and spin dephasing from `params`.
pub fn standard_dissipators(params: &ModelParams) -> Vec<DissipatorSpec> {
    vec![
        DissipatorSpec::on(DissipatorKind::MechanicalThermal {
            rate: params.gamma_m,
            n_th: params.n_th,
        }),
        DissipatorSpec::on(DissipatorKind::SpinDamping {
            rate: params.gamma_1,
            n_bath: params.spin_bath_n,
        }),
        DissipatorSpec::on(DissipatorKind::SpinDephasing {
            rate: params.gamma_2,
        }),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ResetMode {
    /// `ρ → |0⟩⟨0| ⊗ Tr_s ρ`
    InstantChannel,
    /// Integrate the Γ_GL channel for `duration`, drive off, everything else on.
    RateIntegration { gamma_gl: f64, duration: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InstantEvent {
    PiPulse,
    SpinReset(ResetMode),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ScheduleItem {
    Evolve(Segment),
    Event(InstantEvent),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub items: Vec<ScheduleItem>,
}

impl PulseSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_segment(&mut self, s: Segment) -> &mut Self {
        self.items.push(ScheduleItem::Evolve(s));
        self
    }

    pub fn push_event(&mut self, e: InstantEvent) -> &mut Self {
        self.items.push(ScheduleItem::Event(e));
        self
    }

    pub fn extend(&mut self, other: PulseSchedule) -> &mut Self {
        self.items.extend(other.items);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn total_duration(&self) -> f64 {
        self.items
            .iter()
            .map(|i| match i {
                ScheduleItem::Evolve(s) => s.duration,
                ScheduleItem::Event(InstantEvent::SpinReset(ResetMode::RateIntegration {
                    duration,
                    ..
                })) => *duration,
                ScheduleItem::Event(_) => 0.0,
            })
            .sum()
    }
}

/// Numerical settings shared by every evolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Steps per period of the fastest lab-frame frequency max(ω, Δ̄, Ω, Δ).
    pub dt_divisor: f64,
    /// Bound on `dt` times the largest dissipative rate.
    pub dissipative_safety: f64,
    /// Fixed step overriding the automatic rule.
    pub dt: Option<f64>,
    pub truncation_tol: f64,
    /// Certify positivity by Cholesky at every sample.
    pub check_positivity: bool,
    /// Entropy of the mechanical state at every sample.
    pub record_entropy: bool,
    /// Integrate only the mechanics while the spin sits in |0⟩ undriven.
    pub spin_parking: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt_divisor: DEFAULT_DT_DIVISOR,
            dissipative_safety: 1.0,
            dt: None,
            truncation_tol: DEFAULT_TRUNCATION_TOL,
            check_positivity: true,
            record_entropy: true,
            spin_parking: true,
        }
    }
}

pub const DEFAULT_DT_DIVISOR: f64 = 40.0;

/// Health of a run, aggregated over samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub steps: u64,
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    /// Smallest eigenvalue seen at exact eigen checks (trajectory ends).
    pub min_eigenvalue: f64,
    pub max_top_population: f64,
    pub positivity_checks: u64,
    pub parked_segments: u64,
}

impl Default for RunDiagnostics {
    fn default() -> Self {
        Self {
            steps: 0,
            max_trace_error: 0.0,
            max_hermiticity_error: 0.0,
            min_eigenvalue: f64::INFINITY,
            max_top_population: 0.0,
            positivity_checks: 0,
            parked_segments: 0,
        }
    }
}

impl RunDiagnostics {
    pub fn merge(&mut self, o: &RunDiagnostics) {
        self.steps += o.steps;
        self.max_trace_error = self.max_trace_error.max(o.max_trace_error);
        self.max_hermiticity_error = self.max_hermiticity_error.max(o.max_hermiticity_error);
        self.min_eigenvalue = self.min_eigenvalue.min(o.min_eigenvalue);
        self.max_top_population = self.max_top_population.max(o.max_top_population);
        self.positivity_checks += o.positivity_checks;
        self.parked_segments += o.parked_segments;
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory<T: Real> {
    pub times: Vec<f64>,
    pub samples: Vec<ObservableRecord>,
    pub final_state: DensityMatrix<T>,
    pub diagnostics: RunDiagnostics,
    /// Whether a segment's stop condition fired.
    pub stopped_early: bool,
}

impl<T: Real> Trajectory<T> {
    pub fn last(&self) -> Option<&ObservableRecord> {
        self.samples.last()
    }

    pub fn end_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(crate::thermo::CSV_HEADER);
        s.push('\n');
        for r in &self.samples {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }
}

/// Dense reference right-hand side of the master equation,
/// `−i[H,ρ] + Σ c_k(2xρx† − x†xρ − ρx†x)`.
pub fn lindblad_rhs<T: Real>(
    h: &OperatorMatrix<T>,
    dissipators: &[DissipatorSpec],
    rho: &DensityMatrix<T>,
) -> Result<CMatrix<T>> {
    if rho.kind() != Subsystem::Composite || h.space() != rho.space() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: rho.dim(),
        });
    }
    let r = rho.entries();
    let hm = h.entries();
    let mi = num_complex::Complex::new(T::zero(), -T::one());
    let mut out = (hm * r - r * hm).map(|z| z * mi);
    for d in dissipators {
        for (op, c) in d.jumps() {
            let x = op.operator::<T>(h.space());
            let x = x.entries();
            let xd = x.adjoint();
            let xdx = &xd * x;
            let c = T::lit(c);
            let two = T::lit(2.0);
            out += (x * r * &xd).map(|z| z * two * c) - (&xdx * r + r * &xdx).map(|z| z * c);
        }
    }
    Ok(out)
}

/// Instantaneous π pulse about x: `ρ → σx ρ σx` (the global phase of
/// `−iσx` cancels).
pub fn apply_pi_pulse<T: Real>(rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
    if rho.kind() != Subsystem::Composite {
        return Err(Error::Precondition(
            "π pulse needs the composite state".into(),
        ));
    }
    let m = rho.space().mech_dim();
    let e = rho.entries();
    let out = CMatrix::from_fn(2 * m, 2 * m, |r, c| {
        let rr = if r < m { r + m } else { r - m };
        let cc = if c < m { c + m } else { c - m };
        e[(rr, cc)]
    });
    Ok(DensityMatrix::from_parts(
        rho.space(),
        Subsystem::Composite,
        out,
    ))
}

/// Spin reset. The instant channel is applied directly; rate integration
/// evolves `context` with the drive off and the green channel on.
pub fn apply_spin_reset<T: Real>(
    rho: &DensityMatrix<T>,
    mode: ResetMode,
    context: &Segment,
    cfg: &IntegratorConfig,
) -> Result<Trajectory<T>> {
    match mode {
        ResetMode::InstantChannel => {
            let out = instant_reset(rho)?;
            Ok(Trajectory {
                times: vec![],
                samples: vec![],
                final_state: out,
                diagnostics: RunDiagnostics::default(),
                stopped_early: false,
            })
        }
        ResetMode::RateIntegration { gamma_gl, duration } => {
            let seg = reset_segment(context, gamma_gl, duration);
            evolve_segment(rho, &seg, cfg)
        }
    }
}

/// `|0⟩⟨0| ⊗ Tr_s ρ`
pub fn instant_reset<T: Real>(rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
    let m = partial_trace(rho, Subsystem::Mechanics)?;
    crate::state::product_state(&m, crate::space::SpinLevel::Zero)
}

/// Laser-on stretch derived from the surrounding segment.
pub fn reset_segment(context: &Segment, gamma_gl: f64, duration: f64) -> Segment {
    let omega = context.omega_end();
    let mut s = context.clone();
    s.duration = duration;
    s.drive_amplitude = 0.0;
    s.ramp = FrequencyRamp::constant(omega);
    s.stop = None;
    s.sample_every = 0;
    s.label = "reset".into();
    s.dissipators
        .push(DissipatorSpec::on(DissipatorKind::GreenReset {
            rate: gamma_gl,
        }));
    s
}

/// Evolve `rho` through one segment.
pub fn evolve_segment<T: Real>(
    rho: &DensityMatrix<T>,
    segment: &Segment,
    cfg: &IntegratorConfig,
) -> Result<Trajectory<T>> {
    let mut runner = engine::Runner::new(rho.clone(), *cfg, true)?;
    runner.segment(segment)?;
    runner.finish()
}

/// Run a full schedule. Samples from consecutive segments are concatenated
/// on one clock; instantaneous events add no samples.
pub fn run_schedule<T: Real>(
    rho0: &DensityMatrix<T>,
    schedule: &PulseSchedule,
    cfg: &IntegratorConfig,
) -> Result<Trajectory<T>> {
    if schedule.is_empty() {
        return Err(Error::Precondition("schedule is empty".into()));
    }
    let mut runner = engine::Runner::new(rho0.clone(), *cfg, true)?;
    for item in &schedule.items {
        runner.item(item)?;
    }
    runner.finish()
}

pub use engine::Runner;

#[cfg(test)]
mod tests;
