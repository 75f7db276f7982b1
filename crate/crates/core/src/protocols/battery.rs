//! Charging, storing and discharging the mechanical mode with spin kicks.

use std::f64::consts::PI;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    FrequencyRamp, InstantEvent, IntegratorConfig, ResetMode, Runner, Segment, Trajectory,
};
use crate::error::{Error, Result};
use crate::model::{ModelParams, HBAR};
use crate::scalar::Real;
use crate::space::make_space;
use crate::state::{fidelity, partial_trace, thermal_state, DensityMatrix, Subsystem};

use super::{at_cutoff, auto_cutoff};
use crate::thermo::ObservableRecord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryPlan {
    pub n_charge_kicks: usize,
    pub n_discharge_kicks: usize,
    /// Kick duration τ₁ (s).
    pub tau1: f64,
    /// Mechanical periods per unit cell: τ₁ + τ₂ = 2kπ/ω_m.
    pub k: usize,
    /// Wait between the end of storage and the first discharge kick (s);
    /// `None` means (2k+1)π/ω_m, the half-period offset.
    pub discharge_delay: Option<f64>,
    /// Idle mechanical periods between charging and the discharge delay.
    pub storage_periods: usize,
    pub reset: ResetMode,
    /// Sample every this many steps inside each segment.
    pub sample_every: usize,
}

impl BatteryPlan {
    pub fn new(n_charge_kicks: usize, n_discharge_kicks: usize, tau1: f64) -> Self {
        Self {
            n_charge_kicks,
            n_discharge_kicks,
            tau1,
            k: 1,
            discharge_delay: None,
            storage_periods: 0,
            reset: ResetMode::InstantChannel,
            sample_every: 4,
        }
    }

    pub fn cell_duration(&self, omega: f64) -> f64 {
        2.0 * PI * self.k as f64 / omega
    }

    pub fn delay(&self, omega: f64) -> f64 {
        self.discharge_delay
            .unwrap_or((2 * self.k + 1) as f64 * PI / omega)
    }

    pub fn validate(&self, omega: f64) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be ≥ 1".into()));
        }
        if !(self.tau1 > 0.0 && self.tau1 < self.cell_duration(omega)) {
            return Err(Error::InvalidParameter(format!(
                "tau1 = {} s must lie in (0, 2kπ/ω_m = {} s)",
                self.tau1,
                self.cell_duration(omega)
            )));
        }
        if let ResetMode::RateIntegration { duration, .. } = self.reset {
            if self.tau1 + duration > self.cell_duration(omega) {
                return Err(Error::InvalidParameter(
                    "kick plus laser pulse exceed the unit cell".into(),
                ));
            }
        }
        if !(self.delay(omega) >= 0.0 && self.delay(omega).is_finite()) {
            return Err(Error::InvalidParameter(
                "discharge delay must be ≥ 0".into(),
            ));
        }
        Ok(())
    }

    /// Per-cell displacement of ⟨a⟩ in the lossless limit,
    /// β = (g/ω)(e^{iωτ₁} − 1).
    pub fn kick_displacement(&self, params: &ModelParams) -> Complex<f64> {
        let w = params.omega_m;
        Complex::new(params.g / w, 0.0) * (Complex::new(0.0, w * self.tau1).exp() - 1.0)
    }
}

#[derive(Clone, Debug)]
pub struct BatteryReport<T: Real> {
    pub trajectory: Trajectory<T>,
    /// ħω_m Δ⟨a†a⟩ over the charging cells (J).
    pub stored_energy: f64,
    /// ħω_m times the drop of ⟨a†a⟩ over the discharging cells (J).
    pub retrieved_energy: f64,
    /// Achieved over lossless Δ⟨a†a⟩ of charging; `None` when the oracle is 0.
    pub charge_efficiency: Option<f64>,
    /// Energy removed by discharging over the stored energy left at the
    /// end of storage; `None` when nothing is stored or discharged.
    pub discharge_efficiency: Option<f64>,
    /// Squared fidelity of the final mechanical state with the initial one.
    pub final_fidelity: f64,
    pub initial: ObservableRecord,
    pub after_charge: ObservableRecord,
    pub after_storage: ObservableRecord,
    pub last: ObservableRecord,
    /// Lossless Δ⟨a†a⟩ of the charging cells.
    pub oracle_charge: f64,
}

fn cell<T: Real>(
    r: &mut Runner<T>,
    params: &ModelParams,
    plan: &BatteryPlan,
    label: &str,
) -> Result<()> {
    let w = params.omega_m;
    let ramp = FrequencyRamp::constant(w);
    let kick = Segment::from_params(params, plan.tau1, ramp, 0.0)
        .sampled(plan.sample_every)
        .labelled(label);
    // a rate-integrated reset takes time out of the cell
    let laser = match plan.reset {
        ResetMode::RateIntegration { duration, .. } => duration,
        ResetMode::InstantChannel => 0.0,
    };
    let rest = Segment::from_params(params, plan.cell_duration(w) - plan.tau1 - laser, ramp, 0.0)
        .sampled(plan.sample_every)
        .labelled(label);
    r.event(InstantEvent::PiPulse)?;
    r.segment(&kick)?;
    r.event(InstantEvent::SpinReset(plan.reset))?;
    r.segment(&rest)
}

/// Runs the charge / store / discharge sequence from `rho0`.
pub fn run_battery<T: Real>(
    params: &ModelParams,
    plan: &BatteryPlan,
    rho0: &DensityMatrix<T>,
    cfg: &IntegratorConfig,
) -> Result<BatteryReport<T>> {
    params.validate()?;
    let w = params.omega_m;
    plan.validate(w)?;
    let mut r = Runner::new(rho0.clone(), *cfg, false)?;
    r.set_frequency(w);
    let initial = r.sample_now()?;

    for _ in 0..plan.n_charge_kicks {
        cell(&mut r, params, plan, "charge")?;
    }
    let after_charge = r.sample_now()?;
    let idle = plan.storage_periods as f64 * 2.0 * PI / w + plan.delay(w);
    let store = Segment::from_params(params, idle, FrequencyRamp::constant(w), 0.0)
        .sampled(plan.sample_every)
        .labelled("storage");
    r.segment(&store)?;
    let after_storage = r.sample_now()?;
    for _ in 0..plan.n_discharge_kicks {
        cell(&mut r, params, plan, "discharge")?;
    }
    let last = r.sample_now()?;
    let trajectory = r.finish()?;

    let a0 = Complex::new(initial.re_a, initial.im_a);
    let kicked = a0 + plan.kick_displacement(params) * plan.n_charge_kicks as f64;
    let oracle_charge = kicked.norm_sqr() - a0.norm_sqr();
    let charged = after_charge.n_mean - initial.n_mean;
    let charge_efficiency = (oracle_charge.abs() > 0.0).then(|| charged / oracle_charge);
    let held = after_storage.n_mean - initial.n_mean;
    let removed = after_storage.n_mean - last.n_mean;
    let discharge_efficiency =
        (plan.n_discharge_kicks > 0 && held.abs() > 0.0).then(|| removed / held);

    let m0 = partial_trace(rho0, Subsystem::Mechanics)?;
    let m1 = partial_trace(&trajectory.final_state, Subsystem::Mechanics)?;
    let final_fidelity = fidelity(&m1, &m0)?;

    Ok(BatteryReport {
        stored_energy: HBAR * w * charged,
        retrieved_energy: HBAR * w * removed,
        charge_efficiency,
        discharge_efficiency,
        final_fidelity,
        initial,
        after_charge,
        after_storage,
        last,
        oracle_charge,
        trajectory,
    })
}

/// Battery from a thermal state n̄₀ at `fock_cutoff`, or at an automatic cutoff
/// that grows on truncation breaches.
pub fn run_battery_thermal(
    params: &ModelParams,
    plan: &BatteryPlan,
    n0: f64,
    fock_cutoff: Option<usize>,
    cfg: &IntegratorConfig,
) -> Result<BatteryReport<f64>> {
    let beta = plan.kick_displacement(params).norm() * plan.n_charge_kicks as f64;
    let auto = || auto_cutoff(n0 + beta * beta, cfg.truncation_tol);
    at_cutoff(fock_cutoff, auto, |n| {
        let rho = thermal_state::<f64>(make_space(n)?, n0, cfg.truncation_tol)?;
        run_battery(params, plan, &rho, cfg)
    })
}
