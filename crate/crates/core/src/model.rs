//! Physical parameters, derived symbols and the model Hamiltonians.
//!
//! Everything is in units of ħ = 1 with frequencies in rad/s.

use std::f64::consts::PI;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{
    annihilation, displacement_operator, number, quadrature, spin_operator, spin_rotation_y,
    OperatorMatrix, SpinOp,
};
use crate::scalar::Real;
use crate::space::HilbertSpace;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_B: f64 = 1.380_649e-23;

/// Inputs that fix `g` from a magnetic gradient instead of directly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientInputs {
    /// Bias field in gauss (kept for the record; the rotating frame absorbs it).
    pub b0_gauss: f64,
    /// Field gradient, T/m.
    pub gradient_t_per_m: f64,
    pub mass_kg: f64,
    /// Gyromagnetic ratio, rad/(s·T).
    pub gyromagnetic: f64,
}

impl GradientInputs {
    pub fn z_zpf(&self, omega_m: f64) -> f64 {
        (HBAR / (self.mass_kg * omega_m)).sqrt()
    }

    /// `g = γ G_z z_zpf`
    pub fn coupling(&self, omega_m: f64) -> f64 {
        self.gyromagnetic * self.gradient_t_per_m * self.z_zpf(omega_m)
    }

    /// Equilibrium shift in |−1⟩, `ħγG_z/(mω_m²)`.
    pub fn z0(&self, omega_m: f64) -> f64 {
        HBAR * self.gyromagnetic * self.gradient_t_per_m / (self.mass_kg * omega_m * omega_m)
    }
}

/// Model parameters. Frequencies in rad/s, rates in 1/s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub omega_m: f64,
    pub g: f64,
    /// Drive detuning Δ = ω_L − ω_0.
    pub detuning: f64,
    /// Maximal Rabi amplitude Ω_L.
    pub rabi: f64,
    pub gamma_m: f64,
    /// Hot-bath occupation n̄_th.
    pub n_th: f64,
    pub gamma_1: f64,
    /// Occupation of the bath behind γ_1; 0 means pure decay into |0⟩.
    pub spin_bath_n: f64,
    pub gamma_2: f64,
    pub gamma_gl: f64,
    pub t_laser: f64,
    pub gradient: Option<GradientInputs>,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::table_one()
    }
}

impl ModelParams {
    pub const QUALITY_FACTOR: f64 = 1e4;

    /// Table I values: ω_m = 2π·50, Q = 10⁴, T₂* = 1 ms, T₁ = 2 ms,
    /// Γ_GL = 10⁵ s⁻¹, t_laser = 50 µs. Coupling and drive start at zero.
    pub fn table_one() -> Self {
        let omega_m = 2.0 * PI * 50.0;
        Self {
            omega_m,
            g: 0.0,
            detuning: 0.0,
            rabi: 0.0,
            gamma_m: omega_m / Self::QUALITY_FACTOR,
            n_th: 0.0,
            gamma_1: 1.0 / 2e-3,
            spin_bath_n: 0.0,
            gamma_2: 1.0 / 1e-3,
            gamma_gl: 1e5,
            t_laser: 5e-5,
            gradient: None,
        }
    }

    /// Same parameters with every dissipative rate set to zero.
    pub fn lossless(&self) -> Self {
        Self {
            gamma_m: 0.0,
            gamma_1: 0.0,
            gamma_2: 0.0,
            ..self.clone()
        }
    }

    /// Sets `g` from gradient inputs.
    pub fn with_gradient(mut self, inputs: GradientInputs) -> Self {
        self.g = inputs.coupling(self.omega_m);
        self.gradient = Some(inputs);
        self
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega_m
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_m > 0.0 && self.omega_m.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "omega_m must be > 0, got {}",
                self.omega_m
            )));
        }
        let nonneg = [
            ("g", self.g),
            ("rabi", self.rabi),
            ("gamma_m", self.gamma_m),
            ("n_th", self.n_th),
            ("gamma_1", self.gamma_1),
            ("spin_bath_n", self.spin_bath_n),
            ("gamma_2", self.gamma_2),
            ("gamma_gl", self.gamma_gl),
            ("t_laser", self.t_laser),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and ≥ 0, got {v}"
                )));
            }
        }
        if !self.detuning.is_finite() {
            return Err(Error::InvalidParameter("detuning must be finite".into()));
        }
        if let Some(gi) = &self.gradient {
            if !(gi.mass_kg > 0.0) {
                return Err(Error::InvalidParameter("mass must be > 0".into()));
            }
            let g = gi.coupling(self.omega_m);
            if (g - self.g).abs() > 1e-9 * g.abs().max(1e-300) {
                return Err(Error::InvalidParameter(format!(
                    "g = {} conflicts with gradient-derived γ·G_z·z_zpf = {g}",
                    self.g
                )));
            }
        }
        Ok(())
    }
}

/// Symbols derived from [`ModelParams`] at an instantaneous mechanical
/// frequency and drive amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// δ = Δ − 2g²/ω
    pub delta: f64,
    /// Δ̄ = √(δ² + 4Ω²)
    pub delta_bar: f64,
    /// θ = atan2(−2Ω, δ)
    pub theta: f64,
    /// g̃ = (g/2)|sin θ| = gΩ/Δ̄
    pub g_tilde: f64,
    pub t_m: f64,
    pub z_zpf: Option<f64>,
    pub z0: Option<f64>,
}

pub fn derive(
    params: &ModelParams,
    omega_current: f64,
    rabi_current: f64,
) -> Result<DerivedParams> {
    if !(omega_current > 0.0) {
        return Err(Error::Precondition(format!(
            "mechanical frequency must be > 0, got {omega_current}"
        )));
    }
    let g = params.g;
    let delta = params.detuning - 2.0 * g * g / omega_current;
    let delta_bar = (delta * delta + 4.0 * rabi_current * rabi_current).sqrt();
    let theta = (-2.0 * rabi_current).atan2(delta);
    Ok(DerivedParams {
        delta,
        delta_bar,
        theta,
        g_tilde: 0.5 * g * theta.sin().abs(),
        t_m: 2.0 * PI / omega_current,
        z_zpf: params.gradient.map(|gi| gi.z_zpf(params.omega_m)),
        z0: params.gradient.map(|gi| gi.z0(params.omega_m)),
    })
}

/// Coefficients of the lab-frame Hamiltonian at one instant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabTerms {
    pub omega: f64,
    pub detuning: f64,
    pub coupling: f64,
    pub drive: f64,
}

impl LabTerms {
    pub fn from_params(params: &ModelParams, omega_t: f64, drive: f64) -> Self {
        Self {
            omega: omega_t,
            detuning: params.detuning,
            coupling: params.g,
            drive,
        }
    }
}

/// `ω a†a + (Δ/2)(1−σz) − (g/2)(a+a†)(1−σz) + Ωσx` from explicit terms.
pub fn lab_hamiltonian_terms<T: Real>(space: HilbertSpace, t: &LabTerms) -> OperatorMatrix<T> {
    let n = number::<T>(space);
    let x = quadrature::<T>(space);
    let sz = spin_operator::<T>(space, SpinOp::Z);
    let sx = spin_operator::<T>(space, SpinOp::X);
    let id = OperatorMatrix::<T>::identity(space);
    let one_minus_sz = &id - &sz;
    let lit = T::lit;
    let h = &(&(&n.scale(lit(t.omega)) + &one_minus_sz.scale(lit(0.5 * t.detuning)))
        - &(&x * &one_minus_sz).scale(lit(0.5 * t.coupling)))
        + &sx.scale(lit(t.drive));
    hermitian(h)
}

pub fn lab_hamiltonian<T: Real>(
    space: HilbertSpace,
    params: &ModelParams,
    omega_t: f64,
    drive_amplitude: f64,
) -> OperatorMatrix<T> {
    lab_hamiltonian_terms(
        space,
        &LabTerms::from_params(params, omega_t, drive_amplitude),
    )
}

/// Dressed-frame Hamiltonian in its singularity-free form
/// `ω a†a − (Δ̄/2)σz + (g/2)(cos θ σz − sin θ σx)(a+a†)`, constants dropped.
pub fn dressed_hamiltonian<T: Real>(
    space: HilbertSpace,
    params: &ModelParams,
) -> Result<OperatorMatrix<T>> {
    let d = derive(params, params.omega_m, params.rabi)?;
    Ok(dressed_from_symbols(
        space,
        params.omega_m,
        params.g,
        d.delta_bar,
        d.theta,
    ))
}

pub(crate) fn dressed_from_symbols<T: Real>(
    space: HilbertSpace,
    omega: f64,
    g: f64,
    delta_bar: f64,
    theta: f64,
) -> OperatorMatrix<T> {
    let lit = T::lit;
    let n = number::<T>(space);
    let x = quadrature::<T>(space);
    let sz = spin_operator::<T>(space, SpinOp::Z);
    let sx = spin_operator::<T>(space, SpinOp::X);
    let spin_mix = &sz.scale(lit(theta.cos())) - &sx.scale(lit(theta.sin()));
    let h = &(&n.scale(lit(omega)) - &sz.scale(lit(0.5 * delta_bar)))
        + &(&spin_mix * &x).scale(lit(0.5 * g));
    hermitian(h)
}

/// `ω a†a − (Δ̄/2)σz + g̃(aσ+ + a†σ−)`
pub fn jc_hamiltonian<T: Real>(
    space: HilbertSpace,
    params: &ModelParams,
) -> Result<OperatorMatrix<T>> {
    let d = derive(params, params.omega_m, params.rabi)?;
    Ok(jc_from_symbols(
        space,
        params.omega_m,
        d.delta_bar,
        d.g_tilde,
    ))
}

pub fn jc_from_symbols<T: Real>(
    space: HilbertSpace,
    omega: f64,
    delta_bar: f64,
    g_tilde: f64,
) -> OperatorMatrix<T> {
    let lit = T::lit;
    let a = annihilation::<T>(space);
    let sp = spin_operator::<T>(space, SpinOp::Plus);
    let hop = &a * &sp;
    let hop = &hop + &hop.dagger();
    let h = &(&number::<T>(space).scale(lit(omega))
        - &spin_operator::<T>(space, SpinOp::Z).scale(lit(0.5 * delta_bar)))
        + &hop.scale(lit(g_tilde));
    hermitian(h)
}

/// `|ω − Δ̄| / (ω + Δ̄)`; small values mean the rotating-wave reduction is sound.
pub fn rwa_detuning_ratio(params: &ModelParams) -> Result<f64> {
    let d = derive(params, params.omega_m, params.rabi)?;
    Ok((params.omega_m - d.delta_bar).abs() / (params.omega_m + d.delta_bar))
}

/// `T = U(θ) D(g/ω_m)` with `U(θ) = exp(−i(θ/2)σ_y)` and θ from [`derive`].
pub fn frame_transform<T: Real>(
    space: HilbertSpace,
    params: &ModelParams,
    tol: f64,
) -> Result<OperatorMatrix<T>> {
    let d = derive(params, params.omega_m, params.rabi)?;
    let disp =
        displacement_operator::<T>(space, Complex::new(params.g / params.omega_m, 0.0), tol)?;
    Ok(&spin_rotation_y::<T>(space, d.theta) * &disp)
}

/// Transform that maps the lab Hamiltonian exactly onto the dressed form
/// (up to a constant) under `T H T†`: a spin-independent displacement by
/// −g/(2ω_m), detuning shifted by g²/ω_m instead of 2g²/ω_m, and the
/// rotation `U(−θ')`. Returns the transform with its (Δ̄', θ').
pub fn exact_frame_transform<T: Real>(
    space: HilbertSpace,
    params: &ModelParams,
    tol: f64,
) -> Result<(OperatorMatrix<T>, f64, f64)> {
    let w = params.omega_m;
    let delta = params.detuning - params.g * params.g / w;
    let delta_bar = (delta * delta + 4.0 * params.rabi * params.rabi).sqrt();
    let theta = (-2.0 * params.rabi).atan2(delta);
    let disp = displacement_operator::<T>(space, Complex::new(-0.5 * params.g / w, 0.0), tol)?;
    Ok((
        &spin_rotation_y::<T>(space, -theta) * &disp,
        delta_bar,
        theta,
    ))
}

/// Dressed Hamiltonian built from explicit (Δ̄, θ).
pub fn dressed_hamiltonian_with<T: Real>(
    space: HilbertSpace,
    params: &ModelParams,
    delta_bar: f64,
    theta: f64,
) -> OperatorMatrix<T> {
    dressed_from_symbols(space, params.omega_m, params.g, delta_bar, theta)
}

fn hermitian<T: Real>(h: OperatorMatrix<T>) -> OperatorMatrix<T> {
    h.into_hermitian()
        .expect("Hamiltonian assembled from Hermitian pieces")
}
