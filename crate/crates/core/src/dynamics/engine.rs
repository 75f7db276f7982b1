//! Fixed-step RK4 on the interaction-picture master equation.

use std::f64::consts::PI;

use nalgebra::linalg::Cholesky;
use num_complex::Complex;

use super::{
    apply_pi_pulse, instant_reset, reset_segment, FrequencyRamp, InstantEvent, IntegratorConfig,
    JumpOp, ResetMode, RunDiagnostics, ScheduleItem, Segment, StopCondition, Trajectory,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{czero, CMatrix, Real};
use crate::space::HilbertSpace;
use crate::state::{entropy_of_spectrum, DensityMatrix, Subsystem, POSITIVITY_TOL, TRACE_TOL};
use crate::thermo::ObservableRecord;

/// Entries outside the |0⟩⟨0| block below this count as zero for parking.
const PARK_TOL: f64 = 1e-14;

/// Tolerance floor for scalar types coarser than f64.
fn scaled_tol<T: Real>(tol: f64) -> f64 {
    tol.max(1e3 * T::default_epsilon().as_f64())
}

/// Basis of the evolved sector: the full composite space or, with the spin
/// parked in |0⟩, the mechanics alone.
#[derive(Clone, Debug)]
struct Sector {
    dim: usize,
    mech_dim: usize,
    /// Phonon number per basis index.
    n: Vec<f64>,
    /// Spin block (0 or 1) per basis index.
    s: Vec<f64>,
    parked: bool,
}

impl Sector {
    fn full(space: HilbertSpace) -> Self {
        let m = space.mech_dim();
        let d = space.total_dim();
        Self {
            dim: d,
            mech_dim: m,
            n: (0..d).map(|i| (i % m) as f64).collect(),
            s: (0..d).map(|i| (i / m) as f64).collect(),
            parked: false,
        }
    }

    fn parked(space: HilbertSpace) -> Self {
        let m = space.mech_dim();
        Self {
            dim: m,
            mech_dim: m,
            n: (0..m).map(|i| i as f64).collect(),
            s: vec![0.0; m],
            parked: true,
        }
    }
}

/// Interaction-picture generator on the block structure of the composite
/// space. Only the lower triangle is computed; the upper one is mirrored.
struct Generator<T: Real> {
    dim: usize,
    m: usize,
    parked: bool,
    g: T,
    drive: f64,
    detuning: f64,
    ramp: FrequencyRamp,
    // Lindblad coefficients c of c(2xρx† − x†xρ − ρx†x)
    c_a: T,
    c_ad: T,
    c_minus: T,
    c_plus: T,
    c_z: T,
    /// √n for n = 0..=m.
    sq: Vec<T>,
    /// Mechanical decay c_a·n + c_ad·(a a†)_nn per level.
    cn: Vec<T>,
    coherent_rate: f64,
    fast_rate: f64,
    dissipative_rate: f64,
}

impl<T: Real> Generator<T> {
    fn new(seg: &Segment, sector: &Sector) -> Result<Self> {
        let m = sector.mech_dim;
        if sector.parked && seg.drive_amplitude != 0.0 {
            return Err(Error::Precondition(
                "driven segment cannot run on the parked sector".into(),
            ));
        }
        let (mut c_a, mut c_ad, mut c_minus, mut c_plus, mut c_z) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (op, c) in seg.jumps() {
            match op {
                JumpOp::A => c_a += c,
                JumpOp::ADag => c_ad += c,
                JumpOp::SigmaMinus => c_minus += c,
                JumpOp::SigmaPlus => c_plus += c,
                JumpOp::SigmaZ => c_z += c,
            }
        }
        if sector.parked {
            // σ± and σz act trivially on |0⟩⟨0|
            (c_minus, c_plus, c_z) = (0.0, 0.0, 0.0);
        }
        let n_max = (m - 1) as f64;
        let omega_max = seg.ramp.omega(0.0).max(seg.omega_end());
        let omega_min = seg.ramp.omega(0.0).min(seg.omega_end());
        let (g, drive, det) = if sector.parked {
            (0.0, 0.0, 0.0)
        } else {
            (seg.coupling, seg.drive_amplitude, seg.detuning)
        };

        // ‖H_I‖ by Gershgorin; the commutator's spectrum spans up to 2‖H_I‖.
        // The frame phases add their own rates.
        let h_norm = g.abs() * (n_max.sqrt() + (n_max - 1.0).max(0.0).sqrt()) + drive.abs();
        let mut coherent_rate = 2.0 * h_norm;
        if g != 0.0 {
            coherent_rate = coherent_rate.max(omega_max);
        }
        if drive != 0.0 {
            coherent_rate = coherent_rate.max(det.abs());
        }
        // lab-frame fastest frequency: ω, Δ̄, Ω, Δ. Without coupling or drive
        // the frame generator is constant and ω only enters the exact phase.
        let coherent = g != 0.0 || drive != 0.0;
        let mut fast_rate = if coherent { omega_max } else { 0.0 };
        if coherent {
            let delta = det - 2.0 * g * g / omega_min;
            let delta_bar = (delta * delta + 4.0 * drive * drive).sqrt();
            fast_rate = fast_rate.max(delta_bar).max(drive.abs()).max(det.abs());
        }
        let k_mech = c_a * n_max + c_ad * (n_max + 1.0);
        let k_spin = c_minus.max(c_plus) + c_z;
        let dissipative_rate = 4.0 * (k_mech + k_spin);

        let sq = (0..=m).map(|n| T::lit((n as f64).sqrt())).collect();
        // the truncated a a† vanishes on the top level
        let cn = (0..m)
            .map(|n| T::lit(c_a * n as f64 + c_ad * if n + 1 < m { (n + 1) as f64 } else { 0.0 }))
            .collect();
        Ok(Self {
            dim: sector.dim,
            m,
            parked: sector.parked,
            g: T::lit(g),
            drive,
            detuning: det,
            ramp: seg.ramp,
            c_a: T::lit(c_a),
            c_ad: T::lit(c_ad),
            c_minus: T::lit(c_minus),
            c_plus: T::lit(c_plus),
            c_z: T::lit(c_z),
            sq,
            cn,
            coherent_rate,
            fast_rate,
            dissipative_rate,
        })
    }

    /// `out = L_I(t)[y]`; buffers column-major d×d.
    fn rhs(&self, t: f64, y: &[Complex<T>], out: &mut [Complex<T>]) {
        let (d, m) = (self.dim, self.m);
        let phi = self.ramp.phase(t);
        // e = e^{−iΦ}, c = Ω e^{−iΔt}
        let e = Complex::new(T::lit(phi.cos()), T::lit(-phi.sin()));
        let (sd, cd) = (self.detuning * t).sin_cos();
        let c = Complex::new(T::lit(self.drive * cd), T::lit(-self.drive * sd));
        let i = Complex::new(T::zero(), T::one());
        let two = T::lit(2.0);
        let blocks = if self.parked { 1 } else { 2 };
        let (sq, cn) = (&self.sq, &self.cn);
        let ig = i * self.g;
        let slice = |col: usize, s: usize| &y[col * d + s * m..col * d + s * m + m];

        for tb in 0..blocks {
            for k in 0..m {
                let col = tb * m + k;
                for s in tb..blocks {
                    let n0 = if s == tb { k } else { 0 };
                    let spin_diag = match (s, tb) {
                        (0, 0) => -two * self.c_plus,
                        (1, 1) => -two * self.c_minus,
                        _ => -(self.c_minus + self.c_plus + T::lit(4.0) * self.c_z),
                    };
                    let here = slice(col, s);
                    let o = &mut out[col * d + s * m..col * d + s * m + m];

                    let dk = spin_diag - cn[k];
                    for n in n0..m {
                        o[n] = here[n] * (dk - cn[n]);
                    }
                    // a ρ a† and a† ρ a
                    if k + 1 < m {
                        let u = slice(col + 1, s);
                        let w = two * self.c_a * sq[k + 1];
                        for n in n0..m - 1 {
                            o[n] += u[n + 1] * (w * sq[n + 1]);
                        }
                    }
                    if k >= 1 {
                        let dn = slice(col - 1, s);
                        let w = two * self.c_ad * sq[k];
                        for n in n0.max(1)..m {
                            o[n] += dn[n - 1] * (w * sq[n]);
                        }
                    }
                    if blocks == 1 {
                        continue;
                    }
                    // σ− refills |0⟩⟨0| from |−1⟩⟨−1|, σ+ the reverse
                    if s == tb {
                        let f = slice((1 - s) * m + k, 1 - s);
                        let w = if s == 0 {
                            two * self.c_minus
                        } else {
                            two * self.c_plus
                        };
                        for n in n0..m {
                            o[n] += f[n] * w;
                        }
                    }
                    // drive: −i(Vρ) + i(ρV)
                    let orow = slice(col, 1 - s);
                    let ocol = slice((1 - tb) * m + k, s);
                    let wr = -i * if s == 0 { c } else { c.conj() };
                    let wc = i * if tb == 0 { c.conj() } else { c };
                    for n in n0..m {
                        o[n] += orow[n] * wr + ocol[n] * wc;
                    }
                    // coupling −g(ã + ã†) on |−1⟩, ã = e^{−iΦ}a
                    if s == 1 {
                        let (wu, wd) = (ig * e, ig * e.conj());
                        for n in n0..m - 1 {
                            o[n] += here[n + 1] * wu * sq[n + 1];
                        }
                        for n in n0.max(1)..m {
                            o[n] += here[n - 1] * wd * sq[n];
                        }
                    }
                    if tb == 1 {
                        if k >= 1 {
                            let dn = slice(col - 1, s);
                            let w = -ig * e * sq[k];
                            for n in n0..m {
                                o[n] += dn[n] * w;
                            }
                        }
                        if k + 1 < m {
                            let u = slice(col + 1, s);
                            let w = -ig * e.conj() * sq[k + 1];
                            for n in n0..m {
                                o[n] += u[n] * w;
                            }
                        }
                    }
                }
            }
        }
        // diagonal is real, upper triangle mirrors the lower
        for j in 0..d {
            out[j * d + j].im = T::zero();
            for r in j + 1..d {
                out[r * d + j] = out[j * d + r].conj();
            }
        }
    }
}

/// Step count and size chosen for a segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepPlan {
    pub dt: f64,
    pub steps: usize,
    /// Fastest lab-frame frequency max(ω, Δ̄, Ω, Δ), rad/s.
    pub fast_rate: f64,
    /// Bound on the interaction-picture spectral radius, rad/s.
    pub coherent_rate: f64,
    /// Bound on the largest dissipative rate, 1/s.
    pub dissipative_rate: f64,
    pub parked: bool,
}

/// RK4 stays stable for |λ·dt| below 2√2 on the imaginary axis.
const RK4_STABILITY: f64 = 2.0;

fn plan<T: Real>(duration: f64, gen: &Generator<T>, cfg: &IntegratorConfig) -> (f64, usize) {
    if duration <= 0.0 {
        return (0.0, 0);
    }
    let mut dt = duration;
    if let Some(fixed) = cfg.dt {
        dt = dt.min(fixed);
    } else {
        if gen.fast_rate > 0.0 {
            dt = dt.min(2.0 * PI / (cfg.dt_divisor * gen.fast_rate));
        }
        if gen.coherent_rate > 0.0 {
            dt = dt.min(RK4_STABILITY / gen.coherent_rate);
        }
        if gen.dissipative_rate > 0.0 {
            dt = dt.min(cfg.dissipative_safety / gen.dissipative_rate);
        }
    }
    let steps = (duration / dt).ceil().max(1.0) as usize;
    (duration / steps as f64, steps)
}

/// Step plan the engine would use for `seg` on `space`.
pub fn step_plan(
    seg: &Segment,
    space: HilbertSpace,
    parked: bool,
    cfg: &IntegratorConfig,
) -> Result<StepPlan> {
    let sector = if parked {
        Sector::parked(space)
    } else {
        Sector::full(space)
    };
    let g = Generator::<f64>::new(seg, &sector)?;
    let (dt, steps) = plan(seg.duration, &g, cfg);
    Ok(StepPlan {
        dt,
        steps,
        fast_rate: g.fast_rate,
        coherent_rate: g.coherent_rate,
        dissipative_rate: g.dissipative_rate,
        parked,
    })
}

fn frame_phase(sector: &Sector, ramp: &FrequencyRamp, detuning: f64, t: f64, j: usize) -> f64 {
    sector.n[j] * ramp.phase(t) + detuning * sector.s[j] * t
}

/// Sequential evolution of one state through segments and events.
pub struct Runner<T: Real> {
    state: DensityMatrix<T>,
    cfg: IntegratorConfig,
    clock: f64,
    times: Vec<f64>,
    samples: Vec<ObservableRecord>,
    diag: RunDiagnostics,
    stopped_early: bool,
    context: Option<Segment>,
    omega: f64,
}

impl<T: Real> Runner<T> {
    /// Starts at t = 0; the initial state is recorded when `sample_initial`.
    pub fn new(rho: DensityMatrix<T>, cfg: IntegratorConfig, sample_initial: bool) -> Result<Self> {
        if rho.kind() != Subsystem::Composite {
            return Err(Error::Precondition(
                "evolution needs the composite state".into(),
            ));
        }
        let mut r = Self {
            state: rho,
            cfg,
            clock: 0.0,
            times: vec![],
            samples: vec![],
            diag: RunDiagnostics::default(),
            stopped_early: false,
            context: None,
            omega: f64::NAN,
        };
        if sample_initial {
            let sector = Sector::full(r.state.space());
            let y = r.state.entries().as_slice().to_vec();
            let rec = r.observe(&sector, &y, 0.0, 0.0, f64::NAN)?;
            r.push(rec);
        }
        Ok(r)
    }

    /// Frequency reported by samples taken before the first segment.
    pub fn set_frequency(&mut self, omega: f64) {
        self.omega = omega;
    }

    pub fn state(&self) -> &DensityMatrix<T> {
        &self.state
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn samples(&self) -> &[ObservableRecord] {
        &self.samples
    }

    pub fn diagnostics(&self) -> &RunDiagnostics {
        &self.diag
    }

    pub fn stopped_early(&self) -> bool {
        self.stopped_early
    }

    /// Drops recorded samples (keeps state, clock and diagnostics).
    pub fn clear_samples(&mut self) {
        self.times.clear();
        self.samples.clear();
    }

    /// Records the current state as a sample at the current clock, unless
    /// one already exists at this time.
    pub fn sample_now(&mut self) -> Result<ObservableRecord> {
        let sector = Sector::full(self.state.space());
        let y = self.state.entries().as_slice().to_vec();
        let rec = self.observe(&sector, &y, 0.0, self.clock, self.omega)?;
        if self.times.last().is_none_or(|&t| t < self.clock) {
            self.push(rec);
        }
        Ok(rec)
    }

    pub fn item(&mut self, item: &ScheduleItem) -> Result<()> {
        match item {
            ScheduleItem::Evolve(s) => self.segment(s),
            ScheduleItem::Event(e) => self.event(*e),
        }
    }

    pub fn event(&mut self, e: InstantEvent) -> Result<()> {
        match e {
            InstantEvent::PiPulse => {
                self.state = apply_pi_pulse(&self.state)?;
                Ok(())
            }
            InstantEvent::SpinReset(ResetMode::InstantChannel) => {
                self.state = instant_reset(&self.state)?;
                Ok(())
            }
            InstantEvent::SpinReset(ResetMode::RateIntegration { gamma_gl, duration }) => {
                let ctx = self.context.clone().ok_or_else(|| {
                    Error::Precondition(
                        "rate-integrated reset needs a preceding segment for context".into(),
                    )
                })?;
                self.segment(&reset_segment(&ctx, gamma_gl, duration))
            }
        }
    }

    fn push(&mut self, rec: ObservableRecord) {
        self.times.push(rec.t);
        self.samples.push(rec);
    }

    fn is_parked(&self, seg: &Segment) -> bool {
        if !self.cfg.spin_parking || seg.drive_amplitude != 0.0 {
            return false;
        }
        if seg.jumps().iter().any(|(op, _)| *op == JumpOp::SigmaPlus) {
            return false;
        }
        let m = self.state.space().mech_dim();
        let e = self.state.entries();
        let d = e.nrows();
        for c in 0..d {
            for r in 0..d {
                if (r >= m || c >= m) && crate::scalar::cabs(e[(r, c)]).as_f64() > PARK_TOL {
                    return false;
                }
            }
        }
        true
    }

    pub fn segment(&mut self, seg: &Segment) -> Result<()> {
        seg.validate()?;
        self.context = Some(seg.clone());
        if seg.duration == 0.0 {
            return Ok(());
        }
        let space = self.state.space();
        let parked = self.is_parked(seg);
        let sector = if parked {
            Sector::parked(space)
        } else {
            Sector::full(space)
        };
        let gen = Generator::<T>::new(seg, &sector)?;
        let (dt, steps) = plan(seg.duration, &gen, &self.cfg);
        let d = sector.dim;
        let m = space.mech_dim();

        let mut y: Vec<Complex<T>> = if parked {
            let e = self.state.entries();
            let mut v = Vec::with_capacity(m * m);
            for c in 0..m {
                for r in 0..m {
                    v.push(e[(r, c)]);
                }
            }
            v
        } else {
            self.state.entries().as_slice().to_vec()
        };
        let mut acc = vec![czero(); d * d];
        let mut tmp = vec![czero(); d * d];
        let mut k = vec![czero(); d * d];
        let sixth = T::lit(dt / 6.0);
        let third = T::lit(dt / 3.0);
        let half = T::lit(0.5 * dt);
        let full = T::lit(dt);

        let mut t_local = 0.0;
        let mut stopped = false;
        for step in 0..steps {
            let t = step as f64 * dt;
            gen.rhs(t, &y, &mut k);
            for i in 0..d * d {
                acc[i] = y[i] + k[i] * sixth;
                tmp[i] = y[i] + k[i] * half;
            }
            gen.rhs(t + 0.5 * dt, &tmp, &mut k);
            for i in 0..d * d {
                acc[i] += k[i] * third;
                tmp[i] = y[i] + k[i] * half;
            }
            gen.rhs(t + 0.5 * dt, &tmp, &mut k);
            for i in 0..d * d {
                acc[i] += k[i] * third;
                tmp[i] = y[i] + k[i] * full;
            }
            gen.rhs(t + dt, &tmp, &mut k);
            // decayed coherences would otherwise sink into subnormals
            let floor = T::flush_floor();
            for i in 0..d * d {
                let mut z = acc[i] + k[i] * sixth;
                if z.re.abs() < floor {
                    z.re = T::zero();
                }
                if z.im.abs() < floor {
                    z.im = T::zero();
                }
                y[i] = z;
            }
            t_local = (step + 1) as f64 * dt;
            self.diag.steps += 1;

            if let Some(StopCondition::PhononTarget { target, rel_tol }) = seg.stop {
                let n: f64 = (0..d).map(|j| sector.n[j] * y[j * d + j].re.as_f64()).sum();
                if (n - target).abs() <= rel_tol * target.abs() {
                    stopped = true;
                }
            }
            let last = step + 1 == steps || stopped;
            let due = seg.sample_every > 0 && (step + 1) % seg.sample_every == 0;
            if last || due {
                let omega = seg.ramp.omega(t_local);
                let rec =
                    self.observe_frame(&sector, &y, seg, t_local, self.clock + t_local, omega)?;
                self.push(rec);
            }
            if stopped {
                break;
            }
        }
        if stopped {
            self.stopped_early = true;
        }

        // back to the lab frame
        let mut out = CMatrix::from_element(space.total_dim(), space.total_dim(), czero());
        let theta: Vec<f64> = (0..d)
            .map(|j| frame_phase(&sector, &seg.ramp, seg.detuning, t_local, j))
            .collect();
        for c in 0..d {
            for r in 0..d {
                let ph = theta[c] - theta[r];
                let (s, co) = ph.sin_cos();
                out[(r, c)] = y[c * d + r] * Complex::new(T::lit(co), T::lit(s));
            }
        }
        if parked {
            self.diag.parked_segments += 1;
        }
        self.state = DensityMatrix::from_parts(space, Subsystem::Composite, out);
        self.clock += t_local;
        self.omega = seg.ramp.omega(t_local);
        Ok(())
    }

    fn observe_frame(
        &mut self,
        sector: &Sector,
        y: &[Complex<T>],
        seg: &Segment,
        t_local: f64,
        t_abs: f64,
        omega: f64,
    ) -> Result<ObservableRecord> {
        let _ = seg;
        self.observe(sector, y, seg.ramp.phase(t_local), t_abs, omega)
    }

    /// Observables of an interaction-frame state `y`; `phi` is the phonon
    /// phase ∫ω accumulated in the frame.
    fn observe(
        &mut self,
        sector: &Sector,
        y: &[Complex<T>],
        phi: f64,
        t_abs: f64,
        omega: f64,
    ) -> Result<ObservableRecord> {
        let d = sector.dim;
        let m = sector.mech_dim;
        let at = |r: usize, c: usize| y[c * d + r];
        let mut tr = 0.0;
        let mut n_mean = 0.0;
        let mut sz = 0.0;
        let mut a_frame = Complex::new(0.0, 0.0);
        let mut pops = vec![0.0; m];
        for j in 0..d {
            let p = at(j, j).re.as_f64();
            tr += p;
            n_mean += sector.n[j] * p;
            sz += if sector.s[j] == 0.0 { p } else { -p };
            pops[j % m] += p;
            if j % m >= 1 {
                let z = at(j, j - 1);
                a_frame += Complex::new(z.re.as_f64(), z.im.as_f64()) * sector.n[j].sqrt();
            }
        }
        let a = a_frame * Complex::new(phi.cos(), -phi.sin());
        let trace_error = (Complex::new(tr, 0.0)
            - Complex::new(1.0, (0..d).map(|j| at(j, j).im.as_f64()).sum::<f64>()))
        .norm();
        let top: f64 = pops.iter().rev().take(2).sum();

        self.diag.max_trace_error = self.diag.max_trace_error.max(trace_error);
        self.diag.max_top_population = self.diag.max_top_population.max(top);
        if trace_error > scaled_tol::<T>(TRACE_TOL) {
            return Err(Error::Invariant(format!(
                "trace drifted by {trace_error:.3e} at t = {t_abs:.6e} s"
            )));
        }
        if top > self.cfg.truncation_tol {
            return Err(Error::Truncation {
                population: top,
                tolerance: self.cfg.truncation_tol,
                cutoff: m - 1,
            });
        }
        let mat = CMatrix::from_column_slice(d, d, y);
        if self.cfg.check_positivity {
            self.diag.positivity_checks += 1;
            let shifted = &mat + CMatrix::<T>::identity(d, d).map(|z| z * T::lit(POSITIVITY_TOL));
            if Cholesky::new(shifted).is_none() {
                let min = linalg::hermitian_eigenvalues(&mat)
                    .first()
                    .map(|x| x.as_f64())
                    .unwrap_or(0.0);
                self.diag.min_eigenvalue = self.diag.min_eigenvalue.min(min);
                if min < -scaled_tol::<T>(POSITIVITY_TOL) {
                    return Err(Error::Invariant(format!(
                        "negative eigenvalue {min:.3e} at t = {t_abs:.6e} s"
                    )));
                }
            }
        }
        let entropy = if self.cfg.record_entropy {
            let red = if sector.parked {
                mat
            } else {
                CMatrix::from_fn(m, m, |r, c| mat[(r, c)] + mat[(m + r, m + c)])
            };
            let red = (&red + red.adjoint()).map(|z| z * T::lit(0.5));
            // integrator round-off may leave eigenvalues slightly below zero;
            // positivity proper is policed above
            let floor = -scaled_tol::<T>(POSITIVITY_TOL);
            let eig: Vec<f64> = linalg::hermitian_eigenvalues(&red)
                .into_iter()
                .map(|x| x.as_f64())
                .map(|x| if x < 0.0 && x >= floor { 0.0 } else { x })
                .collect();
            entropy_of_spectrum(&eig)?
        } else {
            f64::NAN
        };
        Ok(ObservableRecord {
            t: t_abs,
            omega,
            n_mean,
            re_a: a.re,
            im_a: a.im,
            n_fluct: n_mean - a.norm_sqr(),
            sigma_z: sz,
            z_over_zpf: std::f64::consts::SQRT_2 * a.re,
            trace: tr,
            entropy,
        })
    }

    /// Final exact checks and the assembled trajectory.
    pub fn finish(mut self) -> Result<Trajectory<T>> {
        let min = self.state.min_eigenvalue();
        self.diag.min_eigenvalue = self.diag.min_eigenvalue.min(min);
        self.diag.max_hermiticity_error = self
            .diag
            .max_hermiticity_error
            .max(self.state.hermiticity_error());
        if min < -scaled_tol::<T>(POSITIVITY_TOL) {
            return Err(Error::Invariant(format!(
                "final state has eigenvalue {min:.3e}"
            )));
        }
        Ok(Trajectory {
            times: self.times,
            samples: self.samples,
            final_state: self.state,
            diagnostics: self.diag,
            stopped_early: self.stopped_early,
        })
    }

    /// Current state without final checks (for long protocols that keep
    /// running).
    pub fn into_parts(self) -> (DensityMatrix<T>, Vec<ObservableRecord>, RunDiagnostics) {
        (self.state, self.samples, self.diag)
    }
}

#[cfg(test)]
pub(super) fn interaction_rhs_at_zero<T: Real>(
    seg: &Segment,
    rho: &DensityMatrix<T>,
) -> Result<CMatrix<T>> {
    let sector = Sector::full(rho.space());
    let g = Generator::<T>::new(seg, &sector)?;
    let d = sector.dim;
    let mut out = vec![czero(); d * d];
    g.rhs(0.0, rho.entries().as_slice(), &mut out);
    Ok(CMatrix::from_column_slice(d, d, &out))
}
