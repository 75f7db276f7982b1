use std::f64::consts::PI;

use num_complex::Complex;

use super::*;
use crate::model::{lab_hamiltonian_terms, LabTerms};
use crate::operator::{basis_ket, number};
use crate::scalar::max_abs;
use crate::space::{make_space, SpinLevel};
use crate::state::{expectation, product_state, thermal_mechanics, thermal_state, trace_distance};

fn wm() -> f64 {
    2.0 * PI * 50.0
}

fn random_state(space: HilbertSpace, seed: u64) -> DensityMatrix<f64> {
    let mut s = seed;
    let mut next = || {
        s = s
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
    };
    let d = space.total_dim();
    let g = CMatrix::<f64>::from_fn(d, d, |_, _| Complex::new(next(), next()));
    let r = &g * g.adjoint();
    let tr = r.trace().re;
    DensityMatrix::new(space, Subsystem::Composite, r.map(|z| z / tr)).unwrap()
}

fn all_channels(n_th: f64) -> Vec<DissipatorSpec> {
    vec![
        DissipatorSpec::on(DissipatorKind::MechanicalThermal { rate: 3.0, n_th }),
        DissipatorSpec::on(DissipatorKind::SpinDamping {
            rate: 5.0,
            n_bath: 0.3,
        }),
        DissipatorSpec::on(DissipatorKind::SpinDephasing { rate: 7.0 }),
        DissipatorSpec::on(DissipatorKind::GreenReset { rate: 11.0 }),
    ]
}

#[test]
fn interaction_rhs_matches_dense_reference_at_frame_origin() {
    let sp = make_space(6).unwrap();
    let rho = random_state(sp, 3);
    let terms = LabTerms {
        omega: 13.0,
        detuning: 4.0,
        coupling: 2.5,
        drive: 1.7,
    };
    let mut seg = Segment::new(1.0, FrequencyRamp::constant(terms.omega))
        .with_detuning(terms.detuning)
        .with_coupling(terms.coupling)
        .with_drive(terms.drive);
    seg.dissipators = all_channels(0.8);
    let h = lab_hamiltonian_terms::<f64>(sp, &terms);
    let reference = lindblad_rhs(&h, &seg.dissipators, &rho).unwrap();
    // add back the free part removed by the frame
    let h0 = lab_hamiltonian_terms::<f64>(
        sp,
        &LabTerms {
            coupling: 0.0,
            drive: 0.0,
            ..terms
        },
    );
    let r = rho.entries();
    let free = (h0.entries() * r - r * h0.entries()).map(|z| z * Complex::new(0.0, -1.0));
    let fast = engine::interaction_rhs_at_zero(&seg, &rho).unwrap() + free;
    assert!(max_abs(&(fast - &reference)) < 1e-12 * max_abs(&reference).max(1.0));
}

#[test]
fn zero_generator_gives_zero() {
    let sp = make_space(3).unwrap();
    let rho = random_state(sp, 5);
    let h = OperatorMatrix::<f64>::zeros(sp);
    let out = lindblad_rhs(&h, &[], &rho).unwrap();
    assert_eq!(max_abs(&out), 0.0);
}

#[test]
fn rhs_is_traceless_and_hermitian() {
    let sp = make_space(5).unwrap();
    let rho = random_state(sp, 9);
    let h = lab_hamiltonian_terms::<f64>(
        sp,
        &LabTerms {
            omega: 2.0,
            detuning: 1.0,
            coupling: 0.7,
            drive: 0.3,
        },
    );
    let out = lindblad_rhs(&h, &all_channels(1.5), &rho).unwrap();
    assert!(out.trace().norm() < 1e-12);
    assert!(crate::scalar::hermiticity_error(&out) < 1e-12);
}

#[test]
fn thermal_rate_equation_on_diagonal_state() {
    // d⟨n⟩/dt = −γ(⟨n⟩ − n̄) for a diagonal ρ with an empty top level
    let sp = make_space(20).unwrap();
    let m = thermal_mechanics::<f64>(sp, 1.3, 1e-3).unwrap();
    let mut e = m.entries().clone();
    let top = e[(20, 20)];
    e[(20, 20)] = Complex::new(0.0, 0.0);
    e[(0, 0)] += top;
    let m = DensityMatrix::new(sp, Subsystem::Mechanics, e).unwrap();
    let rho = product_state(&m, SpinLevel::Zero).unwrap();
    let (gamma, nth) = (0.37, 2.2);
    let diss = [DissipatorSpec::on(DissipatorKind::MechanicalThermal {
        rate: gamma,
        n_th: nth,
    })];
    let d = lindblad_rhs(&OperatorMatrix::zeros(sp), &diss, &rho).unwrap();
    let nop = number::<f64>(sp);
    let dn = crate::state::trace_product(nop.entries(), &d).re;
    let n = expectation(&nop, &rho).unwrap().re;
    assert!((dn + gamma * (n - nth)).abs() < 1e-12);
}

fn cfg() -> IntegratorConfig {
    IntegratorConfig::default()
}

/// N = 1 spaces exist only to host the spin; the Fock tail check is moot.
fn spin_only() -> IntegratorConfig {
    IntegratorConfig {
        truncation_tol: f64::INFINITY,
        ..cfg()
    }
}

#[test]
fn damped_oscillator_follows_exponential() {
    let sp = make_space(40).unwrap();
    let (n0, nth, gamma) = (1.0, 0.4, wm() / 1e4);
    let rho = thermal_state::<f64>(sp, n0, 1e-6).unwrap();
    let n_start = expectation(&number(sp), &rho).unwrap().re;
    let seg = Segment::new(3.0 / gamma, FrequencyRamp::constant(wm()))
        .with_dissipator(DissipatorKind::MechanicalThermal {
            rate: gamma,
            n_th: nth,
        })
        .sampled(50);
    let tr = evolve_segment(&rho, &seg, &cfg()).unwrap();
    assert!(tr.samples.len() > 5);
    for r in &tr.samples {
        let want = nth + (n_start - nth) * (-gamma * r.t).exp();
        assert!(
            (r.n_mean - want).abs() <= 1e-6 * want,
            "t={} {} vs {}",
            r.t,
            r.n_mean,
            want
        );
    }
    assert!(tr.diagnostics.parked_segments == 1);
}

#[test]
fn parked_and_full_evolutions_agree() {
    let sp = make_space(45).unwrap();
    let rho = thermal_state::<f64>(sp, 1.5, 1e-6).unwrap();
    let seg = Segment::new(2.0, FrequencyRamp::linear(wm(), 0.7 * wm(), 2.0))
        .with_coupling(0.3 * wm())
        .with_detuning(wm())
        .with_dissipator(DissipatorKind::MechanicalThermal {
            rate: 0.5,
            n_th: 1.0,
        })
        .with_dissipator(DissipatorKind::SpinDephasing { rate: 3.0 });
    let parked = evolve_segment(&rho, &seg, &cfg()).unwrap();
    let full = evolve_segment(
        &rho,
        &seg,
        &IntegratorConfig {
            spin_parking: false,
            ..cfg()
        },
    )
    .unwrap();
    assert_eq!(parked.diagnostics.parked_segments, 1);
    assert_eq!(full.diagnostics.parked_segments, 0);
    let diff = max_abs(&(parked.final_state.entries() - full.final_state.entries()));
    assert!(diff < 1e-9, "{diff}");
}

#[test]
fn rabi_oscillation() {
    let sp = make_space(1).unwrap();
    let rho = thermal_state::<f64>(sp, 0.0, 1.0).unwrap();
    let omega = 2.0 * PI * 1e3;
    let periods = 10.0;
    let seg = Segment::new(periods * PI / omega, FrequencyRamp::constant(wm()))
        .with_drive(omega)
        .sampled(7);
    let tr = evolve_segment(
        &rho,
        &seg,
        &IntegratorConfig {
            dt_divisor: 200.0,
            ..spin_only()
        },
    )
    .unwrap();
    for r in &tr.samples {
        assert!(
            (r.sigma_z - (2.0 * omega * r.t).cos()).abs() < 1e-6,
            "t={}",
            r.t
        );
    }
}

#[test]
fn rk4_convergence_order_on_rabi() {
    let sp = make_space(1).unwrap();
    let rho = thermal_state::<f64>(sp, 0.0, 1.0).unwrap();
    let omega = 1.0;
    let t = 3.0;
    let err = |dt: f64| {
        let seg = Segment::new(t, FrequencyRamp::constant(1.0)).with_drive(omega);
        let tr = evolve_segment(
            &rho,
            &seg,
            &IntegratorConfig {
                dt: Some(dt),
                ..spin_only()
            },
        )
        .unwrap();
        (tr.last().unwrap().sigma_z - (2.0 * omega * t).cos()).abs()
    };
    let (e1, e2) = (err(0.1), err(0.05));
    let order = (e1 / e2).log2();
    assert!((order - 4.0).abs() < 0.5, "order {order}");
}

#[test]
fn purity_conserved_without_dissipation() {
    let sp = make_space(12).unwrap();
    let d =
        crate::operator::displacement_operator::<f64>(sp, Complex::new(0.6, 0.2), 1e-6).unwrap();
    let ket = d.entries() * basis_ket::<f64>(sp.total_dim(), 0);
    let rho = DensityMatrix::pure(sp, Subsystem::Composite, &ket).unwrap();
    let rho = apply_pi_pulse(&rho).unwrap();
    let seg = Segment::new(0.01, FrequencyRamp::constant(wm()))
        .with_coupling(0.2 * wm())
        .with_detuning(2.0 * wm())
        .with_drive(0.4 * wm());
    // a pure state sits on the positivity boundary, so RK4 error shows up
    // directly as negative eigenvalues; resolve it well below 1e-8
    let tr = evolve_segment(
        &rho,
        &seg,
        &IntegratorConfig {
            dt_divisor: 400.0,
            ..cfg()
        },
    )
    .unwrap();
    assert!((tr.final_state.purity() - 1.0).abs() < 1e-8);
}

#[test]
fn zero_duration_is_identity() {
    let sp = make_space(4).unwrap();
    let rho = random_state(sp, 1);
    let seg = Segment::new(0.0, FrequencyRamp::constant(1.0)).with_drive(3.0);
    let tr = evolve_segment(&rho, &seg, &spin_only()).unwrap();
    assert_eq!(tr.final_state.entries(), rho.entries());
}

#[test]
fn pi_pulse_properties() {
    let sp = make_space(30).unwrap();
    let rho = thermal_state::<f64>(sp, 2.0, 1e-4).unwrap();
    let flipped = apply_pi_pulse(&rho).unwrap();
    let m = sp.mech_dim();
    let spin = partial_trace(&flipped, Subsystem::Spin).unwrap();
    assert!((spin.entries()[(1, 1)].re - 1.0).abs() < 1e-14);
    let mech_before = partial_trace(&rho, Subsystem::Mechanics).unwrap();
    let mech_after = partial_trace(&flipped, Subsystem::Mechanics).unwrap();
    assert_eq!(mech_before.entries(), mech_after.entries());
    assert!(flipped.entries()[(0, 0)].norm() == 0.0 && flipped.entries()[(m, m)].re > 0.0);
    let back = apply_pi_pulse(&flipped).unwrap();
    assert_eq!(back.entries(), rho.entries());
    // agrees with conjugation by the unitary −iσx
    let u = crate::operator::pi_pulse_unitary::<f64>(sp);
    let conj = u.entries() * rho.entries() * u.entries().adjoint();
    assert!(max_abs(&(conj - flipped.entries())) < 1e-15);
}

#[test]
fn instant_reset_cases() {
    let sp = make_space(10).unwrap();
    let m = thermal_mechanics::<f64>(sp, 0.5, 1e-3).unwrap();
    let up = product_state(&m, SpinLevel::Zero).unwrap();
    assert_eq!(instant_reset(&up).unwrap().entries(), up.entries());
    let down = product_state(&m, SpinLevel::MinusOne).unwrap();
    assert!(max_abs(&(instant_reset(&down).unwrap().entries() - up.entries())) < 1e-15);
}

#[test]
fn rate_integrated_reset_decay() {
    let sp = make_space(3).unwrap();
    let m = thermal_mechanics::<f64>(sp, 0.0, 1.0).unwrap();
    let down = product_state(&m, SpinLevel::MinusOne).unwrap();
    let ctx = Segment::new(1.0, FrequencyRamp::constant(wm()));
    let (gamma, t) = (1e5, 5e-5);
    let tr = apply_spin_reset(
        &down,
        ResetMode::RateIntegration {
            gamma_gl: gamma,
            duration: t,
        },
        &ctx,
        &cfg(),
    )
    .unwrap();
    let p_exc = partial_trace(&tr.final_state, Subsystem::Spin)
        .unwrap()
        .entries()[(1, 1)]
        .re;
    assert!((p_exc - (-gamma * t).exp()).abs() < 1e-4, "{p_exc}");
    let instant = instant_reset(&down).unwrap();
    let td = trace_distance(&tr.final_state, &instant).unwrap();
    assert!(td <= 2.0 * (-gamma * t).exp());
    // longer pulse converges further
    let tr2 = apply_spin_reset(
        &down,
        ResetMode::RateIntegration {
            gamma_gl: gamma,
            duration: 3.0 * t,
        },
        &ctx,
        &cfg(),
    )
    .unwrap();
    assert!(trace_distance(&tr2.final_state, &instant).unwrap() <= 2.0 * (-3.0 * gamma * t).exp());
}

#[test]
fn schedule_composition() {
    let sp = make_space(20).unwrap();
    let rho = thermal_state::<f64>(sp, 0.3, 1e-3).unwrap();
    let seg = Segment::new(0.003, FrequencyRamp::constant(wm()))
        .with_coupling(0.1 * wm())
        .with_drive(0.2 * wm())
        .sampled(5);
    // the |−1⟩ block starts empty, so the state is rank deficient
    let fine = IntegratorConfig {
        dt_divisor: 200.0,
        ..cfg()
    };
    let single = evolve_segment(&rho, &seg, &fine).unwrap();
    let mut s = PulseSchedule::new();
    s.push_segment(seg.clone());
    let sched = run_schedule(&rho, &s, &fine).unwrap();
    assert_eq!(single.final_state.entries(), sched.final_state.entries());
    assert_eq!(single.times, sched.times);

    let mut s = PulseSchedule::new();
    s.push_event(InstantEvent::PiPulse)
        .push_segment(Segment::new(0.0, FrequencyRamp::constant(wm())));
    let t = run_schedule(&rho, &s, &cfg()).unwrap();
    assert_eq!(
        t.final_state.entries(),
        apply_pi_pulse(&rho).unwrap().entries()
    );
    assert!(run_schedule(&rho, &PulseSchedule::new(), &cfg()).is_err());
}

#[test]
fn battery_cell_tracks_displaced_oscillator() {
    // |−1⟩ drives a(t) = a₀e^{−iωt} + (g/ω)(1 − e^{−iωt})
    let sp = make_space(30).unwrap();
    let rho = thermal_state::<f64>(sp, 0.0, 1e-6).unwrap();
    let w = wm();
    let g = 0.3 * w;
    let tau1 = 0.3 * 2.0 * PI / w;
    let mut s = PulseSchedule::new();
    s.push_event(InstantEvent::PiPulse)
        .push_segment(
            Segment::new(tau1, FrequencyRamp::constant(w))
                .with_coupling(g)
                .sampled(3),
        )
        .push_event(InstantEvent::SpinReset(ResetMode::InstantChannel))
        .push_segment(
            Segment::new(2.0 * PI / w - tau1, FrequencyRamp::constant(w))
                .with_coupling(g)
                .sampled(3),
        );
    let tr = run_schedule(
        &rho,
        &s,
        &IntegratorConfig {
            dt_divisor: 400.0,
            ..cfg()
        },
    )
    .unwrap();
    assert!(tr.times.windows(2).all(|p| p[0] < p[1]));
    for r in tr
        .samples
        .iter()
        .filter(|r| r.t > 0.0 && r.t <= tau1 + 1e-12)
    {
        let want =
            Complex::new(g / w, 0.0) * (Complex::new(1.0, 0.0) - Complex::new(0.0, -w * r.t).exp());
        assert!(
            (Complex::new(r.re_a, r.im_a) - want).norm() < 1e-6,
            "t={}",
            r.t
        );
    }
    // after the reset the amplitude rotates freely and completes the period
    let alpha1 =
        Complex::new(g / w, 0.0) * (Complex::new(1.0, 0.0) - Complex::new(0.0, -w * tau1).exp());
    let end = tr.last().unwrap();
    let want = alpha1 * Complex::new(0.0, -w * (2.0 * PI / w - tau1)).exp();
    assert!((Complex::new(end.re_a, end.im_a) - want).norm() < 1e-6);
}

#[test]
fn truncation_breach_is_reported() {
    let sp = make_space(6).unwrap();
    let rho = thermal_state::<f64>(sp, 0.0, 1.0).unwrap();
    let rho = apply_pi_pulse(&rho).unwrap();
    let seg = Segment::new(PI / wm(), FrequencyRamp::constant(wm())).with_coupling(1.5 * wm());
    let err = evolve_segment(&rho, &seg, &cfg()).unwrap_err();
    assert!(matches!(err, Error::Truncation { cutoff: 6, .. }));
}

#[test]
fn single_precision_evolution() {
    let sp = make_space(1).unwrap();
    let rho = crate::state::thermal_state::<f32>(sp, 0.0, 1.0).unwrap();
    let seg = Segment::new(1.0, FrequencyRamp::constant(1.0)).with_drive(1.0);
    let tr = evolve_segment(
        &rho,
        &seg,
        &IntegratorConfig {
            dt: Some(0.01),
            ..spin_only()
        },
    )
    .unwrap();
    assert!((tr.last().unwrap().sigma_z - 2f64.cos()).abs() < 1e-5);
}
