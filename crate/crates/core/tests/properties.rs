use approx::assert_relative_eq;
use num_complex::Complex;
use proptest::prelude::*;
use spinmech::dynamics::{lindblad_rhs, DissipatorKind, DissipatorSpec};
use spinmech::state::thermal_populations;
use spinmech::thermo::{bose_occupation, effective_temperature};
use spinmech::{
    annihilation, make_space, number, spin_operator, DensityMatrix, Matrix, Operator, SpinOp,
    Subsystem,
};

const N: usize = 6;

fn random_density(seed: &[f64]) -> DensityMatrix<f64> {
    let space = make_space(N).unwrap();
    let d = space.total_dim();
    let m = Matrix::from_fn(d, d, |r, c| {
        let k = 2 * (r * d + c);
        Complex::new(seed[k % seed.len()], seed[(k + 1) % seed.len()])
    });
    let mut rho = &m * m.adjoint();
    let tr = rho.trace();
    rho /= tr;
    DensityMatrix::new(space, Subsystem::Composite, rho).unwrap()
}

fn hamiltonian(omega: f64, g: f64, drive: f64, det: f64) -> Operator {
    let space = make_space(N).unwrap();
    let a = annihilation::<f64>(space);
    let x = a.entries() + a.entries().adjoint();
    let sz = spin_operator::<f64>(space, SpinOp::Z);
    let h = number::<f64>(space).entries().scale(omega)
        + (&x * sz.entries()).scale(g)
        + spin_operator::<f64>(space, SpinOp::X)
            .entries()
            .scale(drive)
        + sz.entries().scale(det);
    Operator::new(space, h, true).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generator_is_traceless_and_hermitian(
        seed in prop::collection::vec(-1.0f64..1.0, 16..64),
        omega in 0.1f64..5.0,
        g in -2.0f64..2.0,
        drive in -2.0f64..2.0,
        det in -3.0f64..3.0,
        gm in 0.0f64..1.0,
        n_th in 0.0f64..4.0,
        g1 in 0.0f64..1.0,
        g2 in 0.0f64..1.0,
    ) {
        prop_assume!(seed.iter().any(|x| x.abs() > 1e-3));
        let rho = random_density(&seed);
        let h = hamiltonian(omega, g, drive, det);
        let diss = [
            DissipatorSpec::on(DissipatorKind::MechanicalThermal { rate: gm, n_th }),
            DissipatorSpec::on(DissipatorKind::SpinDamping { rate: g1, n_bath: 0.3 }),
            DissipatorSpec::on(DissipatorKind::SpinDephasing { rate: g2 }),
            DissipatorSpec::on(DissipatorKind::GreenReset { rate: 0.5 }),
        ];
        let d = lindblad_rhs(&h, &diss, &rho).unwrap();
        let scale = 1.0 + omega * N as f64 + g.abs() * 8.0 + drive.abs() + det.abs() + gm * (n_th + 1.0) * N as f64;
        prop_assert!(d.trace().norm() < 1e-12 * scale);
        prop_assert!((&d - d.adjoint()).norm() < 1e-12 * scale);
    }

    #[test]
    fn thermal_populations_normalise(n_bar in 0.0f64..5.0) {
        let p = thermal_populations(n_bar, 200);
        let total: f64 = p.iter().sum();
        let mean: f64 = p.iter().enumerate().map(|(n, x)| n as f64 * x).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        assert_relative_eq!(mean, n_bar, epsilon = 1e-9, max_relative = 1e-9);
        prop_assert!(p.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn temperature_inverts_occupation(n_bar in 1e-6f64..1e4, omega in 1.0f64..1e6) {
        let t = effective_temperature(n_bar, omega).unwrap();
        assert_relative_eq!(bose_occupation(t.reduced), n_bar, max_relative = 1e-10);
        // k_B T/ħω = 1/ln(1 + 1/n̄); the direct log loses about n̄·ε
        assert_relative_eq!(t.reduced * (1.0 + 1.0 / n_bar).ln(), 1.0, max_relative = 1e-10);
    }

    #[test]
    fn temperature_rises_with_occupation(a in 1e-4f64..100.0, b in 1e-4f64..100.0) {
        prop_assume!((a - b).abs() > 1e-9);
        let ta = effective_temperature(a, 1.0).unwrap().kelvin;
        let tb = effective_temperature(b, 1.0).unwrap().kelvin;
        prop_assert_eq!(a < b, ta < tb);
    }
}

#[test]
fn zero_occupation_is_zero_temperature() {
    let t = effective_temperature(0.0, 3.0).unwrap();
    assert_eq!(t.kelvin, 0.0);
    assert!(t.beta_h_omega.is_infinite());
    assert_eq!(bose_occupation(0.0), 0.0);
    assert!(effective_temperature(-1.0, 3.0).is_err());
}
