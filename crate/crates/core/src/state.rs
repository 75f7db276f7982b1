//! Density matrices and state-level quantities: thermal states, expectation
//! values, partial traces, entropy and fidelity.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::OperatorMatrix;
use crate::scalar::{czero, hermiticity_error, CMatrix, Real};
use crate::space::{HilbertSpace, SpinLevel};

pub const HERMITIAN_STATE_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;
pub const POSITIVITY_TOL: f64 = 1e-8;
/// Eigenvalues in `[-ENTROPY_CLAMP, 0]` count as zero in the entropy.
pub const ENTROPY_CLAMP: f64 = 1e-10;
const EXPECTATION_IMAG_TOL: f64 = 1e-8;

/// Which factor a density matrix lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subsystem {
    Composite,
    Mechanics,
    Spin,
}

impl Subsystem {
    pub fn dim(self, space: &HilbertSpace) -> usize {
        match self {
            Subsystem::Composite => space.total_dim(),
            Subsystem::Mechanics => space.mech_dim(),
            Subsystem::Spin => space.spin_dim(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T: Real> {
    space: HilbertSpace,
    kind: Subsystem,
    entries: CMatrix<T>,
}

/// Scalar health report of a state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateDiagnostics {
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
    pub top_population: f64,
}

impl<T: Real> DensityMatrix<T> {
    /// Validated constructor: dimension, Hermiticity and unit trace.
    pub fn new(space: HilbertSpace, kind: Subsystem, entries: CMatrix<T>) -> Result<Self> {
        let d = kind.dim(&space);
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: entries.nrows(),
            });
        }
        let rho = Self {
            space,
            kind,
            entries,
        };
        let h = rho.hermiticity_error();
        if h > HERMITIAN_STATE_TOL {
            return Err(Error::Invariant(format!(
                "density matrix not Hermitian: {h:.3e}"
            )));
        }
        let t = rho.trace_error();
        if t > TRACE_TOL {
            return Err(Error::Invariant(format!(
                "density matrix trace off by {t:.3e}"
            )));
        }
        Ok(rho)
    }

    pub(crate) fn from_parts(space: HilbertSpace, kind: Subsystem, entries: CMatrix<T>) -> Self {
        debug_assert_eq!(entries.nrows(), kind.dim(&space));
        Self {
            space,
            kind,
            entries,
        }
    }

    /// `|ψ⟩⟨ψ|` for a normalised column vector.
    pub fn pure(space: HilbertSpace, kind: Subsystem, ket: &CMatrix<T>) -> Result<Self> {
        Self::new(space, kind, ket * ket.adjoint())
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn kind(&self) -> Subsystem {
        self.kind
    }

    pub fn entries(&self) -> &CMatrix<T> {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix<T> {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> Complex<T> {
        self.entries.trace()
    }

    pub fn trace_error(&self) -> f64 {
        crate::scalar::cabs(self.trace() - Complex::new(T::one(), T::zero())).as_f64()
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.entries)
    }

    /// Hermitian part, used before eigen-decomposition.
    fn hermitian_part(&self) -> CMatrix<T> {
        let half = T::lit(0.5);
        (&self.entries + self.entries.adjoint()).map(|z| z * half)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.hermitian_part())
            .into_iter()
            .map(|x| x.as_f64())
            .collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn purity(&self) -> f64 {
        // Tr ρ² = Σ |ρ_ij|² for Hermitian ρ
        self.entries.iter().map(|z| z.norm_sqr().as_f64()).sum()
    }

    /// Diagonal of the mechanical reduced state (phonon distribution).
    pub fn phonon_distribution(&self) -> Vec<f64> {
        let m = self.space.mech_dim();
        match self.kind {
            Subsystem::Spin => vec![],
            Subsystem::Mechanics => (0..m).map(|n| self.entries[(n, n)].re.as_f64()).collect(),
            Subsystem::Composite => (0..m)
                .map(|n| (self.entries[(n, n)].re + self.entries[(m + n, m + n)].re).as_f64())
                .collect(),
        }
    }

    /// Combined population of the two highest Fock levels.
    pub fn top_population(&self) -> f64 {
        let p = self.phonon_distribution();
        p.iter().rev().take(2).sum()
    }

    /// Errors when the top-two-level population exceeds `tol`.
    pub fn check_truncation(&self, tol: f64) -> Result<()> {
        let pop = self.top_population();
        if pop > tol {
            return Err(Error::Truncation {
                population: pop,
                tolerance: tol,
                cutoff: self.space.fock_cutoff(),
            });
        }
        Ok(())
    }

    pub fn diagnostics(&self) -> StateDiagnostics {
        StateDiagnostics {
            trace_error: self.trace_error(),
            hermiticity_error: self.hermiticity_error(),
            min_eigenvalue: self.min_eigenvalue(),
            top_population: self.top_population(),
        }
    }

    /// Full invariant check: Hermiticity, trace, positivity and truncation.
    pub fn check_invariants(&self, truncation_tol: f64) -> Result<StateDiagnostics> {
        let d = self.diagnostics();
        if d.hermiticity_error > HERMITIAN_STATE_TOL {
            return Err(Error::Invariant(format!(
                "Hermiticity error {:.3e}",
                d.hermiticity_error
            )));
        }
        if d.trace_error > TRACE_TOL {
            return Err(Error::Invariant(format!(
                "trace error {:.3e}",
                d.trace_error
            )));
        }
        if d.min_eigenvalue < -POSITIVITY_TOL {
            return Err(Error::Invariant(format!(
                "negative eigenvalue {:.3e}",
                d.min_eigenvalue
            )));
        }
        if self.kind != Subsystem::Spin {
            self.check_truncation(truncation_tol)?;
        }
        Ok(d)
    }
}

/// Normalised Boltzmann weights `p_n ∝ (n̄/(n̄+1))^n` over `dim` levels.
pub fn thermal_populations(n_bar: f64, dim: usize) -> Vec<f64> {
    if n_bar == 0.0 {
        let mut p = vec![0.0; dim];
        p[0] = 1.0;
        return p;
    }
    let q = n_bar / (n_bar + 1.0);
    let mut p: Vec<f64> = (0..dim).map(|n| q.powi(n as i32)).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    p
}

fn validate_n_bar(n_bar: f64) -> Result<()> {
    if !(n_bar >= 0.0 && n_bar.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "thermal occupation must be ≥ 0, got {n_bar}"
        )));
    }
    Ok(())
}

/// Thermal mechanical state on its own factor.
pub fn thermal_mechanics<T: Real>(
    space: HilbertSpace,
    n_bar: f64,
    tol: f64,
) -> Result<DensityMatrix<T>> {
    validate_n_bar(n_bar)?;
    let p = thermal_populations(n_bar, space.mech_dim());
    let rho = DensityMatrix::from_parts(
        space,
        Subsystem::Mechanics,
        linalg::diag_real(&p.iter().map(|&x| T::lit(x)).collect::<Vec<_>>()),
    );
    rho.check_truncation(tol)?;
    Ok(rho)
}

/// `ρ_th(n̄) ⊗ |0⟩⟨0|_s`
pub fn thermal_state<T: Real>(
    space: HilbertSpace,
    n_bar: f64,
    tol: f64,
) -> Result<DensityMatrix<T>> {
    let m = thermal_mechanics::<T>(space, n_bar, tol)?;
    product_state(&m, SpinLevel::Zero)
}

/// `ρ_m ⊗ |s⟩⟨s|`
pub fn product_state<T: Real>(
    mech: &DensityMatrix<T>,
    spin: SpinLevel,
) -> Result<DensityMatrix<T>> {
    if mech.kind != Subsystem::Mechanics {
        return Err(Error::Precondition(
            "product_state expects a mechanical state".into(),
        ));
    }
    let mut s = CMatrix::from_element(2, 2, czero());
    s[(spin.index(), spin.index())] = Complex::new(T::one(), T::zero());
    Ok(DensityMatrix::from_parts(
        mech.space,
        Subsystem::Composite,
        linalg::kron(&s, &mech.entries),
    ))
}

/// `ρ_s ⊗ ρ_m` from a spin state and a mechanical state.
pub fn tensor<T: Real>(
    spin: &DensityMatrix<T>,
    mech: &DensityMatrix<T>,
) -> Result<DensityMatrix<T>> {
    if spin.kind != Subsystem::Spin || mech.kind != Subsystem::Mechanics || spin.space != mech.space
    {
        return Err(Error::Precondition(
            "tensor expects (spin, mechanics) on one space".into(),
        ));
    }
    Ok(DensityMatrix::from_parts(
        mech.space,
        Subsystem::Composite,
        linalg::kron(&spin.entries, &mech.entries),
    ))
}

/// `Tr(op ρ)`. For Hermitian `op` the imaginary residue is checked and dropped.
pub fn expectation<T: Real>(op: &OperatorMatrix<T>, rho: &DensityMatrix<T>) -> Result<Complex<T>> {
    if rho.kind != Subsystem::Composite || op.space() != rho.space {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: rho.dim(),
        });
    }
    let v = trace_product(op.entries(), &rho.entries);
    if op.is_hermitian() {
        let im = v.im.as_f64();
        if im.abs() > EXPECTATION_IMAG_TOL * v.re.as_f64().abs().max(1.0) {
            return Err(Error::Invariant(format!(
                "Hermitian expectation has imaginary part {im:.3e}"
            )));
        }
        return Ok(Complex::new(v.re, T::zero()));
    }
    Ok(v)
}

/// `Tr(A B)` without forming the product.
pub fn trace_product<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> Complex<T> {
    let n = a.nrows();
    let mut acc = czero();
    for j in 0..n {
        for i in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Reduced state on `keep`.
pub fn partial_trace<T: Real>(rho: &DensityMatrix<T>, keep: Subsystem) -> Result<DensityMatrix<T>> {
    if rho.kind != Subsystem::Composite {
        if rho.kind == keep {
            return Ok(rho.clone());
        }
        return Err(Error::Precondition(
            "partial trace of an already reduced state".into(),
        ));
    }
    let m = rho.space.mech_dim();
    let e = &rho.entries;
    let out = match keep {
        Subsystem::Composite => e.clone(),
        Subsystem::Mechanics => CMatrix::from_fn(m, m, |r, c| e[(r, c)] + e[(m + r, m + c)]),
        Subsystem::Spin => CMatrix::from_fn(2, 2, |s, t| {
            (0..m).fold(czero(), |acc, n| acc + e[(s * m + n, t * m + n)])
        }),
    };
    Ok(DensityMatrix::from_parts(rho.space, keep, out))
}

/// Entropy `−Σ λ ln λ` in nats from a spectrum; small negative eigenvalues
/// are clamped, larger ones are an error.
pub fn entropy_of_spectrum(eigs: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &l in eigs {
        if l < -ENTROPY_CLAMP {
            return Err(Error::Invariant(format!(
                "eigenvalue {l:.3e} below entropy clamp"
            )));
        }
        if l > 0.0 {
            s -= l * l.ln();
        }
    }
    Ok(s)
}

pub fn von_neumann_entropy<T: Real>(rho: &DensityMatrix<T>) -> Result<f64> {
    entropy_of_spectrum(&rho.eigenvalues())
}

/// Analytic entropy of a thermal oscillator, `(n̄+1)ln(n̄+1) − n̄ ln n̄`.
pub fn thermal_entropy(n_bar: f64) -> f64 {
    if n_bar <= 0.0 {
        return 0.0;
    }
    (n_bar + 1.0) * (n_bar + 1.0).ln() - n_bar * n_bar.ln()
}

/// Uhlmann fidelity, squared convention: `(Tr √(√ρ σ √ρ))²`.
pub fn fidelity<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<f64> {
    if rho.kind != sigma.kind || rho.space != sigma.space {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    let sr = linalg::sqrtm_psd(&rho.hermitian_part());
    let inner = &sr * sigma.hermitian_part() * &sr;
    let inner = (&inner + inner.adjoint()).map(|z| z * T::lit(0.5));
    let tr: f64 = linalg::hermitian_eigenvalues(&inner)
        .into_iter()
        .map(|l| l.as_f64().max(0.0).sqrt())
        .sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

/// Trace distance `½‖ρ − σ‖₁`.
pub fn trace_distance<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<f64> {
    if rho.kind != sigma.kind || rho.space != sigma.space {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    let d = &rho.entries - &sigma.entries;
    let d = (&d + d.adjoint()).map(|z| z * T::lit(0.5));
    Ok(0.5
        * linalg::hermitian_eigenvalues(&d)
            .iter()
            .map(|l| l.as_f64().abs())
            .sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{basis_ket, displacement_operator, number, spin_operator, SpinOp};
    use crate::space::make_space;

    #[test]
    fn vacuum_thermal_state() {
        let sp = make_space(5).unwrap();
        let rho = thermal_state::<f64>(sp, 0.0, 1e-6).unwrap();
        assert_eq!(rho.entries()[(0, 0)].re, 1.0);
        assert!((rho.purity() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn thermal_mean_matches_geometric_series() {
        // Σ n q^n (1−q) over n ≥ 0 with q = 2/3 is 2; truncation at 40 is ~1e-6
        let sp = make_space(40).unwrap();
        let rho = thermal_state::<f64>(sp, 2.0, 1e-6).unwrap();
        let n = expectation(&number(sp), &rho).unwrap().re;
        let q: f64 = 2.0 / 3.0;
        let z: f64 = (0..41).map(|k| q.powi(k)).sum();
        let oracle: f64 = (0..41).map(|k| k as f64 * q.powi(k)).sum::<f64>() / z;
        assert!((n - oracle).abs() < 1e-12);
        assert!((n - 2.0).abs() < 1e-6 * 2.0 + 1e-5);
    }

    #[test]
    fn thermal_state_rejects_heavy_tail() {
        let sp = make_space(49).unwrap();
        assert!(matches!(
            thermal_state::<f64>(sp, 8.0, 1e-6),
            Err(Error::Truncation { .. })
        ));
        assert!(thermal_state::<f64>(sp, -1.0, 1e-6).is_err());
        let big = make_space(130).unwrap();
        assert!(thermal_state::<f64>(big, 8.0, 1e-6).is_ok());
    }

    #[test]
    fn spin_expectation_on_thermal() {
        let sp = make_space(30).unwrap();
        let rho = thermal_state::<f64>(sp, 1.0, 1e-6).unwrap();
        assert!((expectation(&spin_operator(sp, SpinOp::Z), &rho).unwrap().re - 1.0).abs() < 1e-15);
        assert!((expectation(&OperatorMatrix::identity(sp), &rho).unwrap().re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn coherent_state_number() {
        let sp = make_space(30).unwrap();
        let alpha = Complex::new(0.9, 0.4);
        let d = displacement_operator::<f64>(sp, alpha, 1e-6).unwrap();
        let ket = d.entries() * basis_ket::<f64>(sp.total_dim(), 0);
        let rho = DensityMatrix::pure(sp, Subsystem::Composite, &ket).unwrap();
        let n = expectation(&number(sp), &rho).unwrap().re;
        assert!((n - alpha.norm_sqr()).abs() < 1e-10);
    }

    #[test]
    fn partial_traces_of_products() {
        let sp = make_space(12).unwrap();
        let m = thermal_mechanics::<f64>(sp, 0.7, 1e-3).unwrap();
        let rho = product_state(&m, SpinLevel::Zero).unwrap();
        let s = partial_trace(&rho, Subsystem::Spin).unwrap();
        assert!((s.entries()[(0, 0)].re - 1.0).abs() < 1e-15);
        assert_eq!(s.entries()[(1, 1)], czero());
        let back = partial_trace(&rho, Subsystem::Mechanics).unwrap();
        assert_eq!(back.entries(), m.entries());
    }

    #[test]
    fn bell_like_state_reduces_to_maximally_mixed() {
        // (|0⟩_s|0⟩ + |−1⟩_s|1⟩)/√2 on N = 1
        let sp = make_space(1).unwrap();
        let mut ket = CMatrix::<f64>::zeros(4, 1);
        ket[(sp.index(SpinLevel::Zero, 0), 0)] = Complex::new(0.5f64.sqrt(), 0.0);
        ket[(sp.index(SpinLevel::MinusOne, 1), 0)] = Complex::new(0.5f64.sqrt(), 0.0);
        let rho = DensityMatrix::pure(sp, Subsystem::Composite, &ket).unwrap();
        for keep in [Subsystem::Spin, Subsystem::Mechanics] {
            let r = partial_trace(&rho, keep).unwrap();
            assert!((r.entries()[(0, 0)].re - 0.5).abs() < 1e-15);
            assert!((r.entries()[(1, 1)].re - 0.5).abs() < 1e-15);
            assert!(r.entries()[(0, 1)].norm() < 1e-15);
            assert!((von_neumann_entropy(&r).unwrap() - 2f64.ln()).abs() < 1e-12);
        }
        assert!(von_neumann_entropy(&rho).unwrap().abs() < 1e-10);
    }

    #[test]
    fn thermal_entropy_oracle() {
        let sp = make_space(220).unwrap();
        for nb in [0.5, 2.0, 7.0] {
            let m = thermal_mechanics::<f64>(sp, nb, 1e-6).unwrap();
            let s = von_neumann_entropy(&m).unwrap();
            assert!((s - thermal_entropy(nb)).abs() < 1e-6, "n̄={nb}: {s}");
        }
    }

    #[test]
    fn entropy_rejects_negative_spectrum() {
        assert!(entropy_of_spectrum(&[1.0, -1e-11]).is_ok());
        assert!(entropy_of_spectrum(&[1.0, -1e-6]).is_err());
    }

    #[test]
    fn fidelity_cases() {
        let sp = make_space(40).unwrap();
        let t1 = thermal_mechanics::<f64>(sp, 1.0, 1e-6).unwrap();
        let vac = thermal_mechanics::<f64>(sp, 0.0, 1e-6).unwrap();
        assert!((fidelity(&t1, &t1).unwrap() - 1.0).abs() < 1e-10);
        // diagonal overlap: (Σ √(p_n q_n))² = p_0 = 1/2 (up to truncation)
        let f = fidelity(&vac, &t1).unwrap();
        assert!((f - t1.entries()[(0, 0)].re).abs() < 1e-10);
        assert!((f - 0.5).abs() < 1e-10);
        let k0 = basis_ket::<f64>(sp.mech_dim(), 0);
        let k1 = basis_ket::<f64>(sp.mech_dim(), 1);
        let a = DensityMatrix::pure(sp, Subsystem::Mechanics, &k0).unwrap();
        let b = DensityMatrix::pure(sp, Subsystem::Mechanics, &k1).unwrap();
        assert!(fidelity(&a, &b).unwrap() < 1e-12);
        assert!((trace_distance(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constructor_rejects_bad_trace() {
        let sp = make_space(1).unwrap();
        let m = CMatrix::<f64>::identity(4, 4);
        assert!(DensityMatrix::new(sp, Subsystem::Composite, m).is_err());
    }
}
