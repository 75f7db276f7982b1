//! Operators on the composite spin ⊗ mechanics space.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{cone, cplx, czero, hermiticity_error, CMatrix, Real};
use crate::space::HilbertSpace;

/// Hermiticity tolerance for operators flagged Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpinOp {
    X,
    Y,
    Z,
    /// σ+ = |−1⟩⟨0|
    Plus,
    /// σ− = |0⟩⟨−1|; the reset channel pumps into |0⟩.
    Minus,
}

impl SpinOp {
    /// 2×2 matrix in the {|0⟩, |−1⟩} basis.
    pub fn matrix<T: Real>(self) -> CMatrix<T> {
        let (a, b, c, d) = match self {
            SpinOp::X => ((0., 0.), (1., 0.), (1., 0.), (0., 0.)),
            SpinOp::Y => ((0., 0.), (0., -1.), (0., 1.), (0., 0.)),
            SpinOp::Z => ((1., 0.), (0., 0.), (0., 0.), (-1., 0.)),
            SpinOp::Plus => ((0., 0.), (0., 0.), (1., 0.), (0., 0.)),
            SpinOp::Minus => ((0., 0.), (1., 0.), (0., 0.), (0., 0.)),
        };
        CMatrix::from_row_slice(
            2,
            2,
            &[
                cplx(a.0, a.1),
                cplx(b.0, b.1),
                cplx(c.0, c.1),
                cplx(d.0, d.1),
            ],
        )
    }

    pub fn is_hermitian(self) -> bool {
        matches!(self, SpinOp::X | SpinOp::Y | SpinOp::Z)
    }
}

/// Dense operator on a [`HilbertSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix<T: Real> {
    space: HilbertSpace,
    entries: CMatrix<T>,
    hermitian: bool,
}

impl<T: Real> OperatorMatrix<T> {
    /// Wraps `entries`; when `hermitian` is set the flag is verified.
    pub fn new(space: HilbertSpace, entries: CMatrix<T>, hermitian: bool) -> Result<Self> {
        let d = space.total_dim();
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: entries.nrows().max(entries.ncols()),
            });
        }
        if hermitian {
            let err = hermiticity_error(&entries);
            let scale = crate::scalar::max_abs(&entries).max(1.0);
            if err > HERMITIAN_TOL * scale {
                return Err(Error::Invariant(format!(
                    "operator flagged Hermitian deviates by {err:.3e}"
                )));
            }
        }
        Ok(Self {
            space,
            entries,
            hermitian,
        })
    }

    pub(crate) fn from_parts(space: HilbertSpace, entries: CMatrix<T>, hermitian: bool) -> Self {
        debug_assert_eq!(entries.nrows(), space.total_dim());
        Self {
            space,
            entries,
            hermitian,
        }
    }

    pub fn identity(space: HilbertSpace) -> Self {
        Self::from_parts(space, linalg::identity(space.total_dim()), true)
    }

    pub fn zeros(space: HilbertSpace) -> Self {
        let d = space.total_dim();
        Self::from_parts(space, CMatrix::from_element(d, d, czero()), true)
    }

    /// `1_spin ⊗ m` for a mechanical operator `m` of size N+1.
    pub fn from_mechanical(space: HilbertSpace, m: &CMatrix<T>, hermitian: bool) -> Result<Self> {
        if m.nrows() != space.mech_dim() || m.ncols() != space.mech_dim() {
            return Err(Error::DimensionMismatch {
                expected: space.mech_dim(),
                found: m.nrows(),
            });
        }
        Self::new(space, linalg::kron(&linalg::identity(2), m), hermitian)
    }

    /// `s ⊗ 1_mech` for a 2×2 spin operator `s`.
    pub fn from_spin(space: HilbertSpace, s: &CMatrix<T>, hermitian: bool) -> Result<Self> {
        if s.nrows() != 2 || s.ncols() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: s.nrows(),
            });
        }
        Self::new(
            space,
            linalg::kron(s, &linalg::identity(space.mech_dim())),
            hermitian,
        )
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn entries(&self) -> &CMatrix<T> {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix<T> {
        self.entries
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn dagger(&self) -> Self {
        Self::from_parts(self.space, self.entries.adjoint(), self.hermitian)
    }

    pub fn scale(&self, c: T) -> Self {
        Self::from_parts(self.space, self.entries.map(|z| z * c), self.hermitian)
    }

    pub fn scale_complex(&self, c: Complex<T>) -> Self {
        let herm = self.hermitian && c.im == T::zero();
        Self::from_parts(self.space, self.entries.map(|z| z * c), herm)
    }

    /// `[self, other]`
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self::from_parts(
            self.space,
            &self.entries * &other.entries - &other.entries * &self.entries,
            false,
        ))
    }

    /// Sets the Hermitian flag after verifying it.
    pub fn into_hermitian(self) -> Result<Self> {
        Self::new(self.space, self.entries, true)
    }

    /// Number of nonzero entries.
    pub fn nnz(&self) -> usize {
        self.entries.iter().filter(|z| **z != czero()).count()
    }

    /// Matrix element ⟨r|X|c⟩.
    pub fn get(&self, r: usize, c: usize) -> Complex<T> {
        self.entries[(r, c)]
    }

    /// `U X U†`
    pub fn conjugated_by(&self, u: &Self) -> Result<Self> {
        self.check_same(u)?;
        Ok(Self::from_parts(
            self.space,
            linalg::conjugate(&u.entries, &self.entries),
            self.hermitian,
        ))
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }
}

impl<T: Real> Add for &OperatorMatrix<T> {
    type Output = OperatorMatrix<T>;
    fn add(self, rhs: Self) -> OperatorMatrix<T> {
        assert_eq!(self.space, rhs.space, "operator spaces differ");
        OperatorMatrix::from_parts(
            self.space,
            &self.entries + &rhs.entries,
            self.hermitian && rhs.hermitian,
        )
    }
}

impl<T: Real> Sub for &OperatorMatrix<T> {
    type Output = OperatorMatrix<T>;
    fn sub(self, rhs: Self) -> OperatorMatrix<T> {
        assert_eq!(self.space, rhs.space, "operator spaces differ");
        OperatorMatrix::from_parts(
            self.space,
            &self.entries - &rhs.entries,
            self.hermitian && rhs.hermitian,
        )
    }
}

impl<T: Real> Mul for &OperatorMatrix<T> {
    type Output = OperatorMatrix<T>;
    fn mul(self, rhs: Self) -> OperatorMatrix<T> {
        assert_eq!(self.space, rhs.space, "operator spaces differ");
        OperatorMatrix::from_parts(self.space, &self.entries * &rhs.entries, false)
    }
}

/// Mechanical lowering operator on N+1 levels.
pub fn mech_annihilation<T: Real>(mech_dim: usize) -> CMatrix<T> {
    let mut a = CMatrix::from_element(mech_dim, mech_dim, czero());
    for n in 1..mech_dim {
        a[(n - 1, n)] = Complex::new(T::lit((n as f64).sqrt()), T::zero());
    }
    a
}

/// Mechanical number operator on N+1 levels.
pub fn mech_number<T: Real>(mech_dim: usize) -> CMatrix<T> {
    let d: Vec<T> = (0..mech_dim).map(|n| T::lit(n as f64)).collect();
    linalg::diag_real(&d)
}

/// `1_spin ⊗ a`
pub fn annihilation<T: Real>(space: HilbertSpace) -> OperatorMatrix<T> {
    OperatorMatrix::from_mechanical(space, &mech_annihilation(space.mech_dim()), false)
        .expect("dimension matches by construction")
}

/// `1_spin ⊗ a†`
pub fn creation<T: Real>(space: HilbertSpace) -> OperatorMatrix<T> {
    annihilation(space).dagger()
}

/// `1_spin ⊗ a†a`
pub fn number<T: Real>(space: HilbertSpace) -> OperatorMatrix<T> {
    OperatorMatrix::from_mechanical(space, &mech_number(space.mech_dim()), true)
        .expect("dimension matches by construction")
}

/// `1_spin ⊗ (a + a†)`
pub fn quadrature<T: Real>(space: HilbertSpace) -> OperatorMatrix<T> {
    let a = mech_annihilation::<T>(space.mech_dim());
    let x = &a + a.adjoint();
    OperatorMatrix::from_mechanical(space, &x, true).expect("dimension matches by construction")
}

pub fn spin_operator<T: Real>(space: HilbertSpace, which: SpinOp) -> OperatorMatrix<T> {
    OperatorMatrix::from_spin(space, &which.matrix(), which.is_hermitian())
        .expect("dimension matches by construction")
}

/// Poisson weight of levels N−1 and N for a coherent state of amplitude |α|.
pub fn coherent_tail(alpha_abs: f64, cutoff: usize) -> f64 {
    let x = alpha_abs * alpha_abs;
    if x == 0.0 {
        return if cutoff == 0 { 1.0 } else { 0.0 };
    }
    let log_p = |n: usize| -x + n as f64 * x.ln() - ln_factorial(n);
    let mut p = log_p(cutoff).exp();
    if cutoff >= 1 {
        p += log_p(cutoff - 1).exp();
    }
    p
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// `exp(α a† − α* a)` on N+1 mechanical levels, via the Hermitian generator.
/// No truncation check.
pub fn mech_displacement<T: Real>(mech_dim: usize, alpha: Complex<f64>) -> CMatrix<T> {
    let a = mech_annihilation::<T>(mech_dim);
    let al = Complex::new(T::lit(alpha.re), T::lit(alpha.im));
    // K = i(α a† − α* a) is Hermitian and D = exp(−iK).
    let gen = (a.adjoint().map(|z| z * al) - a.map(|z| z * al.conj())).map(|z| z * cplx(0.0, 1.0));
    linalg::exp_i_hermitian(&gen, T::one())
}

/// Displacement operator `1_spin ⊗ D(α)`.
///
/// Fails when the coherent state `D(α)|0⟩` would put more than `tol` into the
/// two highest retained Fock levels.
pub fn displacement_operator<T: Real>(
    space: HilbertSpace,
    alpha: Complex<f64>,
    tol: f64,
) -> Result<OperatorMatrix<T>> {
    let tail = coherent_tail(alpha.norm(), space.fock_cutoff());
    if tail > tol {
        return Err(Error::Truncation {
            population: tail,
            tolerance: tol,
            cutoff: space.fock_cutoff(),
        });
    }
    let d = mech_displacement::<T>(space.mech_dim(), alpha);
    OperatorMatrix::from_mechanical(space, &d, false)
}

/// Spin rotation `exp(−i(θ/2)σ_y) ⊗ 1` (real: [[c, −s], [s, c]]).
pub fn spin_rotation_y<T: Real>(space: HilbertSpace, theta: f64) -> OperatorMatrix<T> {
    let (s, c) = (0.5 * theta).sin_cos();
    let m = CMatrix::from_row_slice(2, 2, &[cplx(c, 0.), cplx(-s, 0.), cplx(s, 0.), cplx(c, 0.)]);
    OperatorMatrix::from_spin(space, &m, false).expect("2x2 by construction")
}

/// Instantaneous π pulse `exp(−i(π/2)σ_x) = −iσ_x` on the spin.
pub fn pi_pulse_unitary<T: Real>(space: HilbertSpace) -> OperatorMatrix<T> {
    spin_operator::<T>(space, SpinOp::X).scale_complex(cplx(0.0, -1.0))
}

/// `1 ⊗ |n⟩` basis ket helper: column vector with a single unit entry.
pub fn basis_ket<T: Real>(dim: usize, index: usize) -> CMatrix<T> {
    let mut v = CMatrix::from_element(dim, 1, czero());
    v[(index, 0)] = cone();
    v
}
