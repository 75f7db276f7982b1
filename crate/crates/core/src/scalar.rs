use nalgebra::{DMatrix, RealField};
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the numerical core is generic over.
///
/// Implemented for `f32` and `f64`. Physical parameters stay `f64`
/// throughout; they are converted into `T` when operators are assembled.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// Magnitude below which integrator entries are flushed to zero, far
    /// above the subnormal range.
    fn flush_floor() -> Self;
}

impl Real for f32 {
    fn flush_floor() -> Self {
        f32::MIN_POSITIVE.sqrt()
    }
}

impl Real for f64 {
    fn flush_floor() -> Self {
        f64::MIN_POSITIVE.sqrt()
    }
}

/// Dense complex matrix over `T`.
pub type CMatrix<T> = DMatrix<Complex<T>>;

#[inline]
pub(crate) fn cplx<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::lit(re), T::lit(im))
}

#[inline]
pub(crate) fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub(crate) fn cone<T: Real>() -> Complex<T> {
    Complex::new(T::one(), T::zero())
}

/// `e^{i phase}` without going through `Float`.
#[inline]
pub(crate) fn phasor<T: Real>(phase: T) -> Complex<T> {
    Complex::new(phase.cos(), phase.sin())
}

/// Largest elementwise modulus of `m`.
pub fn max_abs<T: Real>(m: &CMatrix<T>) -> f64 {
    m.iter()
        .map(|z| z.norm_sqr().as_f64())
        .fold(0.0, f64::max)
        .sqrt()
}

/// Largest elementwise deviation from Hermiticity, `max |m - m†|`.
pub fn hermiticity_error<T: Real>(m: &CMatrix<T>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for c in 0..n {
        for r in c..n {
            let d = m[(r, c)] - m[(c, r)].conj();
            worst = worst.max(d.norm_sqr().as_f64());
        }
    }
    worst.sqrt()
}

/// `|z|` for generic `T` (num-complex only offers `norm` for `Float`).
#[inline]
pub fn cabs<T: Real>(z: Complex<T>) -> T {
    z.norm_sqr().sqrt()
}
