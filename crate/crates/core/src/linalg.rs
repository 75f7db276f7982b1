//! Dense matrix functions: Hermitian eigendecomposition, matrix exponentials
//! and the PSD square root.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{cone, czero, phasor, CMatrix, Real};

/// Eigenvalues (ascending) and unitary eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen<T: Real>(m: &CMatrix<T>) -> (Vec<T>, CMatrix<T>) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues<T: Real>(m: &CMatrix<T>) -> Vec<T> {
    let mut v: Vec<T> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// `V f(Λ) V†` for Hermitian `m = V Λ V†`.
pub fn hermitian_function<T: Real>(m: &CMatrix<T>, f: impl Fn(T) -> Complex<T>) -> CMatrix<T> {
    let (vals, vecs) = hermitian_eigen(m);
    let mut scaled = vecs.clone();
    for (c, &lam) in vals.iter().enumerate() {
        let fl = f(lam);
        scaled.column_mut(c).iter_mut().for_each(|z| *z *= fl);
    }
    scaled * vecs.adjoint()
}

/// `exp(-i t H)` for Hermitian `H`, via eigendecomposition.
pub fn exp_i_hermitian<T: Real>(h: &CMatrix<T>, t: T) -> CMatrix<T> {
    hermitian_function(h, |lam| phasor(-(lam * t)))
}

/// Principal square root of a positive semidefinite Hermitian matrix.
/// Eigenvalues below zero (round-off) are clamped.
pub fn sqrtm_psd<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    hermitian_function(m, |lam| {
        let l = if lam > T::zero() { lam } else { T::zero() };
        Complex::new(l.sqrt(), T::zero())
    })
}

fn one_norm<T: Real>(m: &CMatrix<T>) -> f64 {
    (0..m.ncols())
        .map(|c| {
            m.column(c)
                .iter()
                .map(|z| z.norm_sqr().as_f64().sqrt())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// General matrix exponential by scaling and squaring with a degree-13
/// Padé approximant.
pub fn expm<T: Real>(a: &CMatrix<T>) -> Result<CMatrix<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    let norm = one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scale = T::lit(0.5f64.powi(s));
    let a = a.map(|z| z * scale);
    let b = |k: usize| Complex::new(T::lit(PADE13[k]), T::zero());
    let ident = CMatrix::<T>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (a6.map(|z| z * b(13)) + a4.map(|z| z * b(11)) + a2.map(|z| z * b(9)))
        + a6.map(|z| z * b(7))
        + a4.map(|z| z * b(5))
        + a2.map(|z| z * b(3))
        + ident.map(|z| z * b(1));
    let u = &a * u_inner;
    let v = &a6 * (a6.map(|z| z * b(12)) + a4.map(|z| z * b(10)) + a2.map(|z| z * b(8)))
        + a6.map(|z| z * b(6))
        + a4.map(|z| z * b(4))
        + a2.map(|z| z * b(2))
        + ident.map(|z| z * b(0));

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::Invariant("singular Padé denominator in expm".into()))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// Conjugation `U X U†`.
pub fn conjugate<T: Real>(u: &CMatrix<T>, x: &CMatrix<T>) -> CMatrix<T> {
    u * x * u.adjoint()
}

/// Identity matrix helper for complex matrices.
pub fn identity<T: Real>(n: usize) -> CMatrix<T> {
    CMatrix::from_fn(n, n, |r, c| if r == c { cone() } else { czero() })
}

/// Kronecker product `a ⊗ b`.
pub fn kron<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a.kronecker(b)
}

/// Real diagonal matrix as complex.
pub fn diag_real<T: Real>(d: &[T]) -> CMatrix<T> {
    let n = d.len();
    let mut m = CMatrix::from_element(n, n, czero());
    for (i, &x) in d.iter().enumerate() {
        m[(i, i)] = Complex::new(x, T::zero());
    }
    m
}

/// Real matrix lifted to complex.
pub fn complexify<T: Real>(m: &DMatrix<T>) -> CMatrix<T> {
    m.map(|x| Complex::new(x, T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::max_abs;

    fn random_hermitian(n: usize, seed: u64) -> CMatrix<f64> {
        let mut state = seed;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let m = CMatrix::<f64>::from_fn(n, n, |_, _| Complex::new(next(), next()));
        (&m + m.adjoint()).map(|z| z * 0.5)
    }

    #[test]
    fn pade_matches_eigen_route_for_hermitian_generator() {
        let h = random_hermitian(12, 7).map(|z| z * 3.0);
        let via_eigen = exp_i_hermitian(&h, 1.3);
        let via_pade = expm(&h.map(|z| z * Complex::new(0.0, -1.3))).unwrap();
        assert!(max_abs(&(&via_eigen - &via_pade)) < 1e-11);
    }

    #[test]
    fn expm_of_nilpotent_is_polynomial() {
        let mut n = CMatrix::<f64>::zeros(3, 3);
        n[(0, 1)] = Complex::new(2.0, 0.0);
        n[(1, 2)] = Complex::new(3.0, 0.0);
        let e = expm(&n).unwrap();
        assert!((e[(0, 2)].re - 3.0).abs() < 1e-13);
        assert!((e[(0, 1)].re - 2.0).abs() < 1e-13);
        assert!((e[(1, 1)].re - 1.0).abs() < 1e-13);
    }

    #[test]
    fn sqrt_squares_back() {
        let h = random_hermitian(8, 3);
        let psd = &h * h.adjoint();
        let r = sqrtm_psd(&psd);
        assert!(max_abs(&(&r * &r - &psd)) < 1e-12);
    }

    #[test]
    fn eigenvalues_sorted() {
        let h = random_hermitian(9, 11);
        let v = hermitian_eigenvalues(&h);
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
        let (vals, vecs) = hermitian_eigen(&h);
        let recon = &vecs * diag_real(&vals) * vecs.adjoint();
        assert!(max_abs(&(&recon - &h)) < 1e-12);
    }
}
