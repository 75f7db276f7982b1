//! The three machines built on the dynamics: battery, repeated-reset
//! cooling and the four-stroke Otto engine, plus their parameter sweeps.

pub mod battery;
pub mod cooling;
pub mod otto;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub use battery::{run_battery, run_battery_thermal, BatteryPlan, BatteryReport};
pub use cooling::{
    cooling_map, run_cooling, run_cooling_thermal, CoolingMap, CoolingPlan, CoolingReport, MapGrid,
    MapPoint,
};
pub use otto::{
    otto_inset, otto_sweep, run_otto, InsetPoint, OttoPlan, OttoReport, StrokeRate, SweepPoint,
};

/// Floor for automatically chosen cutoffs.
const MIN_CUTOFF: usize = 4;

/// Attempts before a truncation breach is reported.
const CUTOFF_RETRIES: usize = 2;

/// Share of the tolerance an automatic cutoff may use up front.
const CUTOFF_MARGIN: f64 = 0.9;

/// Growth of the cutoff after a truncation breach.
const CUTOFF_GROWTH: f64 = 1.4;

/// Smallest Fock cutoff N for which a thermal state of occupation `n_eff`
/// keeps the top two levels below `tol` (with a small margin).
///
/// A displaced thermal state has a lighter tail than the thermal state of
/// the same mean, so `n_eff = n̄ + |α|²` is a safe choice.
pub fn auto_cutoff(n_eff: f64, tol: f64) -> usize {
    if !(n_eff > 0.0) {
        return MIN_CUTOFF;
    }
    // p_n = r^n/(n̄+1): p_{N−1} + p_N = r^{N−1}(1+r)/(n̄+1)
    let r = n_eff / (n_eff + 1.0);
    let k = (CUTOFF_MARGIN * tol * (n_eff + 1.0) / (1.0 + r)).ln() / r.ln();
    (k.ceil().max(0.0) as usize + 1).max(MIN_CUTOFF)
}

/// Runs `f` at `cutoff`, enlarging the cutoff after truncation breaches.
pub(crate) fn with_cutoff_retry<R>(
    cutoff: usize,
    mut f: impl FnMut(usize) -> Result<R>,
) -> Result<R> {
    let mut n = cutoff;
    let mut attempt = 0;
    loop {
        match f(n) {
            Err(Error::Truncation { .. }) if attempt < CUTOFF_RETRIES => {
                attempt += 1;
                n = (n as f64 * CUTOFF_GROWTH).ceil() as usize;
            }
            other => return other,
        }
    }
}

/// Runs `f` at a user-fixed cutoff as is, or at `auto` with retries.
pub(crate) fn at_cutoff<R>(
    fixed: Option<usize>,
    auto: impl FnOnce() -> usize,
    mut f: impl FnMut(usize) -> Result<R>,
) -> Result<R> {
    match fixed {
        Some(n) => f(n),
        None => with_cutoff_retry(auto(), f),
    }
}

/// Maps `f` over `items` on `workers` threads; results keep input order.
pub(crate) fn parallel_map<I, R, F>(items: &[I], workers: usize, f: F) -> Result<Vec<R>>
where
    I: Sync,
    R: Send,
    F: Fn(&I) -> R + Sync + Send,
{
    if workers == 0 {
        return Err(Error::InvalidParameter("workers must be ≥ 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Precondition(format!("worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::thermal_populations;

    #[test]
    fn cutoff_meets_tolerance() {
        for &(n, tol) in &[(0.5, 1e-6), (2.0, 1e-6), (8.0, 1e-6), (9.0, 1e-8)] {
            let cut = auto_cutoff(n, tol);
            // brute-force oracle on the untruncated geometric distribution
            let p = |k: usize| (n / (n + 1.0)).powi(k as i32) / (n + 1.0);
            assert!(p(cut - 1) + p(cut) <= CUTOFF_MARGIN * tol);
            assert!(
                p(cut - 2) + p(cut - 1) > CUTOFF_MARGIN * tol,
                "{n} {tol} {cut}"
            );
            let q = thermal_populations(n, cut + 1);
            assert!(q[cut - 1] + q[cut] <= tol);
        }
        assert_eq!(auto_cutoff(0.0, 1e-6), MIN_CUTOFF);
    }

    #[test]
    fn retry_grows_cutoff() {
        let mut seen = vec![];
        let r = with_cutoff_retry(10, |n| {
            seen.push(n);
            if n < 19 {
                Err(Error::Truncation {
                    population: 1.0,
                    tolerance: 0.0,
                    cutoff: n,
                })
            } else {
                Ok(n)
            }
        });
        assert_eq!(r.unwrap(), 20);
        assert_eq!(seen, vec![10, 14, 20]);
        assert!(with_cutoff_retry(3, |n| -> Result<usize> {
            Err(Error::Truncation {
                population: 1.0,
                tolerance: 0.0,
                cutoff: n,
            })
        })
        .is_err());
    }

    #[test]
    fn parallel_map_keeps_order() {
        let v: Vec<usize> = (0..50).collect();
        assert_eq!(
            parallel_map(&v, 3, |x| x * 2).unwrap(),
            v.iter().map(|x| x * 2).collect::<Vec<_>>()
        );
        assert!(parallel_map(&v, 0, |x| *x).is_err());
    }
}
