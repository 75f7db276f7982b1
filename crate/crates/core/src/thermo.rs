//! Observables and thermodynamic bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HBAR, K_B};

/// Observables of one sample. Frequencies in rad/s, entropy in nats.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub t: f64,
    /// Instantaneous mechanical frequency.
    pub omega: f64,
    /// ⟨a†a⟩
    pub n_mean: f64,
    pub re_a: f64,
    pub im_a: f64,
    /// ⟨a†a⟩ − |⟨a⟩|²
    pub n_fluct: f64,
    pub sigma_z: f64,
    /// ⟨a + a†⟩/√2
    pub z_over_zpf: f64,
    pub trace: f64,
    /// Entropy of the mechanical reduced state.
    pub entropy: f64,
}

pub const CSV_HEADER: &str = "t_seconds,n_mean,re_a,im_a,sigma_z,z_over_zpf,n_fluct,trace,entropy";

impl ObservableRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            self.t,
            self.n_mean,
            self.re_a,
            self.im_a,
            self.sigma_z,
            self.z_over_zpf,
            self.n_fluct,
            self.trace,
            self.entropy
        )
    }

    pub fn a_abs(&self) -> f64 {
        self.re_a.hypot(self.im_a)
    }

    /// Mechanical energy ħω⟨a†a⟩ in joules.
    pub fn energy(&self) -> f64 {
        HBAR * self.omega * self.n_mean
    }

    pub fn temperature(&self) -> Result<Temperature> {
        effective_temperature(self.n_fluct.max(0.0), self.omega)
    }

    pub fn check(&self) -> Result<()> {
        if self.n_fluct < -1e-8 {
            return Err(Error::Invariant(format!(
                "negative phonon fluctuation {:.3e}",
                self.n_fluct
            )));
        }
        Ok(())
    }
}

/// Effective temperature assigned to an occupation at frequency ω.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Temperature {
    /// βħω = ln((n̄+1)/n̄); infinite at n̄ = 0.
    pub beta_h_omega: f64,
    /// k_B T / ħω
    pub reduced: f64,
    pub kelvin: f64,
}

pub fn effective_temperature(n_bar: f64, omega: f64) -> Result<Temperature> {
    if !(n_bar >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "occupation must be ≥ 0, got {n_bar}"
        )));
    }
    if !(omega > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "frequency must be > 0, got {omega}"
        )));
    }
    if n_bar == 0.0 {
        return Ok(Temperature {
            beta_h_omega: f64::INFINITY,
            reduced: 0.0,
            kelvin: 0.0,
        });
    }
    // ln(1 + 1/n̄) keeps precision at large n̄
    let beta = (1.0 / n_bar).ln_1p();
    Ok(Temperature {
        beta_h_omega: beta,
        reduced: 1.0 / beta,
        kelvin: HBAR * omega / (K_B * beta),
    })
}

/// Occupation of a thermal state at reduced temperature `k_B T/ħω`.
pub fn bose_occupation(reduced_temperature: f64) -> f64 {
    if reduced_temperature <= 0.0 {
        return 0.0;
    }
    1.0 / (1.0 / reduced_temperature).exp_m1()
}

/// State of the working fluid at one corner of the cycle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CyclePoint {
    pub omega: f64,
    pub n_mean: f64,
    pub n_fluct: f64,
    pub entropy: f64,
}

impl CyclePoint {
    pub fn from_record(r: &ObservableRecord) -> Self {
        Self {
            omega: r.omega,
            n_mean: r.n_mean,
            n_fluct: r.n_fluct,
            entropy: r.entropy,
        }
    }

    pub fn energy(&self) -> f64 {
        HBAR * self.omega * self.n_mean
    }
}

/// One vertex or intermediate point of the T–S diagram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsPoint {
    /// "1".."4" for vertices, "1-2" etc. along strokes.
    pub label: String,
    pub entropy: f64,
    pub temperature_kelvin: f64,
}

/// Energies, heats and works of one Otto cycle (joules).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleLedger {
    pub points: [CyclePoint; 4],
    /// Point 1 of the following cycle.
    pub next_first: CyclePoint,
    pub energies: [f64; 4],
    pub energy_next: f64,
    pub w_e: f64,
    pub q_c: f64,
    pub w_c: f64,
    pub q_h: f64,
    pub temperatures: [f64; 4],
    pub entropies: [f64; 4],
    pub lambda: f64,
    pub eta: Option<f64>,
    pub eta_c: f64,
    pub eta_ca: Option<f64>,
    /// Samples along the four strokes, in cycle order.
    pub path: Vec<TsPoint>,
}

impl CycleLedger {
    pub fn new(
        points: [CyclePoint; 4],
        next_first: CyclePoint,
        lambda: f64,
        path: Vec<TsPoint>,
    ) -> Result<Self> {
        let energies = points.map(|p| p.energy());
        let energy_next = next_first.energy();
        let mut temperatures = [0.0; 4];
        for (t, p) in temperatures.iter_mut().zip(points.iter()) {
            *t = effective_temperature(p.n_fluct.max(0.0), p.omega)?.kelvin;
        }
        let mut ledger = Self {
            points,
            next_first,
            energies,
            energy_next,
            w_e: energies[1] - energies[0],
            q_c: energies[2] - energies[1],
            w_c: energies[3] - energies[2],
            q_h: energy_next - energies[3],
            temperatures,
            entropies: points.map(|p| p.entropy),
            lambda,
            eta: None,
            eta_c: lambda,
            eta_ca: None,
            path,
        };
        if let Ok(e) = efficiency(&ledger) {
            ledger.eta = Some(e.eta);
            ledger.eta_ca = Some(e.eta_ca);
        }
        Ok(ledger)
    }

    /// `W_e + W_c + Q_c + Q_h`; equals `E_1' − E_1`.
    pub fn closure(&self) -> f64 {
        self.w_e + self.w_c + self.q_c + self.q_h
    }

    /// Net work output over heat absorbed, from the works.
    pub fn eta_from_work(&self) -> f64 {
        -(self.w_e + self.w_c) / self.q_h
    }

    /// Sign pattern of an engine: W_e < 0, W_c > 0, Q_c < 0, Q_h > 0.
    pub fn is_engine(&self) -> bool {
        self.w_e < 0.0 && self.w_c > 0.0 && self.q_c < 0.0 && self.q_h > 0.0
    }

    pub fn temperature_ratio(&self) -> f64 {
        self.temperatures[2] / self.temperatures[3]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Efficiencies {
    pub eta: f64,
    pub eta_c: f64,
    pub eta_ca: f64,
}

/// η = 1 + Q_c/Q_h, η_C = λ, η_CA = 1 − √(T₃/T₄).
pub fn efficiency(ledger: &CycleLedger) -> Result<Efficiencies> {
    if !(ledger.q_h > 0.0) {
        return Err(Error::Precondition(format!(
            "Q_h = {:.3e} J ≤ 0: the cycle is not operating as an engine",
            ledger.q_h
        )));
    }
    Ok(Efficiencies {
        eta: 1.0 + ledger.q_c / ledger.q_h,
        eta_c: ledger.lambda,
        eta_ca: curzon_ahlborn(ledger.temperature_ratio()),
    })
}

pub fn curzon_ahlborn(t_cold_over_hot: f64) -> f64 {
    1.0 - t_cold_over_hot.max(0.0).sqrt()
}

/// Vertices 1–4 interleaved with the sampled stroke paths.
pub fn ts_points(ledger: &CycleLedger) -> Vec<TsPoint> {
    let vertex = |k: usize| TsPoint {
        label: (k + 1).to_string(),
        entropy: ledger.entropies[k],
        temperature_kelvin: ledger.temperatures[k],
    };
    let mut out = Vec::with_capacity(ledger.path.len() + 5);
    for k in 0..4 {
        out.push(vertex(k));
        let tag = format!("{}-{}", k + 1, (k + 1) % 4 + 1);
        out.extend(ledger.path.iter().filter(|p| p.label == tag).cloned());
    }
    out.push(TsPoint {
        label: "1'".into(),
        entropy: ledger.next_first.entropy,
        temperature_kelvin: effective_temperature(
            ledger.next_first.n_fluct.max(0.0),
            ledger.next_first.omega,
        )
        .map(|t| t.kelvin)
        .unwrap_or(f64::NAN),
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn temperature_cases() {
        let t = effective_temperature(1.0, 1.0).unwrap();
        assert!((t.beta_h_omega - 2f64.ln()).abs() < 1e-15);
        // large-n̄ series: ln(1 + 1/n) = 1/n − 1/2n² + …
        let t = effective_temperature(1e3, 1.0).unwrap();
        assert!((t.beta_h_omega * 1e3 - 1.0).abs() < 1e-3);
        let z = effective_temperature(0.0, 1.0).unwrap();
        assert_eq!(z.reduced, 0.0);
        assert!(z.beta_h_omega.is_infinite());
        assert!(effective_temperature(-1.0, 1.0).is_err());
    }

    #[test]
    fn occupation_round_trip() {
        for t in [0.1, 0.7, 3.0, 42.0] {
            let n = bose_occupation(t);
            let back = effective_temperature(n, 5.0).unwrap().reduced;
            assert!((back - t).abs() < 1e-9 * t, "{t} -> {back}");
        }
    }

    fn ledger_with(energies: [f64; 4], next: f64, lambda: f64, ns: [f64; 4]) -> CycleLedger {
        // pick ω so that E = ħω n with n = 1
        let mk = |e: f64, n: f64| CyclePoint {
            omega: e / (HBAR * 1.0),
            n_mean: 1.0,
            n_fluct: n,
            entropy: 0.0,
        };
        let pts = [
            mk(energies[0], ns[0]),
            mk(energies[1], ns[1]),
            mk(energies[2], ns[2]),
            mk(energies[3], ns[3]),
        ];
        CycleLedger::new(pts, mk(next, ns[0]), lambda, vec![]).unwrap()
    }

    #[test]
    fn efficiency_cases() {
        let l = ledger_with([10.0, 7.0, 7.0, 9.0], 10.0, 0.3, [2.0, 2.0, 1.0, 1.0]);
        assert_eq!(l.q_c, 0.0);
        let e = efficiency(&l).unwrap();
        assert_eq!(e.eta, 1.0);
        assert_eq!(e.eta_c, 0.3);
        assert!((curzon_ahlborn(0.49) - 0.3).abs() < 1e-15);
        let l = ledger_with([10.0, 7.0, 4.0, 6.0], 10.0, 0.3, [2.0, 2.0, 1.0, 1.0]);
        assert!(l.closure().abs() < 1e-15);
        assert!(l.is_engine());
        assert!((l.eta.unwrap() - l.eta_from_work()).abs() < 1e-15);
        let bad = ledger_with([10.0, 7.0, 4.0, 12.0], 10.0, 0.3, [2.0, 2.0, 1.0, 1.0]);
        assert!(efficiency(&bad).is_err());
        assert!(bad.eta.is_none());
    }

    #[test]
    fn ts_vertices_in_order() {
        let mut l = ledger_with([10.0, 7.0, 4.0, 6.0], 10.0, 0.3, [2.0, 2.0, 1.0, 1.0]);
        l.path.push(TsPoint {
            label: "2-3".into(),
            entropy: 0.5,
            temperature_kelvin: 1.0,
        });
        let pts = ts_points(&l);
        let labels: Vec<_> = pts.iter().map(|p| p.label.as_str()).collect();
        assert_eq!(labels, ["1", "2", "2-3", "3", "4", "1'"]);
    }
}
