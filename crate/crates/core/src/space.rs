//! Composite Hilbert space: two-level spin tensored with a truncated Fock space.
//!
//! Basis ordering is spin-major: index = s·(N+1) + n, with s = 0 for |0⟩_s
//! and s = 1 for |−1⟩_s. An operator `X` on the mechanics alone therefore
//! embeds as `1_spin ⊗ X` (block diagonal).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPIN_DIM: usize = 2;

/// Default bound on the combined population of the two highest Fock levels.
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-6;

/// Spin basis states of the two-level reduction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpinLevel {
    /// |0⟩_s, σ_z = +1, no spin-mechanical force.
    Zero,
    /// |−1⟩_s, σ_z = −1, force on.
    MinusOne,
}

impl SpinLevel {
    pub fn index(self) -> usize {
        match self {
            SpinLevel::Zero => 0,
            SpinLevel::MinusOne => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HilbertSpace {
    fock_cutoff: usize,
}

impl HilbertSpace {
    pub fn new(fock_cutoff: usize) -> Result<Self> {
        if fock_cutoff < 1 {
            return Err(Error::InvalidParameter(format!(
                "fock cutoff must be at least 1, got {fock_cutoff}"
            )));
        }
        Ok(Self { fock_cutoff })
    }

    /// Highest retained phonon number N.
    pub fn fock_cutoff(&self) -> usize {
        self.fock_cutoff
    }

    /// Number of mechanical levels, N + 1.
    pub fn mech_dim(&self) -> usize {
        self.fock_cutoff + 1
    }

    pub fn spin_dim(&self) -> usize {
        SPIN_DIM
    }

    pub fn total_dim(&self) -> usize {
        SPIN_DIM * self.mech_dim()
    }

    pub fn index(&self, spin: SpinLevel, n: usize) -> usize {
        debug_assert!(n <= self.fock_cutoff);
        spin.index() * self.mech_dim() + n
    }

    /// Phonon number of composite basis index `i`.
    pub fn phonon_number(&self, i: usize) -> usize {
        i % self.mech_dim()
    }

    /// Spin block (0 or 1) of composite basis index `i`.
    pub fn spin_block(&self, i: usize) -> usize {
        i / self.mech_dim()
    }
}

pub fn make_space(fock_cutoff: usize) -> Result<HilbertSpace> {
    HilbertSpace::new(fock_cutoff)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        assert_eq!(make_space(1).unwrap().total_dim(), 4);
        assert_eq!(make_space(39).unwrap().total_dim(), 80);
        assert!(make_space(0).is_err());
    }

    #[test]
    fn indexing_is_spin_major() {
        let s = make_space(3).unwrap();
        assert_eq!(s.index(SpinLevel::Zero, 2), 2);
        assert_eq!(s.index(SpinLevel::MinusOne, 0), 4);
        assert_eq!(s.phonon_number(6), 2);
        assert_eq!(s.spin_block(6), 1);
    }
}
