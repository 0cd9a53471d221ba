//! Exponent bookkeeping for the admissible parameter tuples.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityParams {
    pub d: usize,
    pub delta: f64,
    pub gamma: f64,
    pub iota: f64,
    pub eps0: f64,
    pub mu: f64,
    #[serde(rename = "N1")]
    pub n1: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AdmissibilityVerdict {
    pub params: AdmissibilityParams,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s4: f64,
    pub admissible: bool,
}

impl AdmissibilityParams {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(invalid("d", "dimension must be ≥ 1"));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(invalid("delta", format!("{} not in (0, 1]", self.delta)));
        }
        if self.n1 == 0 {
            return Err(invalid("N1", "must be a positive integer"));
        }
        for (name, v) in [("gamma", self.gamma), ("iota", self.iota), ("eps0", self.eps0), ("mu", self.mu)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("{v} must be finite and ≥ 0")));
            }
        }
        Ok(())
    }
}

/// `s₁..s₄` with `D = ⌊d/2⌋ + 1`:
/// `s₁ = μ + γ(d-1) + γD - 1 + ε₀ + ι`, `s₂ = s₁ - ε₀`,
/// `s₃ = μ + γ(d-1) + γD - δ + ι`, `s₄ = -ε₀N₁ + γN₁ + 2Dγ + ι`.
pub fn admissible_parameters(p: &AdmissibilityParams) -> AdmissibilityVerdict {
    let d = p.d as f64;
    let dd = (p.d / 2 + 1) as f64;
    let n1 = f64::from(p.n1);
    let common = p.mu + p.gamma * (d - 1.0) + p.gamma * dd;
    let s1 = common - 1.0 + p.eps0 + p.iota;
    let s2 = common - 1.0 + p.iota;
    let s3 = common - p.delta + p.iota;
    let s4 = -p.eps0 * n1 + p.gamma * n1 + 2.0 * dd * p.gamma + p.iota;
    AdmissibilityVerdict { params: *p, s1, s2, s3, s4, admissible: s1.max(s2).max(s3).max(s4) < 0.0 }
}

/// Scans `γ = 2^{-i}`, `i = 1..=40`, with `ι = μ = γ²`, `ε₀ = 10γ`,
/// `N₁ = ⌈2/γ⌉`, and returns the first admissible tuple.
pub fn search_admissible(d: usize, delta: f64) -> Option<AdmissibilityVerdict> {
    (1..=40).find_map(|i| {
        let gamma = (-(i as f64)).exp2();
        let p = AdmissibilityParams {
            d,
            delta,
            gamma,
            iota: gamma * gamma,
            eps0: 10.0 * gamma,
            mu: gamma * gamma,
            n1: (2.0 / gamma).ceil() as u32,
        };
        let v = admissible_parameters(&p);
        v.admissible.then_some(v)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d: usize, delta: f64, gamma: f64, iota: f64, eps0: f64, mu: f64, n1: u32) -> AdmissibilityParams {
        AdmissibilityParams { d, delta, gamma, iota, eps0, mu, n1 }
    }

    #[test]
    fn hand_computed_tuples() {
        let v = admissible_parameters(&params(2, 1.0, 0.0, 0.0, 0.5, 0.0, 1));
        assert_eq!((v.s1, v.s2, v.s3, v.s4), (-0.5, -1.0, -1.0, -0.5));
        assert!(v.admissible);
        let v = admissible_parameters(&params(2, 0.1, 1.0, 0.0, 0.0, 0.0, 1));
        assert!((v.s3 - 2.9).abs() < 1e-15);
        assert!(!v.admissible);
    }

    #[test]
    fn search_finds_tuples_and_respects_ordering() {
        for d in 2..=5 {
            let v = search_admissible(d, 1.0).expect("admissible tuple");
            let p = v.params;
            assert!(p.iota < p.gamma && p.gamma < p.eps0 && p.eps0 < 1.0);
            // recompute independently of the checker
            let dd = (d / 2 + 1) as f64;
            let base = p.mu + p.gamma * (d as f64 - 1.0) + p.gamma * dd + p.iota;
            assert!(base - 1.0 + p.eps0 < 0.0);
            assert!(base - p.delta < 0.0);
            let n1 = f64::from(p.n1);
            assert!(-p.eps0 * n1 + p.gamma * n1 + 2.0 * dd * p.gamma + p.iota < 0.0);
        }
    }

    #[test]
    fn validation() {
        assert!(params(2, 0.0, 0.1, 0.0, 0.1, 0.0, 1).validate().is_err());
        assert!(params(2, 1.0, -0.1, 0.0, 0.1, 0.0, 1).validate().is_err());
        assert!(params(2, 1.0, 0.1, 0.0, 0.1, 0.0, 0).validate().is_err());
        assert!(params(2, 1.0, 0.1, 0.0, 0.1, 0.0, 3).validate().is_ok());
    }
}
