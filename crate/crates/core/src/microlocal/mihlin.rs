//! Finite-difference estimate of the Mihlin constant
//! `A = max_{|α| ≤ ⌊d/2⌋+1} sup |∂^α m(ξ)| |ξ|^{|α|}`.

use serde::Serialize;

use super::symbol::MultiplierSymbol;
use crate::error::{invalid, Error, Result};
use crate::sphere_fn::multi_indices;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MihlinEstimate {
    /// Max over samples and `1 ≤ |α| ≤ ⌊d/2⌋+1` of `|∂^α m| |ξ|^{|α|}`.
    pub a_est: f64,
    /// `sup |m|` over the samples.
    pub sup_norm: f64,
    /// Per-order maxima, index `k` holding `|α| = k + 1`.
    pub per_order: Vec<f64>,
    /// Relative step used (the estimate at half this step agreed).
    pub fd_step: f64,
}

impl MihlinEstimate {
    /// `A + ‖m‖_∞`, the quantity the multiplier theorem bounds the weak norm by.
    pub fn bound(&self) -> f64 {
        self.a_est + self.sup_norm
    }
}

/// Nested central differences: `∂^α m(ξ)` with step `h`, second order.
fn derivative(m: &MultiplierSymbol, alpha: &mut [usize], xi: &mut [f64], h: f64) -> num_complex::Complex64 {
    let Some(k) = alpha.iter().position(|&a| a > 0) else {
        return m.eval(xi);
    };
    alpha[k] -= 1;
    let x0 = xi[k];
    xi[k] = x0 + h;
    let plus = derivative(m, alpha, xi, h);
    xi[k] = x0 - h;
    let minus = derivative(m, alpha, xi, h);
    xi[k] = x0;
    alpha[k] += 1;
    (plus - minus) / (2.0 * h)
}

fn scan(m: &MultiplierSymbol, dim: usize, samples: &[Vec<f64>], rel_step: f64) -> (Vec<f64>, f64) {
    let top = dim / 2 + 1;
    let mut per_order = vec![0.0f64; top];
    let mut sup: f64 = 0.0;
    let mut xi = vec![0.0; dim];
    for s in samples {
        let r = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        sup = sup.max(m.eval(s).norm());
        let h = rel_step * r;
        for order in 1..=top {
            for mut alpha in multi_indices(dim, order) {
                xi.copy_from_slice(s);
                let v = derivative(m, &mut alpha, &mut xi, h).norm() * r.powi(order as i32);
                per_order[order - 1] = per_order[order - 1].max(v);
            }
        }
    }
    (per_order, sup)
}

/// Estimates the Mihlin constant on `samples` with a step `fd_step·|ξ|`.
///
/// The scan is repeated at half the step; if the two maxima disagree by more
/// than 50% the step is too coarse for the symbol and an error is returned.
pub fn mihlin_estimate(
    m: &MultiplierSymbol,
    dim: usize,
    samples: &[Vec<f64>],
    fd_step: f64,
) -> Result<MihlinEstimate> {
    if !(fd_step > 0.0 && fd_step < 0.5) {
        return Err(invalid("fd_step", format!("relative step {fd_step} not in (0, 1/2)")));
    }
    if samples.is_empty() {
        return Err(invalid("sample_frequencies", "no samples"));
    }
    if let Some(s) = samples.iter().find(|s| s.len() != dim || s.iter().all(|&x| x == 0.0)) {
        return Err(invalid("sample_frequencies", format!("bad sample {s:?} (wrong length or ξ = 0)")));
    }
    let (coarse, sup) = scan(m, dim, samples, fd_step);
    let (fine, _) = scan(m, dim, samples, fd_step / 2.0);
    let a_coarse = coarse.iter().cloned().fold(0.0, f64::max);
    let a_fine = fine.iter().cloned().fold(0.0, f64::max);
    if (a_coarse - a_fine).abs() > 0.5 * a_fine.max(a_coarse) {
        return Err(Error::UnstableStep { coarse: a_coarse, fine: a_fine });
    }
    Ok(MihlinEstimate { a_est: a_fine, sup_norm: sup, per_order: fine, fd_step: fd_step / 2.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microlocal::{directional_symbol, one, riesz, BumpProfile};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn samples(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let r = 10f64.powf(rng.gen_range(-2.0..2.0));
                vec![r * a.cos(), r * a.sin()]
            })
            .collect()
    }

    #[test]
    fn constant_symbol() {
        let e = mihlin_estimate(&one(), 2, &samples(50, 1), 1e-3).unwrap();
        assert_eq!(e.a_est, 0.0);
        assert_eq!(e.sup_norm, 1.0);
    }

    #[test]
    fn riesz_symbol_is_stable() {
        let m = riesz(1, 2).unwrap();
        let s = samples(200, 2);
        let a = mihlin_estimate(&m, 2, &s, 1e-3).unwrap();
        let b = mihlin_estimate(&m, 2, &s, 5e-4).unwrap();
        assert!(a.a_est.is_finite() && a.a_est > 0.5);
        assert!((a.a_est - b.a_est).abs() <= 0.1 * b.a_est);
        // ∂_1(ξ_1/|ξ|) = ξ_2²/|ξ|³, so the first-order part is at most 1
        assert!(a.per_order[0] <= 1.0 + 1e-4);
        assert!((a.sup_norm - 1.0).abs() < 0.05);
    }

    #[test]
    fn coarse_step_detected() {
        let m = directional_symbol(&[1.0, 0.0], 32, 0.25, &BumpProfile::plateau()).unwrap();
        let s: Vec<Vec<f64>> = (0..200)
            .map(|i| {
                let t = 4.0 * i as f64 / 199.0 / 256.0;
                vec![t, (1.0 - t * t).sqrt()]
            })
            .collect();
        assert!(matches!(mihlin_estimate(&m, 2, &s, 0.2), Err(Error::UnstableStep { .. })));
    }
}
