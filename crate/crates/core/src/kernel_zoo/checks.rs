//! Seeded empirical estimates of the size and regularity constants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::kernel::KernelSpec;
use super::{distance, modulus};
use crate::error::{invalid, Error, Result};

/// Draw region for sample points: base points uniform in `[-half_width, half_width)^d`,
/// separations `2^U` with `U` uniform in `[log2_min, log2_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SampleRegion {
    pub half_width: f64,
    pub log2_min: f64,
    pub log2_max: f64,
}

impl Default for SampleRegion {
    fn default() -> Self {
        Self { half_width: 2.0, log2_min: -8.0, log2_max: 4.0 }
    }
}

impl SampleRegion {
    fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(invalid("half_width", "must be positive and finite"));
        }
        if !(self.log2_min <= self.log2_max) || !self.log2_max.is_finite() || !self.log2_min.is_finite() {
            return Err(invalid("log2_min", "scale range must be finite with log2_min ≤ log2_max"));
        }
        Ok(())
    }
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let phi = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    match dim {
        2 => vec![phi.cos(), phi.sin()],
        _ => {
            let z: f64 = rng.gen_range(-1.0..1.0);
            let rho = (1.0 - z * z).sqrt();
            let mut v = vec![rho * phi.cos(), rho * phi.sin(), z];
            v.resize(dim, 0.0);
            v
        }
    }
}

/// Seeded generator of pairs `x ≠ y`.
#[derive(Debug)]
pub struct PairSampler {
    dim: usize,
    region: SampleRegion,
    rng: ChaCha8Rng,
}

impl PairSampler {
    pub fn new(dim: usize, region: SampleRegion, seed: u64) -> Result<Self> {
        region.validate()?;
        Ok(Self { dim, region, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    fn point(&mut self) -> Vec<f64> {
        let w = self.region.half_width;
        (0..self.dim).map(|_| self.rng.gen_range(-w..w)).collect()
    }

    fn scale(&mut self) -> f64 {
        let (a, b) = (self.region.log2_min, self.region.log2_max);
        let u = if a == b { a } else { self.rng.gen_range(a..=b) };
        u.exp2()
    }

    pub fn sample(&mut self) -> (Vec<f64>, Vec<f64>) {
        let x = self.point();
        let r = self.scale();
        let v = unit_vector(&mut self.rng, self.dim);
        let y = x.iter().zip(&v).map(|(a, b)| a + r * b).collect();
        (x, y)
    }
}

/// Seeded generator of triples `(p, q, y)` with `|p - y| > 2|p - q|`.
///
/// The same draw serves both slots: `(x₁, x₂, y) = (p, q, y)` for the first
/// and `(x, y₁, y₂) = (y, p, q)` for the mirrored quotient.
#[derive(Debug)]
pub struct TripleSampler {
    pairs: PairSampler,
}

impl TripleSampler {
    pub fn new(dim: usize, region: SampleRegion, seed: u64) -> Result<Self> {
        Ok(Self { pairs: PairSampler::new(dim, region, seed)? })
    }

    pub fn sample(&mut self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (p, y) = self.pairs.sample();
        let r = distance(&p, &y);
        // sqrt puts more mass near the separation boundary, where the sup lives
        let rho = loop {
            let u: f64 = self.pairs.rng.gen();
            let rho = 0.5 * u.sqrt();
            if rho > 0.0 {
                break rho;
            }
        };
        let v = self.step_direction(&p, &y, r);
        let q = p.iter().zip(&v).map(|(a, b)| a + rho * r * b).collect();
        (p, q, y)
    }

    /// Unit step from `p`, at angle `π u²` from the direction of `y`: every
    /// direction stays possible, but steps towards `y` (where `|q - y|` is
    /// smallest and the quotients peak) are drawn far more often.
    fn step_direction(&mut self, p: &[f64], y: &[f64], r: f64) -> Vec<f64> {
        let w: Vec<f64> = y.iter().zip(p).map(|(a, b)| (a - b) / r).collect();
        let perp = loop {
            let z = unit_vector(&mut self.pairs.rng, self.pairs.dim);
            let dot: f64 = z.iter().zip(&w).map(|(a, b)| a * b).sum();
            let e: Vec<f64> = z.iter().zip(&w).map(|(a, b)| a - dot * b).collect();
            let n = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-3 {
                break e.into_iter().map(|x| x / n).collect::<Vec<f64>>();
            }
        };
        let u: f64 = self.pairs.rng.gen();
        let angle = std::f64::consts::PI * u * u;
        w.iter().zip(&perp).map(|(a, b)| angle.cos() * a + angle.sin() * b).collect()
    }
}

/// Result of [`check_regularity`]: first-slot and mirrored second-slot sups.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegularityEstimate {
    pub first_slot: f64,
    pub second_slot: f64,
    pub samples: usize,
}

impl RegularityEstimate {
    pub fn combined(&self) -> f64 {
        self.first_slot.max(self.second_slot)
    }
}

fn finite_or(value: f64, what: &str, pts: &[&[f64]]) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite {
            value,
            context: format!("{what} at {pts:?}"),
        })
    }
}

/// `max |K(x,y)|·|x-y|^d` over `count` seeded pairs.
pub fn check_size(kernel: &KernelSpec, sampler: &mut PairSampler, count: usize) -> Result<f64> {
    if count == 0 {
        return Err(invalid("count", "must be ≥ 1"));
    }
    let d = kernel.dim() as i32;
    let mut best: f64 = 0.0;
    for _ in 0..count {
        let (x, y) = sampler.sample();
        let k = kernel.eval(&x, &y);
        // dividing by the same power the power kernel uses keeps its quotient exactly 1
        let q = modulus(k) / distance(&x, &y).powi(-d);
        best = best.max(finite_or(q, "size quotient", &[&x, &y])?);
    }
    Ok(best)
}

/// Seeded sup of the two regularity quotients.
pub fn check_regularity(
    kernel: &KernelSpec,
    sampler: &mut TripleSampler,
    count: usize,
) -> Result<RegularityEstimate> {
    if count == 0 {
        return Err(invalid("count", "must be ≥ 1"));
    }
    let d = kernel.dim() as f64;
    let delta = kernel.holder_delta();
    let mut est = RegularityEstimate { first_slot: 0.0, second_slot: 0.0, samples: count };
    for _ in 0..count {
        let (p, q, y) = sampler.sample();
        let far = distance(&p, &y);
        let near = distance(&p, &q);
        if !(far > 2.0 * near) || near == 0.0 {
            return Err(Error::Degenerate(format!(
                "triple sampler violated separation: |x1-y| = {far}, |x1-x2| = {near}"
            )));
        }
        let scale = far.powf(d + delta) / near.powf(delta);
        let first = (kernel.eval(&p, &y) - kernel.eval(&q, &y)).norm() * scale;
        let second = (kernel.eval(&y, &p) - kernel.eval(&y, &q)).norm() * scale;
        est.first_slot = est.first_slot.max(finite_or(first, "first-slot quotient", &[&p, &q, &y])?);
        est.second_slot = est.second_slot.max(finite_or(second, "second-slot quotient", &[&y, &p, &q])?);
    }
    Ok(est)
}
