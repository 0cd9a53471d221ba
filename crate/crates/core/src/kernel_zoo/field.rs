//! Lipschitz fields `A` and analytic profiles `F` that parametrise the
//! commutator kernels.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};

type FieldFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type DerivFn = dyn Fn(&[usize], &[f64]) -> Option<f64> + Send + Sync;
type BoundFn = dyn Fn(&[usize]) -> Option<f64> + Send + Sync;

/// A real field `A` on `R^d` with `‖∇A‖_∞` and, optionally, higher
/// derivatives `A_α = ∂^α A` together with their sup bounds.
#[derive(Clone)]
pub struct LipschitzField {
    label: String,
    dim: usize,
    gradient_bound: f64,
    eval: Arc<FieldFn>,
    derivative: Arc<DerivFn>,
    derivative_bound: Arc<BoundFn>,
}

impl fmt::Debug for LipschitzField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LipschitzField")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("gradient_bound", &self.gradient_bound)
            .finish()
    }
}

fn order(alpha: &[usize]) -> usize {
    alpha.iter().sum()
}

impl LipschitzField {
    /// `derivative(α, x)` returns `A_α(x)` or `None` when that order is not
    /// available; `derivative(0, x)` must agree with `eval`.
    /// `gradient_bound` may be infinite for fields that are only locally
    /// Lipschitz.
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        gradient_bound: f64,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(&[usize], &[f64]) -> Option<f64> + Send + Sync + 'static,
        derivative_bound: impl Fn(&[usize]) -> Option<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(gradient_bound > 0.0) {
            return Err(invalid("gradient_bound", "must be > 0"));
        }
        Ok(Self {
            label: label.into(),
            dim,
            gradient_bound,
            eval: Arc::new(eval),
            derivative: Arc::new(derivative),
            derivative_bound: Arc::new(derivative_bound),
        })
    }

    /// `A(x) = ⟨a, x⟩`.
    pub fn linear(a: &[f64]) -> Result<Self> {
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(invalid("a", "linear field needs a nonzero slope"));
        }
        let a1: Vec<f64> = a.to_vec();
        let a2 = a1.clone();
        let a3 = a1.clone();
        let label = format!(
            "linear:{}",
            a.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        );
        Self::new(
            label,
            a.len(),
            norm,
            move |x| a1.iter().zip(x).map(|(a, x)| a * x).sum(),
            move |alpha, x| match order(alpha) {
                0 => Some(a2.iter().zip(x).map(|(a, x)| a * x).sum()),
                1 => Some(a2[alpha.iter().position(|&k| k == 1).unwrap()]),
                _ => Some(0.0),
            },
            move |alpha| match order(alpha) {
                0 => None,
                1 => Some(a3[alpha.iter().position(|&k| k == 1).unwrap()].abs()),
                _ => Some(0.0),
            },
        )
    }

    /// `A(x) = sqrt(1 + |x|²)`, derivatives available up to order two.
    pub fn sqrt1p(dim: usize) -> Self {
        let value = |x: &[f64]| (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt();
        Self::new(
            "sqrt1p",
            dim,
            1.0,
            value,
            move |alpha, x| {
                let s = value(x);
                let nz: Vec<usize> = (0..alpha.len()).filter(|&i| alpha[i] > 0).collect();
                match order(alpha) {
                    0 => Some(s),
                    1 => Some(x[nz[0]] / s),
                    2 if nz.len() == 1 => {
                        let i = nz[0];
                        Some((1.0 - x[i] * x[i] / (s * s)) / s)
                    }
                    2 => Some(-x[nz[0]] * x[nz[1]] / (s * s * s)),
                    _ => None,
                }
            },
            |alpha| match order(alpha) {
                0 => None,
                1 | 2 => Some(1.0),
                _ => None,
            },
        )
        .expect("valid field")
    }

    /// `A(x) = x_1²`: not globally Lipschitz, but with bounded second
    /// derivatives, which is what the Bajsanski–Coifman kernel needs.
    pub fn quadratic(dim: usize) -> Self {
        Self::new(
            "quadratic",
            dim,
            f64::INFINITY,
            |x| x[0] * x[0],
            |alpha, x| {
                let rest = order(&alpha[1..]);
                Some(match (alpha[0], rest) {
                    (0, 0) => x[0] * x[0],
                    (1, 0) => 2.0 * x[0],
                    (2, 0) => 2.0,
                    _ => 0.0,
                })
            },
            |alpha| {
                let rest = order(&alpha[1..]);
                match (alpha[0], rest) {
                    (2, 0) => Some(2.0),
                    (0, 0) | (1, 0) => None,
                    _ => Some(0.0),
                }
            },
        )
        .expect("valid field")
    }

    /// Parses `"linear:a1,a2[,a3]"`, `"sqrt1p"` or `"quadratic"`.
    pub fn from_key(key: &str, dim: usize) -> Result<Self> {
        match key {
            "sqrt1p" => Ok(Self::sqrt1p(dim)),
            "quadratic" => Ok(Self::quadratic(dim)),
            _ => {
                let Some(rest) = key.strip_prefix("linear:") else {
                    return Err(Error::UnknownKey(key.to_string()));
                };
                let a = rest
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| invalid("field", format!("`{key}`: {e}")))?;
                if a.len() != dim {
                    return Err(invalid(
                        "field",
                        format!("`{key}` has {} slopes for dimension {dim}", a.len()),
                    ));
                }
                Self::linear(&a)
            }
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gradient_bound(&self) -> f64 {
        self.gradient_bound
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn derivative(&self, alpha: &[usize], x: &[f64]) -> Option<f64> {
        (self.derivative)(alpha, x)
    }

    pub fn derivative_bound(&self, alpha: &[usize]) -> Option<f64> {
        (self.derivative_bound)(alpha)
    }

    /// Largest `|A(x) - A(y)| / (‖∇A‖_∞ |x - y|)` over the given pairs.
    /// Values above one flag an inconsistent gradient bound.
    pub fn lipschitz_ratio(&self, pairs: &[(Vec<f64>, Vec<f64>)]) -> f64 {
        pairs
            .iter()
            .map(|(x, y)| {
                let d = super::distance(x, y);
                (self.eval(x) - self.eval(y)).abs() / (self.gradient_bound * d)
            })
            .fold(0.0, f64::max)
    }
}

/// An even profile `F` with its derivative, analytic on `|t| ≤ radius`.
#[derive(Clone)]
pub struct AnalyticProfile {
    label: String,
    radius: f64,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    derivative: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for AnalyticProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticProfile")
            .field("label", &self.label)
            .field("radius", &self.radius)
            .finish()
    }
}

impl AnalyticProfile {
    pub fn new(
        label: impl Into<String>,
        radius: f64,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            radius,
            eval: Arc::new(eval),
            derivative: Arc::new(derivative),
        }
    }

    pub fn from_key(key: &str) -> Result<Self> {
        match key {
            "cosh" => Ok(Self::new("cosh", f64::INFINITY, f64::cosh, f64::sinh)),
            "cos" => Ok(Self::new("cos", f64::INFINITY, f64::cos, |t| -t.sin())),
            other => Err(Error::UnknownKey(other.to_string())),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        (self.derivative)(t)
    }

    /// Largest `|F(t) - F(-t)|` over the samples.
    pub fn evenness_defect(&self, samples: &[f64]) -> f64 {
        samples
            .iter()
            .map(|&t| (self.eval(t) - self.eval(-t)).abs())
            .fold(0.0, f64::max)
    }
}
