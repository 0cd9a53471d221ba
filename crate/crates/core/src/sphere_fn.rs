//! Functions on the unit sphere: quadrature, norms, moments and the
//! constant `C_Ω` that scales the weak (1,1) bound.
//!
//! A [`SphereFunction`] is a closed-form evaluator. It is always applied to
//! unit vectors, so every function built here is automatically extended to
//! `R^d \ {0}` as a degree-0 homogeneous function.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Equal-weight quadrature rule on `S^{d-1}` for `d ∈ {2, 3}`.
///
/// Nodes are stored flat (`dim` coordinates per node).
#[derive(Clone, Debug)]
pub struct SphereQuadrature {
    dim: usize,
    nodes: Vec<f64>,
    weight: f64,
}

/// Surface measure of `S^{d-1}`.
pub fn sphere_measure(dim: usize) -> f64 {
    match dim {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        // Γ-function formula, kept for completeness of parameter sweeps.
        _ => {
            let d = dim as f64;
            2.0 * PI.powf(d / 2.0) / gamma_half_integer(dim)
        }
    }
}

// Γ(d/2) for positive integer d.
fn gamma_half_integer(dim: usize) -> f64 {
    if dim % 2 == 0 {
        (1..dim / 2).map(|k| k as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < dim as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

pub const MIN_RESOLUTION: usize = 8;

/// Builds the quadrature rule used for `dθ`.
///
/// For `d = 2` the nodes sit at angles `-π + 2π(i + 1/2)/N`, offset by half
/// a step so that even resolutions never hit the angle `0` where the shipped
/// log-singular sample blows up. For `d = 3` the nodes follow a Fibonacci
/// spiral with equal weights `4π/N`.
pub fn build_quadrature(dim: usize, resolution: usize) -> Result<SphereQuadrature> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::ResolutionTooSmall {
            got: resolution,
            min: MIN_RESOLUTION,
        });
    }
    let n = resolution as f64;
    let nodes = match dim {
        2 => {
            let mut nodes = Vec::with_capacity(2 * resolution);
            for i in 0..resolution {
                let angle = -PI + 2.0 * PI * (i as f64 + 0.5) / n;
                nodes.push(angle.cos());
                nodes.push(angle.sin());
            }
            nodes
        }
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            let mut nodes = Vec::with_capacity(3 * resolution);
            for i in 0..resolution {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / n;
                let rho = (1.0 - z * z).max(0.0).sqrt();
                let azimuth = (golden * i as f64) % (2.0 * PI);
                nodes.push(rho * azimuth.cos());
                nodes.push(rho * azimuth.sin());
                nodes.push(z);
            }
            nodes
        }
        d => return Err(Error::UnsupportedDimension(d)),
    };
    Ok(SphereQuadrature {
        dim,
        nodes,
        weight: sphere_measure(dim) / n,
    })
}

impl SphereQuadrature {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.nodes.chunks_exact(self.dim)
    }

    /// Weight of node `i`. Both rules are equal-weight.
    pub fn weight(&self, _i: usize) -> f64 {
        self.weight
    }

    pub fn total_weight(&self) -> f64 {
        self.weight * self.len() as f64
    }

    /// Typical distance between neighbouring nodes: the arc step for the
    /// circle, `sqrt(4π/N)` for the spiral.
    pub fn spacing(&self) -> f64 {
        match self.dim {
            2 => 2.0 * PI / self.len() as f64,
            _ => (sphere_measure(self.dim) / self.len() as f64).sqrt(),
        }
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.nodes().map(f).sum::<f64>() * self.weight
    }
}

type Evaluator = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A real function `Ω` on `S^{d-1}`, extended homogeneously of degree 0.
#[derive(Clone)]
pub struct SphereFunction {
    dim: usize,
    label: String,
    eval: Arc<Evaluator>,
}

impl fmt::Debug for SphereFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SphereFunction")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .finish()
    }
}

/// Keys of the shipped sample library.
pub const OMEGA_KEYS: &[&str] = &["const1", "theta1", "theta1theta2", "logspike", "zero"];

impl SphereFunction {
    /// Wraps an evaluator that expects unit vectors.
    pub fn new(
        dim: usize,
        label: impl Into<String>,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            label: label.into(),
            eval: Arc::new(eval),
        }
    }

    /// Looks up a shipped sample by its CLI key.
    pub fn from_key(key: &str, dim: usize) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let omega = match key {
            "const1" => Self::new(dim, key, |_| 1.0),
            "zero" => Self::new(dim, key, |_| 0.0),
            "theta1" => Self::new(dim, key, |t| t[0]),
            "theta1theta2" => Self::new(dim, key, |t| t[0] * t[1]),
            // sgn(φ)·log(π/|φ|) in the azimuth of the first two coordinates:
            // odd, unbounded, but in L log L.
            "logspike" => Self::new(dim, key, |t| {
                let phi = t[1].atan2(t[0]);
                if phi == 0.0 || (t[0] == 0.0 && t[1] == 0.0) {
                    0.0
                } else {
                    phi.signum() * (PI / phi.abs()).ln()
                }
            }),
            other => return Err(Error::UnknownKey(other.to_string())),
        };
        Ok(omega)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Evaluates at a unit vector without renormalising.
    #[inline]
    pub fn eval_unit(&self, theta: &[f64]) -> f64 {
        (self.eval)(theta)
    }

    /// Evaluates at `x / |x|`. Returns `0` at the origin.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            return 0.0;
        }
        let mut unit = [0.0; 3];
        for (u, v) in unit.iter_mut().zip(x) {
            *u = v / r;
        }
        (self.eval)(&unit[..x.len()])
    }

    /// Returns `c·Ω`.
    pub fn scaled(&self, c: f64) -> Self {
        let inner = self.eval.clone();
        Self {
            dim: self.dim,
            label: format!("{}*{}", c, self.label),
            eval: Arc::new(move |t| c * inner(t)),
        }
    }

    fn node_values(&self, quad: &SphereQuadrature) -> Result<Vec<f64>> {
        if quad.dim() != self.dim {
            return Err(invalid(
                "quad",
                format!("dimension {} does not match Ω dimension {}", quad.dim(), self.dim),
            ));
        }
        quad.nodes()
            .map(|theta| {
                let v = self.eval_unit(theta);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite {
                        value: v,
                        context: format!("Ω({theta:?}) [{}]", self.label),
                    })
                }
            })
            .collect()
    }
}

/// Norms of `Ω` and the constant `C_Ω`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct OmegaNorms {
    pub l1: f64,
    /// `(q, ‖Ω‖_q)` pairs in request order.
    pub lq: Vec<(f64, f64)>,
    pub llogl: f64,
    /// `None` when `Ω ≡ 0` on the quadrature.
    pub c_omega: Option<f64>,
}

impl OmegaNorms {
    pub fn c_omega(&self) -> Result<f64> {
        self.c_omega
            .ok_or_else(|| Error::Degenerate("C_Ω is undefined for Ω ≡ 0".into()))
    }
}

const CELL_RTOL: f64 = 1e-7;
const CELL_MAX_DEPTH: u32 = 48;

/// Integrals of `g(Ω(θ))` for a vector-valued `g` with `k` components.
///
/// On the circle each quadrature cell is refined by bisection until the
/// one- and two-point midpoint sums agree, so integrable singularities at
/// isolated angles converge without moving the nodes. On `S^2` the plain
/// equal-weight rule is used.
fn cell_integrals(
    omega: &SphereFunction,
    quad: &SphereQuadrature,
    k: usize,
    g: impl Fn(f64, &mut [f64]),
) -> Result<Vec<f64>> {
    if quad.dim() != omega.dim() {
        return Err(invalid(
            "quad",
            format!("dimension {} does not match Ω dimension {}", quad.dim(), omega.dim()),
        ));
    }
    let eval = |angle: f64, out: &mut [f64]| -> Result<()> {
        let theta = [angle.cos(), angle.sin()];
        let v = omega.eval_unit(&theta);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                value: v,
                context: format!("Ω({theta:?}) [{}]", omega.label()),
            });
        }
        g(v, out);
        Ok(())
    };
    let mut total = vec![0.0; k];
    if quad.dim() != 2 {
        let mut out = vec![0.0; k];
        for v in omega.node_values(quad)? {
            g(v, &mut out);
            total.iter_mut().zip(&out).for_each(|(t, o)| *t += o);
        }
        total.iter_mut().for_each(|t| *t *= quad.weight(0));
        return Ok(total);
    }
    let h = 2.0 * PI / quad.len() as f64;
    let mut coarse = vec![0.0; k];
    let mut left = vec![0.0; k];
    let mut right = vec![0.0; k];
    // explicit stack of (centre, width, depth, midpoint estimate)
    let mut stack: Vec<(f64, f64, u32, Vec<f64>)> = Vec::new();
    for i in 0..quad.len() {
        let c = -PI + h * (i as f64 + 0.5);
        eval(c, &mut coarse)?;
        stack.push((c, h, 0, coarse.iter().map(|v| v * h).collect()));
        while let Some((c, w, depth, est)) = stack.pop() {
            let q = w / 4.0;
            eval(c - q, &mut left)?;
            eval(c + q, &mut right)?;
            let half = w / 2.0;
            let mut diff: f64 = 0.0;
            let mut size: f64 = 0.0;
            for j in 0..k {
                let fine = (left[j] + right[j]) * half;
                diff = diff.max((fine - est[j]).abs());
                size = size.max(fine.abs());
            }
            if diff <= CELL_RTOL * size + 1e-300 || depth >= CELL_MAX_DEPTH {
                for j in 0..k {
                    total[j] += (left[j] + right[j]) * half;
                }
            } else {
                stack.push((c - q, half, depth + 1, left.iter().map(|v| v * half).collect()));
                stack.push((c + q, half, depth + 1, right.iter().map(|v| v * half).collect()));
            }
        }
    }
    Ok(total)
}

fn log_plus(a: f64) -> f64 {
    if a < 1.0 {
        0.0
    } else {
        a.ln()
    }
}

pub fn compute_norms(
    omega: &SphereFunction,
    quad: &SphereQuadrature,
    q_list: &[f64],
) -> Result<OmegaNorms> {
    if let Some(&q) = q_list.iter().find(|&&q| !(q > 1.0 && q.is_finite())) {
        return Err(invalid("q_list", format!("exponent {q} must be a finite real > 1")));
    }
    let nq = q_list.len();
    // [|Ω|, |Ω| log(2+|Ω|), |Ω|^q...]
    let first = cell_integrals(omega, quad, 2 + nq, |v, out| {
        let a = v.abs();
        out[0] = a;
        out[1] = a * (2.0 + a).ln();
        for (o, &q) in out[2..].iter_mut().zip(q_list) {
            *o = a.powf(q);
        }
    })?;
    let (l1, llogl) = (first[0], first[1]);
    let lq = q_list
        .iter()
        .zip(&first[2..])
        .map(|(&q, &s)| (q, s.powf(1.0 / q)))
        .collect();
    let c_omega = if l1 > 0.0 {
        let tail = cell_integrals(omega, quad, 1, |v, out| {
            out[0] = v.abs() * (1.0 + log_plus(v.abs() / l1));
        })?;
        Some(llogl + tail[0])
    } else {
        None
    };
    Ok(OmegaNorms {
        l1,
        lq,
        llogl,
        c_omega,
    })
}

/// All multi-indices of length `dim` with `|α| = order`, in lexicographically
/// descending order of the first component.
pub fn multi_indices(dim: usize, order: usize) -> Vec<Vec<usize>> {
    fn fill(dim: usize, remaining: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == dim - 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in (0..=remaining).rev() {
            prefix.push(a);
            fill(dim, remaining - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    fill(dim, order, &mut Vec::with_capacity(dim), &mut out);
    out
}

/// `θ^α = Π θ_j^{α_j}`.
pub fn monomial(theta: &[f64], alpha: &[usize]) -> f64 {
    theta
        .iter()
        .zip(alpha)
        .map(|(t, &a)| t.powi(a as i32))
        .product()
}

/// `∫ Ω(θ) θ^α dθ` on the quadrature.
pub fn moment(omega: &SphereFunction, quad: &SphereQuadrature, alpha: &[usize]) -> Result<f64> {
    if alpha.len() != omega.dim() {
        return Err(invalid(
            "alpha",
            format!("multi-index has {} entries, dimension is {}", alpha.len(), omega.dim()),
        ));
    }
    let values = omega.node_values(quad)?;
    Ok(values
        .iter()
        .zip(quad.nodes())
        .map(|(v, theta)| v * monomial(theta, alpha))
        .sum::<f64>()
        * quad.weight(0))
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentCheck {
    pub alpha: Vec<usize>,
    pub value: f64,
    pub passes: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilityReport {
    pub label: String,
    pub cancellation_order: usize,
    pub tolerance: f64,
    pub moments: Vec<MomentCheck>,
    pub passes: bool,
    pub norms: OmegaNorms,
}

/// Checks the moment conditions `∫ Ω θ^α = 0` for every `|α| = order`.
pub fn admissibility_report(
    omega: &SphereFunction,
    quad: &SphereQuadrature,
    cancellation_order: usize,
    tol: f64,
) -> Result<AdmissibilityReport> {
    let moments = multi_indices(omega.dim(), cancellation_order)
        .into_iter()
        .map(|alpha| {
            let value = moment(omega, quad, &alpha)?;
            Ok(MomentCheck {
                passes: value.abs() <= tol,
                alpha,
                value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let passes = moments.iter().all(|m| m.passes);
    Ok(AdmissibilityReport {
        label: omega.label().to_string(),
        cancellation_order,
        tolerance: tol,
        passes,
        moments,
        norms: compute_norms(omega, quad, &[2.0])?,
    })
}
