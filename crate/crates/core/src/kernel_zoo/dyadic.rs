//! Dyadic pieces `K_j = φ(2^{-j}|x-y|) K` and their mollifications `K_j^n`.

use std::sync::Arc;

use num_complex::Complex64;

use super::distance;
use super::kernel::KernelSpec;
use crate::error::{invalid, Result};
use crate::microlocal::{BumpProfile, ProfileKind};

/// Mollification depth `⌊2 log₂(n)/δ⌋ + 2`.
///
/// # Panics
/// If `n < 2` or `δ ∉ (0, 1]`.
pub fn l_delta(n: u32, delta: f64) -> i32 {
    assert!(n >= 2, "l_delta needs n ≥ 2, got {n}");
    assert!(delta > 0.0 && delta <= 1.0, "l_delta needs δ ∈ (0, 1], got {delta}");
    (2.0 * f64::from(n).log2() / delta).floor() as i32 + 2
}

/// Minimum tensor quadrature points per axis for a mollified piece.
pub const MIN_MOLLIFIER_RESOLUTION: usize = 16;
/// Default tensor quadrature points per axis.
pub const DEFAULT_MOLLIFIER_RESOLUTION: usize = 32;

/// Discretised mollifier: midpoint nodes `u_i ∈ [-1,1]^d` with `η(u_i) > 0`
/// and weights normalised to unit total mass.
#[derive(Clone, Debug)]
pub struct Mollification {
    n: u32,
    l: i32,
    resolution: usize,
    eta: BumpProfile,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    raw_mass: f64,
}

impl Mollification {
    pub fn new(dim: usize, n: u32, delta: f64, eta: BumpProfile, resolution: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid("n", format!("mollification level must be ≥ 2, got {n}")));
        }
        if resolution < MIN_MOLLIFIER_RESOLUTION {
            return Err(crate::Error::ResolutionTooSmall { got: resolution, min: MIN_MOLLIFIER_RESOLUTION });
        }
        if eta.kind() != ProfileKind::EtaMollifier || eta.dim() != dim {
            return Err(invalid("eta", "expected the unit-mass mollifier profile of matching dimension"));
        }
        let h = 2.0 / resolution as f64;
        let total = resolution.pow(dim as u32);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut u = vec![0.0; dim];
        for flat in 0..total {
            let mut rest = flat;
            for k in (0..dim).rev() {
                u[k] = -1.0 + h * ((rest % resolution) as f64 + 0.5);
                rest /= resolution;
            }
            let w = eta.eval_vec(&u);
            if w > 0.0 {
                nodes.extend_from_slice(&u);
                weights.push(w);
            }
        }
        let cell = h.powi(dim as i32);
        let raw_mass = weights.iter().sum::<f64>() * cell;
        let sum: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= sum);
        Ok(Self {
            n,
            l: l_delta(n, delta),
            resolution,
            eta,
            nodes,
            weights,
            raw_mass,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn l(&self) -> i32 {
        self.l
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn eta(&self) -> &BumpProfile {
        &self.eta
    }

    /// Mass of the un-normalised midpoint rule; its distance from 1 is the
    /// quadrature error the normalisation removes.
    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    /// `Σ_i w_i g(x - s u_i)`, the discrete `∫ η(u) g(x - s u) du`.
    pub fn mollify(&self, x: &[f64], s: f64, mut g: impl FnMut(&[f64]) -> Complex64) -> Complex64 {
        let dim = x.len();
        let mut z = vec![0.0; dim];
        let mut acc = Complex64::new(0.0, 0.0);
        for (u, &w) in self.nodes.chunks_exact(dim).zip(&self.weights) {
            for k in 0..dim {
                z[k] = x[k] - s * u[k];
            }
            acc += w * g(&z);
        }
        acc
    }
}

/// `K_j`, optionally mollified to `K_j^n`.
#[derive(Clone, Debug)]
pub struct DyadicPiece {
    base: KernelSpec,
    j: i32,
    phi: BumpProfile,
    mollification: Option<Arc<Mollification>>,
}

/// `K_j(x,y) = φ(2^{-j}|x-y|) K(x,y)`.
pub fn dyadic_piece(kernel: &KernelSpec, j: i32, phi: &BumpProfile) -> Result<DyadicPiece> {
    if phi.kind() != ProfileKind::PhiAnnulus {
        return Err(invalid("phi", "dyadic pieces need the annulus profile"));
    }
    Ok(DyadicPiece { base: kernel.clone(), j, phi: *phi, mollification: None })
}

/// `K_j^n(x,y) = ∫ η_{j-l}(x-z) K_j(z,y) dz` with `l = l_δ(n)` and
/// `η_s(x) = 2^{-sd} η(2^{-s} x)`.
pub fn mollified_piece(
    piece: &DyadicPiece,
    n: u32,
    eta: &BumpProfile,
    resolution: usize,
) -> Result<DyadicPiece> {
    let m = Mollification::new(piece.base.dim(), n, piece.base.holder_delta(), *eta, resolution)?;
    Ok(DyadicPiece { mollification: Some(Arc::new(m)), ..piece.clone() })
}

impl DyadicPiece {
    pub fn base(&self) -> &KernelSpec {
        &self.base
    }

    pub fn j(&self) -> i32 {
        self.j
    }

    pub fn mollification(&self) -> Option<&Mollification> {
        self.mollification.as_deref()
    }

    /// Mollifier radius `2^{j-l}`, if mollified.
    pub fn mollifier_radius(&self) -> Option<f64> {
        self.mollification.as_ref().map(|m| f64::from(self.j - m.l).exp2())
    }

    /// Radii `(inner, outer)` outside which the piece vanishes.
    pub fn support(&self) -> (f64, f64) {
        let lo = f64::from(self.j - 1).exp2();
        let hi = f64::from(self.j + 1).exp2();
        match self.mollifier_radius() {
            Some(s) => ((lo - s).max(0.0), hi + s),
            None => (lo, hi),
        }
    }

    fn unmollified(&self, x: &[f64], y: &[f64]) -> Complex64 {
        let r = distance(x, y);
        let w = self.phi.eval(r * f64::from(-self.j).exp2());
        if w == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            w * self.base.eval(x, y)
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Complex64 {
        match &self.mollification {
            None => self.unmollified(x, y),
            Some(m) => {
                let (lo, hi) = self.support();
                let r = distance(x, y);
                if r < lo || r > hi {
                    return Complex64::new(0.0, 0.0);
                }
                let s = f64::from(self.j - m.l).exp2();
                m.mollify(x, s, |z| self.unmollified(z, y))
            }
        }
    }

    /// The piece as a standalone kernel with declared support.
    pub fn to_kernel(&self) -> KernelSpec {
        let me = self.clone();
        let label = match &self.mollification {
            Some(m) => format!("{}|j={},n={}", self.base.label(), self.j, m.n),
            None => format!("{}|j={}", self.base.label(), self.j),
        };
        let (lo, hi) = self.support();
        KernelSpec::new(
            self.base.dim(),
            label,
            self.base.holder_delta(),
            self.base.is_translation_invariant(),
            move |x, y| me.eval(x, y),
        )
        .expect("base kernel already validated")
        .with_support(lo, hi)
    }
}
