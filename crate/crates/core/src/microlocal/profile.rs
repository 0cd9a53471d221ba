//! Smooth compactly supported radial profiles.
//!
//! All cut-offs are assembled from the C^∞ transition
//! `S(t) = e(t) / (e(t) + e(1 - t))`, `e(t) = exp(-1/t)` for `t > 0`.

use serde::{Deserialize, Serialize};

use crate::sphere_fn::sphere_measure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// `φ`, supported in `[1/2, 2]`, dyadic dilates sum to one.
    PhiAnnulus,
    /// `ζ`, one on `[0, 1/2]`, zero past `1`.
    ZetaCap,
    /// `Φ`, one on `[0, 2]`, zero past `4`.
    PhiPlateau,
    /// `ψ`, one on `[0, 1]`, zero from `2` on.
    PsiLowpass,
    /// `η`, nonnegative bump on the unit ball with unit mass in `R^d`.
    EtaMollifier,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpProfile {
    kind: ProfileKind,
    /// Mass normaliser, only meaningful for `η`.
    scale: f64,
    dim: usize,
}

fn edge(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step from 0 (at `t ≤ 0`) to 1 (at `t ≥ 1`).
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = edge(t);
        a / (a + edge(1.0 - t))
    }
}

fn lowpass(r: f64) -> f64 {
    1.0 - smooth_step(r - 1.0)
}

fn raw_bump(r: f64) -> f64 {
    if r < 1.0 {
        (-1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

/// `|S^{d-1}| ∫_0^1 exp(-1/(1-r²)) r^{d-1} dr` by composite Simpson.
fn bump_mass(dim: usize) -> f64 {
    const INTERVALS: usize = 1 << 16;
    let h = 1.0 / INTERVALS as f64;
    let f = |r: f64| raw_bump(r) * r.powi(dim as i32 - 1);
    let mut s = f(0.0) + f(1.0);
    for i in 1..INTERVALS {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    sphere_measure(dim) * s * h / 3.0
}

impl BumpProfile {
    pub fn phi() -> Self {
        Self::plain(ProfileKind::PhiAnnulus)
    }

    pub fn zeta() -> Self {
        Self::plain(ProfileKind::ZetaCap)
    }

    pub fn plateau() -> Self {
        Self::plain(ProfileKind::PhiPlateau)
    }

    pub fn psi() -> Self {
        Self::plain(ProfileKind::PsiLowpass)
    }

    /// The mollifier `η` normalised to unit mass in `R^dim`.
    pub fn eta(dim: usize) -> Self {
        Self {
            kind: ProfileKind::EtaMollifier,
            scale: 1.0 / bump_mass(dim),
            dim,
        }
    }

    fn plain(kind: ProfileKind) -> Self {
        Self {
            kind,
            scale: 1.0,
            dim: 0,
        }
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    /// Dimension the mass of `η` refers to (`0` for the other kinds).
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Closed radial support `[a, b]`.
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            ProfileKind::PhiAnnulus => (0.5, 2.0),
            ProfileKind::ZetaCap => (0.0, 1.0),
            ProfileKind::PhiPlateau => (0.0, 4.0),
            ProfileKind::PsiLowpass => (0.0, 2.0),
            ProfileKind::EtaMollifier => (0.0, 1.0),
        }
    }

    /// Value at radius `|t|`.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let r = t.abs();
        match self.kind {
            ProfileKind::PhiAnnulus => lowpass(r) - lowpass(2.0 * r),
            ProfileKind::ZetaCap => 1.0 - smooth_step(2.0 * r - 1.0),
            ProfileKind::PhiPlateau => 1.0 - smooth_step(0.5 * (r - 2.0)),
            ProfileKind::PsiLowpass => lowpass(r),
            ProfileKind::EtaMollifier => self.scale * raw_bump(r),
        }
    }

    /// Value at `|x|` for a vector argument.
    #[inline]
    pub fn eval_vec(&self, x: &[f64]) -> f64 {
        self.eval(x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }
}
