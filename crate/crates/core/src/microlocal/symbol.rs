//! Fourier multiplier symbols and their application on grids.
//!
//! Values at `ξ = 0`: degree-0 homogeneous symbols are undefined there, so
//! each kind fixes one. Directional cut-offs `Φ(...)` and `one` take 1,
//! their complements and Riesz symbols take 0, and partition pieces `Γ_v`
//! take `1/card`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::profile::{BumpProfile, ProfileKind};
use crate::error::{invalid, Error, Result};
use crate::grid::{apply_symbol_values, GridFunction};

type SymbolFn = dyn Fn(&[f64]) -> Complex64 + Send + Sync;

#[derive(Clone)]
pub struct MultiplierSymbol {
    label: String,
    homogeneous: bool,
    at_zero: Complex64,
    eval: Arc<SymbolFn>,
}

impl fmt::Debug for MultiplierSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultiplierSymbol")
            .field("label", &self.label)
            .field("homogeneous", &self.homogeneous)
            .field("at_zero", &self.at_zero)
            .finish()
    }
}

impl MultiplierSymbol {
    pub fn new(
        label: impl Into<String>,
        homogeneous: bool,
        at_zero: Complex64,
        eval: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self { label: label.into(), homogeneous, at_zero, eval: Arc::new(eval) }
    }

    pub fn real(
        label: impl Into<String>,
        homogeneous: bool,
        at_zero: f64,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(label, homogeneous, Complex64::new(at_zero, 0.0), move |xi| Complex64::new(eval(xi), 0.0))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_homogeneous(&self) -> bool {
        self.homogeneous
    }

    pub fn eval(&self, xi: &[f64]) -> Complex64 {
        if xi.iter().all(|&x| x == 0.0) {
            self.at_zero
        } else {
            (self.eval)(xi)
        }
    }

    /// Pointwise product.
    pub fn times(&self, other: &MultiplierSymbol) -> MultiplierSymbol {
        let (a, b) = (self.clone(), other.clone());
        MultiplierSymbol::new(
            format!("{}*{}", self.label, other.label),
            self.homogeneous && other.homogeneous,
            self.at_zero * other.at_zero,
            move |xi| a.eval(xi) * b.eval(xi),
        )
    }

    /// `1 - m`.
    pub fn complement(&self) -> MultiplierSymbol {
        let a = self.clone();
        MultiplierSymbol::new(
            format!("1-{}", self.label),
            self.homogeneous,
            1.0 - self.at_zero,
            move |xi| 1.0 - a.eval(xi),
        )
    }
}

/// `m ≡ 1`.
pub fn one() -> MultiplierSymbol {
    MultiplierSymbol::real("one", true, 1.0, |_| 1.0)
}

/// `-i ξ_j / |ξ|` (`axis` is 1-based).
pub fn riesz(axis: usize, dim: usize) -> Result<MultiplierSymbol> {
    if axis == 0 || axis > dim {
        return Err(invalid("axis", format!("Riesz axis {axis} outside 1..={dim}")));
    }
    let k = axis - 1;
    Ok(MultiplierSymbol::new(format!("riesz:{axis}"), true, Complex64::new(0.0, 0.0), move |xi| {
        let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        Complex64::new(0.0, -xi[k] / r)
    }))
}

/// `ξ ↦ Φ(2^{nγ}⟨e, ξ/|ξ|⟩)`.
pub fn directional_symbol(e: &[f64], n: u32, gamma: f64, phi: &BumpProfile) -> Result<MultiplierSymbol> {
    if phi.kind() != ProfileKind::PhiPlateau {
        return Err(invalid("Phi", "directional symbols use the plateau profile"));
    }
    let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(invalid("e", "direction must be a unit vector"));
    }
    let e = e.to_vec();
    let scale = (f64::from(n) * gamma).exp2();
    let phi = *phi;
    Ok(MultiplierSymbol::real(format!("dir:{n},{gamma}"), true, 1.0, move |xi| {
        let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dot: f64 = e.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>() / r;
        phi.eval(scale * dot)
    }))
}

/// `(ψ(2^k ξ), β_k(ξ) = ψ(2^k ξ) - ψ(2^{k+1} ξ))`.
pub fn lp_symbols(k: i32, psi: &BumpProfile) -> Result<(MultiplierSymbol, MultiplierSymbol)> {
    if psi.kind() != ProfileKind::PsiLowpass {
        return Err(invalid("psi", "Littlewood–Paley symbols use the lowpass profile"));
    }
    let psi = *psi;
    let a = f64::from(k).exp2();
    let b = f64::from(k + 1).exp2();
    let radius = |xi: &[f64]| xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    let low = MultiplierSymbol::real(format!("psi:{k}"), false, 1.0, move |xi| psi.eval(a * radius(xi)));
    let band = MultiplierSymbol::real(format!("lp:{k}"), false, 0.0, move |xi| {
        let r = radius(xi);
        psi.eval(a * r) - psi.eval(b * r)
    });
    Ok((low, band))
}

/// Parses `one`, `riesz:j`, `lp:k` (the band `β_k`), or `dir:n,gamma,v`
/// where `v` indexes `net_vectors`.
pub fn symbol_from_key(key: &str, dim: usize, net_vectors: Option<&[Vec<f64>]>) -> Result<MultiplierSymbol> {
    let (name, arg) = match key.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (key, None),
    };
    let bad = |why: String| invalid("symbol", format!("`{key}`: {why}"));
    match (name, arg) {
        ("one", None) => Ok(one()),
        ("riesz", Some(a)) => riesz(a.parse().map_err(|e| bad(format!("{e}")))?, dim),
        ("lp", Some(a)) => {
            let k: i32 = a.parse().map_err(|e| bad(format!("{e}")))?;
            Ok(lp_symbols(k, &BumpProfile::psi())?.1)
        }
        ("dir", Some(a)) => {
            let parts: Vec<&str> = a.split(',').collect();
            if parts.len() != 3 {
                return Err(bad("expected dir:n,gamma,v".into()));
            }
            let n: u32 = parts[0].parse().map_err(|e| bad(format!("{e}")))?;
            let gamma: f64 = parts[1].parse().map_err(|e| bad(format!("{e}")))?;
            let v: usize = parts[2].parse().map_err(|e| bad(format!("{e}")))?;
            let vectors = net_vectors.ok_or_else(|| bad("needs a direction net".into()))?;
            let e = vectors.get(v).ok_or_else(|| bad(format!("net has {} vectors", vectors.len())))?;
            directional_symbol(e, n, gamma, &BumpProfile::plateau())
        }
        _ => Err(Error::UnknownKey(key.to_string())),
    }
}

/// `F^{-1}[m F u]` on the grid's periodic frequency lattice.
pub fn apply_multiplier(m: &MultiplierSymbol, u: &GridFunction) -> Result<GridFunction> {
    let spec = *u.spec();
    let mut xi = vec![0.0; spec.dim()];
    let values = (0..spec.len())
        .map(|i| {
            spec.frequency(i, &mut xi);
            let v = m.eval(&xi);
            if v.re.is_finite() && v.im.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite {
                    value: if v.re.is_finite() { v.im } else { v.re },
                    context: format!("symbol {} at ξ = {xi:?}", m.label()),
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(apply_symbol_values(u, &values))
}
