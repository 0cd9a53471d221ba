use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::field::{AnalyticProfile, LipschitzField};
use super::distance;
use crate::error::{invalid, Error, Result};
use crate::sphere_fn::multi_indices;

type KernelFn = dyn Fn(&[f64], &[f64]) -> Complex64 + Send + Sync;

/// An evaluable kernel `K(x, y)`, defined for `x ≠ y`, together with the
/// Hölder exponent `δ` of its regularity condition.
#[derive(Clone)]
pub struct KernelSpec {
    dim: usize,
    label: String,
    holder_delta: f64,
    translation_invariant: bool,
    support: Option<(f64, f64)>,
    eval: Arc<KernelFn>,
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSpec")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .field("holder_delta", &self.holder_delta)
            .field("translation_invariant", &self.translation_invariant)
            .field("support", &self.support)
            .finish()
    }
}

impl KernelSpec {
    /// A user kernel. Set `translation_invariant` only when `K(x, y)`
    /// depends on `x - y` alone; operators then tabulate it by displacement.
    pub fn new(
        dim: usize,
        label: impl Into<String>,
        holder_delta: f64,
        translation_invariant: bool,
        eval: impl Fn(&[f64], &[f64]) -> Complex64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(holder_delta > 0.0 && holder_delta <= 1.0) {
            return Err(invalid("holder_delta", format!("{holder_delta} not in (0, 1]")));
        }
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        Ok(Self {
            dim,
            label: label.into(),
            holder_delta,
            translation_invariant,
            support: None,
            eval: Arc::new(eval),
        })
    }

    /// Declares that `K(x, y) = 0` unless `inner ≤ |x-y| ≤ outer`.
    pub fn with_support(mut self, inner: f64, outer: f64) -> Self {
        self.support = Some((inner, outer));
        self
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        self.support
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn holder_delta(&self) -> f64 {
        self.holder_delta
    }

    pub fn is_translation_invariant(&self) -> bool {
        self.translation_invariant
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Complex64 {
        (self.eval)(x, y)
    }
}

/// The kernel families of the application zoo.
#[derive(Clone, Debug)]
pub enum KernelFamily {
    /// `|x-y|^{-d}`.
    Power,
    /// Calderón commutator factor `(A(x)-A(y))/|x-y|`.
    Commutator(LipschitzField),
    /// `k`-th power of the commutator factor.
    Higher(LipschitzField, u32),
    /// `F((A(x)-A(y))/|x-y|)`.
    General(LipschitzField, AnalyticProfile),
    /// `P_l(A, x, y) / |x-y|^l` with the Taylor remainder `P_l`.
    BajsanskiCoifman(LipschitzField, u32),
    /// `|x-y|^{-d-ir}`.
    Muckenhoupt(f64),
}

fn factorial(alpha: &[usize]) -> f64 {
    alpha
        .iter()
        .map(|&a| (1..=a).map(|k| k as f64).product::<f64>())
        .product()
}

/// `(x-y)^α`.
fn displacement_power(x: &[f64], y: &[f64], alpha: &[usize]) -> f64 {
    x.iter()
        .zip(y)
        .zip(alpha)
        .map(|((a, b), &k)| (a - b).powi(k as i32))
        .product()
}

/// Taylor remainder `P_l(A, x, y) = A(x) - Σ_{|α|<l} A_α(y) (x-y)^α / α!`.
///
/// Panics if the field lacks a derivative of order `< l`; [`make_kernel`]
/// checks that up front.
pub fn taylor_remainder(field: &LipschitzField, l: u32, x: &[f64], y: &[f64]) -> f64 {
    let mut p = field.eval(x);
    for order in 0..l as usize {
        for alpha in multi_indices(x.len(), order) {
            let a = field
                .derivative(&alpha, y)
                .expect("field derivatives checked at construction");
            p -= a * displacement_power(x, y, &alpha) / factorial(&alpha);
        }
    }
    p
}

/// `l Σ_{|α|=l} (x-y)^α/α! ∫_0^1 (1-s)^{l-1} A_α(y + s(x-y)) ds`, the
/// integral form of the Taylor remainder, by Gauss–Legendre-free composite
/// Simpson with `panels` panels.
pub fn taylor_remainder_integral(
    field: &LipschitzField,
    l: u32,
    x: &[f64],
    y: &[f64],
    panels: usize,
) -> Option<f64> {
    let panels = panels.max(2) & !1;
    let h = 1.0 / panels as f64;
    let mut total = 0.0;
    let mut z = vec![0.0; x.len()];
    for alpha in multi_indices(x.len(), l as usize) {
        let mut integral = 0.0;
        for i in 0..=panels {
            let s = i as f64 * h;
            for k in 0..x.len() {
                z[k] = y[k] + s * (x[k] - y[k]);
            }
            let w = if i == 0 || i == panels {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            integral += w * (1.0 - s).powi(l as i32 - 1) * field.derivative(&alpha, &z)?;
        }
        total += displacement_power(x, y, &alpha) / factorial(&alpha) * integral * h / 3.0;
    }
    Some(l as f64 * total)
}

/// Builds a zoo kernel. All families carry `δ = 1`.
pub fn make_kernel(dim: usize, family: KernelFamily) -> Result<KernelSpec> {
    if !(2..=3).contains(&dim) {
        return Err(Error::UnsupportedDimension(dim));
    }
    let d = dim as i32;
    let check_dim = |field: &LipschitzField| {
        if field.dim() != dim {
            Err(invalid("field", format!("field dimension {} ≠ {dim}", field.dim())))
        } else {
            Ok(())
        }
    };
    let spec = match family {
        KernelFamily::Power => KernelSpec::new(dim, "power", 1.0, true, move |x, y| {
            Complex64::new(distance(x, y).powi(-d), 0.0)
        })?,
        KernelFamily::Commutator(a) => {
            check_dim(&a)?;
            let label = format!("commutator[{}]", a.label());
            KernelSpec::new(dim, label, 1.0, false, move |x, y| {
                let r = distance(x, y);
                Complex64::new(r.powi(-d) * (a.eval(x) - a.eval(y)) / r, 0.0)
            })?
        }
        KernelFamily::Higher(a, k) => {
            check_dim(&a)?;
            if k == 0 {
                return Err(invalid("k", "higher-order commutator needs k ≥ 1"));
            }
            let label = format!("higher:{k}[{}]", a.label());
            KernelSpec::new(dim, label, 1.0, false, move |x, y| {
                let r = distance(x, y);
                let q = (a.eval(x) - a.eval(y)) / r;
                Complex64::new(r.powi(-d) * q.powi(k as i32), 0.0)
            })?
        }
        KernelFamily::General(a, f) => {
            check_dim(&a)?;
            if !(f.radius() >= a.gradient_bound()) {
                return Err(invalid(
                    "profile",
                    format!(
                        "validity radius {} of {} is below ‖∇A‖_∞ = {}",
                        f.radius(),
                        f.label(),
                        a.gradient_bound()
                    ),
                ));
            }
            let label = format!("general[{},{}]", a.label(), f.label());
            KernelSpec::new(dim, label, 1.0, false, move |x, y| {
                let r = distance(x, y);
                Complex64::new(r.powi(-d) * f.eval((a.eval(x) - a.eval(y)) / r), 0.0)
            })?
        }
        KernelFamily::BajsanskiCoifman(a, l) => {
            check_dim(&a)?;
            if l == 0 {
                return Err(invalid("l", "Bajsanski–Coifman kernel needs l ≥ 1"));
            }
            let origin = vec![0.0; dim];
            for order in 0..l as usize {
                for alpha in multi_indices(dim, order) {
                    if a.derivative(&alpha, &origin).is_none() {
                        return Err(Error::MissingDerivatives(format!(
                            "{} has no A_α for α = {alpha:?}",
                            a.label()
                        )));
                    }
                }
            }
            for alpha in multi_indices(dim, l as usize) {
                if a.derivative_bound(&alpha).is_none() {
                    return Err(Error::MissingDerivatives(format!(
                        "{} has no sup bound for A_α, α = {alpha:?}",
                        a.label()
                    )));
                }
            }
            let label = format!("bc:{l}[{}]", a.label());
            KernelSpec::new(dim, label, 1.0, false, move |x, y| {
                let r = distance(x, y);
                let p = taylor_remainder(&a, l, x, y);
                Complex64::new(r.powi(-d) * p / r.powi(l as i32), 0.0)
            })?
        }
        KernelFamily::Muckenhoupt(rr) => {
            if rr == 0.0 || !rr.is_finite() {
                return Err(invalid("r", "Muckenhoupt kernel needs a finite r ≠ 0"));
            }
            KernelSpec::new(dim, format!("muckenhoupt:{rr}"), 1.0, true, move |x, y| {
                let dist = distance(x, y);
                Complex64::from_polar(dist.powi(-d), -rr * dist.ln())
            })?
        }
    };
    Ok(spec)
}

/// Parses a CLI kernel key: `power`, `commutator`, `higher:k`, `general`,
/// `bc:l`, `muckenhoupt:r`. `field` and `profile` supply `A` and `F`.
pub fn kernel_from_key(
    key: &str,
    dim: usize,
    field: Option<&LipschitzField>,
    profile: Option<&AnalyticProfile>,
) -> Result<KernelSpec> {
    let (name, arg) = match key.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (key, None),
    };
    let need_field = || {
        field
            .cloned()
            .ok_or_else(|| invalid("field", format!("kernel `{key}` needs a Lipschitz field")))
    };
    let int_arg = |what: &'static str| -> Result<u32> {
        arg.ok_or_else(|| invalid(what, format!("kernel `{key}` needs `{name}:<{what}>`")))?
            .parse::<u32>()
            .map_err(|e| invalid(what, format!("`{key}`: {e}")))
    };
    let family = match name {
        "power" if arg.is_none() => KernelFamily::Power,
        "commutator" if arg.is_none() => KernelFamily::Commutator(need_field()?),
        "higher" => KernelFamily::Higher(need_field()?, int_arg("k")?),
        "general" if arg.is_none() => {
            let f = profile
                .cloned()
                .ok_or_else(|| invalid("profile", "kernel `general` needs a profile F"))?;
            KernelFamily::General(need_field()?, f)
        }
        "bc" => KernelFamily::BajsanskiCoifman(need_field()?, int_arg("l")?),
        "muckenhoupt" => {
            let r = arg
                .ok_or_else(|| invalid("r", "kernel `muckenhoupt` needs `muckenhoupt:<r>`"))?
                .parse::<f64>()
                .map_err(|e| invalid("r", format!("`{key}`: {e}")))?;
            KernelFamily::Muckenhoupt(r)
        }
        _ => return Err(Error::UnknownKey(key.to_string())),
    };
    make_kernel(dim, family)
}
