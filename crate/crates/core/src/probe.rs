//! Empirical weak-(1,1) measurements.
//!
//! For an output `u = T f` the probe records the distribution function
//! `λ ↦ m({|u| > λ})` on a λ grid, the weak ratio
//! `max_λ λ·m({|u| > λ}) / ‖f‖_1` and the strong ratio `‖u‖_1 / ‖f‖_1`.

use serde::{Deserialize, Serialize};

use crate::czd::cz_decompose;
use crate::error::{invalid, Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::operator::{apply_truncated, apply_truncated_at, OperatorConfig};
use crate::sphere_fn::sphere_measure;

/// Number of λ points used by [`LambdaGrid::Auto`] unless overridden.
pub const DEFAULT_LAMBDA_POINTS: usize = 32;

/// Cells left out of the distribution measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExclusionUsed {
    None,
    Mask { excluded_cells: usize },
    /// `E*` from the decomposition of `f` at level `λ / c_omega`, per λ.
    CzLinked { c_omega: f64, enlargement: f64, excluded_cells: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub lambdas: Vec<f64>,
    pub measures: Vec<f64>,
    /// `λ · m({|u| > λ}) / ‖f‖_1` per λ.
    pub weak_terms: Vec<f64>,
    pub weak_ratio: f64,
    pub l1_ratio: f64,
    pub f_l1: f64,
    pub grid: GridSpec,
    pub exclusion: ExclusionUsed,
    /// Spike radius for spike-family runs.
    pub epsilon: Option<f64>,
}

impl ProbeResult {
    pub fn is_monotone(&self) -> bool {
        self.measures.windows(2).all(|w| w[1] <= w[0])
    }

    /// `weak_ratio ≤ l1_ratio`, up to summation rounding.
    pub fn is_chebyshev_consistent(&self) -> bool {
        self.weak_ratio <= self.l1_ratio * (1.0 + 1e-12)
    }
}

/// λ grid: explicit values or log-spaced points spanning
/// `[0.01·‖u‖_∞, ‖u‖_∞]` of each output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaGrid {
    Auto { points: usize },
    Fixed(Vec<f64>),
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::Auto { points: DEFAULT_LAMBDA_POINTS }
    }
}

impl LambdaGrid {
    /// Concrete levels for an output with sup norm `sup`. A zero output gets
    /// the grid for `sup = 1`, where every measure vanishes.
    pub fn resolve(&self, sup: f64) -> Result<Vec<f64>> {
        let grid = match self {
            LambdaGrid::Fixed(v) => v.clone(),
            LambdaGrid::Auto { points } => log_spaced(if sup > 0.0 { sup } else { 1.0 }, *points)?,
        };
        check_lambdas(&grid)?;
        Ok(grid)
    }
}

/// `points` log-spaced levels from `0.01·sup` to `sup`.
pub fn log_spaced(sup: f64, points: usize) -> Result<Vec<f64>> {
    if !(sup > 0.0 && sup.is_finite()) {
        return Err(invalid("sup", format!("{sup} must be positive and finite")));
    }
    match points {
        0 => Err(invalid("lambda_points", "empty λ grid")),
        1 => Ok(vec![sup]),
        _ => {
            let lo = (0.01 * sup).ln();
            let step = (sup.ln() - lo) / (points - 1) as f64;
            let mut v: Vec<f64> = (0..points).map(|i| (lo + step * i as f64).exp()).collect();
            v[points - 1] = sup;
            Ok(v)
        }
    }
}

fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(invalid("lambda_grid", "empty λ grid"));
    }
    if lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(invalid("lambda_grid", "levels must be positive and finite"));
    }
    if lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("lambda_grid", "levels must be strictly ascending"));
    }
    Ok(())
}

fn check_f_l1(f_l1: f64) -> Result<()> {
    if !(f_l1 > 0.0 && f_l1.is_finite()) {
        return Err(invalid("f_l1", format!("{f_l1} must be positive and finite")));
    }
    Ok(())
}

/// Sorted moduli of the kept cells, for O(log N) level queries.
struct Levels {
    sorted: Vec<f64>,
    hd: f64,
}

impl Levels {
    fn new(u: &GridFunction, exclude: Option<&[bool]>) -> Self {
        let mut sorted: Vec<f64> = match exclude {
            None => u.values().iter().map(|v| v.norm()).collect(),
            Some(mask) => u.values().iter().zip(mask).filter(|(_, &s)| !s).map(|(v, _)| v.norm()).collect(),
        };
        sorted.sort_by(f64::total_cmp);
        Self { sorted, hd: u.spec().cell_volume() }
    }

    fn measure_above(&self, lambda: f64) -> f64 {
        let first = self.sorted.partition_point(|&v| v <= lambda);
        (self.sorted.len() - first) as f64 * self.hd
    }

    fn l1(&self) -> f64 {
        self.sorted.iter().sum::<f64>() * self.hd
    }
}

/// Weak and strong ratios of `u` over the cells not set in `exclusion`.
pub fn weak_ratio(u: &GridFunction, f_l1: f64, lambdas: &[f64], exclusion: Option<&[bool]>) -> Result<ProbeResult> {
    check_f_l1(f_l1)?;
    check_lambdas(lambdas)?;
    if let Some(mask) = exclusion {
        if mask.len() != u.spec().len() {
            return Err(Error::GridMismatch(format!("mask of {} cells for a grid of {}", mask.len(), u.spec().len())));
        }
    }
    let levels = Levels::new(u, exclusion);
    let measures: Vec<f64> = lambdas.iter().map(|&l| levels.measure_above(l)).collect();
    let used = match exclusion {
        None => ExclusionUsed::None,
        Some(mask) => ExclusionUsed::Mask { excluded_cells: mask.iter().filter(|&&s| s).count() },
    };
    Ok(assemble(u, f_l1, lambdas, measures, levels.l1(), used))
}

/// Weak ratio with `E*` of the decomposition of `f` at level `λ / c_omega`
/// removed at each λ. `l1_ratio` is taken over the whole grid.
pub fn weak_ratio_cz_linked(
    u: &GridFunction,
    f: &GridFunction,
    lambdas: &[f64],
    c_omega: f64,
    enlargement: f64,
) -> Result<ProbeResult> {
    if u.spec() != f.spec() {
        return Err(Error::GridMismatch("output and input grids differ".into()));
    }
    if !(c_omega > 0.0 && c_omega.is_finite()) {
        return Err(invalid("c_omega", format!("{c_omega} must be positive and finite")));
    }
    let f_l1 = crate::grid::lebesgue_norm(f, 1.0);
    check_f_l1(f_l1)?;
    check_lambdas(lambdas)?;
    let mut measures = Vec::with_capacity(lambdas.len());
    let mut excluded = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let dec = cz_decompose(f, l / c_omega, enlargement)?;
        let mask = dec.enlarged_exceptional();
        excluded.push(mask.iter().filter(|&&s| s).count());
        measures.push(crate::grid::distribution_measure_masked(u, l, Some(mask)));
    }
    let l1 = Levels::new(u, None).l1();
    let used = ExclusionUsed::CzLinked { c_omega, enlargement, excluded_cells: excluded };
    Ok(assemble(u, f_l1, lambdas, measures, l1, used))
}

fn assemble(u: &GridFunction, f_l1: f64, lambdas: &[f64], measures: Vec<f64>, l1: f64, exclusion: ExclusionUsed) -> ProbeResult {
    let weak_terms: Vec<f64> = lambdas.iter().zip(&measures).map(|(l, m)| l * m / f_l1).collect();
    let weak_ratio = weak_terms.iter().copied().fold(0.0, f64::max);
    ProbeResult {
        lambdas: lambdas.to_vec(),
        measures,
        weak_terms,
        weak_ratio,
        l1_ratio: l1 / f_l1,
        f_l1,
        grid: *u.spec(),
        exclusion,
        epsilon: None,
    }
}

/// `f_ε = c·1(|x| < ε)` with `c ≈ ε^{-d}` fixed so that the discrete
/// `‖f_ε‖_1` equals `|B_1|` exactly.
pub fn spike(spec: GridSpec, epsilon: f64) -> Result<GridFunction> {
    if !(epsilon >= 4.0 * spec.spacing()) {
        return Err(invalid("epsilon", format!("spike radius {epsilon} below 4h = {}", 4.0 * spec.spacing())));
    }
    if epsilon > spec.half_width() / 2.0 {
        return Err(invalid("epsilon", format!("spike radius {epsilon} leaves the central half of the box")));
    }
    let d = spec.dim();
    let ball = sphere_measure(d) / d as f64;
    let inside = |x: &[f64]| x.iter().map(|c| c * c).sum::<f64>() < epsilon * epsilon;
    let mut count = 0usize;
    let mut x = vec![0.0; d];
    for i in 0..spec.len() {
        spec.point(i, &mut x);
        count += usize::from(inside(&x));
    }
    let height = ball / (count as f64 * spec.cell_volume());
    GridFunction::from_real_fn(spec, |x| if inside(x) { height } else { 0.0 })
}

/// Apply the operator, restricted to `cells` when given (other cells
/// then read as zero and are excluded from the measures).
fn output(cfg: &OperatorConfig, f: &GridFunction, cells: Option<&[usize]>) -> Result<(GridFunction, Option<Vec<bool>>)> {
    match cells {
        None => Ok((apply_truncated(cfg, f)?, None)),
        Some(cells) => {
            let vals = apply_truncated_at(cfg, f, cells)?;
            let mut full = vec![num_complex::Complex64::new(0.0, 0.0); f.spec().len()];
            let mut mask = vec![true; f.spec().len()];
            for (&c, v) in cells.iter().zip(vals) {
                full[c] = v;
                mask[c] = false;
            }
            Ok((GridFunction::new(*f.spec(), full)?, Some(mask)))
        }
    }
}

/// Probe `u = T f` with `‖f‖_1` from the grid.
pub fn probe_function(cfg: &OperatorConfig, f: &GridFunction, lambdas: &LambdaGrid, cells: Option<&[usize]>) -> Result<ProbeResult> {
    let f_l1 = crate::grid::lebesgue_norm(f, 1.0);
    let (u, mask) = output(cfg, f, cells)?;
    let grid = lambdas.resolve(crate::grid::lebesgue_norm(&u, f64::INFINITY))?;
    weak_ratio(&u, f_l1, &grid, mask.as_deref())
}

/// One probe per spike radius, in the given order.
pub fn spike_family(
    cfg: &OperatorConfig,
    epsilons: &[f64],
    spec: GridSpec,
    lambdas: &LambdaGrid,
    cells: Option<&[usize]>,
) -> Result<Vec<ProbeResult>> {
    if epsilons.is_empty() {
        return Err(invalid("epsilons", "empty spike family"));
    }
    epsilons
        .iter()
        .map(|&eps| {
            let f = spike(spec, eps)?;
            let mut r = probe_function(cfg, &f, lambdas, cells)?;
            r.epsilon = Some(eps);
            Ok(r)
        })
        .collect()
}

/// `max / min` of a positive sequence; infinite if any entry is zero.
pub fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}
