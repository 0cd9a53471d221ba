//! Dyadic Calderón–Zygmund decomposition on a grid.
//!
//! Cubes live on the grid's own dyadic tree: a cube of scale `k` is a block
//! of `2^k` cells per axis whose corner index is a multiple of `2^k`, so its
//! physical side is `2^k h`. The root is the whole box.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::grid::{lebesgue_norm, GridFunction, GridSpec};

/// A dyadic cube of the grid tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct DyadicCube {
    /// `log2` of the side in cells.
    pub k: u32,
    /// Cell index of the lower corner along each axis.
    pub corner: Vec<usize>,
}

impl DyadicCube {
    pub fn side_cells(&self) -> usize {
        1 << self.k
    }

    pub fn side_length(&self, spec: &GridSpec) -> f64 {
        self.side_cells() as f64 * spec.spacing()
    }

    pub fn cell_count(&self) -> usize {
        self.side_cells().pow(self.corner.len() as u32)
    }

    pub fn volume(&self, spec: &GridSpec) -> f64 {
        self.cell_count() as f64 * spec.cell_volume()
    }

    /// Flat indices of the cells of the cube, in row-major order.
    pub fn cells(&self, spec: &GridSpec) -> Vec<usize> {
        let s = self.side_cells();
        let d = self.corner.len();
        let mut out = Vec::with_capacity(self.cell_count());
        let mut local = vec![0usize; d];
        let mut idx = vec![0usize; d];
        for flat in 0..self.cell_count() {
            let mut rest = flat;
            for a in (0..d).rev() {
                local[a] = rest % s;
                rest /= s;
            }
            for a in 0..d {
                idx[a] = self.corner[a] + local[a];
            }
            out.push(spec.flat_index(&idx));
        }
        out
    }
}

/// A bad atom `b_Q = (f - avg_Q f) 1_Q`, stored on the cells of `Q`.
#[derive(Clone, Debug)]
pub struct BadAtom {
    pub cube: DyadicCube,
    /// Average of `|f|` over `Q`, the stopping statistic.
    pub abs_average: f64,
    /// Average of `f` over `Q`.
    pub average: Complex64,
    cells: Vec<usize>,
    values: Vec<Complex64>,
}

impl BadAtom {
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `b_Q` as a function on the full grid.
    pub fn to_grid(&self, spec: GridSpec) -> GridFunction {
        let mut v = vec![Complex64::new(0.0, 0.0); spec.len()];
        for (&c, &b) in self.cells.iter().zip(&self.values) {
            v[c] = b;
        }
        GridFunction::new(spec, v).expect("atom values are finite")
    }
}

#[derive(Clone, Debug)]
pub struct CZDecomposition {
    level: f64,
    enlargement: f64,
    good: GridFunction,
    atoms: Vec<BadAtom>,
    exceptional: Vec<bool>,
    enlarged: Vec<bool>,
    degenerate: bool,
}

impl CZDecomposition {
    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn enlargement(&self) -> f64 {
        self.enlargement
    }

    pub fn good(&self) -> &GridFunction {
        &self.good
    }

    pub fn atoms(&self) -> &[BadAtom] {
        &self.atoms
    }

    /// Cell mask of `E = ∪ Q`.
    pub fn exceptional(&self) -> &[bool] {
        &self.exceptional
    }

    /// Cell mask of `E* = ∪ ρQ`, clipped to the box.
    pub fn enlarged_exceptional(&self) -> &[bool] {
        &self.enlarged
    }

    /// True when the root average already exceeds `t` and the whole box was
    /// selected.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn spec(&self) -> &GridSpec {
        self.good.spec()
    }

    /// `b = Σ_Q b_Q`.
    pub fn bad(&self) -> GridFunction {
        let spec = *self.spec();
        let mut v = vec![Complex64::new(0.0, 0.0); spec.len()];
        for atom in &self.atoms {
            for (&c, &b) in atom.cells.iter().zip(&atom.values) {
                v[c] += b;
            }
        }
        GridFunction::new(spec, v).expect("atom values are finite")
    }

    /// Scales `k` that carry at least one cube, ascending.
    pub fn scales(&self) -> Vec<u32> {
        let mut ks: Vec<u32> = self.atoms.iter().map(|a| a.cube.k).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }

    pub fn measure_exceptional(&self) -> f64 {
        self.exceptional.iter().filter(|&&e| e).count() as f64 * self.spec().cell_volume()
    }

    pub fn measure_enlarged(&self) -> f64 {
        self.enlarged.iter().filter(|&&e| e).count() as f64 * self.spec().cell_volume()
    }
}

/// Sums of `|f|` over every cube of the tree, finest level first.
fn abs_pyramid(f: &GridFunction) -> Vec<Vec<f64>> {
    let spec = f.spec();
    let d = spec.dim();
    let mut levels = vec![f.values().iter().map(|v| v.norm()).collect::<Vec<f64>>()];
    let mut n = spec.n();
    while n > 1 {
        let prev = levels.last().unwrap();
        let m = n / 2;
        let mut next = vec![0.0; m.pow(d as u32)];
        let mut idx = vec![0usize; d];
        for (i, &v) in prev.iter().enumerate() {
            let mut rest = i;
            for a in (0..d).rev() {
                idx[a] = (rest % n) / 2;
                rest /= n;
            }
            let parent = idx.iter().fold(0, |acc, &c| acc * m + c);
            next[parent] += v;
        }
        levels.push(next);
        n = m;
    }
    levels
}

/// Stopping-time decomposition of `f` at level `t`, with `E*` built from
/// `ρQ`.
pub fn cz_decompose(f: &GridFunction, t: f64, enlargement: f64) -> Result<CZDecomposition> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t", format!("level must be positive and finite, got {t}")));
    }
    if !(enlargement >= 1.0 && enlargement.is_finite()) {
        return Err(invalid("enlargement", format!("must be ≥ 1, got {enlargement}")));
    }
    let spec = *f.spec();
    let d = spec.dim();
    let pyramid = abs_pyramid(f);
    let top = pyramid.len() - 1;

    let mut selected = Vec::new();
    let mut degenerate = false;
    // (level, corner in units of that level's cubes)
    let mut stack: Vec<(usize, Vec<usize>)> = Vec::new();
    let root_avg = pyramid[top][0] / spec.len() as f64;
    if root_avg > t {
        degenerate = true;
        selected.push(DyadicCube { k: top as u32, corner: vec![0; d] });
    } else {
        stack.push((top, vec![0; d]));
    }
    while let Some((level, pos)) = stack.pop() {
        if level == 0 {
            continue;
        }
        let child = level - 1;
        let m = spec.n() >> child;
        let cells = (1usize << child).pow(d as u32) as f64;
        // children in reverse row-major order so the stack pops them in order
        for c in (0..1usize << d).rev() {
            let cpos: Vec<usize> = (0..d).map(|a| 2 * pos[a] + ((c >> (d - 1 - a)) & 1)).collect();
            let flat = cpos.iter().fold(0, |acc, &v| acc * m + v);
            let avg = pyramid[child][flat] / cells;
            if avg > t {
                selected.push(DyadicCube {
                    k: child as u32,
                    corner: cpos.iter().map(|&v| v << child).collect(),
                });
            } else {
                stack.push((child, cpos));
            }
        }
    }
    selected.sort_by(|a, b| b.k.cmp(&a.k).then_with(|| a.corner.cmp(&b.corner)));

    let mut good = f.values().to_vec();
    let mut exceptional = vec![false; spec.len()];
    let mut atoms = Vec::with_capacity(selected.len());
    for cube in selected {
        let cells = cube.cells(&spec);
        let count = cells.len() as f64;
        let average = cells.iter().map(|&c| f.values()[c]).sum::<Complex64>() / count;
        let abs_average = cells.iter().map(|&c| f.values()[c].norm()).sum::<f64>() / count;
        let values = cells.iter().map(|&c| f.values()[c] - average).collect();
        for &c in &cells {
            good[c] = average;
            exceptional[c] = true;
        }
        atoms.push(BadAtom { cube, abs_average, average, cells, values });
    }
    let enlarged = enlarged_mask(&spec, &atoms, enlargement);
    Ok(CZDecomposition {
        level: t,
        enlargement,
        good: GridFunction::new(spec, good)?,
        atoms,
        exceptional,
        enlarged,
        degenerate,
    })
}

/// Cells whose centres lie in some `ρQ` (same centre, `ρ` times the side).
fn enlarged_mask(spec: &GridSpec, atoms: &[BadAtom], rho: f64) -> Vec<bool> {
    let d = spec.dim();
    let n = spec.n() as i64;
    let mut mask = vec![false; spec.len()];
    let mut lo = vec![0i64; d];
    let mut hi = vec![0i64; d];
    let mut idx = vec![0usize; d];
    for atom in atoms {
        let s = atom.cube.side_cells() as f64;
        for a in 0..d {
            let centre = atom.cube.corner[a] as f64 + s / 2.0;
            let half = rho * s / 2.0;
            // cell j has centre j + 1/2
            lo[a] = ((centre - half - 0.5).ceil() as i64).max(0);
            hi[a] = ((centre + half - 0.5).floor() as i64).min(n - 1);
        }
        let extents: Vec<usize> = (0..d).map(|a| (hi[a] - lo[a] + 1) as usize).collect();
        let total: usize = extents.iter().product();
        for flat in 0..total {
            let mut rest = flat;
            for a in (0..d).rev() {
                idx[a] = lo[a] as usize + rest % extents[a];
                rest /= extents[a];
            }
            mask[spec.flat_index(&idx)] = true;
        }
    }
    mask
}

/// `B_k = Σ_{Q: scale k} b_Q`.
pub fn bad_by_scale(dec: &CZDecomposition, k: u32) -> GridFunction {
    let spec = *dec.spec();
    let mut v = vec![Complex64::new(0.0, 0.0); spec.len()];
    for atom in dec.atoms.iter().filter(|a| a.cube.k == k) {
        for (&c, &b) in atom.cells.iter().zip(&atom.values) {
            v[c] += b;
        }
    }
    GridFunction::new(spec, v).expect("atom values are finite")
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyCheck {
    pub passes: bool,
    /// Measured quantity.
    pub measured: f64,
    /// Bound it is compared against.
    pub bound: f64,
}

impl PropertyCheck {
    fn at_most(measured: f64, bound: f64) -> Self {
        Self { passes: measured <= bound, measured, bound }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CubeEntry {
    pub k: u32,
    pub corner: Vec<usize>,
    pub avg: f64,
}

/// Pass/fail per property with measured constants.
#[derive(Clone, Debug, Serialize)]
pub struct CzReport {
    pub level: f64,
    pub degenerate: bool,
    /// `max |f - g - Σ b_Q|` over cells.
    pub reconstruction: PropertyCheck,
    /// `‖g‖_2² ≤ 2^d t ‖f‖_1`.
    pub good_l2: PropertyCheck,
    /// `max |g| ≤ 2^d t`.
    pub good_sup: PropertyCheck,
    /// Number of cells covered by more than one cube or atom values off
    /// their cube.
    pub disjoint: PropertyCheck,
    /// `m(E) ≤ ‖f‖_1 / t`.
    pub exceptional_measure: PropertyCheck,
    /// `max_Q |∫ b_Q|`, against a rounding tolerance.
    pub mean_zero: PropertyCheck,
    /// `max_Q ‖b_Q‖_1 / (t|Q|) ≤ 2^{d+1}`.
    pub atom_l1: PropertyCheck,
    pub all_pass: bool,
    pub cubes: Vec<CubeEntry>,
}

/// Re-measures every property of `dec` against `f` and `t`.
pub fn verify_cz(dec: &CZDecomposition, f: &GridFunction, t: f64) -> CzReport {
    let spec = *f.spec();
    let d = spec.dim() as i32;
    let hd = spec.cell_volume();
    let two_d = 2f64.powi(d);
    let f_l1 = lebesgue_norm(f, 1.0);
    let f_sup = lebesgue_norm(f, f64::INFINITY);
    let eps = 64.0 * f64::EPSILON;

    let mut covered = vec![0u32; spec.len()];
    let mut sum = dec.good.values().to_vec();
    let mut stray = 0usize;
    let mut mean_max: f64 = 0.0;
    let mut mean_tol: f64 = 0.0;
    let mut atom_ratio: f64 = 0.0;
    for atom in &dec.atoms {
        let expected = atom.cube.cells(&spec);
        if expected != atom.cells {
            stray += 1;
        }
        for (&c, &b) in atom.cells.iter().zip(&atom.values) {
            covered[c] += 1;
            sum[c] += b;
        }
        let integral = atom.values.iter().sum::<Complex64>().norm() * hd;
        mean_max = mean_max.max(integral);
        mean_tol = mean_tol.max(eps * atom.cells.len() as f64 * f_sup * hd);
        let l1 = atom.values.iter().map(|v| v.norm()).sum::<f64>() * hd;
        atom_ratio = atom_ratio.max(l1 / (t * atom.cube.volume(&spec)));
    }
    let overlaps = covered.iter().filter(|&&c| c > 1).count() + stray;
    let recon = sum
        .iter()
        .zip(f.values())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let good_l2 = lebesgue_norm(&dec.good, 2.0).powi(2);
    let good_sup = lebesgue_norm(&dec.good, f64::INFINITY);
    let measure = dec.measure_exceptional();

    let reconstruction = PropertyCheck::at_most(recon, eps * f_sup.max(f64::MIN_POSITIVE));
    let good_l2 = PropertyCheck::at_most(good_l2, two_d * t * f_l1 * (1.0 + eps));
    let good_sup = PropertyCheck::at_most(good_sup, two_d * t * (1.0 + eps));
    let disjoint = PropertyCheck::at_most(overlaps as f64, 0.0);
    let exceptional_measure = PropertyCheck::at_most(measure, f_l1 / t * (1.0 + eps));
    let mean_zero = PropertyCheck::at_most(mean_max, mean_tol);
    let atom_l1 = PropertyCheck::at_most(atom_ratio, 2.0 * two_d * (1.0 + eps));
    let all_pass = [&reconstruction, &good_l2, &good_sup, &disjoint, &exceptional_measure, &mean_zero, &atom_l1]
        .iter()
        .all(|p| p.passes);
    CzReport {
        level: t,
        degenerate: dec.degenerate,
        reconstruction,
        good_l2,
        good_sup,
        disjoint,
        exceptional_measure,
        mean_zero,
        atom_l1,
        all_pass,
        cubes: dec
            .atoms
            .iter()
            .map(|a| CubeEntry { k: a.cube.k, corner: a.cube.corner.clone(), avg: a.abs_average })
            .collect(),
    }
}
