//! Maximal separated direction nets on the sphere and the partition of
//! unity subordinate to them.

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use super::profile::{BumpProfile, ProfileKind};
use super::symbol::MultiplierSymbol;
use crate::error::{invalid, Error, Result};
use crate::kernel_zoo::distance;
use crate::sphere_fn::SphereQuadrature;

type CellKey = [i64; 3];

/// Uniform hash of points in `R^d` (`d ≤ 3`) into cubes of side `cell`.
#[derive(Clone, Debug)]
struct SpatialIndex {
    cell: f64,
    buckets: FxHashMap<CellKey, Vec<u32>>,
}

impl SpatialIndex {
    fn new(cell: f64) -> Self {
        Self { cell, buckets: FxHashMap::default() }
    }

    fn key(&self, p: &[f64]) -> CellKey {
        let mut k = [0i64; 3];
        for (slot, &x) in k.iter_mut().zip(p) {
            *slot = (x / self.cell).floor() as i64;
        }
        k
    }

    fn insert(&mut self, p: &[f64], id: u32) {
        let key = self.key(p);
        self.buckets.entry(key).or_default().push(id);
    }

    /// Calls `f` on every id stored in the `3^d` cells around `p`; returns
    /// early with `true` as soon as `f` does.
    fn any_near(&self, p: &[f64], dim: usize, mut f: impl FnMut(u32) -> bool) -> bool {
        let centre = self.key(p);
        let span = |a: usize| if a < dim { -1..=1 } else { 0..=0 };
        for dx in span(0) {
            for dy in span(1) {
                for dz in span(2) {
                    let key = [centre[0] + dx, centre[1] + dy, centre[2] + dz];
                    if let Some(ids) = self.buckets.get(&key) {
                        if ids.iter().any(|&id| f(id)) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

/// A maximal `2^{-nγ-4}`-separated set of unit vectors `{e_v}`.
#[derive(Clone, Debug)]
pub struct DirectionNet {
    n: u32,
    gamma: f64,
    dim: usize,
    vectors: Vec<f64>,
    separation: f64,
    fine: SpatialIndex,
    coarse: SpatialIndex,
}

/// Serialised form of a net: parameters plus the vector list.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetRecord {
    pub n: u32,
    pub gamma: f64,
    pub dim: usize,
    pub separation: f64,
    pub cardinality: usize,
    pub vectors: Vec<Vec<f64>>,
}

/// `2^{-nγ-4}`.
pub fn net_separation(n: u32, gamma: f64) -> f64 {
    (-(f64::from(n) * gamma) - 4.0).exp2()
}

/// Smallest power-of-two quadrature size whose node spacing is below
/// `s/4`, the precondition of [`direction_net`].
pub fn net_quadrature_resolution(dim: usize, n: u32, gamma: f64) -> usize {
    let limit = net_separation(n, gamma) / 4.0;
    let mut size = 1usize << 10;
    let spacing = |m: usize| match dim {
        2 => 2.0 * std::f64::consts::PI / m as f64,
        _ => (crate::sphere_fn::sphere_measure(dim) / m as f64).sqrt(),
    };
    while spacing(size) >= limit {
        size *= 2;
    }
    size
}

/// Builds the net by one greedy pass over the quadrature nodes in order:
/// a node joins when it is at least `s` from every vector chosen so far.
/// The result is separated by construction, and every node lies within
/// `s` of the net, so the net is maximal on the node set.
pub fn direction_net(n: u32, gamma: f64, quad: &SphereQuadrature) -> Result<DirectionNet> {
    let dim = quad.dim();
    if n < 2 {
        return Err(invalid("n", format!("net level must be ≥ 2, got {n}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid("gamma", format!("{gamma} not in (0, 1)")));
    }
    let s = net_separation(n, gamma);
    if quad.spacing() >= s / 4.0 {
        return Err(Error::QuadratureTooCoarse { spacing: quad.spacing(), limit: s / 4.0 });
    }
    let mut vectors: Vec<f64> = Vec::new();
    let mut fine = SpatialIndex::new(s);
    for theta in quad.nodes() {
        let blocked = fine.any_near(theta, dim, |id| {
            let e = &vectors[id as usize * dim..(id as usize + 1) * dim];
            distance(e, theta) < s
        });
        if !blocked {
            let id = (vectors.len() / dim) as u32;
            vectors.extend_from_slice(theta);
            fine.insert(theta, id);
        }
    }
    Ok(DirectionNet::assemble(n, gamma, dim, vectors, fine))
}

impl DirectionNet {
    fn assemble(n: u32, gamma: f64, dim: usize, vectors: Vec<f64>, fine: SpatialIndex) -> Self {
        let mut coarse = SpatialIndex::new((-(f64::from(n) * gamma)).exp2());
        for (i, e) in vectors.chunks_exact(dim).enumerate() {
            coarse.insert(e, i as u32);
        }
        Self { n, gamma, dim, separation: net_separation(n, gamma), vectors, fine, coarse }
    }

    /// A net from explicit unit vectors, without the maximality guarantee.
    /// Used for degenerate nets and for reloading serialised ones.
    pub fn from_vectors(n: u32, gamma: f64, dim: usize, vectors: &[Vec<f64>]) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let s = net_separation(n, gamma);
        let mut flat = Vec::with_capacity(vectors.len() * dim);
        let mut fine = SpatialIndex::new(s);
        for (i, v) in vectors.iter().enumerate() {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if v.len() != dim || (norm - 1.0).abs() > 1e-9 {
                return Err(invalid("vectors", format!("entry {i} is not a unit vector in R^{dim}")));
            }
            flat.extend_from_slice(v);
            fine.insert(v, i as u32);
        }
        Ok(Self::assemble(n, gamma, dim, flat, fine))
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn separation(&self) -> f64 {
        self.separation
    }

    /// `2^{nγ}`.
    pub fn frequency_scale(&self) -> f64 {
        (f64::from(self.n) * self.gamma).exp2()
    }

    pub fn len(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, v: usize) -> &[f64] {
        &self.vectors[v * self.dim..(v + 1) * self.dim]
    }

    pub fn vectors(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.vectors.chunks_exact(self.dim)
    }

    /// Smallest distance between vectors in neighbouring index cells, or
    /// `∞` if there are none. Pairs farther apart than one cell are at least
    /// `s` apart, so the value is `≥ s` iff the net is separated.
    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, e) in self.vectors().enumerate() {
            self.fine.any_near(e, self.dim, |j| {
                if j as usize != i {
                    best = best.min(distance(e, self.vector(j as usize)));
                }
                false
            });
        }
        best
    }

    /// Largest distance from a quadrature node to its nearest net vector,
    /// capped at `2s` (anything beyond `s` already breaks covering).
    pub fn covering_radius(&self, quad: &SphereQuadrature) -> f64 {
        let s = self.separation;
        let mut worst: f64 = 0.0;
        for theta in quad.nodes() {
            let mut best = 2.0 * s;
            self.fine.any_near(theta, self.dim, |j| {
                best = best.min(distance(theta, self.vector(j as usize)));
                false
            });
            worst = worst.max(best);
        }
        worst
    }

    /// Indices `v` with `|ξ̂ - e_v| < 2^{-nγ}`.
    fn near(&self, unit: &[f64], out: &mut Vec<u32>) {
        out.clear();
        let r = 1.0 / self.frequency_scale();
        self.coarse.any_near(unit, self.dim, |j| {
            if distance(unit, self.vector(j as usize)) < r {
                out.push(j);
            }
            false
        });
    }

    pub fn to_record(&self) -> NetRecord {
        NetRecord {
            n: self.n,
            gamma: self.gamma,
            dim: self.dim,
            separation: self.separation,
            cardinality: self.len(),
            vectors: self.vectors().map(<[f64]>::to_vec).collect(),
        }
    }

    pub fn from_record(record: &NetRecord) -> Result<Self> {
        Self::from_vectors(record.n, record.gamma, record.dim, &record.vectors)
    }
}

fn normalised(xi: &[f64]) -> Option<Vec<f64>> {
    let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    (norm > 0.0).then(|| xi.iter().map(|x| x / norm).collect())
}

/// `Γ_v(ξ) = ζ(2^{nγ}(ξ̂ - e_v)) / Σ_{v'} ζ(2^{nγ}(ξ̂ - e_{v'}))`.
#[derive(Clone, Debug)]
pub struct PartitionOfUnity {
    net: std::sync::Arc<DirectionNet>,
    zeta: BumpProfile,
}

/// Minimum admissible denominator of the partition.
pub const MIN_PARTITION_DENOMINATOR: f64 = 1e-12;

pub fn partition_of_unity(net: std::sync::Arc<DirectionNet>, zeta: &BumpProfile) -> Result<PartitionOfUnity> {
    if zeta.kind() != ProfileKind::ZetaCap {
        return Err(invalid("zeta", "partition of unity needs the cap profile"));
    }
    if net.is_empty() {
        return Err(invalid("net", "empty direction net"));
    }
    Ok(PartitionOfUnity { net, zeta: *zeta })
}

impl PartitionOfUnity {
    pub fn net(&self) -> &DirectionNet {
        &self.net
    }

    /// Nonzero terms `(v, ζ(...))` at `ξ̂` and the denominator.
    fn terms(&self, unit: &[f64]) -> Result<(Vec<(u32, f64)>, f64)> {
        let mut ids = Vec::new();
        self.net.near(unit, &mut ids);
        let scale = self.net.frequency_scale();
        let mut terms = Vec::with_capacity(ids.len());
        let mut denom = 0.0;
        for id in ids {
            let w = self.zeta.eval(scale * distance(unit, self.net.vector(id as usize)));
            if w > 0.0 {
                terms.push((id, w));
                denom += w;
            }
        }
        if !(denom >= MIN_PARTITION_DENOMINATOR) {
            return Err(Error::CoveringViolated(denom));
        }
        Ok((terms, denom))
    }

    /// `Γ_v(ξ)`; at `ξ = 0` every piece takes `1/card`.
    pub fn eval(&self, v: usize, xi: &[f64]) -> Result<f64> {
        let Some(unit) = normalised(xi) else {
            return Ok(1.0 / self.net.len() as f64);
        };
        let (terms, denom) = self.terms(&unit)?;
        Ok(terms.iter().find(|(id, _)| *id as usize == v).map_or(0.0, |(_, w)| w / denom))
    }

    /// All nonzero `(v, Γ_v(ξ))` at `ξ ≠ 0`.
    pub fn nonzero(&self, xi: &[f64]) -> Result<Vec<(usize, f64)>> {
        let unit = normalised(xi).ok_or_else(|| invalid("xi", "ξ = 0 has no direction"))?;
        let (terms, denom) = self.terms(&unit)?;
        Ok(terms.into_iter().map(|(id, w)| (id as usize, w / denom)).collect())
    }

    /// `Σ_v Γ_v(ξ)`, summed term by term.
    pub fn sum(&self, xi: &[f64]) -> Result<f64> {
        if normalised(xi).is_none() {
            return Ok(1.0);
        }
        Ok(self.nonzero(xi)?.iter().map(|(_, g)| g).sum())
    }

    /// `Γ_v` as a multiplier. Directions where covering fails evaluate to NaN,
    /// which [`apply_multiplier`](super::apply_multiplier) rejects.
    pub fn symbol(&self, v: usize) -> MultiplierSymbol {
        let me = self.clone();
        let card = self.net.len() as f64;
        MultiplierSymbol::real(format!("gamma:{},{},{v}", self.net.n, self.net.gamma), true, 1.0 / card, move |xi| {
            me.eval(v, xi).unwrap_or(f64::NAN)
        })
    }
}

/// Result of [`overlap_count`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OverlapResult {
    /// Max over samples of `#{v : Φ(2^{nγ}⟨e_v, ξ̂⟩) ≠ 0}`.
    pub max_count: usize,
    /// Max over samples of `Σ_v Φ²(2^{nγ}⟨e_v, ξ̂⟩)`.
    pub max_square_sum: f64,
}

pub fn overlap_count(net: &DirectionNet, phi: &BumpProfile, xi_samples: &[Vec<f64>]) -> Result<OverlapResult> {
    if phi.kind() != ProfileKind::PhiPlateau {
        return Err(invalid("Phi", "overlap counts use the plateau profile"));
    }
    let scale = net.frequency_scale();
    let mut out = OverlapResult { max_count: 0, max_square_sum: 0.0 };
    for xi in xi_samples {
        let unit = normalised(xi).ok_or_else(|| invalid("xi_samples", "sample at ξ = 0"))?;
        let mut count = 0;
        let mut squares = 0.0;
        for e in net.vectors() {
            let dot: f64 = e.iter().zip(&unit).map(|(a, b)| a * b).sum();
            let w = phi.eval(scale * dot);
            if w != 0.0 {
                count += 1;
                squares += w * w;
            }
        }
        out.max_count = out.max_count.max(count);
        out.max_square_sum = out.max_square_sum.max(squares);
    }
    Ok(out)
}
