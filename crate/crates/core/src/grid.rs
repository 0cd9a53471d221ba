//! Uniform box grids, discrete Lebesgue norms, distribution functions and the
//! periodic discrete Fourier transform.
//!
//! Transform convention: the forward transform is the unnormalised DFT
//! `U[k] = Σ_n u[n] e^{-2πi⟨k,n⟩/N}` and the inverse carries the `1/N^d`.
//! Index `k` on an axis corresponds to the physical frequency
//! `ξ = (π/L)·m` with `m = k` for `k < N/2` and `m = k - N` otherwise.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};

/// The box `[-L, L)^d` cut into `N^d` cells of side `h = 2L/N`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    dim: usize,
    n: usize,
    half_width: f64,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize, half_width: f64) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(invalid("N", format!("{n} is not a power of two ≥ 2")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(invalid("L", format!("half-width {half_width} must be positive and finite")));
        }
        Ok(Self { dim, n, half_width })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Total number of cells `N^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate `-L + i h` of node `i` along an axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Row-major multi-index of a flat index (last axis fastest).
    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for k in (0..self.dim).rev() {
            out[k] = flat % self.n;
            flat /= self.n;
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let mut rest = flat;
        for k in (0..self.dim).rev() {
            out[k] = self.coord(rest % self.n);
            rest /= self.n;
        }
    }

    /// Signed DFT index `m ∈ {-N/2, …, N/2-1}` of array index `k`.
    #[inline]
    pub fn signed_frequency_index(&self, k: usize) -> i64 {
        if k < self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    /// Physical frequency `ξ = (π/L) m` at a flat transform index.
    pub fn frequency(&self, flat: usize, out: &mut [f64]) {
        let step = PI / self.half_width;
        let mut rest = flat;
        for k in (0..self.dim).rev() {
            out[k] = step * self.signed_frequency_index(rest % self.n) as f64;
            rest /= self.n;
        }
    }

    /// The grid with `factor` times as many cells per axis and the same
    /// spacing, centred on the same origin.
    pub fn enlarged(&self, factor: usize) -> Result<Self> {
        Self::new(self.dim, self.n * factor, self.half_width * factor as f64)
    }
}

/// Complex samples on a [`GridSpec`], row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    spec: GridSpec,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(spec: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                spec.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite {
                value: if v.re.is_finite() { v.im } else { v.re },
                context: format!("grid value at flat index {i}"),
            });
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self { spec, values: vec![Complex64::new(0.0, 0.0); spec.len()] }
    }

    /// Samples `f` at every node.
    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(&[f64]) -> Complex64) -> Result<Self> {
        let mut x = vec![0.0; spec.dim()];
        let values = (0..spec.len())
            .map(|i| {
                spec.point(i, &mut x);
                f(&x)
            })
            .collect();
        Self::new(spec, values)
    }

    pub fn from_real_fn(spec: GridSpec, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        Self::from_fn(spec, |x| Complex64::new(f(x), 0.0))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Applies `f` pointwise. `f` must keep values finite.
    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self { spec: self.spec, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.spec, other.spec)));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self { spec: self.spec, values })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { spec: self.spec, values })
    }

    /// Places `self` in the middle of the enlarged grid, zero elsewhere.
    pub fn zero_padded(&self, factor: usize) -> Result<Self> {
        let big = self.spec.enlarged(factor)?;
        let mut out = Self::zeros(big);
        let offset = (big.n() - self.spec.n()) / 2;
        let mut idx = vec![0; self.spec.dim()];
        for (i, v) in self.values.iter().enumerate() {
            self.spec.multi_index(i, &mut idx);
            idx.iter_mut().for_each(|k| *k += offset);
            out.values[big.flat_index(&idx)] = *v;
        }
        Ok(out)
    }

    /// Inverse of [`zero_padded`](Self::zero_padded): the central block on `small`.
    pub fn central_block(&self, small: GridSpec) -> Result<Self> {
        if small.dim() != self.spec.dim()
            || small.n() > self.spec.n()
            || (small.spacing() - self.spec.spacing()).abs() > 1e-12 * small.spacing()
        {
            return Err(Error::GridMismatch(format!("{small:?} is not a central block of {:?}", self.spec)));
        }
        let offset = (self.spec.n() - small.n()) / 2;
        let mut idx = vec![0; small.dim()];
        let values = (0..small.len())
            .map(|i| {
                small.multi_index(i, &mut idx);
                idx.iter_mut().for_each(|k| *k += offset);
                self.values[self.spec.flat_index(&idx)]
            })
            .collect();
        Ok(Self { spec: small, values })
    }
}

/// Riemann-sum `‖u‖_p = (Σ |u|^p h^d)^{1/p}`; `p = ∞` gives `max |u|`.
///
/// # Panics
/// If `p < 1` or `p` is NaN.
pub fn lebesgue_norm(u: &GridFunction, p: f64) -> f64 {
    assert!(p >= 1.0, "Lebesgue exponent must be ≥ 1, got {p}");
    let vals = u.values();
    if p.is_infinite() {
        return vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
    }
    let hd = u.spec().cell_volume();
    if p == 1.0 {
        vals.iter().map(|v| v.norm()).sum::<f64>() * hd
    } else if p == 2.0 {
        (vals.iter().map(|v| v.norm_sqr()).sum::<f64>() * hd).sqrt()
    } else {
        (vals.iter().map(|v| v.norm().powf(p)).sum::<f64>() * hd).powf(1.0 / p)
    }
}

/// `m({|u| > λ}) = h^d · #{cells with |u| > λ}`.
///
/// # Panics
/// If `λ ≤ 0`.
pub fn distribution_measure(u: &GridFunction, lambda: f64) -> f64 {
    distribution_measure_masked(u, lambda, None)
}

/// As [`distribution_measure`], ignoring cells where `exclude` is set.
pub fn distribution_measure_masked(u: &GridFunction, lambda: f64, exclude: Option<&[bool]>) -> f64 {
    assert!(lambda > 0.0, "distribution level must be > 0, got {lambda}");
    let count = match exclude {
        None => u.values().iter().filter(|v| v.norm() > lambda).count(),
        Some(mask) => u
            .values()
            .iter()
            .zip(mask)
            .filter(|(v, &skip)| !skip && v.norm() > lambda)
            .count(),
    };
    count as f64 * u.spec().cell_volume()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// In-place multidimensional FFT over a row-major `N^d` array.
fn fft_in_place(spec: &GridSpec, data: &mut [Complex64], direction: Direction) {
    let n = spec.n();
    let mut planner = FftPlanner::<f64>::new();
    let fft = match direction {
        Direction::Forward => planner.plan_fft_forward(n),
        Direction::Inverse => planner.plan_fft_inverse(n),
    };
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    // last axis: contiguous lines
    fft.process_with_scratch(data, &mut scratch);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in (0..spec.dim() - 1).rev() {
        let stride = n.pow((spec.dim() - 1 - axis) as u32);
        let block = stride * n;
        for base in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[start + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, v) in line.iter().enumerate() {
                    data[start + k * stride] = *v;
                }
            }
        }
    }
    if direction == Direction::Inverse {
        let scale = 1.0 / spec.len() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }
}

/// Periodic DFT pair; see the module docs for the convention.
pub fn transform_pair(u: &GridFunction, direction: Direction) -> GridFunction {
    let mut values = u.values().to_vec();
    fft_in_place(u.spec(), &mut values, direction);
    GridFunction { spec: *u.spec(), values }
}

/// `F^{-1}[m(ξ) F u]` on the periodic grid, with `m` evaluated at the
/// physical frequencies.
pub fn apply_symbol(u: &GridFunction, m: impl Fn(&[f64]) -> Complex64) -> GridFunction {
    let spec = *u.spec();
    let mut xi = vec![0.0; spec.dim()];
    let values: Vec<Complex64> = (0..spec.len())
        .map(|i| {
            spec.frequency(i, &mut xi);
            m(&xi)
        })
        .collect();
    apply_symbol_values(u, &values)
}

/// As [`apply_symbol`] with the symbol already tabulated in transform order.
///
/// # Panics
/// If `symbol.len()` differs from the cell count.
pub fn apply_symbol_values(u: &GridFunction, symbol: &[Complex64]) -> GridFunction {
    let spec = *u.spec();
    assert_eq!(symbol.len(), spec.len(), "symbol table size mismatch");
    let mut values = u.values().to_vec();
    fft_in_place(&spec, &mut values, Direction::Forward);
    values.iter_mut().zip(symbol).for_each(|(v, m)| *v *= m);
    fft_in_place(&spec, &mut values, Direction::Inverse);
    GridFunction { spec, values }
}

/// `‖u‖_2` computed from forward coefficients `U` by Parseval:
/// `Σ|u|² h^d = h^d Σ|U|² / N^d`.
pub fn l2_norm_from_spectrum(spectrum: &GridFunction) -> f64 {
    let spec = spectrum.spec();
    let sum: f64 = spectrum.values().iter().map(|v| v.norm_sqr()).sum();
    (sum * spec.cell_volume() / spec.len() as f64).sqrt()
}

const SGRD_MAGIC: &[u8; 4] = b"SGRD";
const SGRD_VERSION: u32 = 1;

pub fn write_sgrd(u: &GridFunction, mut w: impl Write) -> Result<()> {
    let spec = u.spec();
    let mut buf = Vec::with_capacity(24 + 16 * spec.len());
    buf.extend_from_slice(SGRD_MAGIC);
    buf.extend_from_slice(&SGRD_VERSION.to_le_bytes());
    buf.extend_from_slice(&(spec.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(spec.n() as u32).to_le_bytes());
    buf.extend_from_slice(&spec.half_width().to_le_bytes());
    for v in u.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_sgrd(mut r: impl Read) -> Result<GridFunction> {
    let mut header = [0u8; 24];
    r.read_exact(&mut header)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    if &header[0..4] != SGRD_MAGIC {
        return Err(Error::Format("bad magic, expected SGRD".into()));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != SGRD_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let half_width = f64::from_le_bytes(header[16..24].try_into().unwrap());
    let spec = GridSpec::new(word(8) as usize, word(12) as usize, half_width)
        .map_err(|e| Error::Format(format!("bad header: {e}")))?;
    let mut body = Vec::with_capacity(16 * spec.len());
    r.read_to_end(&mut body)?;
    if body.len() != 16 * spec.len() {
        return Err(Error::Format(format!(
            "expected {} value bytes, found {}",
            16 * spec.len(),
            body.len()
        )));
    }
    let values = body
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect();
    GridFunction::new(spec, values)
}

pub fn save_sgrd(u: &GridFunction, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_sgrd(u, std::io::BufWriter::new(file))
}

pub fn load_sgrd(path: impl AsRef<Path>) -> Result<GridFunction> {
    let file = std::fs::File::open(path)?;
    read_sgrd(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(spec: GridSpec, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..spec.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        GridFunction::new(spec, v).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(GridSpec::new(2, 48, 1.0).is_err());
        assert!(GridSpec::new(4, 16, 1.0).is_err());
        assert!(GridSpec::new(2, 16, 0.0).is_err());
        let s = GridSpec::new(3, 8, 2.0).unwrap();
        assert_eq!(s.len(), 512);
        assert_eq!(s.spacing(), 0.5);
        let mut idx = [0; 3];
        s.multi_index(s.flat_index(&[1, 2, 3]), &mut idx);
        assert_eq!(idx, [1, 2, 3]);
    }

    #[test]
    fn norms_of_simple_functions() {
        let s = GridSpec::new(2, 64, 1.0).unwrap();
        let one = GridFunction::from_real_fn(s, |_| 1.0).unwrap();
        assert!((lebesgue_norm(&one, 1.0) - 4.0).abs() < 1e-12);
        let zero = GridFunction::zeros(s);
        for p in [1.0, 2.0, f64::INFINITY] {
            assert_eq!(lebesgue_norm(&zero, p), 0.0);
        }
        let half = GridFunction::from_real_fn(s, |x| if x[0] < 0.0 { 2.0 } else { 0.0 }).unwrap();
        let l = s.half_width();
        assert!((lebesgue_norm(&half, 2.0).powi(2) - 4.0 * 2.0 * l * l).abs() < 1e-12);
        assert_eq!(lebesgue_norm(&half, f64::INFINITY), 2.0);
    }

    #[test]
    fn distribution_examples() {
        let s = GridSpec::new(2, 64, 2.0).unwrap();
        let u = GridFunction::from_real_fn(s, |x| {
            if (0.0..1.0).contains(&x[0]) && (0.0..1.0).contains(&x[1]) { 2.0 } else { 0.0 }
        })
        .unwrap();
        assert!((distribution_measure(&u, 1.0) - 1.0).abs() < 1e-12);
        assert_eq!(distribution_measure(&u, 3.0), 0.0);
    }

    #[test]
    fn gaussian_level_set_is_unit_disk() {
        let s = GridSpec::new(2, 512, 8.0).unwrap();
        let u = GridFunction::from_real_fn(s, |x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp()).unwrap();
        let m = distribution_measure(&u, (-0.5f64).exp());
        assert!((m - PI).abs() < 0.05 * PI, "{m}");
    }

    #[test]
    fn distribution_monotone_and_chebyshev() {
        let s = GridSpec::new(2, 32, 1.0).unwrap();
        let u = random(s, 3);
        let l1 = lebesgue_norm(&u, 1.0);
        let mut prev = f64::INFINITY;
        for i in 1..200 {
            let lambda = i as f64 * 0.01;
            let m = distribution_measure(&u, lambda);
            assert!(m <= prev);
            assert!(lambda * m <= l1);
            prev = m;
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        for s in [GridSpec::new(2, 64, 3.0).unwrap(), GridSpec::new(3, 16, 1.0).unwrap()] {
            let u = random(s, 9);
            let f = transform_pair(&u, Direction::Forward);
            let back = transform_pair(&f, Direction::Inverse);
            let err = lebesgue_norm(&back.sub(&u).unwrap(), 2.0) / lebesgue_norm(&u, 2.0);
            assert!(err < 1e-12, "{err}");
            let a = lebesgue_norm(&u, 2.0);
            assert!((l2_norm_from_spectrum(&f) - a).abs() < 1e-10 * a);
        }
    }

    #[test]
    fn constant_concentrates_at_zero_frequency() {
        let s = GridSpec::new(2, 32, 1.0).unwrap();
        let f = transform_pair(&GridFunction::from_real_fn(s, |_| 1.0).unwrap(), Direction::Forward);
        assert!((f.values()[0].re - s.len() as f64).abs() < 1e-9);
        assert!(f.values()[1..].iter().all(|v| v.norm() < 1e-9));
    }

    #[test]
    fn shift_theorem() {
        let s = GridSpec::new(2, 32, 1.0).unwrap();
        let u = random(s, 4);
        let mut idx = [0; 2];
        let shifted: Vec<_> = (0..s.len())
            .map(|i| {
                s.multi_index(i, &mut idx);
                idx[1] = (idx[1] + s.n() - 1) % s.n();
                u.values()[s.flat_index(&idx)]
            })
            .collect();
        let fu = transform_pair(&u, Direction::Forward);
        let fs = transform_pair(&GridFunction::new(s, shifted).unwrap(), Direction::Forward);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut xi = [0.0; 2];
        for _ in 0..10 {
            let k = rng.gen_range(0..s.len());
            let ratio = fs.values()[k] / fu.values()[k];
            assert!((ratio.norm() - 1.0).abs() < 1e-9);
            // a one-cell shift multiplies by e^{-i ξ_2 h}
            s.frequency(k, &mut xi);
            let expected = Complex64::from_polar(1.0, -xi[1] * s.spacing());
            assert!((ratio - expected).norm() < 1e-9);
        }
    }

    #[test]
    fn padding_round_trip() {
        let s = GridSpec::new(2, 16, 1.0).unwrap();
        let u = random(s, 5);
        let big = u.zero_padded(2).unwrap();
        assert_eq!(big.spec().n(), 32);
        assert!((lebesgue_norm(&big, 1.0) - lebesgue_norm(&u, 1.0)).abs() < 1e-12);
        // node coordinates survive the embedding
        let mut a = [0.0; 2];
        let mut b = [0.0; 2];
        s.point(s.flat_index(&[3, 5]), &mut a);
        big.spec().point(big.spec().flat_index(&[11, 13]), &mut b);
        assert_eq!(a, b);
        assert_eq!(big.central_block(s).unwrap(), u);
    }

    #[test]
    fn sgrd_round_trip_and_errors() {
        let s = GridSpec::new(2, 8, 1.5).unwrap();
        let u = random(s, 6);
        let mut buf = Vec::new();
        write_sgrd(&u, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"SGRD");
        assert_eq!(buf.len(), 24 + 16 * 64);
        assert_eq!(read_sgrd(&buf[..]).unwrap(), u);
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_sgrd(&bad[..]), Err(Error::Format(_))));
        assert!(matches!(read_sgrd(&buf[..100]), Err(Error::Format(_))));
        let mut v2 = buf.clone();
        v2[4] = 2;
        assert!(matches!(read_sgrd(&v2[..]), Err(Error::Format(_))));
    }
}
