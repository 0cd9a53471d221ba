//! Kernels `K(x, y)` of the application families, their size/regularity
//! constants, and dyadic and mollified pieces.

mod checks;
mod dyadic;
mod field;
mod kernel;

use num_complex::Complex64;

pub use checks::{check_regularity, check_size, PairSampler, RegularityEstimate, SampleRegion, TripleSampler};
pub use dyadic::{
    dyadic_piece, l_delta, mollified_piece, DyadicPiece, Mollification, DEFAULT_MOLLIFIER_RESOLUTION,
    MIN_MOLLIFIER_RESOLUTION,
};
pub use field::{AnalyticProfile, LipschitzField};
pub use kernel::{
    kernel_from_key, make_kernel, taylor_remainder, taylor_remainder_integral, KernelFamily, KernelSpec,
};

/// Euclidean distance `|x - y|`.
#[inline]
pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// `|z|`, exact for real values.
#[inline]
pub(crate) fn modulus(z: Complex64) -> f64 {
    if z.im == 0.0 {
        z.re.abs()
    } else {
        z.norm()
    }
}
