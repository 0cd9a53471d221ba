//! Fast invariant checks across all modules, for `singlab selftest`.
//!
//! Each check is small enough to run in well under a second; failures are
//! reported as data, never as panics.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::czd::{cz_decompose, verify_cz};
use crate::error::Result;
use crate::experiment::random_fixture;
use crate::grid::{
    l2_norm_from_spectrum, lebesgue_norm, read_sgrd, transform_pair, write_sgrd, Direction, GridFunction, GridSpec,
};
use crate::kernel_zoo::{
    check_size, dyadic_piece, make_kernel, KernelFamily, LipschitzField, PairSampler, SampleRegion,
};
use crate::microlocal::{
    admissible_parameters, apply_multiplier, direction_net, lp_symbols, partition_of_unity, AdmissibilityParams,
    BumpProfile,
};
use crate::operator::{
    apply_diagonal_excluded, apply_dyadic_sum, apply_truncated, apply_truncated_at, OperatorConfig, QuadratureRule,
};
use crate::probe::{spike_family, LambdaGrid};
use crate::sphere_fn::{build_quadrature, compute_norms, moment, SphereFunction};

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = (&'static str, &'static str, fn() -> Result<(bool, String)>);

const CHECKS: &[Check] = &[
    ("sphere_fn", "const1 norms in closed form", sphere_norms),
    ("sphere_fn", "odd samples have vanishing moments", sphere_moments),
    ("kernel_zoo", "power kernel size constant is 1", kernel_size),
    ("kernel_zoo", "dyadic pieces telescope to the kernel", kernel_telescoping),
    ("grid", "transform round trip and Parseval", grid_fft),
    ("grid", ".sgrd round trip", grid_sgrd),
    ("czd", "decomposition invariants at three levels", czd_invariants),
    ("microlocal", "partition of unity sums to one", partition_sum),
    ("microlocal", "Littlewood-Paley telescoping", lp_reconstruction),
    ("microlocal", "trivial admissibility tuple", params_trivial),
    ("operator", "linearity", operator_linearity),
    ("operator", "dyadic sum equals diagonal-excluded sum", operator_exhaustion),
    ("operator", "antisymmetric cancellation on constants", operator_cancellation),
    ("probe", "monotone measures and Chebyshev bound", probe_invariants),
];

/// Runs every check; an error inside a check counts as a failure.
pub fn run_selftest() -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|&(module, name, check)| {
            let (passed, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
            CheckOutcome { module, name, passed, detail }
        })
        .collect()
}

fn rel_l2(a: &GridFunction, b: &GridFunction) -> Result<f64> {
    Ok(lebesgue_norm(&a.sub(b)?, 2.0) / lebesgue_norm(b, 2.0))
}

fn random(spec: GridSpec, seed: u64) -> Result<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GridFunction::from_real_fn(spec, |_| rng.gen_range(-1.0..1.0))
}

fn bump(spec: GridSpec, radius: f64) -> Result<GridFunction> {
    GridFunction::from_real_fn(spec, |x| {
        let r2 = x.iter().map(|c| c * c).sum::<f64>() / (radius * radius);
        if r2 < 1.0 {
            (-1.0 / (1.0 - r2)).exp()
        } else {
            0.0
        }
    })
}

fn sphere_norms() -> Result<(bool, String)> {
    let n = compute_norms(&SphereFunction::from_key("const1", 2)?, &build_quadrature(2, 4096)?, &[])?;
    let want = (2.0 * PI, 2.0 * PI * 3f64.ln());
    let err = (n.l1 - want.0).abs().max((n.llogl - want.1).abs());
    Ok((err < 1e-10, format!("max deviation {err:.2e}")))
}

fn sphere_moments() -> Result<(bool, String)> {
    let quad = build_quadrature(2, 4096)?;
    let mut worst: f64 = 0.0;
    // θ_1 is odd under both reflections; logspike only under θ_2 → -θ_2
    let cases: [(&str, &[[usize; 2]]); 2] = [("theta1", &[[0, 0], [0, 1]]), ("logspike", &[[0, 0], [1, 0]])];
    for (key, alphas) in cases {
        let om = SphereFunction::from_key(key, 2)?;
        for alpha in alphas {
            worst = worst.max(moment(&om, &quad, alpha)?.abs());
        }
    }
    Ok((worst < 1e-10, format!("max |moment| {worst:.2e}")))
}

fn kernel_size() -> Result<(bool, String)> {
    let k = make_kernel(2, KernelFamily::Power)?;
    let c = check_size(&k, &mut PairSampler::new(2, SampleRegion::default(), 7)?, 2000)?;
    Ok((c == 1.0, format!("C_size = {c}")))
}

fn kernel_telescoping() -> Result<(bool, String)> {
    let k = make_kernel(2, KernelFamily::Commutator(LipschitzField::sqrt1p(2)))?;
    let phi = BumpProfile::phi();
    let pieces = (-20..=20).map(|j| dyadic_piece(&k, j, &phi)).collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let r: f64 = rng.gen_range(-6.0f64..3.0).exp2();
        let y = [x[0] + r, x[1]];
        let sum: Complex64 = pieces.iter().map(|p| p.eval(&x, &y)).sum();
        let full = k.eval(&x, &y);
        worst = worst.max((sum - full).norm() / full.norm());
    }
    Ok((worst < 1e-12, format!("max relative gap {worst:.2e}")))
}

fn grid_fft() -> Result<(bool, String)> {
    let u = random(GridSpec::new(2, 32, 2.0)?, 1)?;
    let spec = transform_pair(&u, Direction::Forward);
    let back = transform_pair(&spec, Direction::Inverse);
    let round = rel_l2(&back, &u)?;
    let parseval = (l2_norm_from_spectrum(&spec) - lebesgue_norm(&u, 2.0)).abs() / lebesgue_norm(&u, 2.0);
    Ok((round < 1e-12 && parseval < 1e-12, format!("round trip {round:.2e}, Parseval {parseval:.2e}")))
}

fn grid_sgrd() -> Result<(bool, String)> {
    let u = random(GridSpec::new(3, 8, 1.5)?, 4)?;
    let mut buf = Vec::new();
    write_sgrd(&u, &mut buf)?;
    let v = read_sgrd(buf.as_slice())?;
    let same = v.spec() == u.spec() && v.values() == u.values();
    Ok((same, format!("{} bytes", buf.len())))
}

fn czd_invariants() -> Result<(bool, String)> {
    let f = random_fixture(GridSpec::new(2, 64, 1.0)?, 11)?;
    let mut ok = true;
    for t in [0.5, 2.0, 8.0] {
        let report = verify_cz(&cz_decompose(&f, t, 2.0)?, &f, t);
        ok &= report.all_pass;
    }
    Ok((ok, "t ∈ {0.5, 2, 8}".into()))
}

fn partition_sum() -> Result<(bool, String)> {
    let net = Arc::new(direction_net(8, 0.25, &build_quadrature(2, 1 << 14)?)?);
    let pou = partition_of_unity(net, &BumpProfile::zeta())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let xi = [rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)];
        worst = worst.max((pou.sum(&xi)? - 1.0).abs());
    }
    Ok((worst <= 1e-10, format!("max |Σ - 1| {worst:.2e}")))
}

fn lp_reconstruction() -> Result<(bool, String)> {
    let u = random(GridSpec::new(2, 32, 1.0)?, 6)?;
    let psi = BumpProfile::psi();
    let (k0, m) = (-8, 3);
    let mut total = apply_multiplier(&lp_symbols(m, &psi)?.0, &u)?;
    for k in k0..m {
        total = total.add(&apply_multiplier(&lp_symbols(k, &psi)?.1, &u)?)?;
    }
    let err = rel_l2(&total, &u)?;
    Ok((err < 1e-10, format!("relative L² {err:.2e}")))
}

fn params_trivial() -> Result<(bool, String)> {
    let v = admissible_parameters(&AdmissibilityParams { d: 2, delta: 1.0, gamma: 0.0, iota: 0.0, eps0: 0.5, mu: 0.0, n1: 1 });
    let ok = v.admissible && [v.s1, v.s2, v.s3, v.s4] == [-0.5, -1.0, -1.0, -0.5];
    Ok((ok, format!("s = ({}, {}, {}, {})", v.s1, v.s2, v.s3, v.s4)))
}

fn theta1_power() -> Result<OperatorConfig> {
    Ok(OperatorConfig::new(SphereFunction::from_key("theta1", 2)?, make_kernel(2, KernelFamily::Power)?))
}

fn operator_linearity() -> Result<(bool, String)> {
    let spec = GridSpec::new(2, 16, 1.0)?;
    let cfg = theta1_power()?;
    let (f, g) = (bump(spec, 0.4)?, random(spec, 9)?);
    let lhs = apply_truncated(&cfg, &f.scaled(2.0).add(&g.scaled(-0.5))?)?;
    let rhs = apply_truncated(&cfg, &f)?.scaled(2.0).add(&apply_truncated(&cfg, &g)?.scaled(-0.5))?;
    let err = rel_l2(&lhs, &rhs)?;
    Ok((err < 1e-12, format!("relative L² {err:.2e}")))
}

fn operator_exhaustion() -> Result<(bool, String)> {
    let spec = GridSpec::new(2, 16, 1.0)?;
    let cfg = theta1_power()?;
    let f = bump(spec, 0.45)?;
    let direct = apply_diagonal_excluded(&cfg, &f)?;
    let err = lebesgue_norm(&apply_dyadic_sum(&cfg, &f)?.sub(&direct)?, 1.0) / lebesgue_norm(&direct, 1.0);
    Ok((err < 1e-10, format!("relative L¹ {err:.2e}")))
}

fn operator_cancellation() -> Result<(bool, String)> {
    let spec = GridSpec::new(2, 16, 1.0)?;
    let f = GridFunction::from_real_fn(spec, |x| if x[0].abs() < 0.5 && x[1].abs() < 0.5 { 1.0 } else { 0.0 })?;
    let cfg = theta1_power()?.with_rule(QuadratureRule::Antisymmetrized);
    let v = apply_truncated_at(&cfg, &f, &[spec.flat_index(&[8, 8])])?[0];
    Ok((v.norm() == 0.0, format!("|T f(0)| = {:.2e}", v.norm())))
}

fn probe_invariants() -> Result<(bool, String)> {
    let rs = spike_family(&theta1_power()?, &[0.25, 0.125], GridSpec::new(2, 64, 1.0)?, &LambdaGrid::default(), None)?;
    let ok = rs.iter().all(|r| r.is_monotone() && r.is_chebyshev_consistent());
    let ratios: Vec<String> = rs.iter().map(|r| format!("{:.3}/{:.3}", r.weak_ratio, r.l1_ratio)).collect();
    Ok((ok, format!("weak/l1 {}", ratios.join(", "))))
}
