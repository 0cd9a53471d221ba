//! JSON experiment configuration.
//!
//! Every section is optional in the file; [`ConfigDocument::resolve`] fills
//! the defaults in so the echoed document is explicit and re-runs to the
//! same outputs. Unknown keys are rejected at every level.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::operator::QuadratureRule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Norms,
    KernelCheck,
    Cz,
    Net,
    Apply,
    Probe,
    Params,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Norms => "norms",
            Self::KernelCheck => "kernel-check",
            Self::Cz => "cz",
            Self::Net => "net",
            Self::Apply => "apply",
            Self::Probe => "probe",
            Self::Params => "params",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    /// Lipschitz field key for the commutator-type families.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    /// Analytic profile key for `general`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_cells: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<QuadratureRule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_min: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_max: Option<i32>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Sphere quadrature size; defaults to the smallest admissible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature_nodes: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    /// Spike radii in physical units.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_points: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CzSection {
    /// Level `t`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Enlargement factor `ρ` for `E*`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

/// Admissibility tuple; when only `d` and `delta` are given the runner
/// searches for an admissible tuple instead.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iota: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(rename = "N1", skip_serializing_if = "Option::is_none")]
    pub n1: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_key: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_key: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub net: Option<NetSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cz: Option<CzSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsSection>,
    /// Sample count for kernel checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Sphere quadrature size for norms.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature_nodes: Option<usize>,
    /// Input grid (`.sgrd`) for `apply` and `cz`; a seeded fixture otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A configuration error, with the 1-based line of the offending key when
/// it can be located in the source text.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line of the first occurrence of `"key"` in `text`.
pub fn locate_key(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

/// Whether a library error stems from a bad configuration value rather
/// than a failed computation.
pub fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidParameter { .. }
            | Error::UnknownKey(_)
            | Error::Config(_)
            | Error::UnsupportedDimension(_)
            | Error::ResolutionTooSmall { .. }
            | Error::QuadratureTooCoarse { .. }
            | Error::MissingDerivatives(_)
    )
}

/// Names the key most likely responsible for a library error.
pub fn error_key(e: &Error) -> Option<&'static str> {
    match e {
        Error::InvalidParameter { name: "epsilon", .. } => Some("epsilon_cells"),
        Error::InvalidParameter { name, .. } => Some(name),
        Error::UnsupportedDimension(_) => Some("d"),
        Error::ResolutionTooSmall { .. } | Error::QuadratureTooCoarse { .. } => Some("quadrature_nodes"),
        _ => None,
    }
}

impl ConfigDocument {
    /// Parses JSON, reporting syntax and schema errors with their line.
    pub fn parse(text: &str) -> std::result::Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError {
            line: (e.line() > 0).then_some(e.line()),
            message: e.to_string(),
        })
    }

    /// Fields of `over` replace those of `self`; sections merge key by key.
    pub fn overlay(mut self, over: &ConfigDocument) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f.clone(); } )* };
        }
        take!(experiment, omega_key, kernel_key, grid, samples, quadrature_nodes, input, seed);
        macro_rules! merge {
            ($sec:ident, $ty:ty, [$($f:ident),*]) => {
                if let Some(o) = &over.$sec {
                    let mut base: $ty = self.$sec.clone().unwrap_or_default();
                    $( if o.$f.is_some() { base.$f = o.$f.clone(); } )*
                    self.$sec = Some(base);
                }
            };
        }
        merge!(kernel, KernelParams, [field, profile]);
        merge!(operator, OperatorSection, [epsilon_cells, rule, j_min, j_max]);
        merge!(net, NetSection, [n, gamma, quadrature_nodes]);
        merge!(probe, ProbeSection, [epsilons, lambda_points]);
        merge!(cz, CzSection, [t, rho]);
        merge!(params, ParamsSection, [d, delta, gamma, iota, eps0, mu, n1]);
        self
    }

    pub fn dim(&self) -> usize {
        self.grid.map_or(2, |g| g.d)
    }

    /// Fills every default the named experiment reads, so the result is a
    /// complete record of the run.
    pub fn resolve(&self) -> std::result::Result<Self, ConfigError> {
        let kind = self.experiment.ok_or_else(|| ConfigError { line: None, message: "missing `experiment`".into() })?;
        let mut r = ConfigDocument { experiment: Some(kind), seed: Some(self.seed.unwrap_or(0)), ..Default::default() };
        let grid = self.grid.unwrap_or(GridConfig { d: 2, n: 128, l: 8.0 });
        let d = grid.d;
        let kernel_key = self.kernel_key.clone().unwrap_or_else(|| "power".into());
        let kernel_params = || {
            let k = self.kernel.clone().unwrap_or_default();
            let needs_field = kernel_key != "power" && !kernel_key.starts_with("muckenhoupt");
            KernelParams {
                field: needs_field.then(|| k.field.unwrap_or_else(|| "sqrt1p".into())),
                profile: (kernel_key == "general").then(|| k.profile.unwrap_or_else(|| "cosh".into())),
            }
        };
        match kind {
            ExperimentKind::Norms => {
                r.omega_key = Some(self.omega_key.clone().unwrap_or_else(|| "const1".into()));
                r.grid = Some(grid);
                r.quadrature_nodes = Some(self.quadrature_nodes.unwrap_or(if d == 2 { 4096 } else { 1 << 16 }));
            }
            ExperimentKind::KernelCheck => {
                r.grid = Some(grid);
                r.kernel_params_into(kernel_key.clone(), kernel_params());
                r.samples = Some(self.samples.unwrap_or(10_000));
            }
            ExperimentKind::Cz => {
                r.grid = Some(self.grid.unwrap_or(GridConfig { d: 2, n: 256, l: 1.0 }));
                let cz = self.cz.unwrap_or_default();
                r.cz = Some(CzSection { t: Some(cz.t.unwrap_or(1.0)), rho: Some(cz.rho.unwrap_or(2.0)) });
                r.input = self.input.clone();
            }
            ExperimentKind::Net => {
                r.grid = Some(grid);
                let net = self.net.unwrap_or_default();
                let (n, gamma) = (net.n.unwrap_or(8), net.gamma.unwrap_or(0.25));
                r.net = Some(NetSection {
                    n: Some(n),
                    gamma: Some(gamma),
                    quadrature_nodes: Some(
                        net.quadrature_nodes
                            .unwrap_or_else(|| crate::microlocal::net_quadrature_resolution(d, n.max(1), gamma)),
                    ),
                });
            }
            ExperimentKind::Apply | ExperimentKind::Probe => {
                r.grid = Some(grid);
                r.omega_key = Some(self.omega_key.clone().unwrap_or_else(|| "theta1".into()));
                r.kernel_params_into(kernel_key.clone(), kernel_params());
                let op = self.operator.unwrap_or_default();
                r.operator = Some(OperatorSection {
                    epsilon_cells: Some(op.epsilon_cells.unwrap_or(1.0)),
                    rule: Some(op.rule.unwrap_or(QuadratureRule::Plain)),
                    j_min: op.j_min,
                    j_max: op.j_max,
                });
                if kind == ExperimentKind::Probe {
                    let p = self.probe.clone().unwrap_or_default();
                    let quarter = grid.l / 4.0;
                    r.probe = Some(ProbeSection {
                        epsilons: Some(p.epsilons.unwrap_or_else(|| (0..4).map(|i| quarter / f64::from(1 << i)).collect())),
                        lambda_points: Some(p.lambda_points.unwrap_or(crate::probe::DEFAULT_LAMBDA_POINTS)),
                    });
                }
                r.input = self.input.clone();
            }
            ExperimentKind::Params => {
                let p = self.params.unwrap_or_default();
                r.params = Some(ParamsSection { d: Some(p.d.unwrap_or(2)), delta: Some(p.delta.unwrap_or(1.0)), ..p });
            }
        }
        Ok(r)
    }

    fn kernel_params_into(&mut self, key: String, params: KernelParams) {
        self.kernel_key = Some(key);
        if params.field.is_some() || params.profile.is_some() {
            self.kernel = Some(params);
        }
    }
}
