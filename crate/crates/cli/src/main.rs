//! `singlab`: command-line front end.
//!
//! Exit codes: 0 success, 1 experiment or selftest failure, 2 configuration
//! error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use singlab::config::{
    error_key, is_config_error, locate_key, ConfigDocument, CzSection, ExperimentKind, GridConfig, KernelParams,
    NetSection, OperatorSection, ParamsSection, ProbeSection,
};
use singlab::experiment::run_experiment;
use singlab::operator::QuadratureRule;
use singlab::selftest::run_selftest;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "singlab", version, about = "Numerical laboratory for rough singular integrals")]
struct Cli {
    /// Output directory (default: $SINGLAB_OUT, else ./singlab-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// L¹, L log L and C_Ω norms of a sample Ω.
    Norms(NormsArgs),
    /// Size and regularity constants of a kernel by seeded sampling.
    CheckKernel(KernelArgs),
    /// Calderón–Zygmund decomposition and its invariant report.
    Cz(CzArgs),
    /// Direction net with separation and covering checks.
    Net(NetArgs),
    /// Apply the truncated operator to a grid function.
    Apply(ApplyArgs),
    /// Weak-ratio probe on a spike family or an input grid.
    Probe(ProbeArgs),
    /// Exponent check for a parameter tuple, or a search when none is given.
    Params(ParamsArgs),
    /// Run the invariant suites of every module.
    Selftest,
}

#[derive(Args, Debug, Default)]
struct ConfigArg {
    /// JSON config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for random fixtures and samplers.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Default)]
struct GridArgs {
    /// Dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Grid points per axis.
    #[arg(long = "grid-n")]
    grid_n: Option<usize>,
    /// Box half-width L.
    #[arg(long = "half-width")]
    half_width: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct KernelFlags {
    /// Kernel key: power, commutator, higher:k, general, bc:l, muckenhoupt:r.
    #[arg(long)]
    kernel: Option<String>,
    /// Lipschitz field key: linear:a1,a2, sqrt1p, quadratic.
    #[arg(long)]
    field: Option<String>,
    /// Analytic profile key: cosh, cos.
    #[arg(long)]
    profile: Option<String>,
}

#[derive(Args, Debug)]
struct NormsArgs {
    #[command(flatten)]
    cfg: ConfigArg,
    /// Sphere function key: const1, theta1, theta1theta2, logspike.
    #[arg(long)]
    omega: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    /// Sphere quadrature nodes.
    #[arg(long = "quadrature-nodes")]
    quadrature_nodes: Option<usize>,
}

#[derive(Args, Debug)]
struct KernelArgs {
    #[command(flatten)]
    cfg: ConfigArg,
    #[command(flatten)]
    kernel: KernelFlags,
    #[arg(long)]
    d: Option<usize>,
    /// Sampled pairs and triples.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Debug)]
struct CzArgs {
    #[command(flatten)]
    cfg: ConfigArg,
    #[command(flatten)]
    grid: GridArgs,
    /// Level t.
    #[arg(long)]
    t: Option<f64>,
    /// Enlargement factor for E*.
    #[arg(long)]
    rho: Option<f64>,
    /// Input grid (.sgrd).
    #[arg(long)]
    input: Option<String>,
}

#[derive(Args, Debug)]
struct NetArgs {
    #[command(flatten)]
    cfg: ConfigArg,
    #[arg(long)]
    d: Option<usize>,
    /// Net level n.
    #[arg(long)]
    n: Option<u32>,
    /// Exponent γ in (0, 1).
    #[arg(long)]
    gamma: Option<f64>,
    /// Sphere quadrature nodes for the candidate set.
    #[arg(long = "quadrature-nodes")]
    quadrature_nodes: Option<usize>,
}

#[derive(Args, Debug)]
struct OperatorFlags {
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    kernel: KernelFlags,
    /// Sphere function key: const1, theta1, theta1theta2, logspike.
    #[arg(long)]
    omega: Option<String>,
    /// Truncation radius in cells.
    #[arg(long = "epsilon-cells")]
    epsilon_cells: Option<f64>,
    /// Quadrature rule: plain or antisymmetrized.
    #[arg(long, value_parser = parse_rule)]
    rule: Option<QuadratureRule>,
    /// Smallest dyadic scale kept.
    #[arg(long = "j-min", allow_hyphen_values = true)]
    j_min: Option<i32>,
    /// Largest dyadic scale kept.
    #[arg(long = "j-max", allow_hyphen_values = true)]
    j_max: Option<i32>,
    /// Input grid (.sgrd).
    #[arg(long)]
    input: Option<String>,
}

#[derive(Args, Debug)]
struct ApplyArgs {
    #[command(flatten)]
    cfg: ConfigArg,
    #[command(flatten)]
    op: OperatorFlags,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    #[command(flatten)]
    cfg: ConfigArg,
    #[command(flatten)]
    op: OperatorFlags,
    /// Spike radii, comma separated.
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    /// Points in the λ grid.
    #[arg(long = "lambda-points")]
    lambda_points: Option<usize>,
}

#[derive(Args, Debug)]
struct ParamsArgs {
    #[command(flatten)]
    cfg: ConfigArg,
    #[arg(long)]
    d: Option<usize>,
    /// Hölder exponent δ.
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Exponent γ.
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Exponent ι.
    #[arg(long, allow_hyphen_values = true)]
    iota: Option<f64>,
    /// Exponent ε₀.
    #[arg(long, allow_hyphen_values = true)]
    eps0: Option<f64>,
    /// Exponent μ.
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    /// Integer N₁.
    #[arg(long = "N1")]
    n1: Option<u32>,
}

fn parse_rule(s: &str) -> Result<QuadratureRule, String> {
    match s {
        "plain" => Ok(QuadratureRule::Plain),
        "antisymmetrized" => Ok(QuadratureRule::Antisymmetrized),
        _ => Err(format!("unknown rule `{s}` (plain | antisymmetrized)")),
    }
}

fn kernel_params(k: &KernelFlags) -> Option<KernelParams> {
    (k.field.is_some() || k.profile.is_some()).then(|| KernelParams { field: k.field.clone(), profile: k.profile.clone() })
}

/// Grid flags only override a file grid as a whole once all three are known.
fn grid_overlay(g: &GridArgs, base: Option<GridConfig>, default: GridConfig) -> Option<GridConfig> {
    if g.d.is_none() && g.grid_n.is_none() && g.half_width.is_none() {
        return None;
    }
    let b = base.unwrap_or(default);
    Some(GridConfig { d: g.d.unwrap_or(b.d), n: g.grid_n.unwrap_or(b.n), l: g.half_width.unwrap_or(b.l) })
}

fn dim_overlay(d: Option<usize>, base: Option<GridConfig>) -> Option<GridConfig> {
    d.map(|d| GridConfig { d, ..base.unwrap_or(GridConfig { d, n: 128, l: 8.0 }) })
}

fn operator_overlay(doc: &mut ConfigDocument, op: &OperatorFlags, base: Option<GridConfig>) {
    doc.grid = grid_overlay(&op.grid, base, GridConfig { d: 2, n: 128, l: 8.0 });
    doc.omega_key = op.omega.clone();
    doc.kernel_key = op.kernel.kernel.clone();
    doc.kernel = kernel_params(&op.kernel);
    doc.input = op.input.clone();
    let sec = OperatorSection { epsilon_cells: op.epsilon_cells, rule: op.rule, j_min: op.j_min, j_max: op.j_max };
    if sec != OperatorSection::default() {
        doc.operator = Some(sec);
    }
}

/// Config source text (for line lookups) and the merged document.
struct Loaded {
    text: Option<(PathBuf, String)>,
    doc: ConfigDocument,
}

enum Failure {
    Config(String),
    Run(String),
}

fn load(cfg: &ConfigArg) -> Result<(Option<(PathBuf, String)>, ConfigDocument), Failure> {
    match &cfg.config {
        None => Ok((None, ConfigDocument::default())),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: cannot read config: {e}", path.display())))?;
            let doc = ConfigDocument::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            Ok((Some((path.clone(), text)), doc))
        }
    }
}

fn build(command: &Command) -> Result<Loaded, Failure> {
    let (cfg, kind) = match command {
        Command::Norms(a) => (&a.cfg, ExperimentKind::Norms),
        Command::CheckKernel(a) => (&a.cfg, ExperimentKind::KernelCheck),
        Command::Cz(a) => (&a.cfg, ExperimentKind::Cz),
        Command::Net(a) => (&a.cfg, ExperimentKind::Net),
        Command::Apply(a) => (&a.cfg, ExperimentKind::Apply),
        Command::Probe(a) => (&a.cfg, ExperimentKind::Probe),
        Command::Params(a) => (&a.cfg, ExperimentKind::Params),
        Command::Selftest => unreachable!("handled before"),
    };
    let (text, file) = load(cfg)?;
    if let Some(k) = file.experiment {
        if k != kind {
            let line = text.as_ref().and_then(|(_, t)| locate_key(t, "experiment"));
            let at = line.map_or(String::new(), |l| format!(" (line {l})"));
            return Err(Failure::Config(format!(
                "config names experiment `{}`{at} but the subcommand is `{}`",
                k.name(),
                kind.name()
            )));
        }
    }
    let base_grid = file.grid;
    let mut over = ConfigDocument { experiment: Some(kind), seed: cfg.seed, ..Default::default() };
    match command {
        Command::Norms(a) => {
            over.omega_key = a.omega.clone();
            over.grid = dim_overlay(a.d, base_grid);
            over.quadrature_nodes = a.quadrature_nodes;
        }
        Command::CheckKernel(a) => {
            over.kernel_key = a.kernel.kernel.clone();
            over.kernel = kernel_params(&a.kernel);
            over.grid = dim_overlay(a.d, base_grid);
            over.samples = a.samples;
        }
        Command::Cz(a) => {
            over.grid = grid_overlay(&a.grid, base_grid, GridConfig { d: 2, n: 256, l: 1.0 });
            if a.t.is_some() || a.rho.is_some() {
                over.cz = Some(CzSection { t: a.t, rho: a.rho });
            }
            over.input = a.input.clone();
        }
        Command::Net(a) => {
            over.grid = dim_overlay(a.d, base_grid);
            let sec = NetSection { n: a.n, gamma: a.gamma, quadrature_nodes: a.quadrature_nodes };
            if sec != NetSection::default() {
                over.net = Some(sec);
            }
        }
        Command::Apply(a) => operator_overlay(&mut over, &a.op, base_grid),
        Command::Probe(a) => {
            operator_overlay(&mut over, &a.op, base_grid);
            if a.epsilons.is_some() || a.lambda_points.is_some() {
                over.probe = Some(ProbeSection { epsilons: a.epsilons.clone(), lambda_points: a.lambda_points });
            }
        }
        Command::Params(a) => {
            let sec = ParamsSection { d: a.d, delta: a.delta, gamma: a.gamma, iota: a.iota, eps0: a.eps0, mu: a.mu, n1: a.n1 };
            if sec != ParamsSection::default() {
                over.params = Some(sec);
            }
        }
        Command::Selftest => {}
    }
    Ok(Loaded { text, doc: file.overlay(&over) })
}

fn flag_name(key: &str) -> String {
    match key {
        "N" => "--grid-n".into(),
        "L" => "--half-width".into(),
        "N1" => "--N1".into(),
        k => format!("--{}", k.replace('_', "-")),
    }
}

fn describe_config_error(e: &singlab::Error, text: &Option<(PathBuf, String)>) -> String {
    let key = error_key(e);
    let located = key.and_then(|k| text.as_ref().and_then(|(p, t)| locate_key(t, k).map(|l| (p, l))));
    match (located, key) {
        (Some((path, line)), _) => format!("{}:{line}: {e}", path.display()),
        (None, Some(k)) => format!("{e} (flag {} or config key `{k}`)", flag_name(k)),
        (None, None) => e.to_string(),
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os("SINGLAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("singlab-out"))
}

fn selftest() -> u8 {
    let results = run_selftest();
    let mut failed = 0;
    for c in &results {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        println!("{mark}  {:<11} {}  ({})", c.module, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    println!("{} checks, {failed} failed", results.len());
    if failed == 0 {
        0
    } else {
        EXIT_FAILURE
    }
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    let loaded = build(&cli.command)?;
    let dir = out_dir(cli);
    let outcome = run_experiment(&loaded.doc, &dir).map_err(|e| {
        if is_config_error(&e) {
            Failure::Config(describe_config_error(&e, &loaded.text))
        } else {
            Failure::Run(e.to_string())
        }
    })?;
    let summary = serde_json::to_string_pretty(&outcome.result).map_err(|e| Failure::Run(e.to_string()))?;
    println!("{summary}");
    for f in &outcome.files {
        eprintln!("wrote {}", display(f));
    }
    if !outcome.passed {
        eprintln!("{}: verification failed", outcome.kind.name());
    }
    Ok(outcome.passed)
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    }
    if matches!(cli.command, Command::Selftest) {
        return ExitCode::from(selftest());
    }
    match std::panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(true)) => ExitCode::SUCCESS,
        Ok(Ok(false)) => ExitCode::from(EXIT_FAILURE),
        Ok(Err(Failure::Config(msg))) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Ok(Err(Failure::Run(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
        Err(_) => ExitCode::from(EXIT_FAILURE),
    }
}
