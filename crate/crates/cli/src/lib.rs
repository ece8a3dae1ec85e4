//! Command-line front end: argument model, dispatch and report writing.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use sharpmart_core::constants::{
    essen_constant, hkv_constant, hkv_constant_by, pichorides_constant, CoefPair, Formula,
};
use sharpmart_core::disc_martingale::{
    martingale_ratio_mc, sharpness_sweep, simulate_paths, AnalyticSpec, Family, SimConfig, SweepConfig,
};
use sharpmart_core::majorant::{certify, CertifyConfig, MajorantSpec};
use sharpmart_core::norm_search::{ascend, AscentConfig, Model, OperatorDesc};
use sharpmart_core::optimize::OptimizerConfig;
use sharpmart_core::quadrature::QuadConfig;
use sharpmart_core::sequence_ops::{dilation_limit, AveragingKernel, DilationConfig, KernelSpec, Profile, Taper};
use sharpmart_core::Error as CoreError;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CONTRACT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Relative agreement required between the three formulations of `B_p`.
const FORMULA_AGREEMENT: f64 = 1e-8;
/// Slack on bound compliance checks that compare two computed numbers.
const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Table,
}

/// Full run configuration. Every report embeds the one that produced it.
#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[command(name = "sharpmart", version, about = "Sharp constants for aI + bH and their numerical checks")]
pub struct RunConfig {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, env = "SHARPMART_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Write the report here (atomically) instead of only printing it.
    #[arg(long, global = true, env = "SHARPMART_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, env = "SHARPMART_FORMAT", default_value_t = Format::Json)]
    pub format: Format,
    /// Shorthand for `--format json`.
    #[arg(long, global = true, env = "SHARPMART_JSON", conflicts_with = "csv")]
    pub json: bool,
    /// Shorthand for `--format csv`.
    #[arg(long, global = true, env = "SHARPMART_CSV")]
    pub csv: bool,
    /// Print nothing to stdout.
    #[arg(long, global = true, env = "SHARPMART_QUIET")]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

impl RunConfig {
    pub fn effective_format(&self) -> Format {
        if self.json {
            Format::Json
        } else if self.csv {
            Format::Csv
        } else {
            self.format
        }
    }
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// B_p, its p-th root and the maximising angle.
    Constants(ConstantsArgs),
    /// Grid certification of the majorant.
    Certify(CertifyArgs),
    /// Entries of the discrete kernels D or J.
    Kernels(KernelsArgs),
    /// Deviation of the dilated averaging operator from the identity.
    DilationLimit(DilationArgs),
    /// Lower bound for an operator norm by projected ascent.
    NormSearch(NormSearchArgs),
    /// Monte Carlo ratios for a conformal martingale against the quadrature oracle.
    Mc(McArgs),
    /// Oracle ratios over the Moebius-power family.
    SharpnessSweep(SweepArgs),
    /// n_p, E_p, B_p, B_p^{1/p} and t0 over a list of exponents.
    Table(TableArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Constants(_) => "constants",
            Command::Certify(_) => "certify",
            Command::Kernels(_) => "kernels",
            Command::DilationLimit(_) => "dilation-limit",
            Command::NormSearch(_) => "norm-search",
            Command::Mc(_) => "mc",
            Command::SharpnessSweep(_) => "sharpness-sweep",
            Command::Table(_) => "table",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Args, Serialize, Deserialize)]
pub struct CoefArgs {
    #[arg(long, env = "SHARPMART_P", default_value_t = 3.0)]
    pub p: f64,
    #[arg(long, env = "SHARPMART_A", default_value_t = 0.0, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, env = "SHARPMART_B", default_value_t = 1.0, allow_negative_numbers = true)]
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaChoice {
    #[value(alias = "v10")]
    Difference,
    #[value(alias = "v100")]
    Sum,
    #[value(alias = "v01")]
    Tangent,
    All,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ConstantsArgs {
    #[command(flatten)]
    pub coef: CoefArgs,
    #[arg(long, value_enum, env = "SHARPMART_FORMULA", default_value_t = FormulaChoice::All)]
    pub formula: FormulaChoice,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub coef: CoefArgs,
    #[arg(long, env = "SHARPMART_GRID_R", default_value_t = 300)]
    pub grid_r: usize,
    #[arg(long, env = "SHARPMART_GRID_T", default_value_t = 400)]
    pub grid_t: usize,
    /// Circle radii for the sub-mean-value test.
    #[arg(long, env = "SHARPMART_RHO", value_delimiter = ',', default_values_t = vec![1e-2, 1e-3])]
    pub rho: Vec<f64>,
    /// Also write the JSON report here.
    #[arg(long, env = "SHARPMART_REPORT")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum KernelKindArg {
    #[value(name = "D")]
    D,
    #[value(name = "J")]
    J,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct KernelsArgs {
    #[arg(long, value_enum, env = "SHARPMART_KIND", default_value_t = KernelKindArg::D)]
    pub kind: KernelKindArg,
    #[arg(long, env = "SHARPMART_N_MAX", default_value_t = 100)]
    pub n_max: usize,
    #[arg(long, env = "SHARPMART_QUAD_TOL", default_value_t = 1e-10)]
    pub quad_tol: f64,
    /// Exponent of the tail norm reported in `tail_bound`.
    #[arg(long, env = "SHARPMART_TAIL_P", default_value_t = 2.0)]
    pub tail_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileArg {
    Bump,
    GaussGrid,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DilationArgs {
    #[arg(long, env = "SHARPMART_EPS_LIST", value_delimiter = ',', default_values_t = vec![1.0, 0.5, 0.25, 0.125])]
    pub eps_list: Vec<f64>,
    /// `geometric:q`, `gaussian:sigma` or `delta`.
    #[arg(long, env = "SHARPMART_KERNEL", default_value = "geometric:0.5")]
    pub kernel: String,
    #[arg(long = "f", env = "SHARPMART_F", value_enum, default_value_t = ProfileArg::Bump)]
    pub profile: ProfileArg,
    #[arg(long, env = "SHARPMART_P", default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, env = "SHARPMART_STEP", default_value_t = 1.0 / 256.0)]
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum OpArg {
    #[value(name = "aI+bD")]
    IdentityPlusD,
    #[value(name = "aI+bJ")]
    IdentityPlusJ,
    #[value(name = "aK+bD")]
    AveragingPlusD,
    #[value(name = "D")]
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelArg {
    Windowed,
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct NormSearchArgs {
    #[arg(long, value_enum, env = "SHARPMART_OP", default_value_t = OpArg::IdentityPlusD)]
    pub op: OpArg,
    #[command(flatten)]
    pub coef: CoefArgs,
    #[arg(long, env = "SHARPMART_N_MAX", default_value_t = 4096)]
    pub n_max: usize,
    /// Structured starts; random starts are set separately.
    #[arg(long, env = "SHARPMART_STARTS", default_value_t = 24)]
    pub starts: usize,
    #[arg(long, env = "SHARPMART_RANDOM_STARTS", default_value_t = 4)]
    pub random_starts: usize,
    #[arg(long, env = "SHARPMART_MAX_STEPS", default_value_t = 400)]
    pub max_steps: usize,
    #[arg(long, value_enum, env = "SHARPMART_MODEL", default_value_t = ModelArg::Windowed)]
    pub model: ModelArg,
    /// Averaging kernel for `aK+bD`: `geometric:q`, `gaussian:sigma` or `delta`.
    #[arg(long, env = "SHARPMART_KERNEL", default_value = "geometric:0.5")]
    pub kernel: String,
    /// Leave the witness out of the report.
    #[arg(long, env = "SHARPMART_NO_WITNESS")]
    pub no_witness: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyArg {
    Identity,
    Moebius,
    Power,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct McArgs {
    #[command(flatten)]
    pub coef: CoefArgs,
    #[arg(long, value_enum, env = "SHARPMART_FAMILY", default_value_t = FamilyArg::Moebius)]
    pub family: FamilyArg,
    #[arg(long, env = "SHARPMART_BETA", default_value_t = 0.25)]
    pub beta: f64,
    #[arg(long, env = "SHARPMART_PHASE", default_value_t = 0.0, allow_negative_numbers = true)]
    pub phase: f64,
    /// Power-series coefficients of z, z^2, ... for `--family power`.
    #[arg(long, env = "SHARPMART_COEFFS", value_delimiter = ',', allow_negative_numbers = true, default_values_t = vec![1.0])]
    pub coeffs: Vec<f64>,
    #[arg(long, env = "SHARPMART_PATHS", default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, env = "SHARPMART_DT", default_value_t = 1e-4)]
    pub dt: f64,
    #[arg(long, env = "SHARPMART_CAP", default_value_t = 0.99)]
    pub cap: f64,
    #[arg(long, env = "SHARPMART_RESAMPLES", default_value_t = 200)]
    pub resamples: usize,
    /// Allowed distance between the MC ratio and the oracle beyond three standard errors.
    #[arg(long, env = "SHARPMART_ORACLE_SLACK", default_value_t = 0.02)]
    pub oracle_slack: f64,
    /// Disable the in-step boundary crossing correction.
    #[arg(long, env = "SHARPMART_NO_BRIDGE")]
    pub no_bridge: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub coef: CoefArgs,
    /// Exponents as fractions of min(1, 1/p).
    #[arg(long, env = "SHARPMART_BETAS", value_delimiter = ',', default_values_t = SweepConfig::default().beta_fractions)]
    pub betas: Vec<f64>,
    #[arg(long, env = "SHARPMART_CAP", default_value_t = 0.99999)]
    pub cap: f64,
    #[arg(long, env = "SHARPMART_PHASE_GRID", default_value_t = 64)]
    pub phase_grid: usize,
    #[arg(long, env = "SHARPMART_REL_TOL", default_value_t = 1e-8)]
    pub rel_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TableArgs {
    #[arg(long, env = "SHARPMART_P_LIST", value_delimiter = ',', default_values_t = vec![1.2, 1.5, 2.0, 3.0, 4.0, 8.0])]
    pub p_list: Vec<f64>,
    #[arg(long, env = "SHARPMART_A", default_value_t = 0.0, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, env = "SHARPMART_B", default_value_t = 1.0, allow_negative_numbers = true)]
    pub b: f64,
}

/// Failure of a run before a report exists.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Core(CoreError::Domain(_)) => EXIT_USAGE,
            _ => EXIT_CONTRACT,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Outcome of one subcommand. `table` is the projection used for CSV and
/// plain-text output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config: RunConfig,
    pub subcommand: String,
    pub passed: bool,
    /// Contract failures, each with the worst offending value.
    pub failures: Vec<String>,
    pub result: Value,
    #[serde(skip)]
    pub table: Table,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(headers: &[&str]) -> Self {
        Self { headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn coef(a: f64, b: f64) -> Result<CoefPair> {
    Ok(CoefPair::new(a, b)?)
}

fn parse_kernel(spec: &str) -> Result<AveragingKernel> {
    let (name, arg) = spec.split_once(':').unwrap_or((spec, ""));
    let value = || arg.parse::<f64>().map_err(|_| CliError::Usage(format!("bad kernel parameter in {spec:?}")));
    match name {
        "geometric" => Ok(AveragingKernel::Geometric { q: value()? }),
        "gaussian" => Ok(AveragingKernel::Gaussian { sigma: value()? }),
        "delta" => Ok(AveragingKernel::Delta),
        _ => Err(CliError::Usage(format!("unknown kernel {spec:?}; expected geometric:q, gaussian:sigma or delta"))),
    }
}

/// Runs the configured subcommand and returns its report.
pub fn dispatch(cfg: &RunConfig) -> Result<Report> {
    let mut failures = Vec::new();
    let (result, table) = match &cfg.command {
        Command::Constants(args) => run_constants(args, &mut failures)?,
        Command::Certify(args) => run_certify(args, cfg.seed, &mut failures)?,
        Command::Kernels(args) => run_kernels(args, &mut failures)?,
        Command::DilationLimit(args) => run_dilation(args, &mut failures)?,
        Command::NormSearch(args) => run_norm_search(args, cfg.seed, &mut failures)?,
        Command::Mc(args) => run_mc(args, cfg.seed, &mut failures)?,
        Command::SharpnessSweep(args) => run_sweep(args, &mut failures)?,
        Command::Table(args) => run_table(args, &mut failures)?,
    };
    Ok(Report {
        config: cfg.clone(),
        subcommand: cfg.command.name().to_string(),
        passed: failures.is_empty(),
        failures,
        result,
        table,
    })
}

fn run_constants(args: &ConstantsArgs, failures: &mut Vec<String>) -> Result<(Value, Table)> {
    let CoefArgs { p, a, b } = args.coef;
    let c = coef(a, b)?;
    let opt = OptimizerConfig::default();
    let formulas: Vec<Formula> = match args.formula {
        FormulaChoice::Difference => vec![Formula::Difference],
        FormulaChoice::Sum => vec![Formula::Sum],
        FormulaChoice::Tangent => vec![Formula::Tangent],
        FormulaChoice::All => Formula::ALL.to_vec(),
    };
    let values = formulas.iter().map(|f| hkv_constant_by(*f, p, &c, &opt)).collect::<std::result::Result<Vec<_>, _>>()?;
    let first = &values[0];
    let deltas: Vec<Value> = values[1..]
        .iter()
        .map(|v| {
            let rel = (v.b_p - first.b_p).abs() / first.b_p;
            if rel > FORMULA_AGREEMENT {
                failures.push(format!("{:?} and {:?} disagree by {rel:e} (relative)", first.formula, v.formula));
            }
            json!({"formula": v.formula, "relative_delta": rel})
        })
        .collect();
    let mut table = Table::new(&["formula", "p", "a", "b", "b_p", "b_p_root", "t0", "gamma"]);
    for v in &values {
        table.push(vec![
            serde_json::to_value(v.formula)?.as_str().unwrap_or_default().to_string(),
            num(p),
            num(a),
            num(b),
            num(v.b_p),
            num(v.b_p_root),
            opt_num(v.t0),
            num(v.gamma),
        ]);
    }
    let result = json!({
        "p": p, "a": a, "b": b,
        "b_p": first.b_p, "b_p_root": first.b_p_root, "t0": first.t0, "gamma": first.gamma,
        "maximizers": first.maximizers,
        "formulas": values,
        "agreement": deltas,
    });
    Ok((result, table))
}

fn run_certify(args: &CertifyArgs, seed: u64, failures: &mut Vec<String>) -> Result<(Value, Table)> {
    let CoefArgs { p, a, b } = args.coef;
    let spec = MajorantSpec::new(p, &coef(a, b)?, &OptimizerConfig::default())?;
    let cc = CertifyConfig { grid_r: args.grid_r, grid_t: args.grid_t, rhos: args.rho.clone(), seed, ..CertifyConfig::default() };
    let rep = certify(&spec, &cc)?;
    failures.extend(rep.violations.iter().cloned());
    let mut table = Table::new(&["check", "value", "r", "t"]);
    let extremes = [
        ("gap", rep.worst_gap),
        ("branch_mismatch", rep.worst_branch_mismatch),
        ("boundary_jump", rep.worst_boundary_jump),
        ("u_xx", rep.worst_u_xx),
        ("u_xx_mismatch", rep.worst_u_xx_mismatch),
        ("outside_curvature", rep.worst_outside_curvature),
        ("pair_min", rep.pair_min),
    ];
    for (name, e) in extremes {
        table.push(vec![name.to_string(), num(e.value), num(e.r), num(e.t)]);
    }
    for (rho, e) in &rep.worst_mean_deficit {
        table.push(vec![format!("mean_deficit@{rho}"), num(e.value), num(e.r), num(e.t)]);
    }
    table.push(vec!["identity_sum".into(), num(rep.identity_sum), String::new(), String::new()]);
    table.push(vec!["identity_slope".into(), num(rep.identity_slope), String::new(), String::new()]);
    let result = serde_json::to_value(&rep)?;
    if let Some(path) = &args.report {
        write_atomic(path, serde_json::to_string_pretty(&result)?.as_bytes())?;
    }
    Ok((result, table))
}

fn run_kernels(args: &KernelsArgs, failures: &mut Vec<String>) -> Result<(Value, Table)> {
    if args.tail_p <= 1.0 {
        return Err(CliError::Usage(format!("--tail-p must exceed 1, got {}", args.tail_p)));
    }
    let quad = QuadConfig { tol: args.quad_tol, ..QuadConfig::default() };
    let k = match args.kind {
        KernelKindArg::D => KernelSpec::hilbert_d(args.n_max, Taper::Sharp)?,
        KernelKindArg::J => KernelSpec::j_kernel(args.n_max, Taper::Sharp, &quad)?,
    };
    let tr = k.truncation();
    let q = args.tail_p;
    // l^q norm of the entries with |m| > n, from |k_m| <= c/|m|
    let tail = |n: usize| (2.0 * tr.tail_constant.powf(q) * (n as f64).powf(1.0 - q) / (q - 1.0)).powf(1.0 / q);
    if !k.is_odd() {
        failures.push("kernel is not odd".into());
    }
    let mut table = Table::new(&["n", "value", "tail_bound"]);
    let mut rows = Vec::new();
    let mut prev = f64::INFINITY;
    for n in 1..=args.n_max {
        let v = k.entry(n as i64);
        let scaled = PI * n as f64 * v;
        if matches!(args.kind, KernelKindArg::J) {
            if !(scaled > 1.0 && scaled <= 3.0) {
                failures.push(format!("pi n J_n = {scaled} outside (1, 3] at n = {n}"));
            }
            if scaled > prev + 10.0 * args.quad_tol {
                failures.push(format!("pi n J_n increases at n = {n}: {prev} -> {scaled}"));
            }
        }
        prev = scaled;
        let t = tail(n);
        table.push(vec![n.to_string(), num(v), num(t)]);
        rows.push(json!({"n": n, "value": v, "tail_bound": t}));
    }
    Ok((json!({"kind": args.kind, "tail_p": q, "tail_constant": tr.tail_constant, "rows": rows}), table))
}

fn run_dilation(args: &DilationArgs, failures: &mut Vec<String>) -> Result<(Value, Table)> {
    let dc = DilationConfig {
        profile: match args.profile {
            ProfileArg::Bump => Profile::Bump { radius: 4.0 },
            ProfileArg::GaussGrid => Profile::Gauss,
        },
        kernel: parse_kernel(&args.kernel)?,
        step: args.step,
        p: args.p,
        eps_list: args.eps_list.clone(),
    };
    let rows = dilation_limit(&dc)?;
    for w in rows.windows(2) {
        if w[1].deviation >= w[0].deviation {
            failures.push(format!("deviation does not decrease from eps {} to {}: {} -> {}", w[0].eps, w[1].eps, w[0].deviation, w[1].deviation));
        }
    }
    let mut table = Table::new(&["eps", "deviation", "relative"]);
    for r in &rows {
        table.push(vec![num(r.eps), num(r.deviation), num(r.relative)]);
    }
    Ok((json!({"setup": dc, "rows": rows}), table))
}

fn run_norm_search(args: &NormSearchArgs, seed: u64, failures: &mut Vec<String>) -> Result<(Value, Table)> {
    let CoefArgs { p, a, b } = args.coef;
    let desc = match args.op {
        OpArg::IdentityPlusD => OperatorDesc::IdentityPlusD { a, b },
        OpArg::IdentityPlusJ => OperatorDesc::IdentityPlusJ { a, b },
        OpArg::AveragingPlusD => OperatorDesc::AveragingPlusD { a, b, kernel: parse_kernel(&args.kernel)? },
        OpArg::D => OperatorDesc::D,
    };
    let model = match args.model {
        ModelArg::Windowed => Model::Windowed { margin: args.n_max },
        ModelArg::Truncated => Model::Truncated { taper: Taper::Sharp, support: args.n_max },
    };
    let ac = AscentConfig {
        n_max: args.n_max,
        model,
        structured_starts: args.starts,
        random_starts: args.random_starts,
        max_steps: args.max_steps,
        seed,
        ..AscentConfig::default()
    };
    let est = ascend(&desc, p, &ac)?;
    if est.lower_bound > est.target * (1.0 + BOUND_SLACK) {
        failures.push(format!("lower bound {} exceeds B_p^(1/p) = {}", est.lower_bound, est.target));
    }
    if est.quotient > est.target + est.truncation_slack + BOUND_SLACK {
        failures.push(format!("quotient {} exceeds B_p^(1/p) + slack = {}", est.quotient, est.target + est.truncation_slack));
    }
    let mut table = Table::new(&["op", "p", "n_max", "quotient", "lower_bound", "upper_bound", "target", "fraction", "steps"]);
    table.push(vec![
        desc.label().to_string(),
        num(p),
        est.n_max.to_string(),
        num(est.quotient),
        num(est.lower_bound),
        num(est.upper_bound),
        num(est.target),
        num(est.fraction),
        est.steps.to_string(),
    ]);
    let mut result = serde_json::to_value(&est)?;
    if args.no_witness {
        if let Some(obj) = result.as_object_mut() {
            obj.remove("witness");
        }
    }
    Ok((result, table))
}

fn run_mc(args: &McArgs, seed: u64, failures: &mut Vec<String>) -> Result<(Value, Table)> {
    let CoefArgs { p, a, b } = args.coef;
    let c = coef(a, b)?;
    let f = match args.family {
        FamilyArg::Identity => AnalyticSpec::new(Family::PowerSeries { coeffs: vec![1.0] }, args.phase, 0.0, args.cap)?,
        FamilyArg::Moebius => AnalyticSpec::moebius(args.beta, args.phase, args.cap)?,
        FamilyArg::Power => AnalyticSpec::new(Family::PowerSeries { coeffs: args.coeffs.clone() }, args.phase, 0.0, args.cap)?,
    };
    let sim = SimConfig { n_paths: args.paths, dt: args.dt, radius_cap: args.cap, seed, bridge: !args.no_bridge, ..SimConfig::default() };
    let paths = simulate_paths(&sim)?;
    let unresolved = paths.iter().filter(|p| !p.killed).count();
    if unresolved > 0 {
        failures.push(format!("{unresolved} paths hit the step limit before exiting"));
    }
    let exits: Vec<_> = paths.iter().map(|p| p.exit_point).collect();
    let rep = martingale_ratio_mc(&f, p, &c, &exits, args.resamples, seed)?;
    if !rep.within_bound() {
        failures.push(format!("ratio {} > B_p^(1/p) {} + 3 se {}", rep.ratio_estimate, rep.bound, rep.std_error));
    }
    if !rep.within_vector_bound() {
        failures.push(format!("vector ratio {} > E_p {} + 3 se {}", rep.vector_ratio, rep.vector_bound, rep.vector_std_error));
    }
    if !rep.agrees_with_oracle(args.oracle_slack) {
        failures.push(format!("ratio {} vs oracle {} beyond 3 se + {}", rep.ratio_estimate, rep.oracle_ratio, args.oracle_slack));
    }
    let mut table = Table::new(&["p", "a", "b", "ratio", "std_error", "oracle", "bound", "vector_ratio", "vector_std_error", "vector_bound"]);
    table.push(vec![
        num(p),
        num(a),
        num(b),
        num(rep.ratio_estimate),
        num(rep.std_error),
        num(rep.oracle_ratio),
        num(rep.bound),
        num(rep.vector_ratio),
        num(rep.vector_std_error),
        num(rep.vector_bound),
    ]);
    let result = json!({"function": f, "resolves_boundary": sim.resolves_boundary(), "report": rep});
    Ok((result, table))
}

fn run_sweep(args: &SweepArgs, failures: &mut Vec<String>) -> Result<(Value, Table)> {
    let CoefArgs { p, a, b } = args.coef;
    let sc = SweepConfig { beta_fractions: args.betas.clone(), radius_cap: args.cap, phase_grid: args.phase_grid, rel_tol: args.rel_tol };
    let rows = sharpness_sweep(p, &coef(a, b)?, &sc)?;
    let mut table = Table::new(&["beta", "phase", "oracle_ratio", "fraction"]);
    for r in &rows {
        if r.fraction > 1.0 + BOUND_SLACK {
            failures.push(format!("oracle ratio exceeds B_p^(1/p) at beta {}: fraction {}", r.beta, r.fraction));
        }
        table.push(vec![num(r.beta), num(r.phase), num(r.oracle_ratio), num(r.fraction)]);
    }
    Ok((json!({"p": p, "a": a, "b": b, "rows": rows}), table))
}

fn run_table(args: &TableArgs, failures: &mut Vec<String>) -> Result<(Value, Table)> {
    let c = coef(args.a, args.b)?;
    let norm = c.norm();
    let unit = (args.a / norm, args.b / norm);
    let mut table = Table::new(&["p", "n_p", "e_p", "b_p", "b_p_root", "t0"]);
    let mut rows = Vec::new();
    for &p in &args.p_list {
        let n_p = pichorides_constant(p)?;
        let e_p = essen_constant(p)?;
        let sc = hkv_constant(p, &c, &OptimizerConfig::default())?;
        let mut expect = |want: f64, what: &str| {
            let err = (sc.b_p_root - want).abs() / want;
            if err > FORMULA_AGREEMENT {
                failures.push(format!("p = {p}: B_p^(1/p) = {} differs from {what} = {want} by {err:e}", sc.b_p_root));
            }
        };
        if unit == (0.0, 1.0) || unit == (0.0, -1.0) {
            expect(norm * n_p, "|b| n_p");
        }
        if args.b == 0.0 {
            expect(norm, "|a|");
        }
        if p == 2.0 {
            expect(norm, "sqrt(a^2 + b^2)");
        }
        table.push(vec![num(p), num(n_p), num(e_p), num(sc.b_p), num(sc.b_p_root), opt_num(sc.t0)]);
        rows.push(json!({"p": p, "n_p": n_p, "e_p": e_p, "b_p": sc.b_p, "b_p_root": sc.b_p_root, "t0": sc.t0}));
    }
    Ok((json!({"a": args.a, "b": args.b, "rows": rows}), table))
}

/// Renders the report in the requested format.
pub fn render(report: &Report, format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&report.table.headers)?;
            for row in &report.table.rows {
                w.write_record(row)?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        Format::Table => {
            let t = &report.table;
            let mut widths: Vec<usize> = t.headers.iter().map(String::len).collect();
            for row in &t.rows {
                for (w, cell) in widths.iter_mut().zip(row) {
                    *w = (*w).max(cell.len());
                }
            }
            let line = |cells: &[String]| {
                cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string()
            };
            let mut out = line(&t.headers) + "\n";
            for row in &t.rows {
                out += &line(row);
                out.push('\n');
            }
            out += &format!("{}: {}\n", report.subcommand, if report.passed { "pass" } else { "FAIL" });
            for f in &report.failures {
                out += &format!("  {f}\n");
            }
            Ok(out)
        }
    }
}

/// Writes through a temporary file in the destination directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

/// Parses, runs and reports; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    match execute(&cfg) {
        Ok(passed) => {
            if passed {
                EXIT_PASS
            } else {
                EXIT_CONTRACT
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cfg: &RunConfig) -> Result<bool> {
    let report = dispatch(cfg)?;
    let text = render(&report, cfg.effective_format())?;
    if let Some(path) = &cfg.out {
        write_atomic(path, text.as_bytes())?;
    }
    if !cfg.quiet {
        print!("{text}");
    }
    if !report.passed {
        for f in &report.failures {
            eprintln!("contract: {f}");
        }
    }
    Ok(report.passed)
}
