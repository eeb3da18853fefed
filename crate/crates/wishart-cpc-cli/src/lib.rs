//! Command-line surface for the wishart-cpc library.
//!
//! Five subcommands: `test` runs the CPC test on two CSV samples,
//! `simulate` runs a Monte Carlo experiment from a JSON configuration,
//! `moments` evaluates the exact moment formulas, `clt-check` runs the
//! identity-covariance central-limit experiments from flags alone, and
//! `split-info` previews the seeded four-way block split.
//!
//! Exit codes: 0 success; 2 usage, parse, or configuration errors;
//! 3 insufficient data; 4 degenerate variance. The rejection decision is
//! never signaled through the exit code — it lives in the report.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use wishart_cpc::covmodel::{assumption_ratios, commutator_theta, CovariancePair, SpdMatrix};
use wishart_cpc::cpc_test::{run_cpc_test_with_mode, split_four};
use wishart_cpc::estimators::CrossMode;
use wishart_cpc::gauss_moments::{central_moment, quad_moment, SquareMatrix};
use wishart_cpc::mc_harness::{run_experiment, CpcCltConfig, ExperimentConfig, QuartetCltConfig};
use wishart_cpc::trace_moments::{
    asymptotic_variance_cpc, asymptotic_variance_quartet, exact_variance_m,
    exact_variance_trace_product, expected_m, WishartQuartetSpec,
};
use wishart_cpc::wishart_sampling::SampleMatrix;
use wishart_cpc::Error;

/// Environment variable consulted for the default seed when `--seed` is
/// absent.
pub const SEED_ENV: &str = "WISHART_CPC_SEED";

/// Seed used when neither `--seed` nor the environment variable is set.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(
    name = "wishart-cpc",
    version,
    about = "High-dimensional Wishart trace moments and the common-principal-components test"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the CPC test on two CSV samples (rows = observations).
    Test(TestArgs),
    /// Run a Monte Carlo experiment described by a JSON configuration.
    Simulate(SimulateArgs),
    /// Evaluate exact moment formulas for matrices given in JSON.
    Moments(MomentsArgs),
    /// Run a central-limit experiment with identity covariances.
    CltCheck(CltCheckArgs),
    /// Show the seeded four-way block split for a sample size.
    SplitInfo(SplitInfoArgs),
}

#[derive(Args)]
struct TestArgs {
    /// CSV file with the x sample.
    #[arg(long = "x", value_name = "FILE")]
    x: PathBuf,
    /// CSV file with the y sample.
    #[arg(long = "y", value_name = "FILE")]
    y: PathBuf,
    /// Significance level in (0, 1).
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Seed for the block splits (default: WISHART_CPC_SEED or 42).
    #[arg(long)]
    seed: Option<u64>,
    /// Normalization of the cross variance component.
    #[arg(long = "sigma-xy-mode", value_parser = parse_cross_mode, default_value = "normalized")]
    sigma_xy_mode: CrossMode,
    /// Also write the report JSON to this file.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON experiment configuration (tagged by "experiment").
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Also write the report JSON to this file.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Dump per-replication primary values to this CSV file.
    #[arg(long = "dump-csv", value_name = "FILE")]
    dump_csv: Option<PathBuf>,
}

#[derive(Args)]
struct MomentsArgs {
    /// JSON request naming matrices and wanted quantities.
    #[arg(long, value_name = "FILE")]
    spec: PathBuf,
    /// Also write the values JSON to this file.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CltCheckArgs {
    /// Which statistic to check: the quartet trace or the CPC statistic.
    #[arg(long, value_parser = ["quartet", "cpc"])]
    kind: String,
    /// Dimension p.
    #[arg(long)]
    dim: usize,
    /// Sample-size exponent: quartet sizes n = ⌈p^delta⌉.
    #[arg(long)]
    delta: Option<f64>,
    /// Explicit quartet sample sizes, comma separated (four values).
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Observations per x block (cpc kind).
    #[arg(long = "block-x")]
    block_x: Option<usize>,
    /// Observations per y block (cpc kind).
    #[arg(long = "block-y")]
    block_y: Option<usize>,
    /// Replication count.
    #[arg(long)]
    replications: usize,
    /// Base seed (default: WISHART_CPC_SEED or 42).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Also write the report JSON to this file.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Dump per-replication standardized statistics to this CSV file.
    #[arg(long = "dump-csv", value_name = "FILE")]
    dump_csv: Option<PathBuf>,
}

#[derive(Args)]
struct SplitInfoArgs {
    /// Number of observations to split.
    #[arg(long)]
    count: usize,
    /// Seed driving the permutation (default: WISHART_CPC_SEED or 42).
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_cross_mode(s: &str) -> Result<CrossMode, String> {
    match s {
        "normalized" => Ok(CrossMode::Normalized),
        "raw" => Ok(CrossMode::Raw),
        other => Err(format!("unknown mode `{other}`; use `normalized` or `raw`")),
    }
}

/// A moments request: any subset of the three sections may be present.
#[derive(Debug, Serialize, Deserialize)]
struct MomentsRequest {
    /// Four sample sizes and four covariances of the quartet statistic.
    #[serde(skip_serializing_if = "Option::is_none")]
    quartet: Option<QuartetRequest>,
    /// A covariance pair for the CPC quantities.
    #[serde(skip_serializing_if = "Option::is_none")]
    pair: Option<PairRequest>,
    /// A matrix for Gaussian quadratic-form moments.
    #[serde(skip_serializing_if = "Option::is_none")]
    gaussian: Option<GaussianRequest>,
}

#[derive(Debug, Serialize, Deserialize)]
struct QuartetRequest {
    sample_sizes: [usize; 4],
    sigmas: [SpdMatrix; 4],
}

#[derive(Debug, Serialize, Deserialize)]
struct PairRequest {
    sigma_x: SpdMatrix,
    sigma_y: SpdMatrix,
}

#[derive(Debug, Serialize, Deserialize)]
struct GaussianRequest {
    matrix: SquareMatrix,
    #[serde(default)]
    quad_orders: Vec<usize>,
    #[serde(default)]
    central_orders: Vec<usize>,
}

enum CliError {
    Library(Error),
    Message(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Library(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Message(format!("JSON error: {e}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Message(format!("I/O error: {e}"))
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Library(Error::InsufficientData { .. }) => 3,
            CliError::Library(Error::DegenerateVariance(_)) => 4,
            _ => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Library(e) => e.to_string(),
            CliError::Message(m) => m.clone(),
        }
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(raw) => raw.parse::<u64>().map_err(|_| {
            CliError::Message(format!(
                "environment variable {SEED_ENV} must hold an unsigned integer, got `{raw}`"
            ))
        }),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn emit(payload: &str, output: Option<&Path>, out: &mut impl Write) -> Result<(), CliError> {
    writeln!(out, "{payload}").map_err(CliError::from)?;
    if let Some(path) = output {
        let mut f = File::create(path)?;
        writeln!(f, "{payload}")?;
    }
    Ok(())
}

fn read_sample(path: &Path) -> Result<SampleMatrix, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::Message(format!("cannot open {}: {e}", path.display())))?;
    SampleMatrix::from_csv(file).map_err(CliError::from)
}

fn dump_records(path: &Path, records: &[f64]) -> Result<(), CliError> {
    let mut f = File::create(path)?;
    writeln!(f, "replication,value")?;
    for (i, v) in records.iter().enumerate() {
        writeln!(f, "{i},{v:e}")?;
    }
    Ok(())
}

fn cmd_test(args: &TestArgs, out: &mut impl Write) -> Result<(), CliError> {
    let x = read_sample(&args.x)?;
    let y = read_sample(&args.y)?;
    let seed = resolve_seed(args.seed)?;
    let report = run_cpc_test_with_mode(&x, &y, args.alpha, seed, args.sigma_xy_mode)?;
    let payload = serde_json::to_string_pretty(&report)?;
    emit(&payload, args.output.as_deref(), out)
}

fn cmd_simulate(args: &SimulateArgs, out: &mut impl Write) -> Result<(), CliError> {
    let file = File::open(&args.config)
        .map_err(|e| CliError::Message(format!("cannot open {}: {e}", args.config.display())))?;
    let config: ExperimentConfig = serde_json::from_reader(file)?;
    let (report, records) = run_experiment(&config)?;
    if let Some(path) = &args.dump_csv {
        dump_records(path, &records)?;
    }
    let payload = serde_json::to_string_pretty(&report)?;
    emit(&payload, args.output.as_deref(), out)
}

fn quartet_quantities(
    req: &QuartetRequest,
    values: &mut BTreeMap<String, f64>,
) -> Result<(), CliError> {
    let spec = WishartQuartetSpec::new(req.sample_sizes, req.sigmas.clone())?;
    values.insert("normalization_r_p".into(), spec.r_p());
    values.insert("expected_m".into(), expected_m(&spec));
    values.insert("expected_trace_product".into(), expected_m(&spec) * spec.r_p());
    values.insert("exact_variance_m".into(), exact_variance_m(&spec));
    values.insert("exact_variance_trace_product".into(), exact_variance_trace_product(&spec));
    values.insert("asymptotic_variance_quartet".into(), asymptotic_variance_quartet(&spec));
    Ok(())
}

fn pair_quantities(req: &PairRequest, values: &mut BTreeMap<String, f64>) -> Result<(), CliError> {
    let pair = CovariancePair::from_matrices(req.sigma_x.clone(), req.sigma_y.clone())?;
    values.insert("commutator_theta".into(), commutator_theta(&pair));
    values.insert("asymptotic_variance_cpc".into(), asymptotic_variance_cpc(&pair));
    let ratios = assumption_ratios(
        &[("x", pair.sigma_x()), ("y", pair.sigma_y())],
        &[&["x", "x"], &["y", "y"], &["x", "y"]],
    )?;
    values.insert("sigma_xx".into(), ratios.value(&["x", "x"]).expect("requested"));
    values.insert("sigma_yy".into(), ratios.value(&["y", "y"]).expect("requested"));
    values.insert("sigma_xy".into(), ratios.value(&["x", "y"]).expect("requested"));
    Ok(())
}

fn gaussian_quantities(
    req: &GaussianRequest,
    values: &mut BTreeMap<String, f64>,
) -> Result<(), CliError> {
    for &order in &req.quad_orders {
        values.insert(format!("quad_moment_{order}"), quad_moment(&req.matrix, order)?);
    }
    for &order in &req.central_orders {
        values.insert(format!("central_moment_{order}"), central_moment(&req.matrix, order)?);
    }
    Ok(())
}

fn cmd_moments(args: &MomentsArgs, out: &mut impl Write) -> Result<(), CliError> {
    let file = File::open(&args.spec)
        .map_err(|e| CliError::Message(format!("cannot open {}: {e}", args.spec.display())))?;
    let request: MomentsRequest = serde_json::from_reader(file)?;
    let mut values = BTreeMap::new();
    if let Some(q) = &request.quartet {
        quartet_quantities(q, &mut values)?;
    }
    if let Some(p) = &request.pair {
        pair_quantities(p, &mut values)?;
    }
    if let Some(g) = &request.gaussian {
        gaussian_quantities(g, &mut values)?;
    }
    let payload = serde_json::to_string_pretty(&values)?;
    emit(&payload, args.output.as_deref(), out)
}

fn cmd_clt_check(args: &CltCheckArgs, out: &mut impl Write) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed)?;
    let identity = wishart_cpc::covmodel::make_identity(args.dim)?;
    let config = match args.kind.as_str() {
        "quartet" => {
            let sample_sizes = match &args.sizes {
                Some(v) => {
                    let four: [usize; 4] = v.clone().try_into().map_err(|_| {
                        CliError::Message("--sizes needs exactly four values".into())
                    })?;
                    Some(four)
                }
                None => None,
            };
            ExperimentConfig::CltQuartet(QuartetCltConfig {
                dim: args.dim,
                delta: args.delta,
                sample_sizes,
                sigmas: [identity.clone(), identity.clone(), identity.clone(), identity],
                replications: args.replications,
                base_seed: seed,
                workers: args.workers,
            })
        }
        "cpc" => {
            let block_x = args
                .block_x
                .ok_or_else(|| CliError::Message("--block-x is required for --kind cpc".into()))?;
            let block_y = args
                .block_y
                .ok_or_else(|| CliError::Message("--block-y is required for --kind cpc".into()))?;
            let pair = CovariancePair::new(identity.clone(), identity, true)?;
            ExperimentConfig::CltCpc(CpcCltConfig {
                dim: args.dim,
                pair,
                block_x,
                block_y,
                include_alternative: false,
                replications: args.replications,
                base_seed: seed,
                workers: args.workers,
            })
        }
        other => return Err(CliError::Message(format!("unknown kind `{other}`"))),
    };
    let (report, records) = run_experiment(&config)?;
    if let Some(path) = &args.dump_csv {
        dump_records(path, &records)?;
    }
    let payload = serde_json::to_string_pretty(&report)?;
    emit(&payload, args.output.as_deref(), out)
}

fn cmd_split_info(args: &SplitInfoArgs, out: &mut impl Write) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed)?;
    let split = split_four(args.count, seed)?;
    let payload = serde_json::to_string_pretty(&split)?;
    emit(&payload, None, out)
}

/// Parses the arguments and runs the selected subcommand, returning the
/// process exit code. Reports go to `stdout`; errors go to `stderr`.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message (also for --help/--version,
            // which exit 0).
            let code = e.exit_code();
            let _ = e.print();
            return if code == 0 { 0 } else { 2 };
        }
    };
    let mut stdout = std::io::stdout();
    let result = match &cli.command {
        Command::Test(a) => cmd_test(a, &mut stdout),
        Command::Simulate(a) => cmd_simulate(a, &mut stdout),
        Command::Moments(a) => cmd_moments(a, &mut stdout),
        Command::CltCheck(a) => cmd_clt_check(a, &mut stdout),
        Command::SplitInfo(a) => cmd_split_info(a, &mut stdout),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
