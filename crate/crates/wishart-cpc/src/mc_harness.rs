//! Seeded Monte Carlo experiments: central-limit checks for the quartet
//! trace statistic and the CPC discrepancy, size/power runs of the test,
//! and finite-sample validation of the closed-form moments.
//!
//! Every experiment derives one seed per replication from the base seed
//! and splits per-replication sub-streams from it, so reports depend only
//! on the configuration — never on the worker count. Replication records
//! are collected in replication order and aggregated serially with
//! compensated summation.

use ndarray::Axis;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::covmodel::{commutator_theta, CovariancePair, SpdMatrix};
use crate::cpc_test::{normal_cdf, run_cpc_test};
use crate::error::{Error, Result};
use crate::estimators::{theta_hat, theta_hat_alternative, SplitScatters};
use crate::trace_moments::{
    exact_variance_m, exact_variance_trace_product, expected_m, martingale_decompose, statistic_m,
    WishartQuartetSpec,
};
use crate::wishart_sampling::{
    centered_scatter, derive_stream_seed, sample_gaussian, scatter, SampleMatrix,
};

/// Smallest allowed replication count: below this the standard errors the
/// reports quote are too rough to act on.
pub const MIN_REPLICATIONS: usize = 100;

/// The seed discipline every experiment follows, echoed in each report.
pub const SEED_RULE: &str = "replication r uses derive_stream_seed(base_seed, r); \
     sub-stream k within a replication uses derive_stream_seed(rep_seed, k)";

/// Compensated (Kahan) accumulator for serial aggregation.
#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

/// Moment summary of one recorded value across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    /// Sample mean.
    pub mean: f64,
    /// Standard error of the mean.
    pub mean_se: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Large-sample standard error of the sample variance.
    pub variance_se: f64,
    /// Sample skewness m₃/m₂^{3/2}.
    pub skewness: f64,
    /// Sample excess kurtosis m₄/m₂² − 3.
    pub excess_kurtosis: f64,
}

fn summarize(values: &[f64]) -> DistributionSummary {
    let r = values.len() as f64;
    let mut total = Kahan::default();
    for &v in values {
        total.add(v);
    }
    let mean = total.value() / r;
    let mut m2 = Kahan::default();
    let mut m3 = Kahan::default();
    let mut m4 = Kahan::default();
    for &v in values {
        let d = v - mean;
        m2.add(d * d);
        m3.add(d * d * d);
        m4.add(d * d * d * d);
    }
    let m2v = m2.value() / r;
    let m3v = m3.value() / r;
    let m4v = m4.value() / r;
    let variance = m2.value() / (r - 1.0);
    DistributionSummary {
        mean,
        mean_se: (variance / r).sqrt(),
        variance,
        variance_se: ((m4v - m2v * m2v).max(0.0) / r).sqrt(),
        skewness: m3v / m2v.powf(1.5),
        excess_kurtosis: m4v / (m2v * m2v) - 3.0,
    }
}

/// Kolmogorov–Smirnov distance between the empirical distribution of the
/// values and the standard normal distribution function.
fn ks_against_standard_normal(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite records"));
    let r = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &v) in sorted.iter().enumerate() {
        let f = normal_cdf(v);
        let hi = (i + 1) as f64 / r - f;
        let lo = f - i as f64 / r;
        d = d.max(hi).max(lo);
    }
    d
}

fn binomial_se(rate: f64, reps: usize) -> f64 {
    (rate * (1.0 - rate) / reps as f64).sqrt()
}

/// Checks of closed-form moments against their simulated counterparts,
/// attached by the moment-validation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentChecks {
    /// Closed-form mean of the normalized statistic.
    pub expected_mean: f64,
    /// Closed-form variance of the normalized statistic.
    pub expected_variance: f64,
    /// (observed mean − expected mean) / SE(mean).
    pub z_mean: f64,
    /// (observed variance − expected variance) / SE(variance).
    pub z_variance: f64,
    /// Simulated mean of the summed conditional variances, whose exact
    /// mean is the closed-form variance.
    pub conditional_sum_mean: f64,
    /// (conditional-sum mean − expected variance) / SE.
    pub z_conditional_sum: f64,
    /// True when every |z| above is at most four.
    pub within_four_se: bool,
}

/// Mean of one θ estimator across replications, with its target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaSummary {
    /// Sample mean of the estimates.
    pub mean: f64,
    /// Standard error of that mean.
    pub mean_se: f64,
    /// The population discrepancy the estimator targets.
    pub true_value: f64,
}

/// Deterministic results of an experiment: equal configurations produce
/// equal results regardless of worker count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResults {
    /// Number of replications aggregated.
    pub replications: usize,
    /// Moment summary of the primary recorded value.
    pub summary: DistributionSummary,
    /// KS distance of the primary value from the standard normal, when
    /// the experiment targets a standard normal limit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_statistic: Option<f64>,
    /// Fraction of replications that rejected, for test experiments.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejection_rate: Option<f64>,
    /// Binomial standard error of the rejection rate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejection_se: Option<f64>,
    /// Split-based θ estimator summary, for CPC experiments.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_split: Option<ThetaSummary>,
    /// Split-free θ estimator summary, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_alternative: Option<ThetaSummary>,
    /// Closed-form moment checks, for the moment-validation experiment.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moment_checks: Option<MomentChecks>,
}

/// Non-deterministic run details, kept apart from the results so that
/// result comparison and serialization stay reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McMeta {
    /// Wall-clock duration of the replication loop in seconds.
    pub runtime_seconds: f64,
    /// Worker threads used.
    pub workers: usize,
    /// The seed discipline (see [`SEED_RULE`]).
    pub seed_rule: String,
}

/// Outcome of one Monte Carlo experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McReport {
    /// Which experiment ran.
    pub experiment: String,
    /// Echo of the configuration.
    pub config: serde_json::Value,
    /// Deterministic results.
    pub results: McResults,
    /// Run details.
    pub meta: McMeta,
}

fn blank_results(replications: usize, summary: DistributionSummary) -> McResults {
    McResults {
        replications,
        summary,
        ks_statistic: None,
        rejection_rate: None,
        rejection_se: None,
        theta_split: None,
        theta_alternative: None,
        moment_checks: None,
    }
}

fn check_replications(replications: usize) -> Result<()> {
    if replications < MIN_REPLICATIONS {
        return Err(Error::InsufficientData {
            required: MIN_REPLICATIONS,
            actual: replications,
            what: "Monte Carlo replications",
        });
    }
    Ok(())
}

fn resolve_workers(workers: Option<usize>) -> usize {
    workers.unwrap_or(1).max(1)
}

/// Runs `f` once per replication on `workers` threads, returning records
/// in replication order.
fn replicate<T: Send>(
    replications: usize,
    workers: usize,
    f: impl Fn(usize) -> T + Sync + Send,
) -> Vec<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool construction");
    pool.install(|| (0..replications).into_par_iter().map(f).collect())
}

fn ceil_power(p: usize, delta: f64) -> usize {
    (p as f64).powf(delta).ceil().max(1.0) as usize
}

/// Configuration of the quartet central-limit experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuartetCltConfig {
    /// Dimension p.
    pub dim: usize,
    /// Growth exponent: sample sizes n_i = ⌈p^delta⌉ (0 < delta < 1).
    /// Common choices are 0.4, 0.6 and 0.7. Exclusive with
    /// `sample_sizes`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Explicit sample sizes, exclusive with `delta`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_sizes: Option<[usize; 4]>,
    /// The four population covariances.
    pub sigmas: [SpdMatrix; 4],
    /// Replication count, at least [`MIN_REPLICATIONS`].
    pub replications: usize,
    /// Base seed of the seed tree.
    pub base_seed: u64,
    /// Worker threads (default 1); never affects results.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl QuartetCltConfig {
    /// The four sample sizes this configuration requests.
    pub fn resolve_sample_sizes(&self) -> Result<[usize; 4]> {
        match (self.delta, self.sample_sizes) {
            (Some(d), None) => {
                if !(d > 0.0 && d < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "growth exponent must lie strictly between 0 and 1, got {d}"
                    )));
                }
                Ok([ceil_power(self.dim, d); 4])
            }
            (None, Some(ns)) => Ok(ns),
            _ => Err(Error::InvalidParameter(
                "specify exactly one of `delta` and `sample_sizes`".into(),
            )),
        }
    }
}

/// Simulates the normalized quartet trace statistic, standardizes it by
/// its exact mean and exact variance, and summarizes the distribution of
/// the standardized values against the standard normal limit.
pub fn run_clt_quartet(config: &QuartetCltConfig) -> Result<McReport> {
    Ok(clt_quartet_core(config)?.0)
}

fn clt_quartet_core(config: &QuartetCltConfig) -> Result<(McReport, Vec<f64>)> {
    check_replications(config.replications)?;
    let ns = config.resolve_sample_sizes()?;
    let spec = WishartQuartetSpec::new(ns, config.sigmas.clone())?;
    if spec.dim() != config.dim {
        return Err(Error::DimensionMismatch { expected: config.dim, actual: spec.dim() });
    }
    let center = expected_m(&spec);
    let scale = exact_variance_m(&spec).sqrt();
    if !(scale > 0.0) {
        return Err(Error::DegenerateVariance(scale * scale));
    }

    let workers = resolve_workers(config.workers);
    let start = Instant::now();
    let spec_ref = &spec;
    let zs = replicate(config.replications, workers, move |r| {
        let rep_seed = derive_stream_seed(config.base_seed, r as u64);
        let scatters: Vec<_> = (0..4)
            .map(|k| {
                let draws = sample_gaussian(
                    ns[k],
                    &spec_ref.sigmas()[k],
                    derive_stream_seed(rep_seed, k as u64),
                )
                .expect("validated sampling parameters");
                scatter(&draws)
            })
            .collect();
        let m = statistic_m([&scatters[0], &scatters[1], &scatters[2], &scatters[3]], spec_ref)
            .expect("scatters match the spec");
        (m - center) / scale
    });
    let runtime_seconds = start.elapsed().as_secs_f64();

    let mut results = blank_results(config.replications, summarize(&zs));
    results.ks_statistic = Some(ks_against_standard_normal(&zs));
    let report = McReport {
        experiment: "clt-quartet".into(),
        config: serde_json::to_value(config).map_err(Error::from)?,
        results,
        meta: McMeta { runtime_seconds, workers, seed_rule: SEED_RULE.into() },
    };
    Ok((report, zs))
}

/// Configuration of the CPC central-limit / unbiasedness experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpcCltConfig {
    /// Dimension p.
    pub dim: usize,
    /// The population pair (Σ_x, Σ_y).
    pub pair: CovariancePair,
    /// Observations per x block (four blocks are drawn).
    pub block_x: usize,
    /// Observations per y block.
    pub block_y: usize,
    /// Also record the split-free estimator on the pooled rows.
    #[serde(default)]
    pub include_alternative: bool,
    /// Replication count, at least [`MIN_REPLICATIONS`].
    pub replications: usize,
    /// Base seed of the seed tree.
    pub base_seed: u64,
    /// Worker threads (default 1); never affects results.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

/// Simulates the split-based discrepancy estimator on four fresh blocks
/// per sample, standardizes by the population discrepancy and the exact
/// finite-sample standard deviation, and summarizes both the standardized
/// statistic and the raw estimator means.
pub fn run_clt_cpc(config: &CpcCltConfig) -> Result<McReport> {
    Ok(clt_cpc_core(config)?.0)
}

fn clt_cpc_core(config: &CpcCltConfig) -> Result<(McReport, Vec<f64>)> {
    check_replications(config.replications)?;
    if config.pair.dim() != config.dim {
        return Err(Error::DimensionMismatch { expected: config.dim, actual: config.pair.dim() });
    }
    if config.block_x < 2 || config.block_y < 2 {
        return Err(Error::InsufficientData {
            required: 2,
            actual: config.block_x.min(config.block_y),
            what: "observations per block",
        });
    }
    let theta_true = commutator_theta(&config.pair);
    let (m, n) = (config.block_x, config.block_y);
    // Standardize by the exact finite-sample standard deviation of the
    // split estimator rather than its large-p limit, so the replicates
    // probe distribution shape alone.  The estimator is a difference of
    // two trace products over disjoint (hence independent) blocks, so its
    // variance is the sum of the two exact trace-product variances.
    let sx = config.pair.sigma_x().clone();
    let sy = config.pair.sigma_y().clone();
    let aligned = WishartQuartetSpec::new(
        [m - 1, m - 1, n - 1, n - 1],
        [sx.clone(), sx.clone(), sy.clone(), sy.clone()],
    )?;
    let interleaved =
        WishartQuartetSpec::new([m - 1, n - 1, m - 1, n - 1], [sx.clone(), sy.clone(), sx, sy])?;
    let p = config.dim as f64;
    let dfx = (m - 1) as f64;
    let dfy = (n - 1) as f64;
    let variance_sum =
        exact_variance_trace_product(&aligned) + exact_variance_trace_product(&interleaved);
    let sd_theta = variance_sum.sqrt() / (dfx * dfx * dfy * dfy * p);
    if !(sd_theta > 0.0) {
        return Err(Error::DegenerateVariance(sd_theta));
    }

    let workers = resolve_workers(config.workers);
    let start = Instant::now();
    let pair = &config.pair;
    let records = replicate(config.replications, workers, move |r| {
        let rep_seed = derive_stream_seed(config.base_seed, r as u64);
        let draw = |sigma: &SpdMatrix, count: usize, k: u64| {
            sample_gaussian(count, sigma, derive_stream_seed(rep_seed, k))
                .expect("validated sampling parameters")
        };
        let x_blocks: Vec<SampleMatrix> = (0..4).map(|k| draw(pair.sigma_x(), m, k)).collect();
        let y_blocks: Vec<SampleMatrix> = (0..4).map(|k| draw(pair.sigma_y(), n, 4 + k)).collect();
        let block = |s: &SampleMatrix| centered_scatter(s).expect("block size at least two");
        let split = SplitScatters::new(
            [block(&x_blocks[0]), block(&x_blocks[1]), block(&x_blocks[2]), block(&x_blocks[3])],
            [block(&y_blocks[0]), block(&y_blocks[1]), block(&y_blocks[2]), block(&y_blocks[3])],
        )
        .expect("blocks agree by construction");
        let estimate = theta_hat(&split);
        let alternative = if config.include_alternative {
            let pool = |blocks: &[SampleMatrix]| {
                let views: Vec<_> = blocks.iter().map(|b| b.rows().view()).collect();
                let stacked = ndarray::concatenate(Axis(0), &views).expect("equal widths");
                SampleMatrix::new(stacked).expect("pooled rows form a sample")
            };
            let tx = centered_scatter(&pool(&x_blocks)).expect("pooled rows");
            let ty = centered_scatter(&pool(&y_blocks)).expect("pooled rows");
            Some(
                theta_hat_alternative(&tx, &ty, 4 * m, 4 * n, config.dim)
                    .expect("pooled counts at least eight"),
            )
        } else {
            None
        };
        let t = (estimate - theta_true) / sd_theta;
        (t, estimate, alternative)
    });
    let runtime_seconds = start.elapsed().as_secs_f64();

    let ts: Vec<f64> = records.iter().map(|r| r.0).collect();
    let thetas: Vec<f64> = records.iter().map(|r| r.1).collect();
    let theta_summary = summarize(&thetas);
    let mut results = blank_results(config.replications, summarize(&ts));
    results.ks_statistic = Some(ks_against_standard_normal(&ts));
    results.theta_split = Some(ThetaSummary {
        mean: theta_summary.mean,
        mean_se: theta_summary.mean_se,
        true_value: theta_true,
    });
    if config.include_alternative {
        let alts: Vec<f64> = records.iter().map(|r| r.2.expect("recorded")).collect();
        let alt_summary = summarize(&alts);
        results.theta_alternative = Some(ThetaSummary {
            mean: alt_summary.mean,
            mean_se: alt_summary.mean_se,
            true_value: theta_true,
        });
    }
    let report = McReport {
        experiment: "clt-cpc".into(),
        config: serde_json::to_value(config).map_err(Error::from)?,
        results,
        meta: McMeta { runtime_seconds, workers, seed_rule: SEED_RULE.into() },
    };
    Ok((report, ts))
}

/// Configuration of a size or power experiment for the CPC test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizePowerConfig {
    /// The population pair; a commuting pair measures size, a
    /// non-commuting pair measures power.
    pub pair: CovariancePair,
    /// Total x observations handed to the test each replication.
    pub x_total: usize,
    /// Total y observations handed to the test each replication.
    pub y_total: usize,
    /// Significance level.
    pub alpha: f64,
    /// Replication count, at least [`MIN_REPLICATIONS`].
    pub replications: usize,
    /// Base seed of the seed tree.
    pub base_seed: u64,
    /// Worker threads (default 1); never affects results.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

/// Runs the full test procedure on fresh draws each replication and
/// reports the rejection rate with its binomial standard error.
pub fn run_size_power(config: &SizePowerConfig) -> Result<McReport> {
    Ok(size_power_core(config)?.0)
}

fn size_power_core(config: &SizePowerConfig) -> Result<(McReport, Vec<f64>)> {
    check_replications(config.replications)?;
    let theta_true = commutator_theta(&config.pair);
    let workers = resolve_workers(config.workers);
    let start = Instant::now();
    let pair = &config.pair;
    let records = replicate(config.replications, workers, move |r| {
        let rep_seed = derive_stream_seed(config.base_seed, r as u64);
        let x = sample_gaussian(config.x_total, pair.sigma_x(), derive_stream_seed(rep_seed, 0))
            .expect("validated sampling parameters");
        let y = sample_gaussian(config.y_total, pair.sigma_y(), derive_stream_seed(rep_seed, 1))
            .expect("validated sampling parameters");
        let report = run_cpc_test(&x, &y, config.alpha, derive_stream_seed(rep_seed, 2))
            .expect("totals validated before the loop");
        (report.statistic_t, report.reject)
    });
    let runtime_seconds = start.elapsed().as_secs_f64();

    let ts: Vec<f64> = records.iter().map(|r| r.0).collect();
    let rate = records.iter().filter(|r| r.1).count() as f64 / config.replications as f64;
    let mut results = blank_results(config.replications, summarize(&ts));
    results.rejection_rate = Some(rate);
    results.rejection_se = Some(binomial_se(rate, config.replications));
    results.theta_split = None;
    let mut report = McReport {
        experiment: "size-power".into(),
        config: serde_json::to_value(config).map_err(Error::from)?,
        results,
        meta: McMeta { runtime_seconds, workers, seed_rule: SEED_RULE.into() },
    };
    // Echo the population discrepancy so size (θ = 0) and power (θ > 0)
    // runs are distinguishable from the report alone.
    report.config["theta_true"] = serde_json::json!(theta_true);
    Ok((report, ts))
}

/// Configuration of the moment-validation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentValidationConfig {
    /// The four sample sizes.
    pub sample_sizes: [usize; 4],
    /// The four population covariances.
    pub sigmas: [SpdMatrix; 4],
    /// Replication count, at least [`MIN_REPLICATIONS`].
    pub replications: usize,
    /// Base seed of the seed tree.
    pub base_seed: u64,
    /// Worker threads (default 1); never affects results.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

/// Simulates the normalized quartet statistic together with its
/// martingale decomposition and z-scores the simulated mean, variance,
/// and summed conditional variances against the closed forms.
pub fn run_moment_validation(config: &MomentValidationConfig) -> Result<McReport> {
    Ok(moment_validation_core(config)?.0)
}

fn moment_validation_core(config: &MomentValidationConfig) -> Result<(McReport, Vec<f64>)> {
    check_replications(config.replications)?;
    let spec = WishartQuartetSpec::new(config.sample_sizes, config.sigmas.clone())?;
    let expected_mean = expected_m(&spec);
    let expected_variance = exact_variance_m(&spec);

    let workers = resolve_workers(config.workers);
    let start = Instant::now();
    let spec_ref = &spec;
    let ns = config.sample_sizes;
    let records = replicate(config.replications, workers, move |r| {
        let rep_seed = derive_stream_seed(config.base_seed, r as u64);
        let draws: Vec<SampleMatrix> = (0..4)
            .map(|k| {
                sample_gaussian(
                    ns[k],
                    &spec_ref.sigmas()[k],
                    derive_stream_seed(rep_seed, k as u64),
                )
                .expect("validated sampling parameters")
            })
            .collect();
        let scatters: Vec<_> = draws.iter().map(scatter).collect();
        let m = statistic_m([&scatters[0], &scatters[1], &scatters[2], &scatters[3]], spec_ref)
            .expect("scatters match the spec");
        let trace = martingale_decompose([&draws[0], &draws[1], &draws[2], &draws[3]], spec_ref)
            .expect("draws match the spec");
        (m, trace.conditional_variance_sum())
    });
    let runtime_seconds = start.elapsed().as_secs_f64();

    let ms: Vec<f64> = records.iter().map(|r| r.0).collect();
    let csums: Vec<f64> = records.iter().map(|r| r.1).collect();
    let summary = summarize(&ms);
    let csum_summary = summarize(&csums);
    let z_mean = (summary.mean - expected_mean) / summary.mean_se;
    let z_variance = (summary.variance - expected_variance) / summary.variance_se;
    let z_conditional_sum = (csum_summary.mean - expected_variance) / csum_summary.mean_se;
    let within_four_se =
        z_mean.abs() <= 4.0 && z_variance.abs() <= 4.0 && z_conditional_sum.abs() <= 4.0;

    let mut results = blank_results(config.replications, summary);
    results.moment_checks = Some(MomentChecks {
        expected_mean,
        expected_variance,
        z_mean,
        z_variance,
        conditional_sum_mean: csum_summary.mean,
        z_conditional_sum,
        within_four_se,
    });
    let report = McReport {
        experiment: "moment-validation".into(),
        config: serde_json::to_value(config).map_err(Error::from)?,
        results,
        meta: McMeta { runtime_seconds, workers, seed_rule: SEED_RULE.into() },
    };
    Ok((report, ms))
}

/// One configuration for any of the four experiments, tagged by name.
/// This is the schema the command-line `simulate` subcommand reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    /// Central-limit check of the quartet trace statistic.
    CltQuartet(QuartetCltConfig),
    /// Central-limit / unbiasedness check of the CPC discrepancy.
    CltCpc(CpcCltConfig),
    /// Empirical size or power of the CPC test.
    SizePower(SizePowerConfig),
    /// Closed-form moment validation with z-scores.
    MomentValidation(MomentValidationConfig),
}

/// Runs the tagged experiment and also returns the primary per-replication
/// values (standardized statistic, test statistic, or normalized trace
/// statistic, by experiment) in replication order, for external dumping.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(McReport, Vec<f64>)> {
    match config {
        ExperimentConfig::CltQuartet(c) => clt_quartet_core(c),
        ExperimentConfig::CltCpc(c) => clt_cpc_core(c),
        ExperimentConfig::SizePower(c) => size_power_core(c),
        ExperimentConfig::MomentValidation(c) => moment_validation_core(c),
    }
}
