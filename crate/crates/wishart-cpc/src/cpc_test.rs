//! The common-principal-components test: split each sample into four
//! blocks, estimate the discrepancy θ_p and the variance components,
//! standardize, and compare against a one-sided normal critical value.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimators::{
    sigma_hat_cross, sigma_hat_quadratic, theta_hat, CrossMode, EstimateSet, SplitScatters,
};
use crate::wishart_sampling::{
    centered_scatter, derive_stream_seed, stream_rng, SampleMatrix, ScatterMatrix,
};

/// Minimum observations per sample: four blocks of at least two, so every
/// block scatter has at least one degree of freedom.
pub const MIN_OBSERVATIONS: usize = 8;

/// Absolute accuracy of [`normal_quantile`].
pub const QUANTILE_TOL: f64 = 1e-9;

/// Standard normal distribution function Φ.
pub fn normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").cdf(x)
}

/// Standard normal quantile Φ⁻¹(q) for 0 < q < 1, accurate to 1e-9:
/// a library inverse refined by one Newton step on Φ(x) − q.
pub fn normal_quantile(q: f64) -> Result<f64> {
    if !q.is_finite() || q <= 0.0 || q >= 1.0 {
        return Err(Error::Domain(format!(
            "quantile level must lie strictly between 0 and 1, got {q}"
        )));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let x = normal.inverse_cdf(q);
    let density = normal.pdf(x);
    if density > 1e-300 {
        Ok(x - (normal.cdf(x) - q) / density)
    } else {
        Ok(x)
    }
}

/// A four-way split of observation indices: four equal blocks plus the
/// leftover indices that no block uses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    blocks: [Vec<usize>; 4],
    discarded: Vec<usize>,
}

impl SplitIndices {
    /// The i-th block, i in 0..4, sorted ascending.
    pub fn block(&self, i: usize) -> &[usize] {
        &self.blocks[i]
    }

    /// Indices dropped because the observation count is not divisible by
    /// four, sorted ascending.
    pub fn discarded(&self) -> &[usize] {
        &self.discarded
    }

    /// Observations per block.
    pub fn block_size(&self) -> usize {
        self.blocks[0].len()
    }

    /// All retained indices in block order (block 0 first).
    pub fn retained(&self) -> Vec<usize> {
        self.blocks.iter().flatten().copied().collect()
    }
}

/// Splits 0..count into four disjoint blocks of ⌊count/4⌋ indices by a
/// seeded uniform permutation; the count % 4 leftovers are discarded and
/// reported. Requires count ≥ 8 so each block holds at least two rows.
pub fn split_four(count: usize, seed: u64) -> Result<SplitIndices> {
    if count < MIN_OBSERVATIONS {
        return Err(Error::InsufficientData {
            required: MIN_OBSERVATIONS,
            actual: count,
            what: "observations to split into four blocks",
        });
    }
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..count).collect();
    let mut rng = stream_rng(seed);
    order.shuffle(&mut rng);
    let block = count / 4;
    let mut blocks: [Vec<usize>; 4] = Default::default();
    for (i, slot) in blocks.iter_mut().enumerate() {
        let mut ids: Vec<usize> = order[i * block..(i + 1) * block].to_vec();
        ids.sort_unstable();
        *slot = ids;
    }
    let mut discarded: Vec<usize> = order[4 * block..].to_vec();
    discarded.sort_unstable();
    Ok(SplitIndices { blocks, discarded })
}

/// Observation bookkeeping attached to a test report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSizes {
    /// Retained x observations (4 · x_block).
    pub x_used: usize,
    /// Retained y observations.
    pub y_used: usize,
    /// x observations per block.
    pub x_block: usize,
    /// y observations per block.
    pub y_block: usize,
    /// x observations dropped by the split.
    pub x_discarded: usize,
    /// y observations dropped by the split.
    pub y_discarded: usize,
    /// Shared dimension p.
    pub dim: usize,
}

/// Outcome of one run of the test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    /// Standardized statistic ((m−1)(n−1)/p)·θ̂/√(plug-in variance).
    pub statistic_t: f64,
    /// One-sided p-value 1 − Φ(statistic).
    pub p_value: f64,
    /// Whether the statistic exceeds the 1−α normal quantile.
    pub reject: bool,
    /// Significance level the decision used.
    pub alpha: f64,
    /// The estimated components behind the statistic.
    pub estimates: EstimateSet,
    /// Normalization the σ̂_xy component used.
    pub sigma_xy_mode: CrossMode,
    /// Observation bookkeeping.
    pub sizes: TestSizes,
    /// Seed that drove the splits.
    pub seed: u64,
}

fn gather_rows(sample: &SampleMatrix, indices: &[usize]) -> SampleMatrix {
    let rows = sample.rows();
    let mut out = Array2::<f64>::zeros((indices.len(), sample.dim()));
    for (k, &i) in indices.iter().enumerate() {
        out.row_mut(k).assign(&rows.row(i));
    }
    SampleMatrix::new(out).expect("gathered rows form a valid sample")
}

fn block_scatters(sample: &SampleMatrix, split: &SplitIndices) -> Result<[ScatterMatrix; 4]> {
    let mk = |i: usize| -> Result<ScatterMatrix> {
        centered_scatter(&gather_rows(sample, split.block(i)))
    };
    Ok([mk(0)?, mk(1)?, mk(2)?, mk(3)?])
}

/// Runs the test on raw observations (rows) from the two populations.
///
/// Each sample is split by a seeded permutation into four blocks; each
/// block is centered at its own mean, giving scatters with one fewer
/// degree of freedom than rows. The discrepancy estimate uses the block
/// scatters; the variance components use the pooled retained rows. The
/// null is rejected when the standardized statistic exceeds Φ⁻¹(1−α).
pub fn run_cpc_test(
    x: &SampleMatrix,
    y: &SampleMatrix,
    alpha: f64,
    seed: u64,
) -> Result<TestReport> {
    run_cpc_test_with_mode(x, y, alpha, seed, CrossMode::Normalized)
}

/// [`run_cpc_test`] with an explicit σ̂_xy normalization. The raw mode
/// reproduces the un-normalized cross trace tr(T_xT_y)/p; it changes the
/// scale of the statistic and exists for formula-level comparison, not
/// for calibrated testing.
pub fn run_cpc_test_with_mode(
    x: &SampleMatrix,
    y: &SampleMatrix,
    alpha: f64,
    seed: u64,
    sigma_xy_mode: CrossMode,
) -> Result<TestReport> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), actual: y.dim() });
    }
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "significance level must lie strictly between 0 and 1, got {alpha}"
        )));
    }
    let p = x.dim();
    let split_x = split_four(x.n(), derive_stream_seed(seed, 0))?;
    let split_y = split_four(y.n(), derive_stream_seed(seed, 1))?;

    let split = SplitScatters::new(block_scatters(x, &split_x)?, block_scatters(y, &split_y)?)?;

    let full_x = centered_scatter(&gather_rows(x, &split_x.retained()))?;
    let full_y = centered_scatter(&gather_rows(y, &split_y.retained()))?;
    let x_used = 4 * split_x.block_size();
    let y_used = 4 * split_y.block_size();

    let estimates = EstimateSet {
        theta_hat: theta_hat(&split),
        sigma_hat_xx: sigma_hat_quadratic(full_x.sample_covariance().view(), x_used, p)?,
        sigma_hat_yy: sigma_hat_quadratic(full_y.sample_covariance().view(), y_used, p)?,
        sigma_hat_xy: sigma_hat_cross(&full_x, &full_y, sigma_xy_mode)?,
    };
    let variance = estimates.variance_hat();
    if !variance.is_finite() || variance <= 0.0 {
        return Err(Error::DegenerateVariance(variance));
    }

    let m = split.block_x() as f64;
    let n = split.block_y() as f64;
    let statistic_t = (m - 1.0) * (n - 1.0) / p as f64 * estimates.theta_hat / variance.sqrt();
    let p_value = 1.0 - normal_cdf(statistic_t);
    let reject = statistic_t > normal_quantile(1.0 - alpha)?;

    Ok(TestReport {
        statistic_t,
        p_value,
        reject,
        alpha,
        estimates,
        sigma_xy_mode,
        sizes: TestSizes {
            x_used,
            y_used,
            x_block: split.block_x(),
            y_block: split.block_y(),
            x_discarded: split_x.discarded().len(),
            y_discarded: split_y.discarded().len(),
            dim: p,
        },
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covmodel::{make_cpc_pair, make_identity, make_rotated_pair, GivensRotation};
    use crate::wishart_sampling::sample_gaussian;

    #[test]
    fn quantile_pins() {
        assert!((normal_quantile(0.975).unwrap() - 1.959963984540054).abs() < 1e-9);
        assert!((normal_quantile(0.95).unwrap() - 1.6448536269514722).abs() < 1e-9);
        assert!(normal_quantile(0.5).unwrap().abs() < 1e-12);
        let q = normal_quantile(0.8).unwrap();
        assert!((normal_quantile(0.2).unwrap() + q).abs() < 1e-12);
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
        assert!(normal_quantile(f64::NAN).is_err());
    }

    #[test]
    fn cdf_and_quantile_are_inverse() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-9);
        for q in [0.01, 0.2, 0.5, 0.9, 0.999] {
            let x = normal_quantile(q).unwrap();
            assert!((normal_cdf(x) - q).abs() < 1e-12, "round trip at {q}");
        }
    }

    #[test]
    fn split_is_a_partition() {
        let split = split_four(43, 7).unwrap();
        assert_eq!(split.block_size(), 10);
        assert_eq!(split.discarded().len(), 3);
        let mut all: Vec<usize> = split.retained();
        all.extend_from_slice(split.discarded());
        all.sort_unstable();
        assert_eq!(all, (0..43).collect::<Vec<_>>());
        for i in 0..4 {
            let b = split.block(i);
            assert!(b.windows(2).all(|w| w[0] < w[1]), "blocks sorted strictly");
        }
    }

    #[test]
    fn split_is_seed_deterministic_and_seed_sensitive() {
        let a = split_four(40, 1).unwrap();
        let b = split_four(40, 1).unwrap();
        let c = split_four(40, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(split_four(7, 1).is_err());
        assert!(split_four(8, 1).is_ok());
    }

    #[test]
    fn report_is_coherent_and_deterministic() {
        let sigma = make_identity(4).unwrap();
        let x = sample_gaussian(42, &sigma, 11).unwrap();
        let y = sample_gaussian(40, &sigma, 12).unwrap();
        let r1 = run_cpc_test(&x, &y, 0.05, 5).unwrap();
        let r2 = run_cpc_test(&x, &y, 0.05, 5).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.p_value >= 0.0 && r1.p_value <= 1.0);
        assert_eq!(r1.reject, r1.p_value < 0.05);
        assert_eq!(r1.sizes.x_used, 40);
        assert_eq!(r1.sizes.x_discarded, 2);
        assert_eq!(r1.sizes.y_discarded, 0);
        assert_eq!(r1.sizes.x_block, 10);
        assert_eq!(r1.sizes.dim, 4);
        assert_eq!(r1.seed, 5);
        let json = serde_json::to_string(&r1).unwrap();
        let back: TestReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r1);

        let r3 = run_cpc_test(&x, &y, 0.05, 6).unwrap();
        assert_ne!(r1.estimates.theta_hat, r3.estimates.theta_hat);
    }

    #[test]
    fn rejects_a_strongly_noncommuting_pair() {
        // Ten disjoint 45° plane rotations of a (4,1) spectrum at p = 20
        // put θ_p = 10.125, far outside noise at 160 observations.
        let p = 20usize;
        let mut eig = vec![4.0; p / 2];
        eig.extend(vec![1.0; p / 2]);
        let rotations: Vec<GivensRotation> = (0..p / 2)
            .map(|i| GivensRotation { i, j: i + p / 2, angle: std::f64::consts::FRAC_PI_4 })
            .collect();
        let pair = make_rotated_pair(&eig, &eig, &rotations).unwrap();
        let theta = crate::covmodel::commutator_theta(&pair);
        assert!((theta - 10.125).abs() < 1e-10);

        let x = sample_gaussian(160, pair.sigma_x(), 21).unwrap();
        let y = sample_gaussian(160, pair.sigma_y(), 22).unwrap();
        let report = run_cpc_test(&x, &y, 0.05, 3).unwrap();
        assert!(report.reject, "statistic {} should reject", report.statistic_t);
        assert!(report.statistic_t > 5.0);
    }

    #[test]
    fn raw_cross_mode_rescales_the_cross_component() {
        let sigma = make_identity(3).unwrap();
        let x = sample_gaussian(16, &sigma, 31).unwrap();
        let y = sample_gaussian(16, &sigma, 32).unwrap();
        let normalized = run_cpc_test(&x, &y, 0.05, 2).unwrap();
        let raw = super::run_cpc_test_with_mode(&x, &y, 0.05, 2, crate::estimators::CrossMode::Raw)
            .unwrap();
        assert_eq!(normalized.sigma_xy_mode, crate::estimators::CrossMode::Normalized);
        assert_eq!(raw.sigma_xy_mode, crate::estimators::CrossMode::Raw);
        // Raw mode skips the division by both degrees of freedom (15 each
        // for pooled blocks of 4·4 rows); everything else is unchanged.
        let df_product = 15.0 * 15.0;
        assert!(
            (raw.estimates.sigma_hat_xy - normalized.estimates.sigma_hat_xy * df_product).abs()
                <= 1e-9 * raw.estimates.sigma_hat_xy.abs()
        );
        assert_eq!(raw.estimates.theta_hat, normalized.estimates.theta_hat);
        assert_eq!(raw.estimates.sigma_hat_xx, normalized.estimates.sigma_hat_xx);
    }

    #[test]
    fn input_validation() {
        let sigma = make_identity(3).unwrap();
        let x = sample_gaussian(12, &sigma, 1).unwrap();
        let y = sample_gaussian(12, &sigma, 2).unwrap();
        let short = sample_gaussian(7, &sigma, 3).unwrap();
        let other = sample_gaussian(12, &make_identity(4).unwrap(), 4).unwrap();
        assert!(matches!(run_cpc_test(&x, &short, 0.05, 0), Err(Error::InsufficientData { .. })));
        assert!(matches!(run_cpc_test(&x, &other, 0.05, 0), Err(Error::DimensionMismatch { .. })));
        for bad_alpha in [0.0, 1.0, -0.2, f64::NAN] {
            assert!(matches!(run_cpc_test(&x, &y, bad_alpha, 0), Err(Error::InvalidParameter(_))));
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(20))]

            #[test]
            fn never_rejects_nonpositive_statistics(
                seed in 0u64..10_000,
                alpha_steps in 1u32..10,
            ) {
                // For α ≤ 0.5 the critical value is nonnegative, so a
                // nonpositive statistic can never reject.
                let alpha = f64::from(alpha_steps) * 0.05;
                let pair = make_cpc_pair(&[2.0, 1.0], &[1.5, 0.5], None, None, None).unwrap();
                let x = sample_gaussian(9, pair.sigma_x(), seed).unwrap();
                let y = sample_gaussian(8, pair.sigma_y(), seed ^ 0xFF).unwrap();
                let report = run_cpc_test(&x, &y, alpha, seed).unwrap();
                if report.statistic_t <= 0.0 {
                    prop_assert!(!report.reject);
                }
                prop_assert!((report.p_value - (1.0 - normal_cdf(report.statistic_t))).abs() < 1e-15);
            }
        }
    }
}
