//! Unbiased estimators of the CPC discrepancy θ_p and of the variance
//! components entering the test statistic.
//!
//! The discrepancy estimator θ̂ works on a four-way split of each sample:
//! products of scatters from disjoint sub-samples are independent, so the
//! two trace words in θ_p can be estimated without bias. The variance
//! components σ_xx, σ_yy are estimated by a quadratic functional of a
//! sample covariance, and σ_xy by a normalized cross trace; an alternative
//! split-free estimator of θ_p from single scatters is also provided.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::wishart_sampling::ScatterMatrix;

/// Symmetry tolerance for matrices fed to the quadratic functional.
pub const ESTIMATOR_SYMMETRY_TOL: f64 = 1e-10;

/// Centered scatters of four disjoint blocks per sample, the inputs to
/// the split-based discrepancy estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitScatters {
    x_blocks: [ScatterMatrix; 4],
    y_blocks: [ScatterMatrix; 4],
    block_x: usize,
    block_y: usize,
}

impl SplitScatters {
    /// Adopts eight centered block scatters. All blocks of a sample must
    /// share one size (so one degrees-of-freedom count), every scatter
    /// must be centered, and the two samples must share a dimension.
    pub fn new(x_blocks: [ScatterMatrix; 4], y_blocks: [ScatterMatrix; 4]) -> Result<Self> {
        let p = x_blocks[0].dim();
        for t in x_blocks.iter().chain(y_blocks.iter()) {
            if t.dim() != p {
                return Err(Error::DimensionMismatch { expected: p, actual: t.dim() });
            }
            if !t.centered() {
                return Err(Error::InvalidParameter(
                    "split scatters must be centered block scatters".into(),
                ));
            }
        }
        let dfx = x_blocks[0].df();
        let dfy = y_blocks[0].df();
        if x_blocks.iter().any(|t| t.df() != dfx) || y_blocks.iter().any(|t| t.df() != dfy) {
            return Err(Error::InvalidParameter(
                "all blocks of a sample must have equal degrees of freedom".into(),
            ));
        }
        Ok(SplitScatters { x_blocks, y_blocks, block_x: dfx + 1, block_y: dfy + 1 })
    }

    /// Per-block x observation count m (each x scatter has df m − 1).
    pub fn block_x(&self) -> usize {
        self.block_x
    }

    /// Per-block y observation count n.
    pub fn block_y(&self) -> usize {
        self.block_y
    }

    /// Shared dimension p.
    pub fn dim(&self) -> usize {
        self.x_blocks[0].dim()
    }

    /// The i-th x block scatter, i in 0..4.
    pub fn x_block(&self, i: usize) -> &ScatterMatrix {
        &self.x_blocks[i]
    }

    /// The i-th y block scatter, i in 0..4.
    pub fn y_block(&self, i: usize) -> &ScatterMatrix {
        &self.y_blocks[i]
    }
}

/// The split-based unbiased estimator of θ_p:
/// [tr(T_x1 T_x2 T_y1 T_y2) − tr(T_x3 T_y3 T_x4 T_y4)] / ((m−1)²(n−1)²p).
///
/// Independence of the four factors in each word makes the first term an
/// unbiased estimate of (m−1)²(n−1)²·tr(Σ_x²Σ_y²) and the second of
/// (m−1)²(n−1)²·tr((Σ_xΣ_y)²), so θ̂ is exactly unbiased for θ_p.
pub fn theta_hat(split: &SplitScatters) -> f64 {
    let p = split.dim() as f64;
    let dfx = (split.block_x - 1) as f64;
    let dfy = (split.block_y - 1) as f64;
    let aligned = linalg::trace_of_product(&[
        split.x_blocks[0].view(),
        split.x_blocks[1].view(),
        split.y_blocks[0].view(),
        split.y_blocks[1].view(),
    ]);
    let interleaved = linalg::trace_of_product(&[
        split.x_blocks[2].view(),
        split.y_blocks[2].view(),
        split.x_blocks[3].view(),
        split.y_blocks[3].view(),
    ]);
    (aligned - interleaved) / (dfx * dfx * dfy * dfy * p)
}

/// The quadratic variance-component estimator, applied literally to the
/// matrix it is given:
/// ((M−1)² / (p(M−2)(M+1))) · [tr(A²) − tr(A)²/(M−1)].
///
/// Fed the sample covariance S of M observations it is exactly unbiased
/// for tr(Σ²)/p; fed a raw scatter it estimates (M−1)²·tr(Σ²)/p instead,
/// so callers choose the scale by choosing the input.
pub fn sigma_hat_quadratic(
    matrix: ArrayView2<'_, f64>,
    sample_count: usize,
    p: usize,
) -> Result<f64> {
    if sample_count < 3 {
        return Err(Error::InsufficientData {
            required: 3,
            actual: sample_count,
            what: "observations for the quadratic variance estimator",
        });
    }
    let (r, c) = (matrix.nrows(), matrix.ncols());
    if r != c {
        return Err(Error::DimensionMismatch { expected: r, actual: c });
    }
    if r != p || p == 0 {
        return Err(Error::DimensionMismatch { expected: p, actual: r });
    }
    if linalg::relative_asymmetry(matrix) > ESTIMATOR_SYMMETRY_TOL {
        return Err(Error::NotSymmetric {
            asymmetry: linalg::relative_asymmetry(matrix),
            tolerance: ESTIMATOR_SYMMETRY_TOL,
        });
    }
    let mf = sample_count as f64;
    let tr = linalg::trace(matrix);
    let tr_sq = linalg::trace_of_pair(matrix, matrix);
    let prefactor = (mf - 1.0) * (mf - 1.0) / (p as f64 * (mf - 2.0) * (mf + 1.0));
    Ok(prefactor * (tr_sq - tr * tr / (mf - 1.0)))
}

/// Normalization mode for the cross-trace estimator of σ_xy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossMode {
    /// tr(T_x T_y) / (df_x · df_y · p): unbiased for tr(Σ_xΣ_y)/p.
    #[default]
    Normalized,
    /// tr(T_x T_y) / p on the scatters as given, no degrees-of-freedom
    /// correction.
    Raw,
}

/// The cross variance-component estimator tr(T_x T_y)/p, optionally
/// divided by the product of the two degrees of freedom.
pub fn sigma_hat_cross(
    scatter_x: &ScatterMatrix,
    scatter_y: &ScatterMatrix,
    mode: CrossMode,
) -> Result<f64> {
    if scatter_x.dim() != scatter_y.dim() {
        return Err(Error::DimensionMismatch {
            expected: scatter_x.dim(),
            actual: scatter_y.dim(),
        });
    }
    let p = scatter_x.dim() as f64;
    let raw = linalg::trace_of_pair(scatter_x.view(), scatter_y.view()) / p;
    Ok(match mode {
        CrossMode::Normalized => raw / (scatter_x.df() as f64 * scatter_y.df() as f64),
        CrossMode::Raw => raw,
    })
}

/// The split-free estimator of θ_p from one centered scatter per sample
/// (df M−1 and N−1), a six-term polynomial in joint traces:
///
/// [tr(T_x²T_y²) − tr(T_x²T_y)tr(T_y)/(N−1) − tr(T_xT_y²)tr(T_x)/(M−1)
///  + tr(T_xT_y)tr(T_x)tr(T_y)/((M−1)(N−1))
///  − (MN−M−N+3)·tr((T_xT_y)²)/((M−1)(N−1))
///  + (M+N−1)·tr(T_xT_y)²/((M−1)(N−1))]
/// / ((M−2)(M+1)(N−2)(N+1)·p).
pub fn theta_hat_alternative(
    scatter_x: &ScatterMatrix,
    scatter_y: &ScatterMatrix,
    m: usize,
    n: usize,
    p: usize,
) -> Result<f64> {
    if m < 3 || n < 3 {
        return Err(Error::InsufficientData {
            required: 3,
            actual: m.min(n),
            what: "observations per sample for the split-free estimator",
        });
    }
    if scatter_x.dim() != p || scatter_y.dim() != p || p == 0 {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: if scatter_x.dim() != p { scatter_x.dim() } else { scatter_y.dim() },
        });
    }
    if scatter_x.df() != m - 1 || scatter_y.df() != n - 1 {
        return Err(Error::InvalidParameter(format!(
            "scatter degrees of freedom ({}, {}) do not match sample counts ({m}, {n})",
            scatter_x.df(),
            scatter_y.df()
        )));
    }
    let (mf, nf) = (m as f64, n as f64);
    let (a, b) = (mf - 1.0, nf - 1.0);
    let tx = scatter_x.view();
    let ty = scatter_y.view();

    let xxyy = linalg::trace_of_product(&[tx, tx, ty, ty]);
    let xxy = linalg::trace_of_product(&[tx, tx, ty]);
    let xyy = linalg::trace_of_product(&[tx, ty, ty]);
    let xy = linalg::trace_of_pair(tx, ty);
    let xyxy = linalg::trace_of_product(&[tx, ty, tx, ty]);
    let tr_x = linalg::trace(tx);
    let tr_y = linalg::trace(ty);

    let bracket = xxyy - xxy * tr_y / b - xyy * tr_x / a + xy * tr_x * tr_y / (a * b)
        - (mf * nf - mf - nf + 3.0) * xyxy / (a * b)
        + (mf + nf - 1.0) * xy * xy / (a * b);
    Ok(bracket / ((mf - 2.0) * (mf + 1.0) * (nf - 2.0) * (nf + 1.0) * p as f64))
}

/// The four estimated components of the CPC test, with the plug-in
/// variance derived from them on demand rather than stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSet {
    /// Split-based estimate of the discrepancy θ_p.
    pub theta_hat: f64,
    /// Estimate of σ_xx = tr(Σ_x²)/p.
    pub sigma_hat_xx: f64,
    /// Estimate of σ_yy = tr(Σ_y²)/p.
    pub sigma_hat_yy: f64,
    /// Estimate of σ_xy = tr(Σ_xΣ_y)/p.
    pub sigma_hat_xy: f64,
}

impl EstimateSet {
    /// The plug-in variance σ̂_xx σ̂_yy σ̂_xy² + σ̂_xy⁴, recomputed from
    /// the stored components every time.
    pub fn variance_hat(&self) -> f64 {
        let xy2 = self.sigma_hat_xy * self.sigma_hat_xy;
        self.sigma_hat_xx * self.sigma_hat_yy * xy2 + xy2 * xy2
    }
}
