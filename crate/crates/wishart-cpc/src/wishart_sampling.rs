//! Deterministic sampling of Wishart matrices as sums of outer products.
//!
//! A Wishart matrix W_p(n, Σ) is realized here explicitly as the scatter
//! T = Σ_i x_i x_i′ of n independent N_p(0, Σ) rows, never through a
//! Bartlett-style shortcut: downstream martingale computations need the
//! individual rows and their prefix scatters, not just the final matrix.
//!
//! Randomness policy: every sampler takes an explicit 64-bit seed, and
//! composite experiments derive per-stream seeds with
//! [`derive_stream_seed`], a SplitMix64-style mixer. Results are therefore
//! bit-identical across runs and across worker counts.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::covmodel::{sqrt_factor, SpdMatrix};
use crate::error::{Error, Result};
use crate::gauss_moments::SquareMatrix;
use crate::linalg;

/// Symmetry tolerance accepted when adopting an externally built scatter.
pub const SCATTER_SYMMETRY_TOL: f64 = 1e-10;

/// Derives the seed for sub-stream `index` of a run keyed by `base`.
///
/// The mixing is a SplitMix64 step: the index advances the state by odd
/// constant 0x9E3779B97F4A7C15 (so distinct indices give distinct states)
/// and the result is avalanched through two xor-multiply rounds. The map
/// is documented so external tooling can reproduce any sub-stream.
pub fn derive_stream_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The deterministic generator used throughout the crate, positioned at
/// the start of stream `seed`.
pub fn stream_rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// n rows drawn from N_p(0, Σ), kept as a matrix so scatters and prefix
/// scatters can be formed later.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    rows: Array2<f64>,
    sigma_label: Option<String>,
}

impl SampleMatrix {
    /// Adopts an n×p matrix of observations (n ≥ 1, p ≥ 1).
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        let (n, p) = rows.dim();
        if n == 0 || p == 0 {
            return Err(Error::InvalidDimension(format!(
                "sample matrix must be at least 1x1, got {n}x{p}"
            )));
        }
        if !rows.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("sample entries must be finite".into()));
        }
        Ok(SampleMatrix { rows, sigma_label: None })
    }

    /// Tags the sample with the name of the covariance it was drawn from.
    pub fn with_sigma_label(mut self, label: impl Into<String>) -> Self {
        self.sigma_label = Some(label.into());
        self
    }

    /// Number of observations n.
    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    /// Ambient dimension p.
    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    /// All observations, one per row.
    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    /// Observation `i` (0-based).
    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.rows.row(i)
    }

    /// Label of the generating covariance, when one was attached.
    pub fn sigma_label(&self) -> Option<&str> {
        self.sigma_label.as_deref()
    }

    /// Writes observations as CSV rows, optionally preceded by a header
    /// line `v1,...,vp`.
    pub fn to_csv<W: std::io::Write>(&self, mut w: W, header: bool) -> Result<()> {
        if header {
            let names: Vec<String> = (1..=self.dim()).map(|j| format!("v{j}")).collect();
            writeln!(w, "{}", names.join(","))?;
        }
        for row in self.rows.outer_iter() {
            let line: Vec<String> = row.iter().map(|&v| linalg::fmt_f64(v)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Reads CSV observations, skipping a header line if the first row
    /// contains any non-numeric field.
    pub fn from_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(r);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let parsed: std::result::Result<Vec<f64>, _> =
                record.iter().map(|f| f.trim().parse::<f64>()).collect();
            match parsed {
                Ok(row) => rows.push(row),
                Err(e) if i == 0 => {
                    // Treat a non-numeric first row as a header.
                    let _ = e;
                }
                Err(e) => return Err(Error::Parse(format!("row {}: {e}", i + 1))),
            }
        }
        let n = rows.len();
        if n == 0 {
            return Err(Error::Parse("no numeric rows in CSV input".into()));
        }
        let p = rows[0].len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Parse("CSV rows have inconsistent widths".into()));
        }
        let mut out = Array2::zeros((n, p));
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                out[[i, j]] = v;
            }
        }
        SampleMatrix::new(out)
    }
}

/// A scatter matrix Σ x_i x_i′ (optionally around the sample mean), with
/// its degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterMatrix {
    dim: usize,
    entries: Array2<f64>,
    df: usize,
    centered: bool,
}

impl ScatterMatrix {
    /// Adopts an externally built scatter; `entries` must be square and
    /// symmetric to within [`SCATTER_SYMMETRY_TOL`], and `df` positive.
    pub fn new(entries: Array2<f64>, df: usize, centered: bool) -> Result<Self> {
        let (r, c) = entries.dim();
        if r == 0 || r != c {
            return Err(Error::InvalidDimension(format!(
                "scatter must be square and non-empty, got {r}x{c}"
            )));
        }
        if df == 0 {
            return Err(Error::InvalidParameter(
                "scatter degrees of freedom must be positive".into(),
            ));
        }
        if !entries.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("scatter entries must be finite".into()));
        }
        let asym = linalg::relative_asymmetry(entries.view());
        if asym > SCATTER_SYMMETRY_TOL {
            return Err(Error::NotSymmetric { asymmetry: asym, tolerance: SCATTER_SYMMETRY_TOL });
        }
        Ok(ScatterMatrix { dim: r, entries: linalg::symmetrize(entries.view()), df, centered })
    }

    /// Matrix dimension p.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Borrowed entries.
    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    /// Entry view.
    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    /// Degrees of freedom: n for a raw scatter, n−1 for a centered one.
    pub fn df(&self) -> usize {
        self.df
    }

    /// Whether the scatter was taken around the sample mean.
    pub fn centered(&self) -> bool {
        self.centered
    }

    /// The scatter divided by its degrees of freedom — the matrix whose
    /// expectation is Σ.
    pub fn sample_covariance(&self) -> Array2<f64> {
        &self.entries / self.df as f64
    }
}

/// Draws n rows from N_p(0, Σ) as x = L·g with L a triangular factor of Σ
/// and g standard normal, using the generator of [`stream_rng`].
pub fn sample_gaussian(n: usize, sigma: &SpdMatrix, seed: u64) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be positive".into()));
    }
    let p = sigma.dim();
    let l = sqrt_factor(sigma)?;
    let mut rng = stream_rng(seed);
    let mut rows = Array2::zeros((n, p));
    let mut g = Array1::zeros(p);
    for i in 0..n {
        for gi in g.iter_mut() {
            *gi = StandardNormal.sample(&mut rng);
        }
        let x = l.dot(&g);
        rows.row_mut(i).assign(&x);
    }
    Ok(SampleMatrix { rows, sigma_label: None })
}

/// The raw scatter Σ_i x_i x_i′ with df = n.
pub fn scatter(samples: &SampleMatrix) -> ScatterMatrix {
    let x = samples.rows();
    let entries = x.t().dot(x);
    ScatterMatrix {
        dim: samples.dim(),
        entries: linalg::symmetrize(entries.view()),
        df: samples.n(),
        centered: false,
    }
}

/// The centered scatter Σ_i (x_i − x̄)(x_i − x̄)′ with df = n − 1.
pub fn centered_scatter(samples: &SampleMatrix) -> Result<ScatterMatrix> {
    let n = samples.n();
    if n < 2 {
        return Err(Error::InsufficientData {
            required: 2,
            actual: n,
            what: "observations to center",
        });
    }
    let x = samples.rows();
    let mean = x.mean_axis(ndarray::Axis(0)).expect("n >= 2 rows");
    let centered = x - &mean.view().insert_axis(ndarray::Axis(0));
    let entries = centered.t().dot(&centered);
    Ok(ScatterMatrix {
        dim: samples.dim(),
        entries: linalg::symmetrize(entries.view()),
        df: n - 1,
        centered: true,
    })
}

/// The partial scatter Σ_{i ≤ h} x_i x_i′ over the first h observations,
/// 1 ≤ h ≤ n, with df = h.
pub fn prefix_scatter(samples: &SampleMatrix, h: usize) -> Result<ScatterMatrix> {
    let n = samples.n();
    if h == 0 || h > n {
        return Err(Error::IndexOutOfRange(format!(
            "prefix length must satisfy 1 <= h <= {n}, got {h}"
        )));
    }
    let x = samples.rows().slice(ndarray::s![..h, ..]);
    let entries = x.t().dot(&x);
    Ok(ScatterMatrix {
        dim: samples.dim(),
        entries: linalg::symmetrize(entries.view()),
        df: h,
        centered: false,
    })
}

/// E[T·A·T] for T ~ W_p(a, Σ): a²·ΣAΣ + a·ΣA′Σ + a·tr(ΣA)·Σ.
pub fn wishart_quadratic_mean(
    df: f64,
    sigma: &SpdMatrix,
    inner: &SquareMatrix,
) -> Result<Array2<f64>> {
    if !(df > 0.0) || !df.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "degrees of freedom must be positive and finite, got {df}"
        )));
    }
    if sigma.dim() != inner.dim() {
        return Err(Error::DimensionMismatch { expected: sigma.dim(), actual: inner.dim() });
    }
    let s = sigma.entries();
    let a = inner.entries();
    let sas = s.dot(a).dot(s);
    let sats = s.dot(&a.t()).dot(s);
    let weight = linalg::trace_of_pair(s.view(), a.view());
    Ok(df * df * &sas + df * &sats + df * weight * s)
}

/// E[tr(T·A)·T] for T ~ W_p(a, Σ): a·ΣAΣ + a·ΣA′Σ + a²·tr(ΣA)·Σ.
pub fn wishart_trace_weighted_mean(
    df: f64,
    sigma: &SpdMatrix,
    inner: &SquareMatrix,
) -> Result<Array2<f64>> {
    if !(df > 0.0) || !df.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "degrees of freedom must be positive and finite, got {df}"
        )));
    }
    if sigma.dim() != inner.dim() {
        return Err(Error::DimensionMismatch { expected: sigma.dim(), actual: inner.dim() });
    }
    let s = sigma.entries();
    let a = inner.entries();
    let sas = s.dot(a).dot(s);
    let sats = s.dot(&a.t()).dot(s);
    let weight = linalg::trace_of_pair(s.view(), a.view());
    Ok(df * &sas + df * &sats + df * df * weight * s)
}
