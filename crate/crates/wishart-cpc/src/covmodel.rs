//! Covariance-matrix families and finite-p trace diagnostics.
//!
//! This module builds the population covariance structures the rest of the
//! crate consumes: commuting pairs (the null hypothesis of the CPC test),
//! Givens-rotated pairs (alternatives with a tunable commutator), AR(1)
//! Toeplitz matrices, and trace-word ratios tr(Σ_{w1}···Σ_{wk})/p that play
//! the role of the limit constants σ_{ij...} at finite dimension.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Relative tolerance for accepting an input matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Relative tolerance under which a pair counts as commuting.
pub const COMMUTING_TOL: f64 = 1e-10;

/// Interchange format for dense matrices: a dimension plus nested rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    /// Number of rows and columns.
    pub dim: usize,
    /// Row-major entries, `dim` rows of `dim` values each.
    pub rows: Vec<Vec<f64>>,
}

impl MatrixJson {
    /// Converts to an owned array, validating squareness.
    pub fn to_array(&self) -> Result<Array2<f64>> {
        if self.rows.len() != self.dim {
            return Err(Error::Parse(format!(
                "matrix declares dim {} but has {} rows",
                self.dim,
                self.rows.len()
            )));
        }
        let mut out = Array2::zeros((self.dim, self.dim));
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.dim {
                return Err(Error::Parse(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    self.dim
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                out[[i, j]] = v;
            }
        }
        Ok(out)
    }

    /// Captures an array view.
    pub fn from_view(a: ArrayView2<f64>) -> Self {
        MatrixJson { dim: a.nrows(), rows: a.outer_iter().map(|r| r.to_vec()).collect() }
    }
}

/// A symmetric positive definite matrix.
///
/// Construction symmetrizes the input (averaging with its transpose) after
/// checking that the relative asymmetry is within [`SYMMETRY_TOL`], and
/// verifies positive definiteness by attempting a Cholesky factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    dim: usize,
    entries: Array2<f64>,
}

impl SpdMatrix {
    /// Validates and symmetrizes `entries`.
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r == 0 {
            return Err(Error::InvalidDimension("matrix must be at least 1x1".into()));
        }
        if r != c {
            return Err(Error::DimensionMismatch { expected: r, actual: c });
        }
        if !entries.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("matrix entries must be finite".into()));
        }
        let asym = linalg::relative_asymmetry(entries.view());
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric { asymmetry: asym, tolerance: SYMMETRY_TOL });
        }
        let sym = linalg::symmetrize(entries.view());
        linalg::cholesky_lower(sym.view())?;
        Ok(SpdMatrix { dim: r, entries: sym })
    }

    /// Matrix dimension p.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Borrowed entries.
    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    /// Entry view, convenient for trace-word evaluation.
    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    /// Frobenius norm.
    pub fn fro_norm(&self) -> f64 {
        linalg::fro_norm(self.entries.view())
    }

    /// Writes `dim` CSV rows of `dim` decimals at 17 significant digits.
    pub fn to_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        write_square_csv(self.entries.view(), w)
    }

    /// Reads a dense square CSV (no header) and validates SPD-ness.
    pub fn from_csv<R: std::io::Read>(r: R) -> Result<Self> {
        SpdMatrix::new(read_square_csv(r)?)
    }
}

impl Serialize for SpdMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from_view(self.entries.view()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpdMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = MatrixJson::deserialize(d)?;
        let arr = raw.to_array().map_err(serde::de::Error::custom)?;
        SpdMatrix::new(arr).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn write_square_csv<W: std::io::Write>(a: ArrayView2<f64>, mut w: W) -> Result<()> {
    for row in a.outer_iter() {
        let line: Vec<String> = row.iter().map(|&v| linalg::fmt_f64(v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub(crate) fn read_square_csv<R: std::io::Read>(r: R) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::Parse(format!("bad numeric field: {e}")))?);
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::Parse("empty matrix CSV".into()));
    }
    if rows.iter().any(|row| row.len() != n) {
        return Err(Error::Parse("matrix CSV is not square".into()));
    }
    let mut out = Array2::zeros((n, n));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    Ok(out)
}

/// A pair (Σ_x, Σ_y) with a flag recording whether it was built to commute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariancePair {
    sigma_x: SpdMatrix,
    sigma_y: SpdMatrix,
    commuting: bool,
}

impl CovariancePair {
    /// Builds a pair with an explicit commuting claim.
    ///
    /// A `commuting = true` claim is verified against the Frobenius norm of
    /// the commutator at tolerance [`COMMUTING_TOL`]; an unverifiable claim
    /// is rejected rather than silently recorded.
    pub fn new(sigma_x: SpdMatrix, sigma_y: SpdMatrix, commuting: bool) -> Result<Self> {
        if sigma_x.dim() != sigma_y.dim() {
            return Err(Error::DimensionMismatch {
                expected: sigma_x.dim(),
                actual: sigma_y.dim(),
            });
        }
        if commuting && !commutes(&sigma_x, &sigma_y) {
            return Err(Error::InvalidParameter(
                "pair claimed commuting but the commutator norm exceeds tolerance".into(),
            ));
        }
        Ok(CovariancePair { sigma_x, sigma_y, commuting })
    }

    /// Builds a pair, measuring the commuting flag from the matrices.
    pub fn from_matrices(sigma_x: SpdMatrix, sigma_y: SpdMatrix) -> Result<Self> {
        if sigma_x.dim() != sigma_y.dim() {
            return Err(Error::DimensionMismatch {
                expected: sigma_x.dim(),
                actual: sigma_y.dim(),
            });
        }
        let flag = commutes(&sigma_x, &sigma_y);
        Ok(CovariancePair { sigma_x, sigma_y, commuting: flag })
    }

    /// First member.
    pub fn sigma_x(&self) -> &SpdMatrix {
        &self.sigma_x
    }

    /// Second member.
    pub fn sigma_y(&self) -> &SpdMatrix {
        &self.sigma_y
    }

    /// Whether the pair commutes to within [`COMMUTING_TOL`].
    pub fn commuting(&self) -> bool {
        self.commuting
    }

    /// Shared dimension.
    pub fn dim(&self) -> usize {
        self.sigma_x.dim()
    }
}

fn commutes(sigma_x: &SpdMatrix, sigma_y: &SpdMatrix) -> bool {
    let xy = sigma_x.entries().dot(sigma_y.entries());
    let yx = sigma_y.entries().dot(sigma_x.entries());
    let diff = &xy - &yx;
    linalg::fro_norm(diff.view()) <= COMMUTING_TOL * sigma_x.fro_norm() * sigma_y.fro_norm()
}

/// One entry of [`RatioDiagnostics`]: a trace word and its value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordRatio {
    /// Sequence of matrix labels, product taken left to right.
    pub word: Vec<String>,
    /// tr(∏ Σ_label)/p.
    pub ratio: f64,
}

/// Finite-p trace-word ratios: each word w maps to tr(Σ_{w1}···Σ_{wk})/p.
///
/// These are the finite-dimensional precursors of the limiting constants
/// the asymptotic theory assumes; the crate never extrapolates them, it
/// only reports their values so trends across p can be inspected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioDiagnostics {
    /// Word/value pairs in the order requested.
    pub entries: Vec<WordRatio>,
}

impl RatioDiagnostics {
    /// Looks up the ratio for an exact word.
    pub fn value(&self, word: &[&str]) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.word.len() == word.len() && e.word.iter().zip(word).all(|(a, b)| a == b))
            .map(|e| e.ratio)
    }
}

/// The p×p identity as an [`SpdMatrix`].
pub fn make_identity(p: usize) -> Result<SpdMatrix> {
    if p == 0 {
        return Err(Error::InvalidDimension("identity of dimension 0".into()));
    }
    SpdMatrix::new(Array2::eye(p))
}

/// AR(1) Toeplitz covariance with entries rho^|i−j|.
pub fn make_toeplitz_ar1(p: usize, rho: f64) -> Result<SpdMatrix> {
    if p == 0 {
        return Err(Error::InvalidDimension("Toeplitz matrix of dimension 0".into()));
    }
    if !rho.is_finite() || rho.abs() >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "AR(1) parameter must satisfy |rho| < 1, got {rho}"
        )));
    }
    let mut m = Array2::zeros((p, p));
    for i in 0..p {
        for j in 0..p {
            m[[i, j]] = rho.powi((i as i32 - j as i32).abs());
        }
    }
    SpdMatrix::new(m)
}

/// A plane rotation: indices i < j and an angle in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GivensRotation {
    /// First rotated coordinate.
    pub i: usize,
    /// Second rotated coordinate.
    pub j: usize,
    /// Rotation angle in radians.
    pub angle: f64,
}

fn givens_matrix(p: usize, rot: &GivensRotation) -> Result<Array2<f64>> {
    if rot.i >= rot.j || rot.j >= p {
        return Err(Error::InvalidParameter(format!(
            "rotation plane ({}, {}) is not an index pair i < j < {p}",
            rot.i, rot.j
        )));
    }
    let mut r = Array2::eye(p);
    let (s, c) = rot.angle.sin_cos();
    r[[rot.i, rot.i]] = c;
    r[[rot.j, rot.j]] = c;
    r[[rot.i, rot.j]] = -s;
    r[[rot.j, rot.i]] = s;
    Ok(r)
}

/// Builds Σ_x = diag(eigvals_x) and Σ_y = R·diag(eigvals_y)·R′ where R is
/// the product of the given plane rotations (identity when empty).
///
/// The commuting flag is measured from the result, so rotations that leave
/// Σ_y diagonal (zero angle, right angles, or repeated eigenvalues in the
/// rotated plane) still yield a commuting pair.
pub fn make_rotated_pair(
    eigvals_x: &[f64],
    eigvals_y: &[f64],
    rotations: &[GivensRotation],
) -> Result<CovariancePair> {
    let p = eigvals_x.len();
    if p == 0 {
        return Err(Error::InvalidDimension("empty eigenvalue vector".into()));
    }
    if eigvals_y.len() != p {
        return Err(Error::DimensionMismatch { expected: p, actual: eigvals_y.len() });
    }
    if eigvals_x.iter().chain(eigvals_y).any(|&v| !v.is_finite() || v <= 0.0) {
        return Err(Error::InvalidParameter("eigenvalues must be strictly positive".into()));
    }
    let sigma_x = SpdMatrix::new(Array2::from_diag(&ndarray::Array1::from(eigvals_x.to_vec())))?;
    let mut y: Array2<f64> = Array2::from_diag(&ndarray::Array1::from(eigvals_y.to_vec()));
    for rot in rotations {
        let r = givens_matrix(p, rot)?;
        y = r.dot(&y).dot(&r.t());
    }
    let sigma_y = SpdMatrix::new(y)?;
    CovariancePair::from_matrices(sigma_x, sigma_y)
}

/// Builds a CPC pair from two spectra, optionally rotating Σ_y.
///
/// With no rotation the pair shares its eigenvectors (the standard basis)
/// and commutes. Supplying `rotation_angle` requires `rotation_plane`.
/// Supplying only `seed` draws a uniformly random plane and an angle in
/// [π/8, 3π/8], a deterministic way to produce a non-commuting pair.
pub fn make_cpc_pair(
    eigvals_x: &[f64],
    eigvals_y: &[f64],
    rotation_angle: Option<f64>,
    rotation_plane: Option<(usize, usize)>,
    seed: Option<u64>,
) -> Result<CovariancePair> {
    let rotations = match (rotation_angle, rotation_plane, seed) {
        (Some(angle), Some((i, j)), _) => vec![GivensRotation { i, j, angle }],
        (Some(_), None, _) => {
            return Err(Error::InvalidParameter("rotation_angle requires rotation_plane".into()))
        }
        (None, Some(_), _) => {
            return Err(Error::InvalidParameter("rotation_plane requires rotation_angle".into()))
        }
        (None, None, Some(seed)) => {
            let p = eigvals_x.len();
            if p < 2 {
                return Err(Error::InvalidParameter(
                    "seeded random rotation needs dimension at least 2".into(),
                ));
            }
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let i = rng.gen_range(0..p - 1);
            let j = rng.gen_range(i + 1..p);
            let angle =
                rng.gen_range(std::f64::consts::FRAC_PI_8..3.0 * std::f64::consts::FRAC_PI_8);
            vec![GivensRotation { i, j, angle }]
        }
        (None, None, None) => Vec::new(),
    };
    make_rotated_pair(eigvals_x, eigvals_y, &rotations)
}

/// The CPC discrepancy θ_p = [tr(Σ_xΣ_xΣ_yΣ_y) − tr(Σ_xΣ_yΣ_xΣ_y)]/p.
///
/// Computed as ‖Σ_xΣ_y − Σ_yΣ_x‖_F²/(2p), which is algebraically equal to
/// the trace difference but sums only nonnegative terms, so the result is
/// nonnegative by construction and exactly zero for commuting pairs. The
/// trace-difference form cancels catastrophically when the pair nearly
/// commutes: the two traces are O(p·λ⁴) while their difference can be
/// arbitrarily small.
pub fn commutator_theta(pair: &CovariancePair) -> f64 {
    let x = pair.sigma_x().entries();
    let y = pair.sigma_y().entries();
    let p = pair.dim() as f64;
    let commutator = x.dot(y) - y.dot(x);
    commutator.iter().map(|v| v * v).sum::<f64>() / (2.0 * p)
}

/// Evaluates tr(∏ Σ_label)/p for each requested word.
///
/// `matrices` associates labels with matrices; every word is a sequence of
/// those labels with length 2..=16. Ratios are invariant under cyclic
/// rotation of a word because the trace is.
pub fn assumption_ratios(
    matrices: &[(&str, &SpdMatrix)],
    words: &[&[&str]],
) -> Result<RatioDiagnostics> {
    let p = match matrices.first() {
        Some((_, m)) => m.dim(),
        None => return Err(Error::InvalidParameter("no matrices supplied".into())),
    };
    for (_, m) in matrices {
        if m.dim() != p {
            return Err(Error::DimensionMismatch { expected: p, actual: m.dim() });
        }
    }
    let lookup = |label: &str| -> Result<ArrayView2<f64>> {
        matrices
            .iter()
            .find(|(l, _)| *l == label)
            .map(|(_, m)| m.view())
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    };
    let mut entries = Vec::with_capacity(words.len());
    for word in words {
        if word.len() < 2 || word.len() > 16 {
            return Err(Error::InvalidParameter(format!(
                "trace words must have length 2..=16, got {}",
                word.len()
            )));
        }
        let factors: Result<Vec<ArrayView2<f64>>> = word.iter().map(|l| lookup(l)).collect();
        let ratio = linalg::trace_of_product(&factors?) / p as f64;
        entries.push(WordRatio { word: word.iter().map(|s| s.to_string()).collect(), ratio });
    }
    Ok(RatioDiagnostics { entries })
}

/// Trace words over labels a,b,c,d appearing in the closed-form variance of
/// tr(T_aT_bT_cT_d), plus all pair words. Full length-16 enumeration is
/// deliberately not offered; 4^16 words is not a useful default.
pub const VARIANCE_WORD_CATALOG: &[&[&str]] = &[
    &["a", "b"],
    &["a", "c"],
    &["a", "d"],
    &["b", "c"],
    &["b", "d"],
    &["c", "d"],
    &["a", "b", "c", "d"],
    &["a", "b", "a", "d"],
    &["b", "c", "d", "c"],
    &["a", "b", "c", "b"],
    &["a", "d", "c", "d"],
    &["a", "b", "c", "b", "a", "d"],
    &["a", "b", "a", "d", "c", "d"],
    &["a", "b", "c", "d", "c", "b"],
    &["a", "d", "c", "b", "c", "d"],
    &["a", "b", "c", "d", "a", "b", "c", "d"],
    &["a", "b", "c", "d", "c", "b", "a", "d"],
    &["a", "b", "c", "b", "a", "d", "c", "d"],
    &["a", "b", "a", "d", "c", "b", "c", "d"],
    &["a", "b", "c", "d", "a", "d", "c", "b"],
];

/// Lower-triangular L with L·L′ = Σ, for sampling N_p(0, Σ).
///
/// A triangular factor is distributionally interchangeable with the
/// symmetric square root here, since the sampled law depends on the factor
/// only through L·L′.
pub fn sqrt_factor(sigma: &SpdMatrix) -> Result<Array2<f64>> {
    linalg::cholesky_lower(sigma.view())
}
