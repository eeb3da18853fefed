//! Moments of Gaussian quadratic forms.
//!
//! For z ~ N_p(0, I) and square matrices M_i, this module evaluates
//! E[(z′Az)^k] for k ≤ 4, central moments of z′Az, mixed expectations
//! E[∏ z′M_iz] for up to four factors, and the matrix-valued expectation
//! E[(xx′)A(xx′)] for x ~ N_p(0, Σ). Every formula is a finite sum of
//! trace words obtained by pairing Gaussian indices; the groupings here
//! collapse those pairings into 1, 3, 15, and 105 terms for one through
//! four factors. A Monte Carlo oracle with the same call shape is provided
//! so each closed form can be cross-checked numerically.

use ndarray::{Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::covmodel::{sqrt_factor, MatrixJson, SpdMatrix};
use crate::error::{Error, Result};
use crate::linalg;

/// Relative asymmetry tolerance for moments that require a symmetric input.
pub const QUAD_SYMMETRY_TOL: f64 = 1e-10;

/// Minimum replication count accepted by [`mc_quad_oracle`].
pub const MC_ORACLE_MIN_REPS: usize = 1000;

/// A square matrix with finite entries; symmetry is not required.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    entries: Array2<f64>,
}

impl SquareMatrix {
    /// Validates squareness and finiteness.
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
        Ok(SquareMatrix { dim: r, entries })
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
}

impl Serialize for SquareMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from_view(self.entries.view()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for SquareMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = MatrixJson::deserialize(d)?;
        let arr = raw.to_array().map_err(serde::de::Error::custom)?;
        SquareMatrix::new(arr).map_err(serde::de::Error::custom)
    }
}

fn require_symmetric(a: &SquareMatrix) -> Result<()> {
    let asym = linalg::relative_asymmetry(a.view());
    if asym > QUAD_SYMMETRY_TOL {
        return Err(Error::NotSymmetric { asymmetry: asym, tolerance: QUAD_SYMMETRY_TOL });
    }
    Ok(())
}

/// E[(z′Az)^k] for z ~ N_p(0, I) and symmetric A, k = `order` in 1..=4.
///
/// Asymmetric input is rejected rather than symmetrized: the raw moments
/// below are stated for symmetric A, and quietly replacing the argument
/// would mask caller bugs.
pub fn quad_moment(a: &SquareMatrix, order: usize) -> Result<f64> {
    require_symmetric(a)?;
    let v = a.view();
    let t1 = linalg::trace(v);
    match order {
        1 => Ok(t1),
        2 => {
            let t2 = linalg::trace_of_product(&[v, v]);
            Ok(2.0 * t2 + t1 * t1)
        }
        3 => {
            let t2 = linalg::trace_of_product(&[v, v]);
            let t3 = linalg::trace_of_product(&[v, v, v]);
            Ok(8.0 * t3 + 6.0 * t2 * t1 + t1.powi(3))
        }
        4 => {
            let t2 = linalg::trace_of_product(&[v, v]);
            let t3 = linalg::trace_of_product(&[v, v, v]);
            let t4 = linalg::trace_of_product(&[v, v, v, v]);
            Ok(48.0 * t4 + 32.0 * t3 * t1 + 12.0 * t2 * t2 + 12.0 * t2 * t1 * t1 + t1.powi(4))
        }
        _ => Err(Error::InvalidParameter(format!("raw moment order must be 1..=4, got {order}"))),
    }
}

/// E[(z′Az − E z′Az)^k] for z ~ N_p(0, I), k = `order` in {2, 4}.
///
/// Valid for any square A, since z′Az = z′Sz with S = (A + A′)/2.
pub fn central_moment(a: &SquareMatrix, order: usize) -> Result<f64> {
    let v = a.view();
    match order {
        2 => Ok(linalg::trace_of_product(&[v, v]) + linalg::trace_of_product(&[v, v.t()])),
        4 => {
            let s = &a.entries + &a.entries.t();
            let sv = s.view();
            let s2 = linalg::trace_of_product(&[sv, sv]);
            let s4 = linalg::trace_of_product(&[sv, sv, sv, sv]);
            Ok(3.0 * s4 + 0.75 * s2 * s2)
        }
        _ => Err(Error::InvalidParameter(format!(
            "central moment order must be 2 or 4, got {order}"
        ))),
    }
}

/// Sum over the two ways of linking a pair: tr(XY) + tr(XY′).
fn linked_pair<'a>(x: ArrayView2<'a, f64>, y: ArrayView2<'a, f64>) -> f64 {
    linalg::trace_of_product(&[x, y]) + linalg::trace_of_product(&[x, y.reversed_axes()])
}

/// Sum over the 8 connected pairings of three quadratic forms, anchored on
/// the first factor untransposed.
fn linked_triple<'a>(
    q: ArrayView2<'a, f64>,
    r: ArrayView2<'a, f64>,
    s: ArrayView2<'a, f64>,
) -> f64 {
    let mut total = 0.0;
    for (m1, m2) in [(r, s), (s, r)] {
        for flip1 in [false, true] {
            for flip2 in [false, true] {
                let f1 = if flip1 { m1.reversed_axes() } else { m1 };
                let f2 = if flip2 { m2.reversed_axes() } else { m2 };
                total += linalg::trace_of_product(&[q, f1, f2]);
            }
        }
    }
    total
}

/// Sum over the 48 connected pairings of four quadratic forms: all 6 orders
/// of the last three factors times all 8 transpose patterns on them.
fn linked_quadruple<'a>(
    q: ArrayView2<'a, f64>,
    r: ArrayView2<'a, f64>,
    s: ArrayView2<'a, f64>,
    t: ArrayView2<'a, f64>,
) -> f64 {
    let orders = [(r, s, t), (r, t, s), (s, r, t), (s, t, r), (t, r, s), (t, s, r)];
    let mut total = 0.0;
    for (m1, m2, m3) in orders {
        for mask in 0u8..8 {
            let f1 = if mask & 1 != 0 { m1.reversed_axes() } else { m1 };
            let f2 = if mask & 2 != 0 { m2.reversed_axes() } else { m2 };
            let f3 = if mask & 4 != 0 { m3.reversed_axes() } else { m3 };
            total += linalg::trace_of_product(&[q, f1, f2, f3]);
        }
    }
    total
}

/// E[∏_i z′M_iz] for z ~ N_p(0, I) and 2 to 4 square matrices.
///
/// The result is the sum over all pairings of the Gaussian indices,
/// grouped by how the factors are linked: 3 terms for a pair, 15 for a
/// triple, and 105 = 1 + 12 + 12 + 32 + 48 for a quadruple.
pub fn mixed_quad_expectation(mats: &[SquareMatrix]) -> Result<f64> {
    if mats.len() < 2 || mats.len() > 4 {
        return Err(Error::InvalidParameter(format!(
            "mixed expectation takes 2..=4 matrices, got {}",
            mats.len()
        )));
    }
    let p = mats[0].dim();
    if mats.iter().any(|m| m.dim() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: mats.iter().map(|m| m.dim()).find(|&d| d != p).unwrap_or(p),
        });
    }
    let tr: Vec<f64> = mats.iter().map(|m| linalg::trace(m.view())).collect();
    match mats {
        [q, r] => {
            let (q, r) = (q.view(), r.view());
            Ok(tr[0] * tr[1] + linked_pair(q, r))
        }
        [q, r, s] => {
            let (q, r, s) = (q.view(), r.view(), s.view());
            Ok(tr[0] * tr[1] * tr[2]
                + tr[0] * linked_pair(r, s)
                + tr[1] * linked_pair(q, s)
                + tr[2] * linked_pair(q, r)
                + linked_triple(q, r, s))
        }
        [q, r, s, t] => {
            let (q, r, s, t) = (q.view(), r.view(), s.view(), t.view());
            let singletons = tr[0] * tr[1] * tr[2] * tr[3];
            let one_pair = tr[2] * tr[3] * linked_pair(q, r)
                + tr[1] * tr[3] * linked_pair(q, s)
                + tr[1] * tr[2] * linked_pair(q, t)
                + tr[0] * tr[3] * linked_pair(r, s)
                + tr[0] * tr[2] * linked_pair(r, t)
                + tr[0] * tr[1] * linked_pair(s, t);
            let two_pairs = linked_pair(q, r) * linked_pair(s, t)
                + linked_pair(q, s) * linked_pair(r, t)
                + linked_pair(q, t) * linked_pair(r, s);
            let triples = tr[0] * linked_triple(r, s, t)
                + tr[1] * linked_triple(q, s, t)
                + tr[2] * linked_triple(q, r, t)
                + tr[3] * linked_triple(q, r, s);
            let quadruples = linked_quadruple(q, r, s, t);
            Ok(singletons + one_pair + two_pairs + triples + quadruples)
        }
        _ => unreachable!("length checked above"),
    }
}

/// E[(xx′)A(xx′)] for x ~ N_p(0, Σ): ΣAΣ + ΣA′Σ + tr(ΣA)·Σ.
pub fn sandwich_expectation(sigma: &SpdMatrix, a: &SquareMatrix) -> Result<Array2<f64>> {
    if sigma.dim() != a.dim() {
        return Err(Error::DimensionMismatch { expected: sigma.dim(), actual: a.dim() });
    }
    let s = sigma.entries();
    let sas = s.dot(a.entries()).dot(s);
    let sats = s.dot(&a.entries.t()).dot(s);
    let weight = linalg::trace_of_pair(s.view(), a.view());
    Ok(sas + sats + weight * s)
}

/// Monte Carlo estimate of E[∏_i x′M_ix] for x ~ N_p(0, Σ).
///
/// Returns `(estimate, standard_error)` from `reps` independent draws.
/// This is the numerical cross-check for the closed forms above, so it
/// deliberately shares no code with them: samples are produced from a
/// triangular factor of Σ and the products are averaged directly.
pub fn mc_quad_oracle(
    mats: &[SquareMatrix],
    sigma: &SpdMatrix,
    reps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if mats.is_empty() {
        return Err(Error::InvalidParameter("oracle needs at least one matrix".into()));
    }
    if reps < MC_ORACLE_MIN_REPS {
        return Err(Error::InsufficientData {
            required: MC_ORACLE_MIN_REPS,
            actual: reps,
            what: "Monte Carlo replications",
        });
    }
    let p = sigma.dim();
    if mats.iter().any(|m| m.dim() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: mats.iter().map(|m| m.dim()).find(|&d| d != p).unwrap_or(p),
        });
    }
    let l = sqrt_factor(sigma)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    let mut g = Array1::zeros(p);
    for _ in 0..reps {
        for gi in g.iter_mut() {
            *gi = StandardNormal.sample(&mut rng);
        }
        let x = l.dot(&g);
        let mut product = 1.0;
        for m in mats {
            product *= x.dot(&m.entries.dot(&x));
        }
        sum += product;
        sum_sq += product * product;
    }
    let n = reps as f64;
    let mean = sum / n;
    let var = (sum_sq - n * mean * mean).max(0.0) / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
