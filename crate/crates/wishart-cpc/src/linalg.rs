//! Small dense-matrix helpers shared across modules.
//!
//! Everything here operates on `ndarray` arrays in a fixed, documented order
//! so that results are bit-reproducible across runs and thread counts.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Sum of diagonal entries.
pub(crate) fn trace(a: ArrayView2<f64>) -> f64 {
    a.diag().sum()
}

/// Frobenius norm, accumulated in row-major order.
pub(crate) fn fro_norm(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Frobenius norm of A - A'.
pub(crate) fn asymmetry_norm(a: ArrayView2<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let d = a[[i, j]] - a[[j, i]];
            acc += d * d;
        }
    }
    acc.sqrt()
}

/// ‖A − A′‖_F / ‖A‖_F, with the convention 0/0 = 0.
pub(crate) fn relative_asymmetry(a: ArrayView2<f64>) -> f64 {
    let norm = fro_norm(a);
    if norm == 0.0 {
        0.0
    } else {
        asymmetry_norm(a) / norm
    }
}

/// (A + A′)/2.
pub(crate) fn symmetrize(a: ArrayView2<f64>) -> Array2<f64> {
    let p = a.nrows();
    let mut out = Array2::zeros((p, p));
    for i in 0..p {
        for j in 0..p {
            out[[i, j]] = 0.5 * (a[[i, j]] + a[[j, i]]);
        }
    }
    out
}

/// tr(A·B) without forming the product.
pub(crate) fn trace_of_pair(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[[i, j]] * b[[j, i]];
        }
    }
    acc
}

/// Trace of the product of `factors`, multiplied left to right.
///
/// The final factor is contracted directly into the trace, so a word of
/// length k costs k−2 matrix multiplications plus one elementwise pass.
pub(crate) fn trace_of_product(factors: &[ArrayView2<f64>]) -> f64 {
    match factors.len() {
        0 => panic!("trace_of_product requires at least one factor"),
        1 => trace(factors[0]),
        2 => trace_of_pair(factors[0], factors[1]),
        _ => {
            let mut acc = factors[0].dot(&factors[1]);
            for f in &factors[2..factors.len() - 1] {
                acc = acc.dot(f);
            }
            trace_of_pair(acc.view(), factors[factors.len() - 1])
        }
    }
}

/// Lower-triangular L with L·L′ = A for symmetric positive definite A.
pub(crate) fn cholesky_lower(a: ArrayView2<f64>) -> Result<Array2<f64>> {
    let p = a.nrows();
    let mut l: Array2<f64> = Array2::zeros((p, p));
    for j in 0..p {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !d.is_finite() || d <= 0.0 {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let root = d.sqrt();
        l[[j, j]] = root;
        for i in j + 1..p {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / root;
        }
    }
    Ok(l)
}

/// Renders a float with 17 significant digits, enough to round-trip exactly.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}
