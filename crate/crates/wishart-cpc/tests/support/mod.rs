//! Shared helpers for integration tests: an independent Isserlis-style
//! oracle for Gaussian quadratic-form moments, random matrix generators,
//! and a uniform pass/fail reporter for the acceptance suite.
//!
//! The oracle deliberately shares no code with the library's closed forms:
//! it enumerates perfect matchings of the Gaussian indices and sums each
//! matching's contribution by brute force, so agreement with the library
//! is meaningful evidence rather than a tautology.

#![allow(dead_code)]

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// All perfect matchings of {0, 1, ..., slots−1}; `slots` must be even.
/// There are (slots − 1)!! of them: 3, 15, 105 for 4, 6, 8 slots.
pub fn perfect_matchings(slots: usize) -> Vec<Vec<(usize, usize)>> {
    assert!(slots % 2 == 0, "matchings need an even slot count");
    let mut out = Vec::new();
    let mut used = vec![false; slots];
    let mut current = Vec::with_capacity(slots / 2);
    fn recurse(
        used: &mut [bool],
        current: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        let first = match used.iter().position(|&u| !u) {
            Some(i) => i,
            None => {
                out.push(current.clone());
                return;
            }
        };
        used[first] = true;
        for second in first + 1..used.len() {
            if used[second] {
                continue;
            }
            used[second] = true;
            current.push((first, second));
            recurse(used, current, out);
            current.pop();
            used[second] = false;
        }
        used[first] = false;
    }
    recurse(&mut used, &mut current, &mut out);
    out
}

/// E[∏_i z′M_iz] for z ~ N_p(0, I), by summing over all pairings of the
/// 2k Gaussian indices. Each quadratic form owns two index slots; a
/// pairing forces matched slots to carry equal values, so the sum runs
/// over one free index per matched pair.
pub fn isserlis_mixed_expectation(mats: &[ArrayView2<f64>]) -> f64 {
    let k = mats.len();
    assert!(k >= 1, "need at least one matrix");
    let p = mats[0].nrows();
    assert!(mats.iter().all(|m| m.nrows() == p && m.ncols() == p));
    let slots = 2 * k;
    let mut total = 0.0;
    for matching in perfect_matchings(slots) {
        // Map each slot to its equivalence class (one class per pair).
        let mut class = vec![usize::MAX; slots];
        for (c, &(a, b)) in matching.iter().enumerate() {
            class[a] = c;
            class[b] = c;
        }
        // Sum the product of matrix entries over all p^k class values.
        let mut assignment = vec![0usize; k];
        let mut term = 0.0;
        loop {
            let mut prod = 1.0;
            for (i, m) in mats.iter().enumerate() {
                let row = assignment[class[2 * i]];
                let col = assignment[class[2 * i + 1]];
                prod *= m[[row, col]];
            }
            term += prod;
            let mut j = 0;
            while j < k {
                assignment[j] += 1;
                if assignment[j] < p {
                    break;
                }
                assignment[j] = 0;
                j += 1;
            }
            if j == k {
                break;
            }
        }
        total += term;
    }
    total
}

/// E[(z′Az)^k] for z ~ N_p(0, I), via the pairing oracle.
pub fn isserlis_raw_moment(a: ArrayView2<f64>, order: usize) -> f64 {
    let copies: Vec<ArrayView2<f64>> = (0..order).map(|_| a).collect();
    isserlis_mixed_expectation(&copies)
}

/// E[(z′Az − E z′Az)^k] via binomial expansion over raw oracle moments.
pub fn isserlis_central_moment(a: ArrayView2<f64>, order: usize) -> f64 {
    let mean: f64 = (0..a.nrows()).map(|i| a[[i, i]]).sum();
    let mut total = 0.0;
    for j in 0..=order {
        let raw = if j == 0 { 1.0 } else { isserlis_raw_moment(a, j) };
        let binom = binomial(order, j);
        total += binom * raw * (-mean).powi((order - j) as i32);
    }
    total
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut out = 1.0;
    for i in 0..k {
        out *= (n - i) as f64 / (i + 1) as f64;
    }
    out
}

/// E[∏_i x′M_ix] for x ~ N_p(0, Σ) with Σ = L·L′: conjugates each matrix
/// to L′M_iL and defers to the identity-covariance oracle.
pub fn isserlis_mixed_expectation_with_covariance(
    mats: &[ArrayView2<f64>],
    factor_l: &Array2<f64>,
) -> f64 {
    let conjugated: Vec<Array2<f64>> =
        mats.iter().map(|m| factor_l.t().dot(m).dot(factor_l)).collect();
    let views: Vec<ArrayView2<f64>> = conjugated.iter().map(|m| m.view()).collect();
    isserlis_mixed_expectation(&views)
}

/// E[(xx′)A(xx′)] for x ~ N_p(0, Σ), entry by entry: component (u, v) is
/// E[(x′E_uv x)(x′Ax)] with E_uv the single-entry matrix.
pub fn isserlis_sandwich(a: &Array2<f64>, factor_l: &Array2<f64>) -> Array2<f64> {
    let p = a.nrows();
    let mut out = Array2::zeros((p, p));
    for u in 0..p {
        for v in 0..p {
            let mut e_uv = Array2::zeros((p, p));
            e_uv[[u, v]] = 1.0;
            out[[u, v]] =
                isserlis_mixed_expectation_with_covariance(&[e_uv.view(), a.view()], factor_l);
        }
    }
    out
}

/// Square matrix with independent uniform(−1, 1) entries.
pub fn random_square(p: usize, rng: &mut ChaCha12Rng) -> Array2<f64> {
    let mut a = Array2::zeros((p, p));
    for v in a.iter_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    a
}

/// Symmetric matrix (A + A′)/2 with A uniform.
pub fn random_symmetric(p: usize, rng: &mut ChaCha12Rng) -> Array2<f64> {
    let a = random_square(p, rng);
    (&a + &a.t()) * 0.5
}

/// Random SPD matrix A·A′ + ridge·I with a positive ridge.
pub fn random_spd(p: usize, rng: &mut ChaCha12Rng) -> Array2<f64> {
    let a = random_square(p, rng);
    let ridge: f64 = rng.gen_range(0.2..1.2);
    a.dot(&a.t()) + Array2::<f64>::eye(p) * ridge
}

/// Prints one `PASS`/`FAIL` line for an acceptance criterion and panics
/// with the detail on failure.
pub fn report_criterion(name: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("[{verdict}] {name} — {detail}");
    assert!(ok, "{name} failed: {detail}");
}

/// Relative gap |got − want| / max(|want|, floor), for tolerance checks on
/// quantities that may legitimately be near zero.
pub fn relative_gap(got: f64, want: f64, floor: f64) -> f64 {
    (got - want).abs() / want.abs().max(floor)
}
