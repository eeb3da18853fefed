//! Exact moments and martingale structure of the normalized trace
//! statistic M = tr(T_a·T_b·T_c·T_d)/r_p over four independent Wishart
//! matrices T_i ~ W_p(n_i, Σ_i), with r_p = p²·√(n_a n_b n_c n_d).
//!
//! The centerpiece is the closed-form variance of tr(T_a T_b T_c T_d),
//! a sum of seventeen trace-word terms, and the martingale decomposition
//! of M − E[M] into N = n_a + n_b + n_c + n_d increments, one per
//! underlying Gaussian draw, whose conditional variances have their own
//! closed forms. Everything here is finite-p and exact; the only
//! asymptotics are the plug-in variance ratios, which are reported as
//! ordinary finite-p numbers.

use std::collections::HashMap;

use ndarray::ArrayView2;

use crate::covmodel::{CovariancePair, SpdMatrix};
use crate::error::{Error, Result};
use crate::linalg;
use crate::wishart_sampling::{scatter, SampleMatrix, ScatterMatrix};

/// Sigma labels used in trace words.
const LABEL_A: u8 = 0;
const LABEL_B: u8 = 1;
const LABEL_C: u8 = 2;
const LABEL_D: u8 = 3;

/// Four Wishart factors: degrees of freedom n_i and population
/// covariances Σ_i of a common dimension p.
#[derive(Debug, Clone, PartialEq)]
pub struct WishartQuartetSpec {
    ns: [usize; 4],
    sigmas: [SpdMatrix; 4],
}

impl WishartQuartetSpec {
    /// Validates a quartet: equal dimensions and positive sample counts.
    pub fn new(ns: [usize; 4], sigmas: [SpdMatrix; 4]) -> Result<Self> {
        let p = sigmas[0].dim();
        for s in &sigmas {
            if s.dim() != p {
                return Err(Error::DimensionMismatch { expected: p, actual: s.dim() });
            }
        }
        if ns.iter().any(|&n| n == 0) {
            return Err(Error::InvalidParameter("all sample counts must be positive".into()));
        }
        Ok(WishartQuartetSpec { ns, sigmas })
    }

    /// Sample counts (n_a, n_b, n_c, n_d).
    pub fn ns(&self) -> [usize; 4] {
        self.ns
    }

    /// Population covariances (Σ_a, Σ_b, Σ_c, Σ_d).
    pub fn sigmas(&self) -> &[SpdMatrix; 4] {
        &self.sigmas
    }

    /// Common dimension p.
    pub fn dim(&self) -> usize {
        self.sigmas[0].dim()
    }

    /// The normalization r_p = p²·√(n_a n_b n_c n_d), always recomputed
    /// from the stored counts rather than cached.
    pub fn r_p(&self) -> f64 {
        let prod: f64 = self.ns.iter().map(|&n| n as f64).product();
        (self.dim() as f64).powi(2) * prod.sqrt()
    }

    fn ns_f64(&self) -> [f64; 4] {
        [self.ns[0] as f64, self.ns[1] as f64, self.ns[2] as f64, self.ns[3] as f64]
    }

    fn views(&self) -> [ArrayView2<'_, f64>; 4] {
        [self.sigmas[0].view(), self.sigmas[1].view(), self.sigmas[2].view(), self.sigmas[3].view()]
    }
}

/// Evaluates trace words over the four population covariances, caching by
/// the word's canonical cyclic rotation so each distinct word costs one
/// product chain (a length-k word takes k − 1 multiplications).
struct WordCache<'a> {
    views: [ArrayView2<'a, f64>; 4],
    values: HashMap<Vec<u8>, f64>,
}

impl<'a> WordCache<'a> {
    fn new(views: [ArrayView2<'a, f64>; 4]) -> Self {
        WordCache { views, values: HashMap::new() }
    }

    fn eval(&mut self, word: &[u8]) -> f64 {
        let key = canonical_rotation(word);
        if let Some(&v) = self.values.get(&key) {
            return v;
        }
        let factors: Vec<ArrayView2<'a, f64>> =
            key.iter().map(|&l| self.views[l as usize]).collect();
        let v = linalg::trace_of_product(&factors);
        self.values.insert(key, v);
        v
    }
}

/// The lexicographically smallest cyclic rotation of a word; traces of
/// cyclically rotated products are equal, so this is a sound cache key.
fn canonical_rotation(word: &[u8]) -> Vec<u8> {
    let mut best = word.to_vec();
    let mut rotated = word.to_vec();
    for _ in 1..word.len() {
        rotated.rotate_left(1);
        if rotated < best {
            best = rotated.clone();
        }
    }
    best
}

fn check_scatter_against_spec(
    t: &ScatterMatrix,
    expected_n: usize,
    spec: &WishartQuartetSpec,
) -> Result<()> {
    if t.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), actual: t.dim() });
    }
    if t.df() != expected_n {
        return Err(Error::InvalidParameter(format!(
            "scatter has {} degrees of freedom but the quartet declares {expected_n}",
            t.df()
        )));
    }
    Ok(())
}

/// The normalized statistic M = tr(T_a T_b T_c T_d)/r_p.
pub fn statistic_m(scatters: [&ScatterMatrix; 4], spec: &WishartQuartetSpec) -> Result<f64> {
    for (t, &n) in scatters.iter().zip(spec.ns().iter()) {
        check_scatter_against_spec(t, n, spec)?;
    }
    let trace = linalg::trace_of_product(&[
        scatters[0].view(),
        scatters[1].view(),
        scatters[2].view(),
        scatters[3].view(),
    ]);
    Ok(trace / spec.r_p())
}

/// E[M] = (n_a n_b n_c n_d / r_p) · tr(Σ_a Σ_b Σ_c Σ_d).
pub fn expected_m(spec: &WishartQuartetSpec) -> f64 {
    let prod: f64 = spec.ns.iter().map(|&n| n as f64).product();
    let trace = linalg::trace_of_product(&spec.views().to_vec());
    prod * trace / spec.r_p()
}

/// The exact variance of the unnormalized trace tr(T_a T_b T_c T_d):
/// n_a n_b n_c n_d times a seventeen-term combination of trace words in
/// the four covariances, transcribed term by term.
pub fn exact_variance_trace_product(spec: &WishartQuartetSpec) -> f64 {
    let [na, nb, nc, nd] = spec.ns_f64();
    let mut w = WordCache::new(spec.views());
    const A: u8 = LABEL_A;
    const B: u8 = LABEL_B;
    const C: u8 = LABEL_C;
    const D: u8 = LABEL_D;

    let pair_sum = na * nb + na * nc + na * nd + nb * nc + nb * nd + nc * nd;
    let triple_sum = na * nb * nc + na * nb * nd + na * nc * nd + nb * nc * nd;
    let single_sum = na + nb + nc + nd;

    let term_1 = (pair_sum + 1.0) * w.eval(&[A, B, C, D]).powi(2);
    let term_2 = (triple_sum + single_sum) * w.eval(&[A, B, C, D, A, B, C, D]);

    let term_3 = (na + 1.0) * (nb + 1.0) * (nc + 1.0) * w.eval(&[A, B, C, D, C, B, A, D]);
    let term_4 = (na + 1.0) * (nb + 1.0) * (nd + 1.0) * w.eval(&[A, B, C, B, A, D, C, D]);
    let term_5 = (na + 1.0) * (nc + 1.0) * (nd + 1.0) * w.eval(&[A, B, A, D, C, B, C, D]);
    let term_6 = (nb + 1.0) * (nc + 1.0) * (nd + 1.0) * w.eval(&[A, B, C, D, A, D, C, B]);

    let term_7 = (na + 1.0) * (nb + 1.0) * w.eval(&[C, D]) * w.eval(&[A, B, C, B, A, D]);
    let term_8 = (na + 1.0) * (nc + 1.0) * w.eval(&[A, B, A, D]) * w.eval(&[B, C, D, C]);
    let term_9 = (na + 1.0) * (nd + 1.0) * w.eval(&[B, C]) * w.eval(&[A, B, A, D, C, D]);
    let term_10 = (nb + 1.0) * (nc + 1.0) * w.eval(&[A, D]) * w.eval(&[A, B, C, D, C, B]);
    let term_11 = (nb + 1.0) * (nd + 1.0) * w.eval(&[A, B, C, B]) * w.eval(&[A, D, C, D]);
    let term_12 = (nc + 1.0) * (nd + 1.0) * w.eval(&[A, B]) * w.eval(&[A, D, C, B, C, D]);

    let term_13 = (na + 1.0) * w.eval(&[B, C]) * w.eval(&[C, D]) * w.eval(&[A, B, A, D]);
    let term_14 = (nb + 1.0) * w.eval(&[A, D]) * w.eval(&[C, D]) * w.eval(&[A, B, C, B]);
    let term_15 = (nc + 1.0) * w.eval(&[A, B]) * w.eval(&[A, D]) * w.eval(&[B, C, D, C]);
    let term_16 = (nd + 1.0) * w.eval(&[A, B]) * w.eval(&[B, C]) * w.eval(&[A, D, C, D]);

    let term_17 = w.eval(&[A, B]) * w.eval(&[A, D]) * w.eval(&[B, C]) * w.eval(&[C, D]);

    na * nb
        * nc
        * nd
        * (term_1
            + term_2
            + term_3
            + term_4
            + term_5
            + term_6
            + term_7
            + term_8
            + term_9
            + term_10
            + term_11
            + term_12
            + term_13
            + term_14
            + term_15
            + term_16
            + term_17)
}

/// The exact variance of the normalized statistic M: the trace-product
/// variance divided by r_p².
pub fn exact_variance_m(spec: &WishartQuartetSpec) -> f64 {
    exact_variance_trace_product(spec) / spec.r_p().powi(2)
}

/// The plug-in limit variance of the quartet statistic: the product of
/// the four adjacent-pair ratios tr(Σ_iΣ_j)/p over (a,b), (b,c), (c,d),
/// and (a,d), evaluated at the given finite p.
pub fn asymptotic_variance_quartet(spec: &WishartQuartetSpec) -> f64 {
    let p = spec.dim() as f64;
    let [sa, sb, sc, sd] = spec.views();
    let pairs = [
        linalg::trace_of_pair(sa, sb),
        linalg::trace_of_pair(sb, sc),
        linalg::trace_of_pair(sc, sd),
        linalg::trace_of_pair(sa, sd),
    ];
    pairs.iter().map(|t| t / p).product()
}

/// The plug-in limit variance of the CPC discrepancy statistic:
/// σ_xx·σ_yy·σ_xy² + σ_xy⁴ with σ_uv = tr(Σ_uΣ_v)/p at the given p.
pub fn asymptotic_variance_cpc(pair: &CovariancePair) -> f64 {
    let p = pair.dim() as f64;
    let x = pair.sigma_x().view();
    let y = pair.sigma_y().view();
    let sigma_xx = linalg::trace_of_pair(x, x) / p;
    let sigma_yy = linalg::trace_of_pair(y, y) / p;
    let sigma_xy = linalg::trace_of_pair(x, y) / p;
    sigma_xx * sigma_yy * sigma_xy * sigma_xy + sigma_xy.powi(4)
}

/// The martingale decomposition of M − E[M]: one increment per Gaussian
/// draw, in draw order (all of block a, then b, c, d), together with the
/// conditional variance of each increment given the past.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleTrace {
    increments: Vec<f64>,
    conditional_variances: Vec<f64>,
    block_ends: [usize; 4],
}

impl MartingaleTrace {
    /// Increments D_1, ..., D_N in draw order.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Conditional variances σ_h² of each increment given the preceding
    /// draws; constant within each block.
    pub fn conditional_variances(&self) -> &[f64] {
        &self.conditional_variances
    }

    /// One-past-the-end index of each block in draw order.
    pub fn block_ends(&self) -> [usize; 4] {
        self.block_ends
    }

    /// Block label of draw h (1-based), one of 'a', 'b', 'c', 'd'.
    pub fn block_of(&self, h: usize) -> Option<char> {
        if h == 0 || h > self.increments.len() {
            return None;
        }
        let idx = h - 1;
        for (block, &end) in [b'a', b'b', b'c', b'd'].iter().zip(self.block_ends.iter()) {
            if idx < end {
                return Some(*block as char);
            }
        }
        None
    }

    /// Σ_h D_h, which telescopes to M − E[M] up to rounding.
    pub fn increment_sum(&self) -> f64 {
        self.increments.iter().sum()
    }

    /// Σ_h σ_h², the realized quadratic characteristic; its expectation
    /// equals the exact variance of M.
    pub fn conditional_variance_sum(&self) -> f64 {
        self.conditional_variances.iter().sum()
    }

    /// Writes rows `h,block,increment,conditional_variance` with a header.
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "h,block,increment,conditional_variance")?;
        for (idx, (d, v)) in
            self.increments.iter().zip(self.conditional_variances.iter()).enumerate()
        {
            let h = idx + 1;
            let block = self.block_of(h).expect("h within range");
            writeln!(w, "{h},{block},{},{}", linalg::fmt_f64(*d), linalg::fmt_f64(*v))?;
        }
        Ok(())
    }
}

fn check_samples_against_spec(
    samples: &[&SampleMatrix; 4],
    spec: &WishartQuartetSpec,
) -> Result<()> {
    for (s, &n) in samples.iter().zip(spec.ns().iter()) {
        if s.dim() != spec.dim() {
            return Err(Error::DimensionMismatch { expected: spec.dim(), actual: s.dim() });
        }
        if s.n() != n {
            return Err(Error::InvalidParameter(format!(
                "sample has {} draws but the quartet declares {n}",
                s.n()
            )));
        }
    }
    Ok(())
}

/// Var(x′Bx) for x ~ N(0, Σ) and a general weight matrix B:
/// tr((BΣ)²) + tr(BΣB′Σ).
fn quad_form_variance<'a>(b: ArrayView2<'a, f64>, sigma: ArrayView2<'a, f64>) -> f64 {
    linalg::trace_of_product(&[b, sigma, b, sigma])
        + linalg::trace_of_product(&[b, sigma, b.reversed_axes(), sigma])
}

/// Decomposes M − E[M] into per-draw martingale increments with their
/// conditional variances.
///
/// Draw order is all of block a, then b, then c, then d. Within block a
/// the increment of draw x is (n_b n_c n_d / r_p)·tr((xx′ − Σ_a)Σ_bΣ_cΣ_d);
/// later blocks replace the leading population covariances with the
/// completed scatters of the earlier blocks and drop the corresponding
/// sample-count factors. Conditional variances are block-constant and are
/// computed once per block from the closed-form variance of a Gaussian
/// quadratic form.
pub fn martingale_decompose(
    samples: [&SampleMatrix; 4],
    spec: &WishartQuartetSpec,
) -> Result<MartingaleTrace> {
    check_samples_against_spec(&samples, spec)?;
    let [_na, nb, nc, nd] = spec.ns_f64();
    let [sa, sb, sc, sd] = spec.views();
    let r_p = spec.r_p();
    let total: usize = spec.ns.iter().sum();
    let mut increments = Vec::with_capacity(total);
    let mut conditional_variances = Vec::with_capacity(total);

    // Block a: weight matrix Σ_b Σ_c Σ_d.
    let coef_a = nb * nc * nd / r_p;
    let b_a = sb.dot(&sc.dot(&sd));
    let mean_a = linalg::trace_of_pair(sa, b_a.view());
    let var_a = coef_a * coef_a * quad_form_variance(b_a.view(), sa.view());
    for x in samples[0].rows().outer_iter() {
        let q = x.dot(&b_a.dot(&x));
        increments.push(coef_a * (q - mean_a));
        conditional_variances.push(var_a);
    }
    let t_a = scatter(samples[0]);

    // Block b: weight matrix Σ_c Σ_d T_a.
    let coef_b = nc * nd / r_p;
    let b_b = sc.dot(&sd).dot(t_a.entries());
    let mean_b = linalg::trace_of_pair(sb, b_b.view());
    let var_b = coef_b * coef_b * quad_form_variance(b_b.view(), sb.view());
    for y in samples[1].rows().outer_iter() {
        let q = y.dot(&b_b.dot(&y));
        increments.push(coef_b * (q - mean_b));
        conditional_variances.push(var_b);
    }
    let t_b = scatter(samples[1]);

    // Block c: weight matrix Σ_d T_a T_b.
    let coef_c = nd / r_p;
    let t_ab = t_a.entries().dot(t_b.entries());
    let b_c = sd.dot(&t_ab);
    let mean_c = linalg::trace_of_pair(sc, b_c.view());
    let var_c = coef_c * coef_c * quad_form_variance(b_c.view(), sc.view());
    for z in samples[2].rows().outer_iter() {
        let q = z.dot(&b_c.dot(&z));
        increments.push(coef_c * (q - mean_c));
        conditional_variances.push(var_c);
    }
    let t_c = scatter(samples[2]);

    // Block d: weight matrix T_a T_b T_c.
    let coef_d = 1.0 / r_p;
    let b_d = t_ab.dot(t_c.entries());
    let mean_d = linalg::trace_of_pair(sd, b_d.view());
    let var_d = coef_d * coef_d * quad_form_variance(b_d.view(), sd.view());
    for v in samples[3].rows().outer_iter() {
        let q = v.dot(&b_d.dot(&v));
        increments.push(coef_d * (q - mean_d));
        conditional_variances.push(var_d);
    }

    let ends = [spec.ns[0], spec.ns[0] + spec.ns[1], spec.ns[0] + spec.ns[1] + spec.ns[2], total];
    Ok(MartingaleTrace { increments, conditional_variances, block_ends: ends })
}

/// The conditional variances σ_h² alone, in draw order.
pub fn conditional_variances(
    samples: [&SampleMatrix; 4],
    spec: &WishartQuartetSpec,
) -> Result<Vec<f64>> {
    Ok(martingale_decompose(samples, spec)?.conditional_variances.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covmodel::{make_cpc_pair, make_identity, make_toeplitz_ar1};
    use crate::wishart_sampling::{derive_stream_seed, sample_gaussian};
    use ndarray::{array, Array2};

    fn identity_spec(ns: [usize; 4], p: usize) -> WishartQuartetSpec {
        let i = make_identity(p).unwrap();
        WishartQuartetSpec::new(ns, [i.clone(), i.clone(), i.clone(), i]).unwrap()
    }

    fn scalar_spec(ns: [usize; 4], variances: [f64; 4]) -> WishartQuartetSpec {
        let sigmas = variances.map(|v| SpdMatrix::new(Array2::from_elem((1, 1), v)).unwrap());
        WishartQuartetSpec::new(ns, sigmas).unwrap()
    }

    #[test]
    fn spec_validates_inputs() {
        let i2 = make_identity(2).unwrap();
        let i3 = make_identity(3).unwrap();
        assert!(WishartQuartetSpec::new([1, 1, 1, 1], [i2.clone(), i2.clone(), i2.clone(), i3])
            .is_err());
        assert!(WishartQuartetSpec::new([1, 0, 1, 1], [i2.clone(), i2.clone(), i2.clone(), i2])
            .is_err());
        let spec = identity_spec([1, 2, 3, 4], 3);
        assert!((spec.r_p() - 9.0 * 24.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn statistic_m_single_draw_identity_example() {
        let spec = identity_spec([1, 1, 1, 1], 2);
        let eye = ScatterMatrix::new(Array2::<f64>::eye(2), 1, false).unwrap();
        let m = statistic_m([&eye, &eye, &eye, &eye], &spec).unwrap();
        assert_eq!(m, 0.5);
        // A scatter with the wrong degrees of freedom is rejected.
        let wrong = ScatterMatrix::new(Array2::<f64>::eye(2), 2, false).unwrap();
        assert!(statistic_m([&wrong, &eye, &eye, &eye], &spec).is_err());
    }

    #[test]
    fn expected_m_identity_example() {
        let spec = identity_spec([4, 4, 4, 4], 8);
        assert_eq!(expected_m(&spec), 2.0);
    }

    #[test]
    fn exact_variance_unit_scalar_case_is_eighty() {
        let spec = scalar_spec([1, 1, 1, 1], [1.0, 1.0, 1.0, 1.0]);
        assert_eq!(exact_variance_trace_product(&spec), 80.0);
        assert_eq!(exact_variance_m(&spec), 80.0);
    }

    #[test]
    fn exact_variance_matches_independent_scalar_product_formula() {
        // In dimension one the trace statistic is a product of independent
        // scaled chi-squares, so its variance is ∏ n_i(n_i+2)σ_i⁴ − ∏ n_i²σ_i⁴.
        let cases = [
            ([2usize, 3, 1, 2], [1.0f64, 1.0, 1.0, 1.0]),
            ([1, 1, 1, 1], [2.0, 0.5, 1.5, 3.0]),
            ([5, 2, 4, 3], [0.7, 1.3, 2.1, 0.9]),
        ];
        for (ns, vars) in cases {
            let spec = scalar_spec(ns, vars);
            let got = exact_variance_trace_product(&spec);
            let mut second = 1.0;
            let mut mean_sq = 1.0;
            for (n, v) in ns.iter().zip(vars.iter()) {
                let nf = *n as f64;
                second *= nf * (nf + 2.0) * v * v;
                mean_sq *= nf * nf * v * v;
            }
            let want = second - mean_sq;
            assert!(
                (got - want).abs() <= 1e-12 * want.abs(),
                "ns {ns:?}, vars {vars:?}: seventeen-term {got} vs product formula {want}"
            );
        }
    }

    #[test]
    fn exact_variance_scales_quadratically_in_each_sigma() {
        let base = make_toeplitz_ar1(3, 0.4).unwrap();
        let others = [
            make_toeplitz_ar1(3, 0.2).unwrap(),
            make_identity(3).unwrap(),
            make_toeplitz_ar1(3, -0.3).unwrap(),
        ];
        let ns = [3usize, 2, 4, 2];
        let c = 2.7;
        for slot in 0..4usize {
            let mut sigmas =
                [base.clone(), others[0].clone(), others[1].clone(), others[2].clone()];
            let spec = WishartQuartetSpec::new(ns, sigmas.clone()).unwrap();
            let scaled_entries = sigmas[slot].entries() * c;
            sigmas[slot] = SpdMatrix::new(scaled_entries).unwrap();
            let scaled = WishartQuartetSpec::new(ns, sigmas).unwrap();
            let v0 = exact_variance_trace_product(&spec);
            let v1 = exact_variance_trace_product(&scaled);
            assert!(
                (v1 - c * c * v0).abs() <= 1e-10 * v1.abs(),
                "slot {slot}: scaling Σ by {c} must scale the variance by {}",
                c * c
            );
            let e0 = expected_m(&spec);
            let e1 = expected_m(&scaled);
            assert!((e1 - c * e0).abs() <= 1e-12 * e1.abs());
        }
    }

    #[test]
    fn asymptotic_quartet_variance_examples() {
        let spec = identity_spec([2, 2, 2, 2], 4);
        assert_eq!(asymptotic_variance_quartet(&spec), 1.0);
        let d = SpdMatrix::new(array![[2.0, 0.0], [0.0, 1.0]]).unwrap();
        let i = make_identity(2).unwrap();
        let alternating =
            WishartQuartetSpec::new([2, 2, 2, 2], [d.clone(), i.clone(), d, i]).unwrap();
        assert!((asymptotic_variance_quartet(&alternating) - 5.0625).abs() < 1e-12);
    }

    #[test]
    fn asymptotic_cpc_variance_examples() {
        let id_pair = make_cpc_pair(&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0], None, None, None).unwrap();
        assert_eq!(asymptotic_variance_cpc(&id_pair), 2.0);
        let scaled = make_cpc_pair(&[2.0, 2.0], &[1.0, 1.0], None, None, None).unwrap();
        assert_eq!(asymptotic_variance_cpc(&scaled), 32.0);
    }

    #[test]
    fn word_cache_canonicalization_is_sound() {
        assert_eq!(canonical_rotation(&[1, 2, 0]), vec![0, 1, 2]);
        assert_eq!(canonical_rotation(&[3, 3]), vec![3, 3]);
        let spec = WishartQuartetSpec::new(
            [1, 1, 1, 1],
            [
                make_toeplitz_ar1(3, 0.5).unwrap(),
                make_toeplitz_ar1(3, 0.2).unwrap(),
                make_toeplitz_ar1(3, -0.4).unwrap(),
                make_identity(3).unwrap(),
            ],
        )
        .unwrap();
        let mut cache = WordCache::new(spec.views());
        let direct = linalg::trace_of_product(&[
            spec.views()[1],
            spec.views()[2],
            spec.views()[3],
            spec.views()[0],
        ]);
        let cached = cache.eval(&[1, 2, 3, 0]);
        assert!((cached - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        // The rotated word hits the same cache entry and the same value.
        let rotated = cache.eval(&[0, 1, 2, 3]);
        assert_eq!(cached, rotated);
        assert_eq!(cache.values.len(), 1);
    }

    #[test]
    fn martingale_telescopes_to_centered_statistic() {
        let sigmas = [
            make_toeplitz_ar1(3, 0.5).unwrap(),
            make_identity(3).unwrap(),
            make_toeplitz_ar1(3, -0.3).unwrap(),
            make_toeplitz_ar1(3, 0.1).unwrap(),
        ];
        let ns = [3usize, 2, 4, 2];
        let spec = WishartQuartetSpec::new(ns, sigmas).unwrap();
        for rep in 0..50u64 {
            let seed = derive_stream_seed(777, rep);
            let samples: Vec<_> = (0..4)
                .map(|i| {
                    sample_gaussian(ns[i], &spec.sigmas()[i], derive_stream_seed(seed, i as u64))
                        .unwrap()
                })
                .collect();
            let trace =
                martingale_decompose([&samples[0], &samples[1], &samples[2], &samples[3]], &spec)
                    .unwrap();
            let scatters: Vec<_> = samples.iter().map(scatter).collect();
            let m = statistic_m([&scatters[0], &scatters[1], &scatters[2], &scatters[3]], &spec)
                .unwrap();
            let centered = m - expected_m(&spec);
            let gap = (trace.increment_sum() - centered).abs();
            assert!(
                gap <= 1e-9 * centered.abs().max(1.0),
                "rep {rep}: increments sum to {} but M − E[M] = {centered}",
                trace.increment_sum()
            );
            assert!(trace.conditional_variances().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn conditional_variances_are_block_constant_with_identity_value() {
        let ns = [3usize, 2, 2, 2];
        let p = 2usize;
        let spec = identity_spec(ns, p);
        let samples: Vec<_> = (0..4)
            .map(|i| {
                sample_gaussian(ns[i], &spec.sigmas()[i], derive_stream_seed(5, i as u64)).unwrap()
            })
            .collect();
        let vars =
            conditional_variances([&samples[0], &samples[1], &samples[2], &samples[3]], &spec)
                .unwrap();
        assert_eq!(vars.len(), 9);
        // Block a: (n_b² n_c² n_d² / r_p²) · 2p, independent of the draws.
        let r_p = spec.r_p();
        let expect_a = (2.0f64 * 2.0 * 2.0).powi(2) / (r_p * r_p) * 2.0 * p as f64;
        for h in 0..3 {
            assert!(
                (vars[h] - expect_a).abs() <= 1e-12 * expect_a,
                "block a draw {h}: {} vs {expect_a}",
                vars[h]
            );
        }
        for block in 1..4usize {
            let trace =
                martingale_decompose([&samples[0], &samples[1], &samples[2], &samples[3]], &spec)
                    .unwrap();
            let ends = trace.block_ends();
            let start = ends[block - 1];
            let end = ends[block];
            let first = vars[start];
            assert!(vars[start..end].iter().all(|&v| v == first));
        }
    }

    #[test]
    fn martingale_rejects_mismatched_samples() {
        let spec = identity_spec([2, 2, 2, 2], 2);
        let good = sample_gaussian(2, &make_identity(2).unwrap(), 1).unwrap();
        let short = sample_gaussian(3, &make_identity(2).unwrap(), 2).unwrap();
        assert!(martingale_decompose([&good, &good, &good, &short], &spec).is_err());
        let wrong_dim = sample_gaussian(2, &make_identity(3).unwrap(), 3).unwrap();
        assert!(martingale_decompose([&good, &wrong_dim, &good, &good], &spec).is_err());
    }

    #[test]
    fn martingale_csv_layout() {
        let spec = identity_spec([2, 1, 1, 1], 2);
        let samples: Vec<_> = (0..4)
            .map(|i| {
                sample_gaussian(spec.ns()[i], &spec.sigmas()[i], derive_stream_seed(9, i as u64))
                    .unwrap()
            })
            .collect();
        let trace =
            martingale_decompose([&samples[0], &samples[1], &samples[2], &samples[3]], &spec)
                .unwrap();
        assert_eq!(trace.block_of(1), Some('a'));
        assert_eq!(trace.block_of(2), Some('a'));
        assert_eq!(trace.block_of(3), Some('b'));
        assert_eq!(trace.block_of(5), Some('d'));
        assert_eq!(trace.block_of(6), None);
        let mut buf = Vec::new();
        trace.to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "h,block,increment,conditional_variance");
        assert_eq!(text.lines().count(), 6);
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[0], "1");
        assert_eq!(row[1], "a");
        let parsed: f64 = row[2].parse().unwrap();
        assert_eq!(parsed, trace.increments()[0]);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(20))]

            #[test]
            fn variance_is_positive_and_equivariant(
                rho in -0.8f64..0.8,
                scale in 0.5f64..3.0,
                na in 1usize..5,
                nb in 1usize..5,
            ) {
                let sigma = make_toeplitz_ar1(2, rho).unwrap();
                let i = make_identity(2).unwrap();
                let spec = WishartQuartetSpec::new(
                    [na, nb, 2, 3],
                    [sigma.clone(), i.clone(), sigma.clone(), i.clone()],
                ).unwrap();
                let v = exact_variance_trace_product(&spec);
                prop_assert!(v > 0.0);
                let scaled_sigma = SpdMatrix::new(sigma.entries() * scale).unwrap();
                let scaled = WishartQuartetSpec::new(
                    [na, nb, 2, 3],
                    [scaled_sigma.clone(), i.clone(), sigma, i],
                ).unwrap();
                let vs = exact_variance_trace_product(&scaled);
                prop_assert!((vs - scale * scale * v).abs() <= 1e-9 * vs.abs());
            }
        }
    }
}
