//! Exact running-time laws for MTF.
//!
//! The FMMR running time from start state `z` is a sum of independent
//! geometrics `Geom(1 - y^+_r)`, `r = 0..n-2`, where `y_r` is the weight of
//! the record at position `r` of `z`. Each `Geom(p)` lives on `{1, 2, ...}`
//! with mass `p (1 - p)^{k-1}`, so a sum of `m` of them is at least `m`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mtf::{stationary_prob, Permutation, WeightFamily, WeightVector};
use crate::numeric::{neumaier_sum, prefix_sums, suffix_sums};

/// Default tail mass at which pmfs are truncated.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Largest tail mass tolerated by [`stochastic_leq`].
pub const DOMINANCE_TAIL_TOL: f64 = 1e-10;

/// Slack allowed when comparing two cdfs evaluated by different routes.
pub const CDF_COMPARE_TOL: f64 = 1e-12;

/// Horizon cap for automatic truncation.
pub const MAX_HORIZON: usize = 50_000_000;

/// Largest list length for which the CFTP mixture law is enumerated.
pub const MAX_MIXTURE_N: usize = 6;

/// Law of a sum of independent `Geom(p_r)` variables on `{1, 2, ...}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeomConvolution {
    params: Vec<f64>,
}

impl GeomConvolution {
    pub fn new(params: Vec<f64>) -> Result<Self> {
        if let Some(p) = params.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::InvalidInput(format!("geometric parameter {p} not in (0, 1]")));
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Number of terms, which is also the smallest value in the support.
    pub fn terms(&self) -> usize {
        self.params.len()
    }

    pub fn mean(&self) -> f64 {
        conv_mean(self)
    }

    pub fn var(&self) -> f64 {
        conv_var(self)
    }

    /// `P(T = k)` for `k = 0..=horizon`.
    pub fn pmf_prefix(&self, horizon: usize) -> Vec<f64> {
        self.recurse(horizon, |k| if k == 0 { 1.0 } else { 0.0 }, 0.0)
    }

    /// `P(T <= k)` for `k = 0..=horizon`.
    pub fn cdf_prefix(&self, horizon: usize) -> Vec<f64> {
        self.recurse(horizon, |_| 1.0, 0.0)
    }

    /// `P(T > k)` for `k = 0..=horizon`, computed without cancellation.
    pub fn survival_prefix(&self, horizon: usize) -> Vec<f64> {
        self.recurse(horizon, |_| 0.0, 1.0)
    }

    /// Adding one `Geom(p)` term maps any of pmf, cdf or survival `f` to
    /// `g(k) = p f(k-1) + (1-p) g(k-1)`; only the value at negative `k`
    /// (`below`) differs between the three.
    fn recurse(&self, horizon: usize, base: impl Fn(usize) -> f64, below: f64) -> Vec<f64> {
        let mut f: Vec<f64> = (0..=horizon).map(base).collect();
        for &p in &self.params {
            let q = 1.0 - p;
            let mut g = vec![0.0; horizon + 1];
            let mut prev_g = below;
            let mut prev_f = below;
            for k in 0..=horizon {
                g[k] = p * prev_f + q * prev_g;
                prev_g = g[k];
                prev_f = f[k];
            }
            f = g;
        }
        f
    }

    pub fn pmf(&self, k: usize) -> f64 {
        conv_pmf(self, k)
    }

    pub fn cdf(&self, k: usize) -> f64 {
        conv_cdf(self, k)
    }

    /// Pmf truncated at the first horizon whose tail mass is below `tol`
    /// (or at `max_horizon`, whichever comes first).
    pub fn truncated(&self, tol: f64, max_horizon: usize) -> TruncatedPmf {
        let guess = self.mean() + 12.0 * self.var().sqrt();
        let mut horizon = (guess.ceil() as usize).max(self.terms() + 1).min(max_horizon);
        loop {
            let surv = self.survival_prefix(horizon);
            let tail = surv[horizon];
            if tail < tol || horizon >= max_horizon {
                return TruncatedPmf { pmf: self.pmf_prefix(horizon), tail };
            }
            horizon = (horizon * 2).min(max_horizon);
        }
    }

    pub fn summary(&self, tol: f64) -> LawSummary {
        let t = self.truncated(tol, MAX_HORIZON);
        LawSummary {
            law_params: self.params.clone(),
            mean: self.mean(),
            var: self.var(),
            pmf_prefix: t.pmf,
            truncation_tail: t.tail,
        }
    }
}

/// `P(T = k)`.
pub fn conv_pmf(d: &GeomConvolution, k: usize) -> f64 {
    d.pmf_prefix(k)[k]
}

/// `P(T <= k)`.
pub fn conv_cdf(d: &GeomConvolution, k: usize) -> f64 {
    d.cdf_prefix(k)[k]
}

/// `sum 1 / p_r`.
pub fn conv_mean(d: &GeomConvolution) -> f64 {
    neumaier_sum(d.params.iter().map(|p| 1.0 / p))
}

/// `sum (1 - p_r) / p_r^2`.
pub fn conv_var(d: &GeomConvolution) -> f64 {
    neumaier_sum(d.params.iter().map(|p| (1.0 - p) / (p * p)))
}

/// A pmf on `{0..=horizon}` plus the mass beyond it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncatedPmf {
    pub pmf: Vec<f64>,
    pub tail: f64,
}

impl TruncatedPmf {
    pub fn horizon(&self) -> usize {
        self.pmf.len().saturating_sub(1)
    }

    pub fn cdf_prefix(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect()
    }

    pub fn mean_lower_bound(&self) -> f64 {
        neumaier_sum(self.pmf.iter().enumerate().map(|(k, p)| k as f64 * p))
    }
}

/// JSON shape of an exact law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LawSummary {
    pub law_params: Vec<f64>,
    pub mean: f64,
    pub var: f64,
    pub pmf_prefix: Vec<f64>,
    pub truncation_tail: f64,
}

/// FMMR running-time law from start state `z`: `Geom(1 - y^+_r)`,
/// `r = 0..n-2`.
pub fn fmmr_runtime_law(w: &WeightVector, z: &Permutation) -> Result<GeomConvolution> {
    if w.len() != z.len() {
        return Err(Error::DimensionMismatch { expected: w.len(), got: z.len() });
    }
    let y: Vec<f64> = z.labels().iter().map(|&l| w.of(l)).collect();
    let tails = suffix_sums(&y);
    let total = tails[0];
    let n = y.len();
    let params = (0..n.saturating_sub(1)).map(|r| if r == 0 { 1.0 } else { (tails[r] / total).min(1.0) }).collect();
    GeomConvolution::new(params)
}

/// Law from the reversal, `Geom(w^+_r)`, `r = 2..n`, in O(n).
pub fn rev_runtime_law(w: &WeightVector) -> GeomConvolution {
    let pre = w.prefix_sums();
    let total = pre[w.len()];
    let params = (2..=w.len()).map(|r| (pre[r] / total).min(1.0)).collect();
    GeomConvolution { params }
}

/// Law from the identity, `Geom(1 - w^+_r)`, `r = 0..n-2`, in O(n).
pub fn id_runtime_law(w: &WeightVector) -> GeomConvolution {
    let tails = w.tail_sums();
    let total = tails[0];
    let params =
        (0..w.len().saturating_sub(1)).map(|r| if r == 0 { 1.0 } else { (tails[r] / total).min(1.0) }).collect();
    GeomConvolution { params }
}

/// CFTP running-time law: the stationary mixture over start states of the
/// FMMR laws, on `{0..=horizon}` with the leftover tail.
pub fn cftp_runtime_law(w: &WeightVector, horizon: usize) -> Result<TruncatedPmf> {
    let n = w.len();
    if n > MAX_MIXTURE_N {
        return Err(Error::Unsupported(format!("mixture over S_{n} (limit n <= {MAX_MIXTURE_N})")));
    }
    let mut pmf = vec![0.0; horizon + 1];
    let mut tail = 0.0;
    for z in Permutation::all(n) {
        let pz = stationary_prob(w, &z)?;
        let law = fmmr_runtime_law(w, &z)?;
        for (acc, p) in pmf.iter_mut().zip(law.pmf_prefix(horizon)) {
            *acc += pz * p;
        }
        tail += pz * law.survival_prefix(horizon)[horizon];
    }
    Ok(TruncatedPmf { pmf, tail })
}

/// Anything with a cdf and a tail on a finite horizon.
pub trait DiscreteLaw {
    fn cdf_on(&self, horizon: usize) -> Vec<f64>;
    fn tail_beyond(&self, horizon: usize) -> f64;
}

impl DiscreteLaw for GeomConvolution {
    fn cdf_on(&self, horizon: usize) -> Vec<f64> {
        self.cdf_prefix(horizon)
    }

    fn tail_beyond(&self, horizon: usize) -> f64 {
        self.survival_prefix(horizon)[horizon]
    }
}

impl DiscreteLaw for TruncatedPmf {
    fn cdf_on(&self, horizon: usize) -> Vec<f64> {
        let mut c = self.cdf_prefix();
        let last = c.last().copied().unwrap_or(0.0);
        c.resize(horizon + 1, last);
        c
    }

    fn tail_beyond(&self, horizon: usize) -> f64 {
        if horizon >= self.horizon() {
            self.tail
        } else {
            self.tail + self.pmf[horizon + 1..].iter().sum::<f64>()
        }
    }
}

/// `a <=_st b`: `cdf_a(k) >= cdf_b(k)` for every `k <= horizon`. Both tails
/// beyond the horizon must be below [`DOMINANCE_TAIL_TOL`].
pub fn stochastic_leq<A: DiscreteLaw + ?Sized, B: DiscreteLaw + ?Sized>(a: &A, b: &B, horizon: usize) -> Result<bool> {
    check_horizon(a, b, horizon)?;
    let (ca, cb) = (a.cdf_on(horizon), b.cdf_on(horizon));
    Ok(ca.iter().zip(&cb).all(|(x, y)| *x >= *y - CDF_COMPARE_TOL))
}

/// `max_k (cdf_a(k) - cdf_b(k))` over `k <= horizon`.
pub fn max_cdf_gap<A: DiscreteLaw + ?Sized, B: DiscreteLaw + ?Sized>(a: &A, b: &B, horizon: usize) -> Result<f64> {
    check_horizon(a, b, horizon)?;
    let (ca, cb) = (a.cdf_on(horizon), b.cdf_on(horizon));
    Ok(ca.iter().zip(&cb).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max))
}

fn check_horizon<A: DiscreteLaw + ?Sized, B: DiscreteLaw + ?Sized>(a: &A, b: &B, horizon: usize) -> Result<()> {
    let (ta, tb) = (a.tail_beyond(horizon), b.tail_beyond(horizon));
    if ta >= DOMINANCE_TAIL_TOL || tb >= DOMINANCE_TAIL_TOL {
        return Err(Error::Inconclusive(format!("tail mass beyond horizon {horizon} is {ta:e} / {tb:e}")));
    }
    Ok(())
}

/// Smallest horizon at which every law's tail is below `tol`.
pub fn common_horizon(laws: &[&GeomConvolution], tol: f64) -> usize {
    laws.iter().map(|l| l.truncated(tol, MAX_HORIZON).horizon()).max().unwrap_or(0)
}

/// Whether `w` majorizes `other`: every prefix sum of `w` is at least the
/// matching prefix sum of `other`.
pub fn majorizes(w: &WeightVector, other: &WeightVector) -> Result<bool> {
    if w.len() != other.len() {
        return Err(Error::DimensionMismatch { expected: w.len(), got: other.len() });
    }
    let (a, b) = (prefix_sums(w.as_slice()), prefix_sums(other.as_slice()));
    Ok(a.iter().zip(&b).all(|(x, y)| *x >= *y - 1e-12))
}

/// Number of steps `k_n` such that `T_rev / k_n -> 1` for each family.
pub fn rate_constant(family: WeightFamily, n: f64) -> Result<f64> {
    family.validate()?;
    let nf = n;
    Ok(match family {
        WeightFamily::Uniform => nf * nf.ln(),
        WeightFamily::Zipf | WeightFamily::Geometric { .. } => nf,
        WeightFamily::Gzl { alpha: 1.0 } => {
            return Err(Error::InvalidInput("gzl with alpha = 1 is zipf; use the zipf family".into()))
        }
        WeightFamily::Gzl { alpha } if alpha < 1.0 => nf / alpha,
        WeightFamily::Gzl { .. } => nf,
        WeightFamily::Power { s } => nf * nf.ln() / (s + 1.0),
    })
}

/// Prefix sums `w^+_r` and their complements `1 - w^+_r` for `r = 0..=n`,
/// computed straight from the family so that sizes whose smallest weights
/// underflow (geometric tails at large `n`) still give exact sums.
pub fn family_sums(family: WeightFamily, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    family.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    if let WeightFamily::Geometric { theta } = family {
        if theta <= 0.5 {
            // 1 - w^+_r = theta^r for r < n.
            let ln = theta.ln();
            let mut pre: Vec<f64> = (0..=n).map(|r| -(r as f64 * ln).exp_m1()).collect();
            let mut tail: Vec<f64> = (0..=n).map(|r| (r as f64 * ln).exp()).collect();
            pre[n] = 1.0;
            tail[n] = 0.0;
            return Ok((pre, tail));
        }
    }
    let raw: Vec<f64> = match family {
        WeightFamily::Uniform => vec![1.0; n],
        WeightFamily::Zipf => (1..=n).map(|i| 1.0 / i as f64).collect(),
        WeightFamily::Gzl { alpha } => (1..=n).map(|i| (i as f64).powf(-alpha)).collect(),
        WeightFamily::Power { s } => (1..=n).map(|i| ((n - i + 1) as f64).powf(s)).collect(),
        WeightFamily::Geometric { .. } => return Ok(sums_of(family.weights(n)?.as_slice())),
    };
    let total = neumaier_sum(raw.iter().copied());
    let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
    Ok(sums_of(&w))
}

fn sums_of(w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (pre, tail) = (prefix_sums(w), suffix_sums(w));
    let total = pre[w.len()];
    (pre.iter().map(|x| x / total).collect(), tail.iter().map(|x| x / total).collect())
}

/// `E[T_rev] = sum_{r=2}^n 1 / w^+_r` and `E[T_id] = sum_{r=0}^{n-2} 1 / (1 - w^+_r)`
/// for a family, in one pass. `E[T_id]` may be infinite in floating point.
pub fn family_means(family: WeightFamily, n: usize) -> Result<(f64, f64)> {
    let (pre, tail) = family_sums(family, n)?;
    let mean_rev = neumaier_sum((2..=n).map(|r| 1.0 / pre[r]));
    let mean_id = if n < 2 { 0.0 } else { neumaier_sum((0..=n - 2).map(|r| 1.0 / tail[r])) };
    Ok((mean_rev, mean_id))
}

/// Growth shapes of the three running-time columns, for display. The CFTP
/// and worst-start FMMR columns carry unspecified constants for the power
/// and geometric families and are reported as shapes only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateShapes {
    pub cftp: String,
    pub fmmr_worst: String,
    pub fmmr_best: String,
}

pub fn rate_shapes(family: WeightFamily) -> Result<RateShapes> {
    family.validate()?;
    let (slow, best) = match family {
        WeightFamily::Uniform => ("n ln n".to_string(), "n ln n".to_string()),
        WeightFamily::Zipf => ("n (ln n)^2".to_string(), "n".to_string()),
        WeightFamily::Gzl { alpha: 1.0 } => {
            return Err(Error::InvalidInput("gzl with alpha = 1 is zipf; use the zipf family".into()))
        }
        WeightFamily::Gzl { alpha } if alpha < 1.0 => (format!("n ln n / {}", 1.0 - alpha), format!("n / {alpha}")),
        WeightFamily::Gzl { alpha } => (format!("zeta({alpha}) n^{alpha} ln n"), "n".to_string()),
        WeightFamily::Power { s } => (format!("c n^{}", s + 1.0), format!("n ln n / {}", s + 1.0)),
        WeightFamily::Geometric { theta } => (format!("c {theta}^(-n)"), "n".to_string()),
    };
    Ok(RateShapes { cftp: slow.clone(), fmmr_worst: slow, fmmr_best: best })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(v: &[f64]) -> WeightVector {
        WeightVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn single_geometric_pmf() {
        let d = GeomConvolution::new(vec![0.3]).unwrap();
        for k in 1..20 {
            let expect = 0.3 * 0.7f64.powi(k as i32 - 1);
            assert!((d.pmf(k) - expect).abs() < 1e-15);
        }
        assert_eq!(d.pmf(0), 0.0);
    }

    #[test]
    fn all_ones_is_point_mass() {
        let d = GeomConvolution::new(vec![1.0; 5]).unwrap();
        let pmf = d.pmf_prefix(8);
        assert_eq!(pmf, vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(d.mean(), 5.0);
        assert_eq!(d.var(), 0.0);
    }

    #[test]
    fn hand_convolution() {
        let d = GeomConvolution::new(vec![5.0 / 6.0, 1.0]).unwrap();
        assert!((d.pmf(2) - 5.0 / 6.0).abs() < 1e-15);
        assert!((d.pmf(3) - 5.0 / 36.0).abs() < 1e-15);
    }

    #[test]
    fn survival_complements_cdf() {
        let d = GeomConvolution::new(vec![0.2, 0.5, 0.5, 0.9]).unwrap();
        let c = d.cdf_prefix(60);
        let s = d.survival_prefix(60);
        for (a, b) in c.iter().zip(&s) {
            assert!((a + b - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn family_means_match_weight_vectors() {
        for fam in [
            WeightFamily::Uniform,
            WeightFamily::Zipf,
            WeightFamily::Gzl { alpha: 0.5 },
            WeightFamily::Power { s: 1.0 },
            WeightFamily::Geometric { theta: 0.5 },
            WeightFamily::Geometric { theta: 0.8 },
        ] {
            let w = fam.weights(30).unwrap();
            let (rev, id) = family_means(fam, 30).unwrap();
            assert!((rev - rev_runtime_law(&w).mean()).abs() < 1e-9 * rev, "{fam}");
            assert!((id - id_runtime_law(&w).mean()).abs() < 1e-9 * id, "{fam}");
        }
    }

    #[test]
    fn geometric_means_survive_underflow() {
        let (rev, id) = family_means(WeightFamily::Geometric { theta: 0.5 }, 100_000).unwrap();
        assert!(rev.is_finite() && (rev / 1e5 - 1.0).abs() < 1e-3);
        assert!(id.is_infinite());
    }

    #[test]
    fn invalid_parameters() {
        assert!(GeomConvolution::new(vec![0.0]).is_err());
        assert!(GeomConvolution::new(vec![1.5]).is_err());
        assert!(GeomConvolution::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn runtime_law_params() {
        let wv = w(&[0.5, 1.0 / 3.0, 1.0 / 6.0]);
        let rev = fmmr_runtime_law(&wv, &Permutation::reversal(3)).unwrap();
        let mut p = rev.params().to_vec();
        p.sort_by(f64::total_cmp);
        assert!((p[0] - 5.0 / 6.0).abs() < 1e-15 && p[1] == 1.0);
        let id = fmmr_runtime_law(&wv, &Permutation::identity(3)).unwrap();
        assert_eq!(id.params()[0], 1.0);
        assert!((id.params()[1] - 0.5).abs() < 1e-15);
        assert!(fmmr_runtime_law(&wv, &Permutation::identity(4)).is_err());
    }

    #[test]
    fn fast_extreme_laws_agree_with_general() {
        let wv = w(&[0.4, 0.3, 0.2, 0.1]);
        let a = rev_runtime_law(&wv);
        let b = fmmr_runtime_law(&wv, &Permutation::reversal(4)).unwrap();
        assert!((a.mean() - b.mean()).abs() < 1e-12);
        let a = id_runtime_law(&wv);
        let b = fmmr_runtime_law(&wv, &Permutation::identity(4)).unwrap();
        assert!((a.mean() - b.mean()).abs() < 1e-12);
    }

    #[test]
    fn uniform_rev_mean() {
        let d = rev_runtime_law(&WeightVector::uniform(3));
        assert!((d.mean() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn geometric_id_mean_blows_up() {
        let wv = crate::mtf::weight_family(WeightFamily::Geometric { theta: 0.5 }, 20).unwrap();
        assert!(id_runtime_law(&wv).mean() > 1e5);
    }

    #[test]
    fn dominance_basics() {
        let fast = GeomConvolution::new(vec![0.9]).unwrap();
        let slow = GeomConvolution::new(vec![0.1]).unwrap();
        assert!(stochastic_leq(&fast, &slow, 400).unwrap());
        assert!(!stochastic_leq(&slow, &fast, 400).unwrap());
        assert!(stochastic_leq(&slow, &slow, 400).unwrap());
        assert!(matches!(stochastic_leq(&fast, &slow, 10), Err(Error::Inconclusive(_))));
    }

    #[test]
    fn majorization_examples() {
        let a = w(&[0.5, 0.3, 0.2]);
        let b = w(&[0.4, 0.35, 0.25]);
        assert!(majorizes(&a, &b).unwrap());
        assert!(!majorizes(&b, &a).unwrap());
        assert!(majorizes(&a, &a).unwrap());
        let extreme = w(&[0.5, 0.499, 0.001]);
        assert!(majorizes(&extreme, &WeightVector::uniform(3)).unwrap());
        assert!(majorizes(&a, &WeightVector::uniform(4)).is_err());
    }

    #[test]
    fn rate_constants() {
        assert_eq!(rate_constant(WeightFamily::Zipf, 1e4).unwrap(), 1e4);
        let e2 = std::f64::consts::E.powi(2);
        let k = rate_constant(WeightFamily::Power { s: 1.0 }, e2).unwrap();
        assert!((k - e2).abs() < 1e-12);
        assert_eq!(rate_constant(WeightFamily::Gzl { alpha: 0.5 }, 100.0).unwrap(), 200.0);
        assert!(rate_constant(WeightFamily::Gzl { alpha: 1.0 }, 100.0).is_err());
    }

    #[test]
    fn truncation_reaches_tolerance() {
        let d = GeomConvolution::new(vec![0.05, 0.5, 1.0]).unwrap();
        let t = d.truncated(1e-12, MAX_HORIZON);
        assert!(t.tail < 1e-12);
        let s: f64 = t.pmf.iter().sum();
        assert!((s + t.tail - 1.0).abs() < 1e-12);
    }
}
