//! The move-to-front self-organizing list chain.
//!
//! States are permutations of the record labels `1..=n`, listed front to
//! back. Requesting record `i` (probability `w_i`) moves it to the front.
//! The stationary law is the law of drawing all records without
//! replacement with probabilities proportional to the weights.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainModel, FiniteInnovations, FiniteStates, OrderedChain};
use crate::error::{Error, Result};
use crate::numeric::{neumaier_sum, prefix_sums, suffix_sums};
use crate::sampler::{fmmr_set, Coupling, SamplerConfig, SetShape, TargetSet};

/// Largest list length for which the state space is enumerated.
pub const MAX_ENUMERABLE_N: usize = 8;

/// A list order: `labels[0]` is the front record.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Permutation(Vec<u32>);

impl Permutation {
    pub fn new(labels: Vec<u32>) -> Result<Self> {
        let n = labels.len();
        let mut seen = vec![false; n];
        for &l in &labels {
            let idx = (l as usize).wrapping_sub(1);
            if idx >= n || seen[idx] {
                return Err(Error::InvalidInput(format!("{labels:?} is not a permutation of 1..={n}")));
            }
            seen[idx] = true;
        }
        Ok(Self(labels))
    }

    /// `(1, 2, ..., n)`, the minimum of the weak order.
    pub fn identity(n: usize) -> Self {
        Self((1..=n as u32).collect())
    }

    /// `(n, n-1, ..., 1)`, the maximum of the weak order.
    pub fn reversal(n: usize) -> Self {
        Self((1..=n as u32).rev().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.0
    }

    pub fn front(&self) -> u32 {
        self.0[0]
    }

    /// `positions()[l - 1]` is the 0-based position of label `l`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.len()];
        for (r, &l) in self.0.iter().enumerate() {
            pos[l as usize - 1] = r;
        }
        pos
    }

    /// Every permutation of `1..=n` in lexicographic order.
    pub fn all(n: usize) -> Vec<Self> {
        let mut cur: Vec<u32> = (1..=n as u32).collect();
        let mut out = vec![Self(cur.clone())];
        while next_permutation(&mut cur) {
            out.push(Self(cur.clone()));
        }
        out
    }

    /// Number of pairs out of natural order.
    pub fn inversions(&self) -> usize {
        let mut count = 0;
        for a in 0..self.len() {
            for b in a + 1..self.len() {
                if self.0[a] > self.0[b] {
                    count += 1;
                }
            }
        }
        count
    }
}

fn next_permutation(v: &mut [u32]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

impl TryFrom<Vec<u32>> for Permutation {
    type Error = Error;

    fn try_from(labels: Vec<u32>) -> Result<Self> {
        Self::new(labels)
    }
}

impl From<Permutation> for Vec<u32> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (r, l) in self.0.iter().enumerate() {
            if r > 0 {
                f.write_str("-")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for Permutation {
    type Err = Error;

    /// Accepts labels separated by `-`, `,` or spaces, optionally wrapped in
    /// parentheses: `2-1-3`, `(2,1,3)`.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let labels = inner
            .split(|c: char| c == '-' || c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<u32>().map_err(|_| Error::InvalidInput(format!("bad label {t:?} in {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(labels)
    }
}

/// Request probabilities `w_1 >= ... >= w_n > 0` summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector {
    w: Vec<f64>,
}

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidInput("weight vector is empty".into()));
        }
        if w.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(Error::InvalidInput("weights must be finite and positive".into()));
        }
        if w.windows(2).any(|p| p[0] < p[1]) {
            return Err(Error::InvalidInput("weights must be non-increasing".into()));
        }
        let total = neumaier_sum(w.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { w })
    }

    /// Normalizes positive, non-increasing weights.
    pub fn from_unnormalized(raw: Vec<f64>) -> Result<Self> {
        if raw.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(Error::InvalidInput("weights must be finite and positive".into()));
        }
        let total = neumaier_sum(raw.iter().copied());
        Self::new(raw.into_iter().map(|x| x / total).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self { w: vec![1.0 / n as f64; n] }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    /// Weight of record `label` (1-based).
    pub fn of(&self, label: u32) -> f64 {
        self.w[label as usize - 1]
    }

    /// `w^+_r` for `r = 0..=n`.
    pub fn prefix_sums(&self) -> Vec<f64> {
        prefix_sums(&self.w)
    }

    /// `1 - w^+_r` for `r = 0..=n`, computed as tail sums.
    pub fn tail_sums(&self) -> Vec<f64> {
        suffix_sums(&self.w)
    }

    /// The first `k` weights renormalized.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.len() {
            return Err(Error::InvalidInput(format!("cannot truncate {} weights to {k}", self.len())));
        }
        Self::from_unnormalized(self.w[..k].to_vec())
    }
}

impl<'de> Deserialize<'de> for WeightVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            w: Vec<f64>,
        }
        let raw = Raw::deserialize(d)?;
        WeightVector::new(raw.w).map_err(serde::de::Error::custom)
    }
}

fn check_dims(w: &WeightVector, z: &Permutation) -> Result<()> {
    if w.len() != z.len() {
        return Err(Error::DimensionMismatch { expected: w.len(), got: z.len() });
    }
    Ok(())
}

/// `y_r = w_{z_r}` along the list.
fn list_weights(w: &WeightVector, z: &Permutation) -> Vec<f64> {
    z.labels().iter().map(|&l| w.of(l)).collect()
}

/// Stationary probability `prod_r y_r / (1 - y^+_{r-1})`.
pub fn stationary_prob(w: &WeightVector, z: &Permutation) -> Result<f64> {
    check_dims(w, z)?;
    let y = list_weights(w, z);
    let tails = suffix_sums(&y);
    Ok(y.iter().zip(&tails).map(|(yr, t)| yr / t).product())
}

/// Natural log of [`stationary_prob`], usable at list lengths where the
/// probability itself underflows.
pub fn ln_stationary_prob(w: &WeightVector, z: &Permutation) -> Result<f64> {
    check_dims(w, z)?;
    let y = list_weights(w, z);
    let tails = suffix_sums(&y);
    Ok(neumaier_sum(y.iter().zip(&tails).map(|(yr, t)| (yr / t).ln())))
}

/// Requests record `label`: it moves to the front, the others keep their
/// relative order.
pub fn move_to_front(z: &Permutation, label: u32) -> Result<Permutation> {
    if label == 0 || label as usize > z.len() {
        return Err(Error::InvalidInput(format!("label {label} out of range 1..={}", z.len())));
    }
    Ok(move_unchecked(z, label))
}

fn move_unchecked(z: &Permutation, label: u32) -> Permutation {
    let mut labels = Vec::with_capacity(z.len());
    labels.push(label);
    labels.extend(z.labels().iter().copied().filter(|&l| l != label));
    Permutation(labels)
}

/// The predecessors of `y` under the reversed chain with their
/// probabilities. With `i = front(y)`, the predecessors are `y` with `i`
/// reinserted at position `r` (the first entry, `r = 1`, is `y` itself).
pub fn mtf_reverse_probs(w: &WeightVector, y: &Permutation) -> Result<Vec<(Permutation, f64)>> {
    check_dims(w, y)?;
    let probs = reverse_position_probs(w, y);
    Ok(probs.into_iter().enumerate().map(|(r, p)| (reinsert_front(y, r), p)).collect())
}

/// Probability that the front record of `y` came from 0-based position `r`.
///
/// Writing `T_r = w_i + (weight of the records behind position r, excluding i)`,
/// the mass at `r` is `(w_i / T_r) * prod_{j < r} (1 - w_i / T_j)`.
fn reverse_position_probs(w: &WeightVector, y: &Permutation) -> Vec<f64> {
    let wi = w.of(y.front());
    let rest: Vec<f64> = y.labels()[1..].iter().map(|&l| w.of(l)).collect();
    let behind = suffix_sums(&rest);
    let mut survive = 1.0;
    let mut out = Vec::with_capacity(y.len());
    for s in behind {
        let t = wi + s;
        out.push(survive * wi / t);
        survive *= s / t;
    }
    out
}

fn reinsert_front(y: &Permutation, r: usize) -> Permutation {
    let mut labels = y.labels()[1..].to_vec();
    labels.insert(r, y.front());
    Permutation(labels)
}

/// One step of the time-reversed MTF chain from `y`, in O(n).
pub fn mtf_reverse_step<R: Rng + ?Sized>(w: &WeightVector, y: &Permutation, rng: &mut R) -> Permutation {
    if y.len() <= 1 {
        return y.clone();
    }
    let probs = reverse_position_probs(w, y);
    let mut v = rng.random::<f64>();
    let last = probs.len() - 1;
    let r = probs
        .iter()
        .position(|&p| {
            if v < p {
                true
            } else {
                v -= p;
                false
            }
        })
        .unwrap_or(last);
    reinsert_front(y, r)
}

/// The request that moved `prev` to `next`: necessarily the front of `next`.
pub fn mtf_impute(prev: &Permutation, next: &Permutation) -> Result<u32> {
    if prev.len() != next.len() {
        return Err(Error::DimensionMismatch { expected: prev.len(), got: next.len() });
    }
    if next.is_empty() {
        return Err(Error::Imputation("empty list".into()));
    }
    let i = next.front();
    if move_unchecked(prev, i) != *next {
        return Err(Error::Imputation(format!("{prev} -> {next} is not one move-to-front step")));
    }
    Ok(i)
}

/// Weak order: the inversion set of `a` is contained in that of `b`.
pub fn weak_bruhat_leq(a: &Permutation, b: &Permutation) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let (pa, pb) = (a.positions(), b.positions());
    let n = a.len();
    for lo in 0..n {
        for hi in lo + 1..n {
            if pa[hi] < pa[lo] && pb[hi] > pb[lo] {
                return false;
            }
        }
    }
    true
}

/// Strong Bruhat order via rank-matrix dominance: `a <= b` iff for every
/// prefix length and every threshold, `b`'s prefix holds at least as many
/// labels at or above the threshold as `a`'s.
pub fn bruhat_leq(a: &Permutation, b: &Permutation) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let n = a.len();
    // counts[t] = #{labels >= t + 1 in the prefix so far}
    let mut ca = vec![0i64; n + 1];
    let mut cb = vec![0i64; n + 1];
    for r in 0..n {
        ca[..a.labels()[r] as usize].iter_mut().for_each(|c| *c += 1);
        cb[..b.labels()[r] as usize].iter_mut().for_each(|c| *c += 1);
        if ca.iter().zip(&cb).any(|(x, y)| x > y) {
            return false;
        }
    }
    true
}

/// Standard weight families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum WeightFamily {
    Uniform,
    Zipf,
    /// Generalized Zipf `w_i ∝ i^{-alpha}`.
    Gzl {
        alpha: f64,
    },
    /// `w_i ∝ (n - i + 1)^s`.
    Power {
        s: f64,
    },
    /// `w_i = (1 - theta) theta^{i-1}` for `i < n`, `w_n = theta^{n-1}`.
    Geometric {
        theta: f64,
    },
}

impl WeightFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Gzl { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::InvalidInput(format!("gzl needs alpha > 0, got {alpha}")))
            }
            Self::Power { s } if !(s > 0.0 && s.is_finite()) => {
                Err(Error::InvalidInput(format!("power needs s > 0, got {s}")))
            }
            Self::Geometric { theta } if !(theta > 0.0 && theta < 1.0) => {
                Err(Error::InvalidInput(format!("geometric needs 0 < theta < 1, got {theta}")))
            }
            _ => Ok(()),
        }
    }

    pub fn weights(&self, n: usize) -> Result<WeightVector> {
        weight_family(*self, n)
    }
}

impl fmt::Display for WeightFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform => write!(f, "uniform"),
            Self::Zipf => write!(f, "zipf"),
            Self::Gzl { alpha } => write!(f, "gzl:{alpha}"),
            Self::Power { s } => write!(f, "power:{s}"),
            Self::Geometric { theta } => write!(f, "geometric:{theta}"),
        }
    }
}

impl FromStr for WeightFamily {
    type Err = Error;

    /// `uniform`, `zipf`, `gzl:<alpha>`, `power:<s>`, `geometric:<theta>`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((a, b)) => (a.trim(), Some(b.trim())),
            None => (s.trim(), None),
        };
        let num = |p: Option<&str>| -> Result<f64> {
            p.ok_or_else(|| Error::InvalidInput(format!("{name} needs a parameter")))?
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad parameter in {s:?}")))
        };
        let fam = match name.to_ascii_lowercase().as_str() {
            "uniform" => Self::Uniform,
            "zipf" => Self::Zipf,
            "gzl" => Self::Gzl { alpha: num(param)? },
            "power" => Self::Power { s: num(param)? },
            "geometric" | "geom" => Self::Geometric { theta: num(param)? },
            other => return Err(Error::InvalidInput(format!("unknown weight family {other:?}"))),
        };
        fam.validate()?;
        Ok(fam)
    }
}

/// Builds the normalized weight vector of a family at list length `n`.
pub fn weight_family(family: WeightFamily, n: usize) -> Result<WeightVector> {
    family.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    let raw: Vec<f64> = match family {
        WeightFamily::Uniform => return Ok(WeightVector::uniform(n)),
        WeightFamily::Zipf => (1..=n).map(|i| 1.0 / i as f64).collect(),
        WeightFamily::Gzl { alpha } => (1..=n).map(|i| (i as f64).powf(-alpha)).collect(),
        WeightFamily::Power { s } => (1..=n).map(|i| ((n - i + 1) as f64).powf(s)).collect(),
        WeightFamily::Geometric { theta } => {
            let mut w: Vec<f64> = (1..n).map(|i| (1.0 - theta) * theta.powi(i as i32 - 1)).collect();
            w.push(theta.powi(n as i32 - 1));
            // For theta > 1/2 the last weight exceeds its neighbour; relabel.
            w.sort_by(|a, b| b.total_cmp(a));
            return WeightVector::from_unnormalized(w);
        }
    };
    WeightVector::from_unnormalized(raw)
}

/// The MTF chain as a [`ChainModel`]: innovations are requested labels.
#[derive(Debug, Clone)]
pub struct MtfModel {
    weights: WeightVector,
    requests: WeightedIndex<f64>,
}

impl MtfModel {
    pub fn new(weights: WeightVector) -> Self {
        let requests = WeightedIndex::new(weights.as_slice()).expect("validated positive weights");
        Self { weights, requests }
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn stationary_prob(&self, z: &Permutation) -> Result<f64> {
        stationary_prob(&self.weights, z)
    }

    /// `(z, pi(z))` over all of `S_n`, lexicographic order.
    pub fn stationary_law(&self) -> Result<Vec<(Permutation, f64)>> {
        self.states()?
            .into_iter()
            .map(|z| {
                let p = self.stationary_prob(&z)?;
                Ok((z, p))
            })
            .collect()
    }
}

impl ChainModel for MtfModel {
    type State = Permutation;
    type Innovation = u32;

    fn forward(&self, x: &Permutation, u: &u32) -> Permutation {
        move_unchecked(x, *u)
    }

    fn sample_innovation<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.requests.sample(rng) as u32 + 1
    }

    fn reverse_step<R: Rng + ?Sized>(&self, y: &Permutation, rng: &mut R) -> Permutation {
        mtf_reverse_step(&self.weights, y, rng)
    }

    fn impute<R: Rng + ?Sized>(&self, prev: &Permutation, next: &Permutation, _rng: &mut R) -> Result<u32> {
        mtf_impute(prev, next)
    }

    fn validate_state(&self, x: &Permutation) -> Result<()> {
        check_dims(&self.weights, x)
    }

    fn validate_innovation(&self, u: &u32) -> Result<()> {
        if *u == 0 || *u as usize > self.n() {
            return Err(Error::InvalidInput(format!("request {u} out of range 1..={}", self.n())));
        }
        Ok(())
    }
}

impl FiniteStates for MtfModel {
    fn states(&self) -> Result<Vec<Permutation>> {
        if self.n() > MAX_ENUMERABLE_N {
            return Err(Error::Unsupported(format!("enumerating S_{} (limit n <= {MAX_ENUMERABLE_N})", self.n())));
        }
        Ok(Permutation::all(self.n()))
    }
}

impl FiniteInnovations for MtfModel {
    fn innovation_pmf(&self) -> Vec<(u32, f64)> {
        (1..=self.n() as u32).map(|i| (i, self.weights.of(i))).collect()
    }
}

impl OrderedChain for MtfModel {
    fn leq(&self, a: &Permutation, b: &Permutation) -> bool {
        weak_bruhat_leq(a, b)
    }

    fn bottom(&self) -> Permutation {
        Permutation::identity(self.n())
    }

    fn top(&self) -> Permutation {
        Permutation::reversal(self.n())
    }
}

/// Result of [`incremental_sampler_traced`].
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementalTrace {
    pub output: Permutation,
    /// Reverse-chain steps taken across all stages.
    pub reverse_steps: u64,
    /// Coalescence window found at each stage (always 1).
    pub stage_windows: Vec<u64>,
    /// Reverse and forward updates across all stages.
    pub total_steps: u64,
}

/// Exact draw from the MTF stationary law in `n - 1` reverse steps.
pub fn incremental_sampler<R: Rng + ?Sized>(w: &WeightVector, rng: &mut R) -> Permutation {
    incremental_sampler_traced(w, rng).output
}

/// Grows a stationary list one record at a time. Given `x ~ pi_k` on the
/// first `k` records, `(k+1, x)` is an exact draw from `pi_{k+1}`
/// conditioned on record `k+1` being in front; a single set-coalescence
/// step with that set then yields a draw from `pi_{k+1}`.
pub fn incremental_sampler_traced<R: Rng + ?Sized>(w: &WeightVector, rng: &mut R) -> IncrementalTrace {
    let n = w.len();
    let mut current = Permutation::identity(1);
    let mut reverse_steps = 0;
    let mut total_steps = 0;
    let mut stage_windows = Vec::with_capacity(n.saturating_sub(1));
    let cfg = SamplerConfig::vanilla(1);
    for k in 1..n {
        let label = k as u32 + 1;
        let model = MtfModel::new(w.truncated(k + 1).expect("prefix of a valid weight vector"));
        let mut start = Vec::with_capacity(k + 1);
        start.push(label);
        start.extend_from_slice(current.labels());
        let start = Permutation(start);
        let front_is_new = move |z: &Permutation| z.front() == label;
        // Records led by k+1 form an up-set of the weak order, so only the
        // trajectory from the minimum needs checking.
        let target = TargetSet::new(&front_is_new, SetShape::UpSet);
        let run = fmmr_set(&model, &Coupling::monotone(&model), &target, |_: &mut R| start.clone(), &cfg, rng)
            .expect("set coalescence after one reverse step");
        reverse_steps += run.window;
        total_steps += run.total_steps;
        stage_windows.push(run.window);
        current = run.output;
    }
    IncrementalTrace { output: current, reverse_steps, stage_windows, total_steps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(s: &str) -> Permutation {
        s.parse().unwrap()
    }

    #[test]
    fn move_to_front_examples() {
        assert_eq!(move_to_front(&p("1-2-3"), 3).unwrap(), p("3-1-2"));
        assert_eq!(move_to_front(&p("3-1-2"), 3).unwrap(), p("3-1-2"));
        assert_eq!(move_to_front(&p("2-4-1-3"), 1).unwrap(), p("1-2-4-3"));
        assert!(move_to_front(&p("1-2-3"), 4).is_err());
        assert!(move_to_front(&p("1-2-3"), 0).is_err());
    }

    #[test]
    fn stationary_prob_examples() {
        let w = WeightVector::new(vec![0.7, 0.3]).unwrap();
        assert!((stationary_prob(&w, &p("1-2")).unwrap() - 0.7).abs() < 1e-15);
        let w = WeightVector::new(vec![0.5, 0.3, 0.2]).unwrap();
        assert!((stationary_prob(&w, &p("3-1-2")).unwrap() - 0.125).abs() < 1e-15);
        let u = WeightVector::uniform(4);
        for z in Permutation::all(4) {
            assert!((stationary_prob(&u, &z).unwrap() - 1.0 / 24.0).abs() < 1e-15);
        }
        assert!(matches!(stationary_prob(&u, &p("1-2-3")), Err(Error::DimensionMismatch { expected: 4, got: 3 })));
    }

    #[test]
    fn ln_stationary_matches_direct() {
        let w = weight_family(WeightFamily::Zipf, 6).unwrap();
        for z in Permutation::all(6).iter().step_by(37) {
            let a = stationary_prob(&w, z).unwrap().ln();
            let b = ln_stationary_prob(&w, z).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn impute_examples() {
        assert_eq!(mtf_impute(&p("1-2-3"), &p("2-1-3")).unwrap(), 2);
        assert_eq!(mtf_impute(&p("2-1-3"), &p("2-1-3")).unwrap(), 2);
        assert!(matches!(mtf_impute(&p("1-2-3"), &p("3-2-1")), Err(Error::Imputation(_))));
    }

    #[test]
    fn reverse_step_two_records() {
        let w = WeightVector::new(vec![0.7, 0.3]).unwrap();
        let probs = mtf_reverse_probs(&w, &p("2-1")).unwrap();
        assert_eq!(probs[0].0, p("2-1"));
        assert!((probs[0].1 - 0.3).abs() < 1e-15);
        assert_eq!(probs[1].0, p("1-2"));
        assert!((probs[1].1 - 0.7).abs() < 1e-15);
    }

    #[test]
    fn reverse_step_single_record_is_identity() {
        let w = WeightVector::new(vec![1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(mtf_reverse_step(&w, &p("1"), &mut rng), p("1"));
    }

    #[test]
    fn weak_order_examples() {
        assert!(!weak_bruhat_leq(&p("2-1-3"), &p("1-3-2")));
        assert!(!weak_bruhat_leq(&p("1-3-2"), &p("2-1-3")));
        for z in Permutation::all(3) {
            assert!(weak_bruhat_leq(&z, &z));
            assert!(weak_bruhat_leq(&Permutation::identity(3), &z));
            assert!(weak_bruhat_leq(&z, &Permutation::reversal(3)));
        }
    }

    #[test]
    fn weight_family_examples() {
        let g = weight_family(WeightFamily::Geometric { theta: 0.5 }, 3).unwrap();
        assert_eq!(g.as_slice(), &[0.5, 0.25, 0.25]);
        let u = weight_family(WeightFamily::Uniform, 4).unwrap();
        assert_eq!(u.as_slice(), &[0.25; 4]);
        let z = weight_family(WeightFamily::Zipf, 3).unwrap();
        for (a, b) in z.as_slice().iter().zip([6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(weight_family(WeightFamily::Gzl { alpha: 0.0 }, 3).is_err());
        assert!(weight_family(WeightFamily::Power { s: -1.0 }, 3).is_err());
        assert!(weight_family(WeightFamily::Geometric { theta: 1.0 }, 3).is_err());
    }

    #[test]
    fn weight_family_parsing() {
        assert_eq!("gzl:0.5".parse::<WeightFamily>().unwrap(), WeightFamily::Gzl { alpha: 0.5 });
        assert_eq!("uniform".parse::<WeightFamily>().unwrap(), WeightFamily::Uniform);
        assert!("gzl".parse::<WeightFamily>().is_err());
        assert!("triangle:2".parse::<WeightFamily>().is_err());
    }

    #[test]
    fn weight_vector_validation() {
        assert!(WeightVector::new(vec![0.3, 0.7]).is_err());
        assert!(WeightVector::new(vec![0.5, 0.4]).is_err());
        assert!(WeightVector::new(vec![1.0, 0.0]).is_err());
        assert!(WeightVector::new(vec![]).is_err());
    }

    #[test]
    fn permutation_parsing_and_display() {
        assert_eq!(p("(2,1,3)"), p("2-1-3"));
        assert_eq!(p("2 1 3").to_string(), "2-1-3");
        assert!("1-1-2".parse::<Permutation>().is_err());
        assert!("1-4-2".parse::<Permutation>().is_err());
        assert_eq!(Permutation::all(4).len(), 24);
    }

    #[test]
    fn incremental_trivial_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = incremental_sampler_traced(&WeightVector::new(vec![1.0]).unwrap(), &mut rng);
        assert_eq!(t.output, p("1"));
        assert_eq!(t.reverse_steps, 0);
    }

    #[test]
    fn model_rejects_large_enumeration() {
        let m = MtfModel::new(WeightVector::uniform(9));
        assert!(matches!(m.states(), Err(Error::Unsupported(_))));
    }
}
