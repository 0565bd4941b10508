//! Chains written as stochastic recursive sequences `X_s = phi(X_{s-1}, U_s)`,
//! plus exact computations on small, fully enumerable chains.
//!
//! A model supplies the forward rule, an innovation sampler, a sampler for
//! the time-reversed kernel and an imputer that draws an innovation from its
//! conditional law given an observed transition. Optional capabilities
//! (finite state space, finite innovation space, a partial order with
//! extremes) are separate traits so that large chains only implement what
//! they can.

use std::collections::VecDeque;
use std::fmt::Debug;
use std::hash::Hash;

use rand::Rng;

use crate::error::{Error, Result};

/// Default cap on `|innovations|^t` for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 10_000_000;

/// Absolute tolerance used when comparing kernel identities.
pub const KERNEL_TOL: f64 = 1e-10;

const STATIONARY_TOL: f64 = 1e-12;
const STATIONARY_MAX_ITERS: usize = 1_000_000;

pub trait ChainModel {
    type State: Clone + Eq + Ord + Hash + Debug;
    type Innovation: Clone + Debug;

    /// The transition rule `phi(x, u)`. Inputs are assumed valid.
    fn forward(&self, x: &Self::State, u: &Self::Innovation) -> Self::State;

    fn sample_innovation<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Innovation;

    /// Draws a predecessor of `y` from the time-reversed kernel.
    fn reverse_step<R: Rng + ?Sized>(&self, y: &Self::State, rng: &mut R) -> Self::State;

    /// Draws `u` from the law of `U` conditioned on `phi(prev, U) == next`.
    fn impute<R: Rng + ?Sized>(&self, prev: &Self::State, next: &Self::State, rng: &mut R) -> Result<Self::Innovation>;

    fn validate_state(&self, x: &Self::State) -> Result<()>;

    fn validate_innovation(&self, u: &Self::Innovation) -> Result<()>;

    /// Elementary updates performed by one chain transition (site updates
    /// per sweep for Gibbs samplers).
    fn steps_per_transition(&self) -> u64 {
        1
    }
}

/// Chains whose state space can be listed.
pub trait FiniteStates: ChainModel {
    /// All states in canonical (sorted) order.
    fn states(&self) -> Result<Vec<Self::State>>;
}

/// Chains whose innovation space is finite, with its probability mass function.
pub trait FiniteInnovations: ChainModel {
    fn innovation_pmf(&self) -> Vec<(Self::Innovation, f64)>;
}

/// Chains carrying a partial order with minimum and maximum.
pub trait OrderedChain: ChainModel {
    fn leq(&self, a: &Self::State, b: &Self::State) -> bool;
    fn bottom(&self) -> Self::State;
    fn top(&self) -> Self::State;
}

/// `phi(x, u)` after validating both arguments.
pub fn forward_step<M: ChainModel>(model: &M, x: &M::State, u: &M::Innovation) -> Result<M::State> {
    model.validate_state(x)?;
    model.validate_innovation(u)?;
    Ok(model.forward(x, u))
}

/// Checked imputation: validates inputs and that the returned innovation
/// reproduces the transition.
pub fn impute_innovation<M: ChainModel, R: Rng + ?Sized>(
    model: &M,
    prev: &M::State,
    next: &M::State,
    rng: &mut R,
) -> Result<M::Innovation> {
    model.validate_state(prev)?;
    model.validate_state(next)?;
    let u = model.impute(prev, next, rng)?;
    debug_assert!(model.forward(prev, &u) == *next);
    Ok(u)
}

/// Imputation for finite innovation spaces: sample among the innovations
/// that realize `prev -> next`, weighted by their mass.
pub fn impute_by_enumeration<M, R>(
    model: &M,
    pmf: &[(M::Innovation, f64)],
    prev: &M::State,
    next: &M::State,
    rng: &mut R,
) -> Result<M::Innovation>
where
    M: ChainModel,
    R: Rng + ?Sized,
{
    let candidates: Vec<&(M::Innovation, f64)> =
        pmf.iter().filter(|(u, p)| *p > 0.0 && model.forward(prev, u) == *next).collect();
    let total: f64 = candidates.iter().map(|(_, p)| p).sum();
    if candidates.is_empty() || total <= 0.0 {
        return Err(Error::Imputation(format!("{prev:?} -> {next:?} has zero probability")));
    }
    let mut v = rng.random::<f64>() * total;
    for (u, p) in &candidates {
        if v < *p {
            return Ok(u.clone());
        }
        v -= p;
    }
    Ok(candidates[candidates.len() - 1].0.clone())
}

/// A violating triple for the monotonicity check: `x <= y` but
/// `phi(x, u) </= phi(y, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneViolation<S, U> {
    pub x: S,
    pub y: S,
    pub u: U,
    pub image_x: S,
    pub image_y: S,
}

#[derive(Debug, Clone)]
pub struct MonotoneReport<S, U> {
    pub comparable_pairs: usize,
    pub innovations: usize,
    /// States that are not sandwiched between the declared extremes.
    pub extreme_violations: Vec<S>,
    pub violations: Vec<MonotoneViolation<S, U>>,
}

impl<S, U> MonotoneReport<S, U> {
    pub fn is_monotone(&self) -> bool {
        self.violations.is_empty() && self.extreme_violations.is_empty()
    }
}

/// Exhaustively checks that the transition rule preserves the order.
pub fn check_monotone<M>(model: &M) -> Result<MonotoneReport<M::State, M::Innovation>>
where
    M: FiniteStates + FiniteInnovations + OrderedChain,
{
    let states = model.states()?;
    let pmf = model.innovation_pmf();
    let (bottom, top) = (model.bottom(), model.top());
    let extreme_violations =
        states.iter().filter(|z| !(model.leq(&bottom, z) && model.leq(z, &top))).cloned().collect();

    let mut violations = Vec::new();
    let mut comparable_pairs = 0;
    for x in &states {
        for y in &states {
            if !model.leq(x, y) {
                continue;
            }
            comparable_pairs += 1;
            for (u, _) in &pmf {
                let (fx, fy) = (model.forward(x, u), model.forward(y, u));
                if !model.leq(&fx, &fy) {
                    violations.push(MonotoneViolation {
                        x: x.clone(),
                        y: y.clone(),
                        u: u.clone(),
                        image_x: fx,
                        image_y: fy,
                    });
                }
            }
        }
    }
    Ok(MonotoneReport { comparable_pairs, innovations: pmf.len(), extreme_violations, violations })
}

/// Dense transition matrix over an explicit state list, with its
/// stationary vector.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix<S> {
    states: Vec<S>,
    entries: Vec<f64>,
    stationary: Vec<f64>,
}

impl<S: Ord + Clone + Debug> KernelMatrix<S> {
    /// Builds a kernel from a row-stochastic matrix, computing `pi`.
    pub fn from_rows(states: Vec<S>, entries: Vec<f64>) -> Result<Self> {
        let n = states.len();
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: entries.len() });
        }
        if states.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("states must be strictly sorted".into()));
        }
        for i in 0..n {
            let row = &entries[i * n..(i + 1) * n];
            if row.iter().any(|&p| !(0.0..=1.0 + 1e-12).contains(&p)) {
                return Err(Error::Model(format!("row {i} has entries outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::Model(format!("row {i} sums to {s}")));
            }
        }
        check_ergodic(n, &entries)?;
        let stationary = stationary_vector(n, &entries)?;
        Ok(Self { states, entries, stationary })
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, x: &S) -> Result<usize> {
        self.states.binary_search(x).map_err(|_| Error::InvalidInput(format!("{x:?} is not a state of this kernel")))
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.states.len() + j]
    }

    pub fn prob(&self, x: &S, y: &S) -> Result<f64> {
        Ok(self.entry(self.index_of(x)?, self.index_of(y)?))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.states.len();
        &self.entries[i * n..(i + 1) * n]
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// `max_i |sum_j K(i, j) - 1|`.
    pub fn row_sum_error(&self) -> f64 {
        (0..self.len()).map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `max_j |(pi K)_j - pi_j|`.
    pub fn stationarity_error(&self) -> f64 {
        let pk = self.apply_left(&self.stationary);
        pk.iter().zip(&self.stationary).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Row vector times matrix.
    pub fn apply_left(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, k) in out.iter_mut().zip(self.row(i)) {
                *o += vi * k;
            }
        }
        out
    }

    /// Row `x` of `K^t`.
    pub fn power_row(&self, x: &S, t: u64) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.len()];
        v[self.index_of(x)?] = 1.0;
        for _ in 0..t {
            v = self.apply_left(&v);
        }
        Ok(v)
    }

    /// Largest entrywise difference with another kernel on the same states.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Exact kernel `K(x, y) = sum over {u : phi(x, u) = y} of P(U = u)`.
pub fn build_kernel<M>(model: &M) -> Result<KernelMatrix<M::State>>
where
    M: FiniteStates + FiniteInnovations,
{
    let states = model.states()?;
    let pmf = model.innovation_pmf();
    let n = states.len();
    let mut entries = vec![0.0; n * n];
    for (i, x) in states.iter().enumerate() {
        for (u, p) in &pmf {
            let y = model.forward(x, u);
            let j = states
                .binary_search(&y)
                .map_err(|_| Error::Model(format!("phi({x:?}, {u:?}) = {y:?} is not enumerated")))?;
            entries[i * n + j] += p;
        }
    }
    KernelMatrix::from_rows(states, entries)
}

/// Time reversal `K~(y, x) = pi(x) K(x, y) / pi(y)`.
pub fn reverse_kernel<S: Ord + Clone + Debug>(k: &KernelMatrix<S>) -> Result<KernelMatrix<S>> {
    let n = k.len();
    let pi = k.stationary();
    if let Some(j) = pi.iter().position(|&p| p <= 0.0) {
        return Err(Error::DegenerateState(format!("{:?}", k.states()[j])));
    }
    let mut entries = vec![0.0; n * n];
    for y in 0..n {
        for x in 0..n {
            entries[y * n + x] = pi[x] * k.entry(x, y) / pi[y];
        }
    }
    // Renormalize away rounding so the reversed rows are stochastic to 1e-12.
    for y in 0..n {
        let s: f64 = entries[y * n..(y + 1) * n].iter().sum();
        for e in &mut entries[y * n..(y + 1) * n] {
            *e /= s;
        }
    }
    Ok(KernelMatrix { states: k.states.clone(), entries, stationary: pi.to_vec() })
}

/// Separation `1 - min_z K^t(x, z) / pi(z)` from exact matrix powers.
pub fn separation<S: Ord + Clone + Debug>(k: &KernelMatrix<S>, x: &S, t: u64) -> Result<f64> {
    let row = k.power_row(x, t)?;
    let min_ratio = row.iter().zip(k.stationary()).map(|(a, p)| a / p).fold(f64::INFINITY, f64::min);
    Ok((1.0 - min_ratio).clamp(0.0, 1.0))
}

/// What counts as success in [`exact_coalescence_prob`].
pub enum CoalescenceTarget<'a, S> {
    /// All trajectories meet in a single state.
    Any,
    /// All trajectories meet in the given state.
    State(&'a S),
    /// All trajectories end inside the set.
    Set(&'a dyn Fn(&S) -> bool),
}

/// Exact probability that the forward trajectories from every state,
/// driven by common innovations over a window of length `t`, coalesce
/// (optionally to a state, or into a set). Enumerates all `|U|^t`
/// innovation sequences.
pub fn exact_coalescence_prob<M>(model: &M, t: u32, target: CoalescenceTarget<'_, M::State>, budget: u64) -> Result<f64>
where
    M: FiniteStates + FiniteInnovations,
{
    let pmf: Vec<(M::Innovation, f64)> = model.innovation_pmf().into_iter().filter(|(_, p)| *p > 0.0).collect();
    let needed = (pmf.len() as f64).powi(t as i32);
    if needed > budget as f64 {
        return Err(Error::Budget { needed, budget });
    }
    let states = model.states()?;
    if let CoalescenceTarget::State(z) = &target {
        if states.binary_search(z).is_err() {
            return Err(Error::InvalidInput(format!("{z:?} is not a state")));
        }
    }
    let mut acc = 0.0;
    enumerate_sequences(model, &pmf, states, t, 1.0, &target, &mut acc);
    Ok(acc)
}

fn enumerate_sequences<M: ChainModel>(
    model: &M,
    pmf: &[(M::Innovation, f64)],
    images: Vec<M::State>,
    remaining: u32,
    prob: f64,
    target: &CoalescenceTarget<'_, M::State>,
    acc: &mut f64,
) {
    if remaining == 0 {
        let hit = match target {
            CoalescenceTarget::Any => images.len() == 1,
            CoalescenceTarget::State(z) => images.len() == 1 && images[0] == **z,
            CoalescenceTarget::Set(member) => images.iter().all(member),
        };
        if hit {
            *acc += prob;
        }
        return;
    }
    for (u, p) in pmf {
        let mut next: Vec<M::State> = images.iter().map(|x| model.forward(x, u)).collect();
        next.sort();
        next.dedup();
        enumerate_sequences(model, pmf, next, remaining - 1, prob * p, target, acc);
    }
}

fn check_ergodic(n: usize, entries: &[f64]) -> Result<()> {
    if n == 0 {
        return Err(Error::Model("empty state space".into()));
    }
    let edge = |i: usize, j: usize| entries[i * n + j] > 0.0;
    // BFS levels from state 0 along forward edges.
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if edge(i, j) && level[j] == usize::MAX {
                level[j] = level[i] + 1;
                queue.push_back(j);
            }
        }
    }
    if level.contains(&usize::MAX) {
        return Err(Error::Model("chain is reducible".into()));
    }
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(j) = queue.pop_front() {
        for (i, s) in seen.iter_mut().enumerate() {
            if !*s && edge(i, j) {
                *s = true;
                queue.push_back(i);
            }
        }
    }
    if seen.contains(&false) {
        return Err(Error::Model("chain is reducible".into()));
    }
    // Period = gcd over edges of level(i) + 1 - level(j).
    let mut period = 0usize;
    for i in 0..n {
        for j in 0..n {
            if edge(i, j) {
                let d = (level[i] + 1).abs_diff(level[j]);
                period = gcd(period, d);
            }
        }
    }
    if period != 1 {
        return Err(Error::Model(format!("chain is periodic with period {period}")));
    }
    Ok(())
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Largest state space for which `pi` is found by a dense direct solve.
const DIRECT_SOLVE_MAX: usize = 1500;

fn stationary_vector(n: usize, entries: &[f64]) -> Result<Vec<f64>> {
    if n <= DIRECT_SOLVE_MAX {
        if let Some(pi) = direct_solve(n, entries) {
            return Ok(pi);
        }
    }
    power_iteration(n, entries)
}

/// Solves `pi (K - I) = 0`, `sum pi = 1` by Gaussian elimination with the
/// last balance equation replaced by the normalization.
fn direct_solve(n: usize, entries: &[f64]) -> Option<Vec<f64>> {
    // a[j][i] = K(i, j) - [i == j]
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            a[j * n + i] = entries[i * n + j] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for i in 0..n {
        a[(n - 1) * n + i] = 1.0;
    }
    b[n - 1] = 1.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))?;
        if a[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f != 0.0 {
                for k in col..n {
                    a[r * n + k] -= f * a[col * n + k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r * n + k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r * n + r];
    }
    if x.iter().any(|v| !v.is_finite() || *v < -1e-9) {
        return None;
    }
    x.iter_mut().for_each(|v| *v = v.max(0.0));
    let s: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= s);
    Some(x)
}

fn power_iteration(n: usize, entries: &[f64]) -> Result<Vec<f64>> {
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..STATIONARY_MAX_ITERS {
        let mut next = vec![0.0; n];
        for i in 0..n {
            let pi_i = pi[i];
            for j in 0..n {
                next[j] += pi_i * entries[i * n + j];
            }
        }
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|p| *p /= s);
        let delta = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        pi = next;
        if delta < STATIONARY_TOL {
            return Ok(pi);
        }
    }
    Err(Error::Model("stationary vector did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(a: f64, b: f64) -> KernelMatrix<u8> {
        KernelMatrix::from_rows(vec![0, 1], vec![1.0 - a, a, b, 1.0 - b]).unwrap()
    }

    #[test]
    fn two_state_stationary() {
        let k = two_state(0.3, 0.1);
        let pi = k.stationary();
        assert!((pi[0] - 0.25).abs() < 1e-10);
        assert!((pi[1] - 0.75).abs() < 1e-10);
        assert!(k.stationarity_error() < 1e-10);
    }

    #[test]
    fn periodic_chain_rejected() {
        let err = KernelMatrix::from_rows(vec![0u8, 1], vec![0.0, 1.0, 1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Model(m) if m.contains("periodic")));
    }

    #[test]
    fn reducible_chain_rejected() {
        let err = KernelMatrix::from_rows(vec![0u8, 1], vec![1.0, 0.0, 0.5, 0.5]).unwrap_err();
        assert!(matches!(err, Error::Model(m) if m.contains("reducible")));
    }

    #[test]
    fn non_stochastic_rows_rejected() {
        assert!(KernelMatrix::from_rows(vec![0u8, 1], vec![0.5, 0.4, 0.5, 0.5]).is_err());
    }

    #[test]
    fn separation_at_zero_is_one() {
        let k = two_state(0.3, 0.1);
        assert_eq!(separation(&k, &0, 0).unwrap(), 1.0);
        assert_eq!(separation(&k, &1, 0).unwrap(), 1.0);
    }

    #[test]
    fn two_state_chain_is_reversible() {
        let k = two_state(0.3, 0.1);
        let r = reverse_kernel(&k).unwrap();
        assert!(k.max_abs_diff(&r) < 1e-12);
    }
}
