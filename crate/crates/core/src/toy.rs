//! Two small chains where the choice of FMMR start state matters: a
//! three-state chain that only coalesces on a rare innovation, and a
//! heat-bath Gibbs sampler on an attractive spin chain updated by
//! directional sweeps.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{impute_by_enumeration, ChainModel, FiniteInnovations, FiniteStates, OrderedChain};
use crate::error::{Error, Result};

/// States `{0, 1, 2}` with kernel
///
/// ```text
/// [ e  (1-e)/2  (1-e)/2 ]
/// [ e   1-e       0     ]
/// [ e   0        1-e    ]
/// ```
///
/// driven by `U in {0, 1, 2}` with masses `(e, (1-e)/2, (1-e)/2)`.
/// `U = 0` sends every state to 0; otherwise 1 and 2 hold and 0 moves to `U`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeStateModel {
    epsilon: f64,
}

impl ThreeStateModel {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `pi = (e, (1-e)/2, (1-e)/2)`.
    pub fn stationary(&self) -> [f64; 3] {
        let h = (1.0 - self.epsilon) / 2.0;
        [self.epsilon, h, h]
    }

    fn kernel_row(&self, x: u8) -> [f64; 3] {
        let e = self.epsilon;
        match x {
            0 => [e, (1.0 - e) / 2.0, (1.0 - e) / 2.0],
            1 => [e, 1.0 - e, 0.0],
            _ => [e, 0.0, 1.0 - e],
        }
    }
}

/// Convenience constructor.
pub fn three_state_model(epsilon: f64) -> Result<ThreeStateModel> {
    ThreeStateModel::new(epsilon)
}

impl ChainModel for ThreeStateModel {
    type State = u8;
    type Innovation = u8;

    fn forward(&self, x: &u8, u: &u8) -> u8 {
        match (*x, *u) {
            (_, 0) => 0,
            (0, u) => u,
            (x, _) => x,
        }
    }

    fn sample_innovation<R: Rng + ?Sized>(&self, rng: &mut R) -> u8 {
        let v = rng.random::<f64>();
        if v < self.epsilon {
            0
        } else if v < self.epsilon + (1.0 - self.epsilon) / 2.0 {
            1
        } else {
            2
        }
    }

    /// The chain is reversible, so the reversed kernel is the kernel.
    fn reverse_step<R: Rng + ?Sized>(&self, y: &u8, rng: &mut R) -> u8 {
        let row = self.kernel_row(*y);
        let v = rng.random::<f64>();
        if v < row[0] {
            0
        } else if v < row[0] + row[1] {
            1
        } else {
            2
        }
    }

    fn impute<R: Rng + ?Sized>(&self, prev: &u8, next: &u8, rng: &mut R) -> Result<u8> {
        impute_by_enumeration(self, &self.innovation_pmf(), prev, next, rng)
    }

    fn validate_state(&self, x: &u8) -> Result<()> {
        if *x > 2 {
            return Err(Error::InvalidInput(format!("state {x} not in {{0, 1, 2}}")));
        }
        Ok(())
    }

    fn validate_innovation(&self, u: &u8) -> Result<()> {
        if *u > 2 {
            return Err(Error::InvalidInput(format!("innovation {u} not in {{0, 1, 2}}")));
        }
        Ok(())
    }
}

impl FiniteStates for ThreeStateModel {
    fn states(&self) -> Result<Vec<u8>> {
        Ok(vec![0, 1, 2])
    }
}

impl FiniteInnovations for ThreeStateModel {
    fn innovation_pmf(&self) -> Vec<(u8, f64)> {
        let h = (1.0 - self.epsilon) / 2.0;
        vec![(0, self.epsilon), (1, h), (2, h)]
    }
}

/// A row of `+1` / `-1` spins.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Spins(Vec<i8>);

impl Spins {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if spins.iter().any(|s| *s != 1 && *s != -1) {
            return Err(Error::InvalidInput("spins must be +1 or -1".into()));
        }
        Ok(Self(spins))
    }

    pub fn all_minus(n: usize) -> Self {
        Self(vec![-1; n])
    }

    pub fn all_plus(n: usize) -> Self {
        Self(vec![1; n])
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Spins {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            f.write_str(if *s > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl FromStr for Spins {
    type Err = Error;

    /// A string of `+` and `-`, one character per site.
    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(Error::InvalidInput(format!("bad spin {other:?} in {s:?}"))),
            })
            .collect::<Result<Vec<i8>>>()
            .map(Spins)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepDir {
    #[default]
    LeftToRight,
    RightToLeft,
}

impl SweepDir {
    pub fn opposite(self) -> Self {
        match self {
            Self::LeftToRight => Self::RightToLeft,
            Self::RightToLeft => Self::LeftToRight,
        }
    }

    fn order(self, n: usize) -> Box<dyn Iterator<Item = usize>> {
        match self {
            Self::LeftToRight => Box::new(0..n),
            Self::RightToLeft => Box::new((0..n).rev()),
        }
    }
}

/// Heat-bath Gibbs sampler for the nearest-neighbour ferromagnet
/// `pi(s) ∝ exp(beta sum s_i s_{i+1} + sum h_i s_i)` with free boundary.
/// One transition is one full sweep in `dir`; the innovation holds one
/// uniform per site and site `i` becomes `+` iff `u_i < p_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinChainModel {
    beta: f64,
    fields: Vec<f64>,
    dir: SweepDir,
}

/// Largest chain length whose configurations are enumerated.
pub const MAX_ENUMERABLE_SITES: usize = 12;

impl SpinChainModel {
    /// Field `h` at sites `1..n-1` and `big_h` at site `n`.
    pub fn new(n: usize, beta: f64, h: f64, big_h: f64, dir: SweepDir) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("need at least one site".into()));
        }
        let mut fields = vec![h; n];
        fields[n - 1] = big_h;
        Self::with_fields(beta, fields, dir)
    }

    pub fn with_fields(beta: f64, fields: Vec<f64>, dir: SweepDir) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::InvalidInput("need at least one site".into()));
        }
        if !(beta >= 0.0 && beta.is_finite()) || fields.iter().any(|h| !(*h >= 0.0 && h.is_finite())) {
            return Err(Error::InvalidInput("beta and fields must be finite and non-negative".into()));
        }
        Ok(Self { beta, fields, dir })
    }

    pub fn n(&self) -> usize {
        self.fields.len()
    }

    pub fn dir(&self) -> SweepDir {
        self.dir
    }

    /// The same Gibbs measure swept the other way.
    pub fn reversed(&self) -> Self {
        Self { dir: self.dir.opposite(), ..self.clone() }
    }

    /// Heat-bath probability of `+` at `site` given the current neighbours.
    pub fn plus_prob(&self, s: &[i8], site: usize) -> f64 {
        let left = if site > 0 { s[site - 1] as f64 } else { 0.0 };
        let right = if site + 1 < s.len() { s[site + 1] as f64 } else { 0.0 };
        logistic(2.0 * (self.beta * (left + right) + self.fields[site]))
    }

    /// Unnormalized log weight of a configuration under the Gibbs measure.
    pub fn log_weight(&self, s: &Spins) -> f64 {
        let v = s.as_slice();
        let bonds: f64 = v.windows(2).map(|p| (p[0] * p[1]) as f64).sum();
        let field: f64 = v.iter().zip(&self.fields).map(|(x, h)| *x as f64 * h).sum();
        self.beta * bonds + field
    }

    /// Exact Gibbs measure over all configurations, in canonical order.
    pub fn gibbs_measure(&self) -> Result<Vec<(Spins, f64)>> {
        let states = self.states()?;
        let logs: Vec<f64> = states.iter().map(|s| self.log_weight(s)).collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ws: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = ws.iter().sum();
        Ok(states.into_iter().zip(ws.into_iter().map(|w| w / z)).collect())
    }

    fn sweep(&self, x: &Spins, dir: SweepDir, mut uniform: impl FnMut(usize) -> f64) -> Spins {
        let mut s = x.0.clone();
        for site in dir.order(s.len()) {
            let p = self.plus_prob(&s, site);
            s[site] = if uniform(site) < p { 1 } else { -1 };
        }
        Spins(s)
    }

    /// Distinct `+` thresholds a site can see, sorted.
    fn site_thresholds(&self, site: usize) -> Vec<f64> {
        let n = self.n();
        let lefts: &[i8] = if site > 0 { &[-1, 1] } else { &[0] };
        let rights: &[i8] = if site + 1 < n { &[-1, 1] } else { &[0] };
        let mut out = Vec::new();
        for &l in lefts {
            for &r in rights {
                out.push(logistic(2.0 * (self.beta * (l + r) as f64 + self.fields[site])));
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Convenience constructor.
pub fn spin_model(n: usize, beta: f64, h: f64, big_h: f64, dir: SweepDir) -> Result<SpinChainModel> {
    SpinChainModel::new(n, beta, h, big_h, dir)
}

impl ChainModel for SpinChainModel {
    type State = Spins;
    type Innovation = Vec<f64>;

    fn forward(&self, x: &Spins, u: &Vec<f64>) -> Spins {
        self.sweep(x, self.dir, |i| u[i])
    }

    fn sample_innovation<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.n()).map(|_| rng.random::<f64>()).collect()
    }

    /// The reversal of a sweep of heat-bath updates is the sweep in the
    /// opposite direction.
    fn reverse_step<R: Rng + ?Sized>(&self, y: &Spins, rng: &mut R) -> Spins {
        self.sweep(y, self.dir.opposite(), |_| rng.random::<f64>())
    }

    fn impute<R: Rng + ?Sized>(&self, prev: &Spins, next: &Spins, rng: &mut R) -> Result<Vec<f64>> {
        let mut s = prev.0.clone();
        let mut u = vec![0.0; self.n()];
        for site in self.dir.order(self.n()) {
            let p = self.plus_prob(&s, site);
            let v = rng.random::<f64>();
            u[site] = if next.0[site] > 0 {
                if p <= 0.0 {
                    return Err(Error::Imputation(format!("site {site} cannot become +")));
                }
                v * p
            } else {
                if p >= 1.0 {
                    return Err(Error::Imputation(format!("site {site} cannot become -")));
                }
                p + v * (1.0 - p)
            };
            s[site] = next.0[site];
        }
        Ok(u)
    }

    fn validate_state(&self, x: &Spins) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: x.len() });
        }
        Ok(())
    }

    fn validate_innovation(&self, u: &Vec<f64>) -> Result<()> {
        if u.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: u.len() });
        }
        if u.iter().any(|v| !(0.0..1.0).contains(v)) {
            return Err(Error::InvalidInput("innovations must lie in [0, 1)".into()));
        }
        Ok(())
    }

    fn steps_per_transition(&self) -> u64 {
        self.n() as u64
    }
}

impl FiniteStates for SpinChainModel {
    fn states(&self) -> Result<Vec<Spins>> {
        let n = self.n();
        if n > MAX_ENUMERABLE_SITES {
            return Err(Error::Unsupported(format!(
                "enumerating 2^{n} configurations (limit {MAX_ENUMERABLE_SITES} sites)"
            )));
        }
        let mut out: Vec<Spins> = (0..1u32 << n)
            .map(|bits| Spins((0..n).map(|i| if bits >> (n - 1 - i) & 1 == 1 { 1 } else { -1 }).collect()))
            .collect();
        out.sort();
        Ok(out)
    }
}

/// Innovations discretized on the threshold grid: within a cell between
/// consecutive thresholds every site decision is fixed, so the midpoint of
/// the cell stands for the whole cell and the cell width is its mass.
impl FiniteInnovations for SpinChainModel {
    fn innovation_pmf(&self) -> Vec<(Vec<f64>, f64)> {
        let cells: Vec<Vec<(f64, f64)>> = (0..self.n())
            .map(|site| {
                let mut cuts = vec![0.0];
                cuts.extend(self.site_thresholds(site));
                cuts.push(1.0);
                cuts.windows(2).filter(|c| c[1] > c[0]).map(|c| ((c[0] + c[1]) / 2.0, c[1] - c[0])).collect()
            })
            .collect();
        let mut out = vec![(Vec::with_capacity(self.n()), 1.0)];
        for site_cells in &cells {
            out = out
                .into_iter()
                .flat_map(|(u, p)| {
                    site_cells.iter().map(move |(mid, width)| {
                        let mut v = u.clone();
                        v.push(*mid);
                        (v, p * width)
                    })
                })
                .collect();
        }
        out
    }
}

impl OrderedChain for SpinChainModel {
    fn leq(&self, a: &Spins, b: &Spins) -> bool {
        a.0.iter().zip(&b.0).all(|(x, y)| x <= y)
    }

    fn bottom(&self) -> Spins {
        Spins::all_minus(self.n())
    }

    fn top(&self) -> Spins {
        Spins::all_plus(self.n())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_kernel, forward_step};

    #[test]
    fn three_state_rule_table() {
        let m = ThreeStateModel::new(0.1).unwrap();
        assert_eq!(forward_step(&m, &2, &0).unwrap(), 0);
        assert_eq!(m.forward(&0, &1), 1);
        assert_eq!(m.forward(&1, &1), 1);
        assert_eq!(m.forward(&1, &2), 1);
        assert_eq!(m.forward(&0, &2), 2);
        assert_eq!(m.forward(&2, &1), 2);
        assert_eq!(m.forward(&2, &2), 2);
        assert!(forward_step(&m, &3, &0).is_err());
        assert!(forward_step(&m, &0, &3).is_err());
    }

    #[test]
    fn three_state_kernel_matches_display() {
        let e = 0.1;
        let m = ThreeStateModel::new(e).unwrap();
        let k = build_kernel(&m).unwrap();
        let expect = [[e, (1.0 - e) / 2.0, (1.0 - e) / 2.0], [e, 1.0 - e, 0.0], [e, 0.0, 1.0 - e]];
        for (i, row) in expect.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((k.entry(i, j) - v).abs() < 1e-15);
            }
        }
        for (a, b) in k.stationary().iter().zip(m.stationary()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn three_state_rejects_bad_epsilon() {
        assert!(ThreeStateModel::new(0.0).is_err());
        assert!(ThreeStateModel::new(1.0).is_err());
    }

    #[test]
    fn spin_single_site() {
        let m = SpinChainModel::new(1, 1.0, 0.0, 0.7, SweepDir::LeftToRight).unwrap();
        let k = build_kernel(&m).unwrap();
        let plus = 1.0 / (1.0 + (-1.4f64).exp());
        // states sorted: [-], [+]
        assert!((k.stationary()[1] - plus).abs() < 1e-10);
        let g = m.gibbs_measure().unwrap();
        assert!((g[1].1 - plus).abs() < 1e-12);
    }

    #[test]
    fn spin_states_sorted_and_complete() {
        let m = SpinChainModel::new(3, 1.0, 0.5, 2.0, SweepDir::LeftToRight).unwrap();
        let s = m.states().unwrap();
        assert_eq!(s.len(), 8);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s[0], Spins::all_minus(3));
        assert_eq!(s[7], Spins::all_plus(3));
    }

    #[test]
    fn spin_grid_pmf_sums_to_one() {
        let m = SpinChainModel::new(3, 0.8, 0.2, 1.5, SweepDir::LeftToRight).unwrap();
        let total: f64 = m.innovation_pmf().iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spin_display() {
        assert_eq!(Spins::new(vec![-1, 1, 1]).unwrap().to_string(), "-++");
        assert_eq!("-++".parse::<Spins>().unwrap(), Spins::new(vec![-1, 1, 1]).unwrap());
        assert!("-0+".parse::<Spins>().is_err());
        assert!(Spins::new(vec![0]).is_err());
    }

    #[test]
    fn spin_rejects_negative_parameters() {
        assert!(SpinChainModel::new(3, -1.0, 0.0, 0.0, SweepDir::LeftToRight).is_err());
        assert!(SpinChainModel::new(0, 1.0, 0.0, 0.0, SweepDir::LeftToRight).is_err());
    }
}
