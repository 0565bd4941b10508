//! Seeded, parallel replication of a sampler with CSV/JSON output.
//!
//! Replication `i` of an experiment with master seed `m` uses the seed
//! `replication_seed(m, i)`: the first 64-bit word of the ChaCha8 keystream
//! keyed by `m` on stream `i`. Each replication then runs on its own
//! `ChaCha8Rng::seed_from_u64(seed)`, so a single replication can be replayed
//! with `--seed <seed> --reps 1`, and results never depend on thread timing.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainModel, FiniteStates, OrderedChain};
use crate::error::{Error, Result};
use crate::mtf::{incremental_sampler_traced, MtfModel, Permutation, WeightFamily, WeightVector};
use crate::sampler::{
    cftp, fmmr, fmmr_set, Algorithm, Coupling, RunRecord, SamplerConfig, Schedule, SetShape, TargetSet,
};
use crate::toy::{SpinChainModel, Spins, SweepDir, ThreeStateModel};

/// Version stamped into every CSV row and JSON document.
pub const FORMAT_VERSION: u32 = 1;

/// Seed of replication `index` under master seed `master`.
pub fn replication_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

/// Weights given either by family or explicitly. Deserializes from a
/// family object, a family string such as `"gzl:0.5"`, or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, try_from = "WeightSpecRepr")]
pub enum WeightSpec {
    Family(WeightFamily),
    Explicit(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WeightSpecRepr {
    Name(String),
    Family(WeightFamily),
    Explicit(Vec<f64>),
}

impl TryFrom<WeightSpecRepr> for WeightSpec {
    type Error = Error;

    fn try_from(r: WeightSpecRepr) -> Result<Self> {
        Ok(match r {
            WeightSpecRepr::Name(s) => Self::Family(s.parse()?),
            WeightSpecRepr::Family(f) => Self::Family(f),
            WeightSpecRepr::Explicit(w) => Self::Explicit(w),
        })
    }
}

impl Default for WeightSpec {
    fn default() -> Self {
        Self::Family(WeightFamily::Uniform)
    }
}

impl WeightSpec {
    pub fn build(&self, n: usize) -> Result<WeightVector> {
        match self {
            Self::Family(f) => f.weights(n),
            Self::Explicit(w) => {
                if w.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: w.len() });
                }
                WeightVector::from_unnormalized(w.clone())
            }
        }
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Family(fam) => write!(f, "{fam}"),
            Self::Explicit(w) => {
                let parts: Vec<String> = w.iter().map(|x| x.to_string()).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

fn default_n() -> usize {
    10
}

fn default_beta() -> f64 {
    2.0
}

fn default_h() -> f64 {
    0.5
}

fn default_big_h() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChainSpec {
    Mtf {
        n: usize,
        #[serde(default)]
        weights: WeightSpec,
    },
    ThreeState {
        epsilon: f64,
    },
    Spin {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_h")]
        h: f64,
        #[serde(default = "default_big_h")]
        big_h: f64,
        #[serde(default)]
        dir: SweepDir,
    },
}

impl fmt::Display for ChainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Mtf { n, weights } => write!(f, "mtf(n={n}, w={weights})"),
            Self::ThreeState { epsilon } => write!(f, "three_state(epsilon={epsilon})"),
            Self::Spin { n, beta, h, big_h, .. } => write!(f, "spin(n={n}, beta={beta}, h={h}, H={big_h})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    /// Monotone for ordered chains, all states otherwise.
    #[default]
    Auto,
    AllStates,
    Monotone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

fn default_reps() -> u64 {
    1000
}

fn default_max_window() -> u64 {
    1_000_000
}

/// Everything needed to reproduce an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub chain: ChainSpec,
    pub algorithm: Algorithm,
    /// FMMR start state: `bottom`, `top` (`id`, `rev` for MTF) or a state
    /// literal such as `2-1-3`, `1` or `+-+`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<String>,
    /// FMMR_SET target: `down:<state>` or `up:<state>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<String>,
    #[serde(default = "default_reps")]
    pub replications: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_window")]
    pub max_window: u64,
    #[serde(default)]
    pub doubling: bool,
    #[serde(default)]
    pub coupling: CouplingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

impl ExperimentSpec {
    pub fn new(chain: ChainSpec, algorithm: Algorithm) -> Self {
        Self {
            chain,
            algorithm,
            start: None,
            set: None,
            replications: default_reps(),
            seed: 0,
            max_window: default_max_window(),
            doubling: false,
            coupling: CouplingKind::Auto,
            output: None,
            format: OutputFormat::Csv,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidInput("replications must be at least 1".into()));
        }
        if self.max_window == 0 {
            return Err(Error::InvalidInput("max_window must be at least 1".into()));
        }
        Ok(())
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            max_window: self.max_window,
            schedule: if self.doubling { Schedule::Doubling } else { Schedule::Vanilla },
        }
    }
}

/// One replication's result.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome<S> {
    Done(RunRecord<S>),
    TimedOut { total_steps: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replication<S> {
    pub index: u64,
    pub seed: u64,
    pub outcome: Outcome<S>,
}

/// Runs `reps` replications of `run` in parallel, ordered by index.
/// Timeouts are recorded; any other error aborts.
pub fn replicate<S, F>(reps: u64, master: u64, run: F) -> Result<Vec<Replication<S>>>
where
    S: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<RunRecord<S>> + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|index| {
            let seed = replication_seed(master, index);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let outcome = match run(&mut rng) {
                Ok(rec) => Outcome::Done(rec.with_seed(seed)),
                Err(Error::Timeout { total_steps, .. }) => Outcome::TimedOut { total_steps },
                Err(e) => return Err(e),
            };
            Ok(Replication { index, seed, outcome })
        })
        .collect()
}

/// [`replicate`] where every replication must finish.
pub fn replicate_all<S, F>(reps: u64, master: u64, run: F) -> Result<Vec<RunRecord<S>>>
where
    S: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<RunRecord<S>> + Sync,
{
    replicate(reps, master, run)?
        .into_iter()
        .map(|r| match r.outcome {
            Outcome::Done(rec) => Ok(rec),
            Outcome::TimedOut { total_steps } => Err(Error::Timeout { max_window: 0, total_steps }),
        })
        .collect()
}

/// One output row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordRow {
    pub version: u32,
    pub replication: u64,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub status: RunStatus,
    pub window: Option<u64>,
    pub total_steps: u64,
    pub output: Option<String>,
    pub start_state: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Timeout,
}

/// Order statistics and moments of a sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
    pub min: u64,
    pub q05: u64,
    pub q25: u64,
    pub median: u64,
    pub q75: u64,
    pub q95: u64,
    pub max: u64,
}

impl Moments {
    pub fn of(values: &[u64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_unstable();
        let n = v.len() as f64;
        let mean = v.iter().map(|&x| x as f64).sum::<f64>() / n;
        let var = if v.len() > 1 { v.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Some(Self {
            mean,
            sd: var.sqrt(),
            se: (var / n).sqrt(),
            min: v[0],
            q05: quantile(&v, 0.05),
            q25: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q75: quantile(&v, 0.75),
            q95: quantile(&v, 0.95),
            max: v[v.len() - 1],
        })
    }
}

/// Nearest-rank quantile of sorted data.
pub fn quantile(sorted: &[u64], q: f64) -> u64 {
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub version: u32,
    pub chain: String,
    pub algorithm: Algorithm,
    pub replications: u64,
    pub completed: u64,
    pub timeouts: u64,
    pub timeout_fraction: f64,
    pub window: Option<Moments>,
    pub total_steps: Option<Moments>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutput {
    pub version: u32,
    pub spec: ExperimentSpec,
    pub summary: Summary,
    pub records: Vec<RecordRow>,
}

impl ExperimentOutput {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.records {
            wr.serialize(r).map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
        }
        wr.flush().map_err(|e| Error::InvalidInput(format!("csv: {e}")))
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self).map_err(|e| Error::InvalidInput(format!("json: {e}")))?;
        writeln!(w).map_err(|e| Error::InvalidInput(format!("json: {e}")))
    }

    pub fn write<W: Write>(&self, format: OutputFormat, w: W) -> Result<()> {
        match format {
            OutputFormat::Csv => self.write_csv(w),
            OutputFormat::Json => self.write_json(w),
        }
    }
}

fn rows<S: fmt::Display>(algorithm: Algorithm, reps: Vec<Replication<S>>) -> Vec<RecordRow> {
    reps.into_iter()
        .map(|r| match r.outcome {
            Outcome::Done(rec) => RecordRow {
                version: FORMAT_VERSION,
                replication: r.index,
                seed: r.seed,
                algorithm,
                status: RunStatus::Ok,
                window: Some(rec.window),
                total_steps: rec.total_steps,
                output: Some(rec.output.to_string()),
                start_state: rec.start_state.map(|s| s.to_string()),
            },
            Outcome::TimedOut { total_steps } => RecordRow {
                version: FORMAT_VERSION,
                replication: r.index,
                seed: r.seed,
                algorithm,
                status: RunStatus::Timeout,
                window: None,
                total_steps,
                output: None,
                start_state: None,
            },
        })
        .collect()
}

fn summarize(spec: &ExperimentSpec, records: &[RecordRow]) -> Summary {
    let windows: Vec<u64> = records.iter().filter_map(|r| r.window).collect();
    let steps: Vec<u64> = records.iter().filter(|r| r.status == RunStatus::Ok).map(|r| r.total_steps).collect();
    let timeouts = records.len() as u64 - windows.len() as u64;
    Summary {
        version: FORMAT_VERSION,
        chain: spec.chain.to_string(),
        algorithm: spec.algorithm,
        replications: records.len() as u64,
        completed: windows.len() as u64,
        timeouts,
        timeout_fraction: timeouts as f64 / records.len().max(1) as f64,
        window: Moments::of(&windows),
        total_steps: Moments::of(&steps),
    }
}

/// Runs an experiment to completion.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let records = match &spec.chain {
        ChainSpec::Mtf { n, weights } => {
            let w = weights.build(*n)?;
            if spec.algorithm == Algorithm::Incremental {
                let reps = replicate(spec.replications, spec.seed, |rng| {
                    let trace = incremental_sampler_traced(&w, rng);
                    Ok(RunRecord {
                        algorithm: Algorithm::Incremental,
                        window: trace.reverse_steps,
                        total_steps: trace.total_steps,
                        output: trace.output,
                        seed: None,
                        start_state: None,
                        coalesced_to: None,
                    })
                })?;
                rows(Algorithm::Incremental, reps)
            } else {
                let model = MtfModel::new(w);
                let start = spec.start.as_deref().map(|s| parse_mtf_state(&model, s)).transpose()?;
                let set =
                    spec.set.as_deref().map(|s| parse_set(&model, s, |x| parse_mtf_state(&model, x))).transpose()?;
                let coupling = ordered_coupling(&model, spec.coupling)?;
                run_plan(&model, spec, coupling, start.unwrap_or_else(|| model.top()), set, || model.stationary_law())?
            }
        }
        ChainSpec::ThreeState { epsilon } => {
            let model = ThreeStateModel::new(*epsilon)?;
            if spec.set.is_some() {
                return Err(Error::Unsupported("three-state chain has no order for set targets".into()));
            }
            let start = match spec.start.as_deref() {
                None => 0,
                Some(s) => s.trim().parse::<u8>().map_err(|_| Error::InvalidInput(format!("bad state {s:?}")))?,
            };
            model.validate_state(&start)?;
            let coupling = match spec.coupling {
                CouplingKind::Monotone => {
                    return Err(Error::Unsupported("three-state chain has no monotone coupling".into()))
                }
                _ => Coupling::all_states(&model)?,
            };
            let pi = model.stationary();
            run_plan(&model, spec, coupling, start, None, || Ok(vec![(0, pi[0]), (1, pi[1]), (2, pi[2])]))?
        }
        ChainSpec::Spin { n, beta, h, big_h, dir } => {
            let model = SpinChainModel::new(*n, *beta, *h, *big_h, *dir)?;
            let start = spec.start.as_deref().map(|s| parse_spin_state(&model, s)).transpose()?;
            let set = spec.set.as_deref().map(|s| parse_set(&model, s, |x| parse_spin_state(&model, x))).transpose()?;
            let coupling = ordered_coupling(&model, spec.coupling)?;
            run_plan(&model, spec, coupling, start.unwrap_or_else(|| model.bottom()), set, || model.gibbs_measure())?
        }
    };
    let summary = summarize(spec, &records);
    Ok(ExperimentOutput { version: FORMAT_VERSION, spec: spec.clone(), summary, records })
}

fn ordered_coupling<M: OrderedChain + FiniteStates>(model: &M, kind: CouplingKind) -> Result<Coupling<M::State>> {
    match kind {
        CouplingKind::Auto | CouplingKind::Monotone => Ok(Coupling::monotone(model)),
        CouplingKind::AllStates => Coupling::all_states(model),
    }
}

/// A principal down- or up-set of an ordered chain.
pub struct PrincipalSet<S> {
    pub apex: S,
    pub shape: SetShape,
}

fn parse_set<M: OrderedChain>(
    _model: &M,
    s: &str,
    parse_state: impl Fn(&str) -> Result<M::State>,
) -> Result<PrincipalSet<M::State>> {
    let (kind, state) = s
        .split_once(':')
        .ok_or_else(|| Error::InvalidInput(format!("set must be down:<state> or up:<state>, got {s:?}")))?;
    let shape = match kind.trim() {
        "down" => SetShape::DownSet,
        "up" => SetShape::UpSet,
        other => return Err(Error::InvalidInput(format!("unknown set kind {other:?}"))),
    };
    Ok(PrincipalSet { apex: parse_state(state)?, shape })
}

fn parse_mtf_state(model: &MtfModel, s: &str) -> Result<Permutation> {
    let z = match s.trim() {
        "id" | "bottom" => model.bottom(),
        "rev" | "top" => model.top(),
        other => other.parse::<Permutation>()?,
    };
    model.validate_state(&z)?;
    Ok(z)
}

fn parse_spin_state(model: &SpinChainModel, s: &str) -> Result<Spins> {
    let x = match s.trim() {
        "bottom" | "minus" => model.bottom(),
        "top" | "plus" => model.top(),
        other => other.parse::<Spins>()?,
    };
    model.validate_state(&x)?;
    Ok(x)
}

/// Runs CFTP, FMMR or FMMR_SET; `law` supplies the stationary law when a
/// conditional start has to be drawn.
fn run_plan<M>(
    model: &M,
    spec: &ExperimentSpec,
    coupling: Coupling<M::State>,
    start: M::State,
    set: Option<PrincipalSet<M::State>>,
    law: impl FnOnce() -> Result<Vec<(M::State, f64)>>,
) -> Result<Vec<RecordRow>>
where
    M: OrderedOrNot + Sync,
    M::State: fmt::Display + Send + Sync,
    M::Innovation: Send,
{
    let cfg = spec.sampler_config();
    let reps = match spec.algorithm {
        Algorithm::Cftp => replicate(spec.replications, spec.seed, |rng| cftp(model, &coupling, &cfg, rng))?,
        Algorithm::Fmmr => {
            model.validate_state(&start)?;
            replicate(spec.replications, spec.seed, |rng| fmmr(model, &coupling, &start, &cfg, rng))?
        }
        Algorithm::FmmrSet => {
            let set = set.ok_or_else(|| Error::InvalidInput("fmmr_set needs a target set".into()))?;
            let cond = conditional_law(model, &set, law()?)?;
            let member = |x: &M::State| model.in_principal(&set, x);
            let target = TargetSet::new(&member, set.shape);
            replicate(spec.replications, spec.seed, |rng| {
                fmmr_set(model, &coupling, &target, |r: &mut ChaCha8Rng| cond.draw(r), &cfg, rng)
            })?
        }
        Algorithm::Incremental => {
            return Err(Error::Unsupported("the incremental sampler exists only for the MTF chain".into()))
        }
    };
    Ok(rows(spec.algorithm, reps))
}

/// Membership in principal sets, for chains that have an order.
pub trait OrderedOrNot: ChainModel {
    fn in_principal(&self, set: &PrincipalSet<Self::State>, x: &Self::State) -> bool;
}

impl<M: OrderedChain> OrderedOrNot for M {
    fn in_principal(&self, set: &PrincipalSet<M::State>, x: &M::State) -> bool {
        match set.shape {
            SetShape::DownSet => self.leq(x, &set.apex),
            SetShape::UpSet => self.leq(&set.apex, x),
            SetShape::General => false,
        }
    }
}

impl OrderedOrNot for ThreeStateModel {
    fn in_principal(&self, _set: &PrincipalSet<u8>, _x: &u8) -> bool {
        false
    }
}

/// The stationary law restricted to a set and renormalized.
pub struct ConditionalLaw<S> {
    states: Vec<S>,
    index: WeightedIndex<f64>,
}

impl<S: Clone> ConditionalLaw<S> {
    pub fn new(law: Vec<(S, f64)>) -> Result<Self> {
        let (states, weights): (Vec<S>, Vec<f64>) = law.into_iter().unzip();
        let index = WeightedIndex::new(&weights).map_err(|e| Error::InvalidInput(format!("conditional law: {e}")))?;
        Ok(Self { states, index })
    }

    pub fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> S {
        self.states[self.index.sample(rng)].clone()
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }
}

fn conditional_law<M: OrderedOrNot>(
    model: &M,
    set: &PrincipalSet<M::State>,
    law: Vec<(M::State, f64)>,
) -> Result<ConditionalLaw<M::State>> {
    let inside: Vec<(M::State, f64)> = law.into_iter().filter(|(x, _)| model.in_principal(set, x)).collect();
    if inside.is_empty() {
        return Err(Error::InvalidInput("target set is empty".into()));
    }
    ConditionalLaw::new(inside)
}
