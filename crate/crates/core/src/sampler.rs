//! Perfect samplers: coupling from the past (CFTP), the interruptible
//! rejection sampler FMMR started from a chosen state, and its
//! set-coalescence variant.
//!
//! All three search windows `t = 1, 2, 3, ...` (or `1, 2, 4, ...` with the
//! doubling schedule). Randomness drawn for a window is kept and reused by
//! every longer window: CFTP keeps its innovations `U_0, U_{-1}, ...`, FMMR
//! keeps its backward trajectory and the imputed innovations. Forward
//! trajectories are recomputed for each window.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainModel, FiniteStates, OrderedChain};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Cftp,
    Fmmr,
    FmmrSet,
    Incremental,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cftp => "cftp",
            Self::Fmmr => "fmmr",
            Self::FmmrSet => "fmmr_set",
            Self::Incremental => "incremental",
        })
    }
}

/// Outcome of one successful run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord<S> {
    pub algorithm: Algorithm,
    /// Smallest successful window length, in chain transitions.
    pub window: u64,
    /// Every forward and backward elementary update executed.
    pub total_steps: u64,
    pub output: S,
    pub seed: Option<u64>,
    pub start_state: Option<S>,
    pub coalesced_to: Option<S>,
}

impl<S> RunRecord<S> {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// `t = 1, 2, 3, ...`
    #[default]
    Vanilla,
    /// `t = 1, 2, 4, 8, ...`
    Doubling,
}

impl Schedule {
    fn next(self, t: u64) -> u64 {
        match self {
            Self::Vanilla => t + 1,
            Self::Doubling => t * 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub max_window: u64,
    pub schedule: Schedule,
}

impl SamplerConfig {
    pub fn vanilla(max_window: u64) -> Self {
        Self { max_window, schedule: Schedule::Vanilla }
    }

    pub fn doubling(max_window: u64) -> Self {
        Self { max_window, schedule: Schedule::Doubling }
    }
}

/// Which forward trajectories are run in the coalescence check.
#[derive(Debug, Clone, PartialEq)]
pub enum Coupling<S> {
    /// One trajectory per state, with duplicates collapsed after each step.
    AllStates(Vec<S>),
    /// Only the trajectories from the minimum and the maximum of a
    /// monotone rule; the rest are sandwiched between them.
    Monotone { bottom: S, top: S },
}

impl<S: Clone> Coupling<S> {
    pub fn all_states<M: FiniteStates<State = S>>(model: &M) -> Result<Self> {
        Ok(Self::AllStates(model.states()?))
    }

    pub fn monotone<M: OrderedChain<State = S>>(model: &M) -> Self {
        Self::Monotone { bottom: model.bottom(), top: model.top() }
    }

    fn starts(&self) -> Vec<S> {
        match self {
            Self::AllStates(s) => s.clone(),
            Self::Monotone { bottom, top } => vec![bottom.clone(), top.clone()],
        }
    }
}

/// Shape of a target set for the set-coalescence check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetShape {
    /// Closed downward: under a monotone coupling only the trajectory from
    /// the maximum is checked.
    DownSet,
    /// Closed upward: only the trajectory from the minimum is checked.
    UpSet,
    /// Arbitrary; needs [`Coupling::AllStates`].
    General,
}

pub struct TargetSet<'a, S> {
    member: &'a (dyn Fn(&S) -> bool + Sync),
    shape: SetShape,
}

impl<'a, S> TargetSet<'a, S> {
    pub fn new(member: &'a (dyn Fn(&S) -> bool + Sync), shape: SetShape) -> Self {
        Self { member, shape }
    }

    pub fn contains(&self, x: &S) -> bool {
        (self.member)(x)
    }
}

/// Runs the forward trajectories of `coupling` from time `-t` to `0`.
/// `innovations[j]` drives the step into time `-j`. Returns the images at
/// time 0 (deduplicated for `AllStates`, `[from_bottom, from_top]` for
/// `Monotone`) and the number of transitions executed.
fn forward_images<M: ChainModel>(
    model: &M,
    coupling: &Coupling<M::State>,
    innovations: &[M::Innovation],
    t: usize,
) -> (Vec<M::State>, u64) {
    let mut images = coupling.starts();
    let mut steps = 0u64;
    let dedup = matches!(coupling, Coupling::AllStates(_));
    for u in innovations[..t].iter().rev() {
        steps += images.len() as u64;
        for x in images.iter_mut() {
            *x = model.forward(x, u);
        }
        if dedup {
            images.sort();
            images.dedup();
        }
    }
    (images, steps)
}

fn coalesced<S: Eq>(images: &[S]) -> bool {
    images.windows(2).all(|w| w[0] == w[1])
}

/// Vanilla coupling from the past.
pub fn cftp<M, R>(
    model: &M,
    coupling: &Coupling<M::State>,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<RunRecord<M::State>>
where
    M: ChainModel,
    R: Rng + ?Sized,
{
    cftp_observed(model, coupling, cfg, rng, |_, _| {})
}

/// [`cftp`] reporting, before each window is tried, the innovations it
/// uses (`slice[j]` drives the step into time `-j`).
pub fn cftp_observed<M, R, F>(
    model: &M,
    coupling: &Coupling<M::State>,
    cfg: &SamplerConfig,
    rng: &mut R,
    mut observe: F,
) -> Result<RunRecord<M::State>>
where
    M: ChainModel,
    R: Rng + ?Sized,
    F: FnMut(u64, &[M::Innovation]),
{
    let mut innovations: Vec<M::Innovation> = Vec::new();
    let mut total = 0u64;
    let per = model.steps_per_transition();
    let mut t = 1u64;
    while t <= cfg.max_window {
        while (innovations.len() as u64) < t {
            innovations.push(model.sample_innovation(rng));
        }
        observe(t, &innovations[..t as usize]);
        let (images, steps) = forward_images(model, coupling, &innovations, t as usize);
        total += steps * per;
        if coalesced(&images) {
            let z = images[0].clone();
            return Ok(RunRecord {
                algorithm: Algorithm::Cftp,
                window: t,
                total_steps: total,
                output: z.clone(),
                seed: None,
                start_state: None,
                coalesced_to: Some(z),
            });
        }
        t = cfg.schedule.next(t);
    }
    Err(Error::Timeout { max_window: cfg.max_window, total_steps: total })
}

/// Backward trajectory of the reversed chain with imputed innovations,
/// extended lazily and shared across windows.
struct BackwardPath<S, U> {
    /// `states[j]` is `X_{-j}`.
    states: Vec<S>,
    /// `innovations[j]` drives `X_{-(j+1)} -> X_{-j}`.
    innovations: Vec<U>,
}

impl<S: Clone, U> BackwardPath<S, U> {
    fn new(start: S) -> Self {
        Self { states: vec![start], innovations: Vec::new() }
    }

    /// Extends to length `t`, returning the number of reverse steps taken.
    fn extend_to<M, R>(&mut self, model: &M, t: usize, rng: &mut R) -> Result<u64>
    where
        M: ChainModel<State = S, Innovation = U>,
        R: Rng + ?Sized,
    {
        let mut steps = 0;
        while self.innovations.len() < t {
            let next = self.states.last().expect("path is never empty").clone();
            let prev = model.reverse_step(&next, rng);
            let u = model.impute(&prev, &next, rng)?;
            self.states.push(prev);
            self.innovations.push(u);
            steps += 1;
        }
        Ok(steps)
    }
}

/// FMMR started from `z0`. Output is `X_{-T}` where `T` is the first window
/// over which all forward trajectories coalesce (necessarily to `z0`).
pub fn fmmr<M, R>(
    model: &M,
    coupling: &Coupling<M::State>,
    z0: &M::State,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<RunRecord<M::State>>
where
    M: ChainModel,
    R: Rng + ?Sized,
{
    model.validate_state(z0)?;
    let mut path = BackwardPath::new(z0.clone());
    let mut total = 0u64;
    let per = model.steps_per_transition();
    let mut t = 1u64;
    while t <= cfg.max_window {
        total += path.extend_to(model, t as usize, rng)? * per;
        let (images, steps) = forward_images(model, coupling, &path.innovations, t as usize);
        total += steps * per;
        if coalesced(&images) {
            debug_assert!(images[0] == *z0);
            return Ok(RunRecord {
                algorithm: Algorithm::Fmmr,
                window: t,
                total_steps: total,
                output: path.states[t as usize].clone(),
                seed: None,
                start_state: Some(z0.clone()),
                coalesced_to: Some(z0.clone()),
            });
        }
        t = cfg.schedule.next(t);
    }
    Err(Error::Timeout { max_window: cfg.max_window, total_steps: total })
}

fn all_in_set<S>(images: &[S], coupling: &Coupling<S>, set: &TargetSet<'_, S>) -> Result<bool> {
    match (coupling, set.shape) {
        (Coupling::AllStates(_), _) => Ok(images.iter().all(|x| set.contains(x))),
        (Coupling::Monotone { .. }, SetShape::DownSet) => Ok(set.contains(&images[1])),
        (Coupling::Monotone { .. }, SetShape::UpSet) => Ok(set.contains(&images[0])),
        (Coupling::Monotone { .. }, SetShape::General) => {
            Err(Error::Unsupported("a general target set needs the all-states coupling".into()))
        }
    }
}

/// FMMR with coalescence into a set `S`: start from `X_0 ~ pi(. | S)` drawn
/// by `cond_sampler`, stop at the first `t` (possibly 0) such that every
/// forward trajectory from time `-t` ends in `S`, and output `X_{-t}`.
pub fn fmmr_set<M, R, F>(
    model: &M,
    coupling: &Coupling<M::State>,
    set: &TargetSet<'_, M::State>,
    mut cond_sampler: F,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<RunRecord<M::State>>
where
    M: ChainModel,
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> M::State,
{
    let x0 = cond_sampler(rng);
    model.validate_state(&x0)?;
    if !set.contains(&x0) {
        return Err(Error::InvalidInput(format!("conditional sampler returned {x0:?} outside the set")));
    }
    let record = |window: u64, total_steps: u64, output: M::State| RunRecord {
        algorithm: Algorithm::FmmrSet,
        window,
        total_steps,
        output,
        seed: None,
        start_state: Some(x0.clone()),
        coalesced_to: None,
    };
    // Window 0: the identity map lands in S only if S is everything.
    if all_in_set(&coupling.starts(), coupling, set)? {
        return Ok(record(0, 0, x0.clone()));
    }
    let mut path = BackwardPath::new(x0.clone());
    let mut total = 0u64;
    let per = model.steps_per_transition();
    let mut t = 1u64;
    while t <= cfg.max_window {
        total += path.extend_to(model, t as usize, rng)? * per;
        let (images, steps) = forward_images(model, coupling, &path.innovations, t as usize);
        total += steps * per;
        if all_in_set(&images, coupling, set)? {
            return Ok(record(t, total, path.states[t as usize].clone()));
        }
        t = cfg.schedule.next(t);
    }
    Err(Error::Timeout { max_window: cfg.max_window, total_steps: total })
}
