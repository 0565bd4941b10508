//! Perfect sampling from Markov chain stationary laws.
//!
//! Coupling from the past, the interruptible FMMR algorithm (with an arbitrary
//! start state and with a conditional start set), the move-to-front chain
//! and its incremental exact sampler, exact running-time laws, and a
//! reproducible experiment harness.

pub mod analytics;
pub mod chain;
pub mod error;
pub mod harness;
pub mod mtf;
pub mod numeric;
pub mod sampler;
pub mod stats;
pub mod toy;

pub use chain::{ChainModel, FiniteInnovations, FiniteStates, KernelMatrix, OrderedChain};
pub use error::{Error, Result};
pub use mtf::{MtfModel, Permutation, WeightFamily, WeightVector};
pub use sampler::{cftp, fmmr, fmmr_set, Algorithm, Coupling, RunRecord, SamplerConfig, Schedule};
pub use stats::StatReport;
pub use toy::{SpinChainModel, Spins, SweepDir, ThreeStateModel};
