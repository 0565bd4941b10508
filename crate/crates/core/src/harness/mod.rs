//! Experiment runner, verification suite and scaling table behind the
//! `perfsamp` command line.

pub mod experiment;
pub mod table;
pub mod verify;

pub use experiment::{
    replicate, replicate_all, replication_seed, run_experiment, ChainSpec, ExperimentOutput, ExperimentSpec,
    OutputFormat, Summary, WeightSpec, FORMAT_VERSION,
};
pub use table::{scaling_table, write_scaling_csv, ScalingRow};
pub use verify::{verify_suite, CriterionResult, VerifyConfig, VerifyLevel};
