//! Filtering of stochastic reaction networks from exact snapshot observations
//! by conditioned path sampling.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod experiment;
pub mod intensity;
pub mod metrics;
pub mod network;
pub mod observation;
pub mod oracles;
pub mod pmf;
pub mod rng;
pub mod simulate;
pub mod split;
pub mod targeting;

pub use error::{Error, Result};
pub use exec::Exec;
pub use experiment::{run_trials, Method, OracleKind, Problem, TrialSummary};
pub use intensity::IntensityGrid;
pub use network::ReactionNetwork;
pub use observation::{Snapshot, SnapshotSeq};
pub use pmf::{Pmf, State};
pub use rng::StreamKey;
pub use split::ObservationSplit;
pub use targeting::{
    IntensityPlan, ResampleScheme, TargetingOptions, TwoStageMode, WeightedEnsemble,
};
