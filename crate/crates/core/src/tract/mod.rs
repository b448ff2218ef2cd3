//! Bayesian orientation model and the lattice trackers.

mod cache;
mod connectivity;
mod field;
mod likelihood;
mod posterior;
mod tracker;

pub use cache::LikelihoodCache;
pub use connectivity::{connectivity_map, ConnectivityMap, TrackingRun};
pub use field::{TensorField, VoxelFit};
pub use likelihood::{log_likelihood, LikelihoodModel};
pub use posterior::{posterior, prior_weight, sample_direction, OrientationDistribution};
pub use tracker::{
    stream_rng, track_deterministic, track_probabilistic, PriorMode, ProbabilisticTracker,
    StepAudit, StreamId, Streamline, TrackerConfig,
};

pub(crate) use tracker::{trace, StepPolicy, Visit};
