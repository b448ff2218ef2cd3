//! Orientation-estimation network: layers, training and learned tracking.

mod arch;
pub mod checkpoint;
mod dataset;
mod layers;
mod learned;
mod network;
mod optim;
mod patch;
mod real;
mod train;

pub use arch::{Architecture, ConvSpec, LayerShape, REFERENCE_SHELLS};
pub use dataset::{random_direction, synthetic_patches, SyntheticSpec};
pub use layers::{
    center_crop, channel_pool_forward, concat_channels, maxpool_backward, maxpool_forward,
    Conv2d, FeatureMap, Linear, Pooled,
};
pub use learned::{predict_voxel, track_learned};
pub use network::{Branch, Dropout, ForwardTrace, Network, ParamRef, SampleLoss, DEGENERATE_NORM};
pub use optim::{rmsprop_update, RmsProp};
pub use patch::{extract_patch, extract_patch_sized, PatchSample, PATCH_SIZE};
pub use real::Real;
pub use train::{
    angular_errors, batch_gradient, evaluate, history_csv, summarize, train, train_step,
    EpochRecord, ErrorSummary, StopReason, TrainConfig, TrainOutcome,
};
