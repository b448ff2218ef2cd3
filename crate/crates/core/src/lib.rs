//! Diffusion-MRI fiber tracking: log-linear tensor fitting, Bayesian
//! probabilistic tractography on the voxel lattice, and a convolutional
//! orientation estimator trained with an atan2 angular loss.

pub mod bench;
pub mod dti;
pub mod dwi;
pub mod error;
pub mod io;
pub mod loss;
pub mod nn;
pub mod sphere;
pub mod tract;
pub mod vec3;

pub use error::{Error, Result};
