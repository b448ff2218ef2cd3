//! Tracking driven by network predictions.

use super::network::Network;
use super::patch::extract_patch_sized;
use super::patch::PatchSample;
use super::real::Real;
use crate::dti::TensorFitter;
use crate::dwi::DwiVolume;
use crate::error::{Error, Result};
use crate::tract::{trace, StepPolicy, Streamline, TrackerConfig, Visit, VoxelFit};
use crate::vec3::{dot, neg, Vec3};

/// Network orientation at `voxel`, or `None` when the window does not fit
/// inside the volume or the prediction is degenerate.
pub fn predict_voxel<T: Real>(
    net: &Network<T>,
    volume: &DwiVolume,
    voxel: [usize; 3],
) -> Result<Option<Vec3>> {
    let views = match extract_patch_sized(volume, voxel, net.architecture().patch) {
        Ok(v) => v,
        Err(Error::Precondition(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    if volume.n_shells() != net.architecture().shells {
        return Err(Error::Config(format!(
            "network expects {} shells, volume has {}",
            net.architecture().shells,
            volume.n_shells()
        )));
    }
    let (p, degenerate) = net.predict(&PatchSample {
        views,
        target: [1.0, 0.0, 0.0],
    })?;
    Ok((!degenerate).then_some(p))
}

struct LearnedPolicy<'a, T> {
    net: &'a Network<T>,
    volume: &'a DwiVolume,
    fitter: TensorFitter,
    fa_stop: f64,
    signals: Vec<f64>,
}

impl<T: Real> StepPolicy for LearnedPolicy<'_, T> {
    fn visit(&mut self, voxel: [usize; 3], incoming: Option<&Vec3>) -> Result<Visit> {
        self.volume.signals_into(voxel, &mut self.signals);
        let Ok(fit) = VoxelFit::from_signals(&self.fitter, &self.signals) else {
            return Ok(Visit::Reject);
        };
        if fit.fa < self.fa_stop {
            return Ok(Visit::Reject);
        }
        let Some(dir) = predict_voxel(self.net, self.volume, voxel)? else {
            return Ok(Visit::Terminal);
        };
        Ok(Visit::Step(match incoming {
            Some(prev) if dot(&dir, prev) < 0.0 => neg(&dir),
            _ => dir,
        }))
    }
}

/// Lattice tracking with directions from `net`. Anisotropy stopping uses the
/// tensor fit; voxels too close to the boundary for a full window end the
/// half-fiber.
pub fn track_learned<T: Real>(
    seed: [usize; 3],
    volume: &DwiVolume,
    net: &Network<T>,
    config: &TrackerConfig,
) -> Result<Streamline> {
    config.validate()?;
    if volume.n_shells() != net.architecture().shells {
        return Err(Error::Config(format!(
            "network expects {} shells, volume has {}",
            net.architecture().shells,
            volume.n_shells()
        )));
    }
    let mut policy = LearnedPolicy {
        net,
        volume,
        fitter: TensorFitter::new(volume.table())?,
        fa_stop: config.fa_stop,
        signals: Vec::with_capacity(volume.n_shells()),
    };
    trace(
        &mut policy,
        seed,
        volume.dims(),
        volume.voxel_size(),
        crate::sphere::shared_router(),
        config.max_steps,
    )
}
