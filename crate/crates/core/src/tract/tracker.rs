use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cache::LikelihoodCache;
use super::field::{TensorField, VoxelFit};
use super::likelihood::LikelihoodModel;
use super::posterior::{posterior, sample_direction, OrientationDistribution};
use crate::dti::TensorFitter;
use crate::dwi::DwiVolume;
use crate::error::{Error, Result};
use crate::sphere::{icosphere, route, RouterTable, SpherePointSet};
use crate::vec3::{dot, neg, Vec3};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorMode {
    #[default]
    ClampedLinear,
}

/// Tracking parameters shared by all three trackers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub fa_stop: f64,
    /// Step cap per half-fiber.
    pub max_steps: usize,
    pub samples_per_seed: usize,
    pub rng_seed: u64,
    pub prior_mode: PriorMode,
    pub sphere_level: u8,
    /// Fixed noise scale for the likelihood; the residual estimate is used
    /// when absent.
    pub sigma_override: Option<f64>,
    /// Lower bound on the residual-based noise estimate.
    pub sigma_floor: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            fa_stop: 0.15,
            max_steps: 2000,
            samples_per_seed: 1,
            rng_seed: 0,
            prior_mode: PriorMode::ClampedLinear,
            sphere_level: crate::sphere::DEFAULT_LEVEL,
            sigma_override: None,
            sigma_floor: 1e-3,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fa_stop) {
            return Err(Error::Config(format!("fa_stop {} outside [0, 1]", self.fa_stop)));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be ≥ 1".into()));
        }
        if let Some(s) = self.sigma_override {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("sigma override {s} must be positive")));
            }
        }
        if !(self.sigma_floor > 0.0) {
            return Err(Error::Config("sigma_floor must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn noise_scale(&self, residual_sigma: f64) -> f64 {
        self.sigma_override
            .unwrap_or_else(|| residual_sigma.max(self.sigma_floor))
    }
}

/// A tracked fiber: voxel centers in millimetres plus the voxels themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct Streamline {
    pub points: Vec<Vec3>,
    pub voxels: Vec<[usize; 3]>,
}

impl Streamline {
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }
}

/// Outcome of visiting a voxel while tracing.
pub(crate) enum Visit {
    /// The voxel is not part of the fiber (low anisotropy, failed fit).
    Reject,
    /// The voxel belongs to the fiber but no direction leaves it.
    Terminal,
    Step(Vec3),
}

/// Supplies directions to the shared lattice-stepping loop.
pub(crate) trait StepPolicy {
    fn visit(&mut self, voxel: [usize; 3], incoming: Option<&Vec3>) -> Result<Visit>;
}

/// Launches two half-fibers from `seed` along ±(initial direction) and
/// joins them into one streamline.
pub(crate) fn trace<P: StepPolicy>(
    policy: &mut P,
    seed: [usize; 3],
    dims: [usize; 3],
    voxel_size: Vec3,
    router: &RouterTable,
    max_steps: usize,
) -> Result<Streamline> {
    if seed.iter().zip(dims.iter()).any(|(s, d)| s >= d) {
        return Err(Error::SeedRejected(format!("seed {seed:?} outside volume {dims:?}")));
    }
    let initial = match policy.visit(seed, None)? {
        Visit::Step(v) => v,
        Visit::Reject => {
            return Err(Error::SeedRejected(format!(
                "seed {seed:?} is below the anisotropy threshold"
            )))
        }
        Visit::Terminal => {
            return Err(Error::SeedRejected(format!("no direction leaves seed {seed:?}")))
        }
    };
    let forward = half_fiber(policy, seed, initial, dims, router, max_steps)?;
    let backward = half_fiber(policy, seed, neg(&initial), dims, router, max_steps)?;
    let voxels: Vec<[usize; 3]> = backward
        .into_iter()
        .rev()
        .chain(std::iter::once(seed))
        .chain(forward)
        .collect();
    let points = voxels
        .iter()
        .map(|v| {
            [0, 1, 2].map(|k| (v[k] as f64 + 0.5) * voxel_size[k])
        })
        .collect();
    Ok(Streamline { points, voxels })
}

fn half_fiber<P: StepPolicy>(
    policy: &mut P,
    seed: [usize; 3],
    direction: Vec3,
    dims: [usize; 3],
    router: &RouterTable,
    max_steps: usize,
) -> Result<Vec<[usize; 3]>> {
    let mut out = Vec::new();
    let mut pos = seed.map(|c| c as i64);
    let mut dir = direction;
    for _ in 0..max_steps {
        let next = route(&dir, router)?.apply(pos);
        if next.iter().zip(dims.iter()).any(|(&c, &d)| c < 0 || c as usize >= d) {
            break;
        }
        let voxel = next.map(|c| c as usize);
        match policy.visit(voxel, Some(&dir))? {
            Visit::Reject => break,
            Visit::Terminal => {
                out.push(voxel);
                break;
            }
            Visit::Step(d) => {
                out.push(voxel);
                pos = next;
                dir = d;
            }
        }
    }
    Ok(out)
}

struct DeterministicPolicy<'a> {
    field: &'a TensorField,
    fa_stop: f64,
}

impl StepPolicy for DeterministicPolicy<'_> {
    fn visit(&mut self, voxel: [usize; 3], incoming: Option<&Vec3>) -> Result<Visit> {
        let Some(fit) = self.field.get(voxel) else {
            return Ok(Visit::Reject);
        };
        if fit.fa < self.fa_stop {
            return Ok(Visit::Reject);
        }
        let e1 = fit.decomposition.principal();
        Ok(Visit::Step(match incoming {
            Some(prev) if dot(&e1, prev) < 0.0 => neg(&e1),
            _ => e1,
        }))
    }
}

/// Follows the principal eigenvector from voxel to neighboring voxel.
pub fn track_deterministic(
    seed: [usize; 3],
    field: &TensorField,
    config: &TrackerConfig,
) -> Result<Streamline> {
    config.validate()?;
    let mut policy = DeterministicPolicy {
        field,
        fa_stop: config.fa_stop,
    };
    trace(
        &mut policy,
        seed,
        field.dims(),
        field.voxel_size(),
        crate::sphere::shared_router(),
        config.max_steps,
    )
}

/// Per-step posterior diagnostics collected by
/// [`ProbabilisticTracker::track_audited`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepAudit {
    pub voxel: [usize; 3],
    /// Σ probs of the posterior used to leave this voxel.
    pub total_mass: f64,
    /// Mass on points with negative dot product with the incoming direction.
    pub backward_mass: f64,
}

/// Identifies an independent random stream: `(seed index, sample index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamId {
    pub seed_index: u32,
    pub sample_index: u32,
}

/// Deterministic RNG for one streamline, independent of scheduling order.
pub fn stream_rng(rng_seed: u64, id: StreamId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream((u64::from(id.seed_index) << 32) | u64::from(id.sample_index));
    rng
}

/// Bayesian probabilistic tracker over a read-only volume.
pub struct ProbabilisticTracker<'a> {
    volume: &'a DwiVolume,
    fitter: TensorFitter,
    sphere: Arc<SpherePointSet>,
    router: RouterTable,
    config: TrackerConfig,
}

impl<'a> ProbabilisticTracker<'a> {
    pub fn new(volume: &'a DwiVolume, config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        let sphere = Arc::new(icosphere(config.sphere_level)?);
        Ok(Self {
            volume,
            fitter: TensorFitter::new(volume.table())?,
            sphere,
            router: crate::sphere::build_router(),
            config,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn sphere(&self) -> &Arc<SpherePointSet> {
        &self.sphere
    }

    pub fn volume(&self) -> &DwiVolume {
        self.volume
    }

    pub fn voxel_fit(&self, voxel: [usize; 3]) -> Result<VoxelFit> {
        let signals = self.volume.signals(voxel);
        VoxelFit::from_signals(&self.fitter, &signals)
    }

    /// Log-likelihood vector over the sphere for one voxel, uncached.
    pub fn likelihood_vector(&self, voxel: [usize; 3], fit: &VoxelFit) -> Result<Vec<f64>> {
        let signals = self.volume.signals(voxel);
        let params = fit.model_params(self.config.noise_scale(fit.fit.sigma));
        let model = LikelihoodModel::new(&signals, &params, self.volume.table())?;
        Ok(model.eval_sphere(&self.sphere))
    }

    fn likelihoods(
        &self,
        voxel: [usize; 3],
        fit: &VoxelFit,
        cache: Option<&LikelihoodCache>,
    ) -> Result<Arc<[f64]>> {
        match cache {
            None => Ok(self.likelihood_vector(voxel, fit)?.into()),
            Some(cache) => {
                // validate outside the infallible cache initializer
                let params = fit.model_params(self.config.noise_scale(fit.fit.sigma));
                let signals = self.volume.signals(voxel);
                let model = LikelihoodModel::new(&signals, &params, self.volume.table())?;
                Ok(cache.get_or_compute(self.volume.voxel_index(voxel), || {
                    model.eval_sphere(&self.sphere)
                }))
            }
        }
    }

    /// Full posterior at one voxel given the incoming direction.
    pub fn posterior_at(
        &self,
        voxel: [usize; 3],
        incoming: Option<&Vec3>,
        cache: Option<&LikelihoodCache>,
    ) -> Result<OrientationDistribution> {
        let fit = self.voxel_fit(voxel)?;
        let ll = self.likelihoods(voxel, &fit, cache)?;
        posterior(&ll, incoming, &self.sphere)
    }

    pub fn track(
        &self,
        seed: [usize; 3],
        stream: StreamId,
        cache: Option<&LikelihoodCache>,
    ) -> Result<Streamline> {
        self.run(seed, stream, cache, None)
    }

    /// Like [`track`](Self::track) and also returns one audit record per
    /// posterior evaluation.
    pub fn track_audited(
        &self,
        seed: [usize; 3],
        stream: StreamId,
        cache: Option<&LikelihoodCache>,
    ) -> Result<(Streamline, Vec<StepAudit>)> {
        let mut audit = Vec::new();
        let s = self.run(seed, stream, cache, Some(&mut audit))?;
        Ok((s, audit))
    }

    fn run(
        &self,
        seed: [usize; 3],
        stream: StreamId,
        cache: Option<&LikelihoodCache>,
        audit: Option<&mut Vec<StepAudit>>,
    ) -> Result<Streamline> {
        let mut policy = BayesPolicy {
            tracker: self,
            rng: stream_rng(self.config.rng_seed, stream),
            cache,
            audit,
        };
        trace(
            &mut policy,
            seed,
            self.volume.dims(),
            self.volume.voxel_size(),
            &self.router,
            self.config.max_steps,
        )
    }
}

struct BayesPolicy<'t, 'a> {
    tracker: &'t ProbabilisticTracker<'a>,
    rng: ChaCha8Rng,
    cache: Option<&'t LikelihoodCache>,
    audit: Option<&'t mut Vec<StepAudit>>,
}

impl StepPolicy for BayesPolicy<'_, '_> {
    fn visit(&mut self, voxel: [usize; 3], incoming: Option<&Vec3>) -> Result<Visit> {
        let t = self.tracker;
        let Ok(fit) = t.voxel_fit(voxel) else {
            return Ok(Visit::Reject);
        };
        if fit.fa < t.config.fa_stop {
            return Ok(Visit::Reject);
        }
        let ll = t.likelihoods(voxel, &fit, self.cache)?;
        let dist = match posterior(&ll, incoming, &t.sphere) {
            Ok(d) => d,
            Err(Error::DeadEnd) => return Ok(Visit::Terminal),
            Err(e) => return Err(e),
        };
        if let Some(audit) = self.audit.as_deref_mut() {
            let backward_mass = match incoming {
                Some(prev) => dist
                    .probs()
                    .iter()
                    .zip(t.sphere.points())
                    .filter(|(_, p)| dot(p, prev) < 0.0)
                    .map(|(m, _)| *m)
                    .sum(),
                None => 0.0,
            };
            audit.push(StepAudit {
                voxel,
                total_mass: dist.probs().iter().sum(),
                backward_mass,
            });
        }
        let k = sample_direction(&dist, &mut self.rng);
        Ok(Visit::Step(t.sphere.point(k)))
    }
}

/// Convenience wrapper building a tracker for a single call.
pub fn track_probabilistic(
    seed: [usize; 3],
    volume: &DwiVolume,
    config: &TrackerConfig,
    cache: Option<&LikelihoodCache>,
) -> Result<Streamline> {
    ProbabilisticTracker::new(volume, config.clone())?.track(
        seed,
        StreamId {
            seed_index: 0,
            sample_index: 0,
        },
        cache,
    )
}
