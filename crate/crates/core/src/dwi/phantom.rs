use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    add_linear_noise, add_log_noise, synthesize_signal, DwiVolume, GradientTable, NoiseModel,
    SIGNAL_FLOOR,
};
use crate::dti::DiffusionTensor;
use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Voxels between a fiber's end and the volume boundary.
const END_MARGIN: usize = 2;
const MIN_DIM: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    /// Cylinder along x through the center of the y-z plane.
    Straight,
    /// Quarter torus in the x-y plane, centered near the origin corner.
    QuarterArc,
    /// Two straight cylinders along x and y crossing at the volume center.
    OrthogonalCrossing,
}

fn default_radius() -> f64 {
    2.0
}

fn default_voxel_size() -> Vec3 {
    [1.0; 3]
}

/// Everything needed to synthesize a phantom deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub geometry: Geometry,
    /// In-fiber eigenvalues (λ1 ≥ λ2 ≥ λ3 > 0) in mm²/s.
    pub eigenvalues: [f64; 3],
    pub baseline_s0: f64,
    /// Standard deviation of the log-signal perturbation.
    pub noise_sigma: f64,
    pub rng_seed: u64,
    #[serde(default)]
    pub noise_model: NoiseModel,
    /// Tube radius in voxels.
    #[serde(default = "default_radius")]
    pub fiber_radius: f64,
    #[serde(default = "default_voxel_size")]
    pub voxel_size: Vec3,
}

impl PhantomSpec {
    pub fn new(geometry: Geometry, noise_sigma: f64, rng_seed: u64) -> Self {
        Self {
            geometry,
            eigenvalues: [1.7e-3, 0.3e-3, 0.2e-3],
            baseline_s0: 100.0,
            noise_sigma,
            rng_seed,
            noise_model: NoiseModel::Log,
            fiber_radius: default_radius(),
            voxel_size: default_voxel_size(),
        }
    }

    fn validate(&self) -> Result<()> {
        let [l1, l2, l3] = self.eigenvalues;
        if !(l1 >= l2 && l2 >= l3 && l3 > 0.0) {
            return Err(Error::Config(format!(
                "phantom eigenvalues must satisfy λ1 ≥ λ2 ≥ λ3 > 0, got {:?}",
                self.eigenvalues
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise_sigma must be finite and ≥ 0".into()));
        }
        if !(self.baseline_s0 > 0.0) {
            return Err(Error::Config("baseline_s0 must be positive".into()));
        }
        if !(self.fiber_radius >= 0.5) {
            return Err(Error::Config("fiber_radius must be at least 0.5 voxel".into()));
        }
        Ok(())
    }

    pub fn mean_diffusivity(&self) -> f64 {
        self.eigenvalues.iter().sum::<f64>() / 3.0
    }
}

/// Per-voxel classification of a phantom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum VoxelLabel {
    Background = 0,
    Fiber = 1,
    /// Overlap of the two bundles of the crossing phantom.
    Crossing = 2,
}

/// Analytic fiber tangents for a generated phantom.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub dims: [usize; 3],
    /// Unit tangent per voxel; zero in the background. In crossing voxels
    /// this is the tangent of the x-directed bundle.
    pub tangents: Vec<Vec3>,
    pub labels: Vec<VoxelLabel>,
}

impl GroundTruth {
    fn index(&self, v: [usize; 3]) -> usize {
        v[0] + self.dims[0] * (v[1] + self.dims[1] * v[2])
    }

    pub fn label(&self, v: [usize; 3]) -> VoxelLabel {
        self.labels[self.index(v)]
    }

    pub fn tangent(&self, v: [usize; 3]) -> Option<Vec3> {
        match self.label(v) {
            VoxelLabel::Background => None,
            _ => Some(self.tangents[self.index(v)]),
        }
    }

    pub fn in_fiber(&self, v: [usize; 3]) -> bool {
        self.label(v) != VoxelLabel::Background
    }

    /// Fiber mask grown by one voxel in the 26-neighborhood.
    pub fn dilated_mask(&self) -> Vec<bool> {
        let [nx, ny, nz] = self.dims;
        let mut out = vec![false; nx * ny * nz];
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    if !self.in_fiber([x, y, z]) {
                        continue;
                    }
                    for dz in -1i64..=1 {
                        for dy in -1i64..=1 {
                            for dx in -1i64..=1 {
                                let (px, py, pz) =
                                    (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                                if px >= 0
                                    && py >= 0
                                    && pz >= 0
                                    && (px as usize) < nx
                                    && (py as usize) < ny
                                    && (pz as usize) < nz
                                {
                                    out[self.index([px as usize, py as usize, pz as usize])] = true;
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Orthonormal frame whose first axis is `t`.
fn frame(t: &Vec3) -> [Vec3; 3] {
    use crate::vec3::{cross, normalize};
    let helper = if t[2].abs() < 0.9 {
        [0.0, 0.0, 1.0]
    } else {
        [1.0, 0.0, 0.0]
    };
    let u = normalize(&cross(t, &helper)).expect("helper not parallel to tangent");
    let w = cross(t, &u);
    [*t, u, w]
}

/// Tensor with principal axis `t` and the given spectrum.
pub fn fiber_tensor(t: &Vec3, eigenvalues: [f64; 3]) -> DiffusionTensor {
    DiffusionTensor::from_eigen(eigenvalues, frame(t))
}

enum Occupancy {
    Empty,
    One(Vec3),
    Two(Vec3, Vec3),
}

struct Layout {
    geometry: Geometry,
    dims: [usize; 3],
    radius: f64,
    arc_center: [f64; 2],
    arc_radius: f64,
}

impl Layout {
    fn new(geometry: Geometry, dims: [usize; 3], radius: f64) -> Result<Self> {
        if dims.iter().any(|&d| d < MIN_DIM) {
            return Err(Error::Config(format!(
                "phantom dims must be ≥ {MIN_DIM} per axis, got {dims:?}"
            )));
        }
        let r_vox = radius.ceil() as usize;
        let [nx, ny, nz] = dims;
        let fits = |n: usize| 2 * r_vox + 2 * END_MARGIN < n;
        let (arc_center, arc_radius) = match geometry {
            Geometry::Straight => {
                if !(fits(ny) && fits(nz)) {
                    return Err(Error::Config("fiber tube does not fit the cross-section".into()));
                }
                ([0.0; 2], 0.0)
            }
            Geometry::OrthogonalCrossing => {
                if !(fits(nx) && fits(ny) && fits(nz)) {
                    return Err(Error::Config("crossing tubes do not fit the volume".into()));
                }
                ([0.0; 2], 0.0)
            }
            Geometry::QuarterArc => {
                let c = END_MARGIN as f64;
                let extent = nx.min(ny) as f64;
                let arc_radius = extent - 1.0 - c - radius - 1.0;
                if arc_radius - radius < 1.0 || !fits(nz) {
                    return Err(Error::Config(format!(
                        "quarter arc with tube radius {radius} does not fit dims {dims:?}"
                    )));
                }
                ([c, c], arc_radius)
            }
        };
        Ok(Self {
            geometry,
            dims,
            radius,
            arc_center,
            arc_radius,
        })
    }

    fn occupancy(&self, v: [usize; 3]) -> Occupancy {
        let [nx, ny, nz] = self.dims;
        let p = [v[0] as f64, v[1] as f64, v[2] as f64];
        let (cx, cy, cz) = ((nx / 2) as f64, (ny / 2) as f64, (nz / 2) as f64);
        let r2 = self.radius * self.radius;
        let span = |i: usize, n: usize| i >= END_MARGIN && i + END_MARGIN < n;
        let along_x = || span(v[0], nx) && (p[1] - cy).powi(2) + (p[2] - cz).powi(2) <= r2;
        let along_y = || span(v[1], ny) && (p[0] - cx).powi(2) + (p[2] - cz).powi(2) <= r2;
        match self.geometry {
            Geometry::Straight => {
                if along_x() {
                    Occupancy::One([1.0, 0.0, 0.0])
                } else {
                    Occupancy::Empty
                }
            }
            Geometry::OrthogonalCrossing => match (along_x(), along_y()) {
                (true, true) => Occupancy::Two([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
                (true, false) => Occupancy::One([1.0, 0.0, 0.0]),
                (false, true) => Occupancy::One([0.0, 1.0, 0.0]),
                (false, false) => Occupancy::Empty,
            },
            Geometry::QuarterArc => {
                let dx = p[0] - self.arc_center[0];
                let dy = p[1] - self.arc_center[1];
                if dx < 0.0 || dy < 0.0 {
                    return Occupancy::Empty;
                }
                let rho = dx.hypot(dy);
                if (rho - self.arc_radius).powi(2) + (p[2] - cz).powi(2) > r2 {
                    return Occupancy::Empty;
                }
                let phi = dy.atan2(dx);
                Occupancy::One(arc_tangent(phi))
            }
        }
    }
}

/// Tangent of the quarter arc at polar angle `phi`.
pub fn arc_tangent(phi: f64) -> Vec3 {
    [-phi.sin(), phi.cos(), 0.0]
}

/// Synthesizes a phantom volume and its ground-truth tangent field.
pub fn generate_phantom(
    spec: &PhantomSpec,
    dims: [usize; 3],
    table: &GradientTable,
) -> Result<(DwiVolume, GroundTruth)> {
    spec.validate()?;
    let layout = Layout::new(spec.geometry, dims, spec.fiber_radius)?;
    let n_vox = dims[0] * dims[1] * dims[2];
    let n_shells = table.len();
    let md = spec.mean_diffusivity();
    let background = DiffusionTensor::isotropic(md);
    let s0 = spec.baseline_s0;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut data = vec![0f32; n_vox * n_shells];
    let mut tangents = vec![[0.0; 3]; n_vox];
    let mut labels = vec![VoxelLabel::Background; n_vox];
    let mut clean = vec![0.0; n_shells];

    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let idx = x + dims[0] * (y + dims[1] * z);
                match layout.occupancy([x, y, z]) {
                    Occupancy::Empty => {
                        for (c, e) in clean.iter_mut().zip(table.iter()) {
                            *c = synthesize_signal(&background, s0, e);
                        }
                    }
                    Occupancy::One(t) => {
                        let d = fiber_tensor(&t, spec.eigenvalues);
                        for (c, e) in clean.iter_mut().zip(table.iter()) {
                            *c = synthesize_signal(&d, s0, e);
                        }
                        tangents[idx] = t;
                        labels[idx] = VoxelLabel::Fiber;
                    }
                    Occupancy::Two(a, b) => {
                        let da = fiber_tensor(&a, spec.eigenvalues);
                        let db = fiber_tensor(&b, spec.eigenvalues);
                        for (c, e) in clean.iter_mut().zip(table.iter()) {
                            *c = 0.5 * (synthesize_signal(&da, s0, e) + synthesize_signal(&db, s0, e));
                        }
                        tangents[idx] = a;
                        labels[idx] = VoxelLabel::Crossing;
                    }
                }
                for (s, &c) in clean.iter().enumerate() {
                    let noisy = match spec.noise_model {
                        NoiseModel::Log => add_log_noise(c, spec.noise_sigma, &mut rng),
                        NoiseModel::Linear => add_linear_noise(c, spec.noise_sigma, s0, &mut rng),
                    };
                    data[idx + n_vox * s] = noisy.max(SIGNAL_FLOOR) as f32;
                }
            }
        }
    }

    let volume = DwiVolume::new(dims, spec.voxel_size, table.clone(), data)?;
    Ok((
        volume,
        GroundTruth {
            dims,
            tangents,
            labels,
        },
    ))
}
