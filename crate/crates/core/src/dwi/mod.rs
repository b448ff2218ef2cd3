//! Signal model, gradient tables and synthetic DWI volumes.

mod gradient;
mod noise;
mod phantom;

pub use gradient::{GradientEntry, GradientTable};
pub use noise::{add_linear_noise, add_log_noise, NoiseModel};
pub use phantom::{
    arc_tangent, fiber_tensor, generate_phantom, Geometry, GroundTruth, PhantomSpec, VoxelLabel,
};

use serde::{Deserialize, Serialize};

use crate::dti::DiffusionTensor;
use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Lower bound applied to every stored signal so that logarithms stay finite.
pub const SIGNAL_FLOOR: f64 = 1e-12;

/// Pulse-sequence parameters, all in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionParams {
    /// Gyromagnetic ratio in rad/(s·T).
    pub gamma: f64,
    /// Gradient strength in T/m.
    pub gradient_strength: f64,
    /// Duration of one diffusion-encoding pulse in s.
    pub pulse_duration: f64,
    /// Separation between the two pulses in s.
    pub pulse_separation: f64,
}

/// Diffusion weighting `(γGδ)²(Δ − δ/3)` in s/mm².
pub fn b_value(params: &AcquisitionParams) -> Result<f64> {
    let AcquisitionParams {
        gamma,
        gradient_strength,
        pulse_duration,
        pulse_separation,
    } = *params;
    if [gamma, gradient_strength, pulse_duration, pulse_separation]
        .iter()
        .any(|v| !(v.is_finite() && *v >= 0.0))
    {
        return Err(Error::Domain(
            "acquisition parameters must be finite and nonnegative".into(),
        ));
    }
    let window = pulse_separation - pulse_duration / 3.0;
    if window < 0.0 {
        return Err(Error::Domain(format!(
            "pulse separation {pulse_separation} s is shorter than a third of the pulse duration {pulse_duration} s"
        )));
    }
    let q = gamma * gradient_strength * pulse_duration;
    // s/m² -> s/mm²
    Ok(q * q * window * 1e-6)
}

/// Mono-exponential attenuation `S0·exp(−b·gᵀDg)`.
#[inline]
pub fn synthesize_signal(tensor: &DiffusionTensor, s0: f64, entry: &GradientEntry) -> f64 {
    s0 * (-entry.b_value * tensor.quadratic_form(&entry.gradient)).exp()
}

/// A 4D diffusion-weighted image: three spatial axes plus one axis over
/// gradient table entries. Storage is x-fastest, then y, z and entry.
#[derive(Debug, Clone, PartialEq)]
pub struct DwiVolume {
    dims: [usize; 3],
    voxel_size: Vec3,
    table: GradientTable,
    data: Vec<f32>,
}

impl DwiVolume {
    pub fn new(
        dims: [usize; 3],
        voxel_size: Vec3,
        table: GradientTable,
        data: Vec<f32>,
    ) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Config(format!("volume dims must be positive, got {dims:?}")));
        }
        if voxel_size.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(format!(
                "voxel size must be positive, got {voxel_size:?}"
            )));
        }
        let expected = dims[0] * dims[1] * dims[2] * table.len();
        if data.len() != expected {
            return Err(Error::Config(format!(
                "volume holds {} samples but dims {:?} x {} entries need {expected}",
                data.len(),
                dims,
                table.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Config(format!(
                "stored signals must be positive and finite, found {bad}"
            )));
        }
        Ok(Self {
            dims,
            voxel_size,
            table,
            data,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn n_shells(&self) -> usize {
        self.table.len()
    }

    pub fn voxel_size(&self) -> Vec3 {
        self.voxel_size
    }

    pub fn table(&self) -> &GradientTable {
        &self.table
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn n_voxels(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Linear index of a voxel within one shell.
    #[inline]
    pub fn voxel_index(&self, voxel: [usize; 3]) -> usize {
        voxel[0] + self.dims[0] * (voxel[1] + self.dims[1] * voxel[2])
    }

    pub fn voxel_coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.dims[0];
        let y = (index / self.dims[0]) % self.dims[1];
        let z = index / (self.dims[0] * self.dims[1]);
        [x, y, z]
    }

    pub fn contains(&self, voxel: [i64; 3]) -> bool {
        voxel
            .iter()
            .zip(self.dims.iter())
            .all(|(&v, &d)| v >= 0 && (v as usize) < d)
    }

    #[inline]
    pub fn signal(&self, voxel: [usize; 3], shell: usize) -> f32 {
        self.data[self.voxel_index(voxel) + self.n_voxels() * shell]
    }

    /// Copies the per-shell signals of one voxel into `out`.
    pub fn signals_into(&self, voxel: [usize; 3], out: &mut Vec<f64>) {
        let base = self.voxel_index(voxel);
        let stride = self.n_voxels();
        out.clear();
        out.extend((0..self.n_shells()).map(|s| f64::from(self.data[base + s * stride])));
    }

    pub fn signals(&self, voxel: [usize; 3]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_shells());
        self.signals_into(voxel, &mut out);
        out
    }

    /// Center of a voxel in millimetres.
    pub fn voxel_center_mm(&self, voxel: [usize; 3]) -> Vec3 {
        [
            (voxel[0] as f64 + 0.5) * self.voxel_size[0],
            (voxel[1] as f64 + 0.5) * self.voxel_size[1],
            (voxel[2] as f64 + 0.5) * self.voxel_size[2],
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(gamma: f64, g: f64, delta: f64, big_delta: f64) -> AcquisitionParams {
        AcquisitionParams {
            gamma,
            gradient_strength: g,
            pulse_duration: delta,
            pulse_separation: big_delta,
        }
    }

    #[test]
    fn b_value_zero_gradient() {
        assert_eq!(b_value(&params(2.675e8, 0.0, 0.02, 0.03)).unwrap(), 0.0);
    }

    #[test]
    fn b_value_vanishing_window() {
        let delta = 0.03;
        assert_eq!(
            b_value(&params(2.675e8, 0.04, delta, delta / 3.0)).unwrap(),
            0.0
        );
    }

    #[test]
    fn b_value_matches_calculator() {
        // standalone scalar evaluation: (2.675e8*0.04*0.02)**2*(0.03-0.02/3)*1e-6
        let b = b_value(&params(2.675e8, 0.04, 0.02, 0.03)).unwrap();
        assert!((b - 1068.5733333333333).abs() < 1e-9, "{b}");
    }

    #[test]
    fn b_value_rejects_short_separation() {
        assert!(matches!(
            b_value(&params(2.675e8, 0.04, 0.03, 0.005)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn signal_without_weighting_is_baseline() {
        let d = DiffusionTensor::diagonal(1.7e-3, 0.2e-3, 0.2e-3);
        let e = GradientEntry::new(0.0, [1.0, 0.0, 0.0]);
        assert_eq!(synthesize_signal(&d, 100.0, &e), 100.0);
        let e = GradientEntry::new(1000.0, [0.0, 1.0, 0.0]);
        assert_eq!(synthesize_signal(&DiffusionTensor::zero(), 100.0, &e), 100.0);
    }

    #[test]
    fn signal_matches_calculator() {
        // 100*exp(-1000*1.7e-3)
        let d = DiffusionTensor::diagonal(1.7e-3, 0.2e-3, 0.2e-3);
        let e = GradientEntry::new(1000.0, [1.0, 0.0, 0.0]);
        let s = synthesize_signal(&d, 100.0, &e);
        assert!((s - 18.268352405273465).abs() < 1e-12, "{s}");
    }

    #[test]
    fn volume_rejects_wrong_length() {
        let table = GradientTable::six_direction(1000.0);
        let err = DwiVolume::new([2, 2, 2], [1.0; 3], table, vec![1.0; 8]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn voxel_index_round_trip() {
        let table = GradientTable::six_direction(1000.0);
        let n = 3 * 4 * 5 * table.len();
        let v = DwiVolume::new([3, 4, 5], [1.0; 3], table, vec![1.0; n]).unwrap();
        for i in 0..v.n_voxels() {
            assert_eq!(v.voxel_index(v.voxel_coords(i)), i);
        }
    }
}
