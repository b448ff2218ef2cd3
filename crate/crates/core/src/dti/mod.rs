//! Tensor estimation, eigen-decomposition, scalar maps and per-voxel model
//! parameters.

mod eigen;
mod fit;
mod tensor;

pub use eigen::{eigendecompose, TensorDecomposition, EIGENVALUE_FLOOR};
pub use fit::{fit_tensor, TensorFit, TensorFitter, MIN_MEASUREMENTS};
pub use tensor::DiffusionTensor;

use crate::vec3::Vec3;

/// `trace(D) / 3`.
pub fn mean_diffusivity(d: &DiffusionTensor) -> f64 {
    d.trace() / 3.0
}

/// Fractional anisotropy together with a flag for an all-zero spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anisotropy {
    pub fa: f64,
    pub degenerate: bool,
}

/// Standard FA of an eigenvalue triple, clamped to `[0, 1]`.
pub fn fractional_anisotropy(eigenvalues: [f64; 3]) -> Anisotropy {
    let [l1, l2, l3] = eigenvalues;
    let denom = l1 * l1 + l2 * l2 + l3 * l3;
    if denom == 0.0 {
        return Anisotropy {
            fa: 0.0,
            degenerate: true,
        };
    }
    let num = (l1 - l2).powi(2) + (l2 - l3).powi(2) + (l3 - l1).powi(2);
    Anisotropy {
        fa: (0.5 * num / denom).sqrt().clamp(0.0, 1.0),
        degenerate: false,
    }
}

/// Parameters of the constrained single-fiber signal model for one voxel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelModelParams {
    /// Baseline signal μ0.
    pub mu0: f64,
    /// Isotropic attenuation `(λ2 + λ3)/2`.
    pub alpha: f64,
    /// Anisotropic attenuation `λ1 − α`, floored at zero.
    pub beta: f64,
    /// Principal direction ê1.
    pub v_hat: Vec3,
    /// Log-signal noise scale.
    pub sigma: f64,
}

/// Derives the model parameters from a decomposition as given; callers clamp
/// eigenvalues beforehand when the fit is noisy.
pub fn nuisance_params(decomp: &TensorDecomposition, s0: f64, sigma: f64) -> VoxelModelParams {
    let [l1, l2, l3] = decomp.eigenvalues;
    let alpha = 0.5 * (l2 + l3);
    VoxelModelParams {
        mu0: s0,
        alpha,
        beta: (l1 - alpha).max(0.0),
        v_hat: decomp.principal(),
        sigma,
    }
}
