use crate::dti::{
    eigendecompose, fractional_anisotropy, nuisance_params, TensorDecomposition, TensorFit,
    TensorFitter, VoxelModelParams,
};
use crate::dwi::DwiVolume;
use crate::error::Result;

/// Everything the trackers need to know about one voxel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelFit {
    pub fit: TensorFit,
    /// Raw decomposition (eigenvalues may be negative).
    pub decomposition: TensorDecomposition,
    /// FA of the clamped spectrum.
    pub fa: f64,
}

impl VoxelFit {
    pub fn from_signals(fitter: &TensorFitter, signals: &[f64]) -> Result<Self> {
        let fit = fitter.fit(signals)?;
        let decomposition = eigendecompose(&fit.tensor)?;
        let fa = fractional_anisotropy(decomposition.clamped().eigenvalues).fa;
        Ok(Self {
            fit,
            decomposition,
            fa,
        })
    }

    /// Model parameters from the clamped spectrum; `sigma` is the noise
    /// scale chosen by the caller.
    pub fn model_params(&self, sigma: f64) -> VoxelModelParams {
        nuisance_params(&self.decomposition.clamped(), self.fit.s0, sigma)
    }

    /// Mean of the clamped eigenvalues.
    pub fn md(&self) -> f64 {
        self.decomposition.clamped().eigenvalues.iter().sum::<f64>() / 3.0
    }
}

/// Tensor fits for every voxel of a volume. Voxels whose fit failed hold
/// `None` and are treated as non-traversable.
#[derive(Debug, Clone)]
pub struct TensorField {
    dims: [usize; 3],
    voxel_size: [f64; 3],
    fits: Vec<Option<VoxelFit>>,
}

impl TensorField {
    pub fn fit(volume: &DwiVolume) -> Result<Self> {
        let fitter = TensorFitter::new(volume.table())?;
        let mut signals = Vec::with_capacity(volume.n_shells());
        let fits = (0..volume.n_voxels())
            .map(|i| {
                volume.signals_into(volume.voxel_coords(i), &mut signals);
                VoxelFit::from_signals(&fitter, &signals).ok()
            })
            .collect();
        Ok(Self {
            dims: volume.dims(),
            voxel_size: volume.voxel_size(),
            fits,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel_size(&self) -> [f64; 3] {
        self.voxel_size
    }

    pub fn index(&self, v: [usize; 3]) -> usize {
        v[0] + self.dims[0] * (v[1] + self.dims[1] * v[2])
    }

    pub fn get(&self, v: [usize; 3]) -> Option<&VoxelFit> {
        self.fits[self.index(v)].as_ref()
    }

    pub fn fits(&self) -> &[Option<VoxelFit>] {
        &self.fits
    }

    /// FA per voxel (0 where the fit failed).
    pub fn fa_map(&self) -> Vec<f64> {
        self.fits.iter().map(|f| f.map_or(0.0, |f| f.fa)).collect()
    }

    /// MD per voxel (0 where the fit failed).
    pub fn md_map(&self) -> Vec<f64> {
        self.fits.iter().map(|f| f.map_or(0.0, |f| f.md())).collect()
    }

    /// Voxels with FA at or above `threshold`.
    pub fn seeds_above(&self, threshold: f64) -> Vec<[usize; 3]> {
        let [nx, ny, _] = self.dims;
        self.fits
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_some_and(|f| f.fa >= threshold))
            .map(|(i, _)| [i % nx, (i / nx) % ny, i / (nx * ny)])
            .collect()
    }
}
