//! Three orthogonal windows around a voxel, stacked across shells.

use super::layers::FeatureMap;
use crate::dwi::DwiVolume;
use crate::error::{Error, Result};
use crate::vec3::{norm, Vec3};

/// Side length of the network's input window.
pub const PATCH_SIZE: usize = 7;

/// Axial (xy at fixed z), sagittal (yz at fixed x) and coronal (xz at fixed
/// y) windows, each `size × size × shells`, plus the target orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSample {
    pub views: [FeatureMap<f32>; 3],
    pub target: Vec3,
}

impl PatchSample {
    pub fn new(views: [FeatureMap<f32>; 3], target: Vec3) -> Result<Self> {
        if ((norm(&target)) - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("target {target:?} is not unit length")));
        }
        if views.iter().any(|v| v.data.iter().any(|x| !x.is_finite())) {
            return Err(Error::Domain("patch contains non-finite values".into()));
        }
        Ok(Self { views, target })
    }

    pub fn shells(&self) -> usize {
        self.views[0].c
    }
}

/// Standardizes to zero mean and unit variance; a constant view becomes zeros.
fn normalize_view(data: &mut [f64]) {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    for v in data.iter_mut() {
        *v = if sd > 1e-12 * mean.abs().max(1.0) { (*v - mean) / sd } else { 0.0 };
    }
}

/// Extracts the 7×7 windows centered on `voxel`.
pub fn extract_patch(volume: &DwiVolume, voxel: [usize; 3]) -> Result<[FeatureMap<f32>; 3]> {
    extract_patch_sized(volume, voxel, PATCH_SIZE)
}

/// Extracts `size × size` windows (odd `size`) centered on `voxel`.
///
/// Fails with [`Error::Precondition`] when the window would leave the
/// volume; callers treat that as "skip this sample".
pub fn extract_patch_sized(
    volume: &DwiVolume,
    voxel: [usize; 3],
    size: usize,
) -> Result<[FeatureMap<f32>; 3]> {
    if size % 2 == 0 {
        return Err(Error::Config(format!("patch size {size} must be odd")));
    }
    let half = size / 2;
    let dims = volume.dims();
    if (0..3).any(|k| voxel[k] < half || voxel[k] + half >= dims[k]) {
        return Err(Error::Precondition(format!(
            "voxel {voxel:?} is closer than {half} to the boundary of {dims:?}"
        )));
    }
    let shells = volume.n_shells();
    // (row axis, column axis, fixed axis)
    let planes = [(1, 0), (2, 1), (2, 0)];
    let views = planes.map(|(row_axis, col_axis)| {
        let mut data = Vec::with_capacity(size * size * shells);
        for r in 0..size {
            for c in 0..size {
                let mut v = voxel;
                v[row_axis] = voxel[row_axis] + r - half;
                v[col_axis] = voxel[col_axis] + c - half;
                for s in 0..shells {
                    data.push(volume.signal(v, s) as f64);
                }
            }
        }
        normalize_view(&mut data);
        FeatureMap {
            n: 1,
            h: size,
            w: size,
            c: shells,
            data: data.into_iter().map(|x| x as f32).collect(),
        }
    });
    Ok(views)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dwi::GradientTable;

    fn volume(dims: [usize; 3], f: impl Fn([usize; 3], usize) -> f32) -> DwiVolume {
        let table = GradientTable::six_direction(1000.0);
        let n = dims[0] * dims[1] * dims[2];
        let mut data = vec![0.0; n * table.len()];
        for s in 0..table.len() {
            for z in 0..dims[2] {
                for y in 0..dims[1] {
                    for x in 0..dims[0] {
                        data[x + dims[0] * (y + dims[1] * z) + n * s] = f([x, y, z], s);
                    }
                }
            }
        }
        DwiVolume::new(dims, [1.0; 3], table, data).unwrap()
    }

    #[test]
    fn constant_volume_gives_zeros() {
        let v = volume([9, 9, 9], |_, _| 42.0);
        for view in extract_patch(&v, [4, 4, 4]).unwrap() {
            assert_eq!(view.shape(), (7, 7, 7));
            assert!(view.data.iter().all(|x| *x == 0.0));
        }
    }

    #[test]
    fn center_voxel_sits_at_three_three() {
        let v = volume([10, 11, 12], |p, s| {
            if p == [5, 6, 7] {
                500.0 + s as f32
            } else {
                1.0 + ((p[0] * 7 + p[1] * 13 + p[2] * 29 + s) % 11) as f32
            }
        });
        let views = extract_patch(&v, [5, 6, 7]).unwrap();
        for view in &views {
            // the spike is the maximum of every channel
            for s in 0..7 {
                let center = view.at(3, 3)[s];
                let max = (0..7)
                    .flat_map(|r| (0..7).map(move |c| (r, c)))
                    .map(|(r, c)| view.at(r, c)[s])
                    .fold(f32::MIN, f32::max);
                assert_eq!(center, max);
            }
        }
    }

    #[test]
    fn view_orientation() {
        let v = volume([9, 9, 9], |p, _| 1.0 + (p[0] + 10 * p[1] + 100 * p[2]) as f32);
        let [axial, sagittal, coronal] = extract_patch(&v, [4, 4, 4]).unwrap();
        // axial columns advance along x, rows along y
        assert!(axial.at(3, 4)[0] > axial.at(3, 3)[0]);
        assert!(axial.at(4, 3)[0] - axial.at(3, 3)[0] > axial.at(3, 4)[0] - axial.at(3, 3)[0]);
        // sagittal columns advance along y, rows along z
        assert!(sagittal.at(4, 3)[0] - sagittal.at(3, 3)[0] > sagittal.at(3, 4)[0] - sagittal.at(3, 3)[0]);
        // coronal columns along x, rows along z
        assert!(coronal.at(4, 3)[0] - coronal.at(3, 3)[0] > 5.0 * (coronal.at(3, 4)[0] - coronal.at(3, 3)[0]));
    }

    #[test]
    fn normalized_moments_and_boundary() {
        let v = volume([9, 9, 9], |p, s| 1.0 + (p[0] * 3 + p[1] + p[2] * 5 + s * 2) as f32);
        for view in extract_patch(&v, [3, 3, 5]).unwrap() {
            let n = view.data.len() as f64;
            let mean = view.data.iter().map(|&x| x as f64).sum::<f64>() / n;
            let var = view.data.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-5);
        }
        assert!(matches!(extract_patch(&v, [2, 4, 4]), Err(Error::Precondition(_))));
        assert!(matches!(extract_patch(&v, [4, 4, 6]), Err(Error::Precondition(_))));
        assert!(extract_patch_sized(&v, [1, 1, 1], 3).is_ok());
    }
}
