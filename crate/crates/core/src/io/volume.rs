//! Raw little-endian float32 payload (`<base>.raw`) described by a TOML
//! sidecar (`<base>.toml`). DWI volumes also carry `<base>.bval` and
//! `<base>.bvec`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::fsl::{read_gradient_table, write_gradient_table};
use crate::dwi::DwiVolume;
use crate::error::{Error, Result};

pub const DTYPE_F32LE: &str = "f32le";
/// x fastest, then y, z and the fourth axis.
pub const AXIS_ORDER: &str = "xyzs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeHeader {
    /// `[nx, ny, nz, ns]`; `ns` is the shell or component count.
    pub dims: [usize; 4],
    pub voxel_size: [f64; 3],
    pub dtype: String,
    pub axis_order: String,
    /// Stem of the `.bval`/`.bvec` pair, relative to the header.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient_table: Option<PathBuf>,
}

impl VolumeHeader {
    pub fn new(dims: [usize; 4], voxel_size: [f64; 3]) -> Self {
        Self {
            dims,
            voxel_size,
            dtype: DTYPE_F32LE.into(),
            axis_order: AXIS_ORDER.into(),
            gradient_table: None,
        }
    }

    pub fn element_count(&self) -> usize {
        self.dims.iter().product()
    }

    fn validate(&self) -> Result<()> {
        if self.dtype != DTYPE_F32LE {
            return Err(Error::Parse(format!("unknown dtype tag {:?}", self.dtype)));
        }
        if self.axis_order != AXIS_ORDER {
            return Err(Error::Parse(format!("unsupported axis order {:?}", self.axis_order)));
        }
        if self.dims.contains(&0) {
            return Err(Error::Parse(format!("dims must be positive, got {:?}", self.dims)));
        }
        if self.voxel_size.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Parse(format!("invalid voxel size {:?}", self.voxel_size)));
        }
        Ok(())
    }
}

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// `(header, payload)` paths for `base`.
pub fn sidecar_paths(base: &Path) -> (PathBuf, PathBuf) {
    (with_suffix(base, ".toml"), with_suffix(base, ".raw"))
}

/// Writes `data` (x-fastest) and its header.
pub fn write_raw(base: &Path, header: &VolumeHeader, data: &[f32]) -> Result<()> {
    header.validate()?;
    if data.len() != header.element_count() {
        return Err(Error::Config(format!(
            "header declares {} elements, data has {}",
            header.element_count(),
            data.len()
        )));
    }
    let (hdr_path, raw_path) = sidecar_paths(base);
    let text = toml::to_string(header).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(&hdr_path, text).map_err(|e| Error::io(&hdr_path, e))?;
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(&raw_path, bytes).map_err(|e| Error::io(&raw_path, e))
}

/// Reads a header and its payload, checking the payload size.
pub fn read_raw(base: &Path) -> Result<(VolumeHeader, Vec<f32>)> {
    let (hdr_path, raw_path) = sidecar_paths(base);
    let text = std::fs::read_to_string(&hdr_path).map_err(|e| Error::io(&hdr_path, e))?;
    let header: VolumeHeader =
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", hdr_path.display())))?;
    header.validate()?;
    let bytes = std::fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
    let expected = header.element_count() as u64 * 4;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path: raw_path,
            expected,
            actual: bytes.len() as u64,
        });
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok((header, data))
}

/// Writes a DWI volume with its gradient table next to it.
pub fn write_volume(base: &Path, volume: &DwiVolume) -> Result<()> {
    let d = volume.dims();
    let mut header = VolumeHeader::new([d[0], d[1], d[2], volume.n_shells()], volume.voxel_size());
    let stem = base
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} has no file name", base.display())))?;
    header.gradient_table = Some(PathBuf::from(stem));
    write_gradient_table(
        volume.table(),
        &with_suffix(base, ".bval"),
        &with_suffix(base, ".bvec"),
    )?;
    write_raw(base, &header, volume.data())
}

/// Reads a DWI volume; the header must reference a gradient table.
pub fn read_volume(base: &Path) -> Result<DwiVolume> {
    let (header, data) = read_raw(base)?;
    let stem = header.gradient_table.as_ref().ok_or_else(|| {
        Error::Parse(format!("{} has no gradient_table entry", base.display()))
    })?;
    let dir = base.parent().unwrap_or(Path::new(""));
    let stem = dir.join(stem);
    let table = read_gradient_table(&with_suffix(&stem, ".bval"), &with_suffix(&stem, ".bvec"))?;
    if table.len() != header.dims[3] {
        return Err(Error::Parse(format!(
            "header declares {} shells, gradient table has {}",
            header.dims[3],
            table.len()
        )));
    }
    let [nx, ny, nz, _] = header.dims;
    DwiVolume::new([nx, ny, nz], header.voxel_size, table, data)
        .map_err(|e| Error::Parse(e.to_string()))
}
