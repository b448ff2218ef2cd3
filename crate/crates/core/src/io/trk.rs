//! TrackVis `.trk` files (version 2, no scalars or properties).

use std::path::Path;

use crate::error::{Error, Result};
use crate::tract::Streamline;

pub const TRK_HEADER_SIZE: usize = 1000;

const OFF_DIM: usize = 6;
const OFF_VOXEL_SIZE: usize = 12;
const OFF_ORIGIN: usize = 24;
const OFF_N_SCALARS: usize = 36;
const OFF_N_PROPERTIES: usize = 238;
const OFF_N_COUNT: usize = 988;
const OFF_VERSION: usize = 992;
const OFF_HDR_SIZE: usize = 996;

/// Header fields this writer sets; every other header byte is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrkHeader {
    pub dim: [i16; 3],
    pub voxel_size: [f32; 3],
    pub origin: [f32; 3],
    pub n_count: i32,
}

impl TrkHeader {
    pub fn new(dims: [usize; 3], voxel_size: [f64; 3]) -> Result<Self> {
        let dim = dims.map(|d| i16::try_from(d).unwrap_or(-1));
        if dim.iter().any(|&d| d <= 0) {
            return Err(Error::Config(format!("{dims:?} does not fit .trk dimensions")));
        }
        Ok(Self {
            dim,
            voxel_size: voxel_size.map(|v| v as f32),
            origin: [0.0; 3],
            n_count: 0,
        })
    }

    pub fn to_bytes(&self) -> [u8; TRK_HEADER_SIZE] {
        let mut h = [0u8; TRK_HEADER_SIZE];
        h[..6].copy_from_slice(b"TRACK\0");
        for k in 0..3 {
            h[OFF_DIM + 2 * k..OFF_DIM + 2 * k + 2].copy_from_slice(&self.dim[k].to_le_bytes());
            h[OFF_VOXEL_SIZE + 4 * k..OFF_VOXEL_SIZE + 4 * k + 4]
                .copy_from_slice(&self.voxel_size[k].to_le_bytes());
            h[OFF_ORIGIN + 4 * k..OFF_ORIGIN + 4 * k + 4]
                .copy_from_slice(&self.origin[k].to_le_bytes());
        }
        h[OFF_N_SCALARS..OFF_N_SCALARS + 2].copy_from_slice(&0i16.to_le_bytes());
        h[OFF_N_PROPERTIES..OFF_N_PROPERTIES + 2].copy_from_slice(&0i16.to_le_bytes());
        h[OFF_N_COUNT..OFF_N_COUNT + 4].copy_from_slice(&self.n_count.to_le_bytes());
        h[OFF_VERSION..OFF_VERSION + 4].copy_from_slice(&2i32.to_le_bytes());
        h[OFF_HDR_SIZE..OFF_HDR_SIZE + 4].copy_from_slice(&(TRK_HEADER_SIZE as i32).to_le_bytes());
        h
    }
}

/// Serializes streamlines; `n_count` is set from `streamlines.len()`.
/// Points are written as given (millimetres, voxel corner at the origin).
pub fn trk_bytes(header: &TrkHeader, streamlines: &[Streamline]) -> Vec<u8> {
    let mut header = *header;
    header.n_count = streamlines.len() as i32;
    let points: usize = streamlines.iter().map(|s| s.points.len()).sum();
    let mut out = Vec::with_capacity(TRK_HEADER_SIZE + 4 * streamlines.len() + 12 * points);
    out.extend_from_slice(&header.to_bytes());
    for s in streamlines {
        out.extend_from_slice(&(s.points.len() as i32).to_le_bytes());
        for p in &s.points {
            for c in p {
                out.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
    }
    out
}

pub fn write_trk(path: &Path, header: &TrkHeader, streamlines: &[Streamline]) -> Result<()> {
    std::fs::write(path, trk_bytes(header, streamlines)).map_err(|e| Error::io(path, e))
}

/// A parsed `.trk` file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrkFile {
    pub header: TrkHeader,
    pub streamlines: Vec<Vec<[f32; 3]>>,
}

/// Reads files produced by [`write_trk`].
pub fn read_trk(bytes: &[u8]) -> Result<TrkFile> {
    let err = |m: &str| Error::Parse(format!(".trk: {m}"));
    if bytes.len() < TRK_HEADER_SIZE || &bytes[..6] != b"TRACK\0" {
        return Err(err("missing TRACK header"));
    }
    let i16_at = |o: usize| i16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let i32_at = |o: usize| i32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    if i32_at(OFF_HDR_SIZE) != TRK_HEADER_SIZE as i32 {
        return Err(err("hdr_size is not 1000"));
    }
    if i16_at(OFF_N_SCALARS) != 0 || i16_at(OFF_N_PROPERTIES) != 0 {
        return Err(err("scalars and properties are not supported"));
    }
    let header = TrkHeader {
        dim: [0, 1, 2].map(|k| i16_at(OFF_DIM + 2 * k)),
        voxel_size: [0, 1, 2].map(|k| f32_at(OFF_VOXEL_SIZE + 4 * k)),
        origin: [0, 1, 2].map(|k| f32_at(OFF_ORIGIN + 4 * k)),
        n_count: i32_at(OFF_N_COUNT),
    };
    let mut pos = TRK_HEADER_SIZE;
    let mut streamlines = Vec::new();
    while pos < bytes.len() {
        if bytes.len() - pos < 4 {
            return Err(err("truncated point count"));
        }
        let n = i32_at(pos);
        pos += 4;
        if n < 0 || (bytes.len() - pos) < n as usize * 12 {
            return Err(err("truncated streamline"));
        }
        let pts = (0..n as usize)
            .map(|i| [0, 1, 2].map(|k| f32_at(pos + 12 * i + 4 * k)))
            .collect();
        pos += n as usize * 12;
        streamlines.push(pts);
    }
    if streamlines.len() != header.n_count as usize {
        return Err(err("n_count does not match the streamlines present"));
    }
    Ok(TrkFile {
        header,
        streamlines,
    })
}
