//! File formats: raw volumes with a TOML sidecar, FSL gradient files and
//! TrackVis streamlines.

mod fsl;
mod trk;
mod volume;

pub use fsl::{read_gradient_table, write_gradient_table};
pub use trk::{read_trk, trk_bytes, write_trk, TrkFile, TrkHeader, TRK_HEADER_SIZE};
pub use volume::{
    read_raw, read_volume, sidecar_paths, write_raw, write_volume, VolumeHeader, AXIS_ORDER,
    DTYPE_F32LE,
};
