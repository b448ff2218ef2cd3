use std::path::Path;

use crate::dwi::GradientTable;
use crate::error::{Error, Result};

/// Reads `bvals` and `bvecs` text files.
pub fn read_gradient_table(bvals: &Path, bvecs: &Path) -> Result<GradientTable> {
    let b = std::fs::read_to_string(bvals).map_err(|e| Error::io(bvals, e))?;
    let g = std::fs::read_to_string(bvecs).map_err(|e| Error::io(bvecs, e))?;
    GradientTable::parse_fsl(&b, &g)
}

pub fn write_gradient_table(table: &GradientTable, bvals: &Path, bvecs: &Path) -> Result<()> {
    let (b, g) = table.to_fsl();
    std::fs::write(bvals, b).map_err(|e| Error::io(bvals, e))?;
    std::fs::write(bvecs, g).map_err(|e| Error::io(bvecs, e))
}
