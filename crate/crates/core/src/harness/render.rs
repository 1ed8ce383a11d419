//! 8-bit binary PGM (`P5`) rasters of dB images.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matrix::RealMatrix;

/// `[−top_db, 0]` → `[0, 255]`, rounding half away from zero.
pub fn db_to_gray(db: f64, top_db: f64) -> u8 {
    let t = ((db + top_db) / top_db).clamp(0.0, 1.0);
    (255.0 * t).round() as u8
}

pub fn encode_pgm(db: &RealMatrix, top_db: f64) -> Result<Vec<u8>> {
    if !(top_db.is_finite() && top_db > 0.0) {
        return Err(Error::invalid(format!("top_db must be positive, got {top_db}")));
    }
    let header = format!("P5\n{} {}\n255\n", db.cols(), db.rows());
    let mut out = Vec::with_capacity(header.len() + db.len());
    out.extend_from_slice(header.as_bytes());
    out.extend(db.as_slice().iter().map(|&v| db_to_gray(v, top_db)));
    Ok(out)
}

pub fn write_pgm(db: &RealMatrix, top_db: f64, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_pgm(db, top_db)?)?;
    Ok(())
}

/// Writes one raster per named panel into `dir` as `<name>.pgm`.
pub fn render_figure(
    panels: &[(&str, &RealMatrix)],
    top_db: f64,
    dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir.as_ref())?;
    panels
        .iter()
        .map(|(name, db)| {
            let path = dir.as_ref().join(format!("{name}.pgm"));
            write_pgm(db, top_db, &path)?;
            Ok(path)
        })
        .collect()
}
