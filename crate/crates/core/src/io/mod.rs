//! File formats: binary pointmap/depth containers, text trajectories and scene specs.

mod spec;
mod tensor;
mod trajectory;

use std::path::Path;

use nalgebra::DMatrix;

pub use spec::{parse_synth_config, SynthConfig};
pub use tensor::{
    decode_depths, decode_matrices, decode_pointmaps, encode_depths, encode_matrices, encode_pointmaps, TensorRecord,
    FORMAT_VERSION, GDM_MAGIC, GPM_MAGIC,
};
pub use trajectory::{
    format_trajectory, parse_trajectory, records_to_trajectory, trajectory_to_records, TrajectoryRecord,
};

use crate::error::{Error, Result};
use crate::geometry::{DepthMap, Pointmap, Trajectory};

/// Writes through a temporary file in the target directory, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn read_pointmaps(path: &Path) -> Result<Vec<Pointmap<f64>>> {
    decode_pointmaps(&std::fs::read(path)?)
}

pub fn write_pointmaps(path: &Path, maps: &[Pointmap<f64>]) -> Result<()> {
    write_atomic(path, &encode_pointmaps(maps)?)
}

pub fn read_depths(path: &Path) -> Result<Vec<DepthMap<f64>>> {
    decode_depths(&std::fs::read(path)?)
}

pub fn write_depths(path: &Path, maps: &[DepthMap<f64>]) -> Result<()> {
    write_atomic(path, &encode_depths(maps)?)
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory<f64>> {
    records_to_trajectory(&parse_trajectory(&std::fs::read_to_string(path)?)?)
}

pub fn write_trajectory(path: &Path, t: &Trajectory<f64>) -> Result<()> {
    write_atomic(path, format_trajectory(&trajectory_to_records(t)).as_bytes())
}

pub fn read_matrices(path: &Path) -> Result<Vec<DMatrix<f64>>> {
    decode_matrices(&std::fs::read(path)?)
}

pub fn write_matrices(path: &Path, mats: &[DMatrix<f64>]) -> Result<()> {
    write_atomic(path, &encode_matrices(mats))
}
