//! On-disk layout: `frames/NNNNN.ppm`, `flow_fwd/NNNNN.flo`, `flow_bwd/NNNNN.flo`,
//! `gt/NNNNN.pgm`, five-digit indices from zero.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use flowseg::media::{read_flo, read_frames, read_probability_maps, sorted_files, Dims, FlowSet, VideoTensor};

pub const FRAMES: &str = "frames";
pub const FLOW_FWD: &str = "flow_fwd";
pub const FLOW_BWD: &str = "flow_bwd";
pub const GT: &str = "gt";
pub const SOFT: &str = "soft";
pub const MASKS: &str = "masks";
pub const MANIFEST: &str = "manifest.json";

pub fn indexed(dir: &Path, t: usize, ext: &str) -> PathBuf {
    dir.join(format!("{t:05}.{ext}"))
}

pub fn files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        bail!("{} is not a directory", dir.display());
    }
    Ok(sorted_files(dir, ext)?)
}

/// Frames, preferring `.ppm` and falling back to `.pgm`.
pub fn read_video(dir: &Path) -> Result<VideoTensor<f64>> {
    let mut paths = files(dir, "ppm")?;
    if paths.is_empty() {
        paths = files(dir, "pgm")?;
    }
    if paths.is_empty() {
        bail!("no .ppm or .pgm frames in {}", dir.display());
    }
    Ok(read_frames(&paths)?)
}

pub fn read_flows(fwd_dir: &Path, bwd_dir: &Path) -> Result<FlowSet> {
    let read_all = |dir: &Path| -> Result<Vec<_>> {
        files(dir, "flo")?
            .iter()
            .map(|p| read_flo(p).with_context(|| format!("flow {}", p.display())))
            .collect()
    };
    Ok(FlowSet::new(read_all(fwd_dir)?, read_all(bwd_dir)?)?)
}

pub fn read_maps(dir: &Path, dims: Dims) -> Result<Vec<Vec<f64>>> {
    Ok(read_probability_maps(&files(dir, "pgm")?, dims)?)
}
