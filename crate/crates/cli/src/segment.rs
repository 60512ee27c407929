use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;
use flowseg::media::write_mask_pgm;
use flowseg::solver::{binarize, prepare, SolverConfig};
use log::info;
use serde::{Deserialize, Serialize};

use crate::layout;
use crate::settings::{resolve, SolverArgs};

#[derive(Args, Debug)]
pub struct SegmentArgs {
    /// Directory laid out as frames/, flow_fwd/, flow_bwd/; fills in whichever of the three paths are not given.
    #[arg(long, value_name = "DIR")]
    pub input: Option<PathBuf>,
    /// Directory of frames (.ppm, or .pgm for grayscale).
    #[arg(long, value_name = "DIR")]
    pub frames: Option<PathBuf>,
    /// Directory of forward flows, one .flo per consecutive frame pair.
    #[arg(long = "flow-fwd", value_name = "DIR")]
    pub flow_fwd: Option<PathBuf>,
    /// Directory of backward flows, one .flo per consecutive frame pair.
    #[arg(long = "flow-bwd", value_name = "DIR")]
    pub flow_bwd: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub ingest: f64,
    pub graph_and_features: f64,
    pub solver: f64,
    pub finalize: f64,
    pub write: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub frames: PathBuf,
    pub flow_fwd: PathBuf,
    pub flow_bwd: PathBuf,
    pub prob_maps: Option<PathBuf>,
    pub init_maps: Option<PathBuf>,
    pub config_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub edges: usize,
    pub feature_dim: usize,
    pub iterations_run: usize,
    pub converged: bool,
    pub direction_change: Vec<f64>,
    pub negativity: Vec<f64>,
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: SolverConfig,
    pub seed: u64,
    pub deterministic: bool,
    pub inputs: Inputs,
    pub output: PathBuf,
    pub summary: RunSummary,
    pub timings: StageTimings,
}

fn pick(explicit: &Option<PathBuf>, input: &Option<PathBuf>, sub: &str, flag: &str) -> Result<PathBuf> {
    match (explicit, input) {
        (Some(p), _) => Ok(p.clone()),
        (None, Some(dir)) => Ok(dir.join(sub)),
        (None, None) => anyhow::bail!("--{flag} (or --input) is required"),
    }
}

pub fn run(args: &SegmentArgs) -> Result<()> {
    let start = Instant::now();
    let settings = resolve(&args.solver).context("config")?;
    let config = &settings.solver;
    let inputs = Inputs {
        frames: pick(&args.frames, &args.input, layout::FRAMES, "frames")?,
        flow_fwd: pick(&args.flow_fwd, &args.input, layout::FLOW_FWD, "flow-fwd")?,
        flow_bwd: pick(&args.flow_bwd, &args.input, layout::FLOW_BWD, "flow-bwd")?,
        prob_maps: settings.prob_maps.clone(),
        init_maps: settings.init_maps.clone(),
        config_file: args.solver.config.clone(),
    };
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let (video, flows, probs, init) = (|| -> Result<_> {
        let video = layout::read_video(&inputs.frames)?;
        let flows = layout::read_flows(&inputs.flow_fwd, &inputs.flow_bwd)?;
        flows.check_against(video.dims())?;
        let probs = inputs.prob_maps.as_deref().map(|d| layout::read_maps(d, video.dims())).transpose()?;
        let init = inputs.init_maps.as_deref().map(|d| layout::read_maps(d, video.dims())).transpose()?;
        Ok((video, flows, probs, init))
    })()
    .context("ingest")?;
    timings.ingest = t.elapsed().as_secs_f64();
    let dims = video.dims();
    info!("read {} frames of {}x{}", dims.frames, dims.width, dims.height);

    let t = Instant::now();
    let prepared = prepare(&video, &flows, probs.as_deref(), config).context("graph")?;
    timings.graph_and_features = t.elapsed().as_secs_f64();
    info!("{} edges, {} feature columns", prepared.edges.len(), prepared.features.cols());

    let t = Instant::now();
    let (mask, diag) = prepared.solve(config, init.as_deref()).context("solver")?;
    timings.solver = t.elapsed().as_secs_f64();
    info!("{} iterations, converged: {}", diag.iterations, diag.converged);

    let t = Instant::now();
    let soft = config.normalization.apply(&mask).context("finalize")?;
    let binary = binarize(&soft.x, config.threshold).context("finalize")?;
    timings.finalize = t.elapsed().as_secs_f64();

    let t = Instant::now();
    write_masks(&args.out, &soft.x, &binary, dims.frames, dims.height, dims.width).context("write")?;
    timings.write = t.elapsed().as_secs_f64();
    timings.total = start.elapsed().as_secs_f64();

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        seed: settings.seed,
        deterministic: settings.deterministic,
        inputs,
        output: args.out.clone(),
        summary: RunSummary {
            frames: dims.frames,
            height: dims.height,
            width: dims.width,
            edges: prepared.edges.len(),
            feature_dim: prepared.features.cols(),
            iterations_run: diag.iterations,
            converged: diag.converged,
            direction_change: diag.direction_change,
            negativity: diag.negativity,
        },
        timings,
    };
    let path = args.out.join(layout::MANIFEST);
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, json + "\n").with_context(|| format!("write: {}", path.display()))?;
    println!("wrote {} soft and binary masks to {}", dims.frames, args.out.display());
    Ok(())
}

fn write_masks(out: &Path, soft: &[f64], binary: &[bool], frames: usize, height: usize, width: usize) -> Result<()> {
    let soft_dir = out.join(layout::SOFT);
    let mask_dir = out.join(layout::MASKS);
    for d in [&soft_dir, &mask_dir] {
        fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    let hw = height * width;
    for t in 0..frames {
        let frame = &soft[t * hw..(t + 1) * hw];
        write_mask_pgm(frame, height, width, layout::indexed(&soft_dir, t, "pgm"))?;
        let bits: Vec<f64> = binary[t * hw..(t + 1) * hw].iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        write_mask_pgm(&bits, height, width, layout::indexed(&mask_dir, t, "pgm"))?;
    }
    Ok(())
}
