use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use flowseg::media::{synth_sequence, SynthSpec};
use flowseg::oracle::{run_checks, CheckOptions, OracleContext, DEFAULT_SIZE_CAP};

use crate::layout;
use crate::settings::{resolve, SolverArgs};

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// Directory laid out as frames/, flow_fwd/, flow_bwd/; a synthetic scene is used when omitted.
    #[arg(long, value_name = "DIR")]
    pub input: Option<PathBuf>,
    /// Seed of the synthetic scene.
    #[arg(long = "scene-seed", default_value_t = 0)]
    pub scene_seed: u64,
    #[arg(long = "num-frames", default_value_t = 5)]
    pub num_frames: usize,
    #[arg(long, default_value_t = 8)]
    pub height: usize,
    #[arg(long, default_value_t = 8)]
    pub width: usize,
    /// Largest node count the dense matrices may have.
    #[arg(long = "size-cap", default_value_t = DEFAULT_SIZE_CAP)]
    pub size_cap: usize,
    /// Random probes for the sampled-dominance check.
    #[arg(long, default_value_t = 1000)]
    pub probes: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
}

/// Returns whether every check passed.
pub fn run(args: &OracleArgs) -> Result<bool> {
    let settings = resolve(&args.solver).context("config")?;
    let (video, flows) = match &args.input {
        Some(dir) => (|| -> Result<_> {
            let video = layout::read_video(&dir.join(layout::FRAMES))?;
            let flows = layout::read_flows(&dir.join(layout::FLOW_FWD), &dir.join(layout::FLOW_BWD))?;
            Ok((video, flows))
        })()
        .context("ingest")?,
        None => {
            let spec = SynthSpec::seeded_scene(args.scene_seed, args.num_frames, args.height, args.width);
            let (v, f, _) = synth_sequence::<f64>(&spec).context("synth")?;
            (v, f)
        }
    };
    let n = video.node_count();
    if n > args.size_cap {
        bail!("oracle: instance has {n} nodes, over the dense size cap {}", args.size_cap);
    }
    let probs = settings
        .prob_maps
        .as_deref()
        .map(|d| layout::read_maps(d, video.dims()))
        .transpose()
        .context("ingest")?;
    let ctx = OracleContext::new(&video, &flows, &settings.solver, probs.as_deref(), args.size_cap).context("oracle")?;
    let options = CheckOptions {
        seed: settings.seed,
        probes: args.probes,
        size_cap: args.size_cap,
        ..CheckOptions::default()
    };
    let outcomes = run_checks(&ctx, &options).context("oracle")?;
    for o in &outcomes {
        println!("{o}");
    }
    let all = outcomes.iter().all(|o| o.passed);
    println!("{} of {} checks passed", outcomes.iter().filter(|o| o.passed).count(), outcomes.len());
    Ok(all)
}
