use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use flowseg::media::{quantize_unit, synth_sequence, write_flo, write_mask_pgm, write_ppm, ObjectShape, SynthSpec};

use crate::layout;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Shape {
    Square,
    Disc,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Scene seed: picks shape, directions and textures unless overridden.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "num-frames", default_value_t = 8)]
    pub num_frames: usize,
    #[arg(long, default_value_t = 32)]
    pub height: usize,
    #[arg(long, default_value_t = 32)]
    pub width: usize,
    #[arg(long, value_enum)]
    pub shape: Option<Shape>,
    /// Object side or diameter in pixels.
    #[arg(long, value_name = "PX")]
    pub size: Option<usize>,
    /// Object motion per frame as dx,dy.
    #[arg(long = "object-velocity", value_name = "DX,DY")]
    pub object_velocity: Option<String>,
    /// Background motion per frame as dx,dy.
    #[arg(long = "background-velocity", value_name = "DX,DY")]
    pub background_velocity: Option<String>,
    /// Top-left corner of the object in the first frame as x,y; centred when omitted.
    #[arg(long, value_name = "X,Y")]
    pub start: Option<String>,
}

fn pair(flag: &str, s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        bail!("--{flag}: expected two comma-separated numbers, got {s:?}");
    }
    let p = |v: &str| v.parse::<f64>().with_context(|| format!("--{flag}: bad number {v:?}"));
    Ok((p(parts[0])?, p(parts[1])?))
}

pub fn spec_from(args: &SynthArgs) -> Result<SynthSpec> {
    let mut spec = SynthSpec::seeded_scene(args.seed, args.num_frames, args.height, args.width);
    let extent = args.size.unwrap_or_else(|| spec.shape.extent());
    let shape = match args.shape {
        Some(Shape::Square) => ObjectShape::Square { side: extent },
        Some(Shape::Disc) => ObjectShape::Disc { diameter: extent },
        None => match spec.shape {
            ObjectShape::Square { .. } => ObjectShape::Square { side: extent },
            ObjectShape::Disc { .. } => ObjectShape::Disc { diameter: extent },
        },
    };
    spec.shape = shape;
    if let Some(v) = &args.object_velocity {
        spec.object_velocity = pair("object-velocity", v)?;
    }
    if let Some(v) = &args.background_velocity {
        spec.background_velocity = pair("background-velocity", v)?;
    }
    match &args.start {
        Some(s) => spec.start = pair("start", s)?,
        None => spec.centre_trajectory(),
    }
    Ok(spec)
}

pub fn run(args: &SynthArgs) -> Result<()> {
    let spec = spec_from(args).context("synth")?;
    let (video, flows, gt) = synth_sequence::<f64>(&spec).context("synth")?;
    let dims = video.dims();
    let out = &args.out;
    let dir = |name: &str| -> Result<PathBuf> {
        let d = out.join(name);
        fs::create_dir_all(&d).with_context(|| format!("write: creating {}", d.display()))?;
        Ok(d)
    };
    let (frames_dir, fwd_dir, bwd_dir, gt_dir) = (dir(layout::FRAMES)?, dir(layout::FLOW_FWD)?, dir(layout::FLOW_BWD)?, dir(layout::GT)?);
    let masks = gt.masks().expect("synthetic ground truth is dense");
    let write = || -> Result<()> {
        for t in 0..dims.frames {
            let bytes: Vec<u8> = (0..dims.height)
                .flat_map(|y| (0..dims.width).map(move |x| (y, x)))
                .flat_map(|(y, x)| video.pixel(t, y, x).iter().map(|&v| quantize_unit(v)).collect::<Vec<_>>())
                .collect();
            write_ppm(layout::indexed(&frames_dir, t, "ppm"), dims.width, dims.height, &bytes)?;
            let m: Vec<f64> = masks.frame(t).iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            write_mask_pgm(&m, dims.height, dims.width, layout::indexed(&gt_dir, t, "pgm"))?;
        }
        for (t, (f, b)) in flows.forward().iter().zip(flows.backward()).enumerate() {
            write_flo(f, layout::indexed(&fwd_dir, t, "flo"))?;
            write_flo(b, layout::indexed(&bwd_dir, t, "flo"))?;
        }
        Ok(())
    };
    write().context("write")?;
    println!(
        "wrote {} frames of {}x{} to {}",
        dims.frames,
        dims.width,
        dims.height,
        out.display()
    );
    Ok(())
}
