use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use flowseg::eval::evaluate;
use flowseg::media::{read_mask_stack, BBox, GroundTruth};

use crate::layout;

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Directory of predicted binary masks (.pgm).
    #[arg(long, value_name = "DIR")]
    pub pred: PathBuf,
    /// Directory of ground-truth masks (.pgm).
    #[arg(long, value_name = "DIR", conflicts_with = "gt_boxes", required_unless_present = "gt_boxes")]
    pub gt: Option<PathBuf>,
    /// Ground-truth boxes, one line per frame: `x_min y_min x_max y_max`, or `-` when unannotated.
    #[arg(long = "gt-boxes", value_name = "FILE")]
    pub gt_boxes: Option<PathBuf>,
    /// Boundary tolerance in pixels; defaults to ceil(0.0075 × image diagonal).
    #[arg(long, value_name = "PX")]
    pub theta: Option<usize>,
    /// Directory for metrics.txt and metrics.json.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

pub fn parse_boxes(text: &str) -> Result<Vec<Option<BBox>>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .enumerate()
        .map(|(n, line)| {
            if line == "-" {
                return Ok(None);
            }
            let v: Vec<usize> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<usize>())
                .collect::<Result<_, _>>()
                .with_context(|| format!("box line {}: {line:?}", n + 1))?;
            if v.len() != 4 {
                bail!("box line {}: expected 4 numbers, got {}", n + 1, v.len());
            }
            Ok(Some(BBox::new(v[0], v[1], v[2], v[3])?))
        })
        .collect()
}

fn read_boxes(path: &Path, height: usize, width: usize) -> Result<GroundTruth> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(GroundTruth::boxes(height, width, parse_boxes(&text)?)?)
}

pub fn run(args: &EvalArgs) -> Result<()> {
    let (pred, gt) = (|| -> Result<_> {
        let paths = layout::files(&args.pred, "pgm")?;
        if paths.is_empty() {
            bail!("no predicted masks in {}", args.pred.display());
        }
        let pred = read_mask_stack(&paths)?;
        let gt = match (&args.gt, &args.gt_boxes) {
            (Some(dir), _) => {
                let paths = layout::files(dir, "pgm")?;
                if paths.is_empty() {
                    bail!("no ground-truth masks in {}", dir.display());
                }
                GroundTruth::Masks(read_mask_stack(&paths)?)
            }
            (None, Some(file)) => read_boxes(file, pred.dims.height, pred.dims.width)?,
            (None, None) => bail!("--gt or --gt-boxes is required"),
        };
        Ok((pred, gt))
    })()
    .context("ingest")?;
    let report = evaluate(&pred, &gt, args.theta).context("eval")?;
    let text = report.to_key_value();
    print!("{text}");
    if let Some(out) = &args.out {
        let write = || -> Result<()> {
            fs::create_dir_all(out)?;
            fs::write(out.join("metrics.txt"), &text)?;
            fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&report)? + "\n")?;
            Ok(())
        };
        write().with_context(|| format!("write: {}", out.display()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_file_lines() {
        let b = parse_boxes("0 0 9 9\n-\n# note\n1,2,3,4\n").unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b[0], Some(BBox::new(0, 0, 9, 9).unwrap()));
        assert_eq!(b[1], None);
        assert_eq!(b[2], Some(BBox::new(1, 2, 3, 4).unwrap()));
        assert!(parse_boxes("1 2 3").is_err());
        assert!(parse_boxes("5 5 1 1").is_err());
    }
}
