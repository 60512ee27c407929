//! Region IoU, boundary F-measure, box localization.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::{BBox, GroundTruth, MaskStack};

fn same_len(a: &[bool], b: &[bool]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("masks of {} and {} pixels", a.len(), b.len())));
    }
    Ok(())
}

/// `|pred ∧ gt| / |pred ∨ gt|`, 1 when both are empty.
pub fn iou(pred: &[bool], gt: &[bool]) -> Result<f64> {
    same_len(pred, gt)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.iter().zip(gt) {
        inter += (p && g) as usize;
        union += (p || g) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Per-frame IoU.
pub fn per_frame_iou<P: AsRef<[bool]> + Sync, G: AsRef<[bool]> + Sync>(preds: &[P], gts: &[G]) -> Result<Vec<f64>> {
    if preds.len() != gts.len() {
        return Err(Error::FrameCountMismatch {
            expected: gts.len(),
            found: preds.len(),
        });
    }
    preds
        .par_iter()
        .zip(gts)
        .map(|(p, g)| iou(p.as_ref(), g.as_ref()))
        .collect()
}

fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("no frames to evaluate".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Mean of the per-frame IoU.
pub fn j_mean<P: AsRef<[bool]> + Sync, G: AsRef<[bool]> + Sync>(preds: &[P], gts: &[G]) -> Result<f64> {
    mean(&per_frame_iou(preds, gts)?)
}

/// `ceil(0.0075 · diagonal)`.
pub fn default_boundary_tolerance(height: usize, width: usize) -> usize {
    (0.0075 * ((height * height + width * width) as f64).sqrt()).ceil() as usize
}

/// Mask pixels with a 4-neighbour outside the mask. The image border does not count as outside.
pub fn boundary(mask: &[bool], height: usize, width: usize) -> Vec<bool> {
    let mut out = vec![false; mask.len()];
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if !mask[i] {
                continue;
            }
            out[i] = (y > 0 && !mask[i - width])
                || (y + 1 < height && !mask[i + width])
                || (x > 0 && !mask[i - 1])
                || (x + 1 < width && !mask[i + 1]);
        }
    }
    out
}

/// Marks every pixel within Chebyshev distance `r` of a set pixel (square dilation).
fn dilate(set: &[bool], height: usize, width: usize, r: usize) -> Vec<bool> {
    let mut rows = vec![false; set.len()];
    for y in 0..height {
        for x in 0..width {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(width - 1);
            rows[y * width + x] = set[y * width + lo..=y * width + hi].iter().any(|&b| b);
        }
    }
    let mut out = vec![false; set.len()];
    for y in 0..height {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(height - 1);
        for x in 0..width {
            out[y * width + x] = (lo..=hi).any(|yy| rows[yy * width + x]);
        }
    }
    out
}

fn matched_fraction(from: &[bool], near: &[bool]) -> f64 {
    let total = from.iter().filter(|&&b| b).count();
    let hit = from.iter().zip(near).filter(|(&b, &n)| b && n).count();
    hit as f64 / total as f64
}

/// Boundary F-measure with Chebyshev tolerance `theta`.
pub fn f_boundary(pred: &[bool], gt: &[bool], height: usize, width: usize, theta: usize) -> Result<f64> {
    same_len(pred, gt)?;
    if pred.len() != height * width {
        return Err(Error::DimensionMismatch(format!("{} pixels for a {width}x{height} frame", pred.len())));
    }
    let bp = boundary(pred, height, width);
    let bg = boundary(gt, height, width);
    let (ep, eg) = (!bp.contains(&true), !bg.contains(&true));
    if ep && eg {
        return Ok(1.0);
    }
    if ep || eg {
        return Ok(0.0);
    }
    let precision = matched_fraction(&bp, &dilate(&bg, height, width, theta));
    let recall = matched_fraction(&bg, &dilate(&bp, height, width, theta));
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Tight box around the largest 4-connected component; ties go to the
/// component found first in raster order.
pub fn mask_to_bbox(mask: &[bool], height: usize, width: usize) -> Option<BBox> {
    let mut seen = vec![false; mask.len()];
    let mut best: Option<(usize, BBox)> = None;
    let mut queue = VecDeque::new();
    for start in 0..mask.len().min(height * width) {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let (mut size, mut b) = (0, BBox {
            x_min: usize::MAX,
            y_min: usize::MAX,
            x_max: 0,
            y_max: 0,
        });
        while let Some(i) = queue.pop_front() {
            let (y, x) = (i / width, i % width);
            size += 1;
            b.x_min = b.x_min.min(x);
            b.x_max = b.x_max.max(x);
            b.y_min = b.y_min.min(y);
            b.y_max = b.y_max.max(y);
            let mut visit = |j: usize| {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if y > 0 {
                visit(i - width);
            }
            if y + 1 < height {
                visit(i + width);
            }
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < width {
                visit(i + 1);
            }
        }
        if best.is_none_or(|(s, _)| size > s) {
            best = Some((size, b));
        }
    }
    best.map(|(_, b)| b)
}

/// Inclusive-pixel box IoU.
pub fn box_iou(a: &BBox, b: &BBox) -> f64 {
    let x0 = a.x_min.max(b.x_min);
    let y0 = a.y_min.max(b.y_min);
    let x1 = a.x_max.min(b.x_max);
    let y1 = a.y_max.min(b.y_max);
    let inter = if x0 <= x1 && y0 <= y1 { (x1 - x0 + 1) * (y1 - y0 + 1) } else { 0 };
    inter as f64 / (a.area() + b.area() - inter) as f64
}

/// Fraction of annotated frames whose predicted box has IoU ≥ 0.5 with the
/// ground truth. Frames without a ground-truth box are skipped; a missing
/// prediction counts as a miss.
pub fn corloc(pred: &[Option<BBox>], gt: &[Option<BBox>]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::FrameCountMismatch {
            expected: gt.len(),
            found: pred.len(),
        });
    }
    let mut evaluated = 0usize;
    let mut hits = 0usize;
    for (p, g) in pred.iter().zip(gt) {
        let Some(g) = g else { continue };
        evaluated += 1;
        if p.is_some_and(|p| box_iou(&p, g) >= 0.5) {
            hits += 1;
        }
    }
    if evaluated == 0 {
        return Err(Error::Empty("no annotated frames for localization".into()));
    }
    Ok(hits as f64 / evaluated as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub j_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub f_mean: Option<f64>,
    pub corloc: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub per_frame_j: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub per_frame_f: Vec<f64>,
}

impl MetricReport {
    /// Flat `key=value` lines; per-frame lists are comma separated.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(",");
        if let Some(j) = self.j_mean {
            let _ = writeln!(s, "j_mean={j:.6}");
        }
        if let Some(f) = self.f_mean {
            let _ = writeln!(s, "f_mean={f:.6}");
        }
        let _ = writeln!(s, "corloc={:.6}", self.corloc);
        if !self.per_frame_j.is_empty() {
            let _ = writeln!(s, "per_frame_j={}", join(&self.per_frame_j));
        }
        if !self.per_frame_f.is_empty() {
            let _ = writeln!(s, "per_frame_f={}", join(&self.per_frame_f));
        }
        s
    }
}

/// Scores predicted masks against ground truth. Box-only ground truth yields
/// localization alone. `theta` defaults to [`default_boundary_tolerance`].
pub fn evaluate(pred: &MaskStack, gt: &GroundTruth, theta: Option<usize>) -> Result<MetricReport> {
    let d = pred.dims;
    if gt.frames() != d.frames {
        return Err(Error::FrameCountMismatch {
            expected: gt.frames(),
            found: d.frames,
        });
    }
    if d.frames == 0 {
        return Err(Error::Empty("no frames to evaluate".into()));
    }
    let pred_boxes: Vec<Option<BBox>> = (0..d.frames)
        .map(|t| mask_to_bbox(pred.frame(t), d.height, d.width))
        .collect();
    match gt {
        GroundTruth::Masks(g) => {
            if g.dims != d {
                return Err(Error::DimensionMismatch(format!(
                    "prediction {}x{} vs ground truth {}x{}",
                    d.width, d.height, g.dims.width, g.dims.height
                )));
            }
            let theta = theta.unwrap_or_else(|| default_boundary_tolerance(d.height, d.width));
            let scores: Vec<(f64, f64)> = (0..d.frames)
                .into_par_iter()
                .map(|t| {
                    let (p, q) = (pred.frame(t), g.frame(t));
                    Ok((iou(p, q)?, f_boundary(p, q, d.height, d.width, theta)?))
                })
                .collect::<Result<_>>()?;
            let per_frame_j: Vec<f64> = scores.iter().map(|s| s.0).collect();
            let per_frame_f: Vec<f64> = scores.iter().map(|s| s.1).collect();
            let gt_boxes: Vec<Option<BBox>> = (0..d.frames)
                .map(|t| mask_to_bbox(g.frame(t), d.height, d.width))
                .collect();
            let loc = if gt_boxes.iter().any(Option::is_some) {
                corloc(&pred_boxes, &gt_boxes)?
            } else {
                1.0
            };
            Ok(MetricReport {
                j_mean: Some(mean(&per_frame_j)?),
                f_mean: Some(mean(&per_frame_f)?),
                corloc: loc,
                per_frame_j,
                per_frame_f,
            })
        }
        GroundTruth::Boxes { height, width, boxes } => {
            if (*height, *width) != (d.height, d.width) {
                return Err(Error::DimensionMismatch("prediction and box frame sizes differ".into()));
            }
            Ok(MetricReport {
                j_mean: None,
                f_mean: None,
                corloc: corloc(&pred_boxes, boxes)?,
                per_frame_j: Vec::new(),
                per_frame_f: Vec::new(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::Dims;
    use proptest::prelude::*;

    fn rect(h: usize, w: usize, y0: usize, x0: usize, y1: usize, x1: usize) -> Vec<bool> {
        let mut m = vec![false; h * w];
        for y in y0..=y1 {
            for x in x0..=x1 {
                m[y * w + x] = true;
            }
        }
        m
    }

    #[test]
    fn iou_examples() {
        let a = rect(4, 4, 1, 1, 2, 2);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &rect(4, 4, 3, 3, 3, 3)).unwrap(), 0.0);
        assert_eq!(iou(&rect(4, 4, 0, 0, 3, 1), &vec![true; 16]).unwrap(), 0.5);
        assert_eq!(iou(&[false; 4], &[false; 4]).unwrap(), 1.0);
        assert!(iou(&[true; 3], &[true; 4]).is_err());
    }

    #[test]
    fn j_mean_examples() {
        let full = vec![true; 16];
        let half = rect(4, 4, 0, 0, 3, 1);
        assert_eq!(j_mean(&[full.clone(), half], &[full.clone(), full.clone()]).unwrap(), 0.75);
        assert_eq!(j_mean(&[full.clone()], &[full.clone()]).unwrap(), 1.0);
        let empty: [Vec<bool>; 0] = [];
        assert!(j_mean(&empty, &empty).is_err());
        assert!(j_mean(&[full.clone()], &[full.clone(), full]).is_err());
    }

    #[test]
    fn f_boundary_examples() {
        let a = rect(8, 8, 2, 2, 5, 5);
        assert_eq!(f_boundary(&a, &a, 8, 8, 0).unwrap(), 1.0);
        assert_eq!(f_boundary(&vec![false; 64], &a, 8, 8, 2).unwrap(), 0.0);
        assert_eq!(f_boundary(&vec![false; 64], &vec![false; 64], 8, 8, 2).unwrap(), 1.0);
        // 2x2 square shifted right by one
        let p = rect(6, 6, 2, 2, 3, 3);
        let g = rect(6, 6, 2, 3, 3, 4);
        assert_eq!(f_boundary(&p, &g, 6, 6, 1).unwrap(), 1.0);
        // θ=0: each boundary shares 2 of its 4 pixels
        assert_eq!(f_boundary(&p, &g, 6, 6, 0).unwrap(), 0.5);
    }

    #[test]
    fn boundary_tolerance_default() {
        assert_eq!(default_boundary_tolerance(32, 32), 1);
        assert_eq!(default_boundary_tolerance(480, 854), 8);
    }

    #[test]
    fn bbox_examples() {
        let mut m = vec![false; 20];
        m[2 * 5 + 3] = true;
        assert_eq!(mask_to_bbox(&m, 4, 5), Some(BBox::new(3, 2, 3, 2).unwrap()));
        assert_eq!(mask_to_bbox(&[false; 20], 4, 5), None);
        // size-3 component on the left, size-5 on the right
        let mut m = vec![false; 6 * 6];
        for y in 0..3 {
            m[y * 6] = true;
        }
        for y in 1..6 {
            m[y * 6 + 4] = true;
        }
        assert_eq!(mask_to_bbox(&m, 6, 6), Some(BBox::new(4, 1, 4, 5).unwrap()));
    }

    #[test]
    fn corloc_examples() {
        let g = BBox::new(0, 0, 9, 9).unwrap();
        assert_eq!(corloc(&[Some(g), Some(g)], &[Some(g), Some(g)]).unwrap(), 1.0);
        let quarter = BBox::new(0, 0, 4, 4).unwrap();
        assert_eq!(box_iou(&quarter, &g), 0.25);
        assert_eq!(corloc(&[Some(quarter)], &[Some(g)]).unwrap(), 0.0);
        let half = BBox::new(0, 0, 9, 4).unwrap();
        assert_eq!(box_iou(&g, &half), 0.5);
        assert_eq!(corloc(&[Some(half)], &[Some(g)]).unwrap(), 1.0);
        assert_eq!(corloc(&[None, Some(g)], &[Some(g), None]).unwrap(), 0.0);
        assert!(corloc(&[None], &[None]).is_err());
    }

    #[test]
    fn report_for_masks_and_boxes() {
        let dims = Dims::new(2, 4, 4);
        let data: Vec<bool> = [rect(4, 4, 1, 1, 2, 2), rect(4, 4, 0, 0, 1, 1)].concat();
        let pred = MaskStack::new(dims, data.clone()).unwrap();
        let r = evaluate(&pred, &GroundTruth::Masks(pred.clone()), None).unwrap();
        assert_eq!((r.j_mean, r.f_mean, r.corloc), (Some(1.0), Some(1.0), 1.0));
        assert_eq!(r.per_frame_j, vec![1.0, 1.0]);
        assert!(r.to_key_value().starts_with("j_mean=1.000000\nf_mean=1.000000\ncorloc=1.000000\n"));

        let boxes = GroundTruth::boxes(4, 4, vec![Some(BBox::new(1, 1, 2, 2).unwrap()), None]).unwrap();
        let r = evaluate(&pred, &boxes, None).unwrap();
        assert_eq!((r.j_mean, r.f_mean, r.corloc), (None, None, 1.0));
        assert!(!r.to_key_value().contains("j_mean"));
    }

    fn mask_pair() -> impl Strategy<Value = (Vec<bool>, Vec<bool>)> {
        (prop::collection::vec(any::<bool>(), 64), prop::collection::vec(any::<bool>(), 64))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded((a, b) in mask_pair()) {
            let x = iou(&a, &b).unwrap();
            prop_assert_eq!(x, iou(&b, &a).unwrap());
            prop_assert!((0.0..=1.0).contains(&x));
        }

        #[test]
        fn f_boundary_symmetric((a, b) in mask_pair(), theta in 0usize..3) {
            let x = f_boundary(&a, &b, 8, 8, theta).unwrap();
            prop_assert_eq!(x, f_boundary(&b, &a, 8, 8, theta).unwrap());
            prop_assert!((0.0..=1.0).contains(&x));
        }

        #[test]
        fn corloc_ignores_frame_order(
            pairs in prop::collection::vec((0usize..8, 0usize..8, 0usize..8, 0usize..8), 1..10),
            rot in 0usize..10,
        ) {
            let boxes: Vec<(Option<BBox>, Option<BBox>)> = pairs
                .iter()
                .map(|&(a, b, c, d)| {
                    (Some(BBox::new(a.min(b), a.min(b), a.max(b), a.max(b)).unwrap()),
                     Some(BBox::new(c.min(d), 0, c.max(d), 7).unwrap()))
                })
                .collect();
            let (p, g): (Vec<_>, Vec<_>) = boxes.iter().copied().unzip();
            let mut p2 = p.clone();
            let mut g2 = g.clone();
            let k = rot % p.len();
            p2.rotate_left(k);
            g2.rotate_left(k);
            prop_assert_eq!(corloc(&p, &g).unwrap(), corloc(&p2, &g2).unwrap());
        }
    }
}
