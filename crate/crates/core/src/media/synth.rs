//! Synthetic sequences with analytically exact flow: a textured object translating
//! over a textured, independently translating background.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::{Dims, FlowField, FlowSet, GroundTruth, MaskStack, VideoTensor};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ObjectShape {
    Square { side: usize },
    Disc { diameter: usize },
}

impl ObjectShape {
    /// Side of the bounding square.
    pub fn extent(&self) -> usize {
        match *self {
            ObjectShape::Square { side } => side,
            ObjectShape::Disc { diameter } => diameter,
        }
    }

    /// Whether object-local coordinates `(ly, lx)` fall inside the shape.
    fn contains(&self, ly: f64, lx: f64) -> bool {
        let s = self.extent() as f64;
        match self {
            ObjectShape::Square { .. } => ly >= 0.0 && ly < s && lx >= 0.0 && lx < s,
            ObjectShape::Disc { .. } => {
                let c = (s - 1.0) / 2.0;
                let r = s / 2.0;
                (ly - c).powi(2) + (lx - c).powi(2) <= r * r
            }
        }
    }
}

/// Seeded noise texture: a per-seed base color plus i.i.d. uniform noise of the given amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthTexture {
    pub seed: u64,
    pub amplitude: f64,
}

impl SynthTexture {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            amplitude: 0.4,
        }
    }

    fn render(&self, rows: usize, cols: usize) -> Vec<[f64; 3]> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let span = 1.0 - self.amplitude;
        let base: [f64; 3] = std::array::from_fn(|_| rng.random::<f64>() * span);
        (0..rows * cols)
            .map(|_| std::array::from_fn(|c| base[c] + self.amplitude * rng.random::<f64>()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub shape: ObjectShape,
    /// Top-left corner `(x, y)` of the object's bounding square in frame 0.
    pub start: (f64, f64),
    /// Per-frame object translation `(dx, dy)`.
    pub object_velocity: (f64, f64),
    /// Per-frame background translation `(dx, dy)`.
    pub background_velocity: (f64, f64),
    pub object_texture: SynthTexture,
    pub background_texture: SynthTexture,
}

impl SynthSpec {
    /// A scene fully determined by `seed`: square (even seeds) or disc (odd seeds) of
    /// extent `min(h, w) / 3`, moving diagonally by one pixel per frame across the
    /// centre, over a background drifting one pixel per frame horizontally.
    pub fn seeded_scene(seed: u64, frames: usize, height: usize, width: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
        let mut sign = || if rng.random::<bool>() { 1.0 } else { -1.0 };
        let object_velocity = (sign(), sign());
        let background_velocity = (sign(), 0.0);
        let extent = (height.min(width) / 3).max(2);
        let shape = if seed % 2 == 0 {
            ObjectShape::Square { side: extent }
        } else {
            ObjectShape::Disc { diameter: extent }
        };
        let mut spec = Self {
            frames,
            height,
            width,
            shape,
            start: (0.0, 0.0),
            object_velocity,
            background_velocity,
            object_texture: SynthTexture::new(seed.wrapping_mul(2).wrapping_add(1)),
            background_texture: SynthTexture::new(seed.wrapping_mul(2).wrapping_add(2)),
        };
        spec.centre_trajectory();
        spec
    }

    /// Places the start so the object sits at the frame centre halfway through the sequence.
    pub fn centre_trajectory(&mut self) {
        let extent = self.shape.extent();
        let half_way = (self.frames as f64 - 1.0) / 2.0;
        let travel = |v: f64| (v * half_way).round();
        self.start = (
            (self.width / 2) as f64 - (extent / 2) as f64 - travel(self.object_velocity.0),
            (self.height / 2) as f64 - (extent / 2) as f64 - travel(self.object_velocity.1),
        );
    }

    fn validate(&self) -> Result<()> {
        if self.frames < 2 {
            return Err(Error::InvalidSynth(format!(
                "need at least 2 frames, got {}",
                self.frames
            )));
        }
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidSynth("empty frame".into()));
        }
        let e = self.shape.extent();
        if e == 0 {
            return Err(Error::InvalidSynth("empty object".into()));
        }
        if e > self.height || e > self.width {
            return Err(Error::InvalidSynth(format!(
                "object extent {e} larger than {}x{} frame",
                self.width, self.height
            )));
        }
        for tex in [&self.object_texture, &self.background_texture] {
            if !(0.0..=1.0).contains(&tex.amplitude) {
                return Err(Error::InvalidSynth(format!(
                    "texture amplitude {} outside [0,1]",
                    tex.amplitude
                )));
            }
        }
        let finite = [
            self.start.0,
            self.start.1,
            self.object_velocity.0,
            self.object_velocity.1,
            self.background_velocity.0,
            self.background_velocity.1,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSynth("non-finite trajectory".into()));
        }
        Ok(())
    }

    fn object_origin(&self, t: usize) -> (f64, f64) {
        (
            self.start.0 + t as f64 * self.object_velocity.0,
            self.start.1 + t as f64 * self.object_velocity.1,
        )
    }
}

fn nearest(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

/// Renders frames, exact forward/backward flow and ground-truth masks for `spec`.
pub fn synth_sequence<T: Scalar>(
    spec: &SynthSpec,
) -> Result<(VideoTensor<T>, FlowSet, GroundTruth)> {
    spec.validate()?;
    let (m, h, w) = (spec.frames, spec.height, spec.width);
    let dims = Dims::new(m, h, w);
    let extent = spec.shape.extent();

    let (bg_rows, bg_cols) = (2 * h, 2 * w);
    let bg = spec.background_texture.render(bg_rows, bg_cols);
    let obj = spec.object_texture.render(extent, extent);

    let mut mask = vec![false; dims.node_count()];
    let mut pixels: Vec<T> = Vec::with_capacity(dims.node_count() * 3);
    for t in 0..m {
        let (ox, oy) = spec.object_origin(t);
        let (bx, by) = (
            t as f64 * spec.background_velocity.0,
            t as f64 * spec.background_velocity.1,
        );
        let mut any = false;
        for y in 0..h {
            for x in 0..w {
                let (ly, lx) = (y as f64 - oy, x as f64 - ox);
                let color = if spec.shape.contains(ly, lx) {
                    mask[dims.node(t, y, x)] = true;
                    any = true;
                    let r = nearest(ly).rem_euclid(extent as i64) as usize;
                    let c = nearest(lx).rem_euclid(extent as i64) as usize;
                    obj[r * extent + c]
                } else {
                    let r = nearest(y as f64 - by).rem_euclid(bg_rows as i64) as usize;
                    let c = nearest(x as f64 - bx).rem_euclid(bg_cols as i64) as usize;
                    bg[r * bg_cols + c]
                };
                pixels.extend(color.iter().map(|&v| T::lit(v.clamp(0.0, 1.0))));
            }
        }
        if !any {
            return Err(Error::InvalidSynth(format!(
                "object leaves the frame at t={t}"
            )));
        }
    }

    let vo = (spec.object_velocity.0 as f32, spec.object_velocity.1 as f32);
    let vb = (
        spec.background_velocity.0 as f32,
        spec.background_velocity.1 as f32,
    );
    let hw = dims.frame_len();
    let layer_field = |frame_mask: &[bool], sign: f32| {
        let mut f = FlowField::zeros(h, w);
        for y in 0..h {
            for x in 0..w {
                let v = if frame_mask[y * w + x] { vo } else { vb };
                f.set(y, x, (sign * v.0, sign * v.1));
            }
        }
        f
    };
    let forward = (0..m - 1)
        .map(|t| layer_field(&mask[t * hw..(t + 1) * hw], 1.0))
        .collect();
    let backward = (0..m - 1)
        .map(|t| layer_field(&mask[(t + 1) * hw..(t + 2) * hw], -1.0))
        .collect();

    let video = VideoTensor::new(m, h, w, 3, pixels)?;
    let flows = FlowSet::new(forward, backward)?;
    let gt = GroundTruth::Masks(MaskStack::new(dims, mask)?);
    Ok((video, flows, gt))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_spec() -> SynthSpec {
        SynthSpec {
            frames: 3,
            height: 4,
            width: 4,
            shape: ObjectShape::Square { side: 2 },
            start: (0.0, 1.0),
            object_velocity: (1.0, 0.0),
            background_velocity: (0.0, 0.0),
            object_texture: SynthTexture::new(1),
            background_texture: SynthTexture::new(2),
        }
    }

    #[test]
    fn square_over_static_background() {
        let (_, flows, gt) = synth_sequence::<f64>(&square_spec()).unwrap();
        let masks = gt.masks().unwrap();
        for y in 0..4 {
            for x in 0..4 {
                let inside = (1..3).contains(&y) && (0..2).contains(&x);
                assert_eq!(masks.get(0, y, x), inside);
                let expected = if inside { (1.0, 0.0) } else { (0.0, 0.0) };
                assert_eq!(flows.forward()[0].get(y, x), expected);
            }
        }
        assert!(masks.get(1, 1, 2) && !masks.get(1, 1, 0));
    }

    #[test]
    fn drifting_background_static_object() {
        let mut spec = square_spec();
        spec.object_velocity = (0.0, 0.0);
        spec.background_velocity = (-1.0, 0.0);
        let (_, flows, gt) = synth_sequence::<f64>(&spec).unwrap();
        let masks = gt.masks().unwrap();
        for y in 0..4 {
            for x in 0..4 {
                let expected = if masks.get(0, y, x) { (0.0, 0.0) } else { (-1.0, 0.0) };
                assert_eq!(flows.forward()[0].get(y, x), expected);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SynthSpec::seeded_scene(7, 5, 16, 16);
        let a = synth_sequence::<f64>(&spec).unwrap();
        let b = synth_sequence::<f64>(&spec).unwrap();
        assert_eq!(a, b);
        let other = synth_sequence::<f64>(&SynthSpec::seeded_scene(8, 5, 16, 16)).unwrap();
        assert_ne!(a.0, other.0);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = square_spec();
        spec.shape = ObjectShape::Square { side: 5 };
        assert!(matches!(synth_sequence::<f64>(&spec), Err(Error::InvalidSynth(_))));
        let mut spec = square_spec();
        spec.frames = 1;
        assert!(synth_sequence::<f64>(&spec).is_err());
        let mut spec = square_spec();
        spec.start = (100.0, 100.0);
        assert!(synth_sequence::<f64>(&spec).is_err());
    }

    #[test]
    fn forward_then_backward_returns_unoccluded_pixels() {
        for seed in 0..6 {
            let spec = SynthSpec::seeded_scene(seed, 6, 20, 20);
            let (_, flows, gt) = synth_sequence::<f64>(&spec).unwrap();
            let masks = gt.masks().unwrap();
            for t in 0..spec.frames - 1 {
                for y in 0..20 {
                    for x in 0..20 {
                        let (dx, dy) = flows.forward()[t].get(y, x);
                        let (tx, ty) = (x as f32 + dx, y as f32 + dy);
                        if tx < 0.0 || ty < 0.0 || tx >= 20.0 || ty >= 20.0 {
                            continue;
                        }
                        let (tx, ty) = (tx as usize, ty as usize);
                        // same layer at both ends: not occluded or disoccluded
                        if masks.get(t, y, x) != masks.get(t + 1, ty, tx) {
                            continue;
                        }
                        let (bx, by) = flows.backward()[t].get(ty, tx);
                        assert_eq!((tx as f32 + bx, ty as f32 + by), (x as f32, y as f32));
                    }
                }
            }
        }
    }

    #[test]
    fn forward_flow_carries_mask_onto_next_mask() {
        for seed in 0..6 {
            let spec = SynthSpec::seeded_scene(seed, 6, 20, 20);
            let (_, flows, gt) = synth_sequence::<f64>(&spec).unwrap();
            let masks = gt.masks().unwrap();
            for t in 0..spec.frames - 1 {
                let mut moved = vec![false; 400];
                for y in 0..20 {
                    for x in 0..20 {
                        if masks.get(t, y, x) {
                            let (dx, dy) = flows.forward()[t].get(y, x);
                            let (tx, ty) = (x as i64 + dx as i64, y as i64 + dy as i64);
                            assert!((0..20).contains(&tx) && (0..20).contains(&ty));
                            moved[ty as usize * 20 + tx as usize] = true;
                        }
                    }
                }
                assert_eq!(moved.as_slice(), masks.frame(t + 1));
            }
        }
    }
}
