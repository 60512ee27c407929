//! Frames, flow fields, masks and probability maps, plus their on-disk codecs.
//!
//! Frames are binary netpbm (P5 grayscale, P6 RGB, 8-bit). Flow uses the
//! Middlebury `.flo` layout. Masks and probability maps are P5 files.

mod flo;
mod pnm;
mod synth;

pub use flo::{read_flo, write_flo, FLO_MAGIC};
pub use pnm::{
    quantize_unit, read_frames, read_mask_pgm, read_mask_stack, read_pnm, read_probability_maps, sorted_files,
    write_mask_pgm, write_pgm,
    write_ppm, PnmImage,
};
pub use synth::{synth_sequence, ObjectShape, SynthSpec, SynthTexture};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

/// Decoded frame stack with intensities in `[0,1]`, laid out `(t, y, x, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoTensor<T> {
    frames: usize,
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> VideoTensor<T> {
    pub fn new(
        frames: usize,
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<T>,
    ) -> Result<Self> {
        if frames < 2 {
            return Err(Error::DimensionMismatch(format!(
                "a video needs at least 2 frames, got {frames}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::DimensionMismatch(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if height == 0 || width == 0 {
            return Err(Error::DimensionMismatch("empty frame".into()));
        }
        let expected = frames * height * width * channels;
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "video buffer holds {} values, expected {expected}",
                data.len()
            )));
        }
        if let Some(bad) = data
            .iter()
            .find(|v| !(**v >= T::zero() && **v <= T::one()))
        {
            return Err(Error::OutOfRange(format!("intensity {bad} outside [0,1]")));
        }
        Ok(Self {
            frames,
            height,
            width,
            channels,
            data,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of spacetime nodes `m·h·w`.
    pub fn node_count(&self) -> usize {
        self.frames * self.height * self.width
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Channel values at one pixel.
    pub fn pixel(&self, t: usize, y: usize, x: usize) -> &[T] {
        let start = ((t * self.height + y) * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    /// Channel values of node `i` (linear spacetime index).
    pub fn node(&self, i: usize) -> &[T] {
        let start = i * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.frames, self.height, self.width)
    }
}

/// Spacetime grid size; maps node ids to `(t, y, x)` and back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
}

impl Dims {
    pub fn new(frames: usize, height: usize, width: usize) -> Self {
        Self {
            frames,
            height,
            width,
        }
    }

    pub fn frame_len(&self) -> usize {
        self.height * self.width
    }

    pub fn node_count(&self) -> usize {
        self.frames * self.frame_len()
    }

    #[inline]
    pub fn node(&self, t: usize, y: usize, x: usize) -> usize {
        t * self.frame_len() + y * self.width + x
    }

    #[inline]
    pub fn coords(&self, i: usize) -> (usize, usize, usize) {
        let hw = self.frame_len();
        let t = i / hw;
        let r = i % hw;
        (t, r / self.width, r % self.width)
    }

    #[inline]
    pub fn frame_of(&self, i: usize) -> usize {
        i / self.frame_len()
    }
}

/// One dense displacement field `(h, w, 2)`, stored as interleaved `(dx, dy)` in `f32`
/// to match the interchange format bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl FlowField {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * 2 {
            return Err(Error::DimensionMismatch(format!(
                "flow buffer holds {} values, expected {}",
                data.len(),
                height * width * 2
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width * 2],
        }
    }

    /// Field with the same displacement at every pixel.
    pub fn constant(height: usize, width: usize, dx: f32, dy: f32) -> Self {
        let data = std::iter::repeat([dx, dy])
            .take(height * width)
            .flatten()
            .collect();
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> (f32, f32) {
        let k = (y * self.width + x) * 2;
        (self.data[k], self.data[k + 1])
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, d: (f32, f32)) {
        let k = (y * self.width + x) * 2;
        self.data[k] = d.0;
        self.data[k + 1] = d.1;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Forward (`t → t+1`) and backward (`t+1 → t`) flow for every consecutive frame pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSet {
    forward: Vec<FlowField>,
    backward: Vec<FlowField>,
}

impl FlowSet {
    pub fn new(forward: Vec<FlowField>, backward: Vec<FlowField>) -> Result<Self> {
        if forward.is_empty() {
            return Err(Error::Empty("flow set has no frame pairs".into()));
        }
        if forward.len() != backward.len() {
            return Err(Error::FrameCountMismatch {
                expected: forward.len(),
                found: backward.len(),
            });
        }
        let (h, w) = (forward[0].height, forward[0].width);
        for (k, f) in forward.iter().chain(&backward).enumerate() {
            if f.height != h || f.width != w {
                return Err(Error::DimensionMismatch(format!(
                    "flow field {k} is {}x{}, expected {h}x{w}",
                    f.width, f.height
                )));
            }
            if !f.is_finite() {
                return Err(Error::NonFinite(format!("flow field {k}")));
            }
        }
        Ok(Self { forward, backward })
    }

    /// Number of frames the flow set describes (`pairs + 1`).
    pub fn frames(&self) -> usize {
        self.forward.len() + 1
    }

    pub fn height(&self) -> usize {
        self.forward[0].height
    }

    pub fn width(&self) -> usize {
        self.forward[0].width
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.frames(), self.height(), self.width())
    }

    pub fn forward(&self) -> &[FlowField] {
        &self.forward
    }

    pub fn backward(&self) -> &[FlowField] {
        &self.backward
    }

    /// Forward displacement stored at a node; `(0, 0)` in the last frame, which has no forward field.
    pub fn forward_at(&self, t: usize, y: usize, x: usize) -> (f32, f32) {
        self.forward.get(t).map_or((0.0, 0.0), |f| f.get(y, x))
    }

    /// Backward displacement stored at a node; `(0, 0)` in frame 0.
    pub fn backward_at(&self, t: usize, y: usize, x: usize) -> (f32, f32) {
        if t == 0 {
            return (0.0, 0.0);
        }
        self.backward.get(t - 1).map_or((0.0, 0.0), |f| f.get(y, x))
    }

    /// Checks that this flow set matches a video's frame count and size.
    pub fn check_against(&self, dims: Dims) -> Result<()> {
        if self.frames() != dims.frames {
            return Err(Error::FrameCountMismatch {
                expected: dims.frames - 1,
                found: self.forward.len(),
            });
        }
        if self.height() != dims.height || self.width() != dims.width {
            return Err(Error::DimensionMismatch(format!(
                "flow is {}x{}, frames are {}x{}",
                self.width(),
                self.height(),
                dims.width,
                dims.height
            )));
        }
        Ok(())
    }
}

/// Axis-aligned inclusive pixel box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
}

impl BBox {
    pub fn new(x_min: usize, y_min: usize, x_max: usize, y_max: usize) -> Result<Self> {
        if x_min > x_max || y_min > y_max {
            return Err(Error::OutOfRange(format!(
                "box ({x_min},{y_min},{x_max},{y_max}) has negative extent"
            )));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn area(&self) -> usize {
        (self.x_max - self.x_min + 1) * (self.y_max - self.y_min + 1)
    }

    pub fn fits(&self, height: usize, width: usize) -> bool {
        self.x_max < width && self.y_max < height
    }
}

/// Stack of per-frame binary masks, `(t, y, x)` row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskStack {
    pub dims: Dims,
    pub data: Vec<bool>,
}

impl MaskStack {
    pub fn new(dims: Dims, data: Vec<bool>) -> Result<Self> {
        if data.len() != dims.node_count() {
            return Err(Error::DimensionMismatch(format!(
                "mask stack holds {} pixels, expected {}",
                data.len(),
                dims.node_count()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn frame(&self, t: usize) -> &[bool] {
        let hw = self.dims.frame_len();
        &self.data[t * hw..(t + 1) * hw]
    }

    pub fn get(&self, t: usize, y: usize, x: usize) -> bool {
        self.data[self.dims.node(t, y, x)]
    }
}

/// Ground-truth annotation: dense masks or per-frame boxes (`None` where a frame is unannotated).
#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    Masks(MaskStack),
    Boxes {
        height: usize,
        width: usize,
        boxes: Vec<Option<BBox>>,
    },
}

impl GroundTruth {
    pub fn boxes(height: usize, width: usize, boxes: Vec<Option<BBox>>) -> Result<Self> {
        for b in boxes.iter().flatten() {
            if !b.fits(height, width) {
                return Err(Error::OutOfRange(format!(
                    "box {b:?} outside {width}x{height} frame"
                )));
            }
        }
        Ok(GroundTruth::Boxes {
            height,
            width,
            boxes,
        })
    }

    pub fn frames(&self) -> usize {
        match self {
            GroundTruth::Masks(m) => m.dims.frames,
            GroundTruth::Boxes { boxes, .. } => boxes.len(),
        }
    }

    pub fn masks(&self) -> Option<&MaskStack> {
        match self {
            GroundTruth::Masks(m) => Some(m),
            GroundTruth::Boxes { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_round_trip_node_ids() {
        let d = Dims::new(3, 4, 5);
        for i in 0..d.node_count() {
            let (t, y, x) = d.coords(i);
            assert_eq!(d.node(t, y, x), i);
        }
    }

    #[test]
    fn video_rejects_single_frame_and_out_of_range() {
        assert!(VideoTensor::<f64>::new(1, 1, 1, 1, vec![0.0]).is_err());
        assert!(VideoTensor::<f64>::new(2, 1, 1, 1, vec![0.0, 1.5]).is_err());
        assert!(VideoTensor::<f64>::new(2, 1, 1, 1, vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn flow_set_rejects_nan_and_mismatch() {
        let mut bad = FlowField::zeros(2, 2);
        bad.set(0, 0, (f32::NAN, 0.0));
        assert!(FlowSet::new(vec![bad], vec![FlowField::zeros(2, 2)]).is_err());
        assert!(FlowSet::new(vec![FlowField::zeros(2, 2)], vec![FlowField::zeros(3, 2)]).is_err());
        assert!(FlowSet::new(vec![FlowField::zeros(2, 2)], vec![]).is_err());
    }

    #[test]
    fn boxes_must_fit() {
        let b = BBox::new(0, 0, 4, 4).unwrap();
        assert!(GroundTruth::boxes(4, 4, vec![Some(b)]).is_err());
        assert!(GroundTruth::boxes(5, 5, vec![Some(b), None]).is_ok());
        assert!(BBox::new(3, 0, 2, 0).is_err());
    }
}
