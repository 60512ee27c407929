//! Node descriptors: displacements read along the outgoing flow chains, color,
//! and optional external foreground probabilities, concatenated into `F`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ChainTable, Direction};
use crate::linalg::MatRef;
use crate::media::{Dims, FlowSet, VideoTensor};
use crate::Scalar;

/// A block of feature columns for all `n` nodes, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureChannel<T> {
    pub name: String,
    pub width: usize,
    pub data: Vec<T>,
    /// Whether [`assemble`] may standardize these columns (false for the bias column).
    pub standardize: bool,
}

impl<T: Scalar> FeatureChannel<T> {
    pub fn new(name: impl Into<String>, width: usize, data: Vec<T>) -> Self {
        Self {
            name: name.into(),
            width,
            data,
            standardize: true,
        }
    }

    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.width..(i + 1) * self.width]
    }
}

/// The feature matrix `F` (`n × d`, row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
    layout: Vec<(String, usize)>,
    standardized: bool,
}

impl<T: Scalar> FeatureMatrix<T> {
    /// Wraps a raw matrix as a single unnamed channel.
    pub fn from_raw(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} feature matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix".into()));
        }
        Ok(Self {
            rows,
            cols,
            data,
            layout: vec![("raw".into(), cols)],
            standardized: false,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn layout(&self) -> &[(String, usize)] {
        &self.layout
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn view(&self) -> MatRef<'_, T> {
        MatRef::new(self.rows, self.cols, &self.data)
    }

    /// Block-diagonal expansion: row `i` in frame `t` is placed in columns
    /// `[t·d, (t+1)·d)`, zeros elsewhere. Regressing on the result globally is
    /// the same as regressing per frame.
    pub fn block_diagonal(&self, dims: Dims) -> Result<Self> {
        check_frame_dims(self.rows, dims)?;
        let d = self.cols;
        let wide = d * dims.frames;
        let mut data = vec![T::zero(); self.rows * wide];
        for i in 0..self.rows {
            let t = dims.frame_of(i);
            data[i * wide + t * d..i * wide + (t + 1) * d].copy_from_slice(self.row(i));
        }
        Ok(Self {
            rows: self.rows,
            cols: wide,
            data,
            layout: vec![("block_diagonal".into(), wide)],
            standardized: self.standardized,
        })
    }
}

fn check_frame_dims(rows: usize, dims: Dims) -> Result<()> {
    if dims.frame_len() == 0 || rows != dims.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "{rows} feature rows do not split into {} frames of {}x{}",
            dims.frames, dims.height, dims.width
        )));
    }
    Ok(())
}

/// Per-frame views `F_t` of shape `(h·w) × d`.
#[derive(Debug, Clone)]
pub struct FrameBlockView<'a, T> {
    blocks: Vec<MatRef<'a, T>>,
}

impl<'a, T: Scalar> FrameBlockView<'a, T> {
    pub fn blocks(&self) -> &[MatRef<'a, T>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

pub fn frame_blocks<T: Scalar>(
    f: &FeatureMatrix<T>,
    height: usize,
    width: usize,
    frames: usize,
) -> Result<FrameBlockView<'_, T>> {
    let hw = height * width;
    if hw == 0 || f.rows % hw != 0 || f.rows / hw != frames {
        return Err(Error::DimensionMismatch(format!(
            "{} rows do not split into {frames} frames of {width}x{height}",
            f.rows
        )));
    }
    let d = f.cols;
    let blocks = f
        .data
        .chunks_exact(hw * d)
        .map(|chunk| MatRef::new(hw, d, chunk))
        .collect();
    Ok(FrameBlockView { blocks })
}

/// Nodes `start, next(start), next(next(start)), …`: `len` slots, `None` after termination.
fn chain_slots(chains: &ChainTable, start: usize, dir: Direction, len: usize) -> impl Iterator<Item = Option<usize>> + '_ {
    let mut cur = Some(start);
    (0..len).map(move |_| {
        let here = cur;
        cur = cur.and_then(|c| chains.next(c, dir));
        here
    })
}

/// Displacements read at the first `steps` nodes of each chain (the node itself
/// included): `2·steps` forward values then `2·steps` backward values.
pub fn motion_chain_features<T: Scalar>(
    chains: &ChainTable,
    flows: &FlowSet,
    steps: usize,
) -> Result<FeatureChannel<T>> {
    if steps == 0 {
        return Err(Error::InvalidConfig("chain feature steps must be >= 1".into()));
    }
    let dims = chains.dims();
    let width = 4 * steps;
    let mut data = vec![T::zero(); dims.node_count() * width];
    for (i, row) in data.chunks_exact_mut(width).enumerate() {
        let (fwd, bwd) = row.split_at_mut(2 * steps);
        for (slot, node) in chain_slots(chains, i, Direction::Forward, steps).enumerate() {
            if let Some(j) = node {
                let (t, y, x) = dims.coords(j);
                let (dx, dy) = flows.forward_at(t, y, x);
                fwd[2 * slot] = T::lit(dx as f64);
                fwd[2 * slot + 1] = T::lit(dy as f64);
            }
        }
        for (slot, node) in chain_slots(chains, i, Direction::Backward, steps).enumerate() {
            if let Some(j) = node {
                let (t, y, x) = dims.coords(j);
                let (dx, dy) = flows.backward_at(t, y, x);
                bwd[2 * slot] = T::lit(dx as f64);
                bwd[2 * slot + 1] = T::lit(dy as f64);
            }
        }
    }
    Ok(FeatureChannel::new("motion", width, data))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorMode {
    #[default]
    NodeOnly,
    AlongChain,
}

/// Node value, then `steps` values along the forward chain, then `steps` along
/// the backward chain, each `c` wide; zero after a chain terminates.
fn sample_along_chains<T: Scalar>(
    chains: &ChainTable,
    steps: usize,
    c: usize,
    value: impl Fn(usize) -> Vec<T>,
    name: &str,
) -> FeatureChannel<T> {
    let n = chains.node_count();
    let width = c * (2 * steps + 1);
    let mut data = vec![T::zero(); n * width];
    for (i, row) in data.chunks_exact_mut(width).enumerate() {
        row[..c].copy_from_slice(&value(i));
        for (k, dir) in [Direction::Forward, Direction::Backward].into_iter().enumerate() {
            let base = c + k * steps * c;
            for (slot, node) in chain_slots(chains, i, dir, steps + 1).skip(1).enumerate() {
                if let Some(j) = node {
                    row[base + slot * c..base + (slot + 1) * c].copy_from_slice(&value(j));
                }
            }
        }
    }
    FeatureChannel::new(name, width, data)
}

pub fn color_features<T: Scalar>(
    video: &VideoTensor<T>,
    chains: &ChainTable,
    steps: usize,
    mode: ColorMode,
) -> Result<FeatureChannel<T>> {
    if video.node_count() != chains.node_count() {
        return Err(Error::DimensionMismatch(
            "video and chain table disagree on node count".into(),
        ));
    }
    let c = video.channels();
    Ok(match mode {
        ColorMode::NodeOnly => FeatureChannel::new("color", c, video.data().to_vec()),
        ColorMode::AlongChain => {
            sample_along_chains(chains, steps, c, |i| video.node(i).to_vec(), "color_chain")
        }
    })
}

pub fn probability_chain_features<T: Scalar>(
    maps: &[Vec<T>],
    chains: &ChainTable,
    steps: usize,
) -> Result<FeatureChannel<T>> {
    let dims = chains.dims();
    if maps.len() != dims.frames {
        return Err(Error::FrameCountMismatch {
            expected: dims.frames,
            found: maps.len(),
        });
    }
    if let Some(bad) = maps.iter().find(|m| m.len() != dims.frame_len()) {
        return Err(Error::DimensionMismatch(format!(
            "probability map has {} pixels, frames have {}",
            bad.len(),
            dims.frame_len()
        )));
    }
    let hw = dims.frame_len();
    Ok(sample_along_chains(
        chains,
        steps,
        1,
        |i| vec![maps[i / hw][i % hw]],
        "probability",
    ))
}

/// Constant-one column, never standardized.
pub fn bias_channel<T: Scalar>(n: usize) -> FeatureChannel<T> {
    FeatureChannel {
        name: "bias".into(),
        width: 1,
        data: vec![T::one(); n],
        standardize: false,
    }
}

/// Concatenates channels column-wise; optionally standardizes every eligible
/// column to zero mean and unit population variance (constant columns become zero).
pub fn assemble<T: Scalar>(channels: Vec<FeatureChannel<T>>, standardize: bool) -> Result<FeatureMatrix<T>> {
    let first = channels
        .first()
        .ok_or_else(|| Error::Empty("no feature channels".into()))?;
    let rows = first.rows();
    for ch in &channels {
        if ch.width == 0 || ch.data.len() != rows * ch.width {
            return Err(Error::DimensionMismatch(format!(
                "channel {} has {} values, expected {} rows of width {}",
                ch.name,
                ch.data.len(),
                rows,
                ch.width
            )));
        }
        if ch.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("channel {}", ch.name)));
        }
    }
    let cols: usize = channels.iter().map(|c| c.width).sum();
    let mut data = vec![T::zero(); rows * cols];
    let mut offset = 0;
    let mut standardize_col = Vec::with_capacity(cols);
    for ch in &channels {
        for i in 0..rows {
            data[i * cols + offset..i * cols + offset + ch.width].copy_from_slice(ch.row(i));
        }
        standardize_col.extend(std::iter::repeat_n(ch.standardize, ch.width));
        offset += ch.width;
    }
    if standardize {
        for (col, _) in standardize_col.iter().enumerate().filter(|(_, &s)| s) {
            standardize_column(&mut data, rows, cols, col);
        }
    }
    Ok(FeatureMatrix {
        rows,
        cols,
        data,
        layout: channels.into_iter().map(|c| (c.name, c.width)).collect(),
        standardized: standardize,
    })
}

fn standardize_column<T: Scalar>(data: &mut [T], rows: usize, cols: usize, col: usize) {
    let nf = T::of_usize(rows);
    let mean = (0..rows).map(|i| data[i * cols + col]).sum::<T>() / nf;
    let var = (0..rows)
        .map(|i| {
            let d = data[i * cols + col] - mean;
            d * d
        })
        .sum::<T>()
        / nf;
    let sd = var.sqrt();
    // values equal up to rounding count as a constant column
    let constant = sd <= T::lit(1e3) * T::epsilon() * mean.abs().max(T::one());
    for i in 0..rows {
        let v = &mut data[i * cols + col];
        *v = if constant { T::zero() } else { (*v - mean) / sd };
    }
}

/// Selectable feature channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Motion,
    Color,
    ColorChain,
    Probability,
}

impl FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "motion" => Ok(ChannelKind::Motion),
            "color" => Ok(ChannelKind::Color),
            "color_chain" | "color-chain" => Ok(ChannelKind::ColorChain),
            "probability" | "prob" => Ok(ChannelKind::Probability),
            other => Err(Error::InvalidConfig(format!("unknown channel {other:?}"))),
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelKind::Motion => "motion",
            ChannelKind::Color => "color",
            ChannelKind::ColorChain => "color_chain",
            ChannelKind::Probability => "probability",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub channels: Vec<ChannelKind>,
    /// Chain steps `L` for motion, chained color and probability channels.
    pub chain_steps: usize,
    pub standardize: bool,
    pub bias: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            channels: vec![ChannelKind::Motion, ChannelKind::Color],
            chain_steps: 5,
            standardize: true,
            bias: false,
        }
    }
}

/// Builds `F` for a video from the configured channels. `probabilities` is
/// required when the probability channel is selected (and added automatically when given).
pub fn build_features<T: Scalar>(
    video: &VideoTensor<T>,
    flows: &FlowSet,
    chains: &ChainTable,
    probabilities: Option<&[Vec<T>]>,
    config: &FeatureConfig,
) -> Result<FeatureMatrix<T>> {
    let mut kinds = config.channels.clone();
    if probabilities.is_some() && !kinds.contains(&ChannelKind::Probability) {
        kinds.push(ChannelKind::Probability);
    }
    let mut channels = Vec::with_capacity(kinds.len() + 1);
    for kind in kinds {
        channels.push(match kind {
            ChannelKind::Motion => motion_chain_features(chains, flows, config.chain_steps)?,
            ChannelKind::Color => color_features(video, chains, 0, ColorMode::NodeOnly)?,
            ChannelKind::ColorChain => {
                color_features(video, chains, config.chain_steps, ColorMode::AlongChain)?
            }
            ChannelKind::Probability => {
                let maps = probabilities.ok_or_else(|| {
                    Error::InvalidConfig("probability channel selected without maps".into())
                })?;
                probability_chain_features(maps, chains, config.chain_steps)?
            }
        });
    }
    if config.bias {
        channels.push(bias_channel(chains.node_count()));
    }
    assemble(channels, config.standardize)
}
