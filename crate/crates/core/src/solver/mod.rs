//! The segmentation iteration: propagate the soft mask over the spacetime
//! graph, rescale by its maximum, ridge-regress it on the node features and
//! replace it with the regression's prediction. Each step is one power
//! iteration of the Feature-Motion matrix `M·F(FᵀF + βI)⁻¹Fᵀ`.

mod finalize;
mod init;
mod iterate;
mod ridge;

pub use finalize::{binarize, finalize_mask, finalize_mask_per_frame, Normalization};
pub use init::{init_mask, InitScheme};
pub use iterate::{power_step, iterate, prepare, run, Diagnostics, Prepared, Step};
pub use ridge::{ridge_solve, RegressionMode, RegressionModel, Regressor};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::graph::PropagationMode;
use crate::media::Dims;
use crate::Scalar;

/// Real-valued label per spacetime node.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMask<T> {
    pub dims: Dims,
    pub x: Vec<T>,
    /// Iteration that produced this mask (0 for an initialization).
    pub iteration: usize,
}

impl<T: Scalar> SoftMask<T> {
    pub fn new(dims: Dims, x: Vec<T>, iteration: usize) -> Result<Self> {
        if x.len() != dims.node_count() {
            return Err(Error::DimensionMismatch(format!(
                "mask has {} values, video has {} nodes",
                x.len(),
                dims.node_count()
            )));
        }
        Ok(Self { dims, x, iteration })
    }

    pub fn frame(&self, t: usize) -> &[T] {
        let hw = self.dims.frame_len();
        &self.x[t * hw..(t + 1) * hw]
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Temporal radius of chain edges, in frames.
    pub radius: usize,
    /// Temporal kernel bandwidth, in frames.
    pub sigma_k: f64,
    /// Ridge strength.
    pub beta: f64,
    pub iterations: usize,
    /// Early stop when `1 - |cos(x_next, x)|` drops below this.
    pub tol: f64,
    pub init: InitScheme,
    pub regression: RegressionMode,
    pub features: FeatureConfig,
    /// Binarization level.
    pub threshold: f64,
    pub normalization: Normalization,
    pub propagation: PropagationMode,
    /// Record the Rayleigh quotient `xᵀ(M P x) / xᵀx` each iteration.
    pub rayleigh: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            radius: 5,
            sigma_k: 2.0,
            beta: 1.0,
            iterations: 7,
            tol: 1e-6,
            init: InitScheme::Gaussian { sigma: None },
            regression: RegressionMode::PerFrame,
            features: FeatureConfig::default(),
            threshold: 0.8,
            normalization: Normalization::PerFrame,
            propagation: PropagationMode::Deterministic,
            rayleigh: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.radius < 1 {
            return bad("radius must be >= 1".into());
        }
        if !(self.sigma_k > 0.0 && self.sigma_k.is_finite()) {
            return bad(format!("sigma_k must be positive, got {}", self.sigma_k));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if self.iterations < 1 {
            return bad("iterations must be >= 1".into());
        }
        if !(self.tol >= 0.0) {
            return bad(format!("tol must be non-negative, got {}", self.tol));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold must lie in (0,1), got {}", self.threshold));
        }
        if self.features.chain_steps < 1 {
            return bad("chain_steps must be >= 1".into());
        }
        if self.features.channels.is_empty() && !self.features.bias {
            return bad("at least one feature channel is required".into());
        }
        if let InitScheme::Gaussian { sigma: Some(s) } = self.init {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("init sigma must be positive, got {s}"));
            }
        }
        Ok(())
    }
}
