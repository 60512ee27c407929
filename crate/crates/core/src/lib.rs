//! Primary-object segmentation in video.
//!
//! Every pixel of every frame is a node; optical-flow chains link nodes across
//! time. A soft foreground mask is refined by repeatedly propagating it over
//! that graph and projecting it onto what per-pixel features can explain. The
//! fixed point is the dominant eigenvector of the product of the graph
//! adjacency and the ridge hat matrix of the features, computed without ever
//! building either matrix.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, with `*32` variants for `f32`.

pub mod error;
pub mod eval;
pub mod features;
pub mod graph;
pub mod linalg;
pub mod media;
pub mod oracle;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Video = media::VideoTensor<f64>;
pub type Video32 = media::VideoTensor<f32>;
pub type Edges = graph::EdgeList<f64>;
pub type Edges32 = graph::EdgeList<f32>;
pub type Features = features::FeatureMatrix<f64>;
pub type Features32 = features::FeatureMatrix<f32>;
pub type Mask = solver::SoftMask<f64>;
pub type Mask32 = solver::SoftMask<f32>;
pub type Matrix = linalg::DenseMatrix<f64>;
