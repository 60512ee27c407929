//! Spacetime graph: one node per pixel, edges between pixels linked by an
//! optical-flow chain within a temporal radius, weighted by a Gaussian kernel
//! of the frame distance. The adjacency matrix is never materialized; it is
//! applied through [`propagate`].

mod chains;
mod edges;

pub use chains::{build_chains, chain_walk, ChainTable, Direction};
pub use edges::{build_edges, propagate, propagate_into, Edge, EdgeList, PropagationMode};

use crate::Scalar;

/// Linear node index `t·h·w + y·w + x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const NONE: NodeId = NodeId(u32::MAX);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn is_none(self) -> bool {
        self == Self::NONE
    }

    #[inline]
    pub fn get(self) -> Option<usize> {
        (!self.is_none()).then_some(self.0 as usize)
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        debug_assert!(i < u32::MAX as usize);
        NodeId(i as u32)
    }
}

/// Temporal Gaussian kernel `exp(-Δt² / (2σ²))`.
pub fn kernel<T: Scalar>(dt: T, sigma: T) -> T {
    (-(dt * dt) / (T::lit(2.0) * sigma * sigma)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        assert_eq!(kernel(0.0f64, 2.0), 1.0);
        assert!((kernel(2.0f64, 2.0) - 0.60653).abs() < 1e-5);
        assert!((kernel(5.0f64, 2.0) - 0.04394).abs() < 1e-5);
        assert!((kernel(5.0f64, 2.0) - (-25.0f64 / 8.0).exp()).abs() < 1e-16);
    }
}
