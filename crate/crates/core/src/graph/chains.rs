use rayon::prelude::*;

use super::NodeId;
use crate::media::{Dims, FlowField, FlowSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// One successor per node and direction, obtained by following the flow
/// vector stored at the node and rounding the target to the nearest pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainTable {
    dims: Dims,
    fwd_next: Vec<NodeId>,
    bwd_next: Vec<NodeId>,
}

impl ChainTable {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn node_count(&self) -> usize {
        self.fwd_next.len()
    }

    #[inline]
    pub fn next(&self, i: usize, dir: Direction) -> Option<usize> {
        match dir {
            Direction::Forward => self.fwd_next[i].get(),
            Direction::Backward => self.bwd_next[i].get(),
        }
    }

    pub fn fwd_next(&self) -> &[NodeId] {
        &self.fwd_next
    }

    pub fn bwd_next(&self) -> &[NodeId] {
        &self.bwd_next
    }
}

/// Successors of every pixel of one frame under one field; `NONE` when the
/// rounded target leaves the frame.
fn frame_successors(field: &FlowField, dims: Dims, target_frame: usize) -> Vec<NodeId> {
    let (h, w) = (dims.height, dims.width);
    (0..h * w)
        .map(|k| {
            let (y, x) = (k / w, k % w);
            let (dx, dy) = field.get(y, x);
            // f64::round rounds half away from zero
            let ty = (y as f64 + dy as f64).round();
            let tx = (x as f64 + dx as f64).round();
            if ty < 0.0 || tx < 0.0 || ty >= h as f64 || tx >= w as f64 {
                NodeId::NONE
            } else {
                NodeId::from(dims.node(target_frame, ty as usize, tx as usize))
            }
        })
        .collect()
}

pub fn build_chains(flows: &FlowSet) -> ChainTable {
    let dims = flows.dims();
    let hw = dims.frame_len();
    let none_frame = || vec![NodeId::NONE; hw];

    let fwd: Vec<Vec<NodeId>> = (0..dims.frames)
        .into_par_iter()
        .map(|t| match flows.forward().get(t) {
            Some(f) => frame_successors(f, dims, t + 1),
            None => none_frame(),
        })
        .collect();
    let bwd: Vec<Vec<NodeId>> = (0..dims.frames)
        .into_par_iter()
        .map(|t| {
            if t == 0 {
                none_frame()
            } else {
                frame_successors(&flows.backward()[t - 1], dims, t - 1)
            }
        })
        .collect();

    ChainTable {
        dims,
        fwd_next: fwd.concat(),
        bwd_next: bwd.concat(),
    }
}

/// Nodes visited from `start` (exclusive) following `dir` for at most `steps` links.
pub fn chain_walk(chains: &ChainTable, start: usize, dir: Direction, steps: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(steps);
    let mut cur = start;
    for _ in 0..steps {
        match chains.next(cur, dir) {
            Some(n) => {
                out.push(n);
                cur = n;
            }
            None => break,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_flows(m: usize, h: usize, w: usize, dx: f32, dy: f32) -> FlowSet {
        FlowSet::new(
            vec![FlowField::constant(h, w, dx, dy); m - 1],
            vec![FlowField::constant(h, w, -dx, -dy); m - 1],
        )
        .unwrap()
    }

    #[test]
    fn integer_translation() {
        let c = build_chains(&constant_flows(2, 3, 3, 1.0, 0.0));
        let d = c.dims();
        assert_eq!(c.next(d.node(0, 0, 0), Direction::Forward), Some(d.node(1, 0, 1)));
        assert_eq!(c.next(d.node(1, 0, 1), Direction::Backward), Some(d.node(0, 0, 0)));
    }

    #[test]
    fn subpixel_rounding() {
        let c = build_chains(&constant_flows(2, 2, 2, 0.4, 0.0));
        assert_eq!(c.next(0, Direction::Forward), Some(4));
        // targets at .5 round away from zero
        let c = build_chains(&constant_flows(2, 2, 3, 0.5, 0.0));
        let d = c.dims();
        assert_eq!(c.next(d.node(0, 0, 0), Direction::Forward), Some(d.node(1, 0, 1)));
        assert_eq!(c.next(d.node(1, 0, 2), Direction::Backward), Some(d.node(0, 0, 2)));
        assert_eq!(c.next(d.node(1, 0, 1), Direction::Backward), Some(d.node(0, 0, 1)));
    }

    #[test]
    fn boundary_exit_and_end_frames() {
        let c = build_chains(&constant_flows(3, 2, 3, 1.0, 0.0));
        let d = c.dims();
        assert_eq!(c.next(d.node(0, 1, 2), Direction::Forward), None);
        for y in 0..2 {
            for x in 0..3 {
                assert_eq!(c.next(d.node(2, y, x), Direction::Forward), None);
                assert_eq!(c.next(d.node(0, y, x), Direction::Backward), None);
            }
        }
    }

    #[test]
    fn successors_stay_in_adjacent_frames() {
        let c = build_chains(&constant_flows(4, 3, 3, 1.0, -1.0));
        let d = c.dims();
        for i in 0..d.node_count() {
            if let Some(n) = c.next(i, Direction::Forward) {
                assert_eq!(d.frame_of(n), d.frame_of(i) + 1);
            }
            if let Some(n) = c.next(i, Direction::Backward) {
                assert_eq!(d.frame_of(n) + 1, d.frame_of(i));
            }
        }
    }

    #[test]
    fn walks() {
        let c = build_chains(&constant_flows(5, 1, 8, 1.0, 0.0));
        let d = c.dims();
        let walk = chain_walk(&c, d.node(0, 0, 0), Direction::Forward, 3);
        assert_eq!(walk, vec![d.node(1, 0, 1), d.node(2, 0, 2), d.node(3, 0, 3)]);
        assert!(chain_walk(&c, d.node(4, 0, 0), Direction::Forward, 7).is_empty());
        assert!(chain_walk(&c, d.node(0, 0, 0), Direction::Forward, 0).is_empty());
        // stops early at the right border
        assert_eq!(chain_walk(&c, d.node(0, 0, 6), Direction::Forward, 4).len(), 1);
    }
}
