use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{chain_walk, kernel, ChainTable, Direction, NodeId};
use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge<T> {
    pub i: NodeId,
    pub j: NodeId,
    pub weight: T,
}

/// How [`propagate`] accumulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropagationMode {
    /// Row-wise gather over a symmetric adjacency index; every row is summed in
    /// ascending neighbor order, so results are bit-reproducible for any thread count.
    #[default]
    Deterministic,
    /// Edge-parallel scatter with per-worker accumulators; summation order depends on scheduling.
    Fast,
}

/// Deduplicated weighted edge set, `i < j`, sorted by `(i, j)`, plus a
/// symmetric row index over the same edges.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList<T> {
    n: usize,
    radius: usize,
    sigma_k: T,
    edges: Vec<Edge<T>>,
    row_start: Vec<usize>,
    neighbor: Vec<u32>,
    neighbor_weight: RowWeights<T>,
}

/// Weights aligned with `neighbor`. Graph weights take only a few distinct
/// values, so they are usually stored as one-byte codes into a table.
#[derive(Debug, Clone, PartialEq)]
enum RowWeights<T> {
    Coded { code: Vec<u8>, table: Vec<T> },
    Plain(Vec<T>),
}

impl<T: Scalar> RowWeights<T> {
    fn build(edges: &[Edge<T>]) -> (Self, Vec<u8>) {
        let mut table: Vec<T> = Vec::new();
        let mut codes = Vec::with_capacity(edges.len());
        for e in edges {
            let k = match table.iter().position(|&w| w == e.weight) {
                Some(k) => k,
                None if table.len() < 256 => {
                    table.push(e.weight);
                    table.len() - 1
                }
                None => return (RowWeights::Plain(vec![T::zero(); 2 * edges.len()]), Vec::new()),
            };
            codes.push(k as u8);
        }
        let code = vec![0u8; 2 * edges.len()];
        (RowWeights::Coded { code, table }, codes)
    }

    fn set(&mut self, slot: usize, edge: usize, weight: T, edge_codes: &[u8]) {
        match self {
            RowWeights::Coded { code, .. } => code[slot] = edge_codes[edge],
            RowWeights::Plain(w) => w[slot] = weight,
        }
    }

    fn get(&self, slot: usize) -> T {
        match self {
            RowWeights::Coded { code, table } => table[code[slot] as usize],
            RowWeights::Plain(w) => w[slot],
        }
    }
}

impl<T: Scalar> EdgeList<T> {
    /// Builds an edge list from explicit `(i, j, weight)` triples (any orientation);
    /// duplicate pairs keep the first weight seen.
    pub fn from_triples(n: usize, triples: &[(usize, usize, T)]) -> Result<Self> {
        let mut edges = Vec::with_capacity(triples.len());
        for &(a, b, w) in triples {
            if a == b || a >= n || b >= n {
                return Err(Error::InvalidConfig(format!(
                    "edge ({a}, {b}) invalid for {n} nodes"
                )));
            }
            if !w.is_finite() {
                return Err(Error::NonFinite(format!("edge ({a}, {b}) weight")));
            }
            edges.push(Edge {
                i: NodeId::from(a.min(b)),
                j: NodeId::from(a.max(b)),
                weight: w,
            });
        }
        edges.sort_by_key(|e| (e.i, e.j));
        edges.dedup_by_key(|e| (e.i, e.j));
        Ok(Self::index(n, 0, T::zero(), edges))
    }

    fn index(n: usize, radius: usize, sigma_k: T, edges: Vec<Edge<T>>) -> Self {
        let mut degree = vec![0usize; n + 1];
        for e in &edges {
            degree[e.i.index() + 1] += 1;
            degree[e.j.index() + 1] += 1;
        }
        for k in 0..n {
            degree[k + 1] += degree[k];
        }
        let row_start = degree;
        let mut fill = row_start.clone();
        let mut neighbor = vec![0u32; 2 * edges.len()];
        let (mut neighbor_weight, codes) = RowWeights::build(&edges);
        // edges are sorted by (i, j): scanning them in order fills every row in
        // ascending neighbor order
        for (k, e) in edges.iter().enumerate() {
            let j = e.j.index();
            neighbor[fill[j]] = e.i.0;
            neighbor_weight.set(fill[j], k, e.weight, &codes);
            fill[j] += 1;
        }
        for (k, e) in edges.iter().enumerate() {
            let i = e.i.index();
            neighbor[fill[i]] = e.j.0;
            neighbor_weight.set(fill[i], k, e.weight, &codes);
            fill[i] += 1;
        }
        Self {
            n,
            radius,
            sigma_k,
            edges,
            row_start,
            neighbor,
            neighbor_weight,
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn sigma_k(&self) -> T {
        self.sigma_k
    }

    /// Neighbors of node `i` with weights, ascending.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.row_start[i]..self.row_start[i + 1])
            .map(move |k| (self.neighbor[k] as usize, self.neighbor_weight.get(k)))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row_start[i + 1] - self.row_start[i]
    }
}

/// Connects every node to the nodes within `radius` links along its forward and
/// backward chains; each unordered pair appears once with weight `k(Δt)`.
pub fn build_edges<T: Scalar>(chains: &ChainTable, radius: usize, sigma_k: T) -> Result<EdgeList<T>> {
    if radius == 0 {
        return Err(Error::InvalidConfig("radius must be >= 1".into()));
    }
    if !(sigma_k > T::zero()) || !sigma_k.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "kernel bandwidth must be positive, got {sigma_k}"
        )));
    }
    let dims = chains.dims();
    let n = chains.node_count();
    let hw = dims.frame_len();

    // pack canonical (min, max) pairs into u64 keys; sorting orders them by (i, j)
    let mut keys: Vec<u64> = (0..dims.frames)
        .into_par_iter()
        .flat_map_iter(|t| {
            let mut local = Vec::with_capacity(hw * 2 * radius);
            for i in t * hw..(t + 1) * hw {
                for dir in [Direction::Forward, Direction::Backward] {
                    for j in chain_walk(chains, i, dir, radius) {
                        let (a, b) = (i.min(j) as u64, i.max(j) as u64);
                        local.push((a << 32) | b);
                    }
                }
            }
            local
        })
        .collect();
    keys.par_sort_unstable();
    keys.dedup();

    let weights: Vec<T> = (0..=radius)
        .map(|dt| kernel(T::of_usize(dt), sigma_k))
        .collect();
    let edges = keys
        .into_iter()
        .map(|k| {
            let (i, j) = ((k >> 32) as usize, (k & 0xffff_ffff) as usize);
            let dt = dims.frame_of(j) - dims.frame_of(i);
            Edge {
                i: NodeId::from(i),
                j: NodeId::from(j),
                weight: weights[dt],
            }
        })
        .collect();
    Ok(EdgeList::index(n, radius, sigma_k, edges))
}

const FAST_CHUNK: usize = 1 << 14;

/// Writes `M·x` into `out`.
pub fn propagate_into<T: Scalar>(edges: &EdgeList<T>, x: &[T], out: &mut [T], mode: PropagationMode) {
    assert_eq!(x.len(), edges.n, "vector length must equal node count");
    assert_eq!(out.len(), edges.n, "output length must equal node count");
    match mode {
        PropagationMode::Deterministic => match &edges.neighbor_weight {
            RowWeights::Coded { code, table } => gather(edges, out, |r| {
                let mut acc = T::zero();
                for (&j, &c) in edges.neighbor[r.clone()].iter().zip(&code[r]) {
                    acc += table[c as usize] * x[j as usize];
                }
                acc
            }),
            RowWeights::Plain(weight) => gather(edges, out, |r| {
                let mut acc = T::zero();
                for (&j, &w) in edges.neighbor[r.clone()].iter().zip(&weight[r]) {
                    acc += w * x[j as usize];
                }
                acc
            }),
        },
        PropagationMode::Fast => {
            let n = edges.n;
            let acc = edges
                .edges
                .par_chunks(FAST_CHUNK)
                .fold(
                    || vec![T::zero(); n],
                    |mut acc, chunk| {
                        for e in chunk {
                            let (i, j) = (e.i.index(), e.j.index());
                            acc[i] += e.weight * x[j];
                            acc[j] += e.weight * x[i];
                        }
                        acc
                    },
                )
                .reduce(
                    || vec![T::zero(); n],
                    |mut a, b| {
                        for (p, q) in a.iter_mut().zip(b) {
                            *p += q;
                        }
                        a
                    },
                );
            out.copy_from_slice(&acc);
        }
    }
}

/// Fills `out[i]` with `row(start_i..end_i)` for every node, in parallel.
fn gather<T: Scalar, F>(edges: &EdgeList<T>, out: &mut [T], row: F)
where
    F: Fn(std::ops::Range<usize>) -> T + Sync,
{
    out.par_iter_mut()
        .with_min_len(1024)
        .enumerate()
        .for_each(|(i, o)| *o = row(edges.row_start[i]..edges.row_start[i + 1]));
}

/// Matrix-free `M·x`.
pub fn propagate<T: Scalar>(edges: &EdgeList<T>, x: &[T], mode: PropagationMode) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    propagate_into(edges, x, &mut out, mode);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_chains;
    use crate::media::{FlowField, FlowSet};
    use proptest::prelude::*;

    fn identity_chains(m: usize, h: usize, w: usize) -> ChainTable {
        build_chains(
            &FlowSet::new(
                vec![FlowField::zeros(h, w); m - 1],
                vec![FlowField::zeros(h, w); m - 1],
            )
            .unwrap(),
        )
    }

    fn pairs<T: Scalar>(e: &EdgeList<T>) -> Vec<(usize, usize)> {
        e.edges().iter().map(|e| (e.i.index(), e.j.index())).collect()
    }

    #[test]
    fn two_frames_single_edge() {
        let e = build_edges(&identity_chains(2, 1, 1), 5, 2.0f64).unwrap();
        assert_eq!(pairs(&e), vec![(0, 1)]);
        assert_eq!(e.edges()[0].weight, (-1.0f64 / 8.0).exp());
    }

    #[test]
    fn dedup_and_radius() {
        let e = build_edges(&identity_chains(3, 1, 1), 2, 1.0f64).unwrap();
        assert_eq!(pairs(&e), vec![(0, 1), (0, 2), (1, 2)]);
        let e = build_edges(&identity_chains(3, 1, 1), 1, 1.0f64).unwrap();
        assert_eq!(pairs(&e), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn invalid_parameters() {
        let c = identity_chains(2, 1, 1);
        assert!(build_edges(&c, 0, 1.0f64).is_err());
        assert!(build_edges(&c, 1, 0.0f64).is_err());
    }

    #[test]
    fn propagate_examples() {
        let e = EdgeList::from_triples(2, &[(0, 1, 0.5f64)]).unwrap();
        assert_eq!(propagate(&e, &[1.0, 0.0], PropagationMode::Deterministic), vec![0.0, 0.5]);
        let e = EdgeList::from_triples(3, &[(0, 1, 1.0f64), (1, 2, 1.0)]).unwrap();
        for mode in [PropagationMode::Deterministic, PropagationMode::Fast] {
            assert_eq!(propagate(&e, &[1.0, 1.0, 1.0], mode), vec![1.0, 2.0, 1.0]);
            assert_eq!(propagate(&e, &[0.0; 3], mode), vec![0.0; 3]);
        }
        let isolated = EdgeList::from_triples(3, &[(0, 1, 1.0f64)]).unwrap();
        assert_eq!(propagate(&isolated, &[1.0, 1.0, 5.0], PropagationMode::Fast)[2], 0.0);
    }

    #[test]
    fn many_distinct_weights_propagate_exactly() {
        let n = 400;
        let triples: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0 + i as f64 / 7.0)).collect();
        let e = EdgeList::from_triples(n, &triples).unwrap();
        assert!(matches!(e.neighbor_weight, RowWeights::Plain(_)));
        let x: Vec<f64> = (0..n).map(|i| (i % 5) as f64).collect();
        let mut expect = vec![0.0; n];
        for &(i, j, w) in &triples {
            expect[i] += w * x[j];
            expect[j] += w * x[i];
        }
        assert_eq!(propagate(&e, &x, PropagationMode::Deterministic), expect);
        assert_eq!(e.neighbors(1).collect::<Vec<_>>(), vec![(0, 1.0), (2, 1.0 + 1.0 / 7.0)]);
    }

    #[test]
    fn graph_weights_are_coded() {
        let e = build_edges(&identity_chains(8, 2, 2), 5, 2.0f64).unwrap();
        match &e.neighbor_weight {
            RowWeights::Coded { table, .. } => assert_eq!(table.len(), 5),
            RowWeights::Plain(_) => panic!("expected coded weights"),
        }
    }

    #[test]
    fn neighbor_rows_are_sorted() {
        let e = EdgeList::from_triples(4, &[(3, 0, 1.0f64), (2, 0, 2.0), (1, 0, 3.0), (2, 1, 4.0)]).unwrap();
        let row0: Vec<_> = e.neighbors(0).collect();
        assert_eq!(row0, vec![(1, 3.0), (2, 2.0), (3, 1.0)]);
        let row2: Vec<_> = e.neighbors(2).collect();
        assert_eq!(row2, vec![(0, 2.0), (1, 4.0)]);
    }

    fn flow_strategy() -> impl Strategy<Value = (usize, usize, usize, Vec<f32>)> {
        (2usize..5, 1usize..5, 1usize..5).prop_flat_map(|(m, h, w)| {
            let len = (m - 1) * h * w * 4;
            (
                Just(m),
                Just(h),
                Just(w),
                proptest::collection::vec(-2.5f32..2.5, len),
            )
        })
    }

    fn random_edges((m, h, w, vals): (usize, usize, usize, Vec<f32>), r: usize) -> EdgeList<f64> {
        let per = h * w * 2;
        let field = |k: usize| FlowField::new(h, w, vals[k * per..(k + 1) * per].to_vec()).unwrap();
        let fwd = (0..m - 1).map(field).collect();
        let bwd = (m - 1..2 * (m - 1)).map(field).collect();
        build_edges(&build_chains(&FlowSet::new(fwd, bwd).unwrap()), r, 1.5).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn edge_invariants(flows in flow_strategy(), r in 1usize..4) {
            let (m, h, w) = (flows.0, flows.1, flows.2);
            let e = random_edges(flows, r);
            let hw = h * w;
            prop_assert!(e.len() <= 2 * m * hw * r);
            for win in e.edges().windows(2) {
                prop_assert!((win[0].i, win[0].j) < (win[1].i, win[1].j));
            }
            for ed in e.edges() {
                prop_assert!(ed.i < ed.j);
                let dt = ed.j.index() / hw - ed.i.index() / hw;
                prop_assert!(dt >= 1 && dt <= r);
                prop_assert!(ed.weight > 0.0 && ed.weight <= 1.0);
            }
        }

        #[test]
        fn propagate_is_symmetric_linear_and_positive(
            flows in flow_strategy(),
            seed in proptest::collection::vec(-1.0f64..1.0, 200),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let e = random_edges(flows, 2);
            let n = e.node_count();
            let x: Vec<f64> = seed.iter().cycle().take(n).copied().collect();
            let y: Vec<f64> = seed.iter().rev().cycle().take(n).copied().collect();
            let mode = PropagationMode::Deterministic;
            let mx = propagate(&e, &x, mode);
            let my = propagate(&e, &y, mode);
            let lhs: f64 = mx.iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(&my).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));

            let combo: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
            let mc = propagate(&e, &combo, mode);
            for k in 0..n {
                let expect = alpha * mx[k] + beta * my[k];
                prop_assert!((mc[k] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
            }

            let pos: Vec<f64> = x.iter().map(|v| v.abs()).collect();
            prop_assert!(propagate(&e, &pos, mode).iter().all(|&v| v >= 0.0));

            let fast = propagate(&e, &x, PropagationMode::Fast);
            for k in 0..n {
                prop_assert!((fast[k] - mx[k]).abs() <= 1e-12 * (1.0 + mx[k].abs()));
            }
        }
    }
}
