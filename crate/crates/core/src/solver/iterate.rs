use log::debug;

use super::{init_mask, RegressionModel, Regressor, SoftMask, SolverConfig};
use crate::error::{Error, Result};
use crate::features::{build_features, FeatureMatrix};
use crate::graph::{build_chains, build_edges, propagate, ChainTable, EdgeList, PropagationMode};
use crate::media::{Dims, FlowSet, VideoTensor};
use crate::scalar::{cosine, dot};
use crate::Scalar;

/// Output of one propagation / regression / projection cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct Step<T> {
    /// `M x` rescaled by its maximum.
    pub propagated: Vec<T>,
    /// `F w`, the next soft mask.
    pub x_next: Vec<T>,
    pub model: RegressionModel<T>,
}

/// One iteration: `p = M x / max(M x)`, `w = (FᵀF + βI)⁻¹Fᵀp`, `x' = F w`.
///
/// When every propagated value is non-positive but some are negative, the
/// rescaling uses `max |p|` so the direction is preserved.
pub fn power_step<T: Scalar>(
    edges: &EdgeList<T>,
    regressor: &Regressor<'_, T>,
    x: &[T],
    mode: PropagationMode,
) -> Result<Step<T>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("soft mask".into()));
    }
    let mut p = propagate(edges, x, mode);
    let max = p.iter().copied().fold(T::neg_infinity(), T::max);
    let scale = if max > T::zero() {
        max
    } else {
        p.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    };
    if !(scale > T::zero()) {
        return Err(Error::DegeneratePropagation);
    }
    for v in p.iter_mut() {
        *v /= scale;
    }
    let (x_next, model) = regressor.fit_predict(&p);
    Ok(Step {
        propagated: p,
        x_next,
        model,
    })
}

/// Per-run record of the iteration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics<T> {
    pub iterations: usize,
    pub converged: bool,
    /// `1 - |cos(x_next, x)|` per iteration.
    pub direction_change: Vec<f64>,
    /// `min(x) / max|x|` of every produced mask; negative values show how far
    /// the projection leaves the non-negative orthant.
    pub negativity: Vec<f64>,
    /// `xᵀ(M P x) / xᵀx` per iteration when requested.
    pub rayleigh: Vec<f64>,
    /// Last max-normalized propagation `M x`.
    pub propagated: Vec<T>,
    pub model: Option<RegressionModel<T>>,
}

/// Runs up to `iterations` steps from `x0`, stopping early once the direction
/// change falls below `tol`.
pub fn iterate<T: Scalar>(
    edges: &EdgeList<T>,
    regressor: &Regressor<'_, T>,
    x0: SoftMask<T>,
    iterations: usize,
    tol: f64,
    mode: PropagationMode,
    rayleigh: bool,
) -> Result<(SoftMask<T>, Diagnostics<T>)> {
    if iterations == 0 {
        return Err(Error::InvalidConfig("iterations must be >= 1".into()));
    }
    let dims = x0.dims;
    let mut x = x0.x;
    let mut diag = Diagnostics::default();
    for it in 1..=iterations {
        let step = power_step(edges, regressor, &x, mode)?;
        let change = (T::one() - cosine(&step.x_next, &x).abs()).to_f64_lossy();
        let peak = step.x_next.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let low = step.x_next.iter().copied().fold(T::infinity(), T::min);
        diag.negativity.push(if peak > T::zero() { (low / peak).to_f64_lossy() } else { 0.0 });
        if rayleigh {
            let (px, _) = regressor.fit_predict(&step.x_next);
            let mpx = propagate(edges, &px, mode);
            let denom = dot(&step.x_next, &step.x_next);
            diag.rayleigh.push(if denom > T::zero() {
                (dot(&step.x_next, &mpx) / denom).to_f64_lossy()
            } else {
                0.0
            });
        }
        diag.direction_change.push(change);
        debug!("iteration {it}: direction change {change:.3e}");
        x = step.x_next;
        diag.propagated = step.propagated;
        diag.model = Some(step.model);
        diag.iterations = it;
        if change < tol {
            diag.converged = true;
            break;
        }
    }
    let mask = SoftMask::new(dims, x, diag.iterations)?;
    Ok((mask, diag))
}

/// Graph and features for one video, built once and reused across runs.
#[derive(Debug, Clone)]
pub struct Prepared<T> {
    pub dims: Dims,
    pub chains: ChainTable,
    pub edges: EdgeList<T>,
    pub features: FeatureMatrix<T>,
}

pub fn prepare<T: Scalar>(
    video: &VideoTensor<T>,
    flows: &FlowSet,
    probabilities: Option<&[Vec<T>]>,
    config: &SolverConfig,
) -> Result<Prepared<T>> {
    config.validate()?;
    let dims = video.dims();
    flows.check_against(dims)?;
    let chains = build_chains(flows);
    let edges = build_edges(&chains, config.radius, T::lit(config.sigma_k))?;
    let features = build_features(video, flows, &chains, probabilities, &config.features)?;
    debug!(
        "prepared {} nodes, {} edges, {} feature columns",
        dims.node_count(),
        edges.len(),
        features.cols()
    );
    Ok(Prepared {
        dims,
        chains,
        edges,
        features,
    })
}

impl<T: Scalar> Prepared<T> {
    pub fn regressor(&self, config: &SolverConfig) -> Result<Regressor<'_, T>> {
        Regressor::new(&self.features, self.dims, T::lit(config.beta), config.regression)
    }

    /// Initializes and iterates with `config`. The returned mask is the raw
    /// projection, not yet rescaled to `[0,1]`.
    pub fn solve(
        &self,
        config: &SolverConfig,
        external_init: Option<&[Vec<T>]>,
    ) -> Result<(SoftMask<T>, Diagnostics<T>)> {
        config.validate()?;
        let regressor = self.regressor(config)?;
        let x0 = init_mask(&config.init, self.dims, external_init)?;
        iterate(
            &self.edges,
            &regressor,
            x0,
            config.iterations,
            config.tol,
            config.propagation,
            config.rayleigh,
        )
    }
}

/// Builds the graph and features, then iterates from the configured initialization.
pub fn run<T: Scalar>(
    video: &VideoTensor<T>,
    flows: &FlowSet,
    config: &SolverConfig,
    probabilities: Option<&[Vec<T>]>,
    external_init: Option<&[Vec<T>]>,
) -> Result<(SoftMask<T>, Diagnostics<T>)> {
    prepare(video, flows, probabilities, config)?.solve(config, external_init)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::RegressionMode;

    fn identity_features(n: usize) -> FeatureMatrix<f64> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        FeatureMatrix::from_raw(n, n, data).unwrap()
    }

    #[test]
    fn identity_features_reproduce_propagation() {
        let edges = EdgeList::from_triples(3, &[(0, 1, 1.0f64), (1, 2, 0.5)]).unwrap();
        let f = identity_features(3);
        let dims = Dims::new(3, 1, 1);
        let beta = 1e-9;
        let r = Regressor::new(&f, dims, beta, RegressionMode::Global).unwrap();
        let step = power_step(&edges, &r, &[1.0, 0.0, 1.0], PropagationMode::Deterministic).unwrap();
        // M x = (0, 1.5, 0)
        let p = [0.0, 1.0, 0.0];
        for k in 0..3 {
            assert!((step.propagated[k] - p[k]).abs() < 1e-15);
            assert!((step.x_next[k] - p[k] / (1.0 + beta)).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_graph_is_degenerate() {
        let edges = EdgeList::<f64>::from_triples(2, &[]).unwrap();
        let f = identity_features(2);
        let r = Regressor::new(&f, Dims::new(2, 1, 1), 1.0, RegressionMode::Global).unwrap();
        let err = power_step(&edges, &r, &[1.0, 1.0], PropagationMode::Deterministic).unwrap_err();
        assert!(matches!(err, Error::DegeneratePropagation));
    }

    #[test]
    fn iterations_zero_rejected_and_one_step_matches() {
        let edges = EdgeList::from_triples(3, &[(0, 1, 1.0f64), (1, 2, 0.5), (0, 2, 0.2)]).unwrap();
        let f = FeatureMatrix::from_raw(3, 2, vec![1.0, 0.0, 0.5, 1.0, 0.0, 2.0]).unwrap();
        let dims = Dims::new(3, 1, 1);
        let r = Regressor::new(&f, dims, 1.0, RegressionMode::Global).unwrap();
        let x0 = SoftMask::new(dims, vec![1.0, 1.0, 1.0], 0).unwrap();
        let mode = PropagationMode::Deterministic;
        assert!(iterate(&edges, &r, x0.clone(), 0, 0.0, mode, false).is_err());
        let (m, d) = iterate(&edges, &r, x0.clone(), 1, 0.0, mode, true).unwrap();
        let step = power_step(&edges, &r, &x0.x, mode).unwrap();
        assert_eq!(m.x, step.x_next);
        assert_eq!(m.iteration, 1);
        assert_eq!(d.iterations, 1);
        assert_eq!(d.rayleigh.len(), 1);
    }

    #[test]
    fn negative_only_propagation_keeps_direction() {
        let edges = EdgeList::from_triples(2, &[(0, 1, 1.0f64)]).unwrap();
        let f = identity_features(2);
        let r = Regressor::new(&f, Dims::new(2, 1, 1), 1.0, RegressionMode::Global).unwrap();
        let step = power_step(&edges, &r, &[-2.0, -1.0], PropagationMode::Deterministic).unwrap();
        assert_eq!(step.propagated, vec![-0.5, -1.0]);
    }
}
