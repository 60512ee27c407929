//! The executable property suite: the matrix-free solver against the dense
//! reference on one small instance.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{
    dense_adjacency, dense_block_features, dense_feature_motion, dense_joint_operator, dense_projection,
    dominant_eig, joint_iteration, DEFAULT_SIZE_CAP,
};
use crate::error::{Error, Result};
use crate::features::frame_blocks;
use crate::linalg::DenseMatrix;
use crate::media::{FlowSet, VideoTensor};
use crate::scalar::{cosine, dot, norm2, normalize};
use crate::solver::{
    power_step, init_mask, iterate, prepare, InitScheme, Prepared, RegressionMode, Regressor, SolverConfig,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOptions {
    /// Seeds the random probes and the random initializations.
    pub seed: u64,
    pub probes: usize,
    /// Steps compared one by one against the dense product.
    pub power_steps: usize,
    pub converge_iterations: usize,
    pub dense_iterations: usize,
    /// Iterations per start in the initialization-invariance check.
    pub invariance_iterations: usize,
    /// Upper bound on joint-iteration steps when looking for its fixed point.
    pub joint_max_iterations: usize,
    pub size_cap: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            probes: 1000,
            power_steps: 7,
            converge_iterations: 50,
            dense_iterations: 500,
            invariance_iterations: 300,
            joint_max_iterations: 50_000,
            size_cap: DEFAULT_SIZE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

/// Graph, features and their dense counterparts for one instance. The
/// regression matrix is `F` in global mode and its block-diagonal expansion in
/// per-frame mode.
pub struct OracleContext {
    pub config: SolverConfig,
    pub prepared: Prepared<f64>,
    pub adjacency: DenseMatrix<f64>,
    pub regression_features: DenseMatrix<f64>,
    pub projection: DenseMatrix<f64>,
    pub feature_motion: DenseMatrix<f64>,
}

impl OracleContext {
    pub fn new(
        video: &VideoTensor<f64>,
        flows: &FlowSet,
        config: &SolverConfig,
        probabilities: Option<&[Vec<f64>]>,
        size_cap: usize,
    ) -> Result<Self> {
        let n = video.node_count();
        if n > size_cap {
            return Err(Error::SizeCap { n, cap: size_cap });
        }
        let prepared = prepare(video, flows, probabilities, config)?;
        let adjacency = dense_adjacency(&prepared.edges, size_cap)?;
        let dims = prepared.dims;
        let regression_features = match config.regression {
            RegressionMode::Global => prepared.features.view().to_dense(),
            RegressionMode::PerFrame => {
                let view = frame_blocks(&prepared.features, dims.height, dims.width, dims.frames)?;
                dense_block_features(view.blocks())?
            }
        };
        let projection = dense_projection(regression_features.view(), config.beta, size_cap)?;
        let feature_motion = dense_feature_motion(&adjacency, &projection)?;
        Ok(Self {
            config: config.clone(),
            prepared,
            adjacency,
            regression_features,
            projection,
            feature_motion,
        })
    }

    pub fn regressor(&self) -> Result<Regressor<'_, f64>> {
        self.prepared.regressor(&self.config)
    }

    fn start(&self) -> Result<Vec<f64>> {
        let init = match self.config.init {
            InitScheme::External => InitScheme::Uniform,
            ref s => s.clone(),
        };
        Ok(init_mask::<f64>(&init, self.prepared.dims, None)?.x)
    }
}

fn cos_gap(a: &[f64], b: &[f64]) -> f64 {
    1.0 - cosine(a, b).abs()
}

/// Every propagated vector follows `A p` with `A = M P`, and every projected
/// mask follows `Aᵀ x = P M x`.
pub fn check_power_iteration(ctx: &OracleContext, steps: usize) -> Result<CheckOutcome> {
    let reg = ctx.regressor()?;
    let a = &ctx.feature_motion;
    let at = a.transpose();
    let mut x = ctx.start()?;
    let mut prev_p: Option<Vec<f64>> = None;
    let (mut worst_p, mut worst_x) = (0.0f64, 0.0f64);
    for _ in 0..steps {
        let step = power_step(&ctx.prepared.edges, &reg, &x, ctx.config.propagation)?;
        worst_x = worst_x.max(cos_gap(&step.x_next, &at.mul_vec(&x)));
        if let Some(p) = &prev_p {
            worst_p = worst_p.max(cos_gap(&step.propagated, &a.mul_vec(p)));
        }
        prev_p = Some(step.propagated);
        x = step.x_next;
    }
    let worst = worst_p.max(worst_x);
    Ok(outcome(
        "power_iteration",
        worst <= 1e-8,
        format!("{steps} steps, max 1-|cos| propagated {worst_p:.2e}, projected {worst_x:.2e} (limit 1e-8)"),
    ))
}

/// A fixed number of matrix-free iterations lands on the dense dominant eigenvectors.
pub fn check_convergence(ctx: &OracleContext, iterations: usize, dense_iterations: usize) -> Result<CheckOutcome> {
    let reg = ctx.regressor()?;
    let x0 = init_mask::<f64>(&InitScheme::Uniform, ctx.prepared.dims, None)?;
    let (mask, diag) = iterate(
        &ctx.prepared.edges,
        &reg,
        x0,
        iterations,
        0.0,
        ctx.config.propagation,
        false,
    )?;
    let right = dominant_eig(&ctx.feature_motion, dense_iterations, 0.0)?;
    let left = dominant_eig(&ctx.feature_motion.transpose(), dense_iterations, 0.0)?;
    let gp = cos_gap(&diag.propagated, &right.vector);
    let gx = cos_gap(&mask.x, &left.vector);
    let passed = gp <= 1e-6 && gx <= 1e-6 && right.value >= 0.0;
    Ok(outcome(
        "convergence",
        passed,
        format!(
            "{iterations} iterations, 1-|cos| propagated {gp:.2e}, projected {gx:.2e} (limit 1e-6), dominant eigenvalue {:.6}",
            right.value
        ),
    ))
}

/// The dominant eigenvector beats random unit probes on `xᵀAx`, and its value
/// equals the eigenvalue.
pub fn check_sampled_dominance(ctx: &OracleContext, probes: usize, seed: u64, dense_iterations: usize) -> Result<CheckOutcome> {
    let a = &ctx.feature_motion;
    let eig = dominant_eig(a, dense_iterations, 0.0)?;
    let v = &eig.vector;
    let value = dot(v, &a.mul_vec(v)) / dot(v, v);
    let identity_err = (value - eig.value).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = v.len();
    let mut best_probe = f64::NEG_INFINITY;
    for _ in 0..probes {
        let mut x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        normalize(&mut x);
        best_probe = best_probe.max(dot(&x, &a.mul_vec(&x)));
    }
    let margin = value - best_probe;
    let passed = margin >= -1e-9 && identity_err <= 1e-10 * eig.value.abs().max(1.0);
    Ok(outcome(
        "sampled_dominance",
        passed,
        format!("value {value:.6}, best of {probes} probes {best_probe:.6}, margin {margin:.3e}, rayleigh identity error {identity_err:.1e}"),
    ))
}

fn relative_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&u, &v)| {
            let d = (u - v).abs();
            if d == 0.0 {
                0.0
            } else {
                d / u.abs().max(v.abs())
            }
        })
        .fold(0.0, f64::max)
}

/// Per-frame regression against global regression on the block-diagonal
/// features, iterate by iterate.
pub fn check_block_equivalence(ctx: &OracleContext, steps: usize) -> Result<CheckOutcome> {
    let dims = ctx.prepared.dims;
    let beta = ctx.config.beta;
    let per_frame = Regressor::new(&ctx.prepared.features, dims, beta, RegressionMode::PerFrame)?;
    let wide = ctx.prepared.features.block_diagonal(dims)?;
    let global = Regressor::new(&wide, dims, beta, RegressionMode::Global)?;
    let mode = ctx.config.propagation;
    let mut a = ctx.start()?;
    let mut b = a.clone();
    let mut worst = 0.0f64;
    for _ in 0..steps {
        a = power_step(&ctx.prepared.edges, &per_frame, &a, mode)?.x_next;
        b = power_step(&ctx.prepared.edges, &global, &b, mode)?.x_next;
        worst = worst.max(relative_diff(&a, &b));
    }
    Ok(outcome(
        "block_equivalence",
        worst <= 1e-8,
        format!("{steps} steps, max elementwise relative difference {worst:.2e} (limit 1e-8)"),
    ))
}

/// Runs the joint label/weight iteration until its fixed point is an
/// eigenvector of the joint operator; returns the residual and step count.
pub fn joint_fixed_point_residual(
    m: &DenseMatrix<f64>,
    f: &DenseMatrix<f64>,
    alpha: f64,
    beta: f64,
    max_iterations: usize,
) -> Result<(f64, usize)> {
    let a = dense_joint_operator(m, f.view(), alpha, beta)?;
    let mut x = vec![1.0; m.rows()];
    normalize(&mut x);
    let chunk = 50;
    let mut done = 0;
    let mut residual = f64::INFINITY;
    while done < max_iterations {
        x = joint_iteration(m, f.view(), alpha, beta, &x, chunk)?;
        done += chunk;
        let ax = a.mul_vec(&x);
        let lambda = dot(&x, &ax);
        let r: Vec<f64> = ax.iter().zip(&x).map(|(&u, &v)| u - lambda * v).collect();
        residual = norm2(&r) / norm2(&x);
        if residual <= 1e-9 {
            break;
        }
    }
    Ok((residual, done))
}

pub const JOINT_GRID: [f64; 3] = [0.5, 1.0, 2.0];

/// The joint iteration's fixed point is an eigenvector of the joint operator
/// for every (alpha, beta) on the grid.
pub fn check_joint_path(m: &DenseMatrix<f64>, f: &DenseMatrix<f64>, max_iterations: usize) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    let mut most_steps = 0;
    for &alpha in &JOINT_GRID {
        for &beta in &JOINT_GRID {
            let (r, steps) = joint_fixed_point_residual(m, f, alpha, beta, max_iterations)?;
            worst = worst.max(r);
            most_steps = most_steps.max(steps);
        }
    }
    Ok(outcome(
        "joint_fixed_point",
        worst <= 1e-8,
        format!("9 (alpha, beta) pairs, max residual {worst:.2e} (limit 1e-8), up to {most_steps} steps"),
    ))
}

/// Converged directions from different starts agree.
pub fn check_init_invariance(ctx: &OracleContext, iterations: usize, seed: u64) -> Result<CheckOutcome> {
    let dims = ctx.prepared.dims;
    let reg = ctx.regressor()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let external: Vec<Vec<f64>> = (0..dims.frames)
        .map(|_| (0..dims.frame_len()).map(|_| rng.random::<f64>().powi(3)).collect())
        .collect();
    let schemes = [
        ("gaussian", InitScheme::Gaussian { sigma: None }),
        ("uniform", InitScheme::Uniform),
        ("random", InitScheme::Random { seed }),
        ("external", InitScheme::External),
    ];
    let mut finals = Vec::new();
    for (name, scheme) in &schemes {
        let x0 = init_mask(scheme, dims, Some(&external))?;
        let (mask, _) = iterate(&ctx.prepared.edges, &reg, x0, iterations, 0.0, ctx.config.propagation, false)?;
        finals.push((*name, mask.x));
    }
    let mut worst = 0.0f64;
    for i in 0..finals.len() {
        for j in i + 1..finals.len() {
            worst = worst.max(cos_gap(&finals[i].1, &finals[j].1));
        }
    }
    Ok(outcome(
        "init_invariance",
        worst <= 1e-4,
        format!("4 starts after {iterations} iterations, max pairwise 1-|cos| {worst:.2e} (limit 1e-4)"),
    ))
}

/// Runs every check on one instance.
pub fn run_checks(ctx: &OracleContext, options: &CheckOptions) -> Result<Vec<CheckOutcome>> {
    let features = ctx.prepared.features.view().to_dense();
    Ok(vec![
        check_power_iteration(ctx, options.power_steps)?,
        check_convergence(ctx, options.converge_iterations, options.dense_iterations)?,
        check_sampled_dominance(ctx, options.probes, options.seed, options.dense_iterations)?,
        check_block_equivalence(ctx, options.power_steps)?,
        check_joint_path(&ctx.adjacency, &features, options.joint_max_iterations)?,
        check_init_invariance(ctx, options.invariance_iterations, options.seed)?,
    ])
}
