//! Dense reference implementation for small instances: the adjacency, the
//! ridge hat matrix, their product, and the joint operator of the coupled
//! label/weight problem, all materialized explicitly.

pub mod checks;

pub use checks::{run_checks, CheckOptions, CheckOutcome, OracleContext};

use crate::error::{Error, Result};
use crate::graph::EdgeList;
use crate::linalg::{lu_solve, DenseMatrix, MatRef};
use crate::scalar::{cosine, dot, norm2};
use crate::Scalar;

/// Largest `n` the dense routines accept by default.
pub const DEFAULT_SIZE_CAP: usize = 20_000;

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::SizeCap { n, cap });
    }
    Ok(())
}

/// `n × n` adjacency with the edge weights placed symmetrically.
pub fn dense_adjacency<T: Scalar>(edges: &EdgeList<T>, cap: usize) -> Result<DenseMatrix<T>> {
    let n = edges.node_count();
    check_cap(n, cap)?;
    let mut m = DenseMatrix::zeros(n, n);
    for e in edges.edges() {
        m.set(e.i.index(), e.j.index(), e.weight);
        m.set(e.j.index(), e.i.index(), e.weight);
    }
    Ok(m)
}

/// `(FᵀF + βI)⁻¹ Fᵀ` scaled by `scale`, solved by LU: `d × n`.
fn ridge_operator<T: Scalar>(f: MatRef<'_, T>, gram_scale: T, beta: T) -> Result<DenseMatrix<T>> {
    let mut g = f.gram().scale(gram_scale);
    for k in 0..f.cols() {
        g.add_at(k, k, beta);
    }
    lu_solve(&g, &f.to_dense().transpose())
}

/// The hat matrix `F (FᵀF + βI)⁻¹ Fᵀ`.
pub fn dense_projection<T: Scalar>(f: MatRef<'_, T>, beta: T, cap: usize) -> Result<DenseMatrix<T>> {
    check_cap(f.rows(), cap)?;
    if !(beta > T::zero()) {
        return Err(Error::InvalidConfig(format!("beta must be positive, got {beta}")));
    }
    let solved = ridge_operator(f, T::one(), beta)?;
    f.to_dense().matmul(&solved)
}

/// Adjacency times projection.
pub fn dense_feature_motion<T: Scalar>(m: &DenseMatrix<T>, p: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    m.matmul(p)
}

/// `M + 4α² F (αFᵀF + βI)⁻¹ Fᵀ`, the operator whose power iteration solves the
/// coupled label/weight stationarity system.
pub fn dense_joint_operator<T: Scalar>(
    m: &DenseMatrix<T>,
    f: MatRef<'_, T>,
    alpha: T,
    beta: T,
) -> Result<DenseMatrix<T>> {
    if !(alpha > T::zero() && beta > T::zero()) {
        return Err(Error::InvalidConfig("alpha and beta must be positive".into()));
    }
    if m.rows() != f.rows() {
        return Err(Error::DimensionMismatch(format!("{} adjacency rows vs {} feature rows", m.rows(), f.rows())));
    }
    let solved = ridge_operator(f, alpha, beta)?;
    let four_a2 = T::lit(4.0) * alpha * alpha;
    m.add(&f.to_dense().matmul(&solved)?.scale(four_a2))
}

/// Weights `2α (αFᵀF + βI)⁻¹ Fᵀ x` that pair with a label vector in the joint iteration.
pub fn joint_weights<T: Scalar>(f: MatRef<'_, T>, x: &[T], alpha: T, beta: T) -> Result<Vec<T>> {
    let mut g = f.gram().scale(alpha);
    for k in 0..f.cols() {
        g.add_at(k, k, beta);
    }
    let rhs = DenseMatrix::from_rows(f.cols(), 1, f.t_mul_vec(x))?;
    let w = lu_solve(&g, &rhs)?;
    let two_a = T::lit(2.0) * alpha;
    Ok(w.data().iter().map(|&v| two_a * v).collect())
}

/// Iterates `x ← (Mx + 2αFw) / ‖Mx + 2αFw‖` with `w` from [`joint_weights`].
pub fn joint_iteration<T: Scalar>(
    m: &DenseMatrix<T>,
    f: MatRef<'_, T>,
    alpha: T,
    beta: T,
    x0: &[T],
    iters: usize,
) -> Result<Vec<T>> {
    if x0.len() != m.rows() || f.rows() != m.rows() {
        return Err(Error::DimensionMismatch("joint iteration sizes".into()));
    }
    let mut x = x0.to_vec();
    let two_a = T::lit(2.0) * alpha;
    for _ in 0..iters {
        let w = joint_weights(f, &x, alpha, beta)?;
        let fw = f.mul_vec(&w);
        let mut next = m.mul_vec(&x);
        for (a, b) in next.iter_mut().zip(&fw) {
            *a += two_a * *b;
        }
        let norm = norm2(&next);
        if !(norm > T::zero()) {
            return Err(Error::ZeroUpdate);
        }
        for v in next.iter_mut() {
            *v /= norm;
        }
        x = next;
    }
    Ok(x)
}

/// A dominant eigenpair found by power iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair<T> {
    pub value: T,
    pub vector: Vec<T>,
    pub iterations: usize,
    pub last_change: f64,
}

/// Iterations without a new smallest direction change before giving up.
const STALL_WINDOW: usize = 50;
/// Direction changes below this count as converged even if `tol` is tighter.
const CHANGE_FLOOR: f64 = 1e-13;

/// L2-normalized power iteration from the all-ones vector.
pub fn dominant_eig<T: Scalar>(a: &DenseMatrix<T>, iters: usize, tol: f64) -> Result<Eigenpair<T>> {
    dominant_eig_from(a, &vec![T::one(); a.rows()], iters, tol)
}

/// Power iteration from `x0`. The eigenvalue is the Rayleigh quotient of the
/// final vector; the sign is chosen so the entries sum to a non-negative value.
/// A run whose direction change stops improving for 50 iterations while still
/// large is reported as [`Error::NoConvergence`].
pub fn dominant_eig_from<T: Scalar>(a: &DenseMatrix<T>, x0: &[T], iters: usize, tol: f64) -> Result<Eigenpair<T>> {
    if a.rows() != a.cols() || x0.len() != a.rows() {
        return Err(Error::DimensionMismatch("power iteration needs a square matrix and matching start".into()));
    }
    let mut x = x0.to_vec();
    let n0 = norm2(&x);
    if !(n0 > T::zero()) {
        return Err(Error::ZeroUpdate);
    }
    x.iter_mut().for_each(|v| *v /= n0);
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let mut change = f64::INFINITY;
    let mut done = 0;
    for it in 1..=iters {
        let mut y = a.mul_vec(&x);
        let norm = norm2(&y);
        if !(norm > T::zero()) {
            return Err(Error::ZeroUpdate);
        }
        y.iter_mut().for_each(|v| *v /= norm);
        change = (T::one() - cosine(&y, &x).abs()).to_f64_lossy().max(0.0);
        x = y;
        done = it;
        if change < tol {
            break;
        }
        if change < best {
            best = change;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= STALL_WINDOW {
                if best < CHANGE_FLOOR {
                    break;
                }
                return Err(Error::NoConvergence {
                    iterations: it,
                    last_change: change,
                });
            }
        }
    }
    if x.iter().copied().sum::<T>() < T::zero() {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    let ax = a.mul_vec(&x);
    let value = dot(&x, &ax) / dot(&x, &x);
    Ok(Eigenpair {
        value,
        vector: x,
        iterations: done,
        last_change: change,
    })
}

/// Block-diagonal matrix with the given blocks on the diagonal.
pub fn dense_block_features<T: Scalar>(blocks: &[MatRef<'_, T>]) -> Result<DenseMatrix<T>> {
    let Some(first) = blocks.first() else {
        return Err(Error::Empty("no feature blocks".into()));
    };
    let d = first.cols();
    if let Some(b) = blocks.iter().find(|b| b.cols() != d) {
        return Err(Error::DimensionMismatch(format!("block width {} differs from {d}", b.cols())));
    }
    let rows: usize = blocks.iter().map(|b| b.rows()).sum();
    let mut out = DenseMatrix::zeros(rows, d * blocks.len());
    let mut r0 = 0;
    for (t, b) in blocks.iter().enumerate() {
        for i in 0..b.rows() {
            for k in 0..d {
                out.set(r0 + i, t * d + k, b.get(i, k));
            }
        }
        r0 += b.rows();
    }
    Ok(out)
}

/// `xᵀMx − α‖Fw − x‖² − β‖w‖²`.
pub fn segmentation_objective<T: Scalar>(
    m: &DenseMatrix<T>,
    f: MatRef<'_, T>,
    x: &[T],
    w: &[T],
    alpha: T,
    beta: T,
) -> Result<T> {
    if x.len() != m.rows() || f.rows() != x.len() || w.len() != f.cols() {
        return Err(Error::DimensionMismatch("objective sizes".into()));
    }
    let fw = f.mul_vec(w);
    let resid: T = fw.iter().zip(x).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok(dot(x, &m.mul_vec(x)) - alpha * resid - beta * dot(w, w))
}
