use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{frame_blocks, FeatureMatrix};
use crate::linalg::{Cholesky, DenseMatrix, MatRef};
use crate::media::Dims;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionMode {
    /// One `w_t` per frame, fitted on that frame's rows only.
    #[default]
    PerFrame,
    /// A single `w` for the whole video.
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegressionModel<T> {
    Global { w: Vec<T>, beta: T },
    PerFrame { w: Vec<Vec<T>>, beta: T },
}

impl<T: Scalar> RegressionModel<T> {
    pub fn is_finite(&self) -> bool {
        match self {
            RegressionModel::Global { w, .. } => w.iter().all(|v| v.is_finite()),
            RegressionModel::PerFrame { w, .. } => w.iter().flatten().all(|v| v.is_finite()),
        }
    }
}

fn regularized_gram<T: Scalar>(f: MatRef<'_, T>, beta: T) -> DenseMatrix<T> {
    let mut g = f.gram();
    for k in 0..f.cols() {
        g.add_at(k, k, beta);
    }
    g
}

/// Solves `(FᵀF + βI) w = Fᵀx` by Cholesky.
pub fn ridge_solve<T: Scalar>(f: MatRef<'_, T>, x: &[T], beta: T) -> Result<Vec<T>> {
    if !(beta > T::zero()) {
        return Err(Error::InvalidConfig(format!("beta must be positive, got {beta}")));
    }
    if x.len() != f.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} targets for {} feature rows",
            x.len(),
            f.rows()
        )));
    }
    if x.iter().chain(f.data()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ridge regression input".into()));
    }
    let chol = Cholesky::factor(&regularized_gram(f, beta))?;
    Ok(chol.solve(&f.t_mul_vec(x)))
}

/// Ridge regression with the normal-equation factorization computed once and
/// reused every iteration.
#[derive(Debug, Clone)]
pub struct Regressor<'a, T> {
    mode: RegressionMode,
    beta: T,
    blocks: Vec<(MatRef<'a, T>, Cholesky<T>)>,
}

impl<'a, T: Scalar> Regressor<'a, T> {
    pub fn new(features: &'a FeatureMatrix<T>, dims: Dims, beta: T, mode: RegressionMode) -> Result<Self> {
        if !(beta > T::zero()) || !beta.is_finite() {
            return Err(Error::InvalidConfig(format!("beta must be positive, got {beta}")));
        }
        if features.rows() != dims.node_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows for {} nodes",
                features.rows(),
                dims.node_count()
            )));
        }
        let views: Vec<MatRef<'a, T>> = match mode {
            RegressionMode::Global => vec![features.view()],
            RegressionMode::PerFrame => {
                frame_blocks(features, dims.height, dims.width, dims.frames)?
                    .blocks()
                    .to_vec()
            }
        };
        let blocks = views
            .into_par_iter()
            .map(|f| Ok((f, Cholesky::factor(&regularized_gram(f, beta))?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { mode, beta, blocks })
    }

    pub fn mode(&self) -> RegressionMode {
        self.mode
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    /// Fits `w` (or every `w_t`) to `target` and returns the prediction `F w`.
    pub fn fit_predict(&self, target: &[T]) -> (Vec<T>, RegressionModel<T>) {
        let total: usize = self.blocks.iter().map(|(f, _)| f.rows()).sum();
        assert_eq!(target.len(), total, "target length must equal node count");
        let mut out = vec![T::zero(); total];
        let mut chunks = Vec::with_capacity(self.blocks.len());
        let mut rest = out.as_mut_slice();
        let mut offset = 0;
        for (f, _) in &self.blocks {
            let (head, tail) = rest.split_at_mut(f.rows());
            chunks.push((offset, head));
            offset += f.rows();
            rest = tail;
        }
        let ws: Vec<Vec<T>> = chunks
            .into_par_iter()
            .zip(self.blocks.par_iter())
            .map(|((start, out), (f, chol))| {
                let w = chol.solve(&f.t_mul_vec(&target[start..start + f.rows()]));
                f.mul_vec_into(&w, out);
                w
            })
            .collect();
        let model = match self.mode {
            RegressionMode::Global => RegressionModel::Global {
                w: ws.into_iter().next().unwrap_or_default(),
                beta: self.beta,
            },
            RegressionMode::PerFrame => RegressionModel::PerFrame { w: ws, beta: self.beta },
        };
        (out, model)
    }
}
