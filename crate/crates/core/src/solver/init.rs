use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SoftMask;
use crate::error::{Error, Result};
use crate::media::Dims;
use crate::Scalar;

/// Starting labels. The converged direction does not depend on this choice
/// (as long as the start is not orthogonal to the dominant eigenvector).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Isotropic Gaussian centred in every frame; `sigma` defaults to `0.25·min(h, w)`.
    Gaussian { sigma: Option<f64> },
    Uniform,
    /// I.i.d. uniform `[0,1)` values from ChaCha8 seeded with `seed`.
    Random { seed: u64 },
    /// Per-frame maps supplied by the caller.
    External,
}

/// Builds `x⁽⁰⁾`. `external` must hold one `h·w` map per frame for [`InitScheme::External`].
pub fn init_mask<T: Scalar>(
    scheme: &InitScheme,
    dims: Dims,
    external: Option<&[Vec<T>]>,
) -> Result<SoftMask<T>> {
    let (m, h, w) = (dims.frames, dims.height, dims.width);
    let x = match *scheme {
        InitScheme::Uniform => vec![T::one(); dims.node_count()],
        InitScheme::Gaussian { sigma } => {
            let s = sigma.unwrap_or(0.25 * h.min(w) as f64);
            if !(s > 0.0) {
                return Err(Error::InvalidConfig(format!("gaussian sigma {s} must be positive")));
            }
            let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
            let frame: Vec<T> = (0..h * w)
                .map(|k| {
                    let (y, x) = ((k / w) as f64, (k % w) as f64);
                    T::lit((-((y - cy).powi(2) + (x - cx).powi(2)) / (2.0 * s * s)).exp())
                })
                .collect();
            frame.iter().copied().cycle().take(m * h * w).collect()
        }
        InitScheme::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..dims.node_count())
                .map(|_| T::lit(rng.random::<f64>()))
                .collect()
        }
        InitScheme::External => {
            let maps = external.ok_or_else(|| {
                Error::InvalidConfig("external initialization requires mask maps".into())
            })?;
            if maps.len() != m {
                return Err(Error::FrameCountMismatch {
                    expected: m,
                    found: maps.len(),
                });
            }
            if let Some(bad) = maps.iter().find(|f| f.len() != h * w) {
                return Err(Error::DimensionMismatch(format!(
                    "external init map has {} pixels, frames have {}",
                    bad.len(),
                    h * w
                )));
            }
            maps.concat()
        }
    };
    SoftMask::new(dims, x, 0)
}
