use serde::{Deserialize, Serialize};

use super::SoftMask;
use crate::error::{Error, Result};
use crate::Scalar;

/// Range used for the min-max rescaling in [`finalize`](super::finalize_mask).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// One min/max over the whole video.
    PerVideo,
    /// Min/max of every frame separately.
    #[default]
    PerFrame,
}

fn sign_fixed<T: Scalar>(x: &[T]) -> Result<Vec<T>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("soft mask".into()));
    }
    let sum: T = x.iter().copied().sum();
    Ok(if sum < T::zero() {
        x.iter().map(|&v| -v).collect()
    } else {
        x.to_vec()
    })
}

fn min_max<T: Scalar>(x: &[T]) -> (T, T) {
    x.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    })
}

/// Sign-fixes `x` (so that `Σx ≥ 0`) and rescales it to `[0,1]` over the whole video.
pub fn finalize_mask<T: Scalar>(mask: &SoftMask<T>) -> Result<SoftMask<T>> {
    let x = sign_fixed(&mask.x)?;
    let (lo, hi) = min_max(&x);
    if !(hi > lo) {
        return Err(Error::ZeroRange);
    }
    let span = hi - lo;
    Ok(SoftMask {
        dims: mask.dims,
        x: x.into_iter().map(|v| ((v - lo) / span).min(T::one()).max(T::zero())).collect(),
        iteration: mask.iteration,
    })
}

/// Sign-fixes over the whole video, then rescales every frame to `[0,1]`
/// separately. A constant frame maps to zeros; a constant video is an error.
pub fn finalize_mask_per_frame<T: Scalar>(mask: &SoftMask<T>) -> Result<SoftMask<T>> {
    let mut x = sign_fixed(&mask.x)?;
    let (lo, hi) = min_max(&x);
    if !(hi > lo) {
        return Err(Error::ZeroRange);
    }
    let hw = mask.dims.frame_len();
    for frame in x.chunks_exact_mut(hw) {
        let (lo, hi) = min_max(frame);
        let span = hi - lo;
        for v in frame.iter_mut() {
            *v = if span > T::zero() {
                ((*v - lo) / span).min(T::one()).max(T::zero())
            } else {
                T::zero()
            };
        }
    }
    Ok(SoftMask {
        dims: mask.dims,
        x,
        iteration: mask.iteration,
    })
}

impl Normalization {
    pub fn apply<T: Scalar>(self, mask: &SoftMask<T>) -> Result<SoftMask<T>> {
        match self {
            Normalization::PerVideo => finalize_mask(mask),
            Normalization::PerFrame => finalize_mask_per_frame(mask),
        }
    }
}

/// `value ≥ τ`.
pub fn binarize<T: Scalar>(values: &[T], threshold: T) -> Result<Vec<bool>> {
    if !(threshold > T::zero() && threshold < T::one()) {
        return Err(Error::InvalidConfig(format!(
            "threshold must lie in (0,1), got {threshold}"
        )));
    }
    Ok(values.iter().map(|&v| v >= threshold).collect())
}
