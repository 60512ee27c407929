//! Floating-point abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, NumCast};

/// Real scalar the solver, graph operator and oracle are generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumCast + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("f64 literal representable")
    }

    #[inline]
    fn of_usize(v: usize) -> Self {
        <Self as NumCast>::from(v).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dot product.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Euclidean norm.
pub fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Cosine of the angle between two vectors; zero when either is the zero vector.
pub fn cosine<T: Scalar>(a: &[T], b: &[T]) -> T {
    let na = norm2(a);
    let nb = norm2(b);
    if na == T::zero() || nb == T::zero() {
        return T::zero();
    }
    dot(a, b) / (na * nb)
}

/// Scale `a` to unit Euclidean norm. Returns `false` (leaving `a` untouched) for the zero vector.
pub fn normalize<T: Scalar>(a: &mut [T]) -> bool {
    let n = norm2(a);
    if n == T::zero() || !n.is_finite() {
        return false;
    }
    for v in a.iter_mut() {
        *v /= n;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_of_parallel_and_orthogonal() {
        assert!((cosine(&[1.0, 2.0], &[2.0, 4.0]) - 1.0f64).abs() < 1e-15);
        assert_eq!(cosine(&[1.0f32, 0.0], &[0.0, 3.0]), 0.0);
        assert_eq!(cosine(&[0.0f64, 0.0], &[1.0, 1.0]), 0.0);
    }

    #[test]
    fn normalize_rejects_zero() {
        let mut z = [0.0f64; 3];
        assert!(!normalize(&mut z));
        let mut v = [3.0f64, 4.0];
        assert!(normalize(&mut v));
        assert!((v[0] - 0.6).abs() < 1e-15);
    }
}
