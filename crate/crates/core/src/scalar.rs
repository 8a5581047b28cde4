//! Scalar abstraction shared by the numeric modules.
//!
//! Everything numeric (cosine similarity, OLS, the fit network, the forest and
//! the statistics helpers) is written against [`Real`], so the same code runs on
//! `f32` and `f64`. The crate root re-exports `f64` aliases for everyday use.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the numeric code in this crate.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + 'static
{
}

/// Dot product of two equal-length slices.
#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Euclidean norm.
#[inline]
pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn mean<T: Real>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::nan();
    }
    xs.iter().fold(T::zero(), |acc, &x| acc + x) / T::from_usize_lossy(xs.len())
}

/// Unbiased sample variance (denominator `n - 1`).
pub fn sample_variance<T: Real>(xs: &[T]) -> T {
    if xs.len() < 2 {
        return T::nan();
    }
    let m = mean(xs);
    let ss = xs.iter().fold(T::zero(), |acc, &x| acc + (x - m) * (x - m));
    ss / T::from_usize_lossy(xs.len() - 1)
}
