use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector};
use ndarray::{Array1, Array2, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssign};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the whole pipeline is generic over.
///
/// Implemented for `f32` and `f64`. Random draws are always taken in `f64`
/// and converted, so both widths consume the same random stream for a given
/// seed.
pub trait Scalar:
    'static
    + Float
    + FromPrimitive
    + NumAssign
    + LinalgScalar
    + ScalarOperand
    + Sum
    + Default
    + Send
    + Sync
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Serialize
    + DeserializeOwned
{
    /// Converts an `f64` literal. Panics only if the value is unrepresentable,
    /// which cannot happen for finite literals in `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count fits in float")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Solves `a x = b` for symmetric positive definite `a`. On failure
    /// returns the pivot condition estimate (infinite if the factorisation
    /// broke down).
    fn solve_spd(a: &Array2<Self>, b: &Array1<Self>) -> std::result::Result<Array1<Self>, f64>;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn solve_spd(a: &Array2<Self>, b: &Array1<Self>) -> std::result::Result<Array1<Self>, f64> {
                let p = a.nrows();
                let m = DMatrix::from_fn(p, p, |i, j| a[[i, j]]);
                let chol = Cholesky::new(m).ok_or(f64::INFINITY)?;
                let pivots: Vec<f64> = chol
                    .l_dirty()
                    .diagonal()
                    .iter()
                    .map(|&d| (d as f64) * (d as f64))
                    .collect();
                let (lo, hi) = pivots
                    .iter()
                    .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                // pivots this small relative to the largest carry no information
                if !(lo > hi * <$t>::EPSILON as f64 * p as f64) {
                    return Err(hi / lo);
                }
                let x = chol.solve(&DVector::from_iterator(p, b.iter().copied()));
                Ok(Array1::from_iter(x.iter().copied()))
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);
