//! Black-box attribution of scalar targets: Kernel SHAP, a brute-force
//! Shapley oracle and a LIME baseline, sharing one weighted least squares
//! solver.
//!
//! Absent features take their values from background rows, and the value
//! of a coalition is the target averaged over every background row.

mod exact;
mod kernel_shap;
mod lime;
mod wls;

use std::fmt;

use ndarray::{Array1, Array2, ArrayView2};
use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

pub use exact::{exact_shapley, EXACT_MAX_ARITY};
pub use kernel_shap::{kernel_shap, shapley_kernel_weight, Coalitions, ShapConfig, EXHAUSTIVE_MAX_ARITY};
pub use lime::{lime_explain, lime_fit, LimeConfig, LimeFit};
pub use wls::weighted_least_squares;

use crate::autoencoder::{squared_error, Autoencoder};
use crate::dataset::BackgroundSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A deterministic map from a full feature vector to one real value.
pub trait ScalarTarget<T: Scalar>: Sync {
    fn arity(&self) -> usize;

    /// Evaluates every row of `rows`.
    fn eval_batch(&self, rows: ArrayView2<'_, T>) -> Result<Array1<T>>;

    fn eval(&self, x: &[T]) -> Result<T> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("contiguous row");
        Ok(self.eval_batch(view)?[0])
    }

    fn id(&self) -> TargetId {
        TargetId::Total
    }
}

/// Wraps a plain row function.
pub struct FnTarget<F> {
    arity: usize,
    f: F,
}

impl<F> FnTarget<F> {
    pub fn new(arity: usize, f: F) -> Self {
        Self { arity, f }
    }
}

impl<T: Scalar, F: Fn(&[T]) -> T + Sync> ScalarTarget<T> for FnTarget<F> {
    fn arity(&self) -> usize {
        self.arity
    }

    fn eval_batch(&self, rows: ArrayView2<'_, T>) -> Result<Array1<T>> {
        check_width(self.arity, rows.ncols())?;
        Ok(rows
            .rows()
            .into_iter()
            .map(|r| match r.as_slice() {
                Some(s) => (self.f)(s),
                None => (self.f)(&r.to_vec()),
            })
            .collect())
    }
}

/// One reconstructed output of an autoencoder.
pub struct FeatureTarget<'a, T> {
    pub model: &'a Autoencoder<T>,
    pub feature: usize,
}

impl<'a, T: Scalar> FeatureTarget<'a, T> {
    pub fn new(model: &'a Autoencoder<T>, feature: usize) -> Result<Self> {
        if feature >= model.n_features() {
            return Err(Error::InvalidIndex {
                index: feature,
                len: model.n_features(),
            });
        }
        Ok(Self { model, feature })
    }
}

impl<T: Scalar> ScalarTarget<T> for FeatureTarget<'_, T> {
    fn arity(&self) -> usize {
        self.model.n_features()
    }

    fn eval_batch(&self, rows: ArrayView2<'_, T>) -> Result<Array1<T>> {
        Ok(self.model.forward_batch(rows)?.column(self.feature).to_owned())
    }

    fn id(&self) -> TargetId {
        TargetId::Feature(self.feature)
    }
}

/// Total reconstruction error `x -> L(x, f(x))`: the autoencoder with an
/// extra layer summing squared per-feature errors.
pub struct TotalErrorTarget<'a, T> {
    pub model: &'a Autoencoder<T>,
}

impl<T: Scalar> ScalarTarget<T> for TotalErrorTarget<'_, T> {
    fn arity(&self) -> usize {
        self.model.n_features()
    }

    fn eval_batch(&self, rows: ArrayView2<'_, T>) -> Result<Array1<T>> {
        let out = self.model.forward_batch(rows)?;
        Ok(rows
            .rows()
            .into_iter()
            .zip(out.rows())
            .map(|(x, y)| squared_error(&x.to_vec(), &y.to_vec()))
            .collect())
    }

    fn id(&self) -> TargetId {
        TargetId::Total
    }
}

/// What an attribution explains: one reconstructed feature or the total
/// reconstruction error. Serialises as the feature index or `"total"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetId {
    Feature(usize),
    Total,
}

impl Serialize for TargetId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TargetId::Feature(i) => s.serialize_u64(*i as u64),
            TargetId::Total => s.serialize_str("total"),
        }
    }
}

impl<'de> Deserialize<'de> for TargetId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = TargetId;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a feature index or \"total\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<TargetId, E> {
                Ok(TargetId::Feature(v as usize))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<TargetId, E> {
                if v == "total" {
                    Ok(TargetId::Total)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Per-feature importances `phi` and base value for one scalar target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Attribution<T> {
    pub target: TargetId,
    pub base: T,
    pub phi: Vec<T>,
    #[serde(rename = "n_samples")]
    pub n_samples_used: usize,
}

impl<T: Scalar> Attribution<T> {
    /// `base + sum(phi)`, the explanation model at the instance.
    pub fn reconstructed_value(&self) -> T {
        self.base + self.phi.iter().copied().sum::<T>()
    }
}

/// Feature `j` from `x` when `coalition[j]`, else from `background`.
pub fn mask_instance<T: Scalar>(x: &[T], coalition: &[bool], background: &[T]) -> Result<Vec<T>> {
    check_width(x.len(), coalition.len())?;
    check_width(x.len(), background.len())?;
    Ok(x.iter()
        .zip(background)
        .zip(coalition)
        .map(|((&xi, &bi), &present)| if present { xi } else { bi })
        .collect())
}

pub(crate) fn check_width(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::WidthMismatch { expected, actual });
    }
    Ok(())
}

pub(crate) fn check_inputs<T: Scalar>(t: &dyn ScalarTarget<T>, x: &[T], bg: &BackgroundSet<T>) -> Result<()> {
    check_width(t.arity(), x.len())?;
    check_width(x.len(), bg.n_features())?;
    if bg.is_empty() {
        return Err(Error::InvalidArgument("empty background set".into()));
    }
    Ok(())
}

/// Rows evaluated per target call when averaging over the background.
const BATCH_ROWS: usize = 1 << 15;

/// Value of each coalition: the target averaged over background rows with
/// absent features substituted. Reduction order is fixed (coalition order,
/// then background order).
pub(crate) fn coalition_values<T: Scalar>(
    t: &dyn ScalarTarget<T>,
    x: &[T],
    bg: &BackgroundSet<T>,
    coalitions: &[Vec<bool>],
) -> Result<Vec<T>> {
    let k = bg.len();
    let m = x.len();
    let per_batch = (BATCH_ROWS / k).max(1);
    let inv_k = T::one() / T::from_usize_lossy(k);
    let mut values = Vec::with_capacity(coalitions.len());
    for chunk in coalitions.chunks(per_batch) {
        let mut rows = Array2::<T>::zeros((chunk.len() * k, m));
        for (c, coalition) in chunk.iter().enumerate() {
            for (b, bg_row) in bg.rows.rows().into_iter().enumerate() {
                let mut row = rows.row_mut(c * k + b);
                for j in 0..m {
                    row[j] = if coalition[j] { x[j] } else { bg_row[j] };
                }
            }
        }
        let y = t.eval_batch(rows.view())?;
        for c in 0..chunk.len() {
            let sum: T = y.slice(ndarray::s![c * k..(c + 1) * k]).iter().copied().sum();
            values.push(sum * inv_k);
        }
    }
    Ok(values)
}
