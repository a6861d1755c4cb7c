use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::attribution::{check_inputs, wls::weighted_least_squares, Attribution, ScalarTarget};
use crate::dataset::BackgroundSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub n_samples: usize,
    /// Proximity kernel width on standardised distance; `None` means
    /// `0.75 * sqrt(M)`.
    pub kernel_width: Option<f64>,
    /// Ridge penalty on standardised coefficients (intercept unpenalised).
    pub ridge: f64,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            n_samples: 5000,
            kernel_width: None,
            ridge: 1.0,
            seed: 0,
        }
    }
}

/// The fitted local surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct LimeFit<T> {
    /// Surrogate value at the background mean.
    pub intercept: T,
    /// Slopes in the original feature units; zero for features that do not
    /// vary in the background.
    pub coefficients: Vec<T>,
    pub attribution: Attribution<T>,
}

/// Fits a proximity-weighted ridge surrogate on Gaussian perturbations of
/// `x` (per-feature scale = background standard deviation).
pub fn lime_fit<T: Scalar>(
    t: &dyn ScalarTarget<T>,
    x: &[T],
    bg: &BackgroundSet<T>,
    cfg: &LimeConfig,
) -> Result<LimeFit<T>> {
    check_inputs(t, x, bg)?;
    if cfg.n_samples < 2 {
        return Err(Error::InvalidArgument("LIME needs at least two samples".into()));
    }
    let m = x.len();
    let mean = bg.mean();
    let std = bg.std_dev();
    let active: Vec<usize> = (0..m).filter(|&j| std[j] > T::zero()).collect();
    let width = cfg.kernel_width.unwrap_or(0.75 * (m as f64).sqrt());
    if !(width > 0.0) {
        return Err(Error::InvalidArgument("kernel width must be positive".into()));
    }

    let n = cfg.n_samples;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = Array2::<T>::zeros((n, m));
    let mut weights = Vec::with_capacity(n);
    for (i, mut row) in samples.rows_mut().into_iter().enumerate() {
        let mut dist2 = 0.0f64;
        for j in 0..m {
            // the first sample is the instance itself
            let eps: f64 = if i == 0 { 0.0 } else { StandardNormal.sample(&mut rng) };
            row[j] = x[j] + T::lit(eps) * std[j];
            if std[j] > T::zero() {
                dist2 += eps * eps;
            }
        }
        weights.push(T::lit((-dist2 / (width * width)).exp()));
    }
    let y = t.eval_batch(samples.view())?;

    // Weighted centring keeps the intercept out of the ridge penalty.
    let w_sum: T = weights.iter().copied().sum();
    let mut design = Array2::<T>::zeros((n, active.len()));
    for (i, row) in samples.rows().into_iter().enumerate() {
        for (c, &j) in active.iter().enumerate() {
            design[[i, c]] = (row[j] - mean[j]) / std[j];
        }
    }
    let col_means: Vec<T> = (0..active.len())
        .map(|c| design.column(c).iter().zip(&weights).map(|(&v, &w)| v * w).sum::<T>() / w_sum)
        .collect();
    let y_mean = y.iter().zip(&weights).map(|(&v, &w)| v * w).sum::<T>() / w_sum;
    for mut row in design.rows_mut() {
        for (c, v) in row.iter_mut().enumerate() {
            *v -= col_means[c];
        }
    }
    let y_centred: Vec<T> = y.iter().map(|&v| v - y_mean).collect();
    let beta = if active.is_empty() {
        ndarray::Array1::zeros(0)
    } else {
        weighted_least_squares(design.view(), &y_centred, &weights, T::lit(cfg.ridge))?
    };
    let intercept = y_mean - beta.iter().zip(&col_means).map(|(&b, &c)| b * c).sum::<T>();

    let mut coefficients = vec![T::zero(); m];
    let mut phi = vec![T::zero(); m];
    for (c, &j) in active.iter().enumerate() {
        coefficients[j] = beta[c] / std[j];
        phi[j] = beta[c] * (x[j] - mean[j]) / std[j];
    }
    Ok(LimeFit {
        intercept,
        coefficients,
        attribution: Attribution {
            target: t.id(),
            base: intercept,
            phi,
            n_samples_used: n,
        },
    })
}

/// LIME attribution: `phi_j = coefficient_j * (x_j - background mean_j)`,
/// base = surrogate intercept at the background mean.
pub fn lime_explain<T: Scalar>(
    t: &dyn ScalarTarget<T>,
    x: &[T],
    bg: &BackgroundSet<T>,
    cfg: &LimeConfig,
) -> Result<Attribution<T>> {
    Ok(lime_fit(t, x, bg, cfg)?.attribution)
}
