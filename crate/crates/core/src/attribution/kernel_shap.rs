use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attribution::{check_inputs, coalition_values, wls::weighted_least_squares, Attribution, ScalarTarget};
use crate::dataset::{rng_from_seed, BackgroundSet};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const EXHAUSTIVE_MAX_ARITY: usize = 20;

/// Arity up to which [`Coalitions::Auto`] enumerates every coalition.
const AUTO_EXHAUSTIVE_ARITY: usize = 13;

/// Which coalitions the regression is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coalitions {
    /// Exhaustive up to arity 13, otherwise `2 * arity + 2048` samples.
    Auto,
    Exhaustive,
    /// Number of sampled coalitions, drawn in complementary pairs.
    Sampled(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapConfig {
    pub coalitions: Coalitions,
    pub seed: u64,
    /// Initial ridge; raised only when the weighted system is singular.
    pub regularization: f64,
}

impl Default for ShapConfig {
    fn default() -> Self {
        Self {
            coalitions: Coalitions::Auto,
            seed: 0,
            regularization: 1e-9,
        }
    }
}

/// Shapley kernel `(M-1) / (C(M,s) * s * (M-s))` for `0 < s < M`.
pub fn shapley_kernel_weight<T: Scalar>(m: usize, s: usize) -> Result<T> {
    if s == 0 || s >= m {
        return Err(Error::InvalidArgument(format!(
            "coalition size {s} outside (0, {m}); empty and full coalitions are constraints"
        )));
    }
    let binom = binomial(m, s);
    Ok(T::lit((m - 1) as f64 / (binom * s as f64 * (m - s) as f64)))
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Kernel SHAP: a Shapley-kernel weighted linear fit over coalition
/// indicators, constrained so that `base` is the background-averaged target
/// and `base + sum(phi)` equals the target at `x`.
pub fn kernel_shap<T: Scalar>(
    t: &dyn ScalarTarget<T>,
    x: &[T],
    bg: &BackgroundSet<T>,
    cfg: &ShapConfig,
) -> Result<Attribution<T>> {
    check_inputs(t, x, bg)?;
    let m = x.len();
    if !(cfg.regularization >= 0.0) {
        return Err(Error::InvalidArgument("regularization must be non-negative".into()));
    }
    let ends = coalition_values(t, x, bg, &[vec![false; m], vec![true; m]])?;
    let (base, fx) = (ends[0], ends[1]);
    let delta = fx - base;
    let attribution = |phi: Vec<T>, n: usize| Attribution {
        target: t.id(),
        base,
        phi,
        n_samples_used: n,
    };
    if m == 0 {
        return Ok(attribution(Vec::new(), 2));
    }
    if m == 1 {
        return Ok(attribution(vec![delta], 2));
    }

    let (coalitions, weights) = build_coalitions::<T>(m, cfg)?;
    let values = coalition_values(t, x, bg, &coalitions)?;

    // Eliminate the last feature with the efficiency constraint:
    // phi_last = delta - sum_{j<last} phi_j.
    let last = m - 1;
    let n = coalitions.len();
    let mut design = Array2::<T>::zeros((n, last));
    let mut y = Vec::with_capacity(n);
    for (r, (z, &v)) in coalitions.iter().zip(&values).enumerate() {
        let z_last = indicator::<T>(z[last]);
        for j in 0..last {
            design[[r, j]] = indicator::<T>(z[j]) - z_last;
        }
        y.push(v - base - z_last * delta);
    }

    let mut ridge = cfg.regularization;
    let solution = loop {
        match weighted_least_squares(design.view(), &y, &weights, T::lit(ridge)) {
            Ok(beta) => break beta,
            Err(Error::NotPositiveDefinite { .. }) if ridge < 1e-3 => {
                ridge = if ridge == 0.0 { 1e-9 } else { ridge * 1e3 };
            }
            Err(e) => return Err(e),
        }
    };
    let mut phi: Vec<T> = solution.to_vec();
    let rest: T = phi.iter().copied().sum();
    phi.push(delta - rest);
    Ok(attribution(phi, n + 2))
}

fn indicator<T: Scalar>(b: bool) -> T {
    if b {
        T::one()
    } else {
        T::zero()
    }
}

/// Coalitions (excluding empty and full) and their normalised weights.
fn build_coalitions<T: Scalar>(m: usize, cfg: &ShapConfig) -> Result<(Vec<Vec<bool>>, Vec<T>)> {
    let mode = match cfg.coalitions {
        Coalitions::Auto if m <= AUTO_EXHAUSTIVE_ARITY => Coalitions::Exhaustive,
        Coalitions::Auto => Coalitions::Sampled(2 * m + 2048),
        other => other,
    };
    let (coalitions, raw): (Vec<Vec<bool>>, Vec<f64>) = match mode {
        Coalitions::Exhaustive => {
            if m > EXHAUSTIVE_MAX_ARITY {
                return Err(Error::ArityTooLarge {
                    arity: m,
                    max: EXHAUSTIVE_MAX_ARITY,
                });
            }
            let size_weight: Vec<f64> = (0..m)
                .map(|s| {
                    if s == 0 {
                        0.0
                    } else {
                        shapley_kernel_weight::<f64>(m, s).expect("0<s<m")
                    }
                })
                .collect();
            (1..(1usize << m) - 1)
                .map(|mask| {
                    let z: Vec<bool> = (0..m).map(|j| mask >> j & 1 == 1).collect();
                    let s = mask.count_ones() as usize;
                    (z, size_weight[s])
                })
                .unzip()
        }
        Coalitions::Sampled(n) => {
            if n == 0 {
                return Err(Error::InvalidArgument(
                    "sampled coalition budget must be positive".into(),
                ));
            }
            sample_coalitions(m, n, cfg.seed).into_iter().unzip()
        }
        Coalitions::Auto => unreachable!("resolved above"),
    };
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|&w| T::lit(w / total)).collect();
    Ok((coalitions, weights))
}

/// Draws sizes in proportion to the total kernel mass of each size, a
/// uniform subset of that size, and its complement. Repeated draws merge
/// into one weighted row; the map keeps the order deterministic.
fn sample_coalitions(m: usize, n: usize, seed: u64) -> Vec<(Vec<bool>, f64)> {
    let mut rng = rng_from_seed(seed);
    // kernel mass of all coalitions of size s: (M-1) / (s (M-s))
    let mass: Vec<f64> = (1..m).map(|s| 1.0 / (s * (m - s)) as f64).collect();
    let total: f64 = mass.iter().sum();
    let mut counts: BTreeMap<Vec<bool>, f64> = BTreeMap::new();
    let pairs = n.div_ceil(2);
    for _ in 0..pairs {
        let mut u = rng.random::<f64>() * total;
        let mut s = m - 1;
        for (i, &w) in mass.iter().enumerate() {
            if u < w {
                s = i + 1;
                break;
            }
            u -= w;
        }
        let mut z = vec![false; m];
        for j in index::sample(&mut rng, m, s) {
            z[j] = true;
        }
        let complement: Vec<bool> = z.iter().map(|&b| !b).collect();
        *counts.entry(z).or_insert(0.0) += 1.0;
        *counts.entry(complement).or_insert(0.0) += 1.0;
    }
    counts.into_iter().collect()
}
