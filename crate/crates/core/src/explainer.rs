//! The explanation pipeline: features with the highest reconstruction
//! error are each attributed to the inputs, and the attributions are split
//! into features contributing to and offsetting the anomaly.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attribution::{
    kernel_shap, lime_explain, Attribution, Coalitions, FeatureTarget, LimeConfig, ScalarTarget, ShapConfig, TargetId,
    TotalErrorTarget,
};
use crate::autoencoder::{Autoencoder, ErrorList};
use crate::dataset::{quantile_sorted, BackgroundSet};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How explaining features are picked from an attribution row. Always on
/// `|phi|`, never including the explained feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    AboveMean,
    AboveMedian,
    TopK(usize),
}

impl Selection {
    pub const GRID: [Selection; 3] = [Selection::AboveMean, Selection::AboveMedian, Selection::TopK(5)];
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selection::AboveMean => f.write_str("mean"),
            Selection::AboveMedian => f.write_str("median"),
            Selection::TopK(k) => write!(f, "top{k}"),
        }
    }
}

impl FromStr for Selection {
    type Err = Error;

    /// Accepts `mean`, `median` or `topK` (e.g. `top5`).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Selection::AboveMean),
            "median" => Ok(Selection::AboveMedian),
            _ => s
                .strip_prefix("top")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k >= 1)
                .map(Selection::TopK)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown selection {s:?} (mean, median, topK)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Shap,
    Lime,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Shap => "shap",
            Method::Lime => "lime",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainConfig {
    /// Share of the summed absolute errors the explained features cover.
    pub error_percent: f64,
    pub selection: Selection,
    pub method: Method,
    pub background_size: usize,
    pub seed: u64,
    pub coalitions: Coalitions,
    pub lime_samples: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            error_percent: 0.8,
            selection: Selection::TopK(5),
            method: Method::Shap,
            background_size: 200,
            seed: 0,
            coalitions: Coalitions::Auto,
            lime_samples: 5000,
        }
    }
}

impl ExplainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.error_percent > 0.0 && self.error_percent <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "error percent {} outside (0, 1]",
                self.error_percent
            )));
        }
        if self.selection == Selection::TopK(0) {
            return Err(Error::InvalidArgument("top-k selection needs k >= 1".into()));
        }
        if self.background_size == 0 {
            return Err(Error::InvalidArgument("background size must be at least 1".into()));
        }
        Ok(())
    }

    fn attribute<T: Scalar>(
        &self,
        t: &dyn ScalarTarget<T>,
        x: &[T],
        bg: &BackgroundSet<T>,
        salt: u64,
    ) -> Result<Attribution<T>> {
        let seed = self.seed.wrapping_add(salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        match self.method {
            Method::Shap => kernel_shap(
                t,
                x,
                bg,
                &ShapConfig {
                    coalitions: self.coalitions,
                    seed,
                    ..ShapConfig::default()
                },
            ),
            Method::Lime => lime_explain(
                t,
                x,
                bg,
                &LimeConfig {
                    n_samples: self.lime_samples,
                    seed,
                    ..LimeConfig::default()
                },
            ),
        }
    }
}

/// One input feature's share in explaining a reconstructed feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Contribution<T> {
    pub feature: usize,
    pub shap: T,
    pub true_value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FeatureExplanation<T> {
    pub explained_feature: usize,
    pub true_value: T,
    pub predicted_value: T,
    pub contributing: Vec<Contribution<T>>,
    pub offsetting: Vec<Contribution<T>>,
    pub attribution: Attribution<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Explanation<T> {
    pub instance: Option<usize>,
    pub anomaly_score: T,
    pub per_feature: Vec<FeatureExplanation<T>>,
}

impl<T: Scalar> Explanation<T> {
    /// The first `n` explained features.
    pub fn prefix(&self, n: usize) -> Self {
        Self {
            instance: self.instance,
            anomaly_score: self.anomaly_score,
            per_feature: self.per_feature.iter().take(n).cloned().collect(),
        }
    }

    /// Largest `|base + sum(phi) - predicted|` over the explained features;
    /// zero up to rounding for Kernel SHAP, unconstrained for LIME.
    pub fn max_local_accuracy_gap(&self) -> f64 {
        self.per_feature
            .iter()
            .map(|fe| {
                (fe.attribution.reconstructed_value() - fe.predicted_value)
                    .abs()
                    .as_f64()
            })
            .fold(0.0, f64::max)
    }
}

/// Explained features interleaved with the features selected to explain
/// them, each feature kept at its first position only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanatoryFeatureSet {
    pub features: Vec<usize>,
    /// For each entry, the explained feature that introduced it.
    pub provenance: Vec<usize>,
}

impl ExplanatoryFeatureSet {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn contains(&self, feature: usize) -> bool {
        self.features.contains(&feature)
    }

    /// 1-based rank of `feature`.
    pub fn position(&self, feature: usize) -> Option<usize> {
        self.features.iter().position(|&f| f == feature).map(|p| p + 1)
    }

    pub fn sorted(&self) -> Vec<usize> {
        let mut v = self.features.clone();
        v.sort_unstable();
        v
    }
}

/// Shortest prefix of the error list whose absolute errors reach
/// `percent` of their sum. Empty when every error is zero.
pub fn top_m_features<T: Scalar>(errors: &ErrorList<T>, percent: f64) -> Vec<usize> {
    let total: T = errors.entries.iter().map(|e| e.abs).sum();
    if !(total > T::zero()) {
        return Vec::new();
    }
    let target = total * T::lit(percent);
    let mut covered = T::zero();
    let mut out = Vec::new();
    for e in &errors.entries {
        out.push(e.feature);
        covered += e.abs;
        if covered >= target {
            break;
        }
    }
    out
}

fn by_magnitude<T: Scalar>(a: (usize, T), b: (usize, T)) -> Ordering {
    b.1.abs()
        .partial_cmp(&a.1.abs())
        .unwrap_or(Ordering::Equal)
        .then(a.0.cmp(&b.0))
}

fn explained_of<T>(a: &Attribution<T>) -> Option<usize> {
    match a.target {
        TargetId::Feature(i) => Some(i),
        TargetId::Total => None,
    }
}

/// Candidate explainers (every feature but the explained one) ordered by
/// `|phi|` descending, ties by index.
fn ranked_candidates<T: Scalar>(a: &Attribution<T>) -> Vec<(usize, T)> {
    let skip = explained_of(a);
    let mut c: Vec<(usize, T)> = a
        .phi
        .iter()
        .copied()
        .enumerate()
        .filter(|&(j, _)| Some(j) != skip)
        .collect();
    c.sort_by(|&a, &b| by_magnitude(a, b));
    c
}

pub fn select_explainers<T: Scalar>(row: &Attribution<T>, method: Selection) -> Vec<usize> {
    let ranked = ranked_candidates(row);
    if ranked.is_empty() {
        return Vec::new();
    }
    let mags: Vec<T> = ranked.iter().map(|&(_, p)| p.abs()).collect();
    let threshold = match method {
        Selection::AboveMean => mags.iter().copied().sum::<T>() / T::from_usize_lossy(mags.len()),
        Selection::AboveMedian => {
            let mut asc = mags.clone();
            asc.reverse();
            quantile_sorted(&asc, 0.5)
        }
        Selection::TopK(k) => {
            return ranked
                .iter()
                .filter(|&&(_, p)| p != T::zero())
                .take(k)
                .map(|&(j, _)| j)
                .collect();
        }
    };
    ranked
        .iter()
        .filter(|&&(_, p)| p.abs() > threshold)
        .map(|&(j, _)| j)
        .collect()
}

/// Splits the attribution of explained feature `i` by the direction of its
/// error. When the input exceeds the reconstruction, negative `phi` pushed
/// the reconstruction away from the truth (contributing) and positive `phi`
/// towards it (offsetting); the roles swap otherwise. A zero error is
/// treated like `x_i > x'_i`. Zero attributions land in neither list.
pub fn split_contrib_offset<T: Scalar>(
    a: &Attribution<T>,
    x: &[T],
    predicted: T,
) -> (Vec<Contribution<T>>, Vec<Contribution<T>>) {
    let explained = explained_of(a);
    let true_value = explained.map(|i| x[i]).unwrap_or(predicted);
    let positive_contributes = true_value < predicted;
    let mut contributing = Vec::new();
    let mut offsetting = Vec::new();
    for (j, phi) in ranked_candidates(a) {
        if phi == T::zero() {
            continue;
        }
        let entry = Contribution {
            feature: j,
            shap: phi,
            true_value: x[j],
        };
        if (phi > T::zero()) == positive_contributes {
            contributing.push(entry);
        } else {
            offsetting.push(entry);
        }
    }
    (contributing, offsetting)
}

/// Attribution of each listed reconstructed feature at `x`.
pub fn shap_for_top_features<T: Scalar>(
    m: &Autoencoder<T>,
    x: &[T],
    bg: &BackgroundSet<T>,
    top: &[usize],
    cfg: &ExplainConfig,
) -> Result<Vec<Attribution<T>>> {
    top.iter()
        .map(|&i| {
            let t = FeatureTarget::new(m, i)?;
            cfg.attribute(&t, x, bg, i as u64 + 1)
        })
        .collect()
}

pub fn build_explanatory_feature_set<T: Scalar>(expl: &Explanation<T>, method: Selection) -> ExplanatoryFeatureSet {
    let mut set = ExplanatoryFeatureSet {
        features: Vec::new(),
        provenance: Vec::new(),
    };
    let push = |set: &mut ExplanatoryFeatureSet, f: usize, from: usize| {
        if !set.features.contains(&f) {
            set.features.push(f);
            set.provenance.push(from);
        }
    };
    for fe in &expl.per_feature {
        let i = fe.explained_feature;
        push(&mut set, i, i);
        for j in select_explainers(&fe.attribution, method) {
            push(&mut set, j, i);
        }
    }
    set
}

pub fn explain_instance<T: Scalar>(
    m: &Autoencoder<T>,
    x: &[T],
    bg: &BackgroundSet<T>,
    cfg: &ExplainConfig,
) -> Result<Explanation<T>> {
    cfg.validate()?;
    let x_hat = m.forward(x)?;
    let errors = crate::autoencoder::per_feature_errors(x, &x_hat)?;
    let top = top_m_features(&errors, cfg.error_percent);
    let rows = if top.is_empty() {
        Vec::new()
    } else {
        shap_for_top_features(m, x, bg, &top, cfg)?
    };
    let per_feature = top
        .iter()
        .zip(rows)
        .map(|(&i, attribution)| {
            let (contributing, offsetting) = split_contrib_offset(&attribution, x, x_hat[i]);
            FeatureExplanation {
                explained_feature: i,
                true_value: x[i],
                predicted_value: x_hat[i],
                contributing,
                offsetting,
                attribution,
            }
        })
        .collect();
    Ok(Explanation {
        instance: None,
        anomaly_score: errors.total,
        per_feature,
    })
}

/// Kernel SHAP of the total reconstruction error `x -> L(x, f(x))`.
pub fn explain_total_error<T: Scalar>(
    m: &Autoencoder<T>,
    x: &[T],
    bg: &BackgroundSet<T>,
    cfg: &ExplainConfig,
) -> Result<Attribution<T>> {
    cfg.validate()?;
    let t = TotalErrorTarget { model: m };
    kernel_shap(
        &t,
        x,
        bg,
        &ShapConfig {
            coalitions: cfg.coalitions,
            seed: cfg.seed,
            ..ShapConfig::default()
        },
    )
}
