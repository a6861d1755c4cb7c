use std::fmt;

use ndarray::ArrayView2;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::attribution::Coalitions;
use crate::autoencoder::{Autoencoder, TrainConfig};
use crate::dataset::{gen_binary_logic, iqr_threshold, rng_from_seed, sample_background, BackgroundSet};
use crate::error::{Error, Result};
use crate::evaluation::stats::{mean, paired_t_test, TTest};
use crate::evaluation::{substitute_values, BinaryCorrectnessConfig, Policy, SubstitutionContext};
use crate::explainer::{select_explainers, shap_for_top_features, ExplainConfig, Method, Selection};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetMethod {
    Shap,
    Lime,
    Random,
}

impl SetMethod {
    pub const ALL: [SetMethod; 3] = [SetMethod::Shap, SetMethod::Lime, SetMethod::Random];
}

impl fmt::Display for SetMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SetMethod::Shap => "shap",
            SetMethod::Lime => "lime",
            SetMethod::Random => "random",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectivenessConfig {
    pub selection: Selection,
    pub max_anomalies: usize,
    pub lime_samples: usize,
    pub coalitions: Coalitions,
    pub seed: u64,
}

impl Default for EffectivenessConfig {
    fn default() -> Self {
        Self {
            selection: Selection::TopK(5),
            max_anomalies: 200,
            lime_samples: 5000,
            coalitions: Coalitions::Auto,
            seed: 0,
        }
    }
}

/// Scores after substituting one method's feature set under one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScores {
    pub method: SetMethod,
    pub policy: Policy,
    pub mean_after: f64,
    pub after: Vec<f64>,
}

/// Scores after substituting only the highest-error feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyScores {
    pub policy: Policy,
    pub mean_after: f64,
    pub after: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTest {
    pub a: String,
    pub b: String,
    /// `None` when the paired differences are all equal.
    pub test: Option<TTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectivenessReport {
    pub n_anomalies: usize,
    pub mean_before: f64,
    pub before: Vec<f64>,
    pub highest_error_only: Vec<PolicyScores>,
    pub methods: Vec<MethodScores>,
    /// Feature sets per anomaly (rank order), per method.
    pub sets: Vec<(SetMethod, Vec<Vec<usize>>)>,
    pub tests: Vec<NamedTest>,
    /// Worst local-accuracy residual over the SHAP attributions.
    pub max_local_accuracy_gap: f64,
}

impl EffectivenessReport {
    pub fn scores(&self, method: SetMethod, policy: Policy) -> Option<&MethodScores> {
        self.methods.iter().find(|m| m.method == method && m.policy == policy)
    }

    pub fn test(&self, a: &str, b: &str) -> Option<&TTest> {
        self.tests
            .iter()
            .find(|t| t.a == a && t.b == b)
            .and_then(|t| t.test.as_ref())
    }
}

fn label(method: impl fmt::Display, policy: Policy) -> String {
    let p = match policy {
        Policy::Mean => "mean",
        Policy::Predicted => "predicted",
    };
    format!("{method}/{p}")
}

/// Substitutes the highest-error feature plus its selected explainers and
/// records how far the anomaly score drops, for SHAP, LIME and a uniformly
/// drawn random set of the same size as the SHAP set.
pub fn eval_effectiveness<T: Scalar>(
    m: &Autoencoder<T>,
    anomalies: ArrayView2<'_, T>,
    means: &[T],
    bg: &BackgroundSet<T>,
    cfg: &EffectivenessConfig,
) -> Result<EffectivenessReport> {
    if anomalies.ncols() != m.n_features() {
        return Err(Error::WidthMismatch {
            expected: m.n_features(),
            actual: anomalies.ncols(),
        });
    }
    let n = anomalies.nrows().min(cfg.max_anomalies);
    let ctx = SubstitutionContext { means, model: m };
    let mut rng = rng_from_seed(cfg.seed ^ 0x5241_4e44);
    let mut before = Vec::with_capacity(n);
    let mut baseline: Vec<Vec<f64>> = vec![Vec::with_capacity(n); 2];
    let mut after: Vec<Vec<f64>> = vec![Vec::with_capacity(n); SetMethod::ALL.len() * 2];
    let mut sets: Vec<Vec<Vec<usize>>> = vec![Vec::with_capacity(n); SetMethod::ALL.len()];
    let mut max_gap = 0.0f64;
    let score = |x: &[T]| -> Result<f64> { Ok(m.anomaly_score(x)?.as_f64()) };

    for r in 0..n {
        let x = anomalies.row(r).to_vec();
        before.push(score(&x)?);
        let errors = m.errors(&x)?;
        let first = errors.entries[0].feature;
        let predicted = m.predict_feature(&x, first)?;
        for (pi, &policy) in Policy::ALL.iter().enumerate() {
            baseline[pi].push(score(&substitute_values(&x, &[first], policy, &ctx)?)?);
        }

        let mut shap_size = 1;
        for (mi, &method) in SetMethod::ALL.iter().enumerate() {
            let set: Vec<usize> = match method {
                SetMethod::Shap | SetMethod::Lime => {
                    let explain = ExplainConfig {
                        selection: cfg.selection,
                        method: if method == SetMethod::Shap {
                            Method::Shap
                        } else {
                            Method::Lime
                        },
                        background_size: bg.len(),
                        seed: cfg.seed ^ r as u64,
                        coalitions: cfg.coalitions,
                        lime_samples: cfg.lime_samples,
                        ..ExplainConfig::default()
                    };
                    let row = shap_for_top_features(m, &x, bg, &[first], &explain)?.remove(0);
                    if method == SetMethod::Shap {
                        max_gap = max_gap.max((row.reconstructed_value() - predicted).abs().as_f64());
                    }
                    std::iter::once(first)
                        .chain(select_explainers(&row, cfg.selection))
                        .collect()
                }
                SetMethod::Random => index::sample(&mut rng, x.len(), shap_size.min(x.len())).into_vec(),
            };
            if method == SetMethod::Shap {
                shap_size = set.len();
            }
            for (pi, &policy) in Policy::ALL.iter().enumerate() {
                after[mi * 2 + pi].push(score(&substitute_values(&x, &set, policy, &ctx)?)?);
            }
            sets[mi].push(set);
        }
    }

    let highest_error_only = Policy::ALL
        .iter()
        .zip(baseline)
        .map(|(&policy, v)| PolicyScores {
            policy,
            mean_after: mean(&v),
            after: v,
        })
        .collect::<Vec<_>>();
    let mut methods = Vec::new();
    for (mi, &method) in SetMethod::ALL.iter().enumerate() {
        for (pi, &policy) in Policy::ALL.iter().enumerate() {
            let v = std::mem::take(&mut after[mi * 2 + pi]);
            methods.push(MethodScores {
                method,
                policy,
                mean_after: mean(&v),
                after: v,
            });
        }
    }

    let mut tests = Vec::new();
    for &policy in &Policy::ALL {
        let shap = &methods
            .iter()
            .find(|s| s.method == SetMethod::Shap && s.policy == policy)
            .unwrap()
            .after;
        tests.push(NamedTest {
            a: label(SetMethod::Shap, policy),
            b: "before".into(),
            test: paired_t_test(shap, &before).ok(),
        });
        for other in [SetMethod::Lime, SetMethod::Random] {
            let o = &methods
                .iter()
                .find(|s| s.method == other && s.policy == policy)
                .unwrap()
                .after;
            tests.push(NamedTest {
                a: label(SetMethod::Shap, policy),
                b: label(other, policy),
                test: paired_t_test(shap, o).ok(),
            });
        }
    }
    let by_policy = |method: SetMethod, policy: Policy| {
        methods
            .iter()
            .find(|s| s.method == method && s.policy == policy)
            .map(|s| s.after.clone())
            .unwrap_or_default()
    };
    for method in SetMethod::ALL {
        tests.push(NamedTest {
            a: label(method, Policy::Mean),
            b: label(method, Policy::Predicted),
            test: paired_t_test(&by_policy(method, Policy::Mean), &by_policy(method, Policy::Predicted)).ok(),
        });
    }

    Ok(EffectivenessReport {
        n_anomalies: n,
        mean_before: mean(&before),
        before,
        highest_error_only,
        methods,
        sets: SetMethod::ALL.iter().copied().zip(sets).collect(),
        tests,
        max_local_accuracy_gap: max_gap,
    })
}

/// Self-contained effectiveness run: AND/OR binary data, an autoencoder
/// trained on its normal rows, and the highest-scoring rows above the IQR
/// threshold as anomalies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticEffectivenessConfig {
    pub n_rows: usize,
    pub n_anomalies: usize,
    pub n_extra: usize,
    pub train: TrainConfig,
    /// Drawn from the normal rows, which also supply the MEAN policy values.
    pub background_size: usize,
    pub seed: u64,
    pub effectiveness: EffectivenessConfig,
}

impl Default for SyntheticEffectivenessConfig {
    fn default() -> Self {
        let binary = BinaryCorrectnessConfig::default();
        Self {
            n_rows: binary.n_rows,
            n_anomalies: binary.n_anomalies,
            n_extra: binary.n_extra,
            train: binary.train,
            background_size: binary.background_size,
            seed: 0,
            effectiveness: EffectivenessConfig::default(),
        }
    }
}

pub fn eval_effectiveness_synthetic<T: Scalar>(cfg: &SyntheticEffectivenessConfig) -> Result<EffectivenessReport> {
    let d = gen_binary_logic::<T>(cfg.n_rows, cfg.n_anomalies, cfg.n_extra, cfg.seed)?;
    let normal = d.normal_rows();
    let train = TrainConfig {
        seed: cfg.seed,
        ..cfg.train.clone()
    };
    let mut ae = Autoencoder::build(d.n_features(), &train)?;
    ae.train(&normal, &train)?;
    let scores = ae.anomaly_scores(d.rows().view())?;
    let threshold = iqr_threshold(&scores)?;
    let mut flagged: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] > threshold).collect();
    flagged.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    flagged.truncate(cfg.effectiveness.max_anomalies);
    let anomalies = d.select_rows(&flagged);
    let bg = sample_background(&normal, cfg.background_size, cfg.seed.wrapping_add(1))?;
    eval_effectiveness(
        &ae,
        anomalies.rows().view(),
        &normal.column_means(),
        &bg,
        &cfg.effectiveness,
    )
}
