use serde::{Deserialize, Serialize};

use crate::attribution::Coalitions;
use crate::autoencoder::{perfect_linear_ae, Activation, Autoencoder, PerfectModel, TrainConfig};
use crate::dataset::{gen_binary_logic, sample_background, Dataset};
use crate::error::{Error, Result};
use crate::explainer::{build_explanatory_feature_set, explain_instance, ExplainConfig, Method, Selection};
use crate::scalar::Scalar;

/// Features that should explain an anomaly injected into X5 or X6.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedExplanation {
    pub model_id: u8,
    pub anomaly_feature: usize,
    /// Sorted ascending.
    pub expected_set: Vec<usize>,
}

/// Whatever the model's rewriting, the set is the corrupted sum and its two
/// operands: `{X1, X2, X5}` or `{X3, X4, X6}`.
pub fn expected_explanation_set(model_id: u8, anomaly_feature: usize) -> Result<ExpectedExplanation> {
    PerfectModel::from_id(model_id)?;
    let expected_set = match anomaly_feature {
        4 => vec![0, 1, 4],
        5 => vec![2, 3, 5],
        _ => {
            return Err(Error::InvalidArgument(format!(
                "anomaly feature {anomaly_feature} is neither X5 (4) nor X6 (5)"
            )))
        }
    };
    Ok(ExpectedExplanation {
        model_id,
        anomaly_feature,
        expected_set,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessConfig {
    pub background_size: usize,
    pub error_percent: f64,
    pub selection: Selection,
    pub seed: u64,
    /// Cap on the number of labelled anomalies checked (first rows first).
    pub max_anomalies: Option<usize>,
    pub coalitions: Coalitions,
}

impl Default for CorrectnessConfig {
    fn default() -> Self {
        Self {
            background_size: 200,
            error_percent: 0.8,
            selection: Selection::TopK(2),
            seed: 0,
            max_anomalies: Some(500),
            coalitions: Coalitions::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub row: usize,
    pub model_id: u8,
    pub anomaly_feature: usize,
    pub expected: Vec<usize>,
    /// Explanatory set in rank order.
    pub got: Vec<usize>,
    pub background_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessReport {
    pub n_checked: usize,
    pub n_matched: usize,
    /// 1 when nothing was checked.
    pub fraction: f64,
    pub background_size: usize,
    pub mismatches: Vec<Mismatch>,
    /// Worst `|base + sum(phi) - predicted|` over every attribution made.
    pub max_local_accuracy_gap: f64,
}

impl CorrectnessReport {
    fn new(background_size: usize) -> Self {
        Self {
            n_checked: 0,
            n_matched: 0,
            fraction: 1.0,
            background_size,
            mismatches: Vec::new(),
            max_local_accuracy_gap: 0.0,
        }
    }

    fn record(&mut self, m: Option<Mismatch>) {
        self.n_checked += 1;
        match m {
            None => self.n_matched += 1,
            Some(m) => self.mismatches.push(m),
        }
        self.fraction = self.n_matched as f64 / self.n_checked as f64;
    }
}

/// Which sum identity a linear-dataset row violates: 4 for X5, 5 for X6.
fn violated_sum<T: Scalar>(x: &[T]) -> usize {
    let r5 = (x[4] - (x[0] + x[1])).abs();
    let r6 = (x[5] - (x[2] + x[3])).abs();
    if r5 >= r6 {
        4
    } else {
        5
    }
}

fn anomaly_rows<T: Scalar>(d: &Dataset<T>, cap: Option<usize>) -> Result<Vec<usize>> {
    if d.labels().is_none() {
        return Err(Error::InvalidArgument(
            "correctness harness needs labelled anomalies".into(),
        ));
    }
    let mut rows = d.anomaly_indices();
    if let Some(cap) = cap {
        rows.truncate(cap);
    }
    Ok(rows)
}

/// Explains every labelled anomaly of a linear dataset under each perfect
/// model and compares the explanatory set, as a set, against the expected
/// one.
pub fn eval_correctness<T: Scalar>(
    d: &Dataset<T>,
    models: &[PerfectModel],
    cfg: &CorrectnessConfig,
) -> Result<CorrectnessReport> {
    if d.n_features() != 6 {
        return Err(Error::WidthMismatch {
            expected: 6,
            actual: d.n_features(),
        });
    }
    let mut report = CorrectnessReport::new(cfg.background_size);
    let rows = anomaly_rows(d, cfg.max_anomalies)?;
    if rows.is_empty() {
        return Ok(report);
    }
    let bg = sample_background(d, cfg.background_size, cfg.seed)?;
    let explain = ExplainConfig {
        error_percent: cfg.error_percent,
        selection: cfg.selection,
        method: Method::Shap,
        background_size: cfg.background_size,
        seed: cfg.seed,
        coalitions: cfg.coalitions,
        ..ExplainConfig::default()
    };
    for &model in models {
        let ae = perfect_linear_ae::<T>(model);
        for &r in &rows {
            let x = d.row(r).to_vec();
            let anomaly_feature = violated_sum(&x);
            let expected = expected_explanation_set(model.id(), anomaly_feature)?.expected_set;
            let expl = explain_instance(&ae, &x, &bg, &explain)?;
            report.max_local_accuracy_gap = report.max_local_accuracy_gap.max(expl.max_local_accuracy_gap());
            let set = build_explanatory_feature_set(&expl, cfg.selection);
            let mismatch = (set.sorted() != expected).then(|| Mismatch {
                row: r,
                model_id: model.id(),
                anomaly_feature,
                expected,
                got: set.features.clone(),
                background_size: cfg.background_size,
            });
            report.record(mismatch);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryCorrectnessConfig {
    pub n_rows: usize,
    pub n_anomalies: usize,
    pub n_extra: usize,
    pub train: TrainConfig,
    pub background_size: usize,
    pub error_percent: f64,
    pub selection: Selection,
    pub seed: u64,
    pub coalitions: Coalitions,
}

impl Default for BinaryCorrectnessConfig {
    fn default() -> Self {
        Self {
            n_rows: 50_000,
            n_anomalies: 300,
            n_extra: 16,
            train: TrainConfig {
                hidden_sizes: vec![20],
                epochs: 60,
                batch_size: 16,
                learning_rate: 4.0,
                seed: 0,
                output_activation: Activation::Sigmoid,
                weight_decay: 0.0,
            },
            background_size: 100,
            error_percent: 0.8,
            selection: Selection::TopK(2),
            seed: 0,
            coalitions: Coalitions::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryCorrectnessReport {
    pub report: CorrectnessReport,
    /// Share of explanatory sets containing each extra (independent) feature.
    pub extra_feature_frequency: Vec<f64>,
    pub epoch_losses: Vec<f64>,
}

/// Trains an autoencoder on AND/OR data and checks that each flipped
/// dependent bit is explained by exactly itself and its two operands.
pub fn eval_correctness_binary<T: Scalar>(cfg: &BinaryCorrectnessConfig) -> Result<BinaryCorrectnessReport> {
    let d = gen_binary_logic::<T>(cfg.n_rows, cfg.n_anomalies, cfg.n_extra, cfg.seed)?;
    let mut ae = Autoencoder::build(d.n_features(), &cfg.train)?;
    let train = ae.train(&d.normal_rows(), &cfg.train)?;
    let bg = sample_background(&d, cfg.background_size, cfg.seed.wrapping_add(1))?;
    let explain = ExplainConfig {
        error_percent: cfg.error_percent,
        selection: cfg.selection,
        method: Method::Shap,
        background_size: cfg.background_size,
        seed: cfg.seed,
        coalitions: cfg.coalitions,
        ..ExplainConfig::default()
    };
    let mut report = CorrectnessReport::new(cfg.background_size);
    let mut extra_hits = vec![0usize; cfg.n_extra];
    for r in d.anomaly_indices() {
        let x = d.row(r).to_vec();
        let and = x[0] * x[1];
        let anomaly_feature = if x[4] != and { 4 } else { 5 };
        let expected = if anomaly_feature == 4 {
            vec![0, 1, 4]
        } else {
            vec![2, 3, 5]
        };
        let expl = explain_instance(&ae, &x, &bg, &explain)?;
        report.max_local_accuracy_gap = report.max_local_accuracy_gap.max(expl.max_local_accuracy_gap());
        let set = build_explanatory_feature_set(&expl, cfg.selection);
        for &f in &set.features {
            if f >= 6 {
                extra_hits[f - 6] += 1;
            }
        }
        let mismatch = (set.sorted() != expected).then(|| Mismatch {
            row: r,
            model_id: 0,
            anomaly_feature,
            expected,
            got: set.features.clone(),
            background_size: cfg.background_size,
        });
        report.record(mismatch);
    }
    let n = report.n_checked.max(1) as f64;
    Ok(BinaryCorrectnessReport {
        report,
        extra_feature_frequency: extra_hits.iter().map(|&h| h as f64 / n).collect(),
        epoch_losses: train.epoch_losses,
    })
}
