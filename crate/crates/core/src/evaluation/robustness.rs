use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::attribution::Coalitions;
use crate::autoencoder::{Autoencoder, TrainConfig};
use crate::dataset::{
    inject_noise_feature, iqr_threshold, minmax_normalize, rng_from_seed, sample_background, Dataset,
};
use crate::error::{Error, Result};
use crate::evaluation::mrr_of_feature;
use crate::evaluation::stats::{mean, paired_t_test, TTest};
use crate::explainer::{
    build_explanatory_feature_set, explain_instance, top_m_features, ExplainConfig, Method, Selection,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessConfig {
    /// Noise features tried, one at a time.
    pub n_noise_features: usize,
    pub repetitions: usize,
    pub error_percents: Vec<f64>,
    pub selections: Vec<Selection>,
    pub train: TrainConfig,
    pub background_size: usize,
    /// Anomalies explained per repetition (highest scores first).
    pub max_anomalies: usize,
    pub lime_samples: usize,
    pub coalitions: Coalitions,
    pub seed: u64,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            n_noise_features: 1,
            repetitions: 5,
            error_percents: (1..=9).map(|i| i as f64 / 10.0).collect(),
            selections: Selection::GRID.to_vec(),
            train: TrainConfig {
                hidden_sizes: vec![4],
                learning_rate: 0.2,
                ..TrainConfig::default()
            },
            background_size: 200,
            max_anomalies: 100,
            lime_samples: 5000,
            coalitions: Coalitions::Auto,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessCell {
    pub error_percent: f64,
    pub selection: Selection,
    /// Mean over runs of the per-run mean MRR.
    pub mean_mrr_shap: f64,
    pub mean_mrr_lime: f64,
    /// Per run (noise feature x repetition), per anomaly.
    pub mrr_shap: Vec<Vec<f64>>,
    pub mrr_lime: Vec<Vec<f64>>,
    /// SHAP vs LIME over pooled per-anomaly MRRs; `None` when every
    /// difference is equal.
    pub t_test: Option<TTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub noise_features: Vec<usize>,
    pub repetitions: usize,
    pub anomalies_per_run: Vec<usize>,
    pub cells: Vec<RobustnessCell>,
    pub overall_mrr_shap: f64,
    pub overall_mrr_lime: f64,
    /// SHAP vs LIME paired over the grid cells' mean MRRs.
    pub overall_t_test: Option<TTest>,
    /// Worst local-accuracy residual over the SHAP explanations.
    pub max_local_accuracy_gap: f64,
}

/// For each noise feature and repetition: inject noise, rescale, train on
/// normal rows, take the rows above the IQR threshold, and build
/// explanatory sets with SHAP and with LIME on the same data for every
/// grid cell.
pub fn eval_robustness<T: Scalar>(d: &Dataset<T>, cfg: &RobustnessConfig) -> Result<RobustnessReport> {
    if cfg.repetitions == 0 {
        return Err(Error::InvalidArgument("at least one repetition is required".into()));
    }
    if cfg.n_noise_features == 0 || cfg.n_noise_features > d.n_features() {
        return Err(Error::InvalidArgument(format!(
            "number of noise features must be in 1..={}",
            d.n_features()
        )));
    }
    if cfg.error_percents.is_empty() || cfg.selections.is_empty() {
        return Err(Error::InvalidArgument("empty sensitivity grid".into()));
    }
    let max_percent = cfg.error_percents.iter().copied().fold(f64::MIN, f64::max);
    let mut rng = rng_from_seed(cfg.seed);
    let noise_features = index::sample(&mut rng, d.n_features(), cfg.n_noise_features).into_vec();

    let n_cells = cfg.error_percents.len() * cfg.selections.len();
    let mut shap_runs: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n_cells];
    let mut lime_runs: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n_cells];
    let mut anomalies_per_run = Vec::new();
    let mut max_gap = 0.0f64;

    for (fi, &noise) in noise_features.iter().enumerate() {
        for rep in 0..cfg.repetitions {
            let run_seed = cfg
                .seed
                .wrapping_add(1 + (fi * cfg.repetitions + rep) as u64)
                .wrapping_mul(0x2545_f491_4f6c_dd1d);
            let noisy = inject_noise_feature(d, noise, run_seed)?;
            let (scaled, _) = minmax_normalize(&noisy);
            let train_cfg = TrainConfig {
                seed: run_seed,
                ..cfg.train.clone()
            };
            let mut ae = Autoencoder::build(scaled.n_features(), &train_cfg)?;
            ae.train(&scaled.normal_rows(), &train_cfg)?;

            let scores = ae.anomaly_scores(scaled.rows().view())?;
            let threshold = iqr_threshold(&scores)?;
            let mut flagged: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] > threshold).collect();
            flagged.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
            flagged.truncate(cfg.max_anomalies);
            anomalies_per_run.push(flagged.len());

            let bg = sample_background(&scaled, cfg.background_size, run_seed)?;
            let mut shap_mrr = vec![Vec::with_capacity(flagged.len()); n_cells];
            let mut lime_mrr = vec![Vec::with_capacity(flagged.len()); n_cells];
            for &r in &flagged {
                let x = scaled.row(r).to_vec();
                let errors = ae.errors(&x)?;
                for (method, sink) in [(Method::Shap, &mut shap_mrr), (Method::Lime, &mut lime_mrr)] {
                    let explain = ExplainConfig {
                        error_percent: max_percent,
                        selection: cfg.selections[0],
                        method,
                        background_size: cfg.background_size,
                        seed: run_seed ^ r as u64,
                        coalitions: cfg.coalitions,
                        lime_samples: cfg.lime_samples,
                    };
                    let full = explain_instance(&ae, &x, &bg, &explain)?;
                    if method == Method::Shap {
                        max_gap = max_gap.max(full.max_local_accuracy_gap());
                    }
                    for (pi, &p) in cfg.error_percents.iter().enumerate() {
                        let n_explained = top_m_features(&errors, p).len();
                        let expl = full.prefix(n_explained);
                        for (si, &sel) in cfg.selections.iter().enumerate() {
                            let set = build_explanatory_feature_set(&expl, sel);
                            sink[pi * cfg.selections.len() + si].push(mrr_of_feature(&set, noise));
                        }
                    }
                }
            }
            for c in 0..n_cells {
                shap_runs[c].push(std::mem::take(&mut shap_mrr[c]));
                lime_runs[c].push(std::mem::take(&mut lime_mrr[c]));
            }
        }
    }

    let mut cells = Vec::with_capacity(n_cells);
    for (pi, &p) in cfg.error_percents.iter().enumerate() {
        for (si, &sel) in cfg.selections.iter().enumerate() {
            let c = pi * cfg.selections.len() + si;
            let shap = std::mem::take(&mut shap_runs[c]);
            let lime = std::mem::take(&mut lime_runs[c]);
            let run_means = |runs: &[Vec<f64>]| mean(&runs.iter().map(|r| mean(r)).collect::<Vec<_>>());
            let pooled = |runs: &[Vec<f64>]| runs.iter().flatten().copied().collect::<Vec<_>>();
            cells.push(RobustnessCell {
                error_percent: p,
                selection: sel,
                mean_mrr_shap: run_means(&shap),
                mean_mrr_lime: run_means(&lime),
                t_test: paired_t_test(&pooled(&shap), &pooled(&lime)).ok(),
                mrr_shap: shap,
                mrr_lime: lime,
            });
        }
    }
    let shap_means: Vec<f64> = cells.iter().map(|c| c.mean_mrr_shap).collect();
    let lime_means: Vec<f64> = cells.iter().map(|c| c.mean_mrr_lime).collect();
    Ok(RobustnessReport {
        noise_features,
        repetitions: cfg.repetitions,
        anomalies_per_run,
        overall_mrr_shap: mean(&shap_means),
        overall_mrr_lime: mean(&lime_means),
        overall_t_test: paired_t_test(&shap_means, &lime_means).ok(),
        max_local_accuracy_gap: max_gap,
        cells,
    })
}
