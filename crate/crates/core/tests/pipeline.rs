use aex_core::attribution::{ScalarTarget, TotalErrorTarget};
use aex_core::*;

fn linear_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        hidden_sizes: vec![4],
        epochs: 50,
        batch_size: 32,
        learning_rate: 0.2,
        seed,
        output_activation: Activation::Identity,
        weight_decay: 0.0,
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[test]
fn training_fits_the_linear_dataset() {
    let d = gen_linear_artificial::<f64>(100_000, 0, 1).unwrap();
    let cfg = linear_train_config(1);
    let mut ae = Autoencoder::build(6, &cfg).unwrap();
    let report = ae.train(&d, &cfg).unwrap();
    assert_eq!(report.epoch_losses.len(), 50);
    let mse = ae.anomaly_scores(d.rows().view()).unwrap().iter().sum::<f64>() / (6.0 * d.n_rows() as f64);
    assert!(mse < 1e-3, "per-feature MSE {mse}");
}

#[test]
fn trained_model_separates_anomalies() {
    let d = gen_linear_artificial::<f64>(20_000, 200, 2).unwrap();
    let cfg = linear_train_config(2);
    let mut ae = Autoencoder::build(6, &cfg).unwrap();
    ae.train(&d.normal_rows(), &cfg).unwrap();
    let scores = ae.anomaly_scores(d.rows().view()).unwrap();
    let labels = d.labels().unwrap();
    let normal = median(
        scores
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == 0)
            .map(|(&s, _)| s)
            .collect(),
    );
    let anomalous = median(
        scores
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == 1)
            .map(|(&s, _)| s)
            .collect(),
    );
    assert!(
        anomalous >= 10.0 * normal,
        "anomaly median {anomalous} vs normal median {normal}"
    );

    // the IQR threshold catches nearly every labelled anomaly
    let threshold = iqr_threshold(&scores).unwrap();
    let anomalies = d.anomaly_indices();
    let caught = anomalies.iter().filter(|&&i| scores[i] > threshold).count();
    assert!(
        caught as f64 >= 0.95 * anomalies.len() as f64,
        "{caught} of {}",
        anomalies.len()
    );
}

#[test]
fn anomaly_score_is_independent_of_row_order() {
    let d = gen_linear_artificial::<f64>(500, 25, 3).unwrap();
    let ae = Autoencoder::<f64>::build(6, &linear_train_config(3)).unwrap();
    let scores = ae.anomaly_scores(d.rows().view()).unwrap();
    let reversed: Vec<usize> = (0..d.n_rows()).rev().collect();
    let shuffled = d.select_rows(&reversed);
    let back = ae.anomaly_scores(shuffled.rows().view()).unwrap();
    for (i, &r) in reversed.iter().enumerate() {
        assert_eq!(back[i], scores[r]);
        assert_eq!(ae.anomaly_score(&d.row(r).to_vec()).unwrap(), scores[r]);
        assert_eq!(ae.errors(&d.row(r).to_vec()).unwrap().total, scores[r]);
    }
}

#[test]
fn perfect_autoencoders_are_explained_by_their_relations() {
    let d = gen_linear_artificial::<f64>(3_000, 60, 4).unwrap();
    let bg = sample_background(&d, 200, 4).unwrap();
    let cfg = ExplainConfig {
        selection: Selection::TopK(2),
        error_percent: 0.8,
        ..ExplainConfig::default()
    };
    for model in PerfectModel::ALL {
        let ae = perfect_linear_ae::<f64>(model);
        for r in d.anomaly_indices() {
            let x = d.row(r).to_vec();
            let corrupted = if x[4] != x[0] + x[1] { 4 } else { 5 };
            let expected = if corrupted == 4 { vec![0, 1, 4] } else { vec![2, 3, 5] };
            let expl = explain_instance(&ae, &x, &bg, &cfg).unwrap();
            let set = build_explanatory_feature_set(&expl, Selection::TopK(2));
            assert_eq!(
                set.sorted(),
                expected,
                "model {} row {r}: {:?}",
                model.id(),
                set.features
            );
            assert_eq!(Some(set.features[0]), model.dependent_for(corrupted));
            assert!(expl.max_local_accuracy_gap() < 1e-9);
        }
    }
}

#[test]
fn total_error_attribution_points_at_the_broken_relation() {
    let d = gen_linear_artificial::<f64>(3_000, 50, 5).unwrap();
    let bg = sample_background(&d.normal_rows(), 100, 5).unwrap();
    let ae = perfect_linear_ae::<f64>(PerfectModel::Model1);
    let cfg = ExplainConfig::default();

    // a normal row has zero total error and nothing to attribute
    let normal = d.normal_rows().row(0).to_vec();
    let a = explain_total_error(&ae, &normal, &bg, &cfg).unwrap();
    assert!(a.reconstructed_value().abs() < 1e-9);
    assert!(a.phi.iter().all(|p| p.abs() < 1e-9), "{:?}", a.phi);

    for r in d.anomaly_indices() {
        let x = d.row(r).to_vec();
        let a = explain_total_error(&ae, &x, &bg, &cfg).unwrap();
        let t = TotalErrorTarget { model: &ae };
        assert!((a.reconstructed_value() - t.eval(&x).unwrap()).abs() < 1e-9);
        let mut by_phi: Vec<usize> = (0..6).collect();
        by_phi.sort_by(|&i, &j| a.phi[j].abs().partial_cmp(&a.phi[i].abs()).unwrap());
        let corrupted = if x[4] != x[0] + x[1] { [0, 1, 4] } else { [2, 3, 5] };
        assert!(corrupted.contains(&by_phi[0]), "row {r}: {:?}", a.phi);
    }
}

#[test]
fn explanations_are_deterministic() {
    let d = gen_linear_artificial::<f64>(1_000, 10, 6).unwrap();
    let bg = sample_background(&d, 50, 6).unwrap();
    let ae = perfect_linear_ae::<f64>(PerfectModel::Model2);
    let x = d.row(d.anomaly_indices()[0]).to_vec();
    for method in [Method::Shap, Method::Lime] {
        let cfg = ExplainConfig {
            method,
            lime_samples: 500,
            ..ExplainConfig::default()
        };
        let a = serde_json::to_string(&explain_instance(&ae, &x, &bg, &cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&explain_instance(&ae, &x, &bg, &cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn single_precision_pipeline_runs() {
    let d = gen_linear_artificial::<f32>(2_000, 20, 7).unwrap();
    let bg = sample_background(&d, 100, 7).unwrap();
    let ae = perfect_linear_ae::<f32>(PerfectModel::Model1);
    let mut matched = 0;
    for r in d.anomaly_indices() {
        let x = d.row(r).to_vec();
        let expl = explain_instance(&ae, &x, &bg, &ExplainConfig::default()).unwrap();
        assert!(expl.max_local_accuracy_gap() < 1e-4);
        let set = build_explanatory_feature_set(&expl, Selection::TopK(2));
        let corrupted = if (x[4] - (x[0] + x[1])).abs() > 1e-6 {
            vec![0, 1, 4]
        } else {
            vec![2, 3, 5]
        };
        if set.sorted() == corrupted {
            matched += 1;
        }
    }
    assert_eq!(matched, 20);

    let cfg = TrainConfig {
        hidden_sizes: vec![4],
        epochs: 5,
        learning_rate: 0.2,
        ..TrainConfig::default()
    };
    let mut trained = Autoencoder::<f32>::build(6, &cfg).unwrap();
    let report = trained.train(&d.normal_rows(), &cfg).unwrap();
    assert!(report.epoch_losses[4] < report.epoch_losses[0]);
}
