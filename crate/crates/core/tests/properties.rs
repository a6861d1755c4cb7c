use aex_core::attribution::{FnTarget, TargetId};
use aex_core::evaluation::mrr_of_feature;
use aex_core::*;
use ndarray::Array2;
use proptest::prelude::*;

fn finite(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    lo..hi
}

proptest! {
    #[test]
    fn iqr_threshold_is_translation_equivariant(
        scores in prop::collection::vec(finite(-100.0, 100.0), 1..60),
        c in finite(-50.0, 50.0),
    ) {
        let shifted: Vec<f64> = scores.iter().map(|s| s + c).collect();
        let a = iqr_threshold(&scores).unwrap() + c;
        let b = iqr_threshold(&shifted).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn csv_round_trip(
        cells in prop::collection::vec(finite(-1e6, 1e6), 1..40),
        width in 1usize..5,
        labelled in any::<bool>(),
    ) {
        let n = cells.len() / width;
        prop_assume!(n > 0);
        let rows = Array2::from_shape_vec((n, width), cells[..n * width].to_vec()).unwrap();
        let labels = labelled.then(|| (0..n).map(|i| (i % 2) as u8).collect());
        let d = Dataset::unnamed(rows, labels).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        save_csv(&d, &path).unwrap();
        let back = load_csv::<f64>(&path).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn normalisation_round_trip(
        cells in prop::collection::vec(finite(-1e3, 1e3), 2..40),
        width in 1usize..4,
    ) {
        let n = cells.len() / width;
        prop_assume!(n > 1);
        let rows = Array2::from_shape_vec((n, width), cells[..n * width].to_vec()).unwrap();
        let d = Dataset::unnamed(rows, None).unwrap();
        let (scaled, stats) = minmax_normalize(&d);
        for &v in scaled.rows() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let back = stats.invert(&scaled).unwrap();
        for (a, b) in back.rows().iter().zip(d.rows()) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
        let json = stats.to_json().unwrap();
        prop_assert_eq!(NormStats::<f64>::from_json(&json).unwrap(), stats);
    }

    #[test]
    fn top_m_features_is_minimal(
        x in prop::collection::vec(finite(-3.0, 3.0), 1..12),
        noise in prop::collection::vec(finite(-1.0, 1.0), 12),
        percent in 0.01f64..1.0,
    ) {
        let x_hat: Vec<f64> = x.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let errors = per_feature_errors(&x, &x_hat).unwrap();
        let top = top_m_features(&errors, percent);
        let total: f64 = errors.entries.iter().map(|e| e.abs).sum();
        let covered = |k: usize| errors.entries[..k].iter().map(|e| e.abs).sum::<f64>();
        prop_assert!(!top.is_empty());
        prop_assert!(covered(top.len()) >= percent * total);
        prop_assert!(covered(top.len() - 1) < percent * total);
        let prefix: Vec<usize> = errors.entries[..top.len()].iter().map(|e| e.feature).collect();
        prop_assert_eq!(top, prefix);
    }

    #[test]
    fn error_list_is_ordered_and_totals_the_score(
        x in prop::collection::vec(finite(-3.0, 3.0), 1..12),
        x_hat in prop::collection::vec(finite(-3.0, 3.0), 12),
    ) {
        let x_hat = &x_hat[..x.len()];
        let e = per_feature_errors(&x, x_hat).unwrap();
        for w in e.entries.windows(2) {
            prop_assert!(w[0].abs >= w[1].abs);
            if w[0].abs == w[1].abs {
                prop_assert!(w[0].feature < w[1].feature);
            }
        }
        let sq: f64 = e.entries.iter().map(|v| v.signed * v.signed).sum();
        prop_assert!((sq - e.total).abs() < 1e-9);
    }

    #[test]
    fn split_follows_the_sign_rule(
        phi in prop::collection::vec(prop_oneof![Just(0.0), finite(-1.0, 1.0)], 2..10),
        x in prop::collection::vec(finite(0.0, 1.0), 10),
        predicted in finite(0.0, 1.0),
        explained in 0usize..10,
    ) {
        let m = phi.len();
        let explained = explained % m;
        let x = &x[..m];
        let a = Attribution { target: TargetId::Feature(explained), base: 0.0, phi: phi.clone(), n_samples_used: 0 };
        let (contributing, offsetting) = split_contrib_offset(&a, x, predicted);
        // direction in which the reconstruction left the truth
        let away = predicted - x[explained];
        for c in &contributing {
            prop_assert!(c.shap != 0.0 && c.feature != explained);
            if away != 0.0 {
                prop_assert!(c.shap * away > 0.0);
            } else {
                prop_assert!(c.shap < 0.0);
            }
        }
        for o in &offsetting {
            prop_assert!(o.shap != 0.0 && o.feature != explained);
            if away != 0.0 {
                prop_assert!(o.shap * away < 0.0);
            } else {
                prop_assert!(o.shap > 0.0);
            }
        }
        let nonzero = phi.iter().enumerate().filter(|&(j, &p)| j != explained && p != 0.0).count();
        prop_assert_eq!(contributing.len() + offsetting.len(), nonzero);
    }

    #[test]
    fn explanatory_set_is_deduplicated_and_led_by_the_top_feature(
        phis in prop::collection::vec(prop::collection::vec(finite(-1.0, 1.0), 6), 1..4),
        sel in prop_oneof![Just(Selection::AboveMean), Just(Selection::AboveMedian), (1usize..4).prop_map(Selection::TopK)],
    ) {
        let per_feature = phis.iter().enumerate().map(|(i, phi)| FeatureExplanation {
            explained_feature: i,
            true_value: 0.0,
            predicted_value: 0.0,
            contributing: vec![],
            offsetting: vec![],
            attribution: Attribution { target: TargetId::Feature(i), base: 0.0, phi: phi.clone(), n_samples_used: 0 },
        }).collect();
        let expl = Explanation { instance: None, anomaly_score: 0.0, per_feature };
        let set = build_explanatory_feature_set(&expl, sel);
        prop_assert_eq!(set.features[0], 0);
        let mut sorted = set.sorted();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), set.len());
        prop_assert_eq!(set.provenance.len(), set.len());
    }

    #[test]
    fn mrr_never_decreases_when_the_feature_moves_earlier(
        perm in Just((0usize..8).collect::<Vec<_>>()).prop_shuffle(),
        target in 0usize..8,
        len in 1usize..8,
    ) {
        let features: Vec<usize> = perm[..len].to_vec();
        let set = ExplanatoryFeatureSet { provenance: features.clone(), features: features.clone() };
        let mrr = mrr_of_feature(&set, target);
        match set.position(target) {
            None => prop_assert_eq!(mrr, 0.0),
            Some(r) => {
                prop_assert_eq!(mrr, 1.0 / r as f64);
                if r > 1 {
                    let mut earlier = features.clone();
                    earlier.swap(r - 1, r - 2);
                    let moved = ExplanatoryFeatureSet { provenance: earlier.clone(), features: earlier };
                    prop_assert!(mrr_of_feature(&moved, target) > mrr);
                }
            }
        }
    }

    #[test]
    fn kernel_shap_is_locally_accurate(
        coef in prop::collection::vec(finite(-2.0, 2.0), 2..7),
        x in prop::collection::vec(finite(0.0, 1.0), 7),
        seed in any::<u64>(),
    ) {
        let m = coef.len();
        let c = coef.clone();
        let t = FnTarget::new(m, move |z: &[f64]| {
            z.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() + (z[0] * z[1]).sin()
        });
        let d = gen_linear_artificial::<f64>(50, 0, seed).unwrap();
        let rows = d.rows().slice(ndarray::s![.., ..m.min(6)]).to_owned();
        let rows = if m > 6 {
            ndarray::concatenate![ndarray::Axis(1), rows, d.rows().slice(ndarray::s![.., ..m - 6]).to_owned()]
        } else {
            rows
        };
        let bg = BackgroundSet::from_rows(rows).unwrap();
        let x = &x[..m];
        let a = kernel_shap(&t, x, &bg, &ShapConfig { seed, ..ShapConfig::default() }).unwrap();
        let fx = aex_core::attribution::ScalarTarget::eval(&t, x).unwrap();
        prop_assert!((a.reconstructed_value() - fx).abs() < 1e-9);
    }

    #[test]
    fn generators_are_deterministic_and_respect_identities(seed in any::<u64>(), n in 2usize..200) {
        let a = gen_linear_artificial::<f64>(n, n / 4, seed).unwrap();
        prop_assert_eq!(&a, &gen_linear_artificial::<f64>(n, n / 4, seed).unwrap());
        for (row, &l) in a.rows().rows().into_iter().zip(a.labels().unwrap()) {
            let ok5 = row[4] == row[0] + row[1];
            let ok6 = row[5] == row[2] + row[3];
            if l == 0 {
                prop_assert!(ok5 && ok6);
            } else {
                prop_assert!(ok5 != ok6);
            }
        }
        let b = gen_binary_logic::<f64>(n, n / 4, 3, seed).unwrap();
        prop_assert_eq!(&b, &gen_binary_logic::<f64>(n, n / 4, 3, seed).unwrap());
        prop_assert_eq!(b.n_features(), 9);
        for (row, &l) in b.rows().rows().into_iter().zip(b.labels().unwrap()) {
            let ok5 = row[4] == row[0] * row[1];
            let ok6 = row[5] == row[2].max(row[3]);
            if l == 0 {
                prop_assert!(ok5 && ok6);
            } else {
                prop_assert!(ok5 != ok6);
            }
        }
    }

    #[test]
    fn noise_injection_touches_only_its_column(seed in any::<u64>(), feature in 0usize..6) {
        let d = gen_linear_artificial::<f64>(100, 10, 9).unwrap();
        let noisy = inject_noise_feature(&d, feature, seed).unwrap();
        prop_assert_eq!(noisy.labels(), d.labels());
        prop_assert_eq!(noisy.rows().dim(), d.rows().dim());
        for j in 0..6 {
            if j != feature {
                prop_assert_eq!(noisy.rows().column(j), d.rows().column(j));
            }
        }
        prop_assert_eq!(&noisy, &inject_noise_feature(&d, feature, seed).unwrap());
    }
}
