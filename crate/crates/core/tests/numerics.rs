use aex_core::attribution::{FeatureTarget, FnTarget, ScalarTarget};
use aex_core::evaluation::paired_t_test;
use aex_core::*;
use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
}

fn toy_net(seed: u64, output: Activation) -> Autoencoder<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let widths = [4, 3, 2, 3, 4];
    let layers = (0..4)
        .map(|l| Layer {
            weights: random_matrix(&mut rng, widths[l + 1], widths[l]),
            bias: Array1::from_shape_fn(widths[l + 1], |_| rng.random_range(0.1..0.6)),
            activation: if l == 3 { output } else { Activation::Relu },
        })
        .collect();
    Autoencoder::from_layers(layers).unwrap()
}

#[test]
fn gradients_match_central_differences() {
    for (seed, output) in [
        (1, Activation::Identity),
        (2, Activation::Sigmoid),
        (3, Activation::Identity),
    ] {
        let net = toy_net(seed, output);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let batch = random_matrix(&mut rng, 32, 4).mapv(f64::abs);
        let (_, grads) = net.loss_and_gradients(batch.view()).unwrap();
        let h = 1e-5;
        let loss_at = |m: &Autoencoder<f64>| m.loss_and_gradients(batch.view()).unwrap().0;
        let mut checked = 0;
        for l in 0..net.layers().len() {
            let (rows, cols) = net.layers()[l].weights.dim();
            let mut params: Vec<(Option<(usize, usize)>, usize)> = (0..rows)
                .flat_map(|i| (0..cols).map(move |j| (Some((i, j)), 0)))
                .collect();
            params.extend((0..rows).map(|i| (None, i)));
            for (w, b) in params {
                let mut plus = net.clone();
                let mut minus = net.clone();
                let analytic = match w {
                    Some((i, j)) => {
                        plus.layers_mut()[l].weights[[i, j]] += h;
                        minus.layers_mut()[l].weights[[i, j]] -= h;
                        grads[l].weights[[i, j]]
                    }
                    None => {
                        plus.layers_mut()[l].bias[b] += h;
                        minus.layers_mut()[l].bias[b] -= h;
                        grads[l].bias[b]
                    }
                };
                let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
                let scale = analytic.abs().max(numeric.abs());
                if scale < 1e-7 {
                    // inactive ReLU path: both sides are zero
                    assert!(analytic.abs() < 1e-7 && numeric.abs() < 1e-7);
                    continue;
                }
                let rel = (analytic - numeric).abs() / scale;
                assert!(rel < 1e-4, "layer {l} {w:?}/{b}: analytic {analytic} numeric {numeric}");
                checked += 1;
            }
        }
        assert!(checked > 20, "only {checked} active parameters checked");
    }
}

#[test]
fn weighted_least_squares_matches_qr() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let x = random_matrix(&mut rng, 50, 5);
        let y: Vec<f64> = (0..50).map(|_| rng.random_range(-2.0..2.0)).collect();
        let w: Vec<f64> = (0..50).map(|_| rng.random_range(0.1..3.0)).collect();
        let beta = weighted_least_squares(x.view(), &y, &w, 0.0).unwrap();

        // oracle: QR of sqrt(W) X against sqrt(W) y
        let a = DMatrix::from_fn(50, 5, |i, j| w[i].sqrt() * x[[i, j]]);
        let b = DVector::from_fn(50, |i, _| w[i].sqrt() * y[i]);
        let qr = a.qr();
        let rhs = qr.q().transpose() * b;
        let reference = qr.r().solve_upper_triangular(&rhs).unwrap();
        for j in 0..5 {
            let rel = (beta[j] - reference[j]).abs() / reference[j].abs().max(1e-12);
            assert!(rel < 1e-8, "beta[{j}] = {} vs {}", beta[j], reference[j]);
        }
    }
}

fn random_background(rng: &mut ChaCha8Rng, rows: usize, m: usize) -> BackgroundSet<f64> {
    BackgroundSet::from_rows(Array2::from_shape_fn((rows, m), |_| rng.random::<f64>())).unwrap()
}

#[test]
fn exhaustive_kernel_shap_matches_exact_shapley_on_small_autoencoders() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..20u64 {
        let m = 3 + (trial as usize % 6);
        let cfg = TrainConfig {
            hidden_sizes: vec![m.max(3) - 1],
            seed: trial,
            ..TrainConfig::default()
        };
        let ae = Autoencoder::<f64>::build(m, &cfg).unwrap();
        let bg = random_background(&mut rng, 8, m);
        let x: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        let t = FeatureTarget::new(&ae, trial as usize % m).unwrap();
        let exact = exact_shapley(&t, &x, &bg).unwrap();
        let shap = kernel_shap(
            &t,
            &x,
            &bg,
            &ShapConfig {
                coalitions: Coalitions::Exhaustive,
                ..ShapConfig::default()
            },
        )
        .unwrap();
        for (a, b) in shap.phi.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-6, "trial {trial}: {a} vs {b}");
        }
    }
}

#[test]
fn symmetry_and_dummy_axioms() {
    // features 0 and 1 enter symmetrically, feature 3 is a dummy
    let t = FnTarget::new(4, |z: &[f64]| (z[0] + z[1]).powi(2) + z[0] * z[1] * z[2]);
    let bg = BackgroundSet::from_rows(ndarray::array![[0.2, 0.2, 0.1, 0.9], [0.5, 0.5, 0.3, 0.0]]).unwrap();
    let x = [0.9, 0.9, 0.7, 0.4];
    let exact = exact_shapley(&t, &x, &bg).unwrap();
    assert_eq!(exact[0], exact[1]);
    assert_eq!(exact[3], 0.0);
    // without the ridge the exhaustive fit reproduces the axioms to rounding
    let cfg = ShapConfig {
        regularization: 0.0,
        ..ShapConfig::default()
    };
    let shap = kernel_shap(&t, &x, &bg, &cfg).unwrap();
    assert!((shap.phi[0] - shap.phi[1]).abs() < 1e-12);
    assert!(shap.phi[3].abs() < 1e-12, "{:?}", shap.phi);
    for (a, b) in shap.phi.iter().zip(&exact) {
        assert!((a - b).abs() < 1e-12);
    }
    let ridged = kernel_shap(&t, &x, &bg, &ShapConfig::default()).unwrap();
    for (a, b) in ridged.phi.iter().zip(&exact) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn sampled_kernel_shap_tracks_exact_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = 10;
    let ae = Autoencoder::<f64>::build(
        m,
        &TrainConfig {
            hidden_sizes: vec![6],
            output_activation: Activation::Sigmoid,
            seed: 3,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let bg = random_background(&mut rng, 10, m);
    let x: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    let t = FeatureTarget::new(&ae, 2).unwrap();
    let exact = exact_shapley(&t, &x, &bg).unwrap();
    let cfg = ShapConfig {
        coalitions: Coalitions::Sampled(2048),
        seed: 9,
        ..ShapConfig::default()
    };
    let shap = kernel_shap(&t, &x, &bg, &cfg).unwrap();
    let worst = shap
        .phi
        .iter()
        .zip(&exact)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.05, "{worst}");
    assert!((shap.reconstructed_value() - t.eval(&x).unwrap()).abs() < 1e-9);
}

#[derive(Deserialize)]
struct TTestCase {
    a: Vec<f64>,
    b: Vec<f64>,
    t: f64,
    p: f64,
    df: usize,
}

#[test]
fn paired_t_test_matches_high_precision_reference() {
    let cases: Vec<TTestCase> = serde_json::from_str(include_str!("fixtures/ttest_mpmath.json")).unwrap();
    assert_eq!(cases.len(), 100);
    for (i, c) in cases.iter().enumerate() {
        let r = paired_t_test(&c.a, &c.b).unwrap();
        assert_eq!(r.df, c.df);
        assert!(
            (r.t - c.t).abs() <= 1e-9 * c.t.abs().max(1.0),
            "case {i}: t {} vs {}",
            r.t,
            c.t
        );
        assert!((r.p - c.p).abs() <= 1e-9, "case {i}: p {} vs {}", r.p, c.p);
    }
}
