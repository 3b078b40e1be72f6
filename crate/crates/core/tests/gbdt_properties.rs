#[path = "support/oracles.rs"]
mod oracles;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use triage_core::eval::roc_auc;
use triage_core::trees::{gbdt_fit, leaf_weight, GbdtParams, Loss};
use triage_core::Matrix;

fn names(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("f{i}")).collect()
}

#[test]
fn one_stump_equals_bruteforce_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let p = rng.random_range(1..4);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..p).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| r[0].signum() * 2.0 + rng.random_range(-1.0..1.0))
            .collect();
        let x = Matrix::from_rows(&rows, p).unwrap();
        let params = GbdtParams {
            eta: 1.0,
            max_depth: 1,
            n_estimators: 1,
            lambda: 0.0,
            gamma: 0.0,
            alpha: 0.0,
            subsample: 1.0,
        };
        let m = gbdt_fit(&x, &y, &params, Loss::Squared, &names(p), 0).unwrap();
        let got = m.predict(&x).unwrap();
        let want = oracles::best_stump(&rows, &y);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn training_rmse_never_increases() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rows: Vec<Vec<f64>> = (0..150)
        .map(|_| {
            (0..4)
                .map(|_| {
                    if rng.random::<f64>() < 0.2 {
                        f64::NAN
                    } else {
                        rng.random_range(0.0..1.0)
                    }
                })
                .collect()
        })
        .collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|r| 3.0 * r[0].max(0.0) - r[1].min(1.0) + rng.random::<f64>())
        .collect();
    let x = Matrix::from_rows(&rows, 4).unwrap();
    let params = GbdtParams {
        n_estimators: 60,
        max_depth: 3,
        eta: 0.3,
        gamma: 0.0,
        alpha: 0.0,
        ..Default::default()
    };
    let m = gbdt_fit(&x, &y, &params, Loss::Squared, &names(4), 1).unwrap();
    let rmse = |k: usize| {
        (rows
            .iter()
            .zip(&y)
            .map(|(r, t)| (m.margin_with_trees(r, k) - t).powi(2))
            .sum::<f64>()
            / y.len() as f64)
            .sqrt()
    };
    let curve: Vec<f64> = (0..=60).map(rmse).collect();
    for w in curve.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
    }
    assert!(curve[60] < 0.5 * curve[0]);
}

#[test]
fn separable_classes_reach_auc_one() {
    let rows: Vec<Vec<f64>> = (0..60)
        .map(|i| vec![i as f64, ((i * 7) % 13) as f64])
        .collect();
    let y: Vec<f64> = (0..60).map(|i| if i >= 30 { 1.0 } else { 0.0 }).collect();
    let x = Matrix::from_rows(&rows, 2).unwrap();
    let m = gbdt_fit(&x, &y, &GbdtParams::default(), Loss::Logistic, &names(2), 0).unwrap();
    assert_eq!(roc_auc(&m.predict(&x).unwrap(), &y).unwrap(), 1.0);
}

#[test]
fn leaf_weight_matches_numeric_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for _ in 0..1000 {
        let g = rng.random_range(-100.0..100.0);
        let h = rng.random_range(0.0..50.0);
        let lambda = rng.random_range(0.0..20.0);
        let alpha = rng.random_range(0.0..30.0);
        if h + lambda < 1e-3 {
            continue;
        }
        let w = leaf_weight(g, h, lambda, alpha);
        let want = oracles::leaf_weight_numeric(g, h, lambda, alpha);
        assert!(
            (w - want).abs() < 1e-6,
            "g={g} h={h} l={lambda} a={alpha}: {w} vs {want}"
        );
    }
}
