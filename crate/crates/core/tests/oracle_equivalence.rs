#[path = "support/oracles.rs"]
mod oracles;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use triage_core::eval::{isotonic_fit, roc_auc, CalibratorModel};
use triage_core::explain::{background_sample, TreeExplainer};
use triage_core::trees::{gbdt_fit, GbdtParams, Loss};
use triage_core::tune::{gp_fit, GpConfig};
use triage_core::Matrix;

#[test]
fn roc_auc_matches_pairwise_count_with_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for set in 0..200 {
        let n = rng.random_range(2..=200);
        // coarse grid forces ties
        let levels = if set % 2 == 0 { 5 } else { 1000 };
        let mut scores: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..levels) as f64 / levels as f64)
            .collect();
        let mut labels: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < 0.3 { 1.0 } else { 0.0 })
            .collect();
        labels[0] = 1.0;
        labels[1] = 0.0;
        if set % 7 == 0 {
            scores.iter_mut().for_each(|s| *s = 0.5);
        }
        let got = roc_auc(&scores, &labels).unwrap();
        let want = oracles::auc_pairwise(&scores, &labels);
        assert!((got - want).abs() <= 1e-12, "set {set}: {got} vs {want}");
    }
}

fn violating_sequences(max_len: usize, alphabet: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for len in 2..=max_len {
        let total = alphabet.pow(len as u32);
        for code in 0..total {
            let mut c = code;
            let seq: Vec<f64> = (0..len)
                .map(|_| {
                    let v = c % alphabet;
                    c /= alphabet;
                    v as f64
                })
                .collect();
            if seq.windows(2).any(|w| w[1] < w[0]) {
                out.push(seq);
            }
        }
    }
    out
}

#[test]
fn isotonic_matches_constrained_least_squares() {
    let seqs = violating_sequences(6, 4);
    assert!(seqs.len() > 4000);
    for y in &seqs {
        let x: Vec<f64> = (0..y.len()).map(|i| i as f64).collect();
        let CalibratorModel::Isotonic { y: fitted, .. } = isotonic_fit(&x, y).unwrap() else {
            unreachable!()
        };
        let want = oracles::isotonic_bruteforce(y);
        for (a, b) in fitted.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-9, "{y:?}: {fitted:?} vs {want:?}");
        }
    }
}

#[test]
fn isotonic_random_reals_match_oracle_and_keep_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let n = rng.random_range(2..=6);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let CalibratorModel::Isotonic { y: fitted, .. } = isotonic_fit(&x, &y).unwrap() else {
            unreachable!()
        };
        let want = oracles::isotonic_bruteforce(&y);
        for (a, b) in fitted.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-9);
        }
        assert!(fitted.windows(2).all(|w| w[0] <= w[1]));
        assert!((fitted.iter().sum::<f64>() - y.iter().sum::<f64>()).abs() < 1e-9);
    }
}

fn random_model(
    rng: &mut ChaCha8Rng,
    p: usize,
    trees: usize,
    depth: usize,
) -> (triage_core::GbdtModel, Matrix) {
    let n = 80;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..p)
                .map(|_| {
                    if rng.random::<f64>() < 0.15 {
                        f64::NAN
                    } else {
                        rng.random_range(0..6) as f64
                    }
                })
                .collect()
        })
        .collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().filter(|v| !v.is_nan()).sum::<f64>() + rng.random::<f64>())
        .collect();
    let x = Matrix::from_rows(&rows, p).unwrap();
    let names: Vec<String> = (0..p).map(|i| format!("f{i}")).collect();
    let params = GbdtParams {
        n_estimators: trees,
        max_depth: depth,
        lambda: 1.0,
        eta: 0.5,
        ..Default::default()
    };
    (
        gbdt_fit(&x, &y, &params, Loss::Squared, &names, rng.random()).unwrap(),
        x,
    )
}

#[test]
fn tree_shap_matches_subset_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..12 {
        let p = 2 + case % 9; // up to 10 features
        let (model, x) = random_model(&mut rng, p, 3, 1 + case % 5);
        // small backgrounds leave some nodes without cover
        let bg = background_sample(&x, if case % 3 == 0 { 5 } else { 40 }, case as u64);
        let ex = TreeExplainer::new(&model, &bg).unwrap();
        for r in (0..x.n_rows()).step_by(9) {
            let row = x.row(r);
            let a = ex.explain_row(&model, row).unwrap();
            let (base, phi) = oracles::shap_bruteforce(&model, &ex.covers, row);
            assert!((a.base_value - base).abs() < 1e-9);
            for (i, (g, w)) in a.values.iter().zip(&phi).enumerate() {
                assert!(
                    (g - w).abs() < 1e-9,
                    "case {case} row {r} feature {i}: {g} vs {w}"
                );
            }
        }
    }
}

#[test]
fn gp_posterior_matches_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let xs: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.random(), rng.random()]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (3.0 * x[0]).sin() + x[1]).collect();
        let gp = gp_fit(
            &xs,
            &ys,
            &GpConfig {
                fit_noise: false,
                ..Default::default()
            },
        )
        .unwrap();
        for _ in 0..10 {
            let q = vec![rng.random(), rng.random()];
            let (mu, sd) = gp.posterior(&q);
            let (m2, s2) = oracles::gp_dense(
                &xs,
                &ys,
                &gp.length_scales,
                gp.signal_variance,
                gp.noise_variance,
                &q,
            );
            assert!((mu - m2).abs() < 1e-8, "{mu} vs {m2}");
            assert!((sd * sd - s2 * s2).abs() < 1e-8);
        }
    }
}
