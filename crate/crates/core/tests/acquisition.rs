use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use triage_core::tune::{expected_improvement, Direction};

/// E[max(mu + sigma Z - best, 0)] by sampling.
fn ei_monte_carlo(mu: f64, sigma: f64, best: f64, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        total += (mu + sigma * z - best).max(0.0);
    }
    total / n as f64
}

#[test]
fn ei_at_incumbent_matches_sampling() {
    let mc = ei_monte_carlo(0.0, 1.0, 0.0, 10_000_000, 1);
    let ei = expected_improvement(0.0, 1.0, 0.0, Direction::Maximize);
    assert!((ei - mc).abs() < 1e-3, "{ei} vs {mc}");
    assert!((ei - 0.398_942_280_4).abs() < 1e-9);
}

#[test]
fn ei_closed_form_matches_sampling_elsewhere() {
    for (mu, sigma, best) in [(0.3, 0.5, 0.1), (-1.0, 2.0, 0.5), (1.0, 0.1, 1.2)] {
        let mc = ei_monte_carlo(mu, sigma, best, 2_000_000, 2);
        assert!((expected_improvement(mu, sigma, best, Direction::Maximize) - mc).abs() < 3e-3);
        // minimizing mirrors maximizing the negation
        let mirrored = expected_improvement(-mu, sigma, -best, Direction::Minimize);
        assert!(
            (mirrored - expected_improvement(mu, sigma, best, Direction::Maximize)).abs() < 1e-15
        );
    }
}

#[test]
fn ei_grows_with_uncertainty_and_is_never_negative() {
    let e: Vec<f64> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&s| expected_improvement(0.0, s, 0.0, Direction::Maximize))
        .collect();
    assert!(e[0] < e[1] && e[1] < e[2]);
    for mu in [-10.0, -1.0, 0.0, 1.0] {
        for s in [0.0, 1e-12, 0.1, 3.0] {
            assert!(expected_improvement(mu, s, 0.0, Direction::Maximize) >= 0.0);
        }
    }
}
