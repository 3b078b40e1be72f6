//! Shared fixtures for the benchmarks.

use triage_core::dataset::synth_generate;
use triage_core::{Matrix, SyntheticSpec};

/// Demo cohort of `n` patients: raw features, special-care labels and days.
pub fn demo_data(n: usize, seed: u64) -> (Matrix, Vec<f64>, Vec<f64>, Vec<String>) {
    let table = synth_generate(&SyntheticSpec::demo(n, seed)).expect("demo spec is valid");
    let labels = table.labels_f64().expect("demo has labels");
    let days = table.days_vec().expect("demo has days");
    (table.values().clone(), labels, days, table.feature_names())
}
