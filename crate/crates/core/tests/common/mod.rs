#![allow(dead_code)]

use chrono::{Duration, NaiveDate};
use varcast::panel::TimeSeriesPanel;
use varcast::synth::{generate, to_count_panel, CountTransform, SyntheticVarSpec};

pub fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2023, 1, 1).unwrap()
}

pub fn week(i: usize) -> NaiveDate {
    start() + Duration::days(7 * i as i64)
}

/// Integrated three-series VAR(1) rounded to counts around level 200.
pub fn count_panel(n: usize, seed: u64) -> TimeSeriesPanel {
    let diffs = generate(&SyntheticVarSpec {
        intercept: vec![0.0; 3],
        lag_matrices: vec![vec![vec![0.5, 0.0, 0.0], vec![0.3, 0.4, 0.0], vec![0.0, 0.2, 0.3]]],
        noise_cov: SyntheticVarSpec::isotropic_noise(3, 4.0),
        n,
        seed,
        burn_in: 50,
        initial: None,
    })
    .unwrap();
    let levels: Vec<Vec<f64>> = diffs
        .iter()
        .map(|d| {
            let mut acc = 200.0;
            d.iter().map(|x| { acc += x; acc }).collect()
        })
        .collect();
    let names = ["North", "South", "West"].map(String::from).to_vec();
    to_count_panel(&levels, &names, start(), CountTransform::Round, seed).unwrap()
}
