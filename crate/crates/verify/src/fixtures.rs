use chrono::{Duration, NaiveDate};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use varcast::panel::TimeSeriesPanel;
use varcast::synth::{generate, to_count_panel, CountTransform, SyntheticVarSpec};

pub fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2023, 1, 1).unwrap()
}

pub fn week(i: usize) -> NaiveDate {
    start() + Duration::days(7 * i as i64)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub struct LassoCase {
    pub design: DMatrix<f64>,
    pub response: Vec<f64>,
    pub penalize: Vec<bool>,
}

/// Gaussian design with an unpenalized leading column of ones, a sparse true
/// coefficient vector and Gaussian noise. With `full_rank` the row count
/// exceeds the column count by at least five.
pub fn random_lasso_case(rng: &mut ChaCha8Rng, full_rank: bool) -> LassoCase {
    let d = rng.random_range(2..=20);
    let n = if full_rank {
        rng.random_range((d + 5).min(50)..=50)
    } else {
        rng.random_range(5..=50)
    };
    let mut design = DMatrix::from_fn(n, d, |_, _| 0.0);
    for i in 0..n {
        design[(i, 0)] = 1.0;
        for j in 1..d {
            design[(i, j)] = normal(rng) * rng.random_range(0.5..3.0);
        }
    }
    let beta: Vec<f64> = (0..d)
        .map(|_| if rng.random_bool(0.4) { normal(rng) * 2.0 } else { 0.0 })
        .collect();
    let response = (0..n)
        .map(|i| (0..d).map(|j| design[(i, j)] * beta[j]).sum::<f64>() + normal(rng))
        .collect();
    let mut penalize = vec![true; d];
    penalize[0] = false;
    LassoCase { design, response, penalize }
}

fn var_process(lag_matrices: Vec<Vec<Vec<f64>>>, intercept: Vec<f64>, sigma: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let k = intercept.len();
    generate(&SyntheticVarSpec {
        intercept,
        lag_matrices,
        noise_cov: SyntheticVarSpec::isotropic_noise(k, sigma),
        n,
        seed,
        burn_in: 200,
        initial: None,
    })
    .expect("fixture process is stationary")
}

/// Φ₁ used by the support-recovery check; entry (0, 1) is the only zero.
pub const SUPPORT_PHI: [[f64; 2]; 2] = [[0.5, 0.0], [0.3, 0.4]];

pub fn support_process(seed: u64) -> Vec<Vec<f64>> {
    let phi = SUPPORT_PHI.iter().map(|r| r.to_vec()).collect();
    var_process(vec![phi], vec![0.0; 2], 0.1, 400, seed)
}

pub fn ar1_process(phi: f64, sigma: f64, n: usize, seed: u64) -> Vec<f64> {
    var_process(vec![vec![vec![phi]]], vec![0.0], sigma, n, seed).remove(0)
}

/// Two count series where B repeats A `shift` weeks later plus N(0, 0.25)
/// noise. A is a persistent AR(2) around 30.
pub fn shifted_pair(n: usize, shift: usize, seed: u64) -> TimeSeriesPanel {
    let (p1, p2) = (1.5, -0.6);
    let a = var_process(
        vec![vec![vec![p1]], vec![vec![p2]]],
        vec![30.0 * (1.0 - p1 - p2)],
        2.0,
        n + shift,
        seed,
    )
    .remove(0);
    let mut r = rng(seed ^ 0xABCD);
    let count = |v: f64| v.max(0.0).round() as u64;
    let series_a = a[shift..].iter().map(|&v| count(v)).collect();
    let series_b = (0..n).map(|t| count(a[t] + 0.5 * normal(&mut r))).collect();
    let weeks = (0..n).map(week).collect();
    TimeSeriesPanel::new(vec!["A".into(), "B".into()], weeks, vec![series_a, series_b]).unwrap()
}

/// Integrated Gaussian VAR(1) with σ = 10 around a high level, so rounding
/// to counts and the zero floor are negligible.
pub fn integrated_gaussian(phi: [[f64; 2]; 2], n: usize, seed: u64) -> TimeSeriesPanel {
    let lag = vec![phi.iter().map(|r| r.to_vec()).collect()];
    let diffs = var_process(lag, vec![0.0; 2], 10.0, n, seed);
    let levels: Vec<Vec<f64>> = diffs
        .iter()
        .map(|d| {
            let mut acc = 100_000.0;
            d.iter()
                .map(|x| {
                    acc += x;
                    acc
                })
                .collect()
        })
        .collect();
    to_count_panel(&levels, &["X".to_string(), "Y".to_string()], start(), CountTransform::Round, seed).unwrap()
}

/// Three-series panel for leakage and determinism checks.
pub fn small_panel(n: usize, seed: u64) -> TimeSeriesPanel {
    let lag = vec![vec![vec![0.5, 0.0, 0.0], vec![0.3, 0.4, 0.0], vec![0.0, 0.2, 0.3]]];
    let diffs = var_process(lag, vec![0.0; 3], 4.0, n, seed);
    let levels: Vec<Vec<f64>> = diffs
        .iter()
        .map(|d| {
            let mut acc = 200.0;
            d.iter()
                .map(|x| {
                    acc += x;
                    acc
                })
                .collect()
        })
        .collect();
    let names = ["North", "South", "West"].map(String::from);
    to_count_panel(&levels, &names, start(), CountTransform::Round, seed).unwrap()
}

/// Published annual totals for the eight jurisdictions, (name, 2023, 2024).
pub const ANNUAL_TOTALS: [(&str, u64, u64); 8] = [
    ("New York City", 198, 392),
    ("Texas", 187, 283),
    ("Los Angeles", 120, 202),
    ("Florida", 109, 178),
    ("Illinois", 145, 77),
    ("Georgia", 90, 70),
    ("San Diego", 59, 77),
    ("Washington", 81, 47),
];

/// First panel jurisdiction whose name contains `needle`, ignoring case.
pub fn find_jurisdiction<'a>(names: &'a [String], needle: &str) -> Option<&'a str> {
    let needle = needle.to_lowercase();
    names.iter().find(|n| n.to_lowercase().contains(&needle)).map(String::as_str)
}
