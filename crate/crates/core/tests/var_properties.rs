use chrono::{Duration, NaiveDate};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use varcast::benchmarks::fit_ar_lasso;
use varcast::lasso::SolverOptions;
use varcast::panel::TimeSeriesPanel;
use varcast::preprocess::{preprocess_panel_fast, SmoothingConfig};
use varcast::synth::{generate, SyntheticVarSpec};
use varcast::varmodel::*;

fn day0() -> NaiveDate {
    NaiveDate::from_ymd_opt(2023, 1, 1).unwrap()
}

fn window() -> (NaiveDate, NaiveDate) {
    (day0(), day0())
}

fn names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("S{i}")).collect()
}

fn simulate(phi: Vec<Vec<Vec<f64>>>, sigma: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let k = phi[0].len();
    generate(&SyntheticVarSpec {
        intercept: vec![0.0; k],
        lag_matrices: phi,
        noise_cov: SyntheticVarSpec::isotropic_noise(k, sigma),
        n,
        seed,
        burn_in: 100,
        initial: None,
    })
    .unwrap()
}

fn tight() -> SolverOptions {
    SolverOptions {
        tol: 1e-12,
        max_iter: 100_000,
    }
}

#[test]
fn lambda_max_gives_intercept_only_forecasts() {
    let y = simulate(vec![vec![vec![0.5, 0.0], vec![0.3, 0.4]]], 1.0, 80, 3);
    let spec = VarSpec {
        p: 3,
        lambda_policy: LambdaPolicy::AtMax,
        ..VarSpec::default()
    };
    let fit = fit_var_differenced(&y, &names(2), window(), &spec).unwrap();
    assert!(fit.lag_matrices.iter().flatten().flatten().all(|&v| v == 0.0));
    let f = forecast_two_step(&fit, &y, &[0.0, 0.0], RefitPolicy::Reuse).unwrap();
    assert_eq!(f.step1_diff, fit.intercept);
    assert_eq!(f.step2_diff, fit.intercept);
}

#[test]
fn residual_covariance_is_symmetric_psd() {
    let y = simulate(vec![vec![vec![0.5, 0.0, 0.1], vec![0.3, 0.4, 0.0], vec![0.0, 0.0, 0.2]]], 1.0, 120, 9);
    let fit = fit_var_differenced(&y, &names(3), window(), &VarSpec::with_lag(2)).unwrap();
    let m = DMatrix::from_fn(3, 3, |i, j| fit.residual_cov[i][j]);
    assert_eq!(m, m.transpose());
    assert!(m.symmetric_eigen().eigenvalues.iter().all(|&e| e >= -1e-12));
}

#[test]
fn unpenalized_fit_recovers_coefficients_at_large_n() {
    let truth = [[0.5, 0.0], [0.3, 0.4]];
    let y = simulate(vec![truth.iter().map(|r| r.to_vec()).collect()], 1.0, 10_000, 21);
    let spec = VarSpec {
        p: 1,
        lambda_policy: LambdaPolicy::Fixed { lambda: 0.0 },
        solver: tight(),
        ..VarSpec::default()
    };
    let fit = fit_var_differenced(&y, &names(2), window(), &spec).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            let est = fit.lag_matrices[0][i][j];
            assert!((est - truth[i][j]).abs() < 0.05, "Φ[{i}][{j}] = {est}");
        }
    }
}

#[test]
fn unpenalized_ar_matches_least_squares_forecast() {
    let y = simulate(vec![vec![vec![0.6]], vec![vec![-0.2]]], 1.0, 200, 5).remove(0);
    let p = 2;
    let spec = VarSpec {
        p,
        lambda_policy: LambdaPolicy::Fixed { lambda: 0.0 },
        solver: tight(),
        ..VarSpec::default()
    };
    let fit = fit_ar_lasso("A", &y, window(), &spec).unwrap();
    let (_, _, level) = fit.forecast_two_step(&y, 50.0).unwrap();

    // Normal equations on [1, y_{t-1}, y_{t-2}].
    let rows = y.len() - p;
    let x = DMatrix::from_fn(rows, p + 1, |r, c| if c == 0 { 1.0 } else { y[r + p - c] });
    let t = DVector::from_fn(rows, |r, _| y[r + p]);
    let beta = (x.transpose() * &x).cholesky().unwrap().solve(&(x.transpose() * t));
    let n = y.len();
    let d1 = beta[0] + beta[1] * y[n - 1] + beta[2] * y[n - 2];
    let d2 = beta[0] + beta[1] * d1 + beta[2] * y[n - 1];
    assert!((level - (50.0 + d1 + d2)).abs() < 1e-6, "{level} vs {}", 50.0 + d1 + d2);
}

#[test]
fn null_model_yields_mostly_zero_lags() {
    let (mut zeros, mut total) = (0usize, 0usize);
    for seed in 0..20 {
        let y = simulate(vec![vec![vec![0.0; 2]; 2]], 1.0, 150, 100 + seed);
        let fit = fit_var_differenced(&y, &names(2), window(), &VarSpec::with_lag(2)).unwrap();
        for v in fit.lag_matrices.iter().flatten().flatten() {
            total += 1;
            zeros += usize::from(*v == 0.0);
        }
    }
    assert!(zeros as f64 >= 0.9 * total as f64, "{zeros}/{total} zero");
}

#[test]
fn white_noise_ar_is_all_zero() {
    let reps = 20;
    let mut all_zero = 0;
    for seed in 0..reps {
        let y = simulate(vec![vec![vec![0.0]]], 1.0, 200, 300 + seed).remove(0);
        let fit = fit_ar_lasso("A", &y, window(), &VarSpec::with_lag(5)).unwrap();
        all_zero += usize::from(fit.lag_coefficients.iter().all(|&v| v == 0.0));
    }
    assert!(all_zero as f64 >= 0.9 * reps as f64, "{all_zero}/{reps}");
}

#[test]
fn refit_policy_extends_training_window() {
    let y = simulate(vec![vec![vec![0.4, 0.0], vec![0.2, 0.3]]], 1.0, 60, 8);
    let spec = VarSpec::with_lag(2);
    let fit = fit_var_differenced(&y, &names(2), window(), &spec).unwrap();
    let anchors = [10.0, 20.0];
    let reuse = forecast_two_step(&fit, &y, &anchors, RefitPolicy::Reuse).unwrap();
    let refit = forecast_two_step(&fit, &y, &anchors, RefitPolicy::Refit { history: &y, spec: &spec }).unwrap();
    assert_eq!(reuse.step1_diff, refit.step1_diff);
    assert!(refit.refit_lambda.is_some());
    // Refitting on the exact original data reproduces the original model.
    let same = fit_var_differenced(&y, &names(2), window(), &spec).unwrap();
    assert_eq!(same, fit);
}

#[test]
fn fit_serializes_with_explicit_indexing() {
    let y = simulate(vec![vec![vec![0.5, 0.0], vec![0.3, 0.4]]], 0.1, 200, 1);
    let fit = fit_var_differenced(&y, &names(2), window(), &VarSpec::with_lag(1)).unwrap();
    let json = serde_json::to_value(&fit).unwrap();
    assert_eq!(json["lag_matrices"].as_array().unwrap().len(), 1);
    assert!(json["residual_cov"].is_array() && json["train_window"].is_array());
    let back: VarLassoFit = serde_json::from_value(json).unwrap();
    assert_eq!(back, fit);
    let entries = fit.lag_entries();
    assert!(entries.iter().any(|e| e.lag == 1 && e.from == "S0" && e.to == "S1"));
    assert!(entries.iter().all(|e| !(e.from == "S1" && e.to == "S0")));
}

fn counts_panel(values: Vec<Vec<u64>>) -> TimeSeriesPanel {
    let n = values[0].len();
    let weeks = (0..n).map(|t| day0() + Duration::days(7 * t as i64)).collect();
    TimeSeriesPanel::new(names(values.len()), weeks, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn coefficient_vector_round_trip(k in 1usize..4, p in 1usize..4, seed in 0u64..1000) {
        let d = k * (1 + k * p);
        let beta: Vec<f64> = (0..d).map(|i| ((i as u64 * 7919 + seed) % 101) as f64 / 10.0 - 5.0).collect();
        let mut fit = VarLassoFit {
            jurisdictions: names(k),
            intercept: vec![0.0; k],
            lag_matrices: vec![vec![vec![0.0; k]; k]; p],
            lambda: 0.0,
            equation_lambdas: vec![0.0; k],
            residual_cov: vec![vec![0.0; k]; k],
            train_window: window(),
            diagnostics: FitDiagnostics::default(),
        };
        fit.set_coefficient_vector(&beta).unwrap();
        prop_assert_eq!(fit.coefficient_vector(), beta);
    }

    #[test]
    fn level_shift_moves_only_that_series(kappa in 0u64..500, which in 0usize..2, seed in 0u64..50) {
        let y = simulate(vec![vec![vec![0.5, 0.0], vec![0.3, 0.4]]], 3.0, 60, seed);
        let base: Vec<Vec<u64>> = y
            .iter()
            .map(|r| {
                let mut level = 100.0;
                r.iter().map(|d| { level += d; level.max(0.0).round() as u64 }).collect()
            })
            .collect();
        let mut shifted = base.clone();
        for v in &mut shifted[which] {
            *v += kappa;
        }
        let spec = VarSpec { p: 2, lambda_policy: LambdaPolicy::Fixed { lambda: 5.0 }, ..VarSpec::default() };
        let cfg = SmoothingConfig::new(4).unwrap();
        let run = |values: Vec<Vec<u64>>| {
            let prep = preprocess_panel_fast(&counts_panel(values), cfg).unwrap();
            let fit = fit_var_lasso(&prep, &spec).unwrap();
            forecast_from_panel(&fit, &prep, RefitMode::Reuse, &spec).unwrap()
        };
        let a = run(base);
        let b = run(shifted);
        for k in 0..2 {
            prop_assert!((a.step1_diff[k] - b.step1_diff[k]).abs() < 1e-6);
            prop_assert!((a.step2_diff[k] - b.step2_diff[k]).abs() < 1e-6);
            let expect = if k == which { kappa as f64 } else { 0.0 };
            prop_assert!((b.level2[k] - a.level2[k] - expect).abs() < 1e-6);
        }
    }
}
