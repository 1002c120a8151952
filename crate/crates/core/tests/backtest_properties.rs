mod common;

use chrono::Duration;
use common::{count_panel, week};
use varcast::backtest::*;
use varcast::evaluate::{Metric, POOLED_SCOPE};
use varcast::varmodel::{ModelTag, VarSpec};

fn plan(first: usize, last: usize) -> BacktestPlan {
    let mut plan = BacktestPlan::new(week(first), week(last));
    plan.var_spec = VarSpec::with_lag(3);
    plan.ar_spec = VarSpec::with_lag(3);
    plan.intervals = true;
    plan
}

fn without_truth(mut records: Vec<ForecastRecord>) -> Vec<ForecastRecord> {
    for r in &mut records {
        r.observed = None;
        r.slope_weight = None;
    }
    records
}

#[test]
fn truncating_after_training_cutoff_changes_nothing() {
    let panel = count_panel(70, 4);
    for target in [40, 55, 69] {
        let p = plan(target, target);
        let full = run_backtest(&panel, &p).unwrap();
        let cutoff = week(target) - Duration::days(7 * HORIZON_WEEKS);
        let truncated = run_backtest(&panel.slice_until(cutoff).unwrap(), &p).unwrap();
        assert_eq!(full.forecasts.len(), 9);
        assert_eq!(without_truth(full.forecasts), without_truth(truncated.forecasts.clone()));
        assert!(truncated.forecasts.iter().all(|r| r.observed.is_none()));
        assert_eq!(full.var_fits, truncated.var_fits);
    }
}

#[test]
fn same_inputs_give_identical_results() {
    let panel = count_panel(70, 5);
    let p = plan(30, 69);
    let a = run_backtest(&panel, &p).unwrap();
    let b = run_backtest(&panel, &p).unwrap();
    assert_eq!(a.forecasts, b.forecasts);
    assert_eq!(a.var_fits, b.var_fits);
    assert_eq!(a.fit_log, b.fit_log);
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    a.write_forecasts_csv(&mut ca).unwrap();
    b.write_forecasts_csv(&mut cb).unwrap();
    assert_eq!(ca, cb);
    assert_eq!(a.report.to_json().to_string(), b.report.to_json().to_string());
}

#[test]
fn adding_a_model_leaves_others_untouched() {
    let panel = count_panel(60, 6);
    let mut only_var = plan(30, 59);
    only_var.models = vec![ModelTag::VarLasso];
    let all = run_backtest(&panel, &plan(30, 59)).unwrap();
    let var = run_backtest(&panel, &only_var).unwrap();
    let pick = |r: &BacktestResult| -> Vec<ForecastRecord> {
        r.forecasts.iter().filter(|f| f.model == ModelTag::VarLasso).cloned().collect()
    };
    assert_eq!(pick(&all), pick(&var));
    assert_eq!(
        all.report.get(ModelTag::VarLasso, POOLED_SCOPE),
        var.report.get(ModelTag::VarLasso, POOLED_SCOPE)
    );
    assert!(var.report.get(ModelTag::Naive, POOLED_SCOPE).is_none());
}

#[test]
fn every_target_week_is_forecast_or_logged() {
    let panel = count_panel(50, 7);
    // Early targets have too little history for the VAR.
    let r = run_backtest(&panel, &plan(4, 49)).unwrap();
    for &w in &r.target_weeks {
        for m in ModelTag::ALL {
            let forecasts = r.forecasts.iter().filter(|f| f.target_week == w && f.model == m).count();
            let skipped = r.skips.iter().any(|s| s.target_week == w && (s.model.is_none() || s.model == Some(m)));
            assert!(forecasts == 3 || skipped, "{w} {m}: {forecasts} forecasts, no skip entry");
        }
    }
    assert!(r.skips.iter().any(|s| s.model == Some(ModelTag::VarLasso)));
}

#[test]
fn sweep_shape_and_single_window_equivalence() {
    let panel = count_panel(60, 8);
    let p = plan(40, 59);
    let sweep = sensitivity_sweep(&panel, &p).unwrap();
    assert_eq!(sweep.rows.len(), 5 * 3);
    assert_eq!(sweep.rows.iter().map(|r| r.window).collect::<Vec<_>>()[..3], [1, 1, 1]);

    let mut single = p.clone();
    single.sweep_windows = vec![4];
    let one = sensitivity_sweep(&panel, &single).unwrap();
    let direct = run_backtest(&panel, &p).unwrap();
    for row in &one.rows {
        assert_eq!(row.slope_rmse, direct.report.metric(row.model, POOLED_SCOPE, Metric::Rmse));
        assert_eq!(row.slope_mae, direct.report.metric(row.model, POOLED_SCOPE, Metric::Mae));
        assert_eq!(row.slope_bias, direct.report.metric(row.model, POOLED_SCOPE, Metric::Bias));
    }
    let best = sweep.best_rmse().unwrap();
    assert!(sweep.rows.iter().all(|r| r.slope_rmse.is_none_or(|v| v >= best.slope_rmse.unwrap())));
}

#[test]
fn frozen_lambda_is_reused() {
    let panel = count_panel(60, 9);
    let mut p = plan(30, 59);
    p.freeze_lambda = true;
    let r = run_backtest(&panel, &p).unwrap();
    let lambdas: Vec<f64> = r.var_fits.iter().map(|(_, f)| f.lambda).collect();
    assert!(lambdas.len() > 2);
    assert!(lambdas.iter().all(|&l| l == lambdas[0]));
}

#[test]
fn forecasts_csv_has_one_row_per_record() {
    let panel = count_panel(50, 10);
    let r = run_backtest(&panel, &plan(40, 49)).unwrap();
    let mut buf = Vec::new();
    r.write_forecasts_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "model,jurisdiction,target_week,point,lower95,upper95,observed"
    );
    assert_eq!(lines.count(), r.forecasts.len());
}
