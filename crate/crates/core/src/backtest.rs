//! Rolling-origin backtest: for every target week w, train on data up to
//! w − 2, forecast two weeks ahead with each model, and score against the
//! observation at w.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{ar_two_step_interval, fit_ar_lasso, naive_forecast};
use crate::error::{Error, Result};
use crate::evaluate::{Metric, MetricReport, ScoreTarget, ScoredForecast};
use crate::panel::TimeSeriesPanel;
use crate::preprocess::{preprocess_panel_fast, smooth_centered_ma, PreprocessedPanel, SmoothingConfig};
use crate::varmodel::{
    fit_var_lasso, forecast_from_panel, prediction_interval_two_step, ForecastSet, LambdaPolicy, ModelTag,
    RefitMode, VarLassoFit, VarSpec,
};

/// Weeks between the last training week and the target week.
pub const HORIZON_WEEKS: i64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestPlan {
    pub first_target_week: NaiveDate,
    pub last_target_week: NaiveDate,
    pub models: Vec<ModelTag>,
    /// Smoothing window for [`run_backtest`].
    pub window: usize,
    /// Windows compared by [`sensitivity_sweep`].
    #[serde(default)]
    pub sweep_windows: Vec<usize>,
    pub var_spec: VarSpec,
    pub ar_spec: VarSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub refit_mode: RefitMode,
    #[serde(default)]
    pub intervals: bool,
    #[serde(default)]
    pub score_target: ScoreTarget,
    #[serde(default)]
    pub clamp_nonneg: bool,
    /// Keep the VAR λ chosen at the first target week for all later weeks.
    #[serde(default)]
    pub freeze_lambda: bool,
}

impl BacktestPlan {
    pub fn new(first_target_week: NaiveDate, last_target_week: NaiveDate) -> Self {
        Self {
            first_target_week,
            last_target_week,
            models: ModelTag::ALL.to_vec(),
            window: 4,
            sweep_windows: vec![1, 2, 3, 4, 5],
            var_spec: VarSpec::default(),
            ar_spec: VarSpec::default(),
            seed: 0,
            refit_mode: RefitMode::Reuse,
            intervals: false,
            score_target: ScoreTarget::Smoothed,
            clamp_nonneg: false,
            freeze_lambda: false,
        }
    }

    /// Target weeks in order; both ends must lie on the panel's weekly grid.
    pub fn target_weeks(&self, panel: &TimeSeriesPanel) -> Result<Vec<NaiveDate>> {
        let anchor = panel.first_week();
        for d in [self.first_target_week, self.last_target_week] {
            if (d - anchor).num_days().rem_euclid(7) != 0 {
                return Err(Error::OffGrid { date: d, anchor });
            }
        }
        if self.last_target_week < self.first_target_week {
            return Err(Error::InvalidArgument(format!(
                "last target week {} precedes first {}",
                self.last_target_week, self.first_target_week
            )));
        }
        let n = (self.last_target_week - self.first_target_week).num_days() / 7 + 1;
        Ok((0..n).map(|i| self.first_target_week + Duration::days(7 * i)).collect())
    }

    fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::InvalidArgument("no models selected".into()));
        }
        SmoothingConfig::new(self.window)?;
        if self.var_spec.p == 0 || self.ar_spec.p == 0 {
            return Err(Error::InvalidArgument("lag order must be >= 1".into()));
        }
        Ok(())
    }

    fn has(&self, m: ModelTag) -> bool {
        self.models.contains(&m)
    }
}

/// One model's forecast for one jurisdiction and target week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub model: ModelTag,
    pub jurisdiction: String,
    pub target_week: NaiveDate,
    pub point: f64,
    pub lower95: Option<f64>,
    pub upper95: Option<f64>,
    /// Absent when the panel ends before the target week.
    pub observed: Option<f64>,
    pub slope_weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub target_week: NaiveDate,
    pub model: ModelTag,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jurisdiction: Option<String>,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refit_lambda: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub design_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub target_week: NaiveDate,
    pub model: Option<ModelTag>,
    pub jurisdiction: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct BacktestResult {
    pub target_weeks: Vec<NaiveDate>,
    pub forecasts: Vec<ForecastRecord>,
    pub report: MetricReport,
    /// VAR fits by target week, in week order.
    pub var_fits: Vec<(NaiveDate, VarLassoFit)>,
    pub fit_log: Vec<FitRecord>,
    pub skips: Vec<SkipEntry>,
}

impl BacktestResult {
    /// Forecasts grouped per (week, model) in run order.
    pub fn forecast_sets(&self) -> Vec<ForecastSet> {
        let mut out: Vec<ForecastSet> = Vec::new();
        for r in &self.forecasts {
            let entry = crate::varmodel::ForecastEntry {
                jurisdiction: r.jurisdiction.clone(),
                point: r.point,
                lower95: r.lower95,
                upper95: r.upper95,
            };
            match out.last_mut() {
                Some(s) if s.model == r.model && s.target_week == Some(r.target_week) => s.entries.push(entry),
                _ => out.push(ForecastSet {
                    model: r.model,
                    target_week: Some(r.target_week),
                    entries: vec![entry],
                }),
            }
        }
        out
    }

    /// Forecasts of one model that have an observation to score against.
    pub fn scored(&self, model: ModelTag) -> Vec<ScoredForecast> {
        self.forecasts
            .iter()
            .filter(|r| r.model == model)
            .filter_map(|r| {
                Some(ScoredForecast {
                    jurisdiction: r.jurisdiction.clone(),
                    target_week: r.target_week,
                    observed: r.observed?,
                    predicted: r.point,
                    slope_weight: r.slope_weight?,
                    lower95: r.lower95,
                    upper95: r.upper95,
                })
            })
            .collect()
    }

    /// Columns: model, jurisdiction, target_week, point, lower95, upper95, observed.
    pub fn write_forecasts_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["model", "jurisdiction", "target_week", "point", "lower95", "upper95", "observed"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.forecasts {
            w.write_record([
                r.model.as_str().to_string(),
                r.jurisdiction.clone(),
                r.target_week.to_string(),
                r.point.to_string(),
                opt(r.lower95),
                opt(r.upper95),
                opt(r.observed),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn manifest(&self, plan: &BacktestPlan) -> RunManifest {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            plan: plan.clone(),
            seed: plan.seed,
            horizon_weeks: HORIZON_WEEKS,
            target_weeks: self.target_weeks.clone(),
            n_forecasts: self.forecasts.len(),
            fits: self.fit_log.clone(),
            skips: self.skips.clone(),
        }
    }
}

/// Run description written next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub plan: BacktestPlan,
    pub seed: u64,
    pub horizon_weeks: i64,
    pub target_weeks: Vec<NaiveDate>,
    pub n_forecasts: usize,
    pub fits: Vec<FitRecord>,
    pub skips: Vec<SkipEntry>,
}

#[derive(Default)]
struct WeekOutcome {
    forecasts: Vec<ForecastRecord>,
    var_fit: Option<VarLassoFit>,
    fit_log: Vec<FitRecord>,
    skips: Vec<SkipEntry>,
}

/// Observed values and slope weights on the full panel.
struct Truth {
    targets: Vec<Vec<f64>>,
    smoothed: Vec<Vec<f64>>,
}

impl Truth {
    fn new(panel: &TimeSeriesPanel, plan: &BacktestPlan) -> Result<Self> {
        let mut targets = Vec::new();
        let mut smoothed = Vec::new();
        for k in 0..panel.n_series() {
            let raw = panel.levels(k);
            let s = smooth_centered_ma(&raw, plan.window)?;
            targets.push(match plan.score_target {
                ScoreTarget::Smoothed => s.clone(),
                ScoreTarget::Raw => raw,
            });
            smoothed.push(s);
        }
        Ok(Self { targets, smoothed })
    }

    fn at(&self, k: usize, idx: Option<usize>) -> (Option<f64>, Option<f64>) {
        match idx {
            Some(i) if i >= 1 => (
                Some(self.targets[k][i]),
                Some((self.smoothed[k][i] - self.smoothed[k][i - 1]).max(0.0)),
            ),
            Some(i) => (Some(self.targets[k][i]), None),
            None => (None, None),
        }
    }
}

fn skip(week: NaiveDate, model: Option<ModelTag>, jurisdiction: Option<&str>, reason: impl ToString) -> SkipEntry {
    SkipEntry {
        target_week: week,
        model,
        jurisdiction: jurisdiction.map(str::to_string),
        reason: reason.to_string(),
    }
}

fn run_week(
    panel: &TimeSeriesPanel,
    plan: &BacktestPlan,
    var_spec: &VarSpec,
    truth: &Truth,
    week: NaiveDate,
) -> WeekOutcome {
    let mut out = WeekOutcome::default();
    let cutoff = week - Duration::days(7 * HORIZON_WEEKS);
    let train = match panel.slice_until(cutoff) {
        Ok(p) => p,
        Err(e) => {
            out.skips.push(skip(week, None, None, format!("no training data up to {cutoff}: {e}")));
            return out;
        }
    };
    if train.last_week() != cutoff {
        out.skips.push(skip(week, None, None, format!("panel ends before {cutoff}")));
        return out;
    }
    let prep = match SmoothingConfig::new(plan.window).and_then(|c| preprocess_panel_fast(&train, c)) {
        Ok(p) => p,
        Err(e) => {
            out.skips.push(skip(week, None, None, e));
            return out;
        }
    };
    let target_idx = panel.week_index(week);
    let names = &prep.jurisdictions;
    let emit = |out: &mut WeekOutcome, model: ModelTag, k: usize, point: f64, bounds: Option<(f64, f64)>| {
        let (observed, slope_weight) = truth.at(k, target_idx);
        let mut r = ForecastRecord {
            model,
            jurisdiction: names[k].clone(),
            target_week: week,
            point,
            lower95: bounds.map(|b| b.0),
            upper95: bounds.map(|b| b.1),
            observed,
            slope_weight,
        };
        if plan.clamp_nonneg {
            r.point = r.point.max(0.0);
            r.lower95 = r.lower95.map(|v| v.max(0.0));
            r.upper95 = r.upper95.map(|v| v.max(0.0));
        }
        out.forecasts.push(r);
    };

    for &model in &ModelTag::ALL {
        if !plan.has(model) {
            continue;
        }
        match model {
            ModelTag::VarLasso => match var_week(&prep, plan, var_spec, week) {
                Ok((fit, set, refit_lambda)) => {
                    for (k, e) in set.entries.iter().enumerate() {
                        let bounds = e.lower95.zip(e.upper95);
                        emit(&mut out, model, k, e.point, bounds);
                    }
                    out.fit_log.push(FitRecord {
                        target_week: week,
                        model,
                        jurisdiction: None,
                        lambda: fit.lambda,
                        refit_lambda,
                        iterations: fit.diagnostics.iterations,
                        converged: fit.diagnostics.converged,
                        design_rows: fit.diagnostics.design_rows,
                    });
                    out.var_fit = Some(fit);
                }
                Err(e) => out.skips.push(skip(week, Some(model), None, e)),
            },
            ModelTag::ArLasso => {
                for k in 0..prep.n_series() {
                    let name = &prep.jurisdictions[k];
                    let window = (prep.week_starts[0], cutoff);
                    let res = fit_ar_lasso(name, &prep.differenced[k], window, &plan.ar_spec).and_then(|fit| {
                        let (_, _, level) = fit.forecast_two_step(&prep.differenced[k], prep.anchors[k])?;
                        Ok((fit, level))
                    });
                    match res {
                        Ok((fit, level)) => {
                            let bounds = plan.intervals.then(|| {
                                let (v1, v2) = ar_two_step_interval(&fit);
                                let half = crate::varmodel::Z_95 * (v1 + v2).sqrt();
                                (level - half, level + half)
                            });
                            emit(&mut out, model, k, level, bounds);
                            out.fit_log.push(FitRecord {
                                target_week: week,
                                model,
                                jurisdiction: Some(name.clone()),
                                lambda: fit.lambda,
                                refit_lambda: None,
                                iterations: fit.diagnostics.iterations,
                                converged: fit.diagnostics.converged,
                                design_rows: fit.diagnostics.design_rows,
                            });
                        }
                        Err(e) => out.skips.push(skip(week, Some(model), Some(name), e)),
                    }
                }
            }
            ModelTag::Naive => {
                for k in 0..prep.n_series() {
                    match naive_forecast(&prep.smoothed[k]) {
                        Ok(v) => emit(&mut out, model, k, v, None),
                        Err(e) => out.skips.push(skip(week, Some(model), Some(&prep.jurisdictions[k]), e)),
                    }
                }
            }
        }
    }
    out
}

fn var_week(
    prep: &PreprocessedPanel,
    plan: &BacktestPlan,
    spec: &VarSpec,
    week: NaiveDate,
) -> Result<(VarLassoFit, ForecastSet, Option<f64>)> {
    let fit = fit_var_lasso(prep, spec)?;
    let f = forecast_from_panel(&fit, prep, plan.refit_mode, spec)?;
    let set = ForecastSet::points(ModelTag::VarLasso, Some(week), &prep.jurisdictions, &f.level2);
    let set = if plan.intervals {
        prediction_interval_two_step(&set, &f.one_step_var, &f.conditional_second_var)?
    } else {
        set
    };
    Ok((fit, set, f.refit_lambda))
}

/// Runs every target week of `plan` against `panel`.
///
/// Weeks are processed in parallel and merged in week order; weeks or
/// models that cannot be fitted are recorded in the skip log.
pub fn run_backtest(panel: &TimeSeriesPanel, plan: &BacktestPlan) -> Result<BacktestResult> {
    plan.validate()?;
    let weeks = plan.target_weeks(panel)?;
    let truth = Truth::new(panel, plan)?;

    let mut var_spec = plan.var_spec;
    let mut outcomes: Vec<WeekOutcome> = Vec::with_capacity(weeks.len());
    let mut rest = &weeks[..];
    if plan.freeze_lambda && plan.has(ModelTag::VarLasso) {
        // Walk forward until a VAR fit succeeds, then pin its λ.
        while let Some((&week, tail)) = rest.split_first() {
            let o = run_week(panel, plan, &var_spec, &truth, week);
            let lambda = o.var_fit.as_ref().map(|f| f.lambda);
            outcomes.push(o);
            rest = tail;
            if let Some(lambda) = lambda {
                var_spec.lambda_policy = LambdaPolicy::Fixed { lambda };
                break;
            }
        }
    }
    let tail: Vec<WeekOutcome> = rest
        .par_iter()
        .map(|&w| run_week(panel, plan, &var_spec, &truth, w))
        .collect();
    outcomes.extend(tail);

    let mut forecasts = Vec::new();
    let mut var_fits = Vec::new();
    let mut fit_log = Vec::new();
    let mut skips = Vec::new();
    for (week, o) in weeks.iter().zip(outcomes) {
        forecasts.extend(o.forecasts);
        if let Some(f) = o.var_fit {
            var_fits.push((*week, f));
        }
        fit_log.extend(o.fit_log);
        skips.extend(o.skips);
    }
    let mut result = BacktestResult {
        target_weeks: weeks,
        forecasts,
        report: MetricReport::build(&BTreeMap::new(), panel.jurisdictions()),
        var_fits,
        fit_log,
        skips,
    };
    let scored: BTreeMap<ModelTag, Vec<ScoredForecast>> =
        plan.models.iter().map(|&m| (m, result.scored(m))).collect();
    result.report = MetricReport::build(&scored, panel.jurisdictions());
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub window: usize,
    pub model: ModelTag,
    pub slope_rmse: Option<f64>,
    pub slope_mae: Option<f64>,
    pub slope_bias: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// |windows| × |models| rows of pooled metrics, window-major.
    pub rows: Vec<SweepRow>,
    pub reports: Vec<(usize, MetricReport)>,
    pub skips: Vec<(usize, SkipEntry)>,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["window", "model", "slope_rmse", "slope_mae", "slope_bias", "n"])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.window.to_string(),
                r.model.as_str().to_string(),
                opt(r.slope_rmse),
                opt(r.slope_mae),
                opt(r.slope_bias),
                r.n.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Cell with the lowest pooled RMSE.
    pub fn best_rmse(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.slope_rmse.is_some())
            .min_by(|a, b| a.slope_rmse.unwrap().total_cmp(&b.slope_rmse.unwrap()))
    }
}

/// Repeats the backtest once per smoothing window in `plan.sweep_windows`.
pub fn sensitivity_sweep(panel: &TimeSeriesPanel, plan: &BacktestPlan) -> Result<SweepResult> {
    if plan.sweep_windows.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one window".into()));
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut skips = Vec::new();
    for &window in &plan.sweep_windows {
        let run = run_backtest(panel, &BacktestPlan { window, ..plan.clone() })?;
        for &model in &plan.models {
            let get = |m| run.report.metric(model, crate::evaluate::POOLED_SCOPE, m);
            rows.push(SweepRow {
                window,
                model,
                slope_rmse: get(Metric::Rmse),
                slope_mae: get(Metric::Mae),
                slope_bias: get(Metric::Bias),
                n: run
                    .report
                    .get(model, crate::evaluate::POOLED_SCOPE)
                    .map_or(0, |e| e.n),
            });
        }
        skips.extend(run.skips.into_iter().map(|s| (window, s)));
        reports.push((window, run.report));
    }
    Ok(SweepResult { rows, reports, skips })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRank {
    pub source: String,
    pub lag: usize,
    /// Mean of |Φ_lag[target][source]| over fits.
    pub mean_abs: f64,
    /// Mean of the signed coefficient over fits.
    pub mean_signed: f64,
}

/// Ranks (source, lag) pairs feeding `target` by mean absolute coefficient
/// across `fits`, keeping the `top_n` largest non-zero ones.
pub fn coefficient_summary(fits: &[VarLassoFit], target: &str, top_n: usize) -> Result<Vec<CoefficientRank>> {
    let first = fits
        .first()
        .ok_or_else(|| Error::InvalidArgument("coefficient summary needs at least one fit".into()))?;
    let names = &first.jurisdictions;
    let t = names
        .iter()
        .position(|n| n == target)
        .ok_or_else(|| Error::UnknownJurisdiction(target.to_string()))?;
    if fits.iter().any(|f| &f.jurisdictions != names || f.p() != first.p()) {
        return Err(Error::DimensionMismatch("fits differ in jurisdictions or lag order".into()));
    }
    let n = fits.len() as f64;
    let mut ranks = Vec::new();
    for l in 0..first.p() {
        for (j, source) in names.iter().enumerate() {
            let abs = fits.iter().map(|f| f.lag_matrices[l][t][j].abs()).sum::<f64>() / n;
            if abs > 0.0 {
                ranks.push(CoefficientRank {
                    source: source.clone(),
                    lag: l + 1,
                    mean_abs: abs,
                    mean_signed: fits.iter().map(|f| f.lag_matrices[l][t][j]).sum::<f64>() / n,
                });
            }
        }
    }
    ranks.sort_by(|a, b| b.mean_abs.total_cmp(&a.mean_abs));
    ranks.truncate(top_n);
    Ok(ranks)
}
