//! VAR(p)-Lasso on differenced series: design construction, fitting,
//! two-step recursive forecasts and prediction intervals.
//!
//! Design columns are ordered lag-major: column 0 is the intercept, column
//! `1 + (l-1)·K + j` holds series `j` at lag `l`.

use std::fmt;
use std::str::FromStr;

use chrono::{Duration, NaiveDate};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lasso::{self, cv_select_lambda, fit_lasso, LassoProblem, SolverOptions};
use crate::preprocess::PreprocessedPanel;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelTag {
    VarLasso,
    ArLasso,
    Naive,
}

impl ModelTag {
    pub const ALL: [ModelTag; 3] = [ModelTag::VarLasso, ModelTag::ArLasso, ModelTag::Naive];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelTag::VarLasso => "var_lasso",
            ModelTag::ArLasso => "ar_lasso",
            ModelTag::Naive => "naive",
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "var_lasso" | "var" => Ok(ModelTag::VarLasso),
            "ar_lasso" | "ar" => Ok(ModelTag::ArLasso),
            "naive" => Ok(ModelTag::Naive),
            other => Err(Error::InvalidArgument(format!("unknown model '{other}'"))),
        }
    }
}

/// Rolling-origin cross-validation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub n_lambda: usize,
    /// Smallest grid value as a fraction of λ_max.
    pub ratio: f64,
    pub n_folds: usize,
    /// Fraction of design rows in the first training block.
    pub min_train_frac: f64,
    #[serde(default)]
    pub rule: CvRule,
}

/// Which point of the validation curve is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvRule {
    /// Minimum mean validation MSE.
    Min,
    /// Largest λ within one standard error of the minimum.
    #[default]
    OneSe,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            n_lambda: 20,
            ratio: 0.05,
            n_folds: 10,
            min_train_frac: 0.5,
            rule: CvRule::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaPolicy {
    Fixed { lambda: f64 },
    /// Smallest penalty that zeroes every lag coefficient.
    AtMax,
    CrossValidated(CvConfig),
}

impl Default for LambdaPolicy {
    fn default() -> Self {
        LambdaPolicy::CrossValidated(CvConfig::default())
    }
}

impl FromStr for LambdaPolicy {
    type Err = Error;

    /// `cv`, `max`, or `fixed:<value>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "cv" {
            return Ok(LambdaPolicy::default());
        }
        if s == "max" {
            return Ok(LambdaPolicy::AtMax);
        }
        if let Some(v) = s.strip_prefix("fixed:") {
            let lambda: f64 = v
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad fixed lambda '{v}'")))?;
            if !(lambda >= 0.0 && lambda.is_finite()) {
                return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
            }
            return Ok(LambdaPolicy::Fixed { lambda });
        }
        Err(Error::InvalidArgument(format!(
            "lambda policy must be 'cv', 'max' or 'fixed:<value>', got '{s}'"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarSpec {
    pub p: usize,
    pub lambda_policy: LambdaPolicy,
    /// Select λ separately for each equation instead of one shared value.
    #[serde(default)]
    pub per_equation_lambda: bool,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl Default for VarSpec {
    fn default() -> Self {
        Self {
            p: 25,
            lambda_policy: LambdaPolicy::default(),
            per_equation_lambda: false,
            solver: SolverOptions::default(),
        }
    }
}

impl VarSpec {
    pub fn with_lag(p: usize) -> Self {
        Self { p, ..Self::default() }
    }

    /// Differenced observations needed to fit K series.
    pub fn min_observations(&self, k: usize) -> usize {
        self.p + k + 5
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub design_rows: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Penalty grid searched (empty for fixed λ).
    pub lambda_grid: Vec<f64>,
    /// Mean validation MSE per grid value (shared-λ cross-validation only).
    pub cv_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarLassoFit {
    pub jurisdictions: Vec<String>,
    pub intercept: Vec<f64>,
    /// `lag_matrices[l][i][j]`: effect of series j at lag l+1 on series i.
    pub lag_matrices: Vec<Vec<Vec<f64>>>,
    pub lambda: f64,
    /// Penalty used by each equation; all equal to `lambda` unless the
    /// per-equation flag was set.
    pub equation_lambdas: Vec<f64>,
    pub residual_cov: Vec<Vec<f64>>,
    pub train_window: (NaiveDate, NaiveDate),
    pub diagnostics: FitDiagnostics,
}

impl VarLassoFit {
    pub fn k(&self) -> usize {
        self.intercept.len()
    }

    pub fn p(&self) -> usize {
        self.lag_matrices.len()
    }

    /// β = vec([c, Φ₁, …, Φ_p]) with the K × (1+Kp) block stacked column-wise.
    pub fn coefficient_vector(&self) -> Vec<f64> {
        let k = self.k();
        let mut out = Vec::with_capacity(k * (1 + k * self.p()));
        out.extend_from_slice(&self.intercept);
        for m in &self.lag_matrices {
            for j in 0..k {
                out.extend((0..k).map(|i| m[i][j]));
            }
        }
        out
    }

    /// Inverse of [`coefficient_vector`](Self::coefficient_vector).
    pub fn set_coefficient_vector(&mut self, beta: &[f64]) -> Result<()> {
        let k = self.k();
        let p = self.p();
        if beta.len() != k * (1 + k * p) {
            return Err(Error::DimensionMismatch(format!(
                "coefficient vector of length {} for K={k}, p={p}",
                beta.len()
            )));
        }
        self.intercept.copy_from_slice(&beta[..k]);
        for (l, m) in self.lag_matrices.iter_mut().enumerate() {
            for j in 0..k {
                for i in 0..k {
                    m[i][j] = beta[k + l * k * k + j * k + i];
                }
            }
        }
        Ok(())
    }

    /// One-step prediction given differenced history (K rows, chronological,
    /// at least p columns).
    pub fn predict_next(&self, history: &[Vec<f64>]) -> Result<Vec<f64>> {
        let k = self.k();
        let p = self.p();
        if history.len() != k || history.iter().any(|h| h.len() < p) {
            return Err(Error::DimensionMismatch(format!(
                "history must have {k} rows of at least {p} observations"
            )));
        }
        Ok((0..k)
            .map(|i| {
                let mut v = self.intercept[i];
                for (l, m) in self.lag_matrices.iter().enumerate() {
                    for (j, h) in history.iter().enumerate() {
                        v += m[i][j] * h[h.len() - 1 - l];
                    }
                }
                v
            })
            .collect())
    }

    pub fn residual_variances(&self) -> Vec<f64> {
        (0..self.k()).map(|i| self.residual_cov[i][i]).collect()
    }

    /// Non-zero lag coefficients with explicit indexing, for export.
    pub fn lag_entries(&self) -> Vec<LagEntry> {
        let mut out = Vec::new();
        for (l, m) in self.lag_matrices.iter().enumerate() {
            for (i, row) in m.iter().enumerate() {
                for (j, &value) in row.iter().enumerate() {
                    if value != 0.0 {
                        out.push(LagEntry {
                            lag: l + 1,
                            from: self.jurisdictions[j].clone(),
                            to: self.jurisdictions[i].clone(),
                            value,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagEntry {
    pub lag: usize,
    pub from: String,
    pub to: String,
    pub value: f64,
}

/// Lagged design X ((n−p) × (1+Kp)) and response Y ((n−p) × K) from a
/// K × n differenced panel.
pub fn build_design(differenced: &[Vec<f64>], p: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let k = differenced.len();
    if k == 0 || p == 0 {
        return Err(Error::InvalidArgument("design needs K >= 1 and p >= 1".into()));
    }
    let n = differenced[0].len();
    if differenced.iter().any(|s| s.len() != n) {
        return Err(Error::DimensionMismatch("differenced series of unequal length".into()));
    }
    if n <= p {
        return Err(Error::InsufficientData {
            context: format!("VAR({p}) design"),
            needed: p + 1,
            available: n,
        });
    }
    let rows = n - p;
    let x = DMatrix::from_fn(rows, 1 + k * p, |r, c| {
        if c == 0 {
            1.0
        } else {
            let lag = (c - 1) / k + 1;
            let j = (c - 1) % k;
            differenced[j][r + p - lag]
        }
    });
    let y = DMatrix::from_fn(rows, k, |r, j| differenced[j][r + p]);
    Ok((x, y))
}

fn penalty_mask(cols: usize) -> Vec<bool> {
    let mut m = vec![true; cols];
    m[0] = false;
    m
}

struct Selected {
    lambda: f64,
    grid: Vec<f64>,
    curve: Vec<f64>,
}

fn select_lambda(x: &DMatrix<f64>, y: &DMatrix<f64>, policy: &LambdaPolicy, solver: &SolverOptions) -> Result<Selected> {
    let pen = penalty_mask(x.ncols());
    match *policy {
        LambdaPolicy::Fixed { lambda } => Ok(Selected {
            lambda,
            grid: Vec::new(),
            curve: Vec::new(),
        }),
        LambdaPolicy::AtMax => Ok(Selected {
            lambda: lasso::lambda_max(x, y, &pen)?,
            grid: Vec::new(),
            curve: Vec::new(),
        }),
        LambdaPolicy::CrossValidated(cfg) => {
            let grid = match lasso::lambda_grid(x, y, &pen, cfg.n_lambda, cfg.ratio) {
                Ok(g) => g,
                // No variation to explain: every λ gives the intercept-only fit.
                Err(Error::ZeroResponse) => {
                    return Ok(Selected {
                        lambda: 0.0,
                        grid: Vec::new(),
                        curve: Vec::new(),
                    })
                }
                Err(e) => return Err(e),
            };
            let rows = x.nrows();
            let min_train = ((rows as f64 * cfg.min_train_frac).ceil() as usize).clamp(2, rows.saturating_sub(1).max(1));
            let folds = cfg.n_folds.min(rows.saturating_sub(min_train));
            if folds == 0 {
                return Err(Error::InsufficientData {
                    context: "cross-validation folds".into(),
                    needed: min_train + 1,
                    available: rows,
                });
            }
            let cv = cv_select_lambda(x, y, &pen, &grid, folds, min_train, solver)?;
            Ok(Selected {
                lambda: match cfg.rule {
                    CvRule::Min => cv.best_lambda,
                    CvRule::OneSe => cv.one_se_lambda,
                },
                grid,
                curve: cv.cv_curve,
            })
        }
    }
}

/// Fits a VAR-Lasso to the differenced series of a preprocessed panel.
pub fn fit_var_lasso(panel: &PreprocessedPanel, spec: &VarSpec) -> Result<VarLassoFit> {
    let window = (panel.week_starts[0], panel.week_starts[panel.week_starts.len() - 1]);
    fit_var_differenced(&panel.differenced, &panel.jurisdictions, window, spec)
}

/// Fits a VAR-Lasso to K differenced series (rows of `differenced`).
pub fn fit_var_differenced(
    differenced: &[Vec<f64>],
    jurisdictions: &[String],
    train_window: (NaiveDate, NaiveDate),
    spec: &VarSpec,
) -> Result<VarLassoFit> {
    let k = differenced.len();
    if jurisdictions.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "{} names for {k} series",
            jurisdictions.len()
        )));
    }
    let n = differenced.first().map_or(0, Vec::len);
    if n < spec.min_observations(k) {
        return Err(Error::InsufficientData {
            context: format!("VAR({}) fit on {k} series", spec.p),
            needed: spec.min_observations(k),
            available: n,
        });
    }
    let (x, y) = build_design(differenced, spec.p)?;
    let pen = penalty_mask(x.ncols());

    let (coefficients, equation_lambdas, diagnostics) = if spec.per_equation_lambda && k > 1 {
        let mut coef = DMatrix::zeros(x.ncols(), k);
        let mut lambdas = Vec::with_capacity(k);
        let mut diag = FitDiagnostics {
            design_rows: x.nrows(),
            converged: true,
            ..Default::default()
        };
        for c in 0..k {
            let yc = y.columns(c, 1).into_owned();
            let sel = select_lambda(&x, &yc, &spec.lambda_policy, &spec.solver)?;
            let sol = fit_lasso(&LassoProblem::new(x.clone(), yc, pen.clone(), sel.lambda)?, &spec.solver)?;
            coef.column_mut(c).copy_from(&sol.coefficients.column(0));
            diag.iterations = diag.iterations.max(sol.iterations);
            diag.converged &= sol.converged;
            lambdas.push(sel.lambda);
        }
        (coef, lambdas, diag)
    } else {
        let sel = select_lambda(&x, &y, &spec.lambda_policy, &spec.solver)?;
        let sol = fit_lasso(&LassoProblem::new(x.clone(), y.clone(), pen, sel.lambda)?, &spec.solver)?;
        let diag = FitDiagnostics {
            design_rows: x.nrows(),
            iterations: sol.iterations,
            converged: sol.converged,
            lambda_grid: sel.grid,
            cv_curve: sel.curve,
        };
        (sol.coefficients, vec![sel.lambda; k], diag)
    };
    if !diagnostics.converged {
        return Err(Error::NotConverged {
            iterations: diagnostics.iterations,
        });
    }

    let p = spec.p;
    let intercept = (0..k).map(|i| coefficients[(0, i)]).collect();
    let lag_matrices = (0..p)
        .map(|l| {
            (0..k)
                .map(|i| (0..k).map(|j| coefficients[(1 + l * k + j, i)]).collect())
                .collect()
        })
        .collect();
    let resid = &y - &x * &coefficients;
    let rows = resid.nrows() as f64;
    let residual_cov = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| resid.column(i).dot(&resid.column(j)) / rows)
                .collect()
        })
        .collect();
    let lambda = equation_lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(VarLassoFit {
        jurisdictions: jurisdictions.to_vec(),
        intercept,
        lag_matrices,
        lambda,
        equation_lambdas,
        residual_cov,
        train_window,
        diagnostics,
    })
}

/// How the second forecast step is produced.
#[derive(Debug, Clone, Copy)]
pub enum RefitPolicy<'a> {
    /// Iterate the fitted model once more.
    Reuse,
    /// Append the first-step forecast to `history` (the full differenced
    /// training data) and refit with `spec` before the second step.
    Refit { history: &'a [Vec<f64>], spec: &'a VarSpec },
}

/// Serializable choice between the two [`RefitPolicy`] variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefitMode {
    #[default]
    Reuse,
    Refit,
}

impl FromStr for RefitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "reuse" => Ok(RefitMode::Reuse),
            "refit" => Ok(RefitMode::Refit),
            other => Err(Error::InvalidArgument(format!("refit policy must be reuse|refit, got '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStepForecast {
    pub step1_diff: Vec<f64>,
    pub step2_diff: Vec<f64>,
    pub level1: Vec<f64>,
    pub level2: Vec<f64>,
    /// Residual variances of the model producing step 1.
    pub one_step_var: Vec<f64>,
    /// Residual variances of the model producing step 2.
    pub conditional_second_var: Vec<f64>,
    /// λ chosen by the second fit under the refit policy.
    pub refit_lambda: Option<f64>,
}

/// Forecasts Δŷ_{t+1} and Δŷ_{t+2} and maps them to levels through
/// `anchors` (the last observed smoothed level per series).
pub fn forecast_two_step(
    fit: &VarLassoFit,
    recent_diffs: &[Vec<f64>],
    anchors: &[f64],
    refit: RefitPolicy<'_>,
) -> Result<TwoStepForecast> {
    let k = fit.k();
    if anchors.len() != k {
        return Err(Error::DimensionMismatch(format!("{} anchors for {k} series", anchors.len())));
    }
    let step1 = fit.predict_next(recent_diffs)?;
    let extend = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
        rows.iter()
            .zip(&step1)
            .map(|(r, d)| {
                let mut v = r.clone();
                v.push(*d);
                v
            })
            .collect()
    };
    let (step2, second_var, refit_lambda) = match refit {
        RefitPolicy::Reuse => (fit.predict_next(&extend(recent_diffs))?, fit.residual_variances(), None),
        RefitPolicy::Refit { history, spec } => {
            let extended = extend(history);
            let window = (fit.train_window.0, fit.train_window.1 + Duration::days(7));
            let refit = fit_var_differenced(&extended, &fit.jurisdictions, window, spec)?;
            (refit.predict_next(&extended)?, refit.residual_variances(), Some(refit.lambda))
        }
    };
    let level1: Vec<f64> = anchors.iter().zip(&step1).map(|(a, d)| a + d).collect();
    let level2 = level1.iter().zip(&step2).map(|(l, d)| l + d).collect();
    Ok(TwoStepForecast {
        one_step_var: fit.residual_variances(),
        conditional_second_var: second_var,
        step1_diff: step1,
        step2_diff: step2,
        level1,
        level2,
        refit_lambda,
    })
}

/// Two-step forecast from the tail of a preprocessed training panel.
pub fn forecast_from_panel(
    fit: &VarLassoFit,
    panel: &PreprocessedPanel,
    mode: RefitMode,
    spec: &VarSpec,
) -> Result<TwoStepForecast> {
    let policy = match mode {
        RefitMode::Reuse => RefitPolicy::Reuse,
        RefitMode::Refit => RefitPolicy::Refit {
            history: &panel.differenced,
            spec,
        },
    };
    forecast_two_step(fit, &panel.differenced, &panel.anchors, policy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastEntry {
    pub jurisdiction: String,
    pub point: f64,
    pub lower95: Option<f64>,
    pub upper95: Option<f64>,
}

/// Level-scale forecasts of one model for one target week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSet {
    pub model: ModelTag,
    pub target_week: Option<NaiveDate>,
    pub entries: Vec<ForecastEntry>,
}

impl ForecastSet {
    pub fn points(model: ModelTag, target_week: Option<NaiveDate>, jurisdictions: &[String], points: &[f64]) -> Self {
        Self {
            model,
            target_week,
            entries: jurisdictions
                .iter()
                .zip(points)
                .map(|(j, &point)| ForecastEntry {
                    jurisdiction: j.clone(),
                    point,
                    lower95: None,
                    upper95: None,
                })
                .collect(),
        }
    }

    /// Clamps points and bounds at zero.
    pub fn clamp_nonnegative(&mut self) {
        for e in &mut self.entries {
            e.point = e.point.max(0.0);
            e.lower95 = e.lower95.map(|v| v.max(0.0));
            e.upper95 = e.upper95.map(|v| v.max(0.0));
        }
    }
}

/// Adds 95% intervals: point ± 1.96·√(v₁ + v₂) per series, treating the
/// two step errors as independent.
pub fn prediction_interval_two_step(
    forecasts: &ForecastSet,
    one_step_var: &[f64],
    conditional_second_var: &[f64],
) -> Result<ForecastSet> {
    let k = forecasts.entries.len();
    if one_step_var.len() != k || conditional_second_var.len() != k {
        return Err(Error::DimensionMismatch(format!("variances must have length {k}")));
    }
    if one_step_var.iter().chain(conditional_second_var).any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidArgument("variances must be non-negative".into()));
    }
    let mut out = forecasts.clone();
    for ((e, v1), v2) in out.entries.iter_mut().zip(one_step_var).zip(conditional_second_var) {
        let half = Z_95 * (v1 + v2).sqrt();
        e.lower95 = Some(e.point - half);
        e.upper95 = Some(e.point + half);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2023, 1, 1).unwrap()
    }

    fn manual_fit(intercept: Vec<f64>, lags: Vec<Vec<Vec<f64>>>) -> VarLassoFit {
        let k = intercept.len();
        VarLassoFit {
            jurisdictions: (0..k).map(|i| format!("S{i}")).collect(),
            intercept,
            lag_matrices: lags,
            lambda: 0.0,
            equation_lambdas: vec![0.0; k],
            residual_cov: vec![vec![0.0; k]; k],
            train_window: (date(), date()),
            diagnostics: FitDiagnostics::default(),
        }
    }

    #[test]
    fn design_unrolls_single_series() {
        let (x, y) = build_design(&[vec![1.0, 2.0, 4.0]], 1).unwrap();
        assert_eq!(x, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0]));
        assert_eq!(y, DMatrix::from_row_slice(2, 1, &[2.0, 4.0]));
    }

    #[test]
    fn design_shape_and_order() {
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let b = vec![10.0, 20.0, 30.0, 40.0, 50.0];
        let (x, y) = build_design(&[a, b], 2).unwrap();
        assert_eq!(x.shape(), (3, 5));
        assert_eq!(y.shape(), (3, 2));
        assert!(x.column(0).iter().all(|&v| v == 1.0));
        // Row 0 predicts t=2: lag 1 is t=1, lag 2 is t=0.
        assert_eq!(x.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 2.0, 20.0, 1.0, 10.0]);
        assert_eq!(y.row(0).iter().copied().collect::<Vec<_>>(), vec![3.0, 30.0]);
        assert!(build_design(&[vec![1.0, 2.0]], 2).is_err());
    }

    #[test]
    fn intercept_only_recursion() {
        let fit = manual_fit(vec![0.5], vec![vec![vec![0.0]]]);
        let f = forecast_two_step(&fit, &[vec![3.0]], &[10.0], RefitPolicy::Reuse).unwrap();
        assert_eq!(f.level2, vec![11.0]);
    }

    #[test]
    fn ar1_recursion_by_hand() {
        let fit = manual_fit(vec![0.0], vec![vec![vec![0.5]]]);
        let f = forecast_two_step(&fit, &[vec![2.0]], &[20.0], RefitPolicy::Reuse).unwrap();
        assert_eq!(f.step1_diff, vec![1.0]);
        assert_eq!(f.step2_diff, vec![0.5]);
        assert_eq!(f.level2, vec![21.5]);
    }

    #[test]
    fn zero_model_is_random_walk() {
        let fit = manual_fit(vec![0.0, 0.0], vec![vec![vec![0.0; 2]; 2]]);
        let f = forecast_two_step(&fit, &[vec![1.0], vec![-4.0]], &[3.0, 8.0], RefitPolicy::Reuse).unwrap();
        assert_eq!(f.level2, vec![3.0, 8.0]);
        assert!(forecast_two_step(&fit, &[vec![1.0]], &[3.0, 8.0], RefitPolicy::Reuse).is_err());
        assert!(forecast_two_step(&fit, &[vec![1.0], vec![2.0]], &[3.0], RefitPolicy::Reuse).is_err());
    }

    #[test]
    fn coefficient_vector_round_trip() {
        let mut fit = manual_fit(
            vec![0.1, 0.2],
            vec![vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![vec![5.0, 6.0], vec![7.0, 8.0]]],
        );
        let beta = fit.coefficient_vector();
        assert_eq!(beta, vec![0.1, 0.2, 1.0, 3.0, 2.0, 4.0, 5.0, 7.0, 6.0, 8.0]);
        let original = fit.clone();
        fit.set_coefficient_vector(&beta).unwrap();
        assert_eq!(fit, original);
        assert!(fit.set_coefficient_vector(&beta[1..]).is_err());
    }

    #[test]
    fn interval_examples() {
        let set = ForecastSet::points(ModelTag::VarLasso, None, &["A".into()], &[10.0]);
        let z = prediction_interval_two_step(&set, &[0.0], &[0.0]).unwrap();
        assert_eq!((z.entries[0].lower95, z.entries[0].upper95), (Some(10.0), Some(10.0)));
        let w = prediction_interval_two_step(&set, &[1.0], &[1.0]).unwrap();
        let half = 1.96 * 2f64.sqrt();
        assert!((w.entries[0].lower95.unwrap() - (10.0 - half)).abs() < 1e-12);
        assert!((w.entries[0].upper95.unwrap() - (10.0 + half)).abs() < 1e-12);
        assert!(prediction_interval_two_step(&set, &[-1.0], &[1.0]).is_err());
        assert!(prediction_interval_two_step(&set, &[1.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn interval_width_monotone() {
        let set = ForecastSet::points(ModelTag::VarLasso, None, &["A".into()], &[0.0]);
        let mut last = -1.0;
        for v in [0.0, 0.1, 0.5, 1.0, 4.0] {
            let s = prediction_interval_two_step(&set, &[v], &[1.0]).unwrap();
            let width = s.entries[0].upper95.unwrap() - s.entries[0].lower95.unwrap();
            assert!(width >= last);
            last = width;
        }
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("fixed:2.5".parse::<LambdaPolicy>().unwrap(), LambdaPolicy::Fixed { lambda: 2.5 });
        assert!(matches!("cv".parse::<LambdaPolicy>().unwrap(), LambdaPolicy::CrossValidated(_)));
        assert!("fixed:-1".parse::<LambdaPolicy>().is_err());
        assert!("bogus".parse::<LambdaPolicy>().is_err());
        assert_eq!("var".parse::<ModelTag>().unwrap(), ModelTag::VarLasso);
        assert_eq!("refit".parse::<RefitMode>().unwrap(), RefitMode::Refit);
    }

    #[test]
    fn insufficient_history_rejected() {
        let spec = VarSpec::with_lag(3);
        let diffs = vec![vec![0.0; 9], vec![1.0; 9]];
        let err = fit_var_differenced(&diffs, &["A".into(), "B".into()], (date(), date()), &spec).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { needed: 10, available: 9, .. }));
    }
}
