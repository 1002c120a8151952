//! Comparison models: univariate AR-Lasso and the four-week naive mean.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::varmodel::{
    fit_var_differenced, forecast_two_step, FitDiagnostics, ModelTag, RefitPolicy, VarLassoFit, VarSpec,
};

/// Observations averaged by the naive forecast.
pub const NAIVE_WINDOW: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArLassoFit {
    pub jurisdiction: String,
    pub intercept: f64,
    /// φ₁..φ_p.
    pub lag_coefficients: Vec<f64>,
    pub lambda: f64,
    pub residual_variance: f64,
    pub train_window: (NaiveDate, NaiveDate),
    pub diagnostics: FitDiagnostics,
}

impl ArLassoFit {
    pub fn p(&self) -> usize {
        self.lag_coefficients.len()
    }

    /// Iterated two-step forecast: (Δ̂₁, Δ̂₂, level at t+2). Evaluated by the
    /// VAR recursion so results match a one-series VAR bit for bit.
    pub fn forecast_two_step(&self, recent_diffs: &[f64], anchor: f64) -> Result<(f64, f64, f64)> {
        let f = forecast_two_step(&self.to_var_fit(), &[recent_diffs.to_vec()], &[anchor], RefitPolicy::Reuse)?;
        Ok((f.step1_diff[0], f.step2_diff[0], f.level2[0]))
    }

    /// The equivalent one-series VAR fit.
    pub fn to_var_fit(&self) -> VarLassoFit {
        VarLassoFit {
            jurisdictions: vec![self.jurisdiction.clone()],
            intercept: vec![self.intercept],
            lag_matrices: self.lag_coefficients.iter().map(|&v| vec![vec![v]]).collect(),
            lambda: self.lambda,
            equation_lambdas: vec![self.lambda],
            residual_cov: vec![vec![self.residual_variance]],
            train_window: self.train_window,
            diagnostics: self.diagnostics.clone(),
        }
    }
}

/// AR(p)-Lasso on one differenced series, through the K = 1 VAR path.
pub fn fit_ar_lasso(
    jurisdiction: &str,
    series_diffs: &[f64],
    train_window: (NaiveDate, NaiveDate),
    spec: &VarSpec,
) -> Result<ArLassoFit> {
    if series_diffs.len() <= spec.p + 5 {
        return Err(Error::InsufficientData {
            context: format!("AR({}) fit for {jurisdiction}", spec.p),
            needed: spec.p + 6,
            available: series_diffs.len(),
        });
    }
    let fit = fit_var_differenced(&[series_diffs.to_vec()], &[jurisdiction.to_string()], train_window, spec)?;
    Ok(ArLassoFit {
        jurisdiction: jurisdiction.to_string(),
        intercept: fit.intercept[0],
        lag_coefficients: fit.lag_matrices.iter().map(|m| m[0][0]).collect(),
        lambda: fit.lambda,
        residual_variance: fit.residual_cov[0][0],
        train_window,
        diagnostics: fit.diagnostics,
    })
}

/// Variances of the one-step error and of the two-step-ahead differenced
/// error: σ² and σ²(1 + ψ₁²) with ψ₁ = φ₁.
pub fn ar_two_step_interval(fit: &ArLassoFit) -> (f64, f64) {
    let s2 = fit.residual_variance;
    let psi1 = fit.lag_coefficients.first().copied().unwrap_or(0.0);
    (s2, s2 * (1.0 + psi1 * psi1))
}

/// Mean of the last four observed levels, used for both horizon weeks.
pub fn naive_forecast(series_levels: &[f64]) -> Result<f64> {
    if series_levels.len() < NAIVE_WINDOW {
        return Err(Error::InsufficientData {
            context: "naive four-week mean".into(),
            needed: NAIVE_WINDOW,
            available: series_levels.len(),
        });
    }
    let tail = &series_levels[series_levels.len() - NAIVE_WINDOW..];
    Ok(tail.iter().sum::<f64>() / NAIVE_WINDOW as f64)
}

/// JSON form of a fit, tagged with its model.
#[derive(Debug, Clone, Serialize)]
pub struct TaggedFit<'a, T: Serialize> {
    pub model_tag: ModelTag,
    #[serde(flatten)]
    pub fit: &'a T,
}
