//! Per-series preprocessing: centered moving-average smoothing, the
//! augmented Dickey-Fuller diagnostic, and invertible first differencing.

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ols;
use crate::panel::TimeSeriesPanel;

/// Asymptotic 5% critical value of the constant-only Dickey-Fuller test.
pub const ADF_CRITICAL_5PCT: f64 = -2.86;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub window_weeks: usize,
}

impl SmoothingConfig {
    pub fn new(window_weeks: usize) -> Result<Self> {
        if window_weeks == 0 {
            return Err(Error::InvalidArgument("smoothing window must be >= 1".into()));
        }
        Ok(Self { window_weeks })
    }

    /// Windows outside 1..=5 are allowed but unusual.
    pub fn is_flagged(&self) -> bool {
        !(1..=5).contains(&self.window_weeks)
    }
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self { window_weeks: 4 }
    }
}

/// Kernel weights and the offset of the first weight relative to the centre.
fn ma_kernel(window: usize) -> (Vec<f64>, isize) {
    if window % 2 == 0 {
        // 2×w kernel: w+1 taps with half weight at both ends.
        let mut k = vec![1.0 / window as f64; window + 1];
        k[0] *= 0.5;
        k[window] *= 0.5;
        (k, -((window / 2) as isize))
    } else {
        (vec![1.0 / window as f64; window], -(((window - 1) / 2) as isize))
    }
}

/// Centered moving average of the same length as `series`.
///
/// Even windows use the 2×w kernel, e.g. w=4 gives (1,2,2,2,1)/8. At the
/// ends the kernel is truncated to the available points and renormalized.
pub fn smooth_centered_ma(series: &[f64], window_weeks: usize) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("cannot smooth an empty series".into()));
    }
    if window_weeks == 0 {
        return Err(Error::InvalidArgument("smoothing window must be >= 1".into()));
    }
    if window_weeks == 1 {
        return Ok(series.to_vec());
    }
    let (kernel, offset) = ma_kernel(window_weeks);
    let n = series.len() as isize;
    let out = (0..n)
        .map(|t| {
            let mut acc = 0.0;
            let mut mass = 0.0;
            for (i, w) in kernel.iter().enumerate() {
                let s = t + offset + i as isize;
                if (0..n).contains(&s) {
                    acc += w * series[s as usize];
                    mass += w;
                }
            }
            acc / mass
        })
        .collect();
    Ok(out)
}

/// Result of an augmented Dickey-Fuller test with a constant and no trend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub reject_unit_root_at_5pct: bool,
    pub lag_used: usize,
}

/// Conventional default lag cap, floor((T-1)^(1/3)).
pub fn default_adf_max_lag(len: usize) -> usize {
    if len < 2 {
        return 0;
    }
    ((len - 1) as f64).cbrt().floor() as usize
}

/// Regression rows `i ∈ first..len(dy)` of Δy_i = α + γ y_i + Σ δ_j Δy_{i-j}.
fn adf_design(series: &[f64], dy: &[f64], lag: usize, first: usize) -> (DMatrix<f64>, DVector<f64>) {
    let rows = dy.len() - first;
    let cols = 2 + lag;
    let mut x = DMatrix::zeros(rows, cols);
    let mut y = DVector::zeros(rows);
    for (r, i) in (first..dy.len()).enumerate() {
        x[(r, 0)] = 1.0;
        x[(r, 1)] = series[i];
        for j in 1..=lag {
            x[(r, 1 + j)] = dy[i - j];
        }
        y[r] = dy[i];
    }
    (x, y)
}

/// Augmented Dickey-Fuller test. The lag order is chosen by AIC over
/// `0..=max_lag` on a common sample, then the regression is refit on every
/// observation available at that lag. Lags whose design is rank deficient
/// are skipped.
pub fn adf_test(series: &[f64], max_lag: usize) -> Result<AdfResult> {
    if series.len() < max_lag + 10 {
        return Err(Error::InsufficientData {
            context: "ADF test".into(),
            needed: max_lag + 10,
            available: series.len(),
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ADF input".into()));
    }
    if series.iter().all(|&v| v == series[0]) {
        return Err(Error::ConstantSeries);
    }
    let dy: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();

    let mut best: Option<(f64, usize)> = None;
    for lag in 0..=max_lag {
        let (x, y) = adf_design(series, &dy, lag, max_lag);
        let Some(fit) = ols(&x, &y) else { continue };
        let n = y.len() as f64;
        let aic = n * (fit.rss.max(f64::MIN_POSITIVE) / n).ln() + 2.0 * (lag + 2) as f64;
        if best.is_none_or(|(b, _)| aic < b) {
            best = Some((aic, lag));
        }
    }
    let (_, lag) = best.ok_or(Error::InsufficientData {
        context: "ADF regression (rank deficient at every lag)".into(),
        needed: 2,
        available: 0,
    })?;

    let (x, y) = adf_design(series, &dy, lag, lag);
    let fit = ols(&x, &y).ok_or(Error::InsufficientData {
        context: "ADF regression (rank deficient)".into(),
        needed: 2,
        available: 0,
    })?;
    let n = y.len();
    let k = x.ncols();
    let gamma = fit.coefficients[1];
    let scale = y.norm_squared();
    let statistic = if fit.rss <= 1e-24 * scale || n <= k {
        // Deterministic fit: no residual noise to scale γ by.
        let level = series.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gamma.abs() * level <= 1e-9 * (scale / n as f64).sqrt() {
            0.0
        } else if gamma < 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    } else {
        let sigma2 = fit.rss / (n - k) as f64;
        gamma / (sigma2 * fit.xtx_inv_diag[1]).sqrt()
    };
    Ok(AdfResult {
        statistic,
        reject_unit_root_at_5pct: statistic < ADF_CRITICAL_5PCT,
        lag_used: lag,
    })
}

/// First differences and the last level, which inverts them.
pub fn difference_once(series: &[f64]) -> Result<(Vec<f64>, f64)> {
    if series.len() < 2 {
        return Err(Error::InsufficientData {
            context: "differencing".into(),
            needed: 2,
            available: series.len(),
        });
    }
    let diffs = series.windows(2).map(|w| w[1] - w[0]).collect();
    Ok((diffs, series[series.len() - 1]))
}

/// Cumulative sum of `diffs` starting from `start_level`.
pub fn undifference(diffs: &[f64], start_level: f64) -> Vec<f64> {
    diffs
        .iter()
        .scan(start_level, |level, d| {
            *level += d;
            Some(*level)
        })
        .collect()
}

/// ADF outcome on one series; `None` where the test could not run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfDiagnostics {
    pub smoothed: Option<AdfResult>,
    pub differenced: Option<AdfResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessedPanel {
    pub jurisdictions: Vec<String>,
    pub week_starts: Vec<NaiveDate>,
    /// K × T smoothed levels.
    pub smoothed: Vec<Vec<f64>>,
    /// K × (T-1) first differences of `smoothed`.
    pub differenced: Vec<Vec<f64>>,
    /// Last smoothed level per series.
    pub anchors: Vec<f64>,
    pub adf_reports: Vec<AdfDiagnostics>,
    pub config: SmoothingConfig,
}

impl PreprocessedPanel {
    pub fn n_series(&self) -> usize {
        self.smoothed.len()
    }
}

fn adf_or_none(series: &[f64]) -> Option<AdfResult> {
    adf_test(series, default_adf_max_lag(series.len())).ok()
}

/// Smooths and differences every series. ADF results are diagnostics only;
/// every series is differenced exactly once regardless of the outcome.
pub fn preprocess_panel(panel: &TimeSeriesPanel, config: SmoothingConfig) -> Result<PreprocessedPanel> {
    preprocess_inner(panel, config, true)
}

/// As [`preprocess_panel`] without the ADF diagnostics.
pub fn preprocess_panel_fast(panel: &TimeSeriesPanel, config: SmoothingConfig) -> Result<PreprocessedPanel> {
    preprocess_inner(panel, config, false)
}

fn preprocess_inner(panel: &TimeSeriesPanel, config: SmoothingConfig, with_adf: bool) -> Result<PreprocessedPanel> {
    let mut smoothed = Vec::with_capacity(panel.n_series());
    let mut differenced = Vec::with_capacity(panel.n_series());
    let mut anchors = Vec::with_capacity(panel.n_series());
    let mut adf_reports = Vec::with_capacity(panel.n_series());
    for k in 0..panel.n_series() {
        let s = smooth_centered_ma(&panel.levels(k), config.window_weeks)?;
        let (d, anchor) = difference_once(&s)?;
        adf_reports.push(AdfDiagnostics {
            smoothed: if with_adf { adf_or_none(&s) } else { None },
            differenced: if with_adf { adf_or_none(&d) } else { None },
        });
        smoothed.push(s);
        differenced.push(d);
        anchors.push(anchor);
    }
    Ok(PreprocessedPanel {
        jurisdictions: panel.jurisdictions().to_vec(),
        week_starts: panel.week_starts().to_vec(),
        smoothed,
        differenced,
        anchors,
        adf_reports,
        config,
    })
}
