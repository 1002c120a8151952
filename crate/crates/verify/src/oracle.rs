use nalgebra::{DMatrix, DVector};

/// Least squares through XᵀX β = Xᵀy. `None` when XᵀX is not positive definite.
pub fn normal_equations(x: &DMatrix<f64>, y: &[f64]) -> Option<Vec<f64>> {
    let xt = x.transpose();
    let gram = &xt * x;
    let rhs = &xt * DVector::from_column_slice(y);
    let chol = gram.cholesky()?;
    Some(chol.solve(&rhs).iter().copied().collect())
}

/// Largest violation of the optimality conditions for
/// ‖y − Xβ‖² + λ Σ_{penalized} |β_j|, each term scaled by ‖x_j‖ so that it is
/// comparable with a per-coordinate tolerance.
///
/// * penalized, β_j ≠ 0: |2 x_jᵀr − λ sign(β_j)|
/// * penalized, β_j = 0: max(|2 x_jᵀr| − λ, 0)
/// * unpenalized: |2 x_jᵀr|
pub fn kkt_violation(x: &DMatrix<f64>, y: &[f64], beta: &[f64], penalize: &[bool], lambda: f64) -> f64 {
    let n = x.nrows();
    let resid: Vec<f64> = (0..n)
        .map(|i| y[i] - (0..x.ncols()).map(|j| x[(i, j)] * beta[j]).sum::<f64>())
        .collect();
    let mut worst = 0.0f64;
    for j in 0..x.ncols() {
        let norm = (0..n).map(|i| x[(i, j)].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let g = 2.0 * (0..n).map(|i| x[(i, j)] * resid[i]).sum::<f64>();
        let v = if !penalize[j] {
            g.abs()
        } else if beta[j] != 0.0 {
            (g - lambda * beta[j].signum()).abs()
        } else {
            (g.abs() - lambda).max(0.0)
        };
        worst = worst.max(v / norm);
    }
    worst
}

/// Slope-weighted RMSE, MAE and bias computed term by term from an observed
/// smoothed series and the forecasts for its points 1..n.
///
/// `predicted[i]` is the forecast of `observed[i + 1]`. The weight of a point
/// is the increase over the preceding observation, or zero when the series
/// fell. `None` when every weight is zero.
pub fn brute_force_slope_metrics(observed: &[f64], predicted: &[f64]) -> Option<(f64, f64, f64)> {
    assert_eq!(predicted.len() + 1, observed.len());
    let mut weights = Vec::new();
    let mut errors = Vec::new();
    for t in 1..observed.len() {
        let rise = observed[t] - observed[t - 1];
        weights.push(if rise > 0.0 { rise } else { 0.0 });
        errors.push(predicted[t - 1] - observed[t]);
    }
    let mut total = 0.0;
    for w in &weights {
        total += w;
    }
    if total == 0.0 {
        return None;
    }
    let mut sq = 0.0;
    let mut abs = 0.0;
    let mut signed = 0.0;
    for i in 0..weights.len() {
        sq += weights[i] * errors[i] * errors[i];
        abs += weights[i] * errors[i].abs();
        signed += weights[i] * errors[i];
    }
    Some(((sq / total).sqrt(), abs / total, signed / total))
}

/// 100·(b − c)/b with magnitudes for signed metrics.
pub fn percent_improvement(candidate: f64, benchmark: f64, signed: bool) -> f64 {
    let (c, b) = if signed { (candidate.abs(), benchmark.abs()) } else { (candidate, benchmark) };
    100.0 * (b - c) / b
}

/// |a − b| ≤ tol · max(1, |b|).
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}
