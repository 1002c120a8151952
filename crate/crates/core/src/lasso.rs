//! L1-penalized least squares by cyclic coordinate descent.
//!
//! The solver minimizes
//!
//! ```text
//! Q(β) = ‖y − Xβ‖² + λ Σ_{j penalized} |β_j|
//! ```
//!
//! exactly as written (no 1/(2n) factor). Internally a constant
//! unpenalized column is treated as the intercept and profiled out by
//! centering; the remaining columns are scaled to unit ℓ2 norm and the
//! per-coordinate threshold is rescaled so the original objective is
//! preserved. Coefficients are always reported on the original scale.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Convergence threshold on the largest coefficient change in a full sweep.
    pub tol: f64,
    /// Cap on coordinate-descent sweeps (full and active-set sweeps both count).
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 10_000,
        }
    }
}

/// A (possibly multi-response) lasso problem. Responses are solved
/// column by column with a shared design and penalty.
#[derive(Debug, Clone)]
pub struct LassoProblem {
    pub design: DMatrix<f64>,
    pub response: DMatrix<f64>,
    pub penalize: Vec<bool>,
    pub lambda: f64,
}

impl LassoProblem {
    pub fn new(design: DMatrix<f64>, response: DMatrix<f64>, penalize: Vec<bool>, lambda: f64) -> Result<Self> {
        let p = Self {
            design,
            response,
            penalize,
            lambda,
        };
        p.validate()?;
        Ok(p)
    }

    /// Single-response problem.
    pub fn single(design: DMatrix<f64>, response: &[f64], penalize: Vec<bool>, lambda: f64) -> Result<Self> {
        let y = DMatrix::from_column_slice(response.len(), 1, response);
        Self::new(design, y, penalize, lambda)
    }

    fn validate(&self) -> Result<()> {
        let (n, d) = self.design.shape();
        if n == 0 || d == 0 {
            return Err(Error::InvalidArgument("lasso design must be non-empty".into()));
        }
        if self.response.nrows() != n || self.response.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "design has {n} rows, response is {}x{}",
                self.response.nrows(),
                self.response.ncols()
            )));
        }
        if self.penalize.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "penalty mask of length {} for {d} columns",
                self.penalize.len()
            )));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        check_finite(&self.design, "lasso design")?;
        check_finite(&self.response, "lasso response")
    }
}

fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

#[derive(Debug, Clone)]
pub struct LassoSolution {
    /// d × m coefficients on the original scale.
    pub coefficients: DMatrix<f64>,
    /// Q(β) at the returned coefficients, summed over responses.
    pub objective_value: f64,
    /// Largest sweep count over the response columns.
    pub iterations: usize,
    pub converged: bool,
    /// Penalized columns that vanish after centering/standardization; their
    /// coefficients are fixed at zero.
    pub dropped_columns: Vec<usize>,
    /// Objective after each sweep, per response column.
    pub sweep_objectives: Vec<Vec<f64>>,
}

impl LassoSolution {
    pub fn column(&self, m: usize) -> Vec<f64> {
        self.coefficients.column(m).iter().copied().collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Centered, unit-norm copy of a design matrix.
#[derive(Debug, Clone)]
pub(crate) struct Standardized {
    n: usize,
    d: usize,
    /// Column-major n × d; intercept and dropped columns are left zero.
    cols: Vec<f64>,
    scale: Vec<f64>,
    sq_norm: Vec<f64>,
    means: Vec<f64>,
    penalize: Vec<bool>,
    intercept: Option<(usize, f64)>,
    /// Columns updated by coordinate descent.
    free: Vec<usize>,
    dropped: Vec<usize>,
}

impl Standardized {
    pub(crate) fn new(design: &DMatrix<f64>, penalize: &[bool]) -> Self {
        let (n, d) = design.shape();
        let raw = design.as_slice();
        let intercept = (0..d).find_map(|j| {
            let col = &raw[j * n..(j + 1) * n];
            (!penalize[j] && col[0] != 0.0 && col.iter().all(|&v| v == col[0])).then_some((j, col[0]))
        });
        let mut cols = vec![0.0; n * d];
        let mut scale = vec![1.0; d];
        let mut sq_norm = vec![0.0; d];
        let mut means = vec![0.0; d];
        let mut free = Vec::new();
        let mut dropped = Vec::new();
        for j in 0..d {
            if intercept.is_some_and(|(i, _)| i == j) {
                continue;
            }
            let col = &raw[j * n..(j + 1) * n];
            let mean = if intercept.is_some() { col.iter().sum::<f64>() / n as f64 } else { 0.0 };
            let out = &mut cols[j * n..(j + 1) * n];
            for (o, v) in out.iter_mut().zip(col) {
                *o = v - mean;
            }
            let raw_norm = dot(col, col).sqrt();
            let norm = dot(out, out).sqrt();
            if norm == 0.0 || norm <= 1e-10 * raw_norm {
                out.iter_mut().for_each(|o| *o = 0.0);
                dropped.push(j);
                continue;
            }
            out.iter_mut().for_each(|o| *o /= norm);
            means[j] = mean;
            scale[j] = norm;
            sq_norm[j] = dot(out, out);
            free.push(j);
        }
        Self {
            n,
            d,
            cols,
            scale,
            sq_norm,
            means,
            penalize: penalize.to_vec(),
            intercept,
            free,
            dropped,
        }
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }

    /// Response centered when the design carries an intercept.
    pub(crate) fn center_response(&self, y: &[f64]) -> (Vec<f64>, f64) {
        if self.intercept.is_some() {
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            (y.iter().map(|v| v - mean).collect(), mean)
        } else {
            (y.to_vec(), 0.0)
        }
    }

    /// max_j |2 x_jᵀ y_c| over penalized columns, evaluated the same way
    /// the solver evaluates its first threshold test.
    pub(crate) fn lambda_max(&self, y_centered: &[f64]) -> f64 {
        self.free
            .iter()
            .filter(|&&j| self.penalize[j])
            .map(|&j| 2.0 * self.scale[j] * dot(self.col(j), y_centered).abs())
            .fold(0.0, f64::max)
    }

    /// Coordinate descent on one response. `warm` is in standardized units.
    pub(crate) fn solve(&self, y_centered: &[f64], lambda: f64, opts: &SolverOptions, warm: Option<&[f64]>) -> CdRun {
        let mut beta = warm.map_or_else(|| vec![0.0; self.d], <[f64]>::to_vec);
        let mut resid = y_centered.to_vec();
        for &j in &self.free {
            if beta[j] != 0.0 {
                let b = beta[j];
                resid.iter_mut().zip(self.col(j)).for_each(|(r, x)| *r -= x * b);
            }
        }
        let mut trace = Vec::new();
        let mut iterations = 0;
        let mut converged = false;
        let mut active: Vec<usize> = Vec::with_capacity(self.free.len());
        while iterations < opts.max_iter {
            let change = self.sweep(&self.free, &mut beta, &mut resid, lambda);
            iterations += 1;
            trace.push(self.objective(&beta, &resid, lambda));
            if change < opts.tol {
                converged = true;
                break;
            }
            active.clear();
            active.extend(self.free.iter().copied().filter(|&j| beta[j] != 0.0 || !self.penalize[j]));
            while iterations < opts.max_iter {
                let change = self.sweep(&active, &mut beta, &mut resid, lambda);
                iterations += 1;
                trace.push(self.objective(&beta, &resid, lambda));
                if change < opts.tol {
                    break;
                }
            }
        }
        CdRun {
            beta_std: beta,
            iterations,
            converged,
            trace,
        }
    }

    fn sweep(&self, cols: &[usize], beta: &mut [f64], resid: &mut [f64], lambda: f64) -> f64 {
        let mut max_change = 0.0f64;
        for &j in cols {
            let x = self.col(j);
            let a = self.sq_norm[j];
            let old = beta[j];
            let z = dot(x, resid) + a * old;
            let new = if !self.penalize[j] {
                z / a
            } else if 2.0 * self.scale[j] * z.abs() <= lambda {
                0.0
            } else {
                z.signum() * (z.abs() - lambda / (2.0 * self.scale[j])) / a
            };
            let delta = new - old;
            if delta != 0.0 {
                resid.iter_mut().zip(x).for_each(|(r, xi)| *r -= xi * delta);
                beta[j] = new;
                max_change = max_change.max(delta.abs() / self.scale[j]);
            }
        }
        max_change
    }

    fn objective(&self, beta: &[f64], resid: &[f64], lambda: f64) -> f64 {
        let penalty: f64 = self
            .free
            .iter()
            .filter(|&&j| self.penalize[j])
            .map(|&j| beta[j].abs() / self.scale[j])
            .sum();
        dot(resid, resid) + lambda * penalty
    }

    /// Original-scale coefficients from standardized ones.
    pub(crate) fn unstandardize(&self, beta_std: &[f64], y_mean: f64) -> Vec<f64> {
        let mut beta = vec![0.0; self.d];
        for &j in &self.free {
            beta[j] = beta_std[j] / self.scale[j];
        }
        if let Some((i, c)) = self.intercept {
            let shift: f64 = self.free.iter().map(|&j| self.means[j] * beta[j]).sum();
            beta[i] = (y_mean - shift) / c;
        }
        beta
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CdRun {
    pub beta_std: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

/// Q(β) for one response column.
pub fn lasso_objective(design: &DMatrix<f64>, y: &[f64], beta: &[f64], penalize: &[bool], lambda: f64) -> f64 {
    let (n, d) = design.shape();
    let raw = design.as_slice();
    let mut resid = y.to_vec();
    for j in 0..d {
        if beta[j] != 0.0 {
            let col = &raw[j * n..(j + 1) * n];
            resid.iter_mut().zip(col).for_each(|(r, x)| *r -= x * beta[j]);
        }
    }
    let penalty: f64 = (0..d).filter(|&j| penalize[j]).map(|j| beta[j].abs()).sum();
    dot(&resid, &resid) + lambda * penalty
}

/// Solves the lasso problem column by column.
///
/// Exhausting `max_iter` is not an error: the best iterate is returned
/// with `converged = false`.
pub fn fit_lasso(problem: &LassoProblem, opts: &SolverOptions) -> Result<LassoSolution> {
    problem.validate()?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be > 0".into()));
    }
    let prep = Standardized::new(&problem.design, &problem.penalize);
    solve_prepared(&prep, problem, opts, None)
}

pub(crate) fn solve_prepared(
    prep: &Standardized,
    problem: &LassoProblem,
    opts: &SolverOptions,
    warm: Option<&[Vec<f64>]>,
) -> Result<LassoSolution> {
    let (_, d) = problem.design.shape();
    let m = problem.response.ncols();
    let mut coefficients = DMatrix::zeros(d, m);
    let mut objective_value = 0.0;
    let mut iterations = 0;
    let mut converged = true;
    let mut sweep_objectives = Vec::with_capacity(m);
    for c in 0..m {
        let y: Vec<f64> = problem.response.column(c).iter().copied().collect();
        let (yc, ymean) = prep.center_response(&y);
        let run = prep.solve(&yc, problem.lambda, opts, warm.map(|w| w[c].as_slice()));
        let beta = prep.unstandardize(&run.beta_std, ymean);
        objective_value += lasso_objective(&problem.design, &y, &beta, &problem.penalize, problem.lambda);
        coefficients.column_mut(c).copy_from_slice(&beta);
        iterations = iterations.max(run.iterations);
        converged &= run.converged;
        sweep_objectives.push(run.trace);
    }
    Ok(LassoSolution {
        coefficients,
        objective_value,
        iterations,
        converged,
        dropped_columns: prep.dropped.clone(),
        sweep_objectives,
    })
}

/// λ_max = max over penalized j (and response columns) of |2 x_jᵀ y_c|.
pub fn lambda_max(design: &DMatrix<f64>, response: &DMatrix<f64>, penalize: &[bool]) -> Result<f64> {
    LassoProblem::new(design.clone(), response.clone(), penalize.to_vec(), 0.0)?;
    let prep = Standardized::new(design, penalize);
    Ok(lambda_max_prepared(&prep, response))
}

fn lambda_max_prepared(prep: &Standardized, response: &DMatrix<f64>) -> f64 {
    (0..response.ncols())
        .map(|c| {
            let y: Vec<f64> = response.column(c).iter().copied().collect();
            prep.lambda_max(&prep.center_response(&y).0)
        })
        .fold(0.0, f64::max)
}

/// Descending log-spaced grid from `lambda_max` to `ratio · lambda_max`.
pub fn log_grid(lambda_max: f64, n_lambda: usize, ratio: f64) -> Result<Vec<f64>> {
    if n_lambda < 2 {
        return Err(Error::InvalidArgument("n_lambda must be >= 2".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!("grid ratio must be in (0,1), got {ratio}")));
    }
    let steps = (n_lambda - 1) as f64;
    let mut grid: Vec<f64> = (0..n_lambda).map(|i| lambda_max * ratio.powf(i as f64 / steps)).collect();
    grid[0] = lambda_max;
    grid[n_lambda - 1] = lambda_max * ratio;
    Ok(grid)
}

/// Penalty grid for a problem; errors when the response carries no signal.
pub fn lambda_grid(design: &DMatrix<f64>, response: &DMatrix<f64>, penalize: &[bool], n_lambda: usize, ratio: f64) -> Result<Vec<f64>> {
    let lmax = lambda_max(design, response, penalize)?;
    if lmax == 0.0 {
        return Err(Error::ZeroResponse);
    }
    log_grid(lmax, n_lambda, ratio)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_lambda: f64,
    pub best_index: usize,
    /// Mean validation MSE per grid point, in grid order.
    pub cv_curve: Vec<f64>,
    /// Standard error of the fold MSEs per grid point.
    pub cv_se: Vec<f64>,
    /// Largest λ whose mean MSE is within one standard error of the minimum.
    pub one_se_lambda: f64,
    pub one_se_index: usize,
}

/// Forward-chaining folds: (train_end, valid_end) pairs over `n` rows.
pub fn rolling_folds(n: usize, n_folds: usize, min_train: usize) -> Result<Vec<(usize, usize)>> {
    if n_folds == 0 || min_train == 0 || n < min_train + n_folds {
        return Err(Error::InsufficientData {
            context: format!("rolling-origin CV with {n_folds} folds after {min_train} training rows"),
            needed: min_train + n_folds.max(1),
            available: n,
        });
    }
    let block = (n - min_train) / n_folds;
    Ok((0..n_folds)
        .map(|f| {
            let train_end = min_train + f * block;
            let valid_end = if f + 1 == n_folds { n } else { train_end + block };
            (train_end, valid_end)
        })
        .collect())
}

/// Rolling-origin cross-validation over `grid`.
///
/// Each fold trains on a prefix of the rows and validates on the block that
/// follows it. The selected λ minimizes mean validation MSE; ties go to the
/// larger λ, then to the earlier grid index. The one-standard-error choice
/// is reported alongside.
pub fn cv_select_lambda(
    design: &DMatrix<f64>,
    response: &DMatrix<f64>,
    penalize: &[bool],
    grid: &[f64],
    n_folds: usize,
    min_train: usize,
    opts: &SolverOptions,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    if grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::InvalidArgument("lambda grid entries must be finite and >= 0".into()));
    }
    LassoProblem::new(design.clone(), response.clone(), penalize.to_vec(), 0.0)?;
    let folds = rolling_folds(design.nrows(), n_folds, min_train)?;

    // Distinct λ values, solved largest first with warm starts.
    let mut distinct: Vec<f64> = grid.to_vec();
    distinct.sort_by(|a, b| b.total_cmp(a));
    distinct.dedup();

    let per_fold: Vec<HashMap<u64, f64>> = folds
        .par_iter()
        .map(|&(train_end, valid_end)| fold_errors(design, response, penalize, &distinct, train_end, valid_end, opts))
        .collect();

    let cv_curve: Vec<f64> = grid
        .iter()
        .map(|l| per_fold.iter().map(|f| f[&l.to_bits()]).sum::<f64>() / per_fold.len() as f64)
        .collect();
    let n_f = per_fold.len() as f64;
    let cv_se: Vec<f64> = grid
        .iter()
        .zip(&cv_curve)
        .map(|(l, mean)| {
            if per_fold.len() < 2 {
                return 0.0;
            }
            let ss: f64 = per_fold.iter().map(|f| (f[&l.to_bits()] - mean).powi(2)).sum();
            (ss / (n_f - 1.0) / n_f).sqrt()
        })
        .collect();

    let mut best_index = 0;
    for (i, (&mse, &l)) in cv_curve.iter().zip(grid).enumerate().skip(1) {
        let best = cv_curve[best_index];
        if mse < best || (mse == best && l > grid[best_index]) {
            best_index = i;
        }
    }
    let threshold = cv_curve[best_index] + cv_se[best_index];
    let mut one_se_index = best_index;
    for (i, (&mse, &l)) in cv_curve.iter().zip(grid).enumerate() {
        if mse <= threshold && l > grid[one_se_index] {
            one_se_index = i;
        }
    }
    Ok(CvResult {
        best_lambda: grid[best_index],
        best_index,
        cv_curve,
        cv_se,
        one_se_lambda: grid[one_se_index],
        one_se_index,
    })
}

fn fold_errors(
    design: &DMatrix<f64>,
    response: &DMatrix<f64>,
    penalize: &[bool],
    lambdas: &[f64],
    train_end: usize,
    valid_end: usize,
    opts: &SolverOptions,
) -> HashMap<u64, f64> {
    let train_x = design.rows(0, train_end).into_owned();
    let valid_x = design.rows(train_end, valid_end - train_end).into_owned();
    let prep = Standardized::new(&train_x, penalize);
    let m = response.ncols();
    let targets: Vec<(Vec<f64>, f64)> = (0..m)
        .map(|c| {
            let y: Vec<f64> = response.column(c).rows(0, train_end).iter().copied().collect();
            prep.center_response(&y)
        })
        .collect();
    let mut warm: Vec<Option<Vec<f64>>> = vec![None; m];
    let mut out = HashMap::with_capacity(lambdas.len());
    let n_valid = (valid_end - train_end) * m;
    for &lambda in lambdas {
        let mut sse = 0.0;
        for c in 0..m {
            let (yc, ymean) = &targets[c];
            let run = prep.solve(yc, lambda, opts, warm[c].as_deref());
            let beta = prep.unstandardize(&run.beta_std, *ymean);
            for r in 0..valid_x.nrows() {
                let pred: f64 = (0..beta.len()).map(|j| valid_x[(r, j)] * beta[j]).sum();
                let e = response[(train_end + r, c)] - pred;
                sse += e * e;
            }
            warm[c] = Some(run.beta_std);
        }
        out.insert(lambda.to_bits(), sse / n_valid as f64);
    }
    out
}
