//! Synthetic stationary VAR processes with known coefficients.

use chrono::{Duration, NaiveDate};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::TimeSeriesPanel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticVarSpec {
    pub intercept: Vec<f64>,
    /// p matrices, each K × K; `lag_matrices[l][i][j]` is the effect of
    /// series j at lag l+1 on series i.
    pub lag_matrices: Vec<Vec<Vec<f64>>>,
    pub noise_cov: Vec<Vec<f64>>,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub burn_in: usize,
    /// Optional pre-sample values, most recent first. Zeros when absent.
    #[serde(default)]
    pub initial: Option<Vec<Vec<f64>>>,
}

impl SyntheticVarSpec {
    pub fn k(&self) -> usize {
        self.intercept.len()
    }

    pub fn p(&self) -> usize {
        self.lag_matrices.len()
    }

    /// Diagonal noise with a common standard deviation.
    pub fn isotropic_noise(k: usize, sigma: f64) -> Vec<Vec<f64>> {
        (0..k)
            .map(|i| (0..k).map(|j| if i == j { sigma * sigma } else { 0.0 }).collect())
            .collect()
    }

    pub fn validate(&self) -> Result<f64> {
        let k = self.k();
        if k == 0 || self.p() == 0 {
            return Err(Error::InvalidArgument("synthetic VAR needs K >= 1 and p >= 1".into()));
        }
        if self.noise_cov.len() != k || self.noise_cov.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch(format!("noise covariance must be {k}x{k}")));
        }
        for i in 0..k {
            for j in 0..k {
                if (self.noise_cov[i][j] - self.noise_cov[j][i]).abs() > 1e-12 {
                    return Err(Error::InvalidArgument("noise covariance must be symmetric".into()));
                }
            }
        }
        if let Some(init) = &self.initial {
            if init.len() > self.p() || init.iter().any(|v| v.len() != k) {
                return Err(Error::DimensionMismatch("initial values must be at most p vectors of length K".into()));
            }
        }
        let (radius, stationary) = check_stationarity(&self.lag_matrices)?;
        if !stationary {
            return Err(Error::NonStationary { radius });
        }
        Ok(radius)
    }
}

/// Spectral radius of the companion matrix and whether it is below one.
pub fn check_stationarity(lag_matrices: &[Vec<Vec<f64>>]) -> Result<(f64, bool)> {
    let p = lag_matrices.len();
    if p == 0 {
        return Err(Error::InvalidArgument("no lag matrices".into()));
    }
    let k = lag_matrices[0].len();
    if k == 0 || lag_matrices.iter().any(|m| m.len() != k || m.iter().any(|r| r.len() != k)) {
        return Err(Error::DimensionMismatch("lag matrices must all be square of equal size".into()));
    }
    let kp = k * p;
    let mut companion = DMatrix::zeros(kp, kp);
    for (l, m) in lag_matrices.iter().enumerate() {
        for i in 0..k {
            for j in 0..k {
                companion[(i, l * k + j)] = m[i][j];
            }
        }
    }
    for i in k..kp {
        companion[(i, i - k)] = 1.0;
    }
    if companion.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lag matrices".into()));
    }
    let radius = companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    Ok((radius, radius < 1.0))
}

/// Lower factor L with L·Lᵀ = cov, valid for semi-definite input.
fn noise_factor(cov: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let k = cov.len();
    let m = DMatrix::from_fn(k, k, |i, j| cov[i][j]);
    let eig = m.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&v| v < -1e-10) {
        return Err(Error::InvalidArgument("noise covariance is not positive semi-definite".into()));
    }
    let sqrt_d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * sqrt_d)
}

/// Simulates `n` observations (K × n), discarding `burn_in` leading draws.
pub fn generate(spec: &SyntheticVarSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let k = spec.k();
    let p = spec.p();
    let factor = noise_factor(&spec.noise_cov)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // history[0] is the most recent observation.
    let mut history: Vec<Vec<f64>> = vec![vec![0.0; k]; p];
    if let Some(init) = &spec.initial {
        for (slot, v) in history.iter_mut().zip(init) {
            slot.clone_from(v);
        }
    }
    let mut out = vec![Vec::with_capacity(spec.n); k];
    for step in 0..spec.burn_in + spec.n {
        let shocks: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let next: Vec<f64> = (0..k)
            .map(|i| {
                let ar: f64 = (0..p)
                    .map(|l| (0..k).map(|j| spec.lag_matrices[l][i][j] * history[l][j]).sum::<f64>())
                    .sum();
                let noise: f64 = (0..k).map(|j| factor[(i, j)] * shocks[j]).sum();
                spec.intercept[i] + ar + noise
            })
            .collect();
        history.rotate_right(1);
        history[0].clone_from(&next);
        if step >= spec.burn_in {
            for (row, v) in out.iter_mut().zip(&next) {
                row.push(*v);
            }
        }
    }
    Ok(out)
}

/// How real-valued synthetic levels become non-negative counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountTransform {
    /// Round to the nearest integer, negatives clamped to zero.
    Round,
    /// Poisson draw with mean max(level, 0).
    Poisson,
}

/// Wraps synthetic levels as a weekly count panel starting at `start`.
pub fn to_count_panel(
    series: &[Vec<f64>],
    names: &[String],
    start: NaiveDate,
    transform: CountTransform,
    seed: u64,
) -> Result<TimeSeriesPanel> {
    if series.len() != names.len() || series.is_empty() {
        return Err(Error::DimensionMismatch("one name per synthetic series required".into()));
    }
    let n = series[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = series
        .iter()
        .map(|row| {
            row.iter()
                .map(|&v| match transform {
                    CountTransform::Round => v.max(0.0).round() as u64,
                    CountTransform::Poisson if v > 0.0 => {
                        Poisson::new(v).map(|d| d.sample(&mut rng) as u64).unwrap_or(0)
                    }
                    CountTransform::Poisson => 0,
                })
                .collect()
        })
        .collect();
    let weeks = (0..n).map(|t| start + Duration::days(7 * t as i64)).collect();
    TimeSeriesPanel::new(names.to_vec(), weeks, counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi() -> Vec<Vec<Vec<f64>>> {
        vec![vec![vec![0.5, 0.0], vec![0.3, 0.4]]]
    }

    #[test]
    fn deterministic_trajectory() {
        let spec = SyntheticVarSpec {
            intercept: vec![0.0, 0.0],
            lag_matrices: phi(),
            noise_cov: SyntheticVarSpec::isotropic_noise(2, 0.0),
            n: 2,
            seed: 0,
            burn_in: 0,
            initial: Some(vec![vec![1.0, 1.0]]),
        };
        let y = generate(&spec).unwrap();
        assert!((y[0][0] - 0.5).abs() < 1e-15 && (y[1][0] - 0.7).abs() < 1e-15);
        assert!((y[0][1] - 0.25).abs() < 1e-15 && (y[1][1] - 0.43).abs() < 1e-15);
    }

    #[test]
    fn intercept_only_mean() {
        let n = 5000;
        let spec = SyntheticVarSpec {
            intercept: vec![2.0],
            lag_matrices: vec![vec![vec![0.0]]],
            noise_cov: vec![vec![1.0]],
            n,
            seed: 42,
            burn_in: 50,
            initial: None,
        };
        let y = generate(&spec).unwrap();
        let mean = y[0].iter().sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 3.0 / (n as f64).sqrt());
        assert_eq!(generate(&spec).unwrap(), y);
    }

    #[test]
    fn radius_examples() {
        let (r, s) = check_stationarity(&phi()).unwrap();
        assert!((r - 0.5).abs() < 1e-12 && s);
        let (r, s) = check_stationarity(&[vec![vec![1.0, 0.0], vec![0.0, 1.0]]]).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert!(!s);
        let (r, _) = check_stationarity(&[vec![vec![0.0, 0.0], vec![0.0, 0.0]]]).unwrap();
        assert_eq!(r, 0.0);
        // Rotation-like dynamics: complex pair of modulus 0.9.
        let (r, _) = check_stationarity(&[vec![vec![0.0, -0.9], vec![0.9, 0.0]]]).unwrap();
        assert!((r - 0.9).abs() < 1e-12);
        assert!(check_stationarity(&[vec![vec![1.0]], vec![vec![1.0, 0.0]]]).is_err());
    }

    #[test]
    fn ar2_companion() {
        // y_t = 1.1 y_{t-1} − 0.3 y_{t-2}: roots 0.6 and 0.5.
        let (r, s) = check_stationarity(&[vec![vec![1.1]], vec![vec![-0.3]]]).unwrap();
        assert!((r - 0.6).abs() < 1e-12 && s);
    }

    #[test]
    fn nonstationary_rejected() {
        let spec = SyntheticVarSpec {
            intercept: vec![0.0],
            lag_matrices: vec![vec![vec![1.0]]],
            noise_cov: vec![vec![1.0]],
            n: 10,
            seed: 1,
            burn_in: 0,
            initial: None,
        };
        assert!(matches!(generate(&spec).unwrap_err(), Error::NonStationary { .. }));
    }

    #[test]
    fn ar1_lag_one_autocovariance() {
        let (phi1, sigma, n) = (0.6, 1.0, 10_000);
        let spec = SyntheticVarSpec {
            intercept: vec![0.0],
            lag_matrices: vec![vec![vec![phi1]]],
            noise_cov: vec![vec![sigma * sigma]],
            n,
            seed: 7,
            burn_in: 200,
            initial: None,
        };
        let y = &generate(&spec).unwrap()[0];
        let mean = y.iter().sum::<f64>() / n as f64;
        let acov = y.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / n as f64;
        let expected = phi1 * sigma * sigma / (1.0 - phi1 * phi1);
        assert!((acov - expected).abs() < 0.1 * expected, "{acov} vs {expected}");
    }

    #[test]
    fn count_panel_rounds_and_clamps() {
        let start = NaiveDate::from_ymd_opt(2023, 1, 1).unwrap();
        let p = to_count_panel(&[vec![-1.2, 2.6, 3.4]], &["A".into()], start, CountTransform::Round, 0).unwrap();
        assert_eq!(p.counts(), &[vec![0, 3, 3]]);
        let q = to_count_panel(&[vec![5.0; 50]], &["A".into()], start, CountTransform::Poisson, 3).unwrap();
        let mean = q.counts()[0].iter().sum::<u64>() as f64 / 50.0;
        assert!((mean - 5.0).abs() < 1.5);
    }
}
