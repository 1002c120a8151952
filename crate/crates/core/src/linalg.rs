//! Dense least-squares helpers shared by the ADF regression and test oracles.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    pub rss: f64,
    /// Diagonal of (XᵀX)⁻¹.
    pub xtx_inv_diag: DVector<f64>,
}

/// Ordinary least squares through a QR factorization.
///
/// Returns `None` when the design is numerically rank deficient
/// (|R_ii| below 1e-10 of the largest diagonal entry) or has fewer rows
/// than columns.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<OlsFit> {
    let (n, d) = x.shape();
    if n < d || d == 0 {
        return None;
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let max_diag = (0..d).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if max_diag == 0.0 || (0..d).any(|i| r[(i, i)].abs() <= 1e-10 * max_diag) {
        return None;
    }
    let qty = qr.q().transpose() * y;
    let coefficients = r.solve_upper_triangular(&qty)?;
    let resid = y - x * &coefficients;
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(d, d))?;
    let xtx_inv_diag = DVector::from_iterator(d, (0..d).map(|i| r_inv.row(i).norm_squared()));
    Some(OlsFit {
        coefficients,
        rss: resid.norm_squared(),
        xtx_inv_diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0]);
        let fit = ols(&x, &y).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(fit.rss < 1e-20);
        // (XᵀX)⁻¹ for this design is [[5/6, -1/2], [-1/2, 1/2]].
        assert!((fit.xtx_inv_diag[0] - 5.0 / 6.0).abs() < 1e-12);
        assert!((fit.xtx_inv_diag[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn collinear_design_rejected() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0]);
        assert!(ols(&x, &y).is_none());
    }
}
