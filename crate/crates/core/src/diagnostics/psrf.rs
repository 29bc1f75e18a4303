//! Multivariate potential scale reduction factor over ensemble summary
//! series.
//!
//! Given M independent runs' summary series, the between- and within-run
//! covariance matrices B/T and W are formed and the largest eigenvalue of
//! `W^{-1} B/T` computed through a symmetric reduction: Cholesky `W = C C'`,
//! then the largest eigenvalue of `C^{-1} (B/T) C^{-t}`. The factor is
//! `(T-1)/T + ((M+1)/M) * lambda_1` and approaches 1 from above at
//! convergence.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::diagnostics::summaries::SummarySeries;
use crate::error::{Error, Result};

/// Relative pivot floor below which W is reported singular instead of
/// factorized.
const CHOLESKY_PIVOT_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct PsrfReport {
    /// `(T-1)/T + ((M+1)/M) * lambda_max`; absent when W is singular.
    pub r_hat: Option<f64>,
    /// Largest eigenvalue of `W^{-1} B/T`; absent when W is singular.
    pub lambda_max: Option<f64>,
    pub w_singular: bool,
    pub m_runs: usize,
    pub t_len: usize,
    pub dim: usize,
    /// Pooled posterior covariance estimate `(T-1)/T W + ((M+1)/M) B/T`,
    /// row-major `dim x dim`; absent when W is singular. Kept out of the
    /// serialized reports, which only carry the scalar summaries.
    #[serde(skip)]
    pub v_hat: Option<Vec<f64>>,
}

/// Compute the multivariate PSRF of `M >= 2` equally shaped summary series.
pub fn mpsrf(series: &[&SummarySeries]) -> Result<PsrfReport> {
    let m = series.len();
    if m < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 runs, got {m}"
        )));
    }
    let t = series[0].t_len;
    let n = series[0].dim;
    if t < 2 {
        return Err(Error::InvalidInput(format!(
            "need series length >= 2, got {t}"
        )));
    }
    if series.iter().any(|s| s.t_len != t || s.dim != n) {
        return Err(Error::InvalidInput(
            "summary series have mismatched shapes".into(),
        ));
    }

    // per-run means and the grand mean
    let mut run_means = Vec::with_capacity(m);
    for s in series {
        let mut mu = DVector::zeros(n);
        for tt in 0..t {
            for i in 0..n {
                mu[i] += s.values[tt * n + i];
            }
        }
        mu /= t as f64;
        run_means.push(mu);
    }
    let mut grand = DVector::zeros(n);
    for mu in &run_means {
        grand += mu;
    }
    grand /= m as f64;

    // B/T: between-run covariance of the run means
    let mut b_over_t = DMatrix::zeros(n, n);
    for mu in &run_means {
        let d = mu - &grand;
        b_over_t += &d * d.transpose();
    }
    b_over_t /= (m - 1) as f64;

    // W: pooled within-run covariance around each run's own mean
    let mut w = DMatrix::zeros(n, n);
    for (s, mu) in series.iter().zip(&run_means) {
        for tt in 0..t {
            let d = DVector::from_fn(n, |i, _| s.values[tt * n + i] - mu[i]);
            w += &d * d.transpose();
        }
    }
    w /= (m * (t - 1)) as f64;

    let base = PsrfReport {
        r_hat: None,
        lambda_max: None,
        w_singular: true,
        m_runs: m,
        t_len: t,
        dim: n,
        v_hat: None,
    };

    let Some(chol) = cholesky_lower(&w) else {
        return Ok(base);
    };

    // symmetric reduction: lambda(W^{-1} B/T) = lambda(C^{-1} B/T C^{-t})
    let inv_c_b = forward_substitute(&chol, &b_over_t);
    let reduced = forward_substitute(&chol, &inv_c_b.transpose());
    let symmetric = (reduced.transpose() + &reduced) * 0.5; // shed rounding asymmetry
    let eigen = symmetric.symmetric_eigen();
    let lambda_max = eigen
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);

    let tf = t as f64;
    let mf = m as f64;
    let r_hat = (tf - 1.0) / tf + ((mf + 1.0) / mf) * lambda_max;
    let v_hat = w * ((tf - 1.0) / tf) + b_over_t * ((mf + 1.0) / mf);

    Ok(PsrfReport {
        r_hat: Some(r_hat),
        lambda_max: Some(lambda_max),
        w_singular: false,
        v_hat: Some(v_hat.as_slice().to_vec()),
        ..base
    })
}

/// Lower Cholesky factor, or None when a pivot falls below
/// `CHOLESKY_PIVOT_RTOL` times the mean diagonal (the matrix is then
/// reported singular rather than silently regularized).
fn cholesky_lower(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let scale = a.diagonal().iter().sum::<f64>() / n as f64;
    let floor = CHOLESKY_PIVOT_RTOL * scale.max(f64::MIN_POSITIVE);
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= floor {
                    return None;
                }
                l[(i, j)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Solve `L X = B` for lower-triangular L, column by column.
fn forward_substitute(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let cols = b.ncols();
    let mut x = DMatrix::zeros(n, cols);
    for c in 0..cols {
        for i in 0..n {
            let mut s = b[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}
