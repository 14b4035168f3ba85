//! Multivariate effective sample size via multivariate batch means, plus the
//! per-iteration and per-second efficiency measures.
//!
//! With m retained draws in p dimensions,
//!
//! ```text
//! mESS = m · (det Λ / det Σ̂)^(1/p)
//! ```
//!
//! where Λ is the sample covariance of the draws and Σ̂ the batch-means
//! estimate of the chain's asymptotic covariance with batch size b = ⌊√m⌋.
//! Determinant ratios are computed from Cholesky log-determinants.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::CholFactor;

/// Minimum number of draws for the batch-means estimator (b = 4, a = 4).
const MIN_DRAWS: usize = 16;

/// Sanity bound: mESS beyond 1.5·m flags a numerical fault.
const SUPER_EFFICIENCY_BOUND: f64 = 1.5;

/// mESS together with the efficiency measures and the batch layout used.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MessReport {
    pub mess: f64,
    /// mess / retained draws, in (0, 1.5].
    pub mess_per_iter: f64,
    /// mess / wall-clock sampling seconds.
    pub mess_per_sec: f64,
    pub batch_size: usize,
    pub p: usize,
}

/// Multivariate batch-means estimate of the asymptotic covariance:
/// b/(a−1) · Σⱼ (Ȳⱼ − Ȳ)(Ȳⱼ − Ȳ)ᵀ over a = ⌊m/b⌋ batches of size b = ⌊√m⌋,
/// trailing remainder rows dropped.
pub fn batch_means_cov(draws: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = draws.nrows();
    let p = draws.ncols();
    if m < MIN_DRAWS {
        return Err(Error::TooFewDraws {
            got: m,
            min: MIN_DRAWS,
        });
    }
    let b = (m as f64).sqrt().floor() as usize;
    let a = m / b;
    let mut batch_means = DMatrix::zeros(a, p);
    for j in 0..a {
        let block = draws.rows(j * b, b);
        for c in 0..p {
            batch_means[(j, c)] = block.column(c).sum() / b as f64;
        }
    }
    let grand = DVector::from_fn(p, |c, _| batch_means.column(c).sum() / a as f64);
    let mut sigma = DMatrix::zeros(p, p);
    for j in 0..a {
        let d = batch_means.row(j).transpose() - &grand;
        sigma += &d * d.transpose();
    }
    sigma *= b as f64 / (a as f64 - 1.0);
    Ok(sigma)
}

/// Sample covariance of the draws with divisor m−1.
fn sample_cov(draws: &DMatrix<f64>) -> DMatrix<f64> {
    let m = draws.nrows();
    let p = draws.ncols();
    let mean = DVector::from_fn(p, |c, _| draws.column(c).sum() / m as f64);
    let mut cov = DMatrix::zeros(p, p);
    for i in 0..m {
        let d = draws.row(i).transpose() - &mean;
        cov += &d * d.transpose();
    }
    cov / (m as f64 - 1.0)
}

/// Computes the mESS report for a draw matrix (rows are sweeps). Fails with
/// `SingularCovariance` when either covariance cannot be factored after the
/// jitter ladder, and with `SuperEfficient` past the 1.5·m sanity bound.
pub fn mess(draws: &DMatrix<f64>, sampling_seconds: f64) -> Result<MessReport> {
    let m = draws.nrows();
    let p = draws.ncols();
    let sigma = batch_means_cov(draws)?;
    let lambda = sample_cov(draws);
    let lambda_chol = CholFactor::jittered(&lambda).ok_or(Error::SingularCovariance)?;
    let sigma_chol = CholFactor::jittered(&sigma).ok_or(Error::SingularCovariance)?;
    let log_det_ratio = 2.0 * (lambda_chol.log_det_sqrt() - sigma_chol.log_det_sqrt());
    let mess = m as f64 * (log_det_ratio / p as f64).exp();
    if mess > SUPER_EFFICIENCY_BOUND * m as f64 {
        return Err(Error::SuperEfficient { mess, m });
    }
    Ok(MessReport {
        mess,
        mess_per_iter: mess / m as f64,
        mess_per_sec: mess / sampling_seconds,
        batch_size: (m as f64).sqrt().floor() as usize,
        p,
    })
}

/// Component-wise median across runs (lower median for even counts, so the
/// result is deterministic and equals one of the inputs per component).
pub fn median_across_runs(reports: &[MessReport]) -> Result<MessReport> {
    if reports.is_empty() {
        return Err(Error::EmptyInput("no mESS reports to aggregate".into()));
    }
    Ok(MessReport {
        mess: lower_median(reports.iter().map(|r| r.mess)),
        mess_per_iter: lower_median(reports.iter().map(|r| r.mess_per_iter)),
        mess_per_sec: lower_median(reports.iter().map(|r| r.mess_per_sec)),
        batch_size: reports[0].batch_size,
        p: reports[0].p,
    })
}

fn lower_median(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(|a, b| a.partial_cmp(b).expect("mESS values are comparable"));
    v[(v.len() - 1) / 2]
}
