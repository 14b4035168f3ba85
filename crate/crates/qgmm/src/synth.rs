//! Heteroskedastic linear-regression benchmark generator.
//!
//! Covariates are x_i = (1, x̃_iᵀ)ᵀ with x̃_i ~ N(0, S), where S is an
//! inverse-Wishart draw (identity scale, k+1 degrees of freedom) normalized
//! to a correlation matrix. The true coefficients are (1, 1, 1, 0, …, 0) and
//! the error variance depends on the first two random covariates:
//! σ_i² = (1 + x_{i,2}² + x_{i,3}²)/3.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CholFactor;
use crate::moment::Dataset;

/// RNG stream id for data generation, distinct from the chain stream.
const SYNTH_STREAM: u64 = 1;

fn default_n() -> usize {
    100
}

fn default_k() -> usize {
    5
}

/// Benchmark dataset configuration. The variance function and coefficient
/// pattern reference the first three components, so k ≥ 3.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SynthConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(n: usize, k: usize, seed: u64) -> Self {
        Self { n, k, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::InvalidArgument(format!(
                "synthetic designs need k >= 3, got {}",
                self.k
            )));
        }
        if self.n <= self.k {
            return Err(Error::InvalidArgument(format!(
                "need n > k, got n={}, k={}",
                self.n, self.k
            )));
        }
        Ok(())
    }
}

/// Draws from the inverse-Wishart with identity scale via the Bartlett
/// decomposition: a lower-triangular Wishart factor with χ entries on the
/// diagonal and standard normals below, inverted through triangular solves.
///
/// Requires `dof > dim − 1`.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(dim: usize, dof: f64, rng: &mut R) -> DMatrix<f64> {
    assert!(dof > dim as f64 - 1.0, "need dof > dim - 1");
    let mut a = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let chi = ChiSquared::new(dof - j as f64).expect("positive degrees of freedom");
        a[(j, j)] = loop {
            let v: f64 = chi.sample(rng);
            if v > 0.0 {
                break v.sqrt();
            }
        };
        for i in (j + 1)..dim {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    // Wishart draw is AAᵀ, so the inverse-Wishart draw is A⁻ᵀA⁻¹
    let a_inv = a
        .solve_lower_triangular(&DMatrix::identity(dim, dim))
        .expect("positive diagonal");
    let s = a_inv.tr_mul(&a_inv);
    (&s + s.transpose()) * 0.5
}

/// Normalizes a symmetric positive-definite matrix to a correlation matrix:
/// D·S·D with D = diag(s_jj^(−1/2)).
pub fn to_correlation(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = s.nrows();
    let mut d = DVector::zeros(dim);
    for j in 0..dim {
        if !(s[(j, j)] > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "diagonal entry {j} is not positive: {}",
                s[(j, j)]
            )));
        }
        d[j] = s[(j, j)].powf(-0.5);
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| d[i] * s[(i, j)] * d[j]))
}

/// Generates one benchmark dataset and returns it along with the true
/// coefficient vector. Deterministic given the config.
pub fn generate(config: &SynthConfig) -> Result<(Dataset, DVector<f64>)> {
    config.validate()?;
    let (n, k) = (config.n, config.k);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(SYNTH_STREAM);

    let raw = sample_inverse_wishart(k - 1, (k + 1) as f64, &mut rng);
    let corr = to_correlation(&raw)?;
    let corr_chol = CholFactor::of(&corr).ok_or_else(|| {
        Error::InvalidArgument("normalized correlation matrix is not positive definite".into())
    })?;

    let true_theta = DVector::from_fn(k, |j, _| if j < 3 { 1.0 } else { 0.0 });
    let zero = DVector::zeros(k - 1);
    let mut x = DMatrix::zeros(n, k);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        let covariates = corr_chol.sample_cov(&zero, &mut rng);
        for j in 0..k - 1 {
            x[(i, j + 1)] = covariates[j];
        }
        let sigma2 = (1.0 + x[(i, 1)].powi(2) + x[(i, 2)].powi(2)) / 3.0;
        let mean = x.row(i).transpose().dot(&true_theta);
        y[i] = mean + sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal);
    }
    let data = Dataset::new(y, x, None, false)?;
    Ok((data, true_theta))
}
