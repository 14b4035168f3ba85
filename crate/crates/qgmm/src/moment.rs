//! Data and θ-dependent moment statistics for exactly identified linear and
//! instrumental-variable regression models.
//!
//! The moment condition is `E[zᵢ·(yᵢ − xᵢᵀθ)] = 0` with as many instruments
//! as parameters (`Z = X` for plain regression). Everything downstream — the
//! quasi-posterior kernel and the modified delayed-acceptance proposals —
//! evaluates through the statistics cached here:
//!
//! * `G = n⁻¹ZᵀX` and `Zᵀy`, so the mean moment `m̄(θ) = n⁻¹Zᵀ(y − Xθ)` is an
//!   O(k²) operation,
//! * the pivot `θ̂† = (ZᵀX)⁻¹Zᵀy` (OLS for `Z = X`, 2SLS for exactly
//!   identified IV), the root of the sample moments,
//! * the moment covariance `V(θ)`, factored on demand with a scale-aware
//!   jitter ladder; its inverse `W(θ)` is only ever applied through
//!   triangular solves.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::CholFactor;

/// Relative tolerance for the exact-identification residual Zᵀ(y − Xθ̂†) ≈ 0.
const PIVOT_RESIDUAL_RTOL: f64 = 1e-8;

/// Outcome vector with regressor and instrument matrices of equal row count.
#[derive(Clone, Debug)]
pub struct Dataset {
    y: DVector<f64>,
    x: DMatrix<f64>,
    z: DMatrix<f64>,
}

impl Dataset {
    /// Builds a dataset, optionally prepending a constant-1 column to both X
    /// and Z. Pass `z: None` for plain regression (instruments = regressors).
    ///
    /// Checks `n > k ≥ 1`, equal row counts, and invertibility of ZᵀX.
    pub fn new(
        y: DVector<f64>,
        x: DMatrix<f64>,
        z: Option<DMatrix<f64>>,
        add_intercept: bool,
    ) -> Result<Self> {
        let z = z.unwrap_or_else(|| x.clone());
        if x.nrows() != y.len() || z.nrows() != y.len() {
            return Err(Error::InvalidArgument(format!(
                "row mismatch: y has {}, X has {}, Z has {}",
                y.len(),
                x.nrows(),
                z.nrows()
            )));
        }
        if x.ncols() != z.ncols() {
            return Err(Error::InvalidArgument(format!(
                "exact identification requires as many instruments as regressors \
                 (X has {}, Z has {})",
                x.ncols(),
                z.ncols()
            )));
        }
        let (x, z) = if add_intercept {
            (prepend_ones(&x), prepend_ones(&z))
        } else {
            (x, z)
        };
        let (n, k) = (x.nrows(), x.ncols());
        if k < 1 {
            return Err(Error::InvalidArgument("need at least one regressor".into()));
        }
        if n <= k {
            return Err(Error::InvalidArgument(format!(
                "need n > k, got n={n}, k={k}"
            )));
        }
        let ztx = z.tr_mul(&x);
        if !ztx.lu().is_invertible() {
            return Err(Error::RankDeficient("ZᵀX is not invertible".into()));
        }
        Ok(Self { y, x, z })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }
}

fn prepend_ones(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols() + 1);
    out.column_mut(0).fill(1.0);
    out.columns_mut(1, m.ncols()).copy_from(m);
    out
}

/// Immutable moment model: dataset plus the cached cross-products, Jacobian
/// `G`, and pivot estimator. Safe to share across concurrent chains; all
/// θ-dependent evaluations are pure.
#[derive(Clone, Debug)]
pub struct MomentModel {
    data: Dataset,
    g: DMatrix<f64>,
    pivot: DVector<f64>,
    zty: DVector<f64>,
}

impl MomentModel {
    pub fn new(data: Dataset) -> Result<Self> {
        let n = data.n() as f64;
        let ztx = data.z.tr_mul(&data.x);
        let zty = data.z.tr_mul(&data.y);
        let lu = ztx.clone().lu();
        let pivot = lu
            .solve(&zty)
            .ok_or_else(|| Error::RankDeficient("ZᵀX is not invertible".into()))?;
        // exact identification: the pivot is a root of the sample moments
        let resid = &zty - &ztx * &pivot;
        if resid.norm() > PIVOT_RESIDUAL_RTOL * zty.norm().max(1.0) {
            return Err(Error::RankDeficient(
                "pivot residual Zᵀ(y − Xθ̂†) is not numerically zero".into(),
            ));
        }
        let g = ztx / n;
        Ok(Self {
            data,
            g,
            pivot,
            zty,
        })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn k(&self) -> usize {
        self.data.k()
    }

    /// Jacobian of the mean moment, `G = n⁻¹ZᵀX`.
    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// Pivot estimator `θ̂† = (ZᵀX)⁻¹Zᵀy`.
    pub fn pivot(&self) -> &DVector<f64> {
        &self.pivot
    }

    /// Single-observation moment `zᵢ·(yᵢ − xᵢᵀθ)`.
    pub fn moment_contribution(&self, i: usize, theta: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.n();
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        let resid = self.data.y[i] - self.data.x.row(i).transpose().dot(theta);
        Ok(self.data.z.row(i).transpose() * resid)
    }

    /// Mean moment `m̄(θ) = n⁻¹Zᵀ(y − Xθ)`, computed from the cached
    /// cross-products in O(k²).
    pub fn mean_moment(&self, theta: &DVector<f64>) -> DVector<f64> {
        let n = self.n() as f64;
        &self.zty / n - &self.g * theta
    }

    /// Sample covariance of the moment contributions,
    /// `V(θ) = (n−1)⁻¹ Σᵢ (mᵢ − m̄)(mᵢ − m̄)ᵀ`, accumulated in two passes and
    /// symmetric by construction.
    pub fn moment_covariance(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n();
        let k = self.k();
        let mbar = self.mean_moment(theta);
        let resid = &self.data.y - &self.data.x * theta;
        let mut acc = DMatrix::zeros(k, k);
        let mut dev = vec![0.0; k];
        for i in 0..n {
            let r = resid[i];
            for (a, d) in dev.iter_mut().enumerate() {
                *d = self.data.z[(i, a)] * r - mbar[a];
            }
            for b in 0..k {
                let db = dev[b];
                for a in b..k {
                    acc[(a, b)] += dev[a] * db;
                }
            }
        }
        let scale = 1.0 / (n as f64 - 1.0);
        for b in 0..k {
            for a in b..k {
                let v = acc[(a, b)] * scale;
                acc[(a, b)] = v;
                acc[(b, a)] = v;
            }
        }
        acc
    }

    /// Cholesky factor `L` with `LLᵀ = V(θ)`, escalating jitter on failure.
    ///
    /// Downstream code computes `W·x` as `solve(LLᵀ, x)` and log-determinants
    /// from `diag(L)`; W itself is never formed.
    pub fn weighting_cholesky(&self, theta: &DVector<f64>) -> Result<CholFactor> {
        let v = self.moment_covariance(theta);
        CholFactor::jittered(&v).ok_or(Error::SingularWeighting)
    }

    /// Proposal precision `Υ = n·GᵀWG`, computed as `n·(L⁻¹G)ᵀ(L⁻¹G)` from the
    /// weighting factor of the current state.
    pub fn proposal_precision(&self, w_chol: &CholFactor) -> DMatrix<f64> {
        let a = w_chol.solve_lower_mat(&self.g);
        let mut ups = a.tr_mul(&a) * self.n() as f64;
        // enforce exact symmetry after the solve round-trip
        let sym = (&ups + ups.transpose()) * 0.5;
        ups.copy_from(&sym);
        ups
    }
}
