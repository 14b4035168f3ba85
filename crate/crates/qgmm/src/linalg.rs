//! Dense Cholesky helpers shared by the moment model, the samplers, and the
//! diagnostics.
//!
//! All weighting and precision matrices in this crate are applied through
//! triangular solves against a lower Cholesky factor; no inverse is ever
//! materialized. Log-determinants come from the factor diagonal.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Number of jitter escalations (×10 each) tried before giving up.
const JITTER_ESCALATIONS: u32 = 3;

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = A` for a symmetric
/// positive-definite `A`.
#[derive(Clone, Debug)]
pub struct CholFactor {
    l: DMatrix<f64>,
}

impl CholFactor {
    /// Plain factorization; `None` if `a` is not positive definite.
    pub fn of(a: &DMatrix<f64>) -> Option<Self> {
        Cholesky::new(a.clone()).map(|c| Self { l: c.unpack() })
    }

    /// Factorization with scale-aware jitter escalation: on failure retries
    /// with `a + λI`, λ starting at `1e-10·trace(a)/dim` and growing ×10 up
    /// to three times. `None` once the ladder is exhausted.
    pub fn jittered(a: &DMatrix<f64>) -> Option<Self> {
        if let Some(f) = Self::of(a) {
            return Some(f);
        }
        let dim = a.nrows();
        let base = 1e-10 * a.trace() / dim as f64;
        if !(base > 0.0) {
            return None;
        }
        let mut lambda = base;
        for _ in 0..=JITTER_ESCALATIONS {
            let mut jittered = a.clone();
            for j in 0..dim {
                jittered[(j, j)] += lambda;
            }
            if let Some(f) = Self::of(&jittered) {
                return Some(f);
            }
            lambda *= 10.0;
        }
        None
    }

    /// Wraps an existing lower-triangular matrix with positive diagonal.
    pub fn from_lower(l: DMatrix<f64>) -> Self {
        debug_assert!((0..l.nrows()).all(|j| l[(j, j)] > 0.0));
        Self { l }
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Σⱼ ln Lⱼⱼ, i.e. ½·ln det(L·Lᵀ).
    pub fn log_det_sqrt(&self) -> f64 {
        (0..self.dim()).map(|j| self.l[(j, j)].ln()).sum()
    }

    /// Solves `L·x = b` by forward substitution.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        self.l
            .solve_lower_triangular(b)
            .expect("factor has positive diagonal")
    }

    /// Solves `L·X = B` column-wise.
    pub fn solve_lower_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.l
            .solve_lower_triangular(b)
            .expect("factor has positive diagonal")
    }

    /// Solves `(L·Lᵀ)·x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let y = self.solve_lower(b);
        self.l
            .tr_solve_lower_triangular(&y)
            .expect("factor has positive diagonal")
    }

    /// `vᵀ·(L·Lᵀ)⁻¹·v = ‖L⁻¹v‖²` (Mahalanobis form for a covariance factor).
    pub fn quad_inv(&self, v: &DVector<f64>) -> f64 {
        self.solve_lower(v).norm_squared()
    }

    /// `vᵀ·(L·Lᵀ)·v = ‖Lᵀv‖²` (quadratic form for a precision factor).
    pub fn quad(&self, v: &DVector<f64>) -> f64 {
        self.l.tr_mul(v).norm_squared()
    }

    /// Draws from N(mean, L·Lᵀ) where the factored matrix is a covariance.
    pub fn sample_cov<R: Rng + ?Sized>(&self, mean: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let u = standard_normal_vector(self.dim(), rng);
        mean + &self.l * u
    }

    /// Draws from N(mean, (L·Lᵀ)⁻¹) where the factored matrix is a precision:
    /// solves Lᵀx = u for u ~ N(0, I).
    pub fn sample_prec<R: Rng + ?Sized>(&self, mean: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let u = standard_normal_vector(self.dim(), rng);
        let x = self
            .l
            .tr_solve_lower_triangular(&u)
            .expect("factor has positive diagonal");
        mean + x
    }
}

/// Log-density of N(x | mean, P⁻¹) where `prec` factors the precision P.
pub fn log_normal_prec(x: &DVector<f64>, mean: &DVector<f64>, prec: &CholFactor) -> f64 {
    let d = x - mean;
    -0.5 * prec.dim() as f64 * LN_2PI + prec.log_det_sqrt() - 0.5 * prec.quad(&d)
}

/// Vector of k independent standard normals.
pub fn standard_normal_vector<R: Rng + ?Sized>(k: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(k, |_, _| rng.sample(StandardNormal))
}

/// In-place rank-one update of a lower-triangular factor:
/// `L·Lᵀ ← L·Lᵀ + sign·x·xᵀ` with `sign = ±1` and `x` destroyed.
///
/// Returns `false` on downdate breakdown (result not positive definite), in
/// which case `l` is left partially modified and must be discarded.
pub fn chol_rank_one(l: &mut DMatrix<f64>, x: &mut DVector<f64>, sign: f64) -> bool {
    let k = l.nrows();
    for j in 0..k {
        let ljj = l[(j, j)];
        let xj = x[j];
        let r2 = ljj * ljj + sign * xj * xj;
        if !(r2 > 0.0) {
            return false;
        }
        let r = r2.sqrt();
        let c = r / ljj;
        let s = xj / ljj;
        l[(j, j)] = r;
        for i in (j + 1)..k {
            l[(i, j)] = (l[(i, j)] + sign * s * x[i]) / c;
            x[i] = c * x[i] - s * l[(i, j)];
        }
    }
    true
}
