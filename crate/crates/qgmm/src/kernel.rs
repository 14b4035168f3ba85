//! Log quasi-posterior target and the frozen-weighting surrogate.
//!
//! The target kernel is
//!
//! ```text
//! ln π(θ) = ½·ln|W(θ)| − (n/2)·m̄(θ)ᵀ W(θ) m̄(θ) + ln p(θ),   W(θ) = V(θ)⁻¹
//! ```
//!
//! evaluated entirely in the log domain through the Cholesky factor of V(θ):
//! `ln|W| = −2·Σⱼ ln Lⱼⱼ` and the quadratic form is `‖L⁻¹m̄‖²`. The surrogate
//! reuses the factor cached at the current state instead of refactoring, so a
//! surrogate call costs O(k²) while a target call costs O(nk² + k³).

use nalgebra::DVector;

use crate::linalg::CholFactor;
use crate::moment::MomentModel;
use crate::prior::PriorState;

/// Log-target value at θ together with the weighting factor it was computed
/// under. `w_chol` is `None` exactly when the weighting was singular and the
/// value is the −∞ rejection sentinel.
#[derive(Clone, Debug)]
pub struct TargetEval {
    /// ln π(θ); −∞ when the weighting could not be factored.
    pub log_target: f64,
    /// Quasi-likelihood part `½ln|W| − (n/2)·m̄ᵀWm̄` (excludes the prior),
    /// kept so the cache can be refreshed after a Gibbs update of τ.
    pub log_quasi: f64,
    /// Factor of V(θ), absent on the singular branch.
    pub w_chol: Option<CholFactor>,
    pub theta: DVector<f64>,
}

impl TargetEval {
    pub fn is_finite(&self) -> bool {
        self.log_target.is_finite()
    }

    /// The weighting factor; panics on the singular branch, which chain
    /// states never hold.
    pub fn w_chol(&self) -> &CholFactor {
        self.w_chol.as_ref().expect("finite state holds a factor")
    }
}

/// Quasi-likelihood part under a given weighting factor:
/// `½ln|W| − (n/2)·‖L⁻¹m̄(θ)‖²`.
pub(crate) fn log_quasi_with(model: &MomentModel, theta: &DVector<f64>, w_chol: &CholFactor) -> f64 {
    let mbar = model.mean_moment(theta);
    -w_chol.log_det_sqrt() - 0.5 * model.n() as f64 * w_chol.quad_inv(&mbar)
}

/// Full target evaluation: factors V(θ) (with jitter escalation) and returns
/// the −∞ sentinel if the factorization fails.
pub fn log_target(model: &MomentModel, prior: &PriorState, theta: &DVector<f64>) -> TargetEval {
    match model.weighting_cholesky(theta) {
        Ok(w_chol) => {
            let log_quasi = log_quasi_with(model, theta, &w_chol);
            TargetEval {
                log_target: log_quasi + prior.log_density(theta),
                log_quasi,
                w_chol: Some(w_chol),
                theta: theta.clone(),
            }
        }
        Err(_) => TargetEval {
            log_target: f64::NEG_INFINITY,
            log_quasi: f64::NEG_INFINITY,
            w_chol: None,
            theta: theta.clone(),
        },
    }
}

/// Target evaluation under a fixed weighting factor (no factorization); used
/// for the fixed-W test mode, where the factor defines the target itself.
pub fn log_target_with(
    model: &MomentModel,
    prior: &PriorState,
    theta: &DVector<f64>,
    w_chol: &CholFactor,
) -> TargetEval {
    let log_quasi = log_quasi_with(model, theta, w_chol);
    TargetEval {
        log_target: log_quasi + prior.log_density(theta),
        log_quasi,
        w_chol: Some(w_chol.clone()),
        theta: theta.clone(),
    }
}

/// Surrogate kernel: the target with W frozen at the current state's factor,
/// `½ln|W(θ⁽ᵗ⁾)| − (n/2)·m̄(θ′)ᵀW(θ⁽ᵗ⁾)m̄(θ′) + ln p(θ′)`.
pub fn log_surrogate(
    model: &MomentModel,
    prior: &PriorState,
    theta_new: &DVector<f64>,
    w_chol_current: &CholFactor,
) -> f64 {
    log_quasi_with(model, theta_new, w_chol_current) + prior.log_density(theta_new)
}
