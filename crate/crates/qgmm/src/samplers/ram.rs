//! Adaptive random-walk Metropolis with robust covariance adaptation.
//!
//! The proposal is θ′ = θ + S·u with u ~ N(0, I); after every step the
//! lower-triangular scale S is updated through the rank-one rule
//!
//! ```text
//! S·Sᵀ ← S·(I + η_t·(α − α*)·uuᵀ/‖u‖²)·Sᵀ,    η_t = min(1, k·t^(−γ)),
//! ```
//!
//! applied directly to the factor, steering the realized acceptance
//! probability α toward the target α*.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::linalg::{chol_rank_one, standard_normal_vector};

use super::{accept_with, ChainState, StepCtx, StepReport};

/// Adaptation state: the proposal scale factor S, the iteration counter, and
/// the tuning constants (α*, γ).
#[derive(Clone, Debug)]
pub struct AdaptState {
    s: DMatrix<f64>,
    t: u64,
    alpha_star: f64,
    gamma: f64,
}

impl AdaptState {
    /// Starts from S = `initial_scale`·I at iteration 1.
    pub fn new(k: usize, initial_scale: f64, alpha_star: f64, gamma: f64) -> Self {
        Self {
            s: DMatrix::identity(k, k) * initial_scale,
            t: 1,
            alpha_star,
            gamma,
        }
    }

    pub fn scale(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn iteration(&self) -> u64 {
        self.t
    }

    pub fn alpha_star(&self) -> f64 {
        self.alpha_star
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Rank-one update of S from the proposal increment u and the realized
    /// acceptance probability α. A breakdown of the triangular downdate
    /// leaves S unchanged for that step.
    pub fn update(&mut self, u: &DVector<f64>, alpha: f64) {
        let k = self.s.nrows() as f64;
        let eta = (k * (self.t as f64).powf(-self.gamma)).min(1.0);
        self.t += 1;
        let c = eta * (alpha - self.alpha_star);
        let norm = u.norm();
        if c == 0.0 || norm == 0.0 {
            return;
        }
        let mut x = (&self.s * u) * (c.abs().sqrt() / norm);
        let mut trial = self.s.clone();
        if chol_rank_one(&mut trial, &mut x, c.signum()) {
            self.s = trial;
        }
    }
}

/// One adaptive random-walk Metropolis step.
pub fn ram_step<R: Rng + ?Sized>(
    state: ChainState,
    adapt: &mut AdaptState,
    ctx: &StepCtx,
    rng: &mut R,
) -> (ChainState, StepReport) {
    let k = state.theta.len();
    let u = standard_normal_vector(k, rng);
    let theta_new = &state.theta + adapt.scale() * &u;
    let cand = ctx.eval(&state.prior, &theta_new);

    let log_alpha = (cand.log_target - state.target.log_target).min(0.0);
    let accepted = accept_with(log_alpha, rng);
    let alpha = log_alpha.exp();
    adapt.update(&u, if alpha.is_nan() { 0.0 } else { alpha });

    let report = StepReport {
        stage1_accepted: accepted,
        stage2_accepted: accepted,
        log_alpha1: log_alpha,
        log_alpha2: None,
        theta_proposed: theta_new.clone(),
    };
    if accepted {
        (
            ChainState {
                theta: theta_new,
                prior: state.prior,
                target: cand,
            },
            report,
        )
    } else {
        (state, report)
    }
}
