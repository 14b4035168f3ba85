//! Conventional delayed-acceptance MCMC with a symmetric adaptive
//! random-walk proposal.
//!
//! Stage 1 screens θ′ = θ + S·u against the frozen-weighting surrogate;
//! only survivors pay for the full target evaluation in stage 2, which
//! applies the exact-preserving correction using the reverse stage-1
//! probability computed under the proposal's own weighting factor. The
//! symmetric q₁ cancels from both ratios.

use rand::Rng;

use crate::kernel;
use crate::linalg::standard_normal_vector;

use super::{accept_with, AdaptState, ChainState, StepCtx, StepReport};

/// One conventional DA step: adaptive random-walk proposal, surrogate
/// screening, exact stage-2 correction. Adaptation is driven by the stage-1
/// acceptance probability (or by the realized move when
/// `ctx.adapt_on_final` is set).
pub fn da_conventional_step<R: Rng + ?Sized>(
    state: ChainState,
    adapt: &mut AdaptState,
    ctx: &StepCtx,
    rng: &mut R,
) -> (ChainState, StepReport) {
    let k = state.theta.len();
    let u = standard_normal_vector(k, rng);
    let theta_new = &state.theta + adapt.scale() * &u;

    // stage 1: surrogate ratio under the current state's frozen factor;
    // π*(θ⁽ᵗ⁾) equals the cached log-target by the anchoring identity
    let w_cur = state.target.w_chol();
    let log_surr_new = kernel::log_surrogate(ctx.model, &state.prior, &theta_new, w_cur);
    let log_alpha1 = (log_surr_new - state.target.log_target).min(0.0);

    #[cfg(debug_assertions)]
    {
        // the ½ln|W(θ⁽ᵗ⁾)| prefactor cancels in the stage-1 ratio: the ratio
        // computed with and without it must agree
        if log_surr_new.is_finite() {
            let prefactor = -w_cur.log_det_sqrt();
            let with = log_surr_new - state.target.log_target;
            let without = (log_surr_new - prefactor) - (state.target.log_target - prefactor);
            debug_assert!(
                (with - without).abs() <= 1e-9 * (1.0 + with.abs()),
                "prefactor failed to cancel: {with} vs {without}"
            );
        }
    }

    let alpha1 = log_alpha1.exp();
    let alpha1 = if alpha1.is_nan() { 0.0 } else { alpha1 };
    let stage1_accepted = rng.random::<f64>() < alpha1;

    let mut log_alpha2 = None;
    let mut accepted = None;
    if stage1_accepted {
        let cand = ctx.eval(&state.prior, &theta_new);
        let la2 = if cand.is_finite() {
            // reverse stage-1 probability under the proposal's own factor
            let log_surr_rev =
                kernel::log_surrogate(ctx.model, &state.prior, &state.theta, cand.w_chol());
            let log_alpha1_rev = (log_surr_rev - cand.log_target).min(0.0);
            ((cand.log_target + log_alpha1_rev) - (state.target.log_target + log_alpha1)).min(0.0)
        } else {
            f64::NEG_INFINITY
        };
        log_alpha2 = Some(la2);
        if accept_with(la2, rng) {
            accepted = Some(cand);
        }
    }

    let stage2_accepted = accepted.is_some();
    let alpha_adapt = if ctx.adapt_on_final {
        stage2_accepted as u64 as f64
    } else {
        alpha1
    };
    adapt.update(&u, alpha_adapt);

    let report = StepReport {
        stage1_accepted,
        stage2_accepted,
        log_alpha1,
        log_alpha2,
        theta_proposed: theta_new.clone(),
    };
    match accepted {
        Some(target) => (
            ChainState {
                theta: theta_new,
                prior: state.prior,
                target,
            },
            report,
        ),
        None => (state, report),
    }
}
