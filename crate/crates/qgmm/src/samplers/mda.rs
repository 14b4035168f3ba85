//! Modified delayed-acceptance steps.
//!
//! Both variants draw θ′ from the conditional-posterior approximation built
//! from the frozen weighting: with Υ = n·GᵀW(θ⁽ᵗ⁾)G and prior precision Q,
//! the Exact variant proposes from N(ΩΥθ̂†, Ω), Ω = (Υ+Q)⁻¹, and the Approx
//! variant from N(θ̂†, Υ⁻¹). Because the frozen-weighting surrogate times the
//! prior is itself proportional to the Exact proposal density, the stage-1
//! ratio cancels analytically (α₁ ≡ 1 for Exact; the prior ratio for
//! Approx). It is still computed numerically: stage 2 must reuse the same
//! α₁ definition for the correction to preserve the target exactly.
//!
//! Stage 2 factors the weighting at θ′, rebuilds the proposal under it, and
//! accepts with
//! α₂ = min{1, π(θ′)·α₁(θ′,θ)·q₁(θ|θ′) / [π(θ)·α₁(θ,θ′)·q₁(θ′|θ)]}.
//! A non-factorizable proposal precision counts as a rejection.

use nalgebra::DVector;
use rand::Rng;

use crate::kernel::{self, TargetEval};
use crate::linalg::{log_normal_prec, CholFactor};
use crate::moment::MomentModel;

use super::{accept_with, ChainState, StepCtx, StepReport};

/// Proposal pieces derived from one weighting factor: the Cholesky factor of
/// the precision (Υ+Q or Υ) and the mean (ΩΥθ̂† or θ̂†).
struct Proposal {
    prec_chol: CholFactor,
    mean: DVector<f64>,
}

fn build_proposal(
    model: &MomentModel,
    q_diag: Option<&DVector<f64>>,
    w_chol: &CholFactor,
) -> Option<Proposal> {
    let mut prec = model.proposal_precision(w_chol);
    match q_diag {
        Some(q) => {
            // mean ΩΥθ̂† needs Υθ̂† before Q is folded into the precision
            let rhs = &prec * model.pivot();
            for j in 0..q.len() {
                prec[(j, j)] += q[j];
            }
            let prec_chol = CholFactor::of(&prec)?;
            let mean = prec_chol.solve(&rhs);
            Some(Proposal { prec_chol, mean })
        }
        None => {
            let prec_chol = CholFactor::of(&prec)?;
            Some(Proposal {
                prec_chol,
                mean: model.pivot().clone(),
            })
        }
    }
}

fn reject(
    state: ChainState,
    log_alpha1: f64,
    log_alpha2: Option<f64>,
    theta_proposed: DVector<f64>,
) -> (ChainState, StepReport) {
    let report = StepReport {
        stage1_accepted: log_alpha2.is_some(),
        stage2_accepted: false,
        log_alpha1,
        log_alpha2,
        theta_proposed,
    };
    (state, report)
}

fn mda_step<R: Rng + ?Sized>(
    state: ChainState,
    ctx: &StepCtx,
    rng: &mut R,
    exact: bool,
) -> (ChainState, StepReport) {
    let model = ctx.model;
    let k = state.theta.len();
    let q_diag = exact.then(|| state.prior.precision_diag(k));

    let fwd = match build_proposal(model, q_diag.as_ref(), state.target.w_chol()) {
        Some(p) => p,
        // ProposalSingular: counted as a rejection, not an abort
        None => {
            let empty = DVector::zeros(0);
            return reject(state, f64::NEG_INFINITY, None, empty);
        }
    };
    let theta_new = fwd.prec_chol.sample_prec(&fwd.mean, rng);

    // stage 1: frozen-weighting densities for both directions
    let lq_fwd_new = log_normal_prec(&theta_new, &fwd.mean, &fwd.prec_chol);
    let lq_fwd_cur = log_normal_prec(&state.theta, &fwd.mean, &fwd.prec_chol);
    let log_surr_new = kernel::log_surrogate(model, &state.prior, &theta_new, state.target.w_chol());
    let log_alpha1 =
        ((log_surr_new + lq_fwd_cur) - (state.target.log_target + lq_fwd_new)).min(0.0);

    if !accept_with(log_alpha1, rng) {
        let report = StepReport {
            stage1_accepted: false,
            stage2_accepted: false,
            log_alpha1,
            log_alpha2: None,
            theta_proposed: theta_new,
        };
        return (state, report);
    }

    // stage 2: fresh weighting at θ′, true reverse proposal density and
    // reverse stage-1 probability under the new factor
    let cand: TargetEval = ctx.eval(&state.prior, &theta_new);
    if !cand.is_finite() {
        return reject(state, log_alpha1, Some(f64::NEG_INFINITY), theta_new);
    }
    let rev = match build_proposal(model, q_diag.as_ref(), cand.w_chol()) {
        Some(p) => p,
        None => return reject(state, log_alpha1, Some(f64::NEG_INFINITY), theta_new),
    };
    let lq_rev_cur = log_normal_prec(&state.theta, &rev.mean, &rev.prec_chol);
    let lq_rev_new = log_normal_prec(&theta_new, &rev.mean, &rev.prec_chol);
    let log_surr_rev = kernel::log_surrogate(model, &state.prior, &state.theta, cand.w_chol());
    let log_alpha1_rev = ((log_surr_rev + lq_rev_new) - (cand.log_target + lq_rev_cur)).min(0.0);

    let log_alpha2 = ((cand.log_target + log_alpha1_rev + lq_rev_cur)
        - (state.target.log_target + log_alpha1 + lq_fwd_new))
        .min(0.0);

    let accepted = accept_with(log_alpha2, rng);
    let report = StepReport {
        stage1_accepted: true,
        stage2_accepted: accepted,
        log_alpha1,
        log_alpha2: Some(log_alpha2),
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

/// Modified DA step with the prior folded into the proposal:
/// θ′ ~ N(ΩΥθ̂†, Ω) with Ω = (Υ+Q)⁻¹.
pub fn mda_exact_step<R: Rng + ?Sized>(
    state: ChainState,
    ctx: &StepCtx,
    rng: &mut R,
) -> (ChainState, StepReport) {
    mda_step(state, ctx, rng, true)
}

/// Modified DA step with the prior omitted from the proposal:
/// θ′ ~ N(θ̂†, Υ⁻¹); stage 1 reduces to the prior ratio.
pub fn mda_approx_step<R: Rng + ?Sized>(
    state: ChainState,
    ctx: &StepCtx,
    rng: &mut R,
) -> (ChainState, StepReport) {
    mda_step(state, ctx, rng, false)
}
