use rand::Rng;

use super::{AlphaTuning, MoveStats, SamplerError};
use crate::model::ModelState;
use crate::numerics::random::{std_normal, uniform};
use crate::priors::{jeffreys_alpha_logpdf, ln_rising_factorial};

/// `log p(α | ρ)` up to a constant, for the partition sizes in `state`.
pub fn alpha_log_target(alpha: f64, p_gamma: usize, k: usize) -> Result<f64, SamplerError> {
    Ok(-ln_rising_factorial(alpha, p_gamma)
        + k as f64 * alpha.ln()
        + jeffreys_alpha_logpdf(alpha, p_gamma)?)
}

/// Random-walk Metropolis step on `log α`.
pub fn step_alpha<R: Rng + ?Sized>(
    state: &mut ModelState,
    tuning: &mut AlphaTuning,
    stats: &mut MoveStats,
    rng: &mut R,
) -> Result<bool, SamplerError> {
    let pg = state.p_gamma();
    let k = state.partition.k();
    let eta = state.alpha.ln();
    let eta_prop = eta + tuning.sd() * std_normal(rng);
    let alpha_prop = eta_prop.exp();
    stats.alpha_proposed += 1;
    if !(alpha_prop > 0.0 && alpha_prop.is_finite()) {
        tuning.update(0.0);
        return Ok(false);
    }
    // η = log α carries the Jacobian e^η.
    let log_ratio = alpha_log_target(alpha_prop, pg, k)? + eta_prop
        - alpha_log_target(state.alpha, pg, k)?
        - eta;
    let accept_prob = log_ratio.min(0.0).exp();
    tuning.update(accept_prob);
    let accept = uniform(rng) < accept_prob;
    if accept {
        state.alpha = alpha_prop;
        stats.alpha_accepted += 1;
    }
    Ok(accept)
}
