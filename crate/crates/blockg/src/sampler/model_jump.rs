use rand::Rng;

use super::{base_measure_draw, MoveStats, SamplerError};
use crate::likelihood::log_marginal_conditional;
use crate::model::{BlockChoice, Dataset, ModelState, PriorSpec, Variant};
use crate::numerics::random::{categorical, uniform};
use crate::priors::{beta_binomial_log_prior, dp_predictive_label_weights, AlphaPrior};

const SWAP_PROB: f64 = 0.3;

/// Probability of attempting a swap from a model of size `p_gamma`.
fn swap_prob(p_gamma: usize, p: usize) -> f64 {
    if p_gamma >= 1 && p_gamma < p {
        SWAP_PROB
    } else {
        0.0
    }
}

/// Block for an incoming coefficient under the partition prior of the
/// variant; a new block gets its factor from the base measure.
fn propose_block<R: Rng + ?Sized>(
    state: &ModelState,
    j: usize,
    spec: &PriorSpec,
    rng: &mut R,
) -> Result<BlockChoice, SamplerError> {
    let k = state.partition.k();
    let existing = match &spec.variant {
        Variant::Dp => {
            let w = dp_predictive_label_weights(&state.partition, state.alpha);
            let pick = categorical(rng, &w)?;
            (pick < k).then_some(pick)
        }
        Variant::SingleBlock => (k > 0).then_some(0),
        Variant::AllSingletons => None,
        Variant::FixedPartition(groups) => {
            state.indicator.included().iter().position(|&i| groups[i] == groups[j]).map(|pos| {
                state.partition.labels()[pos]
            })
        }
    };
    Ok(match existing {
        Some(k) => BlockChoice::Existing(k),
        None => BlockChoice::New(base_measure_draw(spec, rng)?),
    })
}

/// Reversible-jump update of `γ` on the space with `σ²`, `β₀` and `β`
/// integrated out. Returns whether the proposal was accepted.
///
/// The incoming coefficient's label and any new block factor are drawn from
/// their priors, so those densities cancel and the ratio reduces to the
/// marginal likelihood, the model prior, the `α` prior (which depends on the
/// model size) and the move-selection probabilities.
pub fn step_model_jump<R: Rng + ?Sized>(
    state: &mut ModelState,
    ds: &Dataset,
    spec: &PriorSpec,
    alpha_prior: &mut AlphaPrior,
    stats: &mut MoveStats,
    rng: &mut R,
) -> Result<bool, SamplerError> {
    let p = ds.p();
    let pg = state.p_gamma();
    let swap = uniform(rng) < swap_prob(pg, p);
    let mut prop = state.clone();
    let mut log_q_ratio = 0.0;
    if swap {
        stats.swap_proposed += 1;
        let out = state.indicator.included()[rng.random_range(0..pg)];
        let excluded: Vec<usize> = (0..p).filter(|&j| !state.indicator.contains(j)).collect();
        let incoming = excluded[rng.random_range(0..excluded.len())];
        prop.remove_coefficient(out);
        let choice = propose_block(&prop, incoming, spec, rng)?;
        prop.add_coefficient(incoming, choice);
    } else {
        stats.flip_proposed += 1;
        let j = rng.random_range(0..p);
        if state.indicator.contains(j) {
            prop.remove_coefficient(j);
        } else {
            let choice = propose_block(&prop, j, spec, rng)?;
            prop.add_coefficient(j, choice);
        }
        let flip_cur = 1.0 - swap_prob(pg, p);
        let flip_prop = 1.0 - swap_prob(prop.p_gamma(), p);
        log_q_ratio = flip_prop.ln() - flip_cur.ln();
    }

    let lp_prop = beta_binomial_log_prior(&prop.indicator, spec.bb_c, spec.bb_d);
    if lp_prop == f64::NEG_INFINITY {
        return Ok(false);
    }
    let lp_cur = beta_binomial_log_prior(&state.indicator, spec.bb_c, spec.bb_d);
    let ll_prop = match log_marginal_conditional(
        ds,
        &prop.indicator,
        &prop.partition,
        &prop.shrinkage,
        spec,
    ) {
        Ok(v) => v,
        // A collinear or oversized model has no density to move to.
        Err(_) => return Ok(false),
    };
    let ll_cur =
        log_marginal_conditional(ds, &state.indicator, &state.partition, &state.shrinkage, spec)?;
    let mut log_ratio = ll_prop - ll_cur + lp_prop - lp_cur + log_q_ratio;
    if spec.variant == Variant::Dp && prop.p_gamma() != pg {
        log_ratio += alpha_prior.log_density(state.alpha, prop.p_gamma())?
            - alpha_prior.log_density(state.alpha, pg)?;
    }
    let accept = uniform(rng).ln() < log_ratio;
    if accept {
        if swap {
            stats.swap_accepted += 1;
        } else {
            stats.flip_accepted += 1;
        }
        *state = prop;
    }
    Ok(accept)
}
