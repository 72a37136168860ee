use rand::Rng;

use super::{base_measure_draw, SamplerError};
use crate::model::{Dataset, ModelState, PriorSpec};
use crate::numerics::random::categorical_log;

/// Neal's auxiliary-parameter scan over the labels of the included
/// coefficients, given `β`, `σ²` and the block factors.
///
/// Coefficient `i` sees the conditional prior `β | ξ, g̃, σ² ~ N(0, σ²τ² G^{1/2}
/// A⁻¹ G^{1/2})`, which as a function of its own factor `g` is
/// `g^{-1/2} exp(-A_i/g - B_i/√g)`. Existing blocks are weighted by their
/// size without `i` and `d` fresh draws from the base measure share weight
/// `α`, one of them being `i`'s own factor when `i` was alone in its block.
pub fn step_labels_neal8<R: Rng + ?Sized>(
    state: &mut ModelState,
    ds: &Dataset,
    spec: &PriorSpec,
    d: usize,
    rng: &mut R,
) -> Result<(), SamplerError> {
    let included = state.indicator.included().to_vec();
    let c = included.len();
    if c < 2 {
        return Ok(());
    }
    let xtx = ds.xtx();
    let scale = state.sigma2 * spec.tau2;
    let mut labels = state.partition.labels().to_vec();
    let mut g = state.shrinkage.g_tilde.clone();
    let mut counts = state.partition.sizes().to_vec();
    let log_aux_weight = (state.alpha / d as f64).ln();
    let mut aux = vec![0.0; d];
    let mut weights = Vec::with_capacity(g.len() + d);
    for i in 0..c {
        let bi = state.beta[i];
        let ci = xtx.get(included[i], included[i]) * bi * bi / (2.0 * scale);
        let cross: f64 = (0..c)
            .filter(|&j| j != i)
            .map(|j| xtx.get(included[i], included[j]) * bi * state.beta[j] / g[labels[j]].sqrt())
            .sum::<f64>()
            / scale;
        let log_lik = |gv: f64| -0.5 * gv.ln() - ci / gv - cross / gv.sqrt();

        let own = labels[i];
        counts[own] -= 1;
        let singleton = counts[own] == 0;
        let first_fresh = if singleton {
            aux[0] = g[own];
            1
        } else {
            0
        };
        for slot in aux.iter_mut().skip(first_fresh) {
            *slot = base_measure_draw(spec, rng)?;
        }

        weights.clear();
        weights.extend(g.iter().zip(&counts).map(|(&gv, &m)| {
            if m == 0 {
                f64::NEG_INFINITY
            } else {
                (m as f64).ln() + log_lik(gv)
            }
        }));
        weights.extend(aux.iter().map(|&gv| log_aux_weight + log_lik(gv)));
        let pick = categorical_log(rng, &weights)?;
        let new_label = if pick < g.len() {
            pick
        } else {
            let value = aux[pick - g.len()];
            if singleton {
                g[own] = value;
                own
            } else {
                g.push(value);
                counts.push(0);
                g.len() - 1
            }
        };
        labels[i] = new_label;
        counts[new_label] += 1;
    }
    state.relabel(&labels, &g);
    Ok(())
}
