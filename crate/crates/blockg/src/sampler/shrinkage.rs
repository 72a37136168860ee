use rand::Rng;

use super::{base_measure_draw, SamplerError};
use crate::model::{Dataset, ModelState, PriorSpec};
use crate::numerics::random::uniform;
use crate::numerics::sample_truncated_extended_gamma;

/// Range kept for `g̃` so that `τ² g̃ X'X` stays representable.
pub const G_TILDE_MIN: f64 = 1e-250;
pub const G_TILDE_MAX: f64 = 1e250;

/// `v_k` and `w_k` for every block: the block's conditional is
/// `g^{b - m/2} (1 + g)^{-a-b-2} exp(-v/g - w/√g)`.
pub fn block_statistics(state: &ModelState, ds: &Dataset, tau2: f64) -> Vec<(f64, f64)> {
    let included = state.indicator.included();
    let labels = state.partition.labels();
    let g = &state.shrinkage.g_tilde;
    let xtx = ds.xtx();
    let scale = state.sigma2 * tau2;
    let mut stats = vec![(0.0, 0.0); state.partition.k()];
    for (r, &jr) in included.iter().enumerate() {
        for (c, &jc) in included.iter().enumerate() {
            let term = xtx.get(jr, jc) * state.beta[r] * state.beta[c];
            let k = labels[r];
            if labels[c] == k {
                stats[k].0 += term / (2.0 * scale);
            } else {
                stats[k].1 += term / g[labels[c]].sqrt() / scale;
            }
        }
    }
    stats
}

/// One slice update per block factor.
///
/// With `t = v/g` the conditional is `t^{a+m/2} e^{-t - w√(t/v)} (v/(v+t))^{a+b+2}`;
/// a uniform auxiliary under the last factor truncates `t` from above and the
/// rest is a truncated extended gamma.
pub fn step_shrinkage<R: Rng + ?Sized>(
    state: &mut ModelState,
    ds: &Dataset,
    spec: &PriorSpec,
    rng: &mut R,
) -> Result<(), SamplerError> {
    let power = spec.a + spec.b + 2.0;
    for k in 0..state.partition.k() {
        // w_k depends on the other blocks' current values.
        let (v, w) = block_statistics(state, ds, spec.tau2)[k];
        let m = state.partition.sizes()[k] as f64;
        let g_new = if v > 0.0 && v.is_finite() {
            let t_cur = v / state.shrinkage.g_tilde[k];
            let log_u = uniform(rng).ln() + power * (v.ln() - (v + t_cur).ln());
            let trunc = v * (-log_u / power).exp_m1();
            let t = sample_truncated_extended_gamma(
                rng,
                spec.a + m / 2.0 + 1.0,
                w / (2.0 * v.sqrt()),
                trunc,
            )?;
            v / t
        } else {
            base_measure_draw(spec, rng)?
        };
        state.shrinkage.g_tilde[k] = g_new.clamp(G_TILDE_MIN, G_TILDE_MAX);
    }
    Ok(())
}
