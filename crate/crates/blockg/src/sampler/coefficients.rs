use nalgebra::DVector;
use rand::Rng;

use super::SamplerError;
use crate::likelihood::{effective_g, omega_terms, scaled_system, sigma2_posterior};
use crate::model::{Dataset, ModelState, PriorSpec};
use crate::numerics::random::{inverse_gamma, normal, std_normal};

/// `σ² | γ, ξ, g̃, y` with `β₀` and `β` integrated out.
pub fn step_sigma2<R: Rng + ?Sized>(
    state: &mut ModelState,
    ds: &Dataset,
    spec: &PriorSpec,
    rng: &mut R,
) -> Result<f64, SamplerError> {
    let g = effective_g(&state.partition, &state.shrinkage, spec.tau2);
    let terms = omega_terms(ds, state.indicator.included(), &g)?;
    let (shape, scale) = sigma2_posterior(ds.n(), terms.quad, &spec.sigma2_prior);
    state.sigma2 = inverse_gamma(rng, shape, scale)?;
    Ok(state.sigma2)
}

/// `(β₀, β) | σ², γ, ξ, g̃, y`.
///
/// The precision `(D⁻¹AD⁻¹ + A)/σ²` equals `W⁻¹MW⁻¹/σ²` in the scaled system
/// of the likelihood module, so with `M = RR'` the draw is
/// `β = W(M⁻¹Wc + σR⁻ᵀz)`.
pub fn step_coefficients<R: Rng + ?Sized>(
    state: &mut ModelState,
    ds: &Dataset,
    spec: &PriorSpec,
    rng: &mut R,
) -> Result<(), SamplerError> {
    let sigma = state.sigma2.sqrt();
    state.beta0 = normal(rng, ds.y_mean(), sigma / (ds.n() as f64).sqrt())?;
    let included = state.indicator.included();
    let k = included.len();
    if k == 0 {
        return Ok(());
    }
    let g = effective_g(&state.partition, &state.shrinkage, spec.tau2);
    let sys = scaled_system(ds, included, &g)?;
    let wc = DVector::from_fn(k, |i, _| sys.w[i] * sys.c[i]);
    let mean = sys.m.solve_upper(&sys.m.solve_lower(&wc));
    let z = DVector::from_fn(k, |_, _| std_normal(rng));
    let draw = mean + sys.m.solve_upper(&z) * sigma;
    state.beta = draw.iter().zip(&sys.w).map(|(u, w)| w * u).collect();
    Ok(())
}
