//! Marginal likelihoods of the linear model with `β₀`, `β` and `σ²`
//! integrated out, conditional on the shrinkage factors.
//!
//! With `A = X_γ'X_γ`, `D = diag(√g_j)` and `Ω = I + X_γ D A⁻¹ D X_γ'`, the
//! determinant lemma and Woodbury give
//!
//! ```text
//! |Ω|           = |A + D A D| / |A|
//! y'Ω⁻¹y - nȳ²  = (y'y - nȳ²) - (Dc)'(A + D A D)⁻¹(Dc),   c = X_γ'y
//! ```
//!
//! With `E = diag(√(1+g_j))`, `V = E⁻¹` and `W = DE⁻¹` (so `V² + W² = I`),
//! `A + DAD = E M E` where `M = VAV + WAW`. `M` has entries bounded by those
//! of `A` and is never worse conditioned than `A`, whatever the size of the
//! `g_j`. Hence
//!
//! ```text
//! log|Ω| = log|M| - log|A| + Σ log(1 + g_j)
//! Q      = (y'y - nȳ²) - (Wc)'M⁻¹(Wc)
//! ```
//!
//! and no `n × n` matrix is ever formed.

use nalgebra::{DMatrix, DVector};

use crate::model::{Dataset, ModelIndicator, Partition, PriorSpec, ShrinkageState, Sigma2Prior};
use crate::numerics::quadrature::DEFAULT_TOL;
use crate::numerics::{
    cholesky, CholeskyFactor, kummer_log_m, ln_beta, ln_gamma, log_integrate_unit_interval, log_sum_exp,
    logdet_from_cholesky, solve_spd, NumericsError, SymMatrix,
};
use crate::priors::{dp_partition_log_prior, PriorError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LikelihoodError {
    #[error("X_γ'X_γ is not positive definite for columns {0:?}")]
    RankDeficient(Vec<usize>),
    #[error("model with {p_gamma} variables needs more than {n} observations")]
    TooManyVariables { p_gamma: usize, n: usize },
    #[error("non-positive residual quadratic form {0}")]
    NonPositiveQuadratic(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Prior(#[from] PriorError),
}

/// `log|Ω|` and `Q = y'Ω⁻¹y - nȳ²` for one model and set of shrinkage values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaTerms {
    pub log_det_omega: f64,
    pub quad: f64,
}

/// `p_γ × p_γ` system shared by the marginal likelihood and the conjugate
/// coefficient draw.
pub(crate) struct ScaledSystem {
    /// `√(g_j/(1+g_j))`
    pub w: Vec<f64>,
    /// Cholesky factor of `M = VAV + WAW`.
    pub m: CholeskyFactor,
    /// `X_γ'y`
    pub c: DVector<f64>,
    pub log_det_a: f64,
    pub sum_log1p_g: f64,
}

pub(crate) fn scaled_system(
    ds: &Dataset,
    included: &[usize],
    g_eff: &[f64],
) -> Result<ScaledSystem, LikelihoodError> {
    let k = included.len();
    if g_eff.len() != k {
        return Err(LikelihoodError::InvalidInput(format!(
            "{} shrinkage values for {} columns",
            g_eff.len(),
            k
        )));
    }
    if g_eff.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(LikelihoodError::InvalidInput("shrinkage must be positive and finite".into()));
    }
    let rank_err = || LikelihoodError::RankDeficient(included.to_vec());
    let a = ds.xtx().select(included);
    let la = cholesky(&a).map_err(|_| rank_err())?;
    let v: Vec<f64> = g_eff.iter().map(|g| (1.0 + g).sqrt().recip()).collect();
    let w: Vec<f64> = g_eff.iter().map(|g| (g / (1.0 + g)).sqrt()).collect();
    let m = DMatrix::from_fn(k, k, |r, c| a.get(r, c) * (v[r] * v[c] + w[r] * w[c]));
    let m = cholesky(&SymMatrix::new(m)?).map_err(|_| rank_err())?;
    Ok(ScaledSystem {
        w,
        m,
        c: DVector::from_fn(k, |i, _| ds.xty()[included[i]]),
        log_det_a: logdet_from_cholesky(&la),
        sum_log1p_g: g_eff.iter().map(|g| g.ln_1p()).sum(),
    })
}

/// Fast-path `Ω` terms for effective `g` (one per included column).
pub fn omega_terms(
    ds: &Dataset,
    included: &[usize],
    g_eff: &[f64],
) -> Result<OmegaTerms, LikelihoodError> {
    let k = included.len();
    if k == 0 {
        return Ok(OmegaTerms { log_det_omega: 0.0, quad: ds.total_sum_squares() });
    }
    if k + 1 >= ds.n() {
        return Err(LikelihoodError::TooManyVariables { p_gamma: k, n: ds.n() });
    }
    let sys = scaled_system(ds, included, g_eff)?;
    let wc = DVector::from_fn(k, |i, _| sys.w[i] * sys.c[i]);
    let reduction = sys.m.solve_lower(&wc).norm_squared();
    let quad = ds.total_sum_squares() - reduction;
    if !(quad > 0.0) {
        return Err(LikelihoodError::NonPositiveQuadratic(quad));
    }
    Ok(OmegaTerms {
        log_det_omega: logdet_from_cholesky(&sys.m) - sys.log_det_a + sys.sum_log1p_g,
        quad,
    })
}

/// Effective `g_j = τ² g̃_{ξ_j}` for each included coefficient.
pub fn effective_g(part: &Partition, shr: &ShrinkageState, tau2: f64) -> Vec<f64> {
    part.labels().iter().map(|&l| tau2 * shr.g_tilde[l]).collect()
}

/// Shape and scale of the inverse-gamma law of `σ²` given the model and
/// shrinkage, with `β₀` and `β` integrated out.
pub fn sigma2_posterior(n: usize, quad: f64, prior: &Sigma2Prior) -> (f64, f64) {
    let (s0, r0) = prior.increments();
    (0.5 * (n as f64 - 1.0) + s0, 0.5 * quad + r0)
}

fn log_marginal_from_terms(n: usize, terms: &OmegaTerms, prior: &Sigma2Prior) -> f64 {
    let nf = n as f64;
    let (shape, scale) = sigma2_posterior(n, terms.quad, prior);
    let base = -0.5 * (nf - 1.0) * (2.0 * std::f64::consts::PI).ln() - 0.5 * nf.ln()
        - 0.5 * terms.log_det_omega
        + ln_gamma(shape)
        - shape * scale.ln();
    match *prior {
        Sigma2Prior::Reference => base,
        Sigma2Prior::InverseGamma { shape: s0, scale: r0 } => base + s0 * r0.ln() - ln_gamma(s0),
    }
}

fn check_sizes(
    ds: &Dataset,
    ind: &ModelIndicator,
    part: &Partition,
    shr: &ShrinkageState,
) -> Result<(), LikelihoodError> {
    if ind.p() != ds.p() || part.len() != ind.p_gamma() || shr.g_tilde.len() != part.k() {
        return Err(LikelihoodError::InvalidInput("model, partition and shrinkage disagree".into()));
    }
    Ok(())
}

/// `log f(y | γ, g̃, ξ)`.
pub fn log_marginal_conditional(
    ds: &Dataset,
    ind: &ModelIndicator,
    part: &Partition,
    shr: &ShrinkageState,
    spec: &PriorSpec,
) -> Result<f64, LikelihoodError> {
    check_sizes(ds, ind, part, shr)?;
    let terms = omega_terms(ds, ind.included(), &effective_g(part, shr, spec.tau2))?;
    Ok(log_marginal_from_terms(ds.n(), &terms, &spec.sigma2_prior))
}

/// `log f(y | γ, g̃, ξ) - log f(y | γ = 0)`.
pub fn log_bf_vs_null_conditional(
    ds: &Dataset,
    ind: &ModelIndicator,
    part: &Partition,
    shr: &ShrinkageState,
    spec: &PriorSpec,
) -> Result<f64, LikelihoodError> {
    check_sizes(ds, ind, part, shr)?;
    let terms = omega_terms(ds, ind.included(), &effective_g(part, shr, spec.tau2))?;
    Ok(log_bf_from_terms(ds, &terms, &spec.sigma2_prior))
}

/// Bayes factor against the null model from precomputed `Ω` terms.
pub fn log_bf_from_terms(ds: &Dataset, terms: &OmegaTerms, prior: &Sigma2Prior) -> f64 {
    let (shape, scale) = sigma2_posterior(ds.n(), terms.quad, prior);
    let (_, scale0) = sigma2_posterior(ds.n(), ds.total_sum_squares(), prior);
    -0.5 * terms.log_det_omega - shape * (scale.ln() - scale0.ln())
}

/// Coefficient of determination of the least-squares fit on `included`.
pub fn r_squared(ds: &Dataset, included: &[usize]) -> Result<f64, LikelihoodError> {
    if included.is_empty() {
        return Ok(0.0);
    }
    let a = ds.xtx().select(included);
    let l = cholesky(&a).map_err(|_| LikelihoodError::RankDeficient(included.to_vec()))?;
    let c = DVector::from_fn(included.len(), |i, _| ds.xty()[included[i]]);
    let beta_hat = solve_spd(&l, &c)?;
    Ok(c.dot(&beta_hat) / ds.total_sum_squares())
}

/// `log BF(g) = ((n-1-p_γ)/2) log(1+g) - ((n-1)/2) log(1 + g(1-R²))`.
pub fn log_bf_fixed_g(r2: f64, n: usize, p_gamma: usize, g: f64) -> f64 {
    let nf = n as f64;
    0.5 * (nf - 1.0 - p_gamma as f64) * g.ln_1p() - 0.5 * (nf - 1.0) * (g * (1.0 - r2)).ln_1p()
}

/// Bayes factor against the null for one shared `g ~ BetaPrime(a, b, τ²)`,
/// by quadrature over `u = g/(τ² + g)`.
pub fn log_bf_standard_mixture(
    r2: f64,
    n: usize,
    p_gamma: usize,
    spec: &PriorSpec,
) -> Result<f64, LikelihoodError> {
    if !(0.0..1.0).contains(&r2) {
        return Err(LikelihoodError::InvalidInput(format!("R² = {r2} outside [0, 1)")));
    }
    if spec.sigma2_prior != Sigma2Prior::Reference {
        return Err(LikelihoodError::InvalidInput(
            "the shared-g closed form assumes the reference variance prior".into(),
        ));
    }
    let nf = n as f64;
    let (a, b, tau2) = (spec.a, spec.b, spec.tau2);
    let log_norm = ln_beta(b + 1.0, a + 1.0);
    let lbf = log_integrate_unit_interval(
        |u, v| {
            // 1 + g = (v + τ²u)/v, 1 + g(1-R²) = (v + τ²u(1-R²))/v
            let l1g = (v + tau2 * u).ln() - v.ln();
            let l1gr = (v + tau2 * u * (1.0 - r2)).ln() - v.ln();
            0.5 * (nf - 1.0 - p_gamma as f64) * l1g - 0.5 * (nf - 1.0) * l1gr
                + b * u.ln()
                + a * v.ln()
        },
        DEFAULT_TOL,
    )?;
    Ok(lbf - log_norm)
}

/// `log f(y | ρ, σ²)` for an orthonormal design, up to a `ρ`-free constant:
/// `Σ_k [log B(b+1, a+m_k/2+1) + log M(b+1, a+b+m_k/2+2, ‖β̂_k‖²/(2σ²))] - (n/2) log σ²`.
///
/// The block factors use the unit-scale base measure (`τ² = 1`), which is
/// the scale matched to `X'X = I`.
pub fn log_marginal_orthogonal_blocks(
    beta_hat_sq_norms: &[f64],
    sigma2: f64,
    part: &Partition,
    spec: &PriorSpec,
    n: usize,
) -> Result<f64, LikelihoodError> {
    if beta_hat_sq_norms.len() != part.k() {
        return Err(LikelihoodError::InvalidInput(format!(
            "{} block norms for {} blocks",
            beta_hat_sq_norms.len(),
            part.k()
        )));
    }
    if spec.tau2 != 1.0 {
        return Err(LikelihoodError::InvalidInput("orthonormal block form needs tau2 = 1".into()));
    }
    if !(sigma2 > 0.0) || beta_hat_sq_norms.iter().any(|z| !(*z >= 0.0)) {
        return Err(LikelihoodError::InvalidInput("norms and sigma2 out of range".into()));
    }
    let (a, b) = (spec.a, spec.b);
    let mut total = -0.5 * n as f64 * sigma2.ln();
    for (&m, &z) in part.sizes().iter().zip(beta_hat_sq_norms) {
        let half_m = m as f64 / 2.0;
        total += ln_beta(b + 1.0, a + half_m + 1.0)
            + kummer_log_m(b + 1.0, a + b + half_m + 2.0, z / (2.0 * sigma2))?;
    }
    Ok(total)
}

/// Exact DP-mixture quantities for a model with one or two coefficients,
/// obtained by enumerating partitions and integrating the shrinkage factors
/// by quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallDpPosterior {
    /// `log BF` of the model against the null, partitions averaged out.
    pub log_bf: f64,
    /// Per partition (one block first): `log BF` given the partition.
    pub log_bf_by_partition: Vec<f64>,
    /// Posterior probability that the coefficients have distinct factors.
    pub prob_split: f64,
}

pub fn dp_small_model_posterior(
    ds: &Dataset,
    included: &[usize],
    spec: &PriorSpec,
) -> Result<SmallDpPosterior, LikelihoodError> {
    if spec.sigma2_prior != Sigma2Prior::Reference {
        return Err(LikelihoodError::InvalidInput("reference variance prior required".into()));
    }
    match included.len() {
        1 => {
            let r2 = r_squared(ds, included)?;
            let lbf = log_bf_standard_mixture(r2, ds.n(), 1, spec)?;
            Ok(SmallDpPosterior { log_bf: lbf, log_bf_by_partition: vec![lbf], prob_split: 0.0 })
        }
        2 => {
            let r2 = r_squared(ds, included)?;
            let joint = log_bf_standard_mixture(r2, ds.n(), 2, spec)?;
            let split = two_block_log_bf(ds, included, spec)?;
            let lp_joint = dp_partition_log_prior(&Partition::single_block(2))?;
            let lp_split = dp_partition_log_prior(&Partition::singletons(2))?;
            let log_bf = log_sum_exp(&[lp_joint + joint, lp_split + split]);
            Ok(SmallDpPosterior {
                log_bf,
                log_bf_by_partition: vec![joint, split],
                prob_split: (lp_split + split - log_bf).exp(),
            })
        }
        k => Err(LikelihoodError::InvalidInput(format!(
            "exact DP posterior is only available for 1 or 2 coefficients, got {k}"
        ))),
    }
}

// `1 - R²` near zero loses about `1e-16 / (1 - R²)` relative precision and the
// log BF multiplies that by `(n - 1)/2`, so tighter inner tolerances can sit
// below the round-off floor for strong signals.
const NESTED_INNER_TOL: f64 = 1e-8;
const NESTED_OUTER_TOL: f64 = 1e-7;

/// `log ∫∫ BF(g̃₁, g̃₂) f(g̃₁) f(g̃₂) dg̃₁ dg̃₂` with independent unit-scale
/// Beta-prime factors.
fn two_block_log_bf(
    ds: &Dataset,
    included: &[usize],
    spec: &PriorSpec,
) -> Result<f64, LikelihoodError> {
    let (i, j) = (included[0], included[1]);
    let xtx = ds.xtx();
    let (a11, a12, a22) = (xtx.get(i, i), xtx.get(i, j), xtx.get(j, j));
    let (c1, c2) = (ds.xty()[i], ds.xty()[j]);
    let det_a = a11 * a22 - a12 * a12;
    if !(det_a > 0.0) {
        return Err(LikelihoodError::RankDeficient(included.to_vec()));
    }
    let tss = ds.total_sum_squares();
    let shape = 0.5 * (ds.n() as f64 - 1.0);
    let (a, b, tau2) = (spec.a, spec.b, spec.tau2);
    let log_norm = ln_beta(b + 1.0, a + 1.0);
    // Everything is scaled by (1 + g₁)(1 + g₂) so that huge factors stay finite:
    // r = (1 + √(g₁g₂))/√((1+g₁)(1+g₂)) ≤ 1 and ê_i = c_i √(g_i/(1+g_i)).
    let log_bf = |g1: f64, g2: f64| {
        let (s1, s2) = ((1.0 + g1).sqrt(), (1.0 + g2).sqrt());
        let r = (1.0 + g1.sqrt() * g2.sqrt()) / (s1 * s2);
        let det = a11 * a22 - a12 * a12 * r * r;
        let e1 = c1 * (g1.sqrt() / s1);
        let e2 = c2 * (g2.sqrt() / s2);
        let reduction = (a22 * e1 * e1 - 2.0 * a12 * r * e1 * e2 + a11 * e2 * e2) / det;
        let log_det_omega = g1.ln_1p() + g2.ln_1p() + (det / det_a).ln();
        -0.5 * log_det_omega - shape * ((tss - reduction) / tss).ln()
    };
    let mut inner_err = None;
    let outer = log_integrate_unit_interval(
        |u1, v1| {
            let g1 = tau2 * u1 / v1;
            let inner = log_integrate_unit_interval(
                |u2, v2| log_bf(g1, tau2 * u2 / v2) + b * u2.ln() + a * v2.ln(),
                NESTED_INNER_TOL,
            );
            match inner {
                Ok(v) => v + b * u1.ln() + a * v1.ln(),
                Err(e) => {
                    inner_err.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            }
        },
        NESTED_OUTER_TOL,
    )?;
    if let Some(e) = inner_err {
        return Err(e.into());
    }
    Ok(outer - 2.0 * log_norm)
}
