//! Prior densities and draws for every level of the hierarchy.

use rand::Rng;

use crate::model::{ModelIndicator, Partition};
use crate::numerics::quadrature::DEFAULT_TOL;
use crate::numerics::random::gamma;
use crate::numerics::{ln_gamma, log_integrate_unit_interval, NumericsError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PriorError {
    #[error("{0} outside its domain")]
    Domain(&'static str),
    #[error("Jeffreys-type alpha prior needs p_gamma >= 2, got {0}")]
    AlphaPriorUndefined(usize),
    #[error("CRP probability of an empty partition with {0} items")]
    EmptyPartition(usize),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

fn check_ab(a: f64, b: f64, tau2: f64) -> Result<(), PriorError> {
    if !(a > -1.0 && b > -1.0) {
        return Err(PriorError::Domain("a, b"));
    }
    if !(tau2 > 0.0 && tau2.is_finite()) {
        return Err(PriorError::Domain("tau2"));
    }
    Ok(())
}

/// `f(g) = Γ(a+b+2) / (τ² Γ(a+1) Γ(b+1)) · g^b (1 + g/τ²)^{-a-b-2}`, in logs.
pub fn beta_prime_logpdf(g: f64, a: f64, b: f64, tau2: f64) -> Result<f64, PriorError> {
    check_ab(a, b, tau2)?;
    if !(g > 0.0) || !g.is_finite() {
        return Err(PriorError::Domain("g"));
    }
    Ok(ln_gamma(a + b + 2.0) - tau2.ln() - ln_gamma(a + 1.0) - ln_gamma(b + 1.0) + b * g.ln()
        - (a + b + 2.0) * (g / tau2).ln_1p())
}

/// Draw from the Beta-prime density above.
///
/// `u ~ Beta(b+1, a+1)` and `g = τ² u/(1-u)` is the same law as `τ² X/Y` with
/// `X ~ Gamma(b+1)`, `Y ~ Gamma(a+1)`; the ratio form keeps precision when
/// `u` would round to 0 or 1.
pub fn beta_prime_sample<R: Rng + ?Sized>(
    a: f64,
    b: f64,
    tau2: f64,
    rng: &mut R,
) -> Result<f64, PriorError> {
    check_ab(a, b, tau2)?;
    let x = gamma(rng, b + 1.0, 1.0)?;
    let y = gamma(rng, a + 1.0, 1.0)?;
    Ok((tau2 * (x / y)).clamp(f64::MIN_POSITIVE, f64::MAX))
}

/// `log f(ρ | α) = log Γ(α) - log Γ(α + c) + K log α + Σ log Γ(m_k)`.
pub fn crp_log_prob(partition: &Partition, alpha: f64) -> Result<f64, PriorError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(PriorError::Domain("alpha"));
    }
    let c = partition.len();
    if c == 0 {
        return Ok(0.0);
    }
    if partition.k() == 0 {
        return Err(PriorError::EmptyPartition(c));
    }
    Ok(-ln_rising_factorial(alpha, c)
        + partition.k() as f64 * alpha.ln()
        + partition.sizes().iter().map(|&m| ln_gamma(m as f64)).sum::<f64>())
}

/// `log Γ(α + c) - log Γ(α)` as a sum, exact for large `α` where the two
/// gammas cancel catastrophically.
pub fn ln_rising_factorial(alpha: f64, c: usize) -> f64 {
    (0..c).map(|j| (alpha + j as f64).ln()).sum()
}

/// Normalized Blackwell-MacQueen weights `(m_1, ..., m_K, α) / (c + α)`.
pub fn dp_predictive_label_weights(partition: &Partition, alpha: f64) -> Vec<f64> {
    let total = partition.len() as f64 + alpha;
    partition
        .sizes()
        .iter()
        .map(|&m| m as f64 / total)
        .chain(std::iter::once(alpha / total))
        .collect()
}

/// Unnormalized `log f(α | γ) = ½ log((1/α) Σ_{j=1}^{pγ-1} j / (α + j)²)`.
pub fn jeffreys_alpha_logpdf(alpha: f64, p_gamma: usize) -> Result<f64, PriorError> {
    if p_gamma < 2 {
        return Err(PriorError::AlphaPriorUndefined(p_gamma));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(PriorError::Domain("alpha"));
    }
    Ok(0.5 * (jeffreys_sum(alpha, p_gamma) / alpha).ln())
}

fn jeffreys_sum(alpha: f64, p_gamma: usize) -> f64 {
    (1..p_gamma).map(|j| j as f64 / (alpha + j as f64).powi(2)).sum()
}

/// `log ∫_0^∞ exp(jeffreys_alpha_logpdf(α)) dα`.
///
/// The density behaves like `α^{-1/2}` at zero and `α^{-3/2}` at infinity,
/// so it is proper for every `p_gamma >= 2`.
pub fn jeffreys_alpha_log_normalizer(p_gamma: usize) -> Result<f64, PriorError> {
    if p_gamma < 2 {
        return Err(PriorError::AlphaPriorUndefined(p_gamma));
    }
    Ok(log_integrate_unit_interval(
        |u, v| {
            let alpha = u / v;
            0.5 * (jeffreys_sum(alpha, p_gamma) / alpha).ln() - 2.0 * v.ln()
        },
        DEFAULT_TOL,
    )?)
}

/// Normalized log prior of `α` given the model size: the Jeffreys-type
/// density for `p_gamma >= 2` and `Gamma(1, 1)` otherwise (where `α` does not
/// influence the partition at all).
#[derive(Debug, Clone, Default)]
pub struct AlphaPrior {
    log_normalizers: Vec<Option<f64>>,
}

impl AlphaPrior {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn log_density(&mut self, alpha: f64, p_gamma: usize) -> Result<f64, PriorError> {
        if p_gamma < 2 {
            return Ok(-alpha);
        }
        if self.log_normalizers.len() <= p_gamma {
            self.log_normalizers.resize(p_gamma + 1, None);
        }
        let z = match self.log_normalizers[p_gamma] {
            Some(z) => z,
            None => {
                let z = jeffreys_alpha_log_normalizer(p_gamma)?;
                self.log_normalizers[p_gamma] = Some(z);
                z
            }
        };
        Ok(jeffreys_alpha_logpdf(alpha, p_gamma)? - z)
    }
}

/// Prior probability of a partition of `c` items with `α` integrated out
/// under the normalized [`AlphaPrior`].
pub fn dp_partition_log_prior(partition: &Partition) -> Result<f64, PriorError> {
    let c = partition.len();
    if c < 2 {
        return Ok(0.0);
    }
    let z = jeffreys_alpha_log_normalizer(c)?;
    let lp = log_integrate_unit_interval(
        |u, v| {
            let alpha = u / v;
            crp_log_prob(partition, alpha).unwrap_or(f64::NEG_INFINITY)
                + 0.5 * (jeffreys_sum(alpha, c) / alpha).ln()
                - 2.0 * v.ln()
        },
        DEFAULT_TOL,
    )?;
    Ok(lp - z)
}

/// `log f(γ)` under Beta-Binomial(c, d); models with more than `p - 2`
/// variables get `-inf`.
pub fn beta_binomial_log_prior(indicator: &ModelIndicator, c: f64, d: f64) -> f64 {
    let p = indicator.p();
    let pg = indicator.p_gamma();
    if pg + 2 > p {
        return f64::NEG_INFINITY;
    }
    let (pg, p) = (pg as f64, p as f64);
    ln_gamma(c + d) - ln_gamma(c) - ln_gamma(d) + ln_gamma(c + pg) + ln_gamma(d + p - pg)
        - ln_gamma(c + d + p)
}

/// Marginal prior density of one coefficient,
/// `log ∫ N(β | 0, g s2) f(g | τ², a, b) dg`, where `s2 = κ σ²` is the
/// coefficient's variance per unit of `g`.
pub fn marginal_coefficient_logpdf(
    beta: f64,
    s2: f64,
    a: f64,
    b: f64,
    tau2: f64,
) -> Result<f64, PriorError> {
    check_ab(a, b, tau2)?;
    if !(s2 > 0.0) {
        return Err(PriorError::Domain("s2"));
    }
    // With g = τ² u / (1-u): f(g) dg = u^b (1-u)^a du / B(b+1, a+1).
    let log_b = ln_gamma(a + 1.0) + ln_gamma(b + 1.0) - ln_gamma(a + b + 2.0);
    Ok(log_integrate_unit_interval(
        |u, v| {
            let g = tau2 * u / v;
            let var = g * s2;
            -0.5 * (2.0 * std::f64::consts::PI * var).ln() - beta * beta / (2.0 * var)
                + b * u.ln()
                + a * v.ln()
        },
        DEFAULT_TOL,
    )? - log_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::canonicalize_partition;

    #[test]
    fn beta_prime_uniform_case() {
        assert!((beta_prime_logpdf(1.0, 0.0, 0.0, 1.0).unwrap() - 0.25f64.ln()).abs() < 1e-14);
        assert!(beta_prime_logpdf(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(beta_prime_logpdf(1.0, -1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn hyper_g_n_shape() {
        // b = 0, a = -1/2: density ∝ (1 + g/n)^{-3/2}
        let n = 50.0;
        let d = |g: f64| beta_prime_logpdf(g, -0.5, 0.0, n).unwrap();
        for g in [0.1, 3.0, 400.0, 1e6] {
            let want = -1.5 * (1.0 + g / n).ln() + 1.5 * (1.0 + 1.0 / n).ln();
            assert!((d(g) - d(1.0) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn crp_small_cases() {
        assert!(crp_log_prob(&canonicalize_partition(&[0]), 2.3).unwrap().abs() < 1e-13);
        let p = |l: &[usize]| crp_log_prob(&canonicalize_partition(l), 1.0).unwrap().exp();
        assert!((p(&[0, 1, 2]) - 1.0 / 6.0).abs() < 1e-14);
        assert!((p(&[0, 0, 0]) - 1.0 / 3.0).abs() < 1e-14);
        assert!((p(&[0, 0, 1]) - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn predictive_weights() {
        assert_eq!(dp_predictive_label_weights(&Partition::empty(), 0.7), vec![1.0]);
        let w = dp_predictive_label_weights(&canonicalize_partition(&[0, 0, 1]), 1.0);
        assert_eq!(w, vec![0.5, 0.25, 0.25]);
    }

    #[test]
    fn jeffreys_examples() {
        assert!((jeffreys_alpha_logpdf(1.0, 2).unwrap() - 0.5f64.ln()).abs() < 1e-15);
        let r = jeffreys_alpha_logpdf(4.0, 2).unwrap() - jeffreys_alpha_logpdf(1.0, 2).unwrap();
        assert!((r + 5f64.ln()).abs() < 1e-14);
        assert!(jeffreys_alpha_logpdf(1.0, 1).is_err());
    }

    #[test]
    fn jeffreys_normalizer_for_two() {
        // ∫ α^{-1/2} / (α + 1) dα = π
        let z = jeffreys_alpha_log_normalizer(2).unwrap();
        assert!((z - std::f64::consts::PI.ln()).abs() < 1e-9);
    }

    #[test]
    fn two_item_partition_prior_is_even() {
        // E[α/(1+α)] = B(3/2, 1/2)/π = 1/2 under the p_gamma = 2 density.
        let split = dp_partition_log_prior(&canonicalize_partition(&[0, 1])).unwrap();
        let joint = dp_partition_log_prior(&canonicalize_partition(&[0, 0])).unwrap();
        assert!((split.exp() - 0.5).abs() < 1e-9);
        assert!((joint.exp() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn beta_binomial_uniform_sizes() {
        let m = ModelIndicator::from_included(3, &[2]);
        assert!((beta_binomial_log_prior(&m, 1.0, 1.0).exp() - 1.0 / 12.0).abs() < 1e-14);
        let m = ModelIndicator::from_included(3, &[0, 2]);
        assert_eq!(beta_binomial_log_prior(&m, 1.0, 1.0), f64::NEG_INFINITY);
    }
}
