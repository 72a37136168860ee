//! Special functions evaluated in log space.

use super::NumericsError;

pub use statrs::function::gamma::ln_gamma;

/// Switch point between the power series and the large-argument expansion.
pub const KUMMER_SWITCH: f64 = 50.0;

const SERIES_MAX_TERMS: usize = 1_000_000;

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `log(sum(exp(xs)))`, returning `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log M(a0, b0, z)` for Kummer's confluent hypergeometric function.
///
/// Power series below [`KUMMER_SWITCH`], asymptotic expansion above it. When
/// the asymptotic series cannot reach full precision (large `b0` relative to
/// `z`) we go back to the power series, which is positive-term and always
/// converges for `z >= 0`.
pub fn kummer_log_m(a0: f64, b0: f64, z: f64) -> Result<f64, NumericsError> {
    if !(a0.is_finite() && b0.is_finite() && z.is_finite()) {
        return Err(NumericsError::NonFinite("kummer_log_m"));
    }
    if a0 <= 0.0 || b0 <= 0.0 {
        return Err(NumericsError::InvalidParameter("kummer_log_m requires a0, b0 > 0"));
    }
    if z < 0.0 {
        return Err(NumericsError::InvalidParameter("kummer_log_m requires z >= 0"));
    }
    if z < KUMMER_SWITCH {
        return Ok(kummer_log_m_series(a0, b0, z));
    }
    Ok(kummer_log_m_asymptotic(a0, b0, z).unwrap_or_else(|| kummer_log_m_series(a0, b0, z)))
}

/// Power series `sum_k (a)_k / (b)_k z^k / k!` summed with a running log scale.
pub fn kummer_log_m_series(a0: f64, b0: f64, z: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    let mut log_scale = 0.0;
    let mut sum = 1.0;
    let mut term = 1.0;
    for k in 0..SERIES_MAX_TERMS {
        let kf = k as f64;
        term *= (a0 + kf) / (b0 + kf) * z / (kf + 1.0);
        sum += term;
        // Terms increase until k ~ z - b0; only stop on the decreasing side.
        if term < 1e-17 * sum && kf > z - b0 {
            break;
        }
        if sum > 1e250 {
            sum *= 1e-250;
            term *= 1e-250;
            log_scale += 250.0 * std::f64::consts::LN_10;
        }
    }
    log_scale + sum.ln()
}

/// Large-`z` expansion
/// `M ~ Gamma(b)/Gamma(a) e^z z^(a-b) sum_s (b-a)_s (1-a)_s / (s! z^s)`.
/// Returns `None` if the divergent tail is reached before the terms fall
/// below double precision.
pub fn kummer_log_m_asymptotic(a0: f64, b0: f64, z: f64) -> Option<f64> {
    let mut sum = 1.0;
    let mut term = 1.0_f64;
    let mut prev_abs = f64::INFINITY;
    let mut converged = false;
    for s in 0..500 {
        let sf = s as f64;
        term *= (b0 - a0 + sf) * (1.0 - a0 + sf) / ((sf + 1.0) * z);
        let abs = term.abs();
        if abs > prev_abs {
            break;
        }
        sum += term;
        if abs <= 1e-17 * sum.abs() {
            converged = true;
            break;
        }
        prev_abs = abs;
    }
    if !converged || sum <= 0.0 {
        return None;
    }
    Some(ln_gamma(b0) - ln_gamma(a0) + z + (a0 - b0) * z.ln() + sum.ln())
}
