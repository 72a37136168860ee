//! Seeded random streams and the variate generators used by the sampler.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};

use super::quadrature::integrate_unit_interval;
use super::NumericsError;

/// Random stream owned by a single chain.
pub type ChainRng = ChaCha20Rng;

/// Stream `chain` of the master `seed`.
///
/// ChaCha streams with distinct stream ids never overlap, so chains are
/// independent and a chain's draws do not depend on how many chains run.
pub fn chain_rng(seed: u64, chain: u64) -> ChainRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}

/// Uniform on the open interval `(0, 1)`.
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> Result<f64, NumericsError> {
    if !(sd >= 0.0 && sd.is_finite() && mean.is_finite()) {
        return Err(NumericsError::InvalidParameter("normal requires finite mean and sd >= 0"));
    }
    Ok(mean + sd * std_normal(rng))
}

pub fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> Result<f64, NumericsError> {
    if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
        return Err(NumericsError::InvalidParameter("gamma requires shape, rate > 0"));
    }
    let d = Gamma::new(shape, 1.0 / rate)
        .map_err(|_| NumericsError::InvalidParameter("gamma parameters"))?;
    Ok(d.sample(rng))
}

/// Inverse gamma with density proportional to `x^{-shape-1} exp(-scale/x)`.
pub fn inverse_gamma<R: Rng + ?Sized>(
    rng: &mut R,
    shape: f64,
    scale: f64,
) -> Result<f64, NumericsError> {
    Ok(1.0 / gamma(rng, shape, scale)?)
}

pub fn beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> Result<f64, NumericsError> {
    if !(a > 0.0 && b > 0.0) {
        return Err(NumericsError::InvalidParameter("beta requires a, b > 0"));
    }
    let d = Beta::new(a, b).map_err(|_| NumericsError::InvalidParameter("beta parameters"))?;
    Ok(d.sample(rng))
}

/// Index drawn with probability proportional to `weights`.
pub fn categorical<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> Result<usize, NumericsError> {
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || !(total > 0.0) {
        return Err(NumericsError::InvalidParameter("categorical weights"));
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            last_positive = i;
            acc += w;
            if target < acc {
                return Ok(i);
            }
        }
    }
    Ok(last_positive)
}

/// Index drawn with probability proportional to `exp(log_weights)`.
pub fn categorical_log<R: Rng + ?Sized>(
    rng: &mut R,
    log_weights: &[f64],
) -> Result<usize, NumericsError> {
    let m = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(NumericsError::InvalidParameter("categorical log weights"));
    }
    let w: Vec<f64> = log_weights.iter().map(|l| (l - m).exp()).collect();
    categorical(rng, &w)
}

/// Draw from `f(t) ∝ t^{shape-1} exp(-t - 2 tilt sqrt(t))` on `(0, trunc)`.
///
/// In `x = sqrt(t)` the log density `(2 shape - 1) ln x - x^2 - 2 tilt x` is
/// concave whenever `shape > 1/2`, for either sign of the tilt. We then use
/// rejection from a three-piece envelope: flat between the two points where
/// the log density has dropped by one unit from its mode, and tangent
/// exponentials outside. If acceptance ever collapses (it should not) or the
/// shape is too small for concavity, we invert the CDF by quadrature.
pub fn sample_truncated_extended_gamma<R: Rng + ?Sized>(
    rng: &mut R,
    shape: f64,
    tilt: f64,
    trunc: f64,
) -> Result<f64, NumericsError> {
    if !(trunc > 0.0) {
        return Err(NumericsError::InvalidParameter("truncation must be positive"));
    }
    if !(shape > 0.0 && shape.is_finite() && tilt.is_finite()) {
        return Err(NumericsError::InvalidParameter("extended gamma shape/tilt"));
    }
    if shape > 0.5 {
        let env = Envelope::new(shape, tilt, trunc.sqrt());
        for _ in 0..1000 {
            if let Some(x) = env.propose(rng) {
                let t = x * x;
                if t > 0.0 && t < trunc {
                    return Ok(t);
                }
            }
        }
    }
    teg_inverse_cdf(rng, shape, tilt, trunc)
}

struct Envelope {
    c1: f64,
    tilt: f64,
    x_max: f64,
    x_l: f64,
    x_r: f64,
    psi_mode: f64,
    psi_l: f64,
    psi_r: f64,
    slope_l: f64,
    slope_r: f64,
    mass: [f64; 3],
}

impl Envelope {
    fn new(shape: f64, tilt: f64, x_max: f64) -> Self {
        let c1 = 2.0 * shape - 1.0;
        // Root of 2x^2 + 2 tilt x - c1 = 0, in the form without cancellation.
        let disc = (tilt * tilt + 2.0 * c1).sqrt();
        let mode = if tilt >= 0.0 { c1 / (tilt + disc) } else { 0.5 * (disc - tilt) };
        let mode = mode.min(x_max);
        let psi = |x: f64| c1 * x.ln() - x * x - 2.0 * tilt * x;
        let dpsi = |x: f64| c1 / x - 2.0 * x - 2.0 * tilt;
        let psi_mode = psi(mode);
        let level = psi_mode - 1.0;
        let x_l = bisect(|x| psi(x) - level, 0.0, mode);
        let x_r = if psi(x_max) >= level { x_max } else { bisect(|x| level - psi(x), mode, x_max) };
        let psi_l = psi(x_l);
        let psi_r = psi(x_r);
        let slope_l = dpsi(x_l);
        let slope_r = dpsi(x_r);
        // Masses relative to exp(psi_mode).
        let left = (psi_l - psi_mode).exp() * (-(-slope_l * x_l).exp_m1()) / slope_l;
        let mid = x_r - x_l;
        let right = if x_r < x_max {
            (psi_r - psi_mode).exp() * (-(slope_r * (x_max - x_r)).exp_m1()) / (-slope_r)
        } else {
            0.0
        };
        Envelope {
            c1,
            tilt,
            x_max,
            x_l,
            x_r,
            psi_mode,
            psi_l,
            psi_r,
            slope_l,
            slope_r,
            mass: [left.max(0.0), mid, right.max(0.0)],
        }
    }

    fn psi(&self, x: f64) -> f64 {
        self.c1 * x.ln() - x * x - 2.0 * self.tilt * x
    }

    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        let piece = categorical(rng, &self.mass).ok()?;
        let u = uniform(rng);
        let (x, log_env) = match piece {
            0 => {
                let y = trunc_exp(u, self.slope_l, self.x_l);
                let x = self.x_l - y;
                (x, self.psi_l - self.slope_l * y)
            }
            1 => (self.x_l + u * (self.x_r - self.x_l), self.psi_mode),
            _ => {
                let y = trunc_exp(u, -self.slope_r, self.x_max - self.x_r);
                (self.x_r + y, self.psi_r + self.slope_r * y)
            }
        };
        if !(x > 0.0 && x <= self.x_max) {
            return None;
        }
        (uniform(rng).ln() <= self.psi(x) - log_env).then_some(x)
    }
}

/// Inverse CDF of the exponential with rate `rate` truncated to `(0, width)`.
fn trunc_exp(u: f64, rate: f64, width: f64) -> f64 {
    let span = -(-rate * width).exp_m1();
    -(-u * span).ln_1p() / rate
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    // f(lo) < 0 <= f(hi)
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// CDF inversion in `x = sqrt(t)` with quadrature for the normalizer.
fn teg_inverse_cdf<R: Rng + ?Sized>(
    rng: &mut R,
    shape: f64,
    tilt: f64,
    trunc: f64,
) -> Result<f64, NumericsError> {
    let x_max = trunc.sqrt();
    let c1 = 2.0 * shape - 1.0;
    let psi = |x: f64| c1 * x.ln() - x * x - 2.0 * tilt * x;
    // Scale by the largest log density on a grid.
    let peak = (1..=200)
        .map(|k| psi(x_max * k as f64 / 200.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let dens = |x: f64| if x > 0.0 { (psi(x) - peak).exp() } else { 0.0 };
    // The unit-interval driver copes with the x^{2 shape - 1} endpoint.
    let cdf = |y: f64| integrate_unit_interval(|u, _| y * dens(y * u), 1e-9);
    let total = cdf(x_max)?;
    let target = uniform(rng) * total;
    let (mut lo, mut hi) = (0.0, x_max);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    Ok((x * x).clamp(f64::MIN_POSITIVE, trunc * (1.0 - f64::EPSILON)))
}
