//! Reference computations that share no code path with the library: dense
//! `n × n` algebra and tanh-sinh quadrature.
#![allow(dead_code)]

pub mod geweke;

use blockg::priors::ln_rising_factorial;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use statrs::function::gamma::ln_gamma;

/// `log ∫_0^1 exp(log_f(u, 1-u)) du` by tanh-sinh quadrature.
pub fn tanh_sinh_log<F: Fn(f64, f64) -> f64>(log_f: F) -> f64 {
    let h = 1.0 / 128.0;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut terms = Vec::new();
    let mut k = 0i64;
    loop {
        let t = k as f64 * h;
        if t > 6.5 {
            break;
        }
        for s in if k == 0 { vec![1.0] } else { vec![1.0, -1.0] } {
            let ts = s * t;
            let q = half_pi * ts.sinh();
            // v = 1 - u = 1/(1 + e^{2q}), u = 1/(1 + e^{-2q})
            let u = 1.0 / (1.0 + (-2.0 * q).exp());
            let v = 1.0 / (1.0 + (2.0 * q).exp());
            if u <= 0.0 || v <= 0.0 {
                continue;
            }
            // du/dt = 2uv (π/2) cosh t
            let log_w = (half_pi * ts.cosh()).ln() + u.ln() + v.ln() + 2f64.ln();
            let val = log_f(u, v);
            if val.is_finite() {
                terms.push(val + log_w + h.ln());
            }
        }
        k += 1;
    }
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

pub fn tanh_sinh<F: Fn(f64, f64) -> f64>(f: F) -> f64 {
    // positive integrands only
    tanh_sinh_log(|u, v| f(u, v).ln()).exp()
}

/// Dense `log|Ω|` and `y'Ω⁻¹y - nȳ²` with `Ω = I + X_γ D A⁻¹ D X_γ'`, from a
/// centered design.
pub fn dense_omega(x: &DMatrix<f64>, y: &[f64], included: &[usize], g_eff: &[f64]) -> (f64, f64) {
    let n = x.nrows();
    let xg = DMatrix::from_fn(n, included.len(), |r, c| x[(r, included[c])]);
    let a = xg.transpose() * &xg;
    let a_inv = a.try_inverse().expect("invertible");
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        g_eff.len(),
        g_eff.iter().map(|g| g.sqrt()),
    ));
    let omega = DMatrix::identity(n, n) + &xg * &d * a_inv * &d * xg.transpose();
    let lu = omega.clone().lu();
    let det = lu.determinant();
    let yv = DVector::from_column_slice(y);
    let sol = lu.solve(&yv).expect("solvable");
    let ybar = y.iter().sum::<f64>() / n as f64;
    (det.ln(), yv.dot(&sol) - n as f64 * ybar * ybar)
}

/// `log f(y | γ, g)` under the reference variance prior, from dense terms.
pub fn dense_log_marginal(n: usize, log_det: f64, quad: f64) -> f64 {
    let nf = n as f64;
    let shape = 0.5 * (nf - 1.0);
    -shape * (2.0 * std::f64::consts::PI).ln() - 0.5 * nf.ln() - 0.5 * log_det + ln_gamma(shape)
        - shape * (0.5 * quad).ln()
}

/// `log ∫ BF(g) f(g) dg` for one shared `g ~ BetaPrime(a, b, τ²)`.
pub fn shared_g_log_bf(r2: f64, n: usize, p_gamma: usize, a: f64, b: f64, tau2: f64) -> f64 {
    let nf = n as f64;
    let pg = p_gamma as f64;
    let log_beta = ln_gamma(a + 1.0) + ln_gamma(b + 1.0) - ln_gamma(a + b + 2.0);
    tanh_sinh_log(|u, v| {
        let g = tau2 * u / v;
        0.5 * (nf - 1.0 - pg) * g.ln_1p() - 0.5 * (nf - 1.0) * (g * (1.0 - r2)).ln_1p()
            + b * u.ln()
            + a * v.ln()
    }) - log_beta
}

/// Least-squares `R²` by dense normal equations.
pub fn dense_r2(x: &DMatrix<f64>, y: &[f64], included: &[usize]) -> f64 {
    if included.is_empty() {
        return 0.0;
    }
    let n = x.nrows();
    let xg = DMatrix::from_fn(n, included.len(), |r, c| x[(r, included[c])]);
    let ybar = y.iter().sum::<f64>() / n as f64;
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - ybar));
    let xty = xg.transpose() * &yc;
    let bhat = (xg.transpose() * &xg).lu().solve(&xty).unwrap();
    xty.dot(&bhat) / yc.norm_squared()
}

/// `log f(γ)` under Beta-Binomial(c, d).
pub fn beta_binomial(p: usize, p_gamma: usize, c: f64, d: f64) -> f64 {
    let (p, k) = (p as f64, p_gamma as f64);
    ln_gamma(c + k) + ln_gamma(d + p - k) - ln_gamma(c + d + p) + ln_gamma(c + d)
        - ln_gamma(c)
        - ln_gamma(d)
}

/// Unnormalized `f(α | p_γ)`.
pub fn jeffreys(alpha: f64, p_gamma: usize) -> f64 {
    let s: f64 = (1..p_gamma).map(|j| j as f64 / (alpha + j as f64).powi(2)).sum();
    (s / alpha).sqrt()
}

/// Tabulated distribution on `(0, 1)` from an unnormalized density `f(u, 1-u)`,
/// on a grid `u = sin²θ` so that algebraic endpoint singularities of order
/// above `-1/2` become bounded.
pub struct GridDistribution {
    u: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridDistribution {
    pub fn new<F: Fn(f64, f64) -> f64>(density: F) -> Self {
        let m = 400_000;
        let step = std::f64::consts::FRAC_PI_2 / m as f64;
        let mut u = Vec::with_capacity(m + 1);
        let mut cdf = Vec::with_capacity(m + 1);
        let mut acc = 0.0;
        let mut prev = 0.0;
        for i in 0..=m {
            let th = step * i as f64;
            let (s, c) = th.sin_cos();
            let (ui, vi) = (s * s, c * c);
            let val = if ui > 0.0 && vi > 0.0 { density(ui, vi) * 2.0 * s * c } else { 0.0 };
            if i > 0 {
                acc += 0.5 * (val + prev) * step;
            }
            prev = val;
            u.push(ui);
            cdf.push(acc);
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        GridDistribution { u, cdf }
    }

    pub fn quantile(&self, r: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c < r).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = if c1 > c0 { (r - c0) / (c1 - c0) } else { 0.5 };
        self.u[i - 1] + t * (self.u[i] - self.u[i - 1])
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random())
    }

    pub fn cdf(&self, u: f64) -> f64 {
        let i = self.u.partition_point(|&x| x < u).clamp(1, self.u.len() - 1);
        let (u0, u1) = (self.u[i - 1], self.u[i]);
        let t = if u1 > u0 { ((u - u0) / (u1 - u0)).clamp(0.0, 1.0) } else { 0.5 };
        self.cdf[i - 1] + t * (self.cdf[i] - self.cdf[i - 1])
    }
}

/// `α | p_γ` with `u = α/(1+α)`.
pub struct JeffreysSampler(GridDistribution);

impl JeffreysSampler {
    pub fn new(p_gamma: usize) -> Self {
        JeffreysSampler(GridDistribution::new(|u, v| jeffreys(u / v, p_gamma) / (v * v)))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = self.0.sample(rng);
        u / (1.0 - u)
    }
}

/// Sequential CRP draw of `c` labels.
pub fn crp_labels<R: Rng + ?Sized>(c: usize, alpha: f64, rng: &mut R) -> Vec<usize> {
    let mut labels = Vec::with_capacity(c);
    let mut sizes: Vec<usize> = Vec::new();
    for i in 0..c {
        let r: f64 = rng.random::<f64>() * (i as f64 + alpha);
        let mut acc = 0.0;
        let mut pick = sizes.len();
        for (k, &m) in sizes.iter().enumerate() {
            acc += m as f64;
            if r < acc {
                pick = k;
                break;
            }
        }
        if pick == sizes.len() {
            sizes.push(0);
        }
        sizes[pick] += 1;
        labels.push(pick);
    }
    labels
}

/// Unnormalized `log p(α | ρ)` for a partition with `k` blocks of `c` items.
pub fn alpha_log_posterior(alpha: f64, c: usize, k: usize) -> f64 {
    jeffreys(alpha, c).ln() + k as f64 * alpha.ln() - ln_rising_factorial(alpha, c)
}

/// Kolmogorov-Smirnov distance of a sample against a CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(mut xs: Vec<f64>, cdf: F) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Mean of a sample and its standard error given an effective size.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (m, blockg::inference::mc_standard_error(xs))
}

/// Centered design with orthonormal columns.
pub fn orthonormal_design<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> DMatrix<f64> {
    let mut x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    for mut col in x.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    let q = x.qr().q();
    // rounding after QR leaves column means at ~1e-17, recentre for exactness
    let mut q = q.columns(0, p).into_owned();
    for mut col in q.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    q
}

/// `log ∫ N(β_S | 0, s2 g I) BetaPrime(g | a, b, 1) dg` for one block with
/// squared norm `ss` and `m` members.
pub fn block_evidence(ss: f64, m: usize, s2: f64, a: f64, b: f64) -> f64 {
    let log_beta = ln_gamma(a + 1.0) + ln_gamma(b + 1.0) - ln_gamma(a + b + 2.0);
    let half_m = m as f64 / 2.0;
    tanh_sinh_log(|u, v| {
        let g = u / v;
        -half_m * (2.0 * std::f64::consts::PI * s2 * g).ln() - ss / (2.0 * s2 * g)
            + b * u.ln()
            + a * v.ln()
    }) - log_beta
}

/// Standard error of the mean from `batches` non-overlapping batch means.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let len = xs.len() / batches;
    let means: Vec<f64> =
        xs.chunks_exact(len).take(batches).map(|c| c.iter().sum::<f64>() / len as f64).collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}
