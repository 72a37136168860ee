//! Adaptive composite Gauss-Legendre quadrature.
//!
//! The unit-interval driver splits `(0, 1)` at one half and maps each half
//! to `[0, X_MAX]` through `u = e^{-x}/2` (resp. `1 - u = e^{-x}/2`). Algebraic
//! endpoint singularities such as `u^{-0.9}` become exponentials in `x`,
//! which Gauss-Legendre panels integrate without trouble. The integrand
//! receives both `u` and `1 - u` so that neither loses precision near its
//! endpoint.

use std::collections::BinaryHeap;
use std::sync::OnceLock;

use super::NumericsError;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_DEPTH: u32 = 30;
const PANEL_POINTS: usize = 15;
const MAX_PANELS: usize = 200_000;
/// `e^{-X_MAX}/2` is still a normal double.
const X_MAX: f64 = 700.0;

/// Nodes and weights on `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// `n`-point Gauss-Legendre rule mapped to `(0, 1)`.
    pub fn gauss_legendre(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Newton on P_n starting from the Chebyshev-like guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        QuadratureRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Applies the rule on `[lo, hi]`.
    pub fn apply<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut f: F) -> f64 {
        let h = hi - lo;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(lo + h * x))
            .sum::<f64>()
            * h
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn panel_rule() -> &'static QuadratureRule {
    static RULE: OnceLock<QuadratureRule> = OnceLock::new();
    RULE.get_or_init(|| QuadratureRule::gauss_legendre(PANEL_POINTS))
}

struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
    depth: u32,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive integration over the union of the given consecutive panels.
///
/// Panels are bisected in order of their error estimate (the difference
/// between the one-panel and two-half-panel values) until the summed estimate
/// falls below `tol * |integral|`.
pub fn integrate_panels<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    tol: f64,
    max_depth: u32,
) -> Result<f64, NumericsError> {
    let rule = panel_rule();
    let mut eval = |lo: f64, hi: f64| rule.apply(lo, hi, &mut f);
    let mut make_panel = |lo: f64, hi: f64, depth: u32| {
        let whole = eval(lo, hi);
        let mid = 0.5 * (lo + hi);
        let halves = eval(lo, mid) + eval(mid, hi);
        Panel {
            lo,
            hi,
            value: halves,
            error: (whole - halves).abs(),
            depth,
        }
    };
    let mut heap: BinaryHeap<Panel> =
        breaks.windows(2).map(|w| make_panel(w[0], w[1], 0)).collect();
    // Panels that hit the depth limit keep their contribution here.
    let mut frozen_value = 0.0;
    let mut frozen_error = 0.0;
    let mut n_panels = heap.len();
    let totals = |heap: &BinaryHeap<Panel>, fv: f64, fe: f64| {
        let value = fv + heap.iter().map(|p| p.value).sum::<f64>();
        let error = fe + heap.iter().map(|p| p.error).sum::<f64>();
        (value, error)
    };
    let (mut value, mut error) = totals(&heap, 0.0, 0.0);
    let mut since_resum = 0;
    loop {
        if !value.is_finite() {
            return Err(NumericsError::NonFinite("integrand"));
        }
        if error <= tol * value.abs() || error == 0.0 {
            let (v, e) = totals(&heap, frozen_value, frozen_error);
            if e <= tol * v.abs() || e == 0.0 {
                return Ok(v);
            }
            value = v;
            error = e;
        }
        let Some(worst) = heap.pop() else {
            return Err(NumericsError::QuadratureNonConvergence { estimate: value, error });
        };
        if worst.depth >= max_depth || n_panels >= MAX_PANELS {
            frozen_value += worst.value;
            frozen_error += worst.error;
            if heap.is_empty() || n_panels >= MAX_PANELS {
                let (v, e) = totals(&heap, frozen_value, frozen_error);
                if e <= tol * v.abs() {
                    return Ok(v);
                }
                return Err(NumericsError::QuadratureNonConvergence { estimate: v, error: e });
            }
            continue;
        }
        let mid = 0.5 * (worst.lo + worst.hi);
        let left = make_panel(worst.lo, mid, worst.depth + 1);
        let right = make_panel(mid, worst.hi, worst.depth + 1);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        n_panels += 1;
        since_resum += 1;
        if since_resum == 256 {
            (value, error) = totals(&heap, frozen_value, frozen_error);
            since_resum = 0;
        }
    }
}

/// Adaptive integral of a smooth function over a finite interval.
pub fn integrate_interval<F: FnMut(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64, NumericsError> {
    if lo == hi {
        return Ok(0.0);
    }
    let breaks: Vec<f64> = (0..=8).map(|k| lo + (hi - lo) * k as f64 / 8.0).collect();
    integrate_panels(f, &breaks, tol, DEFAULT_MAX_DEPTH)
}

fn tail_breaks() -> &'static [f64] {
    static BREAKS: OnceLock<Vec<f64>> = OnceLock::new();
    BREAKS.get_or_init(|| {
        let mut b: Vec<f64> = (0..=32).map(f64::from).collect();
        let mut x = 64.0;
        while x < X_MAX {
            b.push(x);
            x *= 2.0;
        }
        b.push(X_MAX);
        b
    })
}

/// `∫_0^1 f(u) du` where the integrand is called as `f(u, 1 - u)`.
pub fn integrate_unit_interval<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    tol: f64,
) -> Result<f64, NumericsError> {
    let breaks = tail_breaks();
    let mut both = |x: f64| {
        let s = 0.5 * (-x).exp();
        (f(s, 1.0 - s) + f(1.0 - s, s)) * s
    };
    integrate_panels(&mut both, breaks, tol, DEFAULT_MAX_DEPTH)
}

/// `log ∫_0^1 exp(log_f(u, 1 - u)) du`, rescaled by the largest mapped
/// integrand value seen on the starting panels so that huge or tiny integrands do not overflow.
pub fn log_integrate_unit_interval<F: FnMut(f64, f64) -> f64>(
    mut log_f: F,
    tol: f64,
) -> Result<f64, NumericsError> {
    let rule = panel_rule();
    let mut peak = f64::NEG_INFINITY;
    for w in tail_breaks().windows(2) {
        for x in rule.nodes() {
            let x = w[0] + (w[1] - w[0]) * x;
            let s = 0.5 * (-x).exp();
            // the x-space integrand carries the Jacobian s
            let ls = std::f64::consts::LN_2.mul_add(-1.0, -x);
            peak = peak.max(log_f(s, 1.0 - s) + ls).max(log_f(1.0 - s, s) + ls);
        }
    }
    if peak == f64::NEG_INFINITY {
        return Ok(peak);
    }
    if !peak.is_finite() {
        return Err(NumericsError::NonFinite("log integrand"));
    }
    let i = integrate_unit_interval(|u, v| (log_f(u, v) - peak).exp(), tol)?;
    Ok(peak + i.ln())
}
