//! Posterior summaries, prediction and evaluation metrics.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{ChainConfig, Dataset, ModelState, PriorSpec};
use crate::numerics::random::std_normal;
use crate::sampler::MoveStats;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InferenceError {
    #[error("chain has no kept draws")]
    EmptyChain,
    #[error("column {column} out of range for {p} columns")]
    UnknownColumn { column: usize, p: usize },
    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("interval lower bound {lower} exceeds upper bound {upper}")]
    InvertedInterval { lower: f64, upper: f64 },
    #[error("level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("baseline mean squared error is zero")]
    ZeroBaseline,
    #[error("chains disagree on {0}")]
    IncompatibleChains(&'static str),
}

/// One kept state of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    /// Included columns, ascending and 0-based.
    pub included: Vec<usize>,
    /// Canonical block labels of the included coefficients, 0-based.
    pub labels: Vec<usize>,
    pub g_tilde: Vec<f64>,
    pub alpha: f64,
    pub beta0: f64,
    /// Coefficients of the included columns on the working (centered) scale.
    pub beta: Vec<f64>,
    pub sigma2: f64,
}

impl Draw {
    pub fn from_state(s: &ModelState) -> Self {
        Draw {
            included: s.indicator.included().to_vec(),
            labels: s.partition.labels().to_vec(),
            g_tilde: s.shrinkage.g_tilde.clone(),
            alpha: s.alpha,
            beta0: s.beta0,
            beta: s.beta.clone(),
            sigma2: s.sigma2,
        }
    }

    pub fn p_gamma(&self) -> usize {
        self.included.len()
    }

    pub fn k(&self) -> usize {
        self.g_tilde.len()
    }

    /// `β_j` with zero for excluded columns.
    pub fn coefficient(&self, j: usize) -> f64 {
        self.included.binary_search(&j).map_or(0.0, |pos| self.beta[pos])
    }
}

/// Output of one or more chains over the same data and prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub column_names: Vec<String>,
    pub column_means: Vec<f64>,
    pub column_scales: Vec<f64>,
    pub spec: PriorSpec,
    pub config: ChainConfig,
    pub draws: Vec<Draw>,
    /// Counts after burn-in.
    pub move_stats: MoveStats,
    /// Final random-walk scale of the `log α` proposal.
    pub alpha_proposal_sd: f64,
}

impl ChainOutput {
    pub fn new(
        ds: &Dataset,
        spec: PriorSpec,
        config: ChainConfig,
        draws: Vec<Draw>,
        move_stats: MoveStats,
        alpha_proposal_sd: f64,
    ) -> Self {
        ChainOutput {
            column_names: ds.column_names().to_vec(),
            column_means: ds.column_means().to_vec(),
            column_scales: ds.column_scales().to_vec(),
            spec,
            config,
            draws,
            move_stats,
            alpha_proposal_sd,
        }
    }

    /// Pools chains run on the same data, keeping chain order.
    pub fn merge(chains: Vec<ChainOutput>) -> Result<ChainOutput, InferenceError> {
        let mut it = chains.into_iter();
        let mut out = it.next().ok_or(InferenceError::EmptyChain)?;
        for c in it {
            if c.column_names != out.column_names || c.column_means != out.column_means {
                return Err(InferenceError::IncompatibleChains("data"));
            }
            if c.spec != out.spec {
                return Err(InferenceError::IncompatibleChains("prior"));
            }
            out.draws.extend(c.draws);
            out.move_stats.merge(&c.move_stats);
        }
        Ok(out)
    }

    pub fn p(&self) -> usize {
        self.column_names.len()
    }

    fn check(&self, j: usize) -> Result<(), InferenceError> {
        if self.draws.is_empty() {
            return Err(InferenceError::EmptyChain);
        }
        if j >= self.p() {
            return Err(InferenceError::UnknownColumn { column: j, p: self.p() });
        }
        Ok(())
    }

    /// Fraction of kept draws that include column `j`.
    pub fn pip(&self, j: usize) -> Result<f64, InferenceError> {
        self.check(j)?;
        let hits = self.draws.iter().filter(|d| d.included.binary_search(&j).is_ok()).count();
        Ok(hits as f64 / self.draws.len() as f64)
    }

    pub fn pips(&self) -> Result<Vec<f64>, InferenceError> {
        (0..self.p()).map(|j| self.pip(j)).collect()
    }

    /// Model-averaged `β_j` on the working scale, zero when excluded.
    pub fn coefficient_posterior_mean(&self, j: usize) -> Result<f64, InferenceError> {
        self.check(j)?;
        Ok(self.draws.iter().map(|d| d.coefficient(j)).sum::<f64>() / self.draws.len() as f64)
    }

    /// `Pr(p_γ = s)` for `s = 0..=p`.
    pub fn model_size_hist(&self) -> Vec<f64> {
        self.histogram(|d| d.p_gamma())
    }

    /// `Pr(K = k)` for `k = 0..=p`.
    pub fn cluster_hist(&self) -> Vec<f64> {
        self.histogram(|d| d.k())
    }

    fn histogram(&self, key: impl Fn(&Draw) -> usize) -> Vec<f64> {
        let mut h = vec![0.0; self.p() + 1];
        let w = 1.0 / self.draws.len() as f64;
        for d in &self.draws {
            h[key(d)] += w;
        }
        h
    }

    /// `joint[s][k] = Pr(p_γ = s, K = k)`.
    pub fn joint_pk_hist(&self) -> Vec<Vec<f64>> {
        let p = self.p();
        let mut h = vec![vec![0.0; p + 1]; p + 1];
        let w = 1.0 / self.draws.len() as f64;
        for d in &self.draws {
            h[d.p_gamma()][d.k()] += w;
        }
        h
    }

    /// Visit frequency of each model (keyed by included columns).
    pub fn model_frequencies(&self) -> BTreeMap<Vec<usize>, f64> {
        let mut m = BTreeMap::new();
        let w = 1.0 / self.draws.len() as f64;
        for d in &self.draws {
            *m.entry(d.included.clone()).or_insert(0.0) += w;
        }
        m
    }
}

/// Predictive summary for one new row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Posterior predictive means and central intervals at `level` for rows of
/// raw covariates.
pub fn predict<R: Rng + ?Sized>(
    chain: &ChainOutput,
    rows: &[Vec<f64>],
    level: f64,
    rng: &mut R,
) -> Result<Vec<Prediction>, InferenceError> {
    if chain.draws.is_empty() {
        return Err(InferenceError::EmptyChain);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(InferenceError::InvalidLevel(level));
    }
    let tail = 0.5 * (1.0 - level);
    rows.iter()
        .map(|raw| {
            if raw.len() != chain.p() {
                return Err(InferenceError::LengthMismatch { expected: chain.p(), found: raw.len() });
            }
            let x: Vec<f64> = raw
                .iter()
                .zip(&chain.column_means)
                .zip(&chain.column_scales)
                .map(|((v, m), s)| (v - m) / s)
                .collect();
            let mut ys: Vec<f64> = chain
                .draws
                .iter()
                .map(|d| {
                    let lin: f64 = d.included.iter().zip(&d.beta).map(|(&j, b)| x[j] * b).sum();
                    d.beta0 + lin + d.sigma2.sqrt() * std_normal(rng)
                })
                .collect();
            let mean = ys.iter().sum::<f64>() / ys.len() as f64;
            ys.sort_by(f64::total_cmp);
            Ok(Prediction {
                mean,
                lower: quantile_sorted(&ys, tail),
                upper: quantile_sorted(&ys, 1.0 - tail),
            })
        })
        .collect()
}

/// Linear-interpolation (type 7) quantile of sorted values.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `(u - l) + (2/(1-α))(l - z)1{z < l} + (2/(1-α))(z - u)1{z > u}`.
pub fn interval_score(lower: f64, upper: f64, z: f64, level: f64) -> Result<f64, InferenceError> {
    if lower > upper {
        return Err(InferenceError::InvertedInterval { lower, upper });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(InferenceError::InvalidLevel(level));
    }
    let k = 2.0 / (1.0 - level);
    let below = if z < lower { k * (lower - z) } else { 0.0 };
    let above = if z > upper { k * (z - upper) } else { 0.0 };
    Ok(upper - lower + below + above)
}

/// Role of a column in a simulation truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthClass {
    Null,
    Small,
    Large,
}

/// Selection rates; `None` marks a rate whose denominator is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionMetrics {
    pub power_small: Option<f64>,
    pub power_large: Option<f64>,
    pub type1: Option<f64>,
    pub f1: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

/// Rates of `pip > threshold` against the truth classes.
pub fn selection_metrics(
    pips: &[f64],
    truth: &[TruthClass],
    threshold: f64,
) -> Result<SelectionMetrics, InferenceError> {
    if pips.len() != truth.len() {
        return Err(InferenceError::LengthMismatch { expected: truth.len(), found: pips.len() });
    }
    let selected_rate = |class: TruthClass| {
        let (hit, total) = pips
            .iter()
            .zip(truth)
            .filter(|(_, t)| **t == class)
            .fold((0usize, 0usize), |(h, n), (p, _)| (h + usize::from(*p > threshold), n + 1));
        (total > 0).then(|| hit as f64 / total as f64)
    };
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (p, t) in pips.iter().zip(truth) {
        match (*p > threshold, *t != TruthClass::Null) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64);
    let recall = (tp + fn_ > 0).then(|| tp as f64 / (tp + fn_) as f64);
    let f1 = match (precision, recall) {
        (Some(_), Some(_)) => Some(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64),
        _ => None,
    };
    Ok(SelectionMetrics {
        power_small: selected_rate(TruthClass::Small),
        power_large: selected_rate(TruthClass::Large),
        type1: selected_rate(TruthClass::Null),
        f1,
        precision,
        recall,
    })
}

pub fn mean_squared_error(est: &[f64], truth: &[f64]) -> Result<f64, InferenceError> {
    if est.len() != truth.len() {
        return Err(InferenceError::LengthMismatch { expected: truth.len(), found: est.len() });
    }
    if est.is_empty() {
        return Err(InferenceError::EmptyChain);
    }
    Ok(est.iter().zip(truth).map(|(e, t)| (e - t).powi(2)).sum::<f64>() / est.len() as f64)
}

/// `MSE(est) / MSE(baseline)` against the same truth.
pub fn mse_relative(est: &[f64], truth: &[f64], baseline: &[f64]) -> Result<f64, InferenceError> {
    let base = mean_squared_error(baseline, truth)?;
    if base == 0.0 {
        return Err(InferenceError::ZeroBaseline);
    }
    Ok(mean_squared_error(est, truth)? / base)
}

/// Effective sample size from Geyer's initial monotone positive sequence.
pub fn effective_sample_size(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return n as f64;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return n as f64;
    }
    let acf = |lag: usize| {
        xs[..n - lag].iter().zip(&xs[lag..]).map(|(a, b)| (a - mean) * (b - mean)).sum::<f64>()
            / (n as f64 * var)
    };
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = acf(lag) + acf(lag + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        lag += 2;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    (n as f64 / tau).min(n as f64)
}

/// Monte Carlo standard error of the mean of a correlated series.
pub fn mc_standard_error(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (var / effective_sample_size(xs)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_score_examples() {
        assert_eq!(interval_score(0.0, 1.0, 0.5, 0.95).unwrap(), 1.0);
        assert!((interval_score(0.0, 1.0, 2.0, 0.95).unwrap() - 41.0).abs() < 1e-12);
        assert!((interval_score(0.0, 1.0, -0.5, 0.95).unwrap() - 21.0).abs() < 1e-12);
        assert!(interval_score(1.0, 0.0, 0.5, 0.95).is_err());
    }

    #[test]
    fn type7_quantiles() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 4.0);
        assert!((quantile_sorted(&xs, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile_sorted(&xs, 0.25) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn selection_counts() {
        use TruthClass::*;
        // 3 TP, 1 FN, 2 FP among 10 columns
        let truth = [Large, Large, Small, Small, Null, Null, Null, Null, Null, Null];
        let pips = [0.9, 0.8, 0.7, 0.1, 0.6, 0.9, 0.0, 0.2, 0.3, 0.4];
        let m = selection_metrics(&pips, &truth, 0.5).unwrap();
        assert!((m.precision.unwrap() - 0.6).abs() < 1e-15);
        assert!((m.recall.unwrap() - 0.75).abs() < 1e-15);
        assert!((m.f1.unwrap() - 2.0 / (1.0 / 0.6 + 1.0 / 0.75)).abs() < 1e-12);
        assert_eq!(m.power_small, Some(0.5));
        assert_eq!(m.power_large, Some(1.0));
        assert!((m.type1.unwrap() - 2.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn no_positives_leaves_f1_undefined() {
        use TruthClass::*;
        let m = selection_metrics(&[0.0, 0.0, 0.0], &[Large, Null, Small], 0.5).unwrap();
        assert_eq!(m.f1, None);
        assert_eq!(m.power_small, Some(0.0));
        assert_eq!(m.type1, Some(0.0));
        let none_small = selection_metrics(&[0.9], &[Large], 0.5).unwrap();
        assert_eq!(none_small.power_small, None);
    }

    #[test]
    fn relative_mse() {
        let t = [1.0, 2.0, 3.0];
        assert_eq!(mse_relative(&t, &t, &[0.0, 0.0, 0.0]).unwrap(), 0.0);
        let b = [2.0, 2.0, 2.0];
        assert_eq!(mse_relative(&b, &t, &b).unwrap(), 1.0);
        // (1 + 0 + 4)/3 over (1 + 1 + 1)/3
        assert!((mse_relative(&[0.0, 2.0, 5.0], &t, &[2.0, 3.0, 2.0]).unwrap() - 5.0 / 3.0).abs()
            < 1e-15);
        assert!(mse_relative(&t, &t, &t).is_err());
    }

    #[test]
    fn ess_of_independent_noise_is_near_n() {
        let mut rng = crate::numerics::chain_rng(3, 0);
        let xs: Vec<f64> = (0..4000).map(|_| std_normal(&mut rng)).collect();
        let ess = effective_sample_size(&xs);
        assert!(ess > 3000.0 && ess <= 4000.0, "{ess}");
    }
}
