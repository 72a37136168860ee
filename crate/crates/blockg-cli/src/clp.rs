//! Nested-pair sweep: `M_0 = {x2}` against `M_a = {x1, x2}` with `β₁ = 1`
//! fixed while the shared coefficient `β₂` grows. Under one shared `g` the
//! Bayes factor for `M_a` keeps falling; separate factors keep it level.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use blockg::likelihood::{dp_small_model_posterior, log_bf_standard_mixture, r_squared};
use blockg::model::{center_dataset, ChainConfig, PriorSpec, Variant};
use blockg::numerics::chain_rng;
use blockg::numerics::random::std_normal;
use blockg::sampler::run_chain_indexed;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::ClpArgs;
use crate::config::{List, Resolver};
use crate::data::{ensure_dir, write_json, write_records};
use crate::error::{CliError, Result};
use crate::settings::{ChainDefaults, Common};
use crate::{with_pool, SCHEMA_VERSION};

pub const BETA0: f64 = 0.5;
pub const BETA1: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct ClpSettings {
    pub common: Common,
    pub replicates: usize,
    pub n: usize,
    pub eta: Vec<f64>,
    pub beta2: Vec<f64>,
    pub mcmc_draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClpRow {
    pub replicate: usize,
    pub eta: f64,
    pub beta2: f64,
    pub log_bf_dp: f64,
    pub log_bf_hypergn_quadrature: f64,
    pub prob_diff_shrinkage: f64,
    /// Chain estimate of the same probability; empty when not requested.
    pub prob_diff_shrinkage_mcmc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClpSummaryRow {
    pub eta: f64,
    pub beta2: f64,
    pub replicates: usize,
    pub mean_log_bf_dp: f64,
    pub mean_log_bf_hypergn_quadrature: f64,
    pub mean_prob_diff_shrinkage: f64,
}

fn grid(max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max >= 0.0) {
        return Err(CliError::Config("beta2 grid needs step > 0 and max >= 0".into()));
    }
    let count = (max / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| i as f64 * step).collect())
}

impl ClpSettings {
    pub fn resolve(args: &ClpArgs) -> Result<(Self, BTreeMap<String, String>)> {
        let mut r = Resolver::new(args.common.config.as_deref())?;
        let defaults = ChainDefaults { iters: 6_000, burnin: 1_000, thin: 1, standardize: false };
        let common = Common::resolve(&args.common, &mut r, defaults)?;
        let replicates = r.get("replicates", args.replicates, 20)?;
        let n = r.get("n", args.n, 100)?;
        let eta: List<f64> = r.get("eta", crate::settings::parse_flag(&args.eta)?, List(vec![0.0, 0.5]))?;
        let max = r.get("beta2-max", args.beta2_max, 240.0)?;
        let step = r.get("beta2-step", args.beta2_step, 30.0)?;
        let mcmc_draws = r.get("mcmc-draws", args.mcmc_draws, 0)?;
        if eta.0.iter().any(|e| !(0.0..1.0).contains(e)) {
            return Err(CliError::Config("eta must lie in [0, 1)".into()));
        }
        let settings = ClpSettings { common, replicates, n, eta: eta.0, beta2: grid(max, step)?, mcmc_draws };
        Ok((settings, r.finish()?))
    }
}

/// One replicate: fixed noise and covariate draws reused across `η` and the
/// `β₂` grid, so each curve is smooth in `β₂`.
fn replicate(s: &ClpSettings, rep: usize) -> Result<Vec<ClpRow>> {
    let n = s.n;
    let mut rng = chain_rng(s.common.seed, rep as u64);
    let z1: Vec<f64> = (0..n).map(|_| std_normal(&mut rng)).collect();
    let z2: Vec<f64> = (0..n).map(|_| std_normal(&mut rng)).collect();
    let eps: Vec<f64> = (0..n).map(|_| std_normal(&mut rng)).collect();
    let names = vec!["x1".to_string(), "x2".to_string()];
    let base = PriorSpec::new(s.common.a, s.common.b, s.common.tau2.resolve(n))?;
    let mut rows = Vec::new();
    for (ei, &eta) in s.eta.iter().enumerate() {
        let x = DMatrix::from_fn(n, 2, |r, c| {
            if c == 0 {
                z1[r]
            } else {
                eta * z1[r] + (1.0 - eta * eta).sqrt() * z2[r]
            }
        });
        for (gi, &beta2) in s.beta2.iter().enumerate() {
            let y: Vec<f64> =
                (0..n).map(|r| BETA0 + BETA1 * x[(r, 0)] + beta2 * x[(r, 1)] + eps[r]).collect();
            let ds = center_dataset(&x, &y, names.clone(), s.common.standardize)?;
            let full = dp_small_model_posterior(&ds, &[0, 1], &base)?;
            let small = dp_small_model_posterior(&ds, &[1], &base)?;
            let single = log_bf_standard_mixture(r_squared(&ds, &[0, 1])?, n, 2, &base)?
                - log_bf_standard_mixture(r_squared(&ds, &[1])?, n, 1, &base)?;
            let mcmc = if s.mcmc_draws > 0 {
                let cfg = ChainConfig {
                    update_model: false,
                    initial_model: vec![0, 1],
                    seed: s.common.seed,
                    ..ChainConfig::with_kept(s.mcmc_draws, s.common.burnin, s.common.thin)
                };
                let stream = ((rep * s.eta.len() + ei) * s.beta2.len() + gi) as u64;
                let out = run_chain_indexed(
                    &ds,
                    &base.clone().with_variant(Variant::Dp),
                    &cfg,
                    stream,
                )?;
                let split = out.draws.iter().filter(|d| d.k() == 2).count();
                Some(split as f64 / out.draws.len() as f64)
            } else {
                None
            };
            rows.push(ClpRow {
                replicate: rep,
                eta,
                beta2,
                log_bf_dp: full.log_bf - small.log_bf,
                log_bf_hypergn_quadrature: single,
                prob_diff_shrinkage: full.prob_split,
                prob_diff_shrinkage_mcmc: mcmc,
            });
        }
    }
    Ok(rows)
}

pub fn run(s: &ClpSettings) -> Result<Vec<ClpRow>> {
    let per: Vec<Vec<ClpRow>> =
        (0..s.replicates).into_par_iter().map(|r| replicate(s, r)).collect::<Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

pub fn summarize(rows: &[ClpRow]) -> Vec<ClpSummaryRow> {
    let mut groups: Vec<(f64, f64, Vec<&ClpRow>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|g| g.0 == r.eta && g.1 == r.beta2) {
            Some(g) => g.2.push(r),
            None => groups.push((r.eta, r.beta2, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(eta, beta2, g)| {
            let m = |f: fn(&ClpRow) -> f64| g.iter().map(|r| f(r)).sum::<f64>() / g.len() as f64;
            ClpSummaryRow {
                eta,
                beta2,
                replicates: g.len(),
                mean_log_bf_dp: m(|r| r.log_bf_dp),
                mean_log_bf_hypergn_quadrature: m(|r| r.log_bf_hypergn_quadrature),
                mean_prob_diff_shrinkage: m(|r| r.prob_diff_shrinkage),
            }
        })
        .collect()
}

#[derive(Serialize)]
struct ClpRunSummary<'a> {
    schema_version: u32,
    command: &'static str,
    settings: &'a BTreeMap<String, String>,
    rows: usize,
}

pub fn write_outputs(rows: &[ClpRow], settings: &BTreeMap<String, String>, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    write_records(&dir.join("clp.csv"), rows)?;
    write_records(&dir.join("clp_summary.csv"), &summarize(rows))?;
    write_json(
        &dir.join("clp_run.json"),
        &ClpRunSummary { schema_version: SCHEMA_VERSION, command: "simulate-clp", settings, rows: rows.len() },
    )
}

pub fn cmd_simulate_clp(args: &ClpArgs) -> Result<PathBuf> {
    let (s, settings) = ClpSettings::resolve(args)?;
    let rows = with_pool(|| run(&s))??;
    write_outputs(&rows, &settings, &s.common.out_dir)?;
    Ok(s.common.out_dir.clone())
}
