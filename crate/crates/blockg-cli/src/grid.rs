//! Block-design study: large `N(0, 10²)`, small `N(0, 1)` and zero
//! coefficients on equicorrelated covariates, fitted under several variants.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use blockg::inference::{mean_squared_error, mse_relative, selection_metrics, ChainOutput, TruthClass};
use blockg::model::{center_dataset, PriorSpec, Variant};
use blockg::numerics::chain_rng;
use blockg::numerics::random::{std_normal, ChainRng};
use blockg::sampler::run_chain_indexed;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::GridArgs;
use crate::config::{List, Resolver};
use crate::data::{ensure_dir, write_json, write_records};
use crate::error::{CliError, Result};
use crate::settings::{parse_flag, ChainDefaults, Common, VariantName};
use crate::{with_pool, SCHEMA_VERSION};

pub const LARGE_SD: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct GridSettings {
    pub common: Common,
    pub replicates: usize,
    pub n: usize,
    pub p: usize,
    pub large: usize,
    pub small: usize,
    pub eta: Vec<f64>,
    pub variants: Vec<VariantName>,
    pub threshold: f64,
}

impl GridSettings {
    pub fn resolve(args: &GridArgs) -> Result<(Self, BTreeMap<String, String>)> {
        let mut r = Resolver::new(args.common.config.as_deref())?;
        let defaults = ChainDefaults { iters: 11_000, burnin: 1_000, thin: 2, standardize: false };
        let common = Common::resolve(&args.common, &mut r, defaults)?;
        let s = GridSettings {
            replicates: r.get("replicates", args.replicates, 20)?,
            n: r.get("n", args.n, 150)?,
            p: r.get("p", args.p, 60)?,
            large: r.get("large", args.large, 10)?,
            small: r.get("small", args.small, 10)?,
            eta: r.get("eta", parse_flag(&args.eta)?, List(vec![0.0, 0.5]))?.0,
            variants: r
                .get(
                    "variants",
                    parse_flag(&args.variants)?,
                    List(vec![
                        VariantName::Dp,
                        VariantName::SingleBlock,
                        VariantName::AllSingletons,
                        VariantName::FixedPartition,
                    ]),
                )?
                .0,
            threshold: r.get("threshold", args.threshold, 0.5)?,
            common,
        };
        s.check()?;
        Ok((s, r.finish()?))
    }

    fn check(&self) -> Result<()> {
        if self.large + self.small > self.p {
            return Err(CliError::Config(format!(
                "{} large and {} small coefficients do not fit in p = {}",
                self.large, self.small, self.p
            )));
        }
        if self.p < 2 || self.p + 2 > self.n {
            return Err(CliError::Config(format!("need 2 <= p <= n - 2, got p = {}, n = {}", self.p, self.n)));
        }
        if self.eta.iter().any(|e| !(0.0..1.0).contains(e)) {
            return Err(CliError::Config("eta must lie in [0, 1)".into()));
        }
        Ok(())
    }

    fn truth(&self) -> Vec<TruthClass> {
        (0..self.p)
            .map(|j| {
                if j < self.large {
                    TruthClass::Large
                } else if j < self.large + self.small {
                    TruthClass::Small
                } else {
                    TruthClass::Null
                }
            })
            .collect()
    }

    /// True blocks with the nulls kept together in a block of their own.
    fn true_blocks(&self) -> Vec<usize> {
        let classes = self.truth();
        let mut order: Vec<TruthClass> = Vec::new();
        classes
            .iter()
            .map(|c| match order.iter().position(|o| o == c) {
                Some(k) => k,
                None => {
                    order.push(*c);
                    order.len() - 1
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub replicate: usize,
    pub eta: f64,
    pub variant: String,
    pub power_small: Option<f64>,
    pub power_large: Option<f64>,
    pub type1: Option<f64>,
    pub f1: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// Out-of-sample MSE of the posterior-mean regression function.
    pub pred_mse: f64,
    /// `pred_mse` over the same quantity for least squares on all columns.
    pub rel_pred_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummaryRow {
    pub eta: f64,
    pub variant: String,
    pub replicates: usize,
    pub power_small: Option<f64>,
    pub power_large: Option<f64>,
    pub type1: Option<f64>,
    pub f1: Option<f64>,
    /// Replicates whose F1 was undefined (nothing selected and no signal).
    pub f1_undefined: usize,
    pub rel_pred_mse: f64,
    pub median_rel_pred_mse: f64,
}

struct Simulated {
    x: DMatrix<f64>,
    y: Vec<f64>,
    x_test: DMatrix<f64>,
    mean_test: Vec<f64>,
}

fn equicorrelated(rows: usize, p: usize, eta: f64, rng: &mut ChainRng) -> DMatrix<f64> {
    let shared: Vec<f64> = (0..rows).map(|_| std_normal(rng)).collect();
    let mut x = DMatrix::zeros(rows, p);
    for r in 0..rows {
        for c in 0..p {
            x[(r, c)] = (1.0 - eta).sqrt() * std_normal(rng) + eta.sqrt() * shared[r];
        }
    }
    x
}

fn simulate(s: &GridSettings, rep: usize, eta_idx: usize) -> Simulated {
    // data streams sit far above the chain streams
    let mut rng = chain_rng(s.common.seed, u64::MAX - (rep * s.eta.len() + eta_idx) as u64);
    let eta = s.eta[eta_idx];
    let beta: Vec<f64> = (0..s.p)
        .map(|j| {
            if j < s.large {
                LARGE_SD * std_normal(&mut rng)
            } else if j < s.large + s.small {
                std_normal(&mut rng)
            } else {
                0.0
            }
        })
        .collect();
    let b = DVector::from_column_slice(&beta);
    let x = equicorrelated(s.n, s.p, eta, &mut rng);
    let y: Vec<f64> = (&x * &b).iter().map(|m| m + std_normal(&mut rng)).collect();
    let x_test = equicorrelated(s.n, s.p, eta, &mut rng);
    let mean_test = (&x_test * &b).iter().copied().collect();
    Simulated { x, y, x_test, mean_test }
}

/// Regression function at the raw rows of `x` from posterior mean
/// coefficients.
fn posterior_mean_fit(chain: &ChainOutput, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    let coef = (0..chain.p()).map(|j| chain.coefficient_posterior_mean(j)).collect::<std::result::Result<Vec<_>, _>>()?;
    let b0 = chain.draws.iter().map(|d| d.beta0).sum::<f64>() / chain.draws.len() as f64;
    Ok((0..x.nrows())
        .map(|r| {
            b0 + (0..chain.p())
                .map(|j| (x[(r, j)] - chain.column_means[j]) / chain.column_scales[j] * coef[j])
                .sum::<f64>()
        })
        .collect())
}

fn least_squares_fit(x: &DMatrix<f64>, y: &[f64], x_new: &DMatrix<f64>) -> Result<Vec<f64>> {
    let (n, p) = x.shape();
    let design = DMatrix::from_fn(n, p + 1, |r, c| if c == 0 { 1.0 } else { x[(r, c - 1)] });
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&DVector::from_column_slice(y), 1e-12)
        .map_err(|e| CliError::Data(format!("least squares failed: {e}")))?;
    Ok((0..x_new.nrows())
        .map(|r| coef[0] + (0..p).map(|j| x_new[(r, j)] * coef[j + 1]).sum::<f64>())
        .collect())
}

fn fit_variant(
    s: &GridSettings,
    sim: &Simulated,
    variant: VariantName,
    stream: u64,
) -> Result<ChainOutput> {
    let names: Vec<String> = (0..s.p).map(|j| format!("x{}", j + 1)).collect();
    let ds = center_dataset(&sim.x, &sim.y, names, s.common.standardize)?;
    let v = match variant {
        VariantName::Dp => Variant::Dp,
        VariantName::SingleBlock => Variant::SingleBlock,
        VariantName::AllSingletons => Variant::AllSingletons,
        VariantName::FixedPartition => Variant::FixedPartition(s.true_blocks()),
    };
    let spec = PriorSpec::new(s.common.a, s.common.b, s.common.tau2.resolve(s.n))?.with_variant(v);
    let cfg = s.common.chain_config();
    let chains = (0..cfg.n_chains as u64)
        .map(|c| run_chain_indexed(&ds, &spec, &cfg, stream * cfg.n_chains as u64 + c))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(ChainOutput::merge(chains)?)
}

fn cell(s: &GridSettings, rep: usize, eta_idx: usize) -> Result<Vec<GridRow>> {
    let sim = simulate(s, rep, eta_idx);
    let truth = s.truth();
    let ols = least_squares_fit(&sim.x, &sim.y, &sim.x_test)?;
    s.variants
        .iter()
        .enumerate()
        .map(|(vi, &variant)| {
            let stream = ((rep * s.eta.len() + eta_idx) * s.variants.len() + vi) as u64;
            let chain = fit_variant(s, &sim, variant, stream)?;
            let m = selection_metrics(&chain.pips()?, &truth, s.threshold)?;
            let fit = posterior_mean_fit(&chain, &sim.x_test)?;
            Ok(GridRow {
                replicate: rep,
                eta: s.eta[eta_idx],
                variant: variant.to_string(),
                power_small: m.power_small,
                power_large: m.power_large,
                type1: m.type1,
                f1: m.f1,
                precision: m.precision,
                recall: m.recall,
                pred_mse: mean_squared_error(&fit, &sim.mean_test)?,
                rel_pred_mse: mse_relative(&fit, &sim.mean_test, &ols)?,
            })
        })
        .collect()
}

pub fn run(s: &GridSettings) -> Result<Vec<GridRow>> {
    let cells: Vec<(usize, usize)> =
        (0..s.replicates).flat_map(|r| (0..s.eta.len()).map(move |e| (r, e))).collect();
    let per: Vec<Vec<GridRow>> =
        cells.par_iter().map(|&(r, e)| cell(s, r, e)).collect::<Result<_>>()?;
    let mut rows: Vec<GridRow> = per.into_iter().flatten().collect();
    // eta-major order for readability; the sort is stable within a cell
    rows.sort_by(|a, b| a.eta.total_cmp(&b.eta).then(a.replicate.cmp(&b.replicate)));
    Ok(rows)
}

fn mean_defined(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn summarize(rows: &[GridRow]) -> Vec<GridSummaryRow> {
    let mut keys: Vec<(f64, String)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|k| k.0 == r.eta && k.1 == r.variant) {
            keys.push((r.eta, r.variant.clone()));
        }
    }
    keys.into_iter()
        .map(|(eta, variant)| {
            let g: Vec<&GridRow> = rows.iter().filter(|r| r.eta == eta && r.variant == variant).collect();
            let mut rel: Vec<f64> = g.iter().map(|r| r.rel_pred_mse).collect();
            rel.sort_by(f64::total_cmp);
            GridSummaryRow {
                eta,
                replicates: g.len(),
                power_small: mean_defined(g.iter().map(|r| r.power_small)),
                power_large: mean_defined(g.iter().map(|r| r.power_large)),
                type1: mean_defined(g.iter().map(|r| r.type1)),
                f1: mean_defined(g.iter().map(|r| r.f1)),
                f1_undefined: g.iter().filter(|r| r.f1.is_none()).count(),
                rel_pred_mse: rel.iter().sum::<f64>() / rel.len() as f64,
                median_rel_pred_mse: blockg::inference::quantile_sorted(&rel, 0.5),
                variant,
            }
        })
        .collect()
}

#[derive(Serialize)]
struct GridRunSummary<'a> {
    schema_version: u32,
    command: &'static str,
    settings: &'a BTreeMap<String, String>,
    rows: usize,
}

pub fn write_outputs(rows: &[GridRow], settings: &BTreeMap<String, String>, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    write_records(&dir.join("grid_replicates.csv"), rows)?;
    write_records(&dir.join("grid_summary.csv"), &summarize(rows))?;
    write_json(
        &dir.join("grid_run.json"),
        &GridRunSummary { schema_version: SCHEMA_VERSION, command: "simulate-grid", settings, rows: rows.len() },
    )
}

pub fn cmd_simulate_grid(args: &GridArgs) -> Result<PathBuf> {
    let (s, settings) = GridSettings::resolve(args)?;
    let rows = with_pool(|| run(&s))??;
    write_outputs(&rows, &settings, &s.common.out_dir)?;
    Ok(s.common.out_dir.clone())
}
