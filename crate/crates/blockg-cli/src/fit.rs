use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use blockg::inference::{effective_sample_size, quantile_sorted, ChainOutput};
use blockg::model::center_dataset;
use blockg::sampler::{run_chain_indexed, MoveStats};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::FitArgs;
use crate::config::Resolver;
use crate::data::{ensure_dir, expand_quadratic, write_json, write_records, Design, Table};
use crate::error::{CliError, Result};
use crate::settings::{ChainDefaults, Common, PathSetting};
use crate::{with_pool, SCHEMA_VERSION};

/// Runs the configured chains on `design` and pools them.
pub fn fit_design(design: &Design, common: &Common) -> Result<ChainOutput> {
    fit_design_at(design, common, 0)
}

/// As [`fit_design`], with chain `c` on stream `offset * chains + c` so
/// repeated fits under one seed stay independent.
pub fn fit_design_at(design: &Design, common: &Common, offset: u64) -> Result<ChainOutput> {
    let (n, p) = design.x.shape();
    if p < 2 {
        return Err(CliError::Data(format!(
            "{p} predictor(s): models may hold at most p - 2 variables, so p must be at least 2"
        )));
    }
    let ds = center_dataset(&design.x, &design.y, design.names.clone(), common.standardize)?;
    let spec = common.prior_spec(&design.names, n)?;
    let cfg = common.chain_config();
    let width = cfg.n_chains as u64;
    let chains = (0..width)
        .into_par_iter()
        .map(|c| run_chain_indexed(&ds, &spec, &cfg, offset * width + c))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(ChainOutput::merge(chains)?)
}

#[derive(Debug, Serialize)]
struct PipRow<'a> {
    column: &'a str,
    pip: f64,
}

#[derive(Debug, Serialize)]
struct CoefficientRow<'a> {
    column: &'a str,
    /// On the centered (and possibly standardized) scale used for fitting.
    mean: f64,
    lower: f64,
    upper: f64,
    /// Posterior mean per unit of the raw predictor.
    mean_raw: f64,
}

#[derive(Debug, Serialize)]
struct SizeRow {
    size: usize,
    probability: f64,
}

#[derive(Debug, Serialize)]
struct ClusterRow {
    clusters: usize,
    probability: f64,
}

#[derive(Debug, Serialize)]
struct JointRow {
    size: usize,
    clusters: usize,
    probability: f64,
}

#[derive(Debug, Serialize)]
struct TopModel {
    columns: Vec<String>,
    probability: f64,
}

#[derive(Debug, Serialize)]
struct FitSummary<'a> {
    schema_version: u32,
    command: &'static str,
    settings: &'a BTreeMap<String, String>,
    n: usize,
    p: usize,
    columns: &'a [String],
    kept_draws: usize,
    move_stats: MoveStats,
    flip_acceptance: Option<f64>,
    swap_acceptance: Option<f64>,
    alpha_acceptance: Option<f64>,
    mean_model_size: f64,
    mean_clusters: f64,
    model_size_ess: f64,
    top_models: Vec<TopModel>,
}

/// Writes the posterior summaries of a pooled chain to `dir`.
pub fn write_fit_outputs(
    chain: &ChainOutput,
    n: usize,
    settings: &BTreeMap<String, String>,
    dir: &Path,
) -> Result<()> {
    ensure_dir(dir)?;
    let names = &chain.column_names;
    let pips = chain.pips()?;
    let rows: Vec<PipRow> =
        names.iter().zip(&pips).map(|(c, &pip)| PipRow { column: c, pip }).collect();
    write_records(&dir.join("pips.csv"), &rows)?;

    let coefs = (0..chain.p())
        .map(|j| {
            let mut v: Vec<f64> = chain.draws.iter().map(|d| d.coefficient(j)).collect();
            let mean = chain.coefficient_posterior_mean(j)?;
            v.sort_by(f64::total_cmp);
            Ok(CoefficientRow {
                column: &names[j],
                mean,
                lower: quantile_sorted(&v, 0.025),
                upper: quantile_sorted(&v, 0.975),
                mean_raw: mean / chain.column_scales[j],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_records(&dir.join("coefficients.csv"), &coefs)?;

    let sizes: Vec<SizeRow> = chain
        .model_size_hist()
        .into_iter()
        .enumerate()
        .map(|(size, probability)| SizeRow { size, probability })
        .collect();
    write_records(&dir.join("model_size_hist.csv"), &sizes)?;
    let clusters: Vec<ClusterRow> = chain
        .cluster_hist()
        .into_iter()
        .enumerate()
        .map(|(clusters, probability)| ClusterRow { clusters, probability })
        .collect();
    write_records(&dir.join("cluster_hist.csv"), &clusters)?;
    let joint: Vec<JointRow> = chain
        .joint_pk_hist()
        .into_iter()
        .enumerate()
        .flat_map(|(size, row)| {
            row.into_iter()
                .enumerate()
                .take(size + 1)
                .map(move |(clusters, probability)| JointRow { size, clusters, probability })
        })
        .collect();
    write_records(&dir.join("joint_pk_hist.csv"), &joint)?;

    let mut models: Vec<(Vec<usize>, f64)> = chain.model_frequencies().into_iter().collect();
    models.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let top_models = models
        .into_iter()
        .take(10)
        .map(|(m, probability)| TopModel {
            columns: m.iter().map(|&j| names[j].clone()).collect(),
            probability,
        })
        .collect();
    let size_trace: Vec<f64> = chain.draws.iter().map(|d| d.p_gamma() as f64).collect();
    let kept = chain.draws.len() as f64;
    let summary = FitSummary {
        schema_version: SCHEMA_VERSION,
        command: "fit",
        settings,
        n,
        p: chain.p(),
        columns: names,
        kept_draws: chain.draws.len(),
        move_stats: chain.move_stats,
        flip_acceptance: chain.move_stats.flip_acceptance(),
        swap_acceptance: chain.move_stats.swap_acceptance(),
        alpha_acceptance: chain.move_stats.alpha_acceptance(),
        mean_model_size: size_trace.iter().sum::<f64>() / kept,
        mean_clusters: chain.draws.iter().map(|d| d.k() as f64).sum::<f64>() / kept,
        model_size_ess: effective_sample_size(&size_trace),
        top_models,
    };
    write_json(&dir.join("chain_summary.json"), &summary)
}

pub fn cmd_fit(args: &FitArgs) -> Result<PathBuf> {
    let mut r = Resolver::new(args.common.config.as_deref())?;
    let common = Common::resolve(&args.common, &mut r, ChainDefaults::fit())?;
    let data = r
        .get_opt("data", args.data.clone().map(PathSetting))?
        .ok_or_else(|| CliError::Config("--data is required".into()))?
        .0;
    let response = r
        .get_opt("response", args.response.clone())?
        .ok_or_else(|| CliError::Config("--response is required".into()))?;
    let expand = r.get("expand-quadratic", args.expand_quadratic, false)?;
    let save_draws = r.get("save-draws", args.save_draws, false)?;
    let settings = r.finish()?;

    let mut table = Table::read(&data)?;
    if expand {
        table = expand_quadratic(&table, &response)?;
    }
    let design = Design::from_table(&table, &response)?;
    let chain = with_pool(|| fit_design(&design, &common))??;
    write_fit_outputs(&chain, design.y.len(), &settings, &common.out_dir)?;
    if save_draws {
        write_json(&common.out_dir.join("draws.json"), &chain)?;
    }
    Ok(common.out_dir)
}
