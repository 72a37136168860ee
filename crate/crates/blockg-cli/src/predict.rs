//! Posterior predictive intervals for new rows, and repeated random
//! train/test splits scored by interval score.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use blockg::inference::{interval_score, mean_squared_error, predict, quantile_sorted, ChainOutput};
use blockg::numerics::chain_rng;
use rand::seq::SliceRandom;
use serde::Serialize;

use crate::args::PredictArgs;
use crate::config::Resolver;
use crate::data::{ensure_dir, expand_quadratic, read_json, write_json, write_records, Design, Table};
use crate::error::{CliError, Result};
use crate::fit::fit_design_at;
use crate::settings::{ChainDefaults, Common, PathSetting};
use crate::{with_pool, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRow {
    pub row: usize,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub observed: Option<f64>,
    pub interval_score: Option<f64>,
}

/// Scores against held-out responses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scores {
    pub mse: f64,
    pub mean_interval_score: f64,
    pub median_interval_score: f64,
    pub coverage: f64,
}

impl Scores {
    fn of(rows: &[PredictionRow]) -> Option<Scores> {
        let obs: Vec<(f64, f64, &PredictionRow)> = rows
            .iter()
            .filter_map(|r| Some((r.observed?, r.interval_score?, r)))
            .collect();
        if obs.is_empty() {
            return None;
        }
        let n = obs.len() as f64;
        let mut is: Vec<f64> = obs.iter().map(|o| o.1).collect();
        is.sort_by(f64::total_cmp);
        Some(Scores {
            mse: obs.iter().map(|(y, _, r)| (r.mean - y).powi(2)).sum::<f64>() / n,
            mean_interval_score: is.iter().sum::<f64>() / n,
            median_interval_score: quantile_sorted(&is, 0.5),
            coverage: obs.iter().filter(|(y, _, r)| r.lower <= *y && *y <= r.upper).count() as f64 / n,
        })
    }
}

/// Predicts `rows` (raw covariates in chain column order); `stream` picks
/// the random stream of the predictive noise.
pub fn predict_rows(
    chain: &ChainOutput,
    rows: &[Vec<f64>],
    observed: Option<&[f64]>,
    level: f64,
    seed: u64,
    stream: u64,
) -> Result<Vec<PredictionRow>> {
    let mut rng = chain_rng(seed, stream);
    let preds = predict(chain, rows, level, &mut rng)?;
    preds
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let y = observed.map(|o| o[i]);
            Ok(PredictionRow {
                row: i,
                mean: p.mean,
                lower: p.lower,
                upper: p.upper,
                observed: y,
                interval_score: y.map(|y| interval_score(p.lower, p.upper, y, level)).transpose()?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitRow {
    pub split: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub mse: f64,
    /// MSE of the training mean as the prediction.
    pub null_mse: f64,
    pub mean_interval_score: f64,
    pub median_interval_score: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitPrediction {
    pub split: usize,
    /// Row of the input table.
    pub row: usize,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub observed: f64,
    pub interval_score: f64,
}

#[derive(Debug, Clone)]
pub struct SplitSettings {
    pub splits: usize,
    pub train_fraction: f64,
    pub level: f64,
}

/// Fits and scores `settings.splits` random partitions of `table`. Split
/// `k` shuffles with stream `u64::MAX - k` and runs its chains on streams
/// `k * chains + c`.
pub fn run_splits(
    table: &Table,
    response: &str,
    common: &Common,
    settings: &SplitSettings,
) -> Result<(Vec<SplitRow>, Vec<SplitPrediction>)> {
    let n = table.rows.len();
    let n_train = (settings.train_fraction * n as f64).round() as usize;
    if n_train < 3 || n_train >= n {
        return Err(CliError::Config(format!(
            "train fraction {} leaves {n_train} of {n} rows for training",
            settings.train_fraction
        )));
    }
    let mut rows = Vec::new();
    let mut preds = Vec::new();
    for k in 0..settings.splits {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut chain_rng(common.seed, u64::MAX - k as u64));
        let (train, test) = idx.split_at(n_train);
        let design = Design::from_table(&table.subset_rows(train), response)?;
        let chain = fit_design_at(&design, common, k as u64)?;
        let held = table.subset_rows(test);
        let x_new = Design::rows_for(&held, &chain.column_names)?;
        let y_new = held.column(held.column_index(response)?);
        let p = predict_rows(&chain, &x_new, Some(&y_new), settings.level, common.seed, u64::MAX / 2 - k as u64)?;
        let scores = Scores::of(&p).ok_or_else(|| CliError::Data("empty test set".into()))?;
        let ybar = design.y.iter().sum::<f64>() / design.y.len() as f64;
        rows.push(SplitRow {
            split: k,
            train_rows: train.len(),
            test_rows: test.len(),
            mse: scores.mse,
            null_mse: mean_squared_error(&vec![ybar; y_new.len()], &y_new)?,
            mean_interval_score: scores.mean_interval_score,
            median_interval_score: scores.median_interval_score,
            coverage: scores.coverage,
        });
        preds.extend(p.iter().zip(test).map(|(r, &row)| SplitPrediction {
            split: k,
            row,
            mean: r.mean,
            lower: r.lower,
            upper: r.upper,
            observed: r.observed.unwrap_or(f64::NAN),
            interval_score: r.interval_score.unwrap_or(f64::NAN),
        }));
    }
    Ok((rows, preds))
}

#[derive(Serialize)]
struct PredictSummary<'a> {
    schema_version: u32,
    command: &'static str,
    settings: &'a BTreeMap<String, String>,
    rows: usize,
    scores: Option<Scores>,
}

#[derive(Serialize)]
struct SplitSummary<'a> {
    schema_version: u32,
    command: &'static str,
    settings: &'a BTreeMap<String, String>,
    splits: usize,
    mean_mse: f64,
    mean_null_mse: f64,
    mean_interval_score: f64,
    median_interval_score: f64,
    mean_coverage: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn write_split_outputs(
    rows: &[SplitRow],
    preds: &[SplitPrediction],
    settings: &BTreeMap<String, String>,
    dir: &Path,
) -> Result<()> {
    ensure_dir(dir)?;
    write_records(&dir.join("splits.csv"), rows)?;
    write_records(&dir.join("split_predictions.csv"), preds)?;
    write_json(
        &dir.join("splits_summary.json"),
        &SplitSummary {
            schema_version: SCHEMA_VERSION,
            command: "predict",
            settings,
            splits: rows.len(),
            mean_mse: mean(rows.iter().map(|r| r.mse)),
            mean_null_mse: mean(rows.iter().map(|r| r.null_mse)),
            mean_interval_score: mean(rows.iter().map(|r| r.mean_interval_score)),
            median_interval_score: mean(rows.iter().map(|r| r.median_interval_score)),
            mean_coverage: mean(rows.iter().map(|r| r.coverage)),
        },
    )
}

pub fn cmd_predict(args: &PredictArgs) -> Result<PathBuf> {
    let mut r = Resolver::new(args.common.config.as_deref())?;
    let common = Common::resolve(&args.common, &mut r, ChainDefaults::fit())?;
    let data = r
        .get_opt("data", args.data.clone().map(PathSetting))?
        .ok_or_else(|| CliError::Config("--data is required".into()))?
        .0;
    let response: Option<String> = r.get_opt("response", args.response.clone())?;
    let level = r.get("level", args.level, 0.95)?;
    let splits: Option<usize> = r.get_opt("splits", args.splits)?;
    let draws = r.get_opt("draws", args.draws.clone().map(PathSetting))?.map(|p| p.0);
    let train_fraction = r.get("train-fraction", args.train_fraction, 0.8)?;
    let expand = r.get("expand-quadratic", args.expand_quadratic, false)?;
    let settings = r.finish()?;
    let mut table = Table::read(&data)?;
    if expand {
        let y = response
            .as_deref()
            .ok_or_else(|| CliError::Config("--expand-quadratic needs --response".into()))?;
        table = expand_quadratic(&table, y)?;
    }

    if let Some(splits) = splits {
        let response =
            response.ok_or_else(|| CliError::Config("--splits needs --response".into()))?;
        let split = SplitSettings { splits, train_fraction, level };
        let (rows, preds) = with_pool(|| run_splits(&table, &response, &common, &split))??;
        write_split_outputs(&rows, &preds, &settings, &common.out_dir)?;
        return Ok(common.out_dir);
    }

    let draws = draws.ok_or_else(|| CliError::Config("--draws is required without --splits".into()))?;
    let chain: ChainOutput = read_json(&draws)?;
    let x_new = Design::rows_for(&table, &chain.column_names)?;
    let observed = response.map(|y| table.column_index(&y).map(|j| table.column(j))).transpose()?;
    let rows = predict_rows(&chain, &x_new, observed.as_deref(), level, common.seed, 0)?;
    ensure_dir(&common.out_dir)?;
    write_records(&common.out_dir.join("predictions.csv"), &rows)?;
    write_json(
        &common.out_dir.join("predict_summary.json"),
        &PredictSummary {
            schema_version: SCHEMA_VERSION,
            command: "predict",
            settings: &settings,
            rows: rows.len(),
            scores: Scores::of(&rows),
        },
    )?;
    Ok(common.out_dir)
}
