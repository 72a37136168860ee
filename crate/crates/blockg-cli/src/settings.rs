use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use blockg::model::{ChainConfig, PriorSpec, Variant};

use crate::args::CommonArgs;
use crate::config::Resolver;
use crate::data::read_partition;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariantName {
    Dp,
    SingleBlock,
    AllSingletons,
    FixedPartition,
}

impl FromStr for VariantName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().replace('_', "-").as_str() {
            "dp" => Ok(VariantName::Dp),
            "single-block" => Ok(VariantName::SingleBlock),
            "all-singletons" => Ok(VariantName::AllSingletons),
            "fixed-partition" => Ok(VariantName::FixedPartition),
            other => Err(format!("unknown variant `{other}`")),
        }
    }
}

impl fmt::Display for VariantName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VariantName::Dp => "dp",
            VariantName::SingleBlock => "single-block",
            VariantName::AllSingletons => "all-singletons",
            VariantName::FixedPartition => "fixed-partition",
        })
    }
}

/// `τ²` either fixed or tied to the sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tau2 {
    SampleSize,
    Value(f64),
}

impl Tau2 {
    pub fn resolve(self, n: usize) -> f64 {
        match self {
            Tau2::SampleSize => n as f64,
            Tau2::Value(v) => v,
        }
    }
}

impl FromStr for Tau2 {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.trim() == "n" {
            return Ok(Tau2::SampleSize);
        }
        match s.trim().parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Tau2::Value(v)),
            _ => Err(format!("tau2 must be `n` or a positive number, got `{s}`")),
        }
    }
}

impl fmt::Display for Tau2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tau2::SampleSize => f.write_str("n"),
            Tau2::Value(v) => write!(f, "{v}"),
        }
    }
}

/// Path wrapper so optional paths go through the resolver.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSetting(pub PathBuf);

impl FromStr for PathSetting {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(PathSetting(PathBuf::from(s)))
    }
}

impl fmt::Display for PathSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.display())
    }
}

/// Defaults that differ between commands.
#[derive(Debug, Clone, Copy)]
pub struct ChainDefaults {
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub standardize: bool,
}

impl ChainDefaults {
    pub fn fit() -> Self {
        let c = ChainConfig::default();
        ChainDefaults { iters: c.iterations, burnin: c.burn_in, thin: c.thin, standardize: false }
    }
}

#[derive(Debug, Clone)]
pub struct Common {
    pub seed: u64,
    pub chains: usize,
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub variant: VariantName,
    pub partition_file: Option<PathBuf>,
    pub a: f64,
    pub b: f64,
    pub tau2: Tau2,
    pub standardize: bool,
    pub out_dir: PathBuf,
}

impl Common {
    pub fn resolve(args: &CommonArgs, r: &mut Resolver, d: ChainDefaults) -> Result<Self> {
        Ok(Common {
            seed: r.get("seed", args.seed, 1)?,
            chains: r.get("chains", args.chains, 1)?,
            iters: r.get("iters", args.iters, d.iters)?,
            burnin: r.get("burnin", args.burnin, d.burnin)?,
            thin: r.get("thin", args.thin, d.thin)?,
            variant: r.get("variant", parse_flag(&args.variant)?, VariantName::Dp)?,
            partition_file: r
                .get_opt("partition-file", args.partition_file.clone().map(PathSetting))?
                .map(|p| p.0),
            a: r.get("a", args.a, -0.5)?,
            b: r.get("b", args.b, 0.0)?,
            tau2: r.get("tau2", parse_flag(&args.tau2)?, Tau2::SampleSize)?,
            standardize: r.get("standardize", args.standardize, d.standardize)?,
            out_dir: r
                .get("out-dir", args.out_dir.clone().map(PathSetting), PathSetting(".".into()))?
                .0,
        })
    }

    pub fn chain_config(&self) -> ChainConfig {
        ChainConfig {
            iterations: self.iters,
            burn_in: self.burnin,
            thin: self.thin,
            n_chains: self.chains,
            seed: self.seed,
            ..ChainConfig::default()
        }
    }

    /// Prior for a design with `names` and `n` rows; reads the partition
    /// file for the fixed-partition variant.
    pub fn prior_spec(&self, names: &[String], n: usize) -> Result<PriorSpec> {
        let variant = match self.variant {
            VariantName::Dp => Variant::Dp,
            VariantName::SingleBlock => Variant::SingleBlock,
            VariantName::AllSingletons => Variant::AllSingletons,
            VariantName::FixedPartition => {
                let path = self.partition_file.as_ref().ok_or_else(|| {
                    CliError::Config("fixed-partition needs --partition-file".into())
                })?;
                Variant::FixedPartition(read_partition(path, names)?)
            }
        };
        Ok(PriorSpec::new(self.a, self.b, self.tau2.resolve(n))?.with_variant(variant))
    }
}

pub(crate) fn parse_flag<T: FromStr>(raw: &Option<String>) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    raw.as_deref()
        .map(|s| s.parse().map_err(|e: T::Err| CliError::Config(e.to_string())))
        .transpose()
}
