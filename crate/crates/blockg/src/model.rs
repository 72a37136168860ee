//! Domain types shared across the crate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::numerics::SymMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("need at least 3 observations, got {0}")]
    TooFewObservations(usize),
    #[error("response has {found} entries but the design has {expected} rows")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("column `{0}` is constant")]
    ConstantColumn(String),
    #[error("expected {expected} column names, got {found}")]
    NamesMismatch { expected: usize, found: usize },
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("invalid chain configuration: {0}")]
    InvalidConfig(String),
    #[error("inconsistent state: {0}")]
    InvalidState(String),
}

/// Centered design matrix and response, with the cross products every
/// likelihood evaluation needs.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    column_names: Vec<String>,
    column_means: Vec<f64>,
    column_scales: Vec<f64>,
    y_mean: f64,
    tss: f64,
    xtx: SymMatrix,
    xty: DVector<f64>,
}

/// Centers every column of `raw_x` (and scales to unit standard deviation if
/// `standardize`). The removed means and scales are kept for prediction.
pub fn center_dataset(
    raw_x: &DMatrix<f64>,
    y: &[f64],
    column_names: Vec<String>,
    standardize: bool,
) -> Result<Dataset, ModelError> {
    let (n, p) = raw_x.shape();
    if n < 3 {
        return Err(ModelError::TooFewObservations(n));
    }
    if y.len() != n {
        return Err(ModelError::LengthMismatch { expected: n, found: y.len() });
    }
    if column_names.len() != p {
        return Err(ModelError::NamesMismatch { expected: p, found: column_names.len() });
    }
    if raw_x.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("design matrix"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("response"));
    }
    let mut x = raw_x.clone();
    let mut means = Vec::with_capacity(p);
    let mut scales = Vec::with_capacity(p);
    for (j, name) in column_names.iter().enumerate() {
        let mut col = x.column_mut(j);
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let ss = col.norm_squared();
        let spread = raw_x.column(j).amax().max(mean.abs()).max(f64::MIN_POSITIVE);
        if ss.sqrt() <= 1e-12 * spread * (n as f64).sqrt() {
            return Err(ModelError::ConstantColumn(name.clone()));
        }
        let scale = if standardize { (ss / (n as f64 - 1.0)).sqrt() } else { 1.0 };
        col.scale_mut(1.0 / scale);
        means.push(mean);
        scales.push(scale);
    }
    let y = DVector::from_column_slice(y);
    let y_mean = y.mean();
    let tss = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    let xtx = SymMatrix::gram(&x);
    let xty = x.tr_mul(&y);
    Ok(Dataset {
        x,
        y,
        column_names,
        column_means: means,
        column_scales: scales,
        y_mean,
        tss,
        xtx,
        xty,
    })
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }
    pub fn p(&self) -> usize {
        self.x.ncols()
    }
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }
    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }
    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }
    /// Means removed from the raw columns.
    pub fn column_means(&self) -> &[f64] {
        &self.column_means
    }
    /// Divisors applied after centering (all 1 unless standardized).
    pub fn column_scales(&self) -> &[f64] {
        &self.column_scales
    }
    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }
    /// `y'y - n ybar^2`.
    pub fn total_sum_squares(&self) -> f64 {
        self.tss
    }
    pub fn xtx(&self) -> &SymMatrix {
        &self.xtx
    }
    pub fn xty(&self) -> &DVector<f64> {
        &self.xty
    }
    /// Row of the working design for raw covariates.
    pub fn transform_row(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(&self.column_means)
            .zip(&self.column_scales)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Inclusion vector `gamma`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelIndicator {
    gamma: Vec<bool>,
    included: Vec<usize>,
}

impl ModelIndicator {
    pub fn empty(p: usize) -> Self {
        ModelIndicator { gamma: vec![false; p], included: Vec::new() }
    }

    pub fn from_included(p: usize, idx: &[usize]) -> Self {
        let mut m = Self::empty(p);
        for &j in idx {
            m.gamma[j] = true;
        }
        m.included = (0..p).filter(|&j| m.gamma[j]).collect();
        m
    }

    pub fn from_bits(gamma: Vec<bool>) -> Self {
        let included = gamma.iter().enumerate().filter(|(_, g)| **g).map(|(j, _)| j).collect();
        ModelIndicator { gamma, included }
    }

    pub fn p(&self) -> usize {
        self.gamma.len()
    }
    pub fn p_gamma(&self) -> usize {
        self.included.len()
    }
    pub fn gamma(&self) -> &[bool] {
        &self.gamma
    }
    pub fn contains(&self, j: usize) -> bool {
        self.gamma[j]
    }
    /// Included columns in increasing order.
    pub fn included(&self) -> &[usize] {
        &self.included
    }
    /// Position of column `j` among the included columns.
    pub fn position(&self, j: usize) -> Option<usize> {
        self.included.binary_search(&j).ok()
    }

    fn insert(&mut self, j: usize) -> usize {
        self.gamma[j] = true;
        let pos = self.included.binary_search(&j).unwrap_err();
        self.included.insert(pos, j);
        pos
    }

    fn remove(&mut self, j: usize) -> usize {
        self.gamma[j] = false;
        let pos = self.included.binary_search(&j).expect("column is included");
        self.included.remove(pos);
        pos
    }
}

/// Set partition of the included coefficients, labelled by first appearance.
///
/// Labels are stored 0-based; [`Partition::labels_one_based`] gives the
/// conventional `1..=K` form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Partition {
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

pub fn canonicalize_partition(raw: &[usize]) -> Partition {
    canonical_map(raw).0
}

/// Canonical partition plus, for each new block, the raw label it came from.
fn canonical_map(raw: &[usize]) -> (Partition, Vec<usize>) {
    let mut seen: Vec<usize> = Vec::new();
    let mut labels = Vec::with_capacity(raw.len());
    let mut sizes: Vec<usize> = Vec::new();
    for &r in raw {
        let k = match seen.iter().position(|s| *s == r) {
            Some(k) => k,
            None => {
                seen.push(r);
                sizes.push(0);
                seen.len() - 1
            }
        };
        sizes[k] += 1;
        labels.push(k);
    }
    (Partition { labels, sizes }, seen)
}

impl Partition {
    pub fn empty() -> Self {
        Partition::default()
    }
    pub fn singletons(c: usize) -> Self {
        Partition { labels: (0..c).collect(), sizes: vec![1; c] }
    }
    pub fn single_block(c: usize) -> Self {
        if c == 0 {
            return Self::empty();
        }
        Partition { labels: vec![0; c], sizes: vec![c] }
    }
    pub fn len(&self) -> usize {
        self.labels.len()
    }
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
    /// Number of blocks `K`.
    pub fn k(&self) -> usize {
        self.sizes.len()
    }
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
    pub fn labels_one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l + 1).collect()
    }
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }
    /// Positions belonging to block `k`.
    pub fn members(&self, k: usize) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, l)| **l == k).map(|(i, _)| i).collect()
    }
    /// True iff every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.len() == coarser.len()
            && (0..self.k()).all(|k| {
                let m = self.members(k);
                m.iter().all(|&i| coarser.labels[i] == coarser.labels[m[0]])
            })
    }
}

/// Every set partition of `c` items, in canonical form.
pub fn enumerate_partitions(c: usize) -> Vec<Partition> {
    fn grow(prefix: &mut Vec<usize>, k: usize, c: usize, out: &mut Vec<Partition>) {
        if prefix.len() == c {
            out.push(canonicalize_partition(prefix));
            return;
        }
        for l in 0..=k {
            prefix.push(l);
            grow(prefix, k.max(l + 1), c, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::with_capacity(c), 0, c, &mut out);
    out
}

/// Per-block shrinkage on the `tau2`-relative scale.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShrinkageState {
    pub g_tilde: Vec<f64>,
}

/// How a newly included coefficient is attached to the partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockChoice {
    Existing(usize),
    New(f64),
}

/// One state of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub indicator: ModelIndicator,
    pub partition: Partition,
    pub shrinkage: ShrinkageState,
    pub beta0: f64,
    /// Coefficients aligned with `indicator.included()`.
    pub beta: Vec<f64>,
    pub sigma2: f64,
    pub alpha: f64,
}

impl ModelState {
    pub fn empty(p: usize) -> Self {
        ModelState {
            indicator: ModelIndicator::empty(p),
            partition: Partition::empty(),
            shrinkage: ShrinkageState::default(),
            beta0: 0.0,
            beta: Vec::new(),
            sigma2: 1.0,
            alpha: 1.0,
        }
    }

    pub fn p_gamma(&self) -> usize {
        self.indicator.p_gamma()
    }

    /// `g̃` for each included coefficient.
    pub fn coefficient_g_tilde(&self) -> Vec<f64> {
        self.partition.labels().iter().map(|&l| self.shrinkage.g_tilde[l]).collect()
    }

    /// Includes column `j` in the given block; `beta_j` starts at zero.
    pub fn add_coefficient(&mut self, j: usize, choice: BlockChoice) {
        let pos = self.indicator.insert(j);
        let mut raw = self.partition.labels.clone();
        let mut g = self.shrinkage.g_tilde.clone();
        let label = match choice {
            BlockChoice::Existing(k) => k,
            BlockChoice::New(value) => {
                g.push(value);
                g.len() - 1
            }
        };
        raw.insert(pos, label);
        self.beta.insert(pos, 0.0);
        self.relabel(&raw, &g);
    }

    /// Drops column `j`; a block left empty loses its shrinkage value.
    pub fn remove_coefficient(&mut self, j: usize) {
        let pos = self.indicator.remove(j);
        let mut raw = self.partition.labels.clone();
        raw.remove(pos);
        self.beta.remove(pos);
        let g = self.shrinkage.g_tilde.clone();
        self.relabel(&raw, &g);
    }

    /// Canonicalizes `raw` labels that index into `g`, dropping unused values.
    pub fn relabel(&mut self, raw: &[usize], g: &[f64]) {
        let (part, origin) = canonical_map(raw);
        self.shrinkage.g_tilde = origin.iter().map(|&r| g[r]).collect();
        self.partition = part;
    }

    /// Checks every cross-field invariant.
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidState(m));
        let pg = self.indicator.p_gamma();
        if self.partition.len() != pg {
            return bad(format!("{} labels for {} coefficients", self.partition.len(), pg));
        }
        if self.beta.len() != pg {
            return bad(format!("{} coefficients for p_gamma {}", self.beta.len(), pg));
        }
        if self.shrinkage.g_tilde.len() != self.partition.k() {
            return bad("shrinkage length differs from K".into());
        }
        if canonicalize_partition(&self.partition.labels) != self.partition {
            return bad("partition not canonical".into());
        }
        if self.shrinkage.g_tilde.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return bad("shrinkage must be positive and finite".into());
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return bad(format!("sigma2 = {}", self.sigma2));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return bad(format!("alpha = {}", self.alpha));
        }
        if !self.beta0.is_finite() || self.beta.iter().any(|b| !b.is_finite()) {
            return bad("non-finite coefficient".into());
        }
        Ok(())
    }
}

/// Which structure the shrinkage partition is allowed to take.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Random partition under a Dirichlet process prior.
    Dp,
    /// One shared shrinkage factor (standard mixture of g priors).
    SingleBlock,
    /// Independent factor per coefficient.
    AllSingletons,
    /// Fixed block labels, one per column of the design.
    FixedPartition(Vec<usize>),
}

/// Prior on the error variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sigma2Prior {
    /// `p(sigma2) ∝ 1/sigma2`, the default.
    Reference,
    /// Proper `InvGamma(shape, scale)`; mostly useful for joint-distribution
    /// tests, which need a proper prior to simulate from.
    InverseGamma { shape: f64, scale: f64 },
}

impl Sigma2Prior {
    /// `(extra shape, extra scale)` added to the conjugate update.
    pub fn increments(&self) -> (f64, f64) {
        match *self {
            Sigma2Prior::Reference => (0.0, 0.0),
            Sigma2Prior::InverseGamma { shape, scale } => (shape, scale),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub a: f64,
    pub b: f64,
    pub tau2: f64,
    pub bb_c: f64,
    pub bb_d: f64,
    pub variant: Variant,
    pub sigma2_prior: Sigma2Prior,
}

impl PriorSpec {
    pub fn new(a: f64, b: f64, tau2: f64) -> Result<Self, ModelError> {
        let spec = PriorSpec {
            a,
            b,
            tau2,
            bb_c: 1.0,
            bb_d: 1.0,
            variant: Variant::Dp,
            sigma2_prior: Sigma2Prior::Reference,
        };
        spec.check_scalars()?;
        Ok(spec)
    }

    /// Hyper-g/n base measure (`a = -1/2`, `b = 0`, `tau2 = n`).
    pub fn hyper_g_n(n: usize) -> Self {
        PriorSpec::new(-0.5, 0.0, n as f64).expect("valid constants")
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_beta_binomial(mut self, c: f64, d: f64) -> Self {
        self.bb_c = c;
        self.bb_d = d;
        self
    }

    pub fn with_sigma2_prior(mut self, prior: Sigma2Prior) -> Self {
        self.sigma2_prior = prior;
        self
    }

    fn check_scalars(&self) -> Result<(), ModelError> {
        let err = |m: &str| Err(ModelError::InvalidPrior(m.to_string()));
        if !(self.a > -1.0 && self.b > -1.0) || !self.a.is_finite() || !self.b.is_finite() {
            return err("a and b must exceed -1");
        }
        if !(self.tau2 > 0.0 && self.tau2.is_finite()) {
            return err("tau2 must be positive");
        }
        if !(self.bb_c > 0.0 && self.bb_d > 0.0) {
            return err("Beta-Binomial parameters must be positive");
        }
        if let Sigma2Prior::InverseGamma { shape, scale } = self.sigma2_prior {
            if !(shape > 0.0 && scale > 0.0) {
                return err("inverse gamma prior needs positive shape and scale");
            }
        }
        Ok(())
    }

    /// Full validation against a design with `p` columns.
    pub fn validate(&self, p: usize) -> Result<(), ModelError> {
        self.check_scalars()?;
        if let Variant::FixedPartition(labels) = &self.variant {
            if labels.len() != p {
                return Err(ModelError::InvalidPrior(format!(
                    "fixed partition has {} labels for {} columns",
                    labels.len(),
                    p
                )));
            }
            if canonicalize_partition(labels).labels() != labels.as_slice() {
                return Err(ModelError::InvalidPrior("fixed partition labels not canonical".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Total sweeps, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n_chains: usize,
    pub seed: u64,
    pub alpha_proposal_sd: f64,
    pub neal_aux_d: usize,
    /// When false the inclusion vector stays at `initial_model`.
    pub update_model: bool,
    pub initial_model: Vec<usize>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            iterations: 2_000 + 20_000 * 15,
            burn_in: 2_000,
            thin: 15,
            n_chains: 1,
            seed: 1,
            alpha_proposal_sd: 0.05f64.sqrt(),
            neal_aux_d: 20,
            update_model: true,
            initial_model: Vec::new(),
        }
    }
}

impl ChainConfig {
    /// Config keeping `kept` draws after `burn_in`, thinned by `thin`.
    pub fn with_kept(kept: usize, burn_in: usize, thin: usize) -> Self {
        ChainConfig { iterations: burn_in + kept * thin, burn_in, thin, ..Default::default() }
    }

    pub fn kept_draws(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    pub fn validate(&self, p: usize) -> Result<(), ModelError> {
        let err = |m: String| Err(ModelError::InvalidConfig(m));
        if self.iterations <= self.burn_in {
            return err("iterations must exceed burn-in".into());
        }
        if self.thin == 0 || self.neal_aux_d == 0 || self.n_chains == 0 {
            return err("thin, neal_aux_d and n_chains must be positive".into());
        }
        if !(self.alpha_proposal_sd > 0.0) {
            return err("alpha proposal sd must be positive".into());
        }
        if self.initial_model.iter().any(|&j| j >= p) {
            return err("initial model refers to a missing column".into());
        }
        Ok(())
    }
}
