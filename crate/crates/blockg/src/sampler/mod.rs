//! Metropolis-within-Gibbs sampler over `(γ, ξ, g̃, α, β₀, β, σ²)`.
//!
//! One sweep runs the model jump, then draws `σ²` from its collapsed
//! conditional and `(β₀, β)` given `σ²`, then the label scan, `α` and the
//! block shrinkage factors. The two conjugate draws form one blocked update of
//! `(σ², β₀, β)`; taking `σ²` first keeps both exact.

mod alpha;
mod coefficients;
mod labels;
mod model_jump;
mod shrinkage;

pub use alpha::{alpha_log_target, step_alpha};
pub use coefficients::{step_coefficients, step_sigma2};
pub use labels::step_labels_neal8;
pub use model_jump::step_model_jump;
pub use shrinkage::{block_statistics, step_shrinkage};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::inference::{ChainOutput, Draw};
use crate::likelihood::LikelihoodError;
use crate::model::{
    canonicalize_partition, ChainConfig, Dataset, ModelError, ModelIndicator, ModelState,
    Partition, PriorSpec, ShrinkageState, Variant,
};
use crate::numerics::random::gamma;
use crate::numerics::NumericsError;
use crate::priors::{beta_prime_sample, AlphaPrior, PriorError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplerError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("state check failed after {step}: {source}")]
    InvalidState { step: &'static str, source: ModelError },
    #[error("chain {chain} failed at iteration {iteration}: {source}")]
    Aborted { chain: u64, iteration: usize, source: Box<SamplerError> },
}

/// Proposal and acceptance counts for the Metropolis moves.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveStats {
    pub flip_proposed: u64,
    pub flip_accepted: u64,
    pub swap_proposed: u64,
    pub swap_accepted: u64,
    pub alpha_proposed: u64,
    pub alpha_accepted: u64,
}

impl MoveStats {
    pub fn alpha_acceptance(&self) -> Option<f64> {
        rate(self.alpha_accepted, self.alpha_proposed)
    }

    pub fn flip_acceptance(&self) -> Option<f64> {
        rate(self.flip_accepted, self.flip_proposed)
    }

    pub fn swap_acceptance(&self) -> Option<f64> {
        rate(self.swap_accepted, self.swap_proposed)
    }

    pub fn merge(&mut self, other: &MoveStats) {
        self.flip_proposed += other.flip_proposed;
        self.flip_accepted += other.flip_accepted;
        self.swap_proposed += other.swap_proposed;
        self.swap_accepted += other.swap_accepted;
        self.alpha_proposed += other.alpha_proposed;
        self.alpha_accepted += other.alpha_accepted;
    }
}

fn rate(acc: u64, prop: u64) -> Option<f64> {
    (prop > 0).then(|| acc as f64 / prop as f64)
}

/// Random-walk scale for `log α`, adapted during burn-in only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaTuning {
    pub log_sd: f64,
    pub adapt: bool,
    pub iteration: usize,
}

impl AlphaTuning {
    pub const TARGET: f64 = 0.45;

    pub fn fixed(sd: f64) -> Self {
        AlphaTuning { log_sd: sd.ln(), adapt: false, iteration: 0 }
    }

    pub fn sd(&self) -> f64 {
        self.log_sd.exp()
    }

    pub(crate) fn update(&mut self, accept_prob: f64) {
        if self.adapt {
            let step = (self.iteration as f64 + 1.0).powf(-0.6);
            self.log_sd = (self.log_sd + step * (accept_prob - Self::TARGET)).clamp(-12.0, 5.0);
        }
    }
}

/// Draw from the base measure on the `τ²`-relative scale.
pub(crate) fn base_measure_draw<R: Rng + ?Sized>(
    spec: &PriorSpec,
    rng: &mut R,
) -> Result<f64, PriorError> {
    beta_prime_sample(spec.a, spec.b, 1.0, rng)
}

fn validated(state: &ModelState, step: &'static str) -> Result<(), SamplerError> {
    if cfg!(debug_assertions) {
        state.validate().map_err(|source| SamplerError::InvalidState { step, source })?;
    }
    Ok(())
}

/// Starting state: the configured model with every block factor at one and
/// the partition implied by the variant.
pub fn initial_state(
    ds: &Dataset,
    spec: &PriorSpec,
    cfg: &ChainConfig,
) -> Result<ModelState, SamplerError> {
    let p = ds.p();
    let ind = ModelIndicator::from_included(p, &cfg.initial_model);
    // a chain with γ held fixed conditions on it, so the size cap of the
    // model prior only matters when γ moves
    if cfg.update_model && ind.p_gamma() + 2 > p && ind.p_gamma() > 0 {
        return Err(ModelError::InvalidConfig(format!(
            "initial model with {} of {} variables has zero prior mass",
            ind.p_gamma(),
            p
        ))
        .into());
    }
    let c = ind.p_gamma();
    let partition = match &spec.variant {
        Variant::Dp | Variant::SingleBlock => Partition::single_block(c),
        Variant::AllSingletons => Partition::singletons(c),
        Variant::FixedPartition(groups) => {
            let raw: Vec<usize> = ind.included().iter().map(|&j| groups[j]).collect();
            canonicalize_partition(&raw)
        }
    };
    let k = partition.k();
    let state = ModelState {
        indicator: ind,
        partition,
        shrinkage: ShrinkageState { g_tilde: vec![1.0; k] },
        beta0: ds.y_mean(),
        beta: vec![0.0; c],
        sigma2: ds.total_sum_squares() / (ds.n() as f64 - 1.0),
        alpha: 1.0,
    };
    state.validate()?;
    Ok(state)
}

/// One full sweep of every update.
#[allow(clippy::too_many_arguments)]
pub fn sweep<R: Rng + ?Sized>(
    state: &mut ModelState,
    ds: &Dataset,
    spec: &PriorSpec,
    cfg: &ChainConfig,
    alpha_prior: &mut AlphaPrior,
    tuning: &mut AlphaTuning,
    stats: &mut MoveStats,
    rng: &mut R,
) -> Result<(), SamplerError> {
    let is_dp = spec.variant == Variant::Dp;
    if cfg.update_model {
        step_model_jump(state, ds, spec, alpha_prior, stats, rng)?;
        validated(state, "model jump")?;
    }
    step_sigma2(state, ds, spec, rng)?;
    validated(state, "sigma2")?;
    step_coefficients(state, ds, spec, rng)?;
    validated(state, "coefficients")?;
    if is_dp {
        if state.p_gamma() >= 2 {
            step_labels_neal8(state, ds, spec, cfg.neal_aux_d, rng)?;
            validated(state, "labels")?;
            step_alpha(state, tuning, stats, rng)?;
        } else {
            // α does not touch the likelihood or the partition here, so its
            // conditional is the Gamma(1, 1) pseudo-prior.
            state.alpha = gamma(rng, 1.0, 1.0)?;
        }
        validated(state, "alpha")?;
    }
    if state.p_gamma() >= 1 {
        step_shrinkage(state, ds, spec, rng)?;
        validated(state, "shrinkage")?;
    }
    Ok(())
}

/// Runs chain number `chain` of the configuration (its random stream is
/// stream `chain` of `cfg.seed`).
pub fn run_chain_indexed(
    ds: &Dataset,
    spec: &PriorSpec,
    cfg: &ChainConfig,
    chain: u64,
) -> Result<ChainOutput, SamplerError> {
    spec.validate(ds.p())?;
    cfg.validate(ds.p())?;
    let mut rng = crate::numerics::chain_rng(cfg.seed, chain);
    let mut state = initial_state(ds, spec, cfg)?;
    let mut alpha_prior = AlphaPrior::new();
    let mut tuning = AlphaTuning { log_sd: cfg.alpha_proposal_sd.ln(), adapt: true, iteration: 0 };
    let mut burn_stats = MoveStats::default();
    let mut stats = MoveStats::default();
    let mut draws = Vec::with_capacity(cfg.kept_draws());
    for iteration in 0..cfg.iterations {
        let burning = iteration < cfg.burn_in;
        tuning.adapt = burning;
        tuning.iteration = iteration;
        let s = if burning { &mut burn_stats } else { &mut stats };
        sweep(&mut state, ds, spec, cfg, &mut alpha_prior, &mut tuning, s, &mut rng).map_err(
            |e| SamplerError::Aborted { chain, iteration, source: Box::new(e) },
        )?;
        if !burning && (iteration + 1 - cfg.burn_in).is_multiple_of(cfg.thin) {
            draws.push(Draw::from_state(&state));
        }
    }
    Ok(ChainOutput::new(ds, spec.clone(), cfg.clone(), draws, stats, tuning.sd()))
}

pub fn run_chain(
    ds: &Dataset,
    spec: &PriorSpec,
    cfg: &ChainConfig,
) -> Result<ChainOutput, SamplerError> {
    run_chain_indexed(ds, spec, cfg, 0)
}

/// Runs `cfg.n_chains` independent chains in parallel, in chain order.
pub fn run_chains(
    ds: &Dataset,
    spec: &PriorSpec,
    cfg: &ChainConfig,
) -> Result<Vec<ChainOutput>, SamplerError> {
    (0..cfg.n_chains as u64)
        .into_par_iter()
        .map(|c| run_chain_indexed(ds, spec, cfg, c))
        .collect()
}
