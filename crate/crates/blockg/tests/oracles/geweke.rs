//! Successive-conditional joint-distribution harness: forward draws from
//! the prior against alternating full sweeps and fresh responses.

use blockg::model::{
    canonicalize_partition, center_dataset, ChainConfig, ModelIndicator, ModelState, PriorSpec,
    ShrinkageState, Sigma2Prior, Variant,
};
use blockg::numerics::chain_rng;
use blockg::priors::AlphaPrior;
use blockg::sampler::{sweep, AlphaTuning, MoveStats};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};

use super::JeffreysSampler;

const N: usize = 15;
const S0: f64 = 3.0;
const R0: f64 = 2.0;

pub struct Setup {
    pub x: DMatrix<f64>,
    pub spec: PriorSpec,
    jeffreys: Vec<Option<JeffreysSampler>>,
    /// Holds the model fixed on both sides when set.
    pub fixed_model: Option<Vec<usize>>,
}

impl Setup {
    pub fn new(p: usize, a: f64, b: f64, variant: Variant, seed: u64) -> Self {
        let mut rng = chain_rng(seed, 99);
        let mut x = DMatrix::from_fn(N, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        for mut col in x.column_iter_mut() {
            let m = col.mean();
            col.add_scalar_mut(-m);
        }
        let mut spec = PriorSpec::new(a, b, 2.0).unwrap();
        spec.variant = variant;
        spec.sigma2_prior = Sigma2Prior::InverseGamma { shape: S0, scale: R0 };
        let jeffreys = (0..=p).map(|k| (k >= 2).then(|| JeffreysSampler::new(k))).collect();
        Setup { x, spec, jeffreys, fixed_model: None }
    }

    fn p(&self) -> usize {
        self.x.ncols()
    }

    fn labels_for<R: Rng>(&self, included: &[usize], alpha: f64, rng: &mut R) -> Vec<usize> {
        match &self.spec.variant {
            Variant::Dp => super::crp_labels(included.len(), alpha, rng),
            Variant::SingleBlock => vec![0; included.len()],
            Variant::AllSingletons => (0..included.len()).collect(),
            Variant::FixedPartition(groups) => included.iter().map(|&j| groups[j]).collect(),
        }
    }

    /// Independent draw of every unknown from the prior (with `β₀ = 0`).
    fn forward<R: Rng>(&self, rng: &mut R) -> ModelState {
        let p = self.p();
        let max = p - 2;
        let sizes: Vec<f64> = (0..=max)
            .map(|k| {
                (super::beta_binomial(p, k, self.spec.bb_c, self.spec.bb_d)
                    + statrs::function::factorial::ln_binomial(p as u64, k as u64))
                .exp()
            })
            .collect();
        let total: f64 = sizes.iter().sum();
        let mut r = rng.random::<f64>() * total;
        let mut k = max;
        for (i, w) in sizes.iter().enumerate() {
            if r < *w {
                k = i;
                break;
            }
            r -= w;
        }
        let mut cols: Vec<usize> = (0..p).collect();
        for i in 0..k {
            let j = rng.random_range(i..p);
            cols.swap(i, j);
        }
        let mut included = cols[..k].to_vec();
        included.sort_unstable();
        if let Some(m) = &self.fixed_model {
            included = m.clone();
        }
        let k = included.len();

        let alpha = match &self.jeffreys[k] {
            Some(js) => js.sample(rng),
            None => Gamma::new(1.0, 1.0).unwrap().sample(rng),
        };
        let partition = canonicalize_partition(&self.labels_for(&included, alpha, rng));
        let bp = Beta::new(self.spec.b + 1.0, self.spec.a + 1.0).unwrap();
        let g_tilde: Vec<f64> = (0..partition.k())
            .map(|_| {
                let u: f64 = bp.sample(rng);
                u / (1.0 - u)
            })
            .collect();
        let sigma2 = 1.0 / Gamma::new(S0, 1.0 / R0).unwrap().sample(rng);

        let mut state = ModelState::empty(p);
        state.indicator = ModelIndicator::from_included(p, &included);
        state.alpha = alpha;
        state.sigma2 = sigma2;
        state.beta = if k == 0 {
            Vec::new()
        } else {
            // β ~ N(0, σ² D A⁻¹ D) via A = LL', β = σ D L⁻ᵀ z
            let xg = DMatrix::from_fn(N, k, |r, c| self.x[(r, included[c])]);
            let l = (xg.transpose() * &xg).cholesky().unwrap();
            let z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
            let u = l.l().transpose().solve_upper_triangular(&z).unwrap();
            (0..k)
                .map(|i| {
                    let g = self.spec.tau2 * g_tilde[partition.labels()[i]];
                    sigma2.sqrt() * g.sqrt() * u[i]
                })
                .collect()
        };
        state.partition = partition;
        state.shrinkage = ShrinkageState { g_tilde };
        state
    }

    fn respond<R: Rng>(&self, state: &ModelState, rng: &mut R) -> Vec<f64> {
        let sd = state.sigma2.sqrt();
        (0..N)
            .map(|r| {
                let fit: f64 = state
                    .indicator
                    .included()
                    .iter()
                    .zip(&state.beta)
                    .map(|(&j, b)| self.x[(r, j)] * b)
                    .sum();
                state.beta0 + fit + sd * rng.sample::<f64, _>(StandardNormal)
            })
            .collect()
    }
}

fn summaries(s: &ModelState) -> [f64; 5] {
    // u = g/(1+g) of the first block, and β₁²/(σ² g) which is free of g a priori
    let u = s.shrinkage.g_tilde.first().map_or(0.0, |g| g / (1.0 + g));
    let b2 = s
        .beta
        .first()
        .map_or(0.0, |b| b * b / (s.sigma2 * s.shrinkage.g_tilde[s.partition.labels()[0]]));
    [s.p_gamma() as f64, s.sigma2, s.partition.k() as f64, u, b2]
}

/// Forward and chain means of one summary.
#[derive(Debug, Clone)]
pub struct GewekeStat {
    pub name: &'static str,
    pub forward: f64,
    pub chain: f64,
    /// `None` when both sides are constant.
    pub z: Option<f64>,
}

pub const STAT_NAMES: [&str; 5] = ["p_gamma", "sigma2", "K", "u", "b2"];

/// Runs `iters` forward draws and `iters` successive-conditional sweeps.
pub fn compare(setup: &Setup, iters: usize, seed: u64) -> Vec<GewekeStat> {
    let names: Vec<String> = (0..setup.p()).map(|j| format!("x{j}")).collect();
    let mut rng = chain_rng(seed, 0);
    let forward: Vec<[f64; 5]> = (0..iters).map(|_| summaries(&setup.forward(&mut rng))).collect();

    let mut cfg = ChainConfig::default();
    if let Some(m) = &setup.fixed_model {
        cfg.update_model = false;
        cfg.initial_model = m.clone();
    }
    let mut alpha_prior = AlphaPrior::new();
    let mut tuning = AlphaTuning::fixed(cfg.alpha_proposal_sd);
    let mut stats = MoveStats::default();
    let mut state = setup.forward(&mut rng);
    let mut y = setup.respond(&state, &mut rng);
    let mut chain = Vec::with_capacity(iters);
    for _ in 0..iters {
        let ds = center_dataset(&setup.x, &y, names.clone(), false).unwrap();
        sweep(&mut state, &ds, &setup.spec, &cfg, &mut alpha_prior, &mut tuning, &mut stats, &mut rng)
            .unwrap();
        chain.push(summaries(&state));
        y = setup.respond(&state, &mut rng);
    }

    STAT_NAMES
        .iter()
        .enumerate()
        .map(|(i, &name)| {
            let f: Vec<f64> = forward.iter().map(|s| s[i]).collect();
            let c: Vec<f64> = chain.iter().map(|s| s[i]).collect();
            let (mf, sf) = super::mean_se(&f);
            // heavy-tailed factors make the chain sticky, so take the more
            // cautious of the two error estimates
            let (mc, sc) = super::mean_se(&c);
            let sc = sc.max(super::batch_means_se(&c, 50));
            let z = (sf + sc > 0.0).then(|| (mf - mc) / (sf * sf + sc * sc).sqrt());
            GewekeStat { name, forward: mf, chain: mc, z }
        })
        .collect()
}
