mod oracles;

use blockg::inference::mc_standard_error;
use blockg::model::{
    canonicalize_partition, center_dataset, enumerate_partitions, ChainConfig, Dataset, ModelIndicator,
    ModelState, PriorSpec, ShrinkageState,
};
use blockg::numerics::random::sample_truncated_extended_gamma;
use blockg::numerics::{chain_rng, ln_beta};
use blockg::priors::{crp_log_prob, AlphaPrior};
use blockg::sampler::{
    step_alpha, step_coefficients, step_labels_neal8, step_model_jump, step_shrinkage,
    step_sigma2, run_chain, run_chain_indexed, run_chains, AlphaTuning, MoveStats,
};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn orthonormal_dataset(n: usize, beta: &[f64], seed: u64) -> Dataset {
    let mut rng = chain_rng(seed, 0);
    let x = oracles::orthonormal_design(n, beta.len(), &mut rng);
    let y: Vec<f64> = (0..n)
        .map(|r| {
            let e: f64 = StandardNormal.sample(&mut rng);
            1.0 + (0..beta.len()).map(|c| x[(r, c)] * beta[c]).sum::<f64>() + e
        })
        .collect();
    center_dataset(&x, &y, (0..beta.len()).map(|j| format!("x{j}")).collect(), false).unwrap()
}

fn state_with(p: usize, included: &[usize], labels: &[usize], g: &[f64]) -> ModelState {
    let mut s = ModelState::empty(p);
    s.indicator = ModelIndicator::from_included(p, included);
    s.partition = canonicalize_partition(labels);
    s.shrinkage = ShrinkageState { g_tilde: g.to_vec() };
    s.beta = vec![0.0; included.len()];
    s
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn coefficient_draws_shrink_the_least_squares_fit() {
    let ds = orthonormal_dataset(30, &[2.0, -1.0], 1);
    let spec = PriorSpec::new(-0.5, 0.0, 4.0).unwrap();
    let mut state = state_with(2, &[0, 1], &[0, 0], &[0.5]);
    state.sigma2 = 0.7;
    let mut rng = chain_rng(2, 0);
    let draws: Vec<Vec<f64>> = (0..10_000)
        .map(|_| {
            step_coefficients(&mut state, &ds, &spec, &mut rng).unwrap();
            state.beta.clone()
        })
        .collect();
    let factor = 2.0 / 3.0;
    for j in 0..2 {
        let col: Vec<f64> = draws.iter().map(|b| b[j]).collect();
        let want = factor * ds.xty()[j];
        let se = (factor * 0.7 / col.len() as f64).sqrt();
        assert!((mean(&col) - want).abs() < 3.0 * se, "coef {j}: {} vs {want}", mean(&col));
    }
}

#[test]
fn coefficient_draws_collapse_under_infinite_shrinkage() {
    let ds = orthonormal_dataset(30, &[2.0, -1.0], 1);
    let spec = PriorSpec::new(-0.5, 0.0, 1.0).unwrap();
    let mut state = state_with(2, &[0, 1], &[0, 1], &[1e-12, 1e-12]);
    let mut rng = chain_rng(3, 0);
    step_coefficients(&mut state, &ds, &spec, &mut rng).unwrap();
    let norm = state.beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    assert!(norm < 1e-4, "{norm}");
}

#[test]
fn intercept_and_variance_for_the_empty_model() {
    let ds = orthonormal_dataset(20, &[1.0, 0.0], 4);
    let spec = PriorSpec::new(-0.5, 0.0, 20.0).unwrap();
    let mut state = ModelState::empty(2);
    let mut rng = chain_rng(5, 0);
    let mut b0 = Vec::new();
    let mut s2 = Vec::new();
    for _ in 0..100_000 {
        s2.push(step_sigma2(&mut state, &ds, &spec, &mut rng).unwrap());
        state.sigma2 = 1.0;
        step_coefficients(&mut state, &ds, &spec, &mut rng).unwrap();
        b0.push(state.beta0);
    }
    let rate = ds.total_sum_squares() / 2.0;
    let shape = 19.0 / 2.0;
    let want = rate / (shape - 1.0);
    let sd = want / (shape - 2.0).sqrt();
    assert!((mean(&s2) - want).abs() < 3.0 * sd / (s2.len() as f64).sqrt());
    let se = (1.0 / 20.0 / b0.len() as f64).sqrt();
    assert!((mean(&b0) - ds.y_mean()).abs() < 5.0 * se);
}

#[test]
fn variance_rate_ignores_the_model_under_infinite_shrinkage() {
    let ds = orthonormal_dataset(25, &[3.0, 1.0, 0.5], 6);
    let g = [1e-14, 1e-14];
    let st = state_with(3, &[0, 2], &[0, 1], &g);
    let t = blockg::likelihood::omega_terms(
        &ds,
        st.indicator.included(),
        &blockg::likelihood::effective_g(&st.partition, &st.shrinkage, 1.0),
    )
    .unwrap();
    assert!((t.quad / ds.total_sum_squares() - 1.0).abs() < 1e-10);
}

/// `g^{b - m/2} (1 + g)^{-a-b-2} exp(-v/g)` in `u = g/(1+g)`.
fn single_block_target(v: f64, m: usize, a: f64, b: f64) -> impl Fn(f64, f64) -> f64 {
    move |u: f64, w: f64| {
        let g = u / w;
        let log = (b - m as f64 / 2.0) * g.ln() + (a + b + 2.0) * w.ln() - v / g - 2.0 * w.ln();
        log.exp()
    }
}

fn fixed_block_state(beta: [f64; 2]) -> (Dataset, ModelState, f64) {
    let ds = orthonormal_dataset(30, &[1.0, 1.0], 7);
    let mut st = state_with(2, &[0, 1], &[0, 0], &[1.0]);
    st.beta = beta.to_vec();
    st.sigma2 = 0.8;
    let v = (beta[0] * beta[0] + beta[1] * beta[1]) / (2.0 * 0.8);
    (ds, st, v)
}

#[test]
fn shrinkage_chain_matches_the_quadrature_target() {
    let (ds, mut st, v) = fixed_block_state([0.9, -0.4]);
    let (a, b) = (3.0, 0.5);
    let spec = PriorSpec::new(a, b, 1.0).unwrap();
    let f = single_block_target(v, 2, a, b);
    let z = oracles::tanh_sinh(&f);
    let m1 = oracles::tanh_sinh(|u, w| f(u, w) * u / w) / z;
    let m2 = oracles::tanh_sinh(|u, w| f(u, w) * (u / w).powi(2)) / z;
    let var = m2 - m1 * m1;
    let mut rng = chain_rng(8, 0);
    let gs: Vec<f64> = (0..60_000)
        .map(|_| {
            step_shrinkage(&mut st, &ds, &spec, &mut rng).unwrap();
            st.shrinkage.g_tilde[0]
        })
        .collect();
    let (got, se) = oracles::mean_se(&gs);
    assert!((got - m1).abs() < 3.0 * se, "mean {got} vs {m1} (se {se})");
    let sq: Vec<f64> = gs.iter().map(|g| (g - got).powi(2)).collect();
    let (got_var, se_var) = (mean(&sq), mc_standard_error(&sq));
    assert!((got_var - var).abs() < 3.0 * se_var, "var {got_var} vs {var} (se {se_var})");
}

#[test]
fn one_shrinkage_sweep_preserves_an_exact_draw() {
    let (ds, st0, v) = fixed_block_state([0.3, 0.5]);
    let (a, b) = (-0.5, 0.0);
    let spec = PriorSpec::new(a, b, 1.0).unwrap();
    let grid = oracles::GridDistribution::new(single_block_target(v, 2, a, b));
    let mut rng = chain_rng(9, 0);
    let out: Vec<f64> = (0..5_000)
        .map(|_| {
            let u = grid.sample(&mut rng);
            let mut st = st0.clone();
            st.shrinkage.g_tilde[0] = u / (1.0 - u);
            step_shrinkage(&mut st, &ds, &spec, &mut rng).unwrap();
            let g = st.shrinkage.g_tilde[0];
            g / (1.0 + g)
        })
        .collect();
    let ks = oracles::ks_distance(out, |u| grid.cdf(u));
    assert!(ks < 0.03, "KS {ks}");
}

#[test]
fn shrinkage_with_zero_coefficients_falls_back_to_the_base_measure() {
    let (ds, mut st, _) = fixed_block_state([0.0, 0.0]);
    let spec = PriorSpec::new(-0.5, 0.0, 1.0).unwrap();
    let mut rng = chain_rng(10, 0);
    step_shrinkage(&mut st, &ds, &spec, &mut rng).unwrap();
    assert!(st.shrinkage.g_tilde[0] > 0.0 && st.shrinkage.g_tilde[0].is_finite());
}

#[test]
fn orthogonal_design_has_no_cross_block_term() {
    let ds = orthonormal_dataset(30, &[1.0, 2.0, 3.0], 11);
    let mut st = state_with(3, &[0, 1, 2], &[0, 1, 1], &[2.0, 0.5]);
    st.beta = vec![1.0, -2.0, 0.7];
    for (_, w) in blockg::sampler::block_statistics(&st, &ds, 1.0) {
        assert!(w.abs() < 1e-12);
    }
}

fn alpha_fixture() -> ModelState {
    let mut st = state_with(8, &[0, 1, 2, 3, 4, 5], &[0, 0, 0, 1, 1, 2], &[1.0, 1.0, 1.0]);
    st.alpha = 1.0;
    st
}

#[test]
fn alpha_chain_matches_the_quadrature_target() {
    let mut st = alpha_fixture();
    let mut tuning = AlphaTuning { log_sd: 0.05f64.sqrt().ln(), adapt: true, iteration: 0 };
    let mut stats = MoveStats::default();
    let mut rng = chain_rng(12, 0);
    for i in 0..5_000 {
        tuning.iteration = i;
        step_alpha(&mut st, &mut tuning, &mut stats, &mut rng).unwrap();
    }
    tuning.adapt = false;
    let mut stats = MoveStats::default();
    let alphas: Vec<f64> = (0..100_000)
        .map(|_| {
            step_alpha(&mut st, &mut tuning, &mut stats, &mut rng).unwrap();
            st.alpha
        })
        .collect();
    let log_post = |u: f64, v: f64| oracles::alpha_log_posterior(u / v, 6, 3) - 2.0 * v.ln();
    let z = oracles::tanh_sinh_log(log_post);
    let want = (oracles::tanh_sinh_log(|u, v| log_post(u, v) + (u / v).ln()) - z).exp();
    let (got, se) = oracles::mean_se(&alphas);
    assert!((got - want).abs() < 3.0 * se, "{got} vs {want} (se {se})");
    let acc = stats.alpha_acceptance().unwrap();
    assert!((0.35..=0.55).contains(&acc), "acceptance {acc}");
}

#[test]
fn tiny_alpha_steps_are_always_accepted() {
    let mut st = alpha_fixture();
    let mut tuning = AlphaTuning::fixed(1e-9);
    let mut stats = MoveStats::default();
    let mut rng = chain_rng(13, 0);
    for _ in 0..1_000 {
        step_alpha(&mut st, &mut tuning, &mut stats, &mut rng).unwrap();
    }
    assert!(stats.alpha_acceptance().unwrap() > 0.99);
}

/// Label chain (scan plus shrinkage updates) with `β`, `σ²`, `α` held fixed.
fn label_chain(beta: &[f64], iters: usize, seed: u64) -> Vec<Vec<usize>> {
    let ds = orthonormal_dataset(40, &vec![1.0; beta.len()], 14);
    let spec = PriorSpec::new(-0.5, 0.0, 1.0).unwrap();
    let c = beta.len();
    let mut st = state_with(c + 2, &(0..c).collect::<Vec<_>>(), &vec![0; c], &[1.0]);
    st.beta = beta.to_vec();
    st.sigma2 = 1.0;
    st.alpha = 1.0;
    let mut rng = chain_rng(seed, 0);
    (0..iters)
        .map(|_| {
            step_labels_neal8(&mut st, &ds, &spec, 20, &mut rng).unwrap();
            step_shrinkage(&mut st, &ds, &spec, &mut rng).unwrap();
            st.partition.labels().to_vec()
        })
        .collect()
}

#[test]
fn label_scan_targets_the_enumerated_partition_posterior() {
    let beta = [1.0, 1.2, 4.0];
    let parts = enumerate_partitions(3);
    let log_w: Vec<f64> = parts
        .iter()
        .map(|p| {
            crp_log_prob(p, 1.0).unwrap()
                + (0..p.k())
                    .map(|k| {
                        let ss: f64 = p.members(k).iter().map(|&i| beta[i] * beta[i]).sum();
                        oracles::block_evidence(ss, p.sizes()[k], 1.0, -0.5, 0.0)
                    })
                    .sum::<f64>()
        })
        .collect();
    let mx = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = log_w.iter().map(|w| (w - mx).exp()).sum();
    let probs: Vec<f64> = log_w.iter().map(|w| (w - mx).exp() / total).collect();

    let draws = label_chain(&beta, 100_000, 15);
    let kept: Vec<&Vec<usize>> = draws.iter().step_by(10).collect();
    let n = kept.len() as f64;
    let chi2: f64 = parts
        .iter()
        .zip(&probs)
        .map(|(p, &pr)| {
            let obs = kept.iter().filter(|l| l.as_slice() == p.labels()).count() as f64;
            (obs - n * pr).powi(2) / (n * pr)
        })
        .sum();
    // 4 degrees of freedom, 0.1% level
    assert!(chi2 < 18.47, "chi2 {chi2}, probs {probs:?}");
}

#[test]
fn very_different_coefficients_get_different_factors() {
    let draws = label_chain(&[100.0, 0.1], 5_000, 16);
    let split = draws.iter().filter(|l| l[0] != l[1]).count() as f64 / draws.len() as f64;
    assert!(split > 0.8, "{split}");
}

#[test]
fn extended_gamma_draws_match_the_quadrature_cdf() {
    let mut rng = chain_rng(17, 0);
    for &(shape, tilt, trunc) in
        &[(1.5, 0.8, 4.0), (3.0, -1.2, 10.0), (0.8, 2.0, 0.5), (6.0, 0.0, 3.0)]
    {
        let dens = move |u: f64, _: f64| {
            let t = trunc * u;
            ((shape - 1.0) * t.ln() - t - 2.0 * tilt * t.sqrt()).exp()
        };
        let grid = oracles::GridDistribution::new(dens);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| sample_truncated_extended_gamma(&mut rng, shape, tilt, trunc).unwrap() / trunc)
            .collect();
        let ks = oracles::ks_distance(xs, |u| grid.cdf(u));
        assert!(ks < 0.02, "shape {shape} tilt {tilt}: KS {ks}");
    }
}

fn weak_signal_dataset() -> Dataset {
    let mut rng = chain_rng(18, 0);
    let x = DMatrix::from_fn(20, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y: Vec<f64> = (0..20).map(|r| 0.3 * x[(r, 0)] + rng.sample::<f64, _>(StandardNormal)).collect();
    center_dataset(&x, &y, (0..4).map(|j| format!("x{j}")).collect(), false).unwrap()
}

#[test]
fn jumps_never_exceed_the_size_limit_and_rejections_leave_state_alone() {
    let ds = weak_signal_dataset();
    let spec = PriorSpec::hyper_g_n(20);
    let mut st = state_with(4, &[0, 1], &[0, 1], &[1.0, 2.0]);
    let mut alpha_prior = AlphaPrior::new();
    let mut stats = MoveStats::default();
    let mut rng = chain_rng(19, 0);
    for _ in 0..3_000 {
        let before = st.clone();
        let grew = ModelIndicator::p_gamma(&st.indicator);
        let accepted =
            step_model_jump(&mut st, &ds, &spec, &mut alpha_prior, &mut stats, &mut rng).unwrap();
        if !accepted {
            assert_eq!(st, before);
        }
        assert!(st.p_gamma() <= 2, "from {grew} to {}", st.p_gamma());
        st.validate().unwrap();
    }
    assert!(stats.flip_accepted > 0 && stats.swap_proposed > 0);
}

#[test]
fn removing_the_only_variable_empties_the_partition() {
    let ds = weak_signal_dataset();
    let spec = PriorSpec::hyper_g_n(20);
    let mut alpha_prior = AlphaPrior::new();
    let mut stats = MoveStats::default();
    let mut rng = chain_rng(20, 0);
    let mut seen_empty = false;
    for _ in 0..500 {
        let mut st = state_with(4, &[3], &[0], &[5.0]);
        step_model_jump(&mut st, &ds, &spec, &mut alpha_prior, &mut stats, &mut rng).unwrap();
        if st.p_gamma() == 0 {
            assert_eq!(st.partition.k(), 0);
            assert!(st.shrinkage.g_tilde.is_empty() && st.beta.is_empty());
            seen_empty = true;
        }
    }
    assert!(seen_empty);
}

#[test]
fn beta_function_oracle_agrees_with_the_library() {
    // keeps the two log-Beta routes honest for the block evidence above
    let want = statrs::function::gamma::ln_gamma(0.5) + statrs::function::gamma::ln_gamma(1.0)
        - statrs::function::gamma::ln_gamma(1.5);
    assert!((ln_beta(0.5, 1.0) - want).abs() < 1e-14);
}

#[test]
fn chains_are_reproducible_and_independent_of_chain_count() {
    let ds = weak_signal_dataset();
    let spec = PriorSpec::hyper_g_n(20);
    let cfg = ChainConfig { seed: 77, n_chains: 3, ..ChainConfig::with_kept(100, 20, 2) };
    let a = run_chain(&ds, &spec, &cfg).unwrap();
    let b = run_chain(&ds, &spec, &cfg).unwrap();
    assert_eq!(a, b);
    let all = run_chains(&ds, &spec, &cfg).unwrap();
    assert_eq!(all.len(), 3);
    for (c, out) in all.iter().enumerate() {
        assert_eq!(out, &run_chain_indexed(&ds, &spec, &cfg, c as u64).unwrap());
    }
    assert_ne!(all[0].draws, all[1].draws);
    let other = run_chain(&ds, &spec, &ChainConfig { seed: 78, ..cfg.clone() }).unwrap();
    assert_ne!(a.draws, other.draws);
}
