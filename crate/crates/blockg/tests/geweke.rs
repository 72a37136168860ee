//! Successive-conditional joint-distribution checks: alternating full sweeps
//! with fresh responses must leave the prior invariant.
mod oracles;

use blockg::model::Variant;
use oracles::geweke::{compare, Setup};

fn check(setup: Setup, iters: usize, seed: u64) {
    for s in compare(&setup, iters, seed) {
        let Some(z) = s.z else { continue };
        eprintln!("{}: forward {:.4} chain {:.4} z {z:.2}", s.name, s.forward, s.chain);
        assert!(z.abs() < 4.0, "{}: forward {} vs chain {} (z = {z})", s.name, s.forward, s.chain);
    }
}

#[test]
fn joint_distribution_three_columns() {
    check(Setup::new(3, -0.5, 0.0, Variant::Dp, 1), 200_000, 2);
}

#[test]
fn joint_distribution_dirichlet_process() {
    check(Setup::new(5, -0.5, 0.0, Variant::Dp, 3), 200_000, 4);
}

#[test]
fn joint_distribution_dirichlet_process_other_base() {
    check(Setup::new(5, 1.0, 0.5, Variant::Dp, 5), 200_000, 6);
}

#[test]
fn joint_distribution_fixed_variants() {
    check(Setup::new(5, -0.5, 0.0, Variant::AllSingletons, 7), 150_000, 8);
    check(Setup::new(5, -0.5, 0.0, Variant::SingleBlock, 9), 150_000, 10);
    check(Setup::new(5, -0.5, 0.0, Variant::FixedPartition(vec![0, 0, 1, 1, 2]), 11), 150_000, 12);
}

#[test]
fn joint_distribution_fixed_model_heavy_tails() {
    let mut s = Setup::new(3, -0.5, 0.0, Variant::Dp, 1);
    s.fixed_model = Some(vec![1]);
    check(s, 200_000, 2);
}

#[test]
fn joint_distribution_fixed_model_light_tails() {
    let mut s = Setup::new(4, 2.0, 0.5, Variant::Dp, 21);
    s.fixed_model = Some(vec![0, 2]);
    check(s, 100_000, 22);
}
