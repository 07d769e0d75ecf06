//! Hitting-time tails and the ergodic sanity check.

use mml_core::bounds::{explicit_hitting_tail, hitting_tail_bound};
use mml_core::chain::generate;
use mml_core::chain::Family;
use mml_core::hitting::{hitting_table, t_large};
use mml_core::report::BoundReport;
use mml_core::sim::{Executor, Simulator, Z99};
use mml_core::{ChainSpec, Result, StateSet};
use rand::Rng;

use super::{chain_streams, chains_or, random_corpus, singletons_and_random, VerifyOptions};
use crate::config::NamedChain;
use crate::descriptor::Descriptor;

const PROP1_TRIALS: u64 = 100_000;
const COR3_TRIALS: u64 = 100_000;
/// Thresholds per set in the Prop. 1 sweep, spread over `[0, 50 E]`.
const PROP1_POINTS: u64 = 50;
/// Seed of the fixed chain used by the ergodic check.
const ERGODIC_CHAIN_SEED: u64 = 2024;
const ERGODIC_STEPS: u64 = 1_000_000;
const ERGODIC_TV: f64 = 0.01;

/// Nine family chains followed by eleven random-dense chains.
fn prop1_corpus(seed: u64) -> Result<Vec<NamedChain>> {
    let mut out: Vec<NamedChain> = [
        Descriptor::LazyCycle { m: 4, hold: 0.5 },
        Descriptor::LazyCycle { m: 6, hold: 0.2 },
        Descriptor::LazyCycle { m: 8, hold: 0.7 },
        Descriptor::BirthDeath { m: 5, p: 0.3, q: 0.3 },
        Descriptor::BirthDeath { m: 8, p: 0.2, q: 0.4 },
        Descriptor::TwoState { p: 0.1, q: 0.2 },
        Descriptor::TwoState { p: 0.05, q: 0.5 },
        Descriptor::Iid { mu: vec![0.1, 0.2, 0.3, 0.4] },
        Descriptor::Iid { mu: vec![0.5, 0.5] },
    ]
    .iter()
    .map(NamedChain::generated)
    .collect::<Result<_>>()?;
    out.extend(random_corpus(11, 8, seed)?);
    Ok(out)
}

/// `Pr[N_B > t] <= exp(-floor(t / ceil(e E)))` with `E = 1 + T(B)`, the
/// largest expected first-visit index over all starts.
pub(super) fn prop1<E: Executor>(opts: &VerifyOptions, seed: u64, exec: &E) -> Result<Vec<BoundReport>> {
    let chains = chains_or(opts, || prop1_corpus(seed))?;
    let trials = opts.trials(PROP1_TRIALS);
    let mut out = Vec::new();
    for (k, chain) in chains.iter().enumerate() {
        let m = chain.spec.m();
        let pi = chain.spec.matrix.stationary()?;
        let sim = Simulator::new(&chain.spec, &pi)?;
        let (mut rng, sim_seed) = chain_streams(seed, k);
        let sets = match opts.user_sets(m)? {
            Some(s) => s,
            None => {
                // one random singleton and one random set of any size
                let single = StateSet::singleton(rng.random_range(0..m), m)?;
                let any = StateSet::from_mask(rng.random_range(1..=(1u64 << m) - 1), m);
                vec![single, any]
            }
        };
        for (b_index, b) in sets.iter().enumerate() {
            let expected = hitting_table(&chain.spec.matrix, b)?.worst_first_visit_index();
            let horizon = (50.0 * expected).floor() as u64;
            let step = horizon.div_ceil(PROP1_POINTS).max(1);
            let thresholds: Vec<u64> = (0..=horizon).step_by(step as usize).collect();
            let tail = sim.empirical_hitting_tail(b, &thresholds, trials, mml_core::rng::derive_seed(sim_seed, b_index as u64), exec)?;
            for et in &tail.tails {
                let bound = hitting_tail_bound(expected, et.threshold);
                out.push(
                    BoundReport::upper("prop1", bound, et.p_hat(), et.ci_halfwidth(Z99), 0.0)
                        .with_vacuous(bound >= 1.0)
                        .with_chain(&chain.id)
                        .param("B", b)
                        .param("t", et.threshold)
                        .param("E", expected)
                        .param("trials", trials)
                        .param("cap_hits", tail.cap_hits),
                );
            }
        }
    }
    Ok(out)
}

/// `Pr[N_A > t] <= exp(-c t pi(A) / T(eps))` at `t = ceil(k T / pi(A))`, `k` in {1, 2, 4, 8}.
pub(super) fn cor3<E: Executor>(opts: &VerifyOptions, seed: u64, exec: &E) -> Result<Vec<BoundReport>> {
    let chains = chains_or(opts, || super::family_suite(opts.seed))?;
    let trials = opts.trials(COR3_TRIALS);
    let mut out = Vec::new();
    for (k, chain) in chains.iter().enumerate() {
        let m = chain.spec.m();
        let pi = chain.spec.matrix.stationary()?;
        let t_eps = t_large(&chain.spec.matrix, &pi, opts.epsilon)?.value;
        let sim = Simulator::new(&chain.spec, &pi)?;
        let (mut rng, sim_seed) = chain_streams(seed, k);
        let sets = match opts.user_sets(m)? {
            Some(s) => s,
            None => singletons_and_random(m, 10, &mut rng),
        };
        for (a_index, a) in sets.iter().enumerate() {
            let mass = pi.mass(a);
            let mut thresholds: Vec<u64> = [1.0, 2.0, 4.0, 8.0].iter().map(|f| (f * t_eps / mass).ceil() as u64).collect();
            thresholds.dedup();
            let tail = sim.empirical_hitting_tail(a, &thresholds, trials, mml_core::rng::derive_seed(sim_seed, a_index as u64), exec)?;
            for et in &tail.tails {
                let bound = explicit_hitting_tail(mass, t_eps, et.threshold as f64, opts.c);
                out.push(
                    BoundReport::upper("cor3", bound, et.p_hat(), et.ci_halfwidth(Z99), 0.0)
                        .with_vacuous(t_eps == 0.0)
                        .with_chain(&chain.id)
                        .param("A", a)
                        .param("t", et.threshold)
                        .param("T", t_eps)
                        .param("c", opts.c)
                        .param("trials", trials)
                        .param("cap_hits", tail.cap_hits),
                );
            }
        }
    }
    Ok(out)
}

/// Total-variation distance between occupancy frequencies after 10^6 steps and `pi`.
pub(super) fn ergodic(opts: &VerifyOptions, seed: u64) -> Result<Vec<BoundReport>> {
    let chains = chains_or(opts, || {
        let family = Family::RandomDense { m: 5, alpha: 1.0 };
        let spec: ChainSpec = generate(&family, ERGODIC_CHAIN_SEED)?;
        let id = Descriptor::RandomDense { m: 5, alpha: 1.0, seed: ERGODIC_CHAIN_SEED }.to_string();
        Ok(vec![NamedChain { id, spec }])
    })?;
    let mut out = Vec::new();
    for (k, chain) in chains.iter().enumerate() {
        let pi = chain.spec.matrix.stationary()?;
        let sim = Simulator::new(&chain.spec, &pi)?;
        let (_, sim_seed) = chain_streams(seed, k);
        let freq = sim.occupancy(ERGODIC_STEPS, sim_seed);
        let tv: f64 = freq.iter().zip(pi.as_slice()).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
        out.push(
            BoundReport::upper("ergodic-tv", ERGODIC_TV, tv, 0.0, 0.0)
                .with_chain(&chain.id)
                .param("n", ERGODIC_STEPS),
        );
    }
    Ok(out)
}
