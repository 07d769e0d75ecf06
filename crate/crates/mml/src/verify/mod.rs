//! Empirical and analytic verification suites.
//!
//! Every suite returns one [`BoundReport`] per check. Suites draw all of their
//! randomness from a seed derived from the master seed and the suite's
//! position in [`Suite::ALL`], so a suite produces the same rows whether it
//! runs alone or as part of `all`.

mod analytic;
mod iid;
mod majorization;
mod tails;

pub use iid::binomial_region;

use std::collections::BTreeMap;

use mml_core::bounds::{DEFAULT_C, DEFAULT_C2, DEFAULT_EPSILON};
use mml_core::report::BoundReport;
use mml_core::rng::{self, derive_seed, StreamRng};
use mml_core::sim::Executor;
use mml_core::{Result, StateSet};
use rand::Rng;
use serde::Serialize;

use crate::config::NamedChain;
use crate::descriptor::Descriptor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Lemma1,
    Lemma2,
    Prop1,
    Iid,
    Thm1,
    Cor1,
    Cor3,
    Ergodic,
    Pinsker,
}

impl Suite {
    /// Run order of `verify all`.
    pub const ALL: [Suite; 9] = [
        Suite::Lemma1,
        Suite::Lemma2,
        Suite::Prop1,
        Suite::Iid,
        Suite::Thm1,
        Suite::Cor1,
        Suite::Cor3,
        Suite::Ergodic,
        Suite::Pinsker,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Lemma1 => "lemma1",
            Suite::Lemma2 => "lemma2",
            Suite::Prop1 => "prop1",
            Suite::Iid => "iid",
            Suite::Thm1 => "thm1",
            Suite::Cor1 => "cor1",
            Suite::Cor3 => "cor3",
            Suite::Ergodic => "ergodic",
            Suite::Pinsker => "pinsker",
        }
    }

    pub fn seed(self, master: u64) -> u64 {
        let index = Suite::ALL.iter().position(|&s| s == self).expect("every suite is listed") as u64;
        derive_seed(master, index)
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    pub c: f64,
    pub c2: f64,
    /// `epsilon` in `T(epsilon)`.
    pub epsilon: f64,
    /// Monte Carlo trials per point; each suite has its own default.
    pub trials: Option<u64>,
    pub random_chains: Option<usize>,
    pub m_max: Option<usize>,
    pub pairs_max: usize,
    pub iid_m: Vec<usize>,
    pub n_grid: Option<Vec<u64>>,
    /// Replaces the generated corpus of every chain-based suite.
    pub chains: Option<Vec<NamedChain>>,
    pub sets: Option<Vec<Vec<usize>>>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            c: DEFAULT_C,
            c2: DEFAULT_C2,
            epsilon: DEFAULT_EPSILON,
            trials: None,
            random_chains: None,
            m_max: None,
            pairs_max: 500,
            iid_m: vec![2, 4, 8],
            n_grid: None,
            chains: None,
            sets: None,
        }
    }
}

impl VerifyOptions {
    fn trials(&self, default: u64) -> u64 {
        self.trials.unwrap_or(default)
    }

    /// User-supplied sets, validated against `m`.
    fn user_sets(&self, m: usize) -> Result<Option<Vec<StateSet>>> {
        self.sets
            .as_ref()
            .map(|sets| sets.iter().map(|s| StateSet::new(s.iter().copied(), m)).collect())
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutput {
    pub suite: Suite,
    pub seed: u64,
    pub reports: Vec<BoundReport>,
    /// Free-form remarks for the report header.
    pub notes: Vec<String>,
}

pub fn run_suite<E: Executor>(suite: Suite, opts: &VerifyOptions, exec: &E) -> Result<SuiteOutput> {
    let seed = suite.seed(opts.seed);
    let mut notes = Vec::new();
    let reports = match suite {
        Suite::Lemma1 => analytic::lemma1(opts, seed)?,
        Suite::Lemma2 => analytic::lemma2(opts, seed)?,
        Suite::Pinsker => analytic::pinsker()?,
        Suite::Prop1 => tails::prop1(opts, seed, exec)?,
        Suite::Cor3 => tails::cor3(opts, seed, exec)?,
        Suite::Ergodic => tails::ergodic(opts, seed)?,
        Suite::Iid => iid::run(opts, seed, exec, &mut notes)?,
        Suite::Thm1 => majorization::thm1(opts, seed, exec, &mut notes)?,
        Suite::Cor1 => majorization::cor1(opts, seed, exec, &mut notes)?,
    };
    Ok(SuiteOutput { suite, seed, reports, notes })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CheckCounts {
    pub pass: u64,
    pub fail: u64,
    pub vacuous: u64,
}

/// A failed non-vacuous check with everything needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub suite: Suite,
    pub name: String,
    pub chain_id: String,
    pub params: String,
    pub seed: u64,
    pub bound: f64,
    pub value: f64,
    pub ci: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VerificationSummary {
    pub master_seed: u64,
    pub checks: BTreeMap<String, CheckCounts>,
    pub violations: Vec<Violation>,
}

impl VerificationSummary {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed, ..Default::default() }
    }

    pub fn add(&mut self, out: &SuiteOutput) {
        for r in &out.reports {
            let counts = self.checks.entry(r.name.clone()).or_default();
            if r.vacuous {
                counts.vacuous += 1;
            } else if r.holds {
                counts.pass += 1;
            } else {
                counts.fail += 1;
                self.violations.push(Violation {
                    suite: out.suite,
                    name: r.name.clone(),
                    chain_id: r.chain_id.clone(),
                    params: r.params.clone(),
                    seed: out.seed,
                    bound: r.bound,
                    value: r.value,
                    ci: r.ci,
                });
            }
        }
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        for (name, c) in &self.checks {
            s.push_str(&format!("{name:<24} pass {:>7}  fail {:>5}  vacuous {:>6}\n", c.pass, c.fail, c.vacuous));
        }
        s.push_str(&format!("violations: {}\n", self.violations.len()));
        for v in self.violations.iter().take(20) {
            s.push_str(&format!(
                "  {} [{}] chain={} {} seed={}: value {} bound {} ci {}\n",
                v.name,
                v.suite.name(),
                v.chain_id,
                v.params,
                v.seed,
                v.value,
                v.bound,
                v.ci
            ));
        }
        if self.violations.len() > 20 {
            s.push_str(&format!("  ... and {} more\n", self.violations.len() - 20));
        }
        s
    }
}

/// Offset keeping the family-suite stream apart from the per-suite seeds.
const FAMILY_STREAM: u64 = 1 << 32;

/// Seeded random-dense chains with `2 <= m <= m_max`.
fn random_corpus(count: usize, m_max: usize, seed: u64) -> Result<Vec<NamedChain>> {
    const ALPHAS: [f64; 3] = [0.3, 1.0, 3.0];
    let m_max = m_max.max(2);
    (0..count)
        .map(|i| {
            let i = i as u64;
            let m = 2 + (derive_seed(seed, 2 * i) % (m_max as u64 - 1)) as usize;
            let alpha = ALPHAS[(i % 3) as usize];
            NamedChain::generated(&Descriptor::RandomDense { m, alpha, seed: derive_seed(seed, 2 * i + 1) })
        })
        .collect()
}

/// Lazy cycles on 5 and 10 states, a birth-death chain on 8 states and
/// random-dense chains on 4, 7 and 10 states.
/// Depends only on the master seed, so the suites that share it see the same chains.
fn family_suite(master: u64) -> Result<Vec<NamedChain>> {
    let seed = derive_seed(master, FAMILY_STREAM);
    let mut d = vec![
        Descriptor::LazyCycle { m: 5, hold: 0.5 },
        Descriptor::LazyCycle { m: 10, hold: 0.5 },
        Descriptor::BirthDeath { m: 8, p: 0.3, q: 0.2 },
    ];
    for (k, m) in [4usize, 7, 10].into_iter().enumerate() {
        d.push(Descriptor::RandomDense { m, alpha: 1.0, seed: derive_seed(seed, k as u64) });
    }
    d.iter().map(NamedChain::generated).collect()
}

fn chains_or<F>(opts: &VerifyOptions, default: F) -> Result<Vec<NamedChain>>
where
    F: FnOnce() -> Result<Vec<NamedChain>>,
{
    match &opts.chains {
        Some(c) => Ok(c.clone()),
        None => default(),
    }
}

/// All singletons followed by up to `extra` distinct random sets of size at least two.
fn singletons_and_random(m: usize, extra: usize, rng: &mut StreamRng) -> Vec<StateSet> {
    let mut sets: Vec<StateSet> = (0..m).map(|j| StateSet::from_mask(1 << j, m)).collect();
    let full = (1u64 << m) - 1;
    let pool = full as usize - m;
    if pool <= extra {
        sets.extend((1..=full).filter(|x| x.count_ones() >= 2).map(|x| StateSet::from_mask(x, m)));
        return sets;
    }
    let mut chosen = Vec::with_capacity(extra);
    while chosen.len() < extra {
        let mask = rng.random_range(1..=full);
        if mask.count_ones() >= 2 && !chosen.contains(&mask) {
            chosen.push(mask);
        }
    }
    sets.extend(chosen.into_iter().map(|x| StateSet::from_mask(x, m)));
    sets
}

/// Independent streams for set selection and simulation of the `k`-th chain.
fn chain_streams(seed: u64, k: usize) -> (StreamRng, u64) {
    let chain_seed = derive_seed(seed, k as u64);
    (rng::stream(derive_seed(chain_seed, 1), 0), derive_seed(chain_seed, 2))
}
