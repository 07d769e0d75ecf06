//! Seeded Monte Carlo over chain trajectories.
//!
//! Time convention: a trajectory of length `n` is `X_1, ..., X_n` with
//! `X_1` drawn from the start law. The first visit of state `j` is
//! `tau_j = min{i >= 1 : X_i = j}`, so the start state counts as seen at
//! step 1. Hitting times of sets use the same index convention.
//!
//! Trials are cut into blocks of [`BLOCK_TRIALS`]; block `k` draws from
//! [`rng::stream`]`(seed, k)`. An [`Executor`] decides how blocks are
//! scheduled but results always come back in block order, so aggregates do
//! not depend on the number of workers.

use alloc::vec;
use alloc::vec::Vec;

use crate::rng::{self, StreamRng};
use crate::{ChainSpec, CompensatedSum, Error, Result, StateSet, StationaryDistribution};

pub const BLOCK_TRIALS: u64 = 1024;
/// Hard cap on the length of open-ended hitting simulations.
pub const HITTING_CAP: u64 = 1_000_000;
pub const Z95: f64 = 1.96;
pub const Z99: f64 = 2.575_829_303_548_900_4;
/// First-visit marker for states not seen within the horizon.
pub const NOT_SEEN: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub index: u64,
    pub first_trial: u64,
    pub len: u64,
}

pub fn blocks(trials: u64) -> Vec<Block> {
    let count = trials.div_ceil(BLOCK_TRIALS);
    (0..count)
        .map(|index| {
            let first_trial = index * BLOCK_TRIALS;
            Block { index, first_trial, len: BLOCK_TRIALS.min(trials - first_trial) }
        })
        .collect()
}

/// Schedules independent blocks of trials.
pub trait Executor {
    /// Runs `f` on every block and returns the results in block order.
    fn map_blocks<T, F>(&self, blocks: &[Block], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Block) -> T + Sync + Send;
}

/// Runs blocks one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_blocks<T, F>(&self, blocks: &[Block], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Block) -> T + Sync + Send,
    {
        blocks.iter().map(|&b| f(b)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    /// Run length.
    pub n: u64,
    pub trials: u64,
    pub master_seed: u64,
}

/// Inverse-CDF sampler for one chain.
#[derive(Debug, Clone)]
pub struct Simulator {
    m: usize,
    cum: Vec<f64>,
    last: Vec<usize>,
    start_cum: Vec<f64>,
    start_last: usize,
    pi: Vec<f64>,
}

fn cumulative(row: &[f64]) -> (Vec<f64>, usize) {
    let mut acc = CompensatedSum::new();
    let cum = row
        .iter()
        .map(|&p| {
            acc.add(p);
            acc.value()
        })
        .collect();
    let last = row.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    (cum, last)
}

#[inline]
fn pick(cum: &[f64], last: usize, u: f64) -> usize {
    cum.partition_point(|&c| c <= u).min(last)
}

impl Simulator {
    pub fn new(chain: &ChainSpec, pi: &StationaryDistribution) -> Result<Self> {
        let m = chain.m();
        if pi.m() != m {
            return Err(Error::BadParams(alloc::format!("pi has {} entries for {} states", pi.m(), m)));
        }
        let mut cum = Vec::with_capacity(m * m);
        let mut last = Vec::with_capacity(m);
        for row in chain.matrix.rows() {
            let (c, l) = cumulative(row);
            cum.extend(c);
            last.push(l);
        }
        let (start_cum, start_last) = cumulative(&chain.start_distribution(pi));
        Ok(Self { m, cum, last, start_cum, start_last, pi: pi.as_slice().to_vec() })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn draw_start(&self, rng: &mut StreamRng) -> usize {
        pick(&self.start_cum, self.start_last, rng::uniform(rng))
    }

    pub fn step(&self, x: usize, rng: &mut StreamRng) -> usize {
        let m = self.m;
        pick(&self.cum[x * m..(x + 1) * m], self.last[x], rng::uniform(rng))
    }

    /// `X_1, ..., X_n`.
    pub fn trajectory(&self, n: u64, rng: &mut StreamRng) -> Vec<usize> {
        let mut out = Vec::with_capacity(n as usize);
        if n == 0 {
            return out;
        }
        let mut x = self.draw_start(rng);
        out.push(x);
        for _ in 1..n {
            x = self.step(x, rng);
            out.push(x);
        }
        out
    }

    /// Runs `trials` trajectories of length `n` and hands each trial's
    /// first-visit vector (`NOT_SEEN` for states missed) to `visit`.
    /// Returns one accumulator per block, in block order.
    pub fn fold_first_visits<A, E, I, V>(&self, cfg: &SimConfig, exec: &E, init: I, visit: V) -> Vec<A>
    where
        A: Send,
        E: Executor,
        I: Fn() -> A + Sync + Send,
        V: Fn(&mut A, u64, &[u64]) + Sync + Send,
    {
        let m = self.m;
        exec.map_blocks(&blocks(cfg.trials), |b| {
            let mut rng = rng::stream(cfg.master_seed, b.index);
            let mut acc = init();
            let mut first = vec![NOT_SEEN; m];
            for t in 0..b.len {
                first.fill(NOT_SEEN);
                if cfg.n > 0 {
                    let mut x = self.draw_start(&mut rng);
                    first[x] = 1;
                    let mut seen = 1;
                    let mut i = 2;
                    while i <= cfg.n && seen < m {
                        x = self.step(x, &mut rng);
                        if first[x] == NOT_SEEN {
                            first[x] = i;
                            seen += 1;
                        }
                        i += 1;
                    }
                }
                visit(&mut acc, b.first_trial + t, &first);
            }
            acc
        })
    }

    /// Runs `trials` chains until they enter `target` and hands each trial's
    /// `N_B = min{i >= 1 : X_i in B}` to `visit`, or `None` once `cap` steps
    /// pass without a hit.
    #[allow(clippy::too_many_arguments)]
    pub fn fold_hitting_times<A, E, I, V>(
        &self,
        target: &StateSet,
        trials: u64,
        master_seed: u64,
        cap: u64,
        exec: &E,
        init: I,
        visit: V,
    ) -> Result<Vec<A>>
    where
        A: Send,
        E: Executor,
        I: Fn() -> A + Sync + Send,
        V: Fn(&mut A, u64, Option<u64>) + Sync + Send,
    {
        target.non_empty()?;
        let inside = target.indicator(self.m);
        Ok(exec.map_blocks(&blocks(trials), |b| {
            let mut rng = rng::stream(master_seed, b.index);
            let mut acc = init();
            for t in 0..b.len {
                let mut x = self.draw_start(&mut rng);
                let mut i = 1;
                while !inside[x] && i < cap {
                    x = self.step(x, &mut rng);
                    i += 1;
                }
                visit(&mut acc, b.first_trial + t, inside[x].then_some(i));
            }
            acc
        }))
    }

    /// One missing-mass draw per trial, in trial order.
    pub fn sample_missing_mass<E: Executor>(&self, cfg: &SimConfig, exec: &E) -> Vec<MissingMassSample> {
        let n = cfg.n;
        self.fold_first_visits(cfg, exec, Vec::new, |acc: &mut Vec<MissingMassSample>, _, first| {
            acc.push(MissingMassSample::from_first_visits(&self.pi, first, n));
        })
        .into_iter()
        .flatten()
        .collect()
    }

    /// Empirical `Pr[tau_J > n]`: the fraction of trials in which no state of `J` appears.
    pub fn empirical_joint_survival<E: Executor>(&self, cfg: &SimConfig, set: &StateSet, exec: &E) -> Result<EmpiricalTail> {
        set.non_empty()?;
        let n = cfg.n;
        let hits: u64 = self
            .fold_first_visits(cfg, exec, || 0u64, |acc, _, first| {
                if set.members().iter().all(|&j| first[j] > n) {
                    *acc += 1;
                }
            })
            .into_iter()
            .sum();
        Ok(EmpiricalTail { set: set.clone(), threshold: n, hits, trials: cfg.trials })
    }

    /// Empirical `Pr[N_B > t]` for each threshold. Trials that reach
    /// [`HITTING_CAP`] count as exceeding every threshold and are reported in `cap_hits`.
    pub fn empirical_hitting_tail<E: Executor>(
        &self,
        target: &StateSet,
        thresholds: &[u64],
        trials: u64,
        master_seed: u64,
        exec: &E,
    ) -> Result<HittingTail> {
        let k = thresholds.len();
        let per_block = self.fold_hitting_times(
            target,
            trials,
            master_seed,
            HITTING_CAP,
            exec,
            || (vec![0u64; k], 0u64, Moments::default()),
            |acc, _, hit| match hit {
                Some(steps) => {
                    for (c, &t) in acc.0.iter_mut().zip(thresholds) {
                        if steps > t {
                            *c += 1;
                        }
                    }
                    acc.2.add(steps as f64);
                }
                None => {
                    acc.0.iter_mut().for_each(|c| *c += 1);
                    acc.1 += 1;
                }
            },
        )?;
        let mut counts = vec![0u64; k];
        let mut cap_hits = 0;
        let mut moments = Moments::default();
        for (c, caps, mo) in per_block {
            counts.iter_mut().zip(&c).for_each(|(a, b)| *a += b);
            cap_hits += caps;
            moments.merge(&mo);
        }
        let tails = thresholds
            .iter()
            .zip(counts)
            .map(|(&t, hits)| EmpiricalTail { set: target.clone(), threshold: t, hits, trials })
            .collect();
        Ok(HittingTail { tails, cap_hits, hit_moments: moments })
    }

    /// Occupation frequencies of one trajectory `X_1..X_n`.
    pub fn occupancy(&self, n: u64, master_seed: u64) -> Vec<f64> {
        let mut rng = rng::stream(master_seed, 0);
        let mut counts = vec![0u64; self.m];
        if n > 0 {
            let mut x = self.draw_start(&mut rng);
            counts[x] += 1;
            for _ in 1..n {
                x = self.step(x, &mut rng);
                counts[x] += 1;
            }
        }
        counts.into_iter().map(|c| c as f64 / n as f64).collect()
    }
}

/// `sum_j pi(j) [tau_j > n]` from one first-visit vector, summed in index order.
pub fn missing_mass_value(pi: &[f64], first_visits: &[u64], n: u64) -> f64 {
    let s: CompensatedSum = first_visits
        .iter()
        .zip(pi)
        .filter(|(&f, _)| f > n)
        .map(|(_, &p)| p)
        .collect();
    s.value()
}

/// One draw of the missing mass over a run of length `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingMassSample {
    pub value: f64,
    /// States with `tau_j > n`.
    pub unseen: StateSet,
}

impl MissingMassSample {
    pub fn from_first_visits(pi: &[f64], first_visits: &[u64], n: u64) -> Self {
        let unseen = StateSet::new(
            first_visits.iter().enumerate().filter(|(_, &f)| f > n).map(|(j, _)| j),
            pi.len(),
        )
        .expect("indices come from the vector itself");
        Self { value: missing_mass_value(pi, first_visits, n), unseen }
    }

    /// `sum_{j in unseen} pi(j)`, recomputed.
    pub fn recompute(&self, pi: &[f64]) -> f64 {
        let s: CompensatedSum = self.unseen.members().iter().map(|&j| pi[j]).collect();
        s.value()
    }
}

/// Empirical probability of a tail event: `J` unseen for `threshold` steps,
/// or `N_B > threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTail {
    pub set: StateSet,
    pub threshold: u64,
    pub hits: u64,
    pub trials: u64,
}

impl EmpiricalTail {
    pub fn p_hat(&self) -> f64 {
        self.hits as f64 / self.trials as f64
    }

    /// Normal-approximation half-width `z sqrt(p(1-p)/trials)`.
    pub fn ci_halfwidth(&self, z: f64) -> f64 {
        let p = self.p_hat();
        z * libm::sqrt(p * (1.0 - p) / self.trials as f64)
    }

    pub fn ci95_halfwidth(&self) -> f64 {
        self.ci_halfwidth(Z95)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HittingTail {
    pub tails: Vec<EmpiricalTail>,
    pub cap_hits: u64,
    /// Moments of the hitting index over trials that hit before the cap.
    pub hit_moments: Moments,
}

/// Running count, sum and sum of squares with compensated accumulation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
}

impl Moments {
    pub fn add(&mut self, x: f64) {
        self.count += 1;
        self.sum.add(x);
        self.sum_sq.add(x * x);
    }

    pub fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
    }

    pub fn mean(&self) -> f64 {
        self.sum.value() / self.count as f64
    }

    /// Unbiased sample variance; zero for fewer than two points.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let mean = self.mean();
        ((self.sum_sq.value() - n * mean * mean) / (n - 1.0)).max(0.0)
    }

    pub fn std_err(&self) -> f64 {
        libm::sqrt(self.variance() / self.count as f64)
    }
}

/// Mean of `exp(s * value)` over the samples.
pub fn empirical_mgf(samples: &[MissingMassSample], s: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    if !s.is_finite() {
        return Err(Error::Domain(alloc::format!("s must be finite, got {s}")));
    }
    let total: CompensatedSum = samples.iter().map(|x| libm::exp(s * x.value)).collect();
    Ok(total.value() / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{generate, Family};
    use crate::TransitionMatrix;

    fn cycle3_from(start: usize) -> (ChainSpec, StationaryDistribution) {
        let p = TransitionMatrix::new(vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]).unwrap();
        let pi = p.stationary().unwrap();
        (ChainSpec::from_state(p, start).unwrap(), pi)
    }

    fn uniform2() -> (ChainSpec, StationaryDistribution) {
        let c = generate(&Family::Iid { mu: vec![0.5, 0.5] }, 0).unwrap();
        let pi = c.matrix.stationary().unwrap();
        (c, pi)
    }

    #[test]
    fn block_partition() {
        let b = blocks(2500);
        assert_eq!(b.len(), 3);
        assert_eq!(b[2], Block { index: 2, first_trial: 2048, len: 452 });
        assert!(blocks(0).is_empty());
    }

    #[test]
    fn deterministic_cycle_trajectory() {
        let (c, pi) = cycle3_from(0);
        let sim = Simulator::new(&c, &pi).unwrap();
        assert_eq!(sim.trajectory(4, &mut rng::stream(1, 0)), vec![0, 1, 2, 0]);
    }

    #[test]
    fn single_state_trajectory_is_constant() {
        let p = TransitionMatrix::new(vec![vec![1.0]]).unwrap();
        let pi = p.stationary().unwrap();
        let sim = Simulator::new(&ChainSpec::stationary_start(p), &pi).unwrap();
        assert_eq!(sim.trajectory(5, &mut rng::stream(3, 0)), vec![0; 5]);
        let mm = sim.sample_missing_mass(&SimConfig { n: 3, trials: 10, master_seed: 1 }, &Sequential);
        assert!(mm.iter().all(|s| s.value == 0.0));
    }

    #[test]
    fn iid_frequency_law_of_large_numbers() {
        let (c, pi) = uniform2();
        let sim = Simulator::new(&c, &pi).unwrap();
        let traj = sim.trajectory(100_000, &mut rng::stream(11, 0));
        let freq = traj.iter().filter(|&&x| x == 0).count() as f64 / 1e5;
        assert!((freq - 0.5).abs() < 0.01, "{freq}");
    }

    #[test]
    fn missing_mass_one_step_is_half() {
        let (c, pi) = uniform2();
        let sim = Simulator::new(&c, &pi).unwrap();
        let cfg = SimConfig { n: 1, trials: 5000, master_seed: 4 };
        let samples = sim.sample_missing_mass(&cfg, &Sequential);
        assert_eq!(samples.len(), 5000);
        assert!(samples.iter().all(|s| s.value == 0.5 && s.unseen.len() == 1));
        let mgf = empirical_mgf(&samples, 1.0).unwrap();
        assert!((mgf - libm::exp(0.5)).abs() < 1e-12);
    }

    #[test]
    fn cycle_sees_everything_in_m_steps() {
        let (c, pi) = cycle3_from(1);
        let sim = Simulator::new(&c, &pi).unwrap();
        let samples = sim.sample_missing_mass(&SimConfig { n: 3, trials: 50, master_seed: 2 }, &Sequential);
        assert!(samples.iter().all(|s| s.value == 0.0 && s.unseen.is_empty()));
    }

    #[test]
    fn joint_survival_edge_cases() {
        let (c, pi) = cycle3_from(0);
        let sim = Simulator::new(&c, &pi).unwrap();
        let cfg = SimConfig { n: 1, trials: 100, master_seed: 2 };
        let t = sim.empirical_joint_survival(&cfg, &StateSet::new([2], 3).unwrap(), &Sequential).unwrap();
        assert_eq!(t.p_hat(), 1.0);
        let t = sim.empirical_joint_survival(&cfg, &StateSet::full(3), &Sequential).unwrap();
        assert_eq!(t.p_hat(), 0.0);
        assert_eq!(
            sim.empirical_joint_survival(&cfg, &StateSet::default(), &Sequential),
            Err(Error::EmptySet)
        );
    }

    #[test]
    fn hitting_tail_deterministic_cycle() {
        let (c, pi) = cycle3_from(0);
        let sim = Simulator::new(&c, &pi).unwrap();
        let tail = sim
            .empirical_hitting_tail(&StateSet::new([2], 3).unwrap(), &[1, 2, 3], 64, 5, &Sequential)
            .unwrap();
        let p: Vec<f64> = tail.tails.iter().map(EmpiricalTail::p_hat).collect();
        assert_eq!(p, vec![1.0, 1.0, 0.0]);
        assert_eq!(tail.cap_hits, 0);
        assert_eq!(tail.hit_moments.mean(), 3.0);

        let tail = sim
            .empirical_hitting_tail(&StateSet::new([0], 3).unwrap(), &[1, 5], 64, 5, &Sequential)
            .unwrap();
        assert!(tail.tails.iter().all(|t| t.hits == 0));
    }

    #[test]
    fn cap_hits_are_reported() {
        let (c, pi) = cycle3_from(0);
        let sim = Simulator::new(&c, &pi).unwrap();
        let per_block = sim
            .fold_hitting_times(&StateSet::new([2], 3).unwrap(), 10, 1, 2, &Sequential, || 0u64, |acc, _, hit| {
                if hit.is_none() {
                    *acc += 1;
                }
            })
            .unwrap();
        assert_eq!(per_block, vec![10]);
    }

    #[test]
    fn mgf_edge_cases() {
        let samples = vec![MissingMassSample { value: 0.5, unseen: StateSet::default() }; 3];
        assert_eq!(empirical_mgf(&samples, 0.0).unwrap(), 1.0);
        assert!((empirical_mgf(&samples, 2.0).unwrap() - core::f64::consts::E).abs() < 1e-15);
        assert_eq!(empirical_mgf(&[], 1.0), Err(Error::NoSamples));
    }

    #[test]
    fn moments() {
        let mut m = Moments::default();
        for x in [1.0, 2.0, 3.0, 4.0] {
            m.add(x);
        }
        assert_eq!(m.mean(), 2.5);
        assert!((m.variance() - 5.0 / 3.0).abs() < 1e-12);
    }
}
