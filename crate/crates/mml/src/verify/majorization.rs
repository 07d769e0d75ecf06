//! Joint-survival majorization, MGF domination and the missing-mass upper tail.

use mml_core::bounds::{
    self, certify_c, missing_mass_tail_bound, BoundParams, Calibration, CalibrationInstance, ComparatorForm,
};
use mml_core::hitting::t_large;
use mml_core::report::BoundReport;
use mml_core::sim::{missing_mass_value, Executor, Moments, SimConfig, Simulator, Z99};
use mml_core::{Error, Result, StateSet, StationaryDistribution};

use super::{chain_streams, chains_or, family_suite, singletons_and_random, VerifyOptions};
use crate::config::NamedChain;

const TRIALS: u64 = 100_000;
const EXTRA_SETS: usize = 10;
const MGF_S: [f64; 3] = [0.5, 1.0, 2.0];
const COR1_EPSILONS: [f64; 3] = [0.05, 0.1, 0.2];
const GRID_MULTIPLES: [f64; 4] = [1.0, 2.0, 4.0, 8.0];

fn halfwidth(hits: u64, trials: u64) -> f64 {
    let p = hits as f64 / trials as f64;
    Z99 * (p * (1.0 - p) / trials as f64).sqrt()
}

/// What to tally for one chain.
struct Plan {
    sets: Vec<StateSet>,
    grid: Vec<u64>,
    s_values: Vec<f64>,
    /// Missing-mass thresholds, one list per grid point.
    thresholds: Vec<Vec<f64>>,
}

#[derive(Clone)]
struct Tally {
    /// `[set][n]` counts of `tau_J > n`.
    survive: Vec<Vec<u64>>,
    /// `[n][s]` moments of `exp(s MissingMass)`.
    mgf: Vec<Vec<Moments>>,
    /// `[n][k]` counts of `MissingMass > thresholds[n][k]`.
    exceed: Vec<Vec<u64>>,
}

impl Tally {
    fn new(plan: &Plan) -> Self {
        let g = plan.grid.len();
        Self {
            survive: vec![vec![0; g]; plan.sets.len()],
            mgf: vec![vec![Moments::default(); plan.s_values.len()]; g],
            exceed: plan.thresholds.iter().map(|t| vec![0; t.len()]).collect(),
        }
    }

    fn merge(&mut self, other: &Tally) {
        let add = |a: &mut Vec<Vec<u64>>, b: &Vec<Vec<u64>>| {
            for (x, y) in a.iter_mut().zip(b) {
                x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
            }
        };
        add(&mut self.survive, &other.survive);
        add(&mut self.exceed, &other.exceed);
        for (x, y) in self.mgf.iter_mut().zip(&other.mgf) {
            x.iter_mut().zip(y).for_each(|(p, q)| p.merge(q));
        }
    }
}

fn simulate<E: Executor>(sim: &Simulator, plan: &Plan, trials: u64, seed: u64, exec: &E) -> Tally {
    let n_max = plan.grid.iter().copied().max().unwrap_or(0);
    let cfg = SimConfig { n: n_max, trials, master_seed: seed };
    let pi = sim.pi();
    let blocks = sim.fold_first_visits(&cfg, exec, || Tally::new(plan), |acc, _, first| {
        for (si, set) in plan.sets.iter().enumerate() {
            let tau = set.members().iter().map(|&j| first[j]).min().unwrap_or(u64::MAX);
            for (ni, &n) in plan.grid.iter().enumerate() {
                if tau > n {
                    acc.survive[si][ni] += 1;
                }
            }
        }
        for (ni, &n) in plan.grid.iter().enumerate() {
            let mm = missing_mass_value(pi, first, n);
            for (mo, &s) in acc.mgf[ni].iter_mut().zip(&plan.s_values) {
                mo.add((s * mm).exp());
            }
            for (c, &t) in acc.exceed[ni].iter_mut().zip(&plan.thresholds[ni]) {
                if mm > t {
                    *c += 1;
                }
            }
        }
    });
    let mut total = Tally::new(plan);
    for b in &blocks {
        total.merge(b);
    }
    total
}

/// One chain with its `T(eps)` and run-length grid.
struct Prepared {
    pi: StationaryDistribution,
    t_eps: f64,
    grid: Vec<u64>,
}

fn prepare(chain: &NamedChain, opts: &VerifyOptions) -> Result<Prepared> {
    let pi = chain.spec.matrix.stationary()?;
    let t_eps = t_large(&chain.spec.matrix, &pi, opts.epsilon)?.value;
    let mut grid = match &opts.n_grid {
        Some(g) => g.clone(),
        None => GRID_MULTIPLES.iter().map(|k| ((k * t_eps).ceil() as u64).max(1)).collect(),
    };
    grid.sort_unstable();
    grid.dedup();
    Ok(Prepared { pi, t_eps, grid })
}

impl Prepared {
    fn params(&self, opts: &VerifyOptions, n: u64) -> Result<BoundParams> {
        BoundParams::new(opts.c, self.t_eps, n, &self.pi)
    }

    /// The theorem only speaks about run lengths of at least `T`.
    fn below_scale(&self, n: u64) -> bool {
        self.t_eps == 0.0 || (n as f64) < self.t_eps
    }
}

fn calibration_row(name: &str, cal: &Calibration, instances: &[CalibrationInstance]) -> BoundReport {
    // informational: value is the certified c, bound the point estimate without slack
    BoundReport::upper(name, cal.point_c, cal.certified_c, 0.0, 0.0)
        .with_vacuous(true)
        .param("binding", &instances[cal.binding].label)
        .param("included", cal.per_instance.len())
        .param("excluded", cal.excluded)
}

/// `Pr[tau_J > n] <= exp(-c n pi(J) / T)` for every set and run length, the
/// MGF comparison in both weightings, and the certified constant.
pub(super) fn thm1<E: Executor>(opts: &VerifyOptions, seed: u64, exec: &E, notes: &mut Vec<String>) -> Result<Vec<BoundReport>> {
    let chains = chains_or(opts, || family_suite(opts.seed))?;
    let trials = opts.trials(TRIALS);
    let mut out = Vec::new();
    let mut suite_instances = Vec::new();
    for (k, chain) in chains.iter().enumerate() {
        let prep = prepare(chain, opts)?;
        let m = chain.spec.m();
        let (mut rng, sim_seed) = chain_streams(seed, k);
        let sets = match opts.user_sets(m)? {
            Some(s) => s,
            None => singletons_and_random(m, EXTRA_SETS, &mut rng),
        };
        let plan = Plan { sets, grid: prep.grid.clone(), s_values: MGF_S.to_vec(), thresholds: vec![Vec::new(); prep.grid.len()] };
        let sim = Simulator::new(&chain.spec, &prep.pi)?;
        let tally = simulate(&sim, &plan, trials, sim_seed, exec);

        let mut instances = Vec::new();
        for (si, set) in plan.sets.iter().enumerate() {
            for (ni, &n) in plan.grid.iter().enumerate() {
                let hits = tally.survive[si][ni];
                let bound = bounds::joint_survival_bound(&prep.params(opts, n)?, set)?;
                out.push(
                    BoundReport::upper("thm1-joint", bound, hits as f64 / trials as f64, halfwidth(hits, trials), 0.0)
                        .with_vacuous(prep.below_scale(n))
                        .with_chain(&chain.id)
                        .param("J", set)
                        .param("n", n)
                        .param("T", prep.t_eps)
                        .param("c", opts.c)
                        .param("trials", trials),
                );
                instances.push(CalibrationInstance {
                    label: format!("{}@J{set}@n{n}", chain.id),
                    mass: prep.pi.mass(set),
                    n,
                    t_half: prep.t_eps,
                    hits,
                    trials,
                });
            }
        }
        for (ni, &n) in plan.grid.iter().enumerate() {
            let params = prep.params(opts, n)?;
            let q = bounds::q_probabilities(&params);
            for form in [ComparatorForm::Eq3, ComparatorForm::Cor1] {
                let w = form.weights(prep.pi.as_slice(), n);
                for (si, &s) in MGF_S.iter().enumerate() {
                    let mo = &tally.mgf[ni][si];
                    out.push(
                        BoundReport::upper("thm1-mgf", bounds::bernoulli_product_mgf(&q, &w, s), mo.mean(), Z99 * mo.std_err(), 0.0)
                            .with_vacuous(prep.below_scale(n))
                            .with_chain(&chain.id)
                            .param("form", form.name())
                            .param("s", s)
                            .param("n", n)
                            .param("T", prep.t_eps)
                            .param("c", opts.c)
                            .param("trials", trials),
                    );
                }
            }
        }
        match certify_c(&instances, Z99) {
            Ok(cal) => out.push(calibration_row("thm1-calibration", &cal, &instances).with_chain(&chain.id)),
            Err(Error::EmptySuite) => notes.push(format!("{}: no instance with n >= T, nothing to calibrate", chain.id)),
            Err(e) => return Err(e),
        }
        suite_instances.extend(instances);
    }
    match certify_c(&suite_instances, Z99) {
        Ok(cal) => {
            notes.push(format!("suite certified_c={} point_c={}", cal.certified_c, cal.point_c));
            out.push(calibration_row("thm1-calibration", &cal, &suite_instances).with_chain("suite"));
        }
        Err(Error::EmptySuite) => notes.push("suite: nothing to calibrate".into()),
        Err(e) => return Err(e),
    }
    Ok(out)
}

/// `Pr[MissingMass > sum_j pi(j) q_j + eps] <= exp(-c2 n eps^2 / T)`.
pub(super) fn cor1<E: Executor>(opts: &VerifyOptions, seed: u64, exec: &E, notes: &mut Vec<String>) -> Result<Vec<BoundReport>> {
    notes.push("lower tail of the missing mass is out of scope and not checked".into());
    let chains = chains_or(opts, || family_suite(opts.seed))?;
    let trials = opts.trials(TRIALS);
    let mut out = Vec::new();
    for (k, chain) in chains.iter().enumerate() {
        let prep = prepare(chain, opts)?;
        let (_, sim_seed) = chain_streams(seed, k);
        let tails = prep
            .grid
            .iter()
            .map(|&n| {
                let params = prep.params(opts, n)?;
                COR1_EPSILONS.iter().map(|&e| missing_mass_tail_bound(&params, e, opts.c2)).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let thresholds = tails.iter().map(|t| t.iter().map(|x| x.threshold).collect()).collect();
        let plan = Plan { sets: Vec::new(), grid: prep.grid.clone(), s_values: Vec::new(), thresholds };
        let sim = Simulator::new(&chain.spec, &prep.pi)?;
        let tally = simulate(&sim, &plan, trials, sim_seed, exec);
        for (ni, &n) in plan.grid.iter().enumerate() {
            for (ei, &eps) in COR1_EPSILONS.iter().enumerate() {
                let tail = &tails[ni][ei];
                let hits = tally.exceed[ni][ei];
                out.push(
                    BoundReport::upper("cor1", tail.failure_bound, hits as f64 / trials as f64, halfwidth(hits, trials), 0.0)
                        .with_vacuous(prep.below_scale(n))
                        .with_chain(&chain.id)
                        .param("eps", eps)
                        .param("n", n)
                        .param("threshold", tail.threshold)
                        .param("T", prep.t_eps)
                        .param("c", opts.c)
                        .param("c2", opts.c2)
                        .param("trials", trials),
                );
            }
        }
    }
    Ok(out)
}
