//! IID sources, where joint survival and the missing-mass mean are known exactly.

use mml_core::bounds::{iid_exact_survival, product_inequality_check};
use mml_core::chain::{generate, Family};
use mml_core::report::BoundReport;
use mml_core::sim::{missing_mass_value, Executor, Moments, SimConfig, Simulator};
use mml_core::{Result, StateSet};
use statrs::distribution::{Binomial, DiscreteCDF};

use super::{chain_streams, singletons_and_random, VerifyOptions};
use crate::config::NamedChain;
use crate::descriptor::Descriptor;

const TRIALS: u64 = 100_000;
const EXTRA_SETS: usize = 20;
/// Two-sided level of the binomial acceptance region.
const ALPHA: f64 = 0.01;
const MEAN_SE: f64 = 3.0;
const AGREEMENT_TOL: f64 = 1e-12;

pub(super) const DEFAULT_N_GRID: [u64; 7] = [1, 2, 4, 8, 16, 32, 64];

/// Smallest `k` in `[0, n]` with `cdf(k) >= target` (`> target` when `strict`).
fn quantile(b: &Binomial, n: u64, target: f64, strict: bool) -> u64 {
    let (mut lo, mut hi) = (0u64, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let c = b.cdf(mid);
        if c > target || (!strict && c == target) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Equal-tailed acceptance region `[lo, hi]` for a Binomial(`trials`, `p`)
/// count with coverage at least `1 - alpha`.
pub fn binomial_region(p: f64, trials: u64, alpha: f64) -> (u64, u64) {
    if p <= 0.0 {
        return (0, 0);
    }
    if p >= 1.0 {
        return (trials, trials);
    }
    let b = Binomial::new(p, trials).expect("p lies in (0, 1)");
    let lo = quantile(&b, trials, alpha / 2.0, true);
    let hi = quantile(&b, trials, 1.0 - alpha / 2.0, false);
    (lo, hi)
}

/// Mean and variance of the missing mass after `n` draws from `pi`:
/// `E = sum_j pi_j s_j` and `Var = sum_{j,k} pi_j pi_k (Pr[j, k unseen] - s_j s_k)`
/// with `s_j = (1 - pi_j)^n` and `Pr[j, k unseen] = (1 - pi_j - pi_k)^n` for `j != k`.
pub fn exact_missing_mass_moments(pi: &[f64], n: u64) -> (f64, f64) {
    let s: Vec<f64> = pi.iter().map(|&p| iid_exact_survival(p, n)).collect();
    let mean = pi.iter().zip(&s).map(|(p, s)| p * s).sum();
    let mut var = 0.0;
    for j in 0..pi.len() {
        for k in 0..pi.len() {
            let both = if j == k { s[j] } else { iid_exact_survival(pi[j] + pi[k], n) };
            var += pi[j] * pi[k] * (both - s[j] * s[k]);
        }
    }
    (mean, var.max(0.0))
}

fn require_iid(chain: &NamedChain) -> Result<()> {
    let p = &chain.spec.matrix;
    let first = p.row(0);
    let same = p.rows().all(|r| r.iter().zip(first).all(|(a, b)| (a - b).abs() <= 1e-12));
    if same {
        Ok(())
    } else {
        Err(mml_core::Error::BadParams(format!("{}: the iid suite needs identical rows", chain.id)))
    }
}

fn iid_chain(m: usize, seed: u64) -> Result<NamedChain> {
    // a Dirichlet(1) draw for mu: any row of a random-dense chain
    let mu = generate(&Family::RandomDense { m, alpha: 1.0 }, seed)?.matrix.row(0).to_vec();
    NamedChain::generated(&Descriptor::Iid { mu })
}

pub(super) fn run<E: Executor>(opts: &VerifyOptions, seed: u64, exec: &E, notes: &mut Vec<String>) -> Result<Vec<BoundReport>> {
    notes.push("lower tail of the missing mass is out of scope and not checked".into());
    let chains = match &opts.chains {
        Some(c) => c.clone(),
        None => opts
            .iid_m
            .iter()
            .enumerate()
            .map(|(k, &m)| iid_chain(m, mml_core::rng::derive_seed(seed, 1000 + k as u64)))
            .collect::<Result<_>>()?,
    };
    let grid = opts.n_grid.clone().unwrap_or_else(|| DEFAULT_N_GRID.to_vec());
    let n_max = grid.iter().copied().max().unwrap_or(0);
    let trials = opts.trials(TRIALS);
    let mut out = Vec::new();
    for (k, chain) in chains.iter().enumerate() {
        require_iid(chain)?;
        let m = chain.spec.m();
        let pi = chain.spec.matrix.stationary()?;
        let sim = Simulator::new(&chain.spec, &pi)?;
        let (mut rng, sim_seed) = chain_streams(seed, k);
        let sets = match opts.user_sets(m)? {
            Some(s) => s,
            None => singletons_and_random(m, EXTRA_SETS, &mut rng),
        };
        for set in &sets {
            out.push(product_inequality_check(&pi, set)?.with_chain(&chain.id));
        }
        let cfg = SimConfig { n: n_max, trials, master_seed: sim_seed };
        let (counts, moments) = tally(&sim, &cfg, &sets, &grid, exec);
        for (si, set) in sets.iter().enumerate() {
            let mass = pi.mass(set);
            for (ni, &n) in grid.iter().enumerate() {
                out.push(joint_survival_row(mass, n, counts[si][ni], trials).with_chain(&chain.id).param("J", set).param("n", n));
            }
        }
        for (ni, &n) in grid.iter().enumerate() {
            let (mean, var) = exact_missing_mass_moments(pi.as_slice(), n);
            let se = (var / trials as f64).sqrt();
            out.push(
                BoundReport::agreement("iid-mm-mean", mean, moments[ni].mean(), MEAN_SE * se, AGREEMENT_TOL)
                    .with_chain(&chain.id)
                    .param("n", n)
                    .param("trials", trials)
                    .param("exact_se", se)
                    .param("sample_se", moments[ni].std_err()),
            );
        }
    }
    Ok(out)
}

/// Survival counts per `(set, n)` and missing-mass moments per `n`.
fn tally<E: Executor>(sim: &Simulator, cfg: &SimConfig, sets: &[StateSet], grid: &[u64], exec: &E) -> (Vec<Vec<u64>>, Vec<Moments>) {
    let pi = sim.pi();
    let init = || (vec![vec![0u64; grid.len()]; sets.len()], vec![Moments::default(); grid.len()]);
    let blocks = sim.fold_first_visits(cfg, exec, init, |acc, _, first| {
        for (si, set) in sets.iter().enumerate() {
            let tau = set.members().iter().map(|&j| first[j]).min().unwrap_or(u64::MAX);
            for (ni, &n) in grid.iter().enumerate() {
                if tau > n {
                    acc.0[si][ni] += 1;
                }
            }
        }
        for (ni, &n) in grid.iter().enumerate() {
            acc.1[ni].add(missing_mass_value(pi, first, n));
        }
    });
    let (mut counts, mut moments) = init();
    for (c, mo) in blocks {
        for (row, add) in counts.iter_mut().zip(&c) {
            row.iter_mut().zip(add).for_each(|(a, b)| *a += b);
        }
        moments.iter_mut().zip(&mo).for_each(|(a, b)| a.merge(b));
    }
    (counts, moments)
}

/// Agreement of an empirical survival count with `(1 - mass)^n`, judged by
/// the exact binomial acceptance region. `ci` is the region's half-width on
/// the side of the observed deviation.
fn joint_survival_row(mass: f64, n: u64, hits: u64, trials: u64) -> BoundReport {
    let exact = iid_exact_survival(mass, n);
    let (lo, hi) = binomial_region(exact, trials, ALPHA);
    let p_hat = hits as f64 / trials as f64;
    let ci = if p_hat >= exact { hi as f64 / trials as f64 - exact } else { exact - lo as f64 / trials as f64 };
    let mut r = BoundReport::agreement("iid-joint-survival", exact, p_hat, ci.max(0.0), AGREEMENT_TOL)
        .param("trials", trials)
        .param("region", format_args!("{lo}..{hi}"));
    // the count decides; the float comparison above is only for the margin
    r.holds = (lo..=hi).contains(&hits);
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_matches_known_quantiles() {
        // Binomial(100, 0.5): P[X <= 36] = 0.00332, P[X <= 37] = 0.00602, P[X <= 63] = 0.99668
        assert_eq!(binomial_region(0.5, 100, 0.01), (37, 63));
        assert_eq!(binomial_region(0.0, 100, 0.01), (0, 0));
        assert_eq!(binomial_region(1.0, 100, 0.01), (100, 100));
        let (lo, hi) = binomial_region(1e-9, 100_000, 0.01);
        assert_eq!((lo, hi), (0, 0));
    }

    #[test]
    fn exact_moments_uniform_pair() {
        // n = 1: exactly one of two symbols is unseen, so the missing mass is 0.5 surely
        let (mean, var) = exact_missing_mass_moments(&[0.5, 0.5], 1);
        assert_eq!(mean, 0.5);
        assert!(var.abs() < 1e-15);
        // n = 2: 0 or 0.5 with probability 1/2 each
        let (mean, var) = exact_missing_mass_moments(&[0.5, 0.5], 2);
        assert!((mean - 0.25).abs() < 1e-15 && (var - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn row_uses_the_count() {
        let r = joint_survival_row(0.5, 1, 50_000, 100_000);
        assert!(r.holds && !r.vacuous);
        assert!(!joint_survival_row(0.5, 1, 60_000, 100_000).holds);
    }
}
