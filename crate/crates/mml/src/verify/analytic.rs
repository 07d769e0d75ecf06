//! Exact checks that need no simulation.

use mml_core::bounds;
use mml_core::hitting::{self, hitting_table, lemma1_from_times, lemma2_report, HittingTimeTable};
use mml_core::report::BoundReport;
use mml_core::{Result, StateSet};
use rand::seq::index;

use super::{chain_streams, chains_or, random_corpus, VerifyOptions};

/// Pair enumeration visits `3^m` subsets; beyond this it is impractical.
const LEMMA1_MAX_STATES: usize = 12;

pub(super) fn lemma1(opts: &VerifyOptions, seed: u64) -> Result<Vec<BoundReport>> {
    let chains = chains_or(opts, || random_corpus(opts.random_chains.unwrap_or(200), opts.m_max.unwrap_or(8), seed))?;
    let mut out = Vec::new();
    for (k, chain) in chains.iter().enumerate() {
        let p = &chain.spec.matrix;
        let m = p.m();
        if m > LEMMA1_MAX_STATES {
            return Err(mml_core::Error::TooManyStates { m, max: LEMMA1_MAX_STATES });
        }
        let pi = p.stationary()?;
        let full = (1u64 << m) - 1;
        let tables: Vec<Option<HittingTimeTable>> = (0..=full)
            .map(|mask| (mask != 0).then(|| hitting_table(p, &StateSet::from_mask(mask, m))).transpose())
            .collect::<Result<_>>()?;
        let mut pairs = Vec::new();
        for a in 1..=full {
            let rest = full & !a;
            // every non-empty submask of the complement
            let mut b = rest;
            while b != 0 {
                pairs.push((a, b));
                b = (b - 1) & rest;
            }
        }
        pairs.sort_unstable();
        if pairs.len() > opts.pairs_max {
            let (mut rng, _) = chain_streams(seed, k);
            let mut keep = index::sample(&mut rng, pairs.len(), opts.pairs_max).into_vec();
            keep.sort_unstable();
            pairs = keep.into_iter().map(|i| pairs[i]).collect();
        }
        for (a, b) in pairs {
            let (sa, sb) = (StateSet::from_mask(a, m), StateSet::from_mask(b, m));
            let to_b = tables[b as usize].as_ref().expect("non-empty mask");
            let to_a = tables[a as usize].as_ref().expect("non-empty mask");
            let check = lemma1_from_times(pi.mass(&sa), to_b.t_plus(&sa)?, to_a.t_minus(&sb)?, true);
            for r in [check.ratio_form, check.product_form] {
                out.push(r.with_chain(&chain.id).param("A", &sa).param("B", &sb));
            }
        }
    }
    Ok(out)
}

pub(super) fn lemma2(opts: &VerifyOptions, seed: u64) -> Result<Vec<BoundReport>> {
    let chains = chains_or(opts, || random_corpus(opts.random_chains.unwrap_or(50), opts.m_max.unwrap_or(10), seed))?;
    let mut out = Vec::new();
    for chain in &chains {
        let p = &chain.spec.matrix;
        let m = p.m();
        let pi = p.stationary()?;
        let t_half = hitting::t_large(p, &pi, 0.5)?;
        let worst = hitting::worst_times_by_mask(p)?;
        for mask in 1..(1u64 << m) {
            let a = StateSet::from_mask(mask, m);
            out.push(lemma2_report(worst[mask as usize], t_half.value, pi.mass(&a)).with_chain(&chain.id).param("A", &a));
        }
    }
    Ok(out)
}

/// `D(p || q) >= 2 (p - q)^2` on a 100 x 100 grid covering `[0.01, 0.99]^2`.
pub(super) fn pinsker() -> Result<Vec<BoundReport>> {
    let grid = |i: usize| 0.01 + 0.98 * i as f64 / 99.0;
    let mut out = Vec::with_capacity(10_000);
    for i in 0..100 {
        for k in 0..100 {
            out.push(bounds::pinsker_check(grid(i), grid(k))?);
        }
    }
    Ok(out)
}
