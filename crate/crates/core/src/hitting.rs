//! Exact expected hitting times of state sets.
//!
//! `h_B(x)` is the expected number of transitions until a chain started at
//! `x` enters `B` (zero when `x` is already in `B`). It solves the first-step
//! system `h(x) = 1 + sum_y P(x, y) h(y)` on the complement of `B`.

use alloc::vec;
use alloc::vec::Vec;

use crate::report::{BoundReport, CHECK_TOL};
use crate::{linalg, CompensatedSum, Error, Result, StateSet, StationaryDistribution, TransitionMatrix};

/// Largest state count for exhaustive subset enumeration.
pub const MAX_EXHAUSTIVE_STATES: usize = 20;
/// Slack on the `pi(B) >= eps` filter so that e.g. `pi = 0.49999999999999994` still qualifies for `eps = 0.5`.
pub const MASS_TOL: f64 = 1e-12;
/// Anchor states tried by [`t_large_upper`] on large chains.
pub const HEURISTIC_ANCHORS: usize = 32;

/// Expected hitting times of one target set from every state.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingTimeTable {
    target: StateSet,
    h: Vec<f64>,
    t_plus_all: f64,
}

impl HittingTimeTable {
    pub fn target(&self) -> &StateSet {
        &self.target
    }

    pub fn times(&self) -> &[f64] {
        &self.h
    }

    pub fn at(&self, x: usize) -> f64 {
        self.h[x]
    }

    /// `T(B) = max_x h_B(x)`.
    pub fn worst_case(&self) -> f64 {
        self.t_plus_all
    }

    /// `max_{x in a} h_B(x)`.
    pub fn t_plus(&self, a: &StateSet) -> Result<f64> {
        Ok(a.non_empty()?.members().iter().map(|&x| self.h[x]).fold(f64::MIN, f64::max))
    }

    /// `min_{x in a} h_B(x)`.
    pub fn t_minus(&self, a: &StateSet) -> Result<f64> {
        Ok(a.non_empty()?.members().iter().map(|&x| self.h[x]).fold(f64::MAX, f64::min))
    }

    /// `max_{x not in B} |h(x) - 1 - sum_y P(x, y) h(y)|`, recomputed from `p`.
    pub fn residual(&self, p: &TransitionMatrix) -> f64 {
        (0..p.m())
            .filter(|&x| !self.target.contains(x))
            .map(|x| {
                let s: CompensatedSum = p.row(x).iter().zip(&self.h).map(|(a, b)| a * b).collect();
                libm::fabs(self.h[x] - 1.0 - s.value())
            })
            .fold(0.0, f64::max)
    }

    /// `E[N_B]` where `N_B = min{i >= 1 : X_i in B}` and `X_1 ~ start`;
    /// equals `1 + sum_x start(x) h_B(x)`.
    pub fn expected_first_visit_index(&self, start: &[f64]) -> f64 {
        let s: CompensatedSum = start.iter().zip(&self.h).map(|(a, b)| a * b).collect();
        1.0 + s.value()
    }

    /// `max_x E_x[N_B] = 1 + T(B)` in the same first-visit-index convention.
    pub fn worst_first_visit_index(&self) -> f64 {
        1.0 + self.t_plus_all
    }
}

/// Solves the hitting system for the target given as an indicator.
/// Returns `None` if the system is singular (target unreachable from somewhere).
fn solve_hitting(p: &TransitionMatrix, in_target: &[bool], scratch: &mut Scratch) -> Option<Vec<f64>> {
    let m = p.m();
    scratch.outside.clear();
    scratch.outside.extend((0..m).filter(|&x| !in_target[x]));
    let k = scratch.outside.len();
    let mut h = vec![0.0; m];
    if k == 0 {
        return Some(h);
    }
    scratch.a.clear();
    scratch.a.resize(k * k, 0.0);
    for (r, &x) in scratch.outside.iter().enumerate() {
        for (c, &y) in scratch.outside.iter().enumerate() {
            scratch.a[r * k + c] = if r == c { 1.0 } else { 0.0 } - p.get(x, y);
        }
    }
    scratch.b.clear();
    scratch.b.resize(k, 1.0);
    linalg::solve_in_place(&mut scratch.a, k, &mut scratch.b)?;
    for (r, &x) in scratch.outside.iter().enumerate() {
        let v = scratch.b[r];
        // every entry is >= 1 in exact arithmetic
        if !(v >= 1.0 - 1e-9) {
            return None;
        }
        h[x] = v.max(1.0);
    }
    Some(h)
}

#[derive(Default)]
struct Scratch {
    outside: Vec<usize>,
    a: Vec<f64>,
    b: Vec<f64>,
}

fn table_from(target: StateSet, h: Vec<f64>) -> HittingTimeTable {
    let t_plus_all = h.iter().copied().fold(0.0, f64::max);
    HittingTimeTable { target, h, t_plus_all }
}

/// Exact expected hitting times of `target`.
pub fn hitting_table(p: &TransitionMatrix, target: &StateSet) -> Result<HittingTimeTable> {
    if target.is_empty() {
        return Err(Error::EmptySet);
    }
    check_range(target, p.m())?;
    let h = solve_hitting(p, &target.indicator(p.m()), &mut Scratch::default()).ok_or(Error::SingularSystem)?;
    Ok(table_from(target.clone(), h))
}

fn check_range(set: &StateSet, m: usize) -> Result<()> {
    match set.members().last() {
        Some(&s) if s >= m => Err(Error::StateOutOfRange { state: s, m }),
        _ => Ok(()),
    }
}

/// `T+(A, B) = max_{x in A} h_B(x)`.
pub fn t_plus(p: &TransitionMatrix, a: &StateSet, b: &StateSet) -> Result<f64> {
    a.non_empty()?;
    hitting_table(p, b)?.t_plus(a)
}

/// `T-(A, B) = min_{x in A} h_B(x)`.
pub fn t_minus(p: &TransitionMatrix, a: &StateSet, b: &StateSet) -> Result<f64> {
    a.non_empty()?;
    hitting_table(p, b)?.t_minus(a)
}

/// `T(eps)`: the worst expected hitting time over sets of stationary mass at least `eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeSetTime {
    pub epsilon: f64,
    pub value: f64,
    pub argmax_set: StateSet,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(alloc::format!("epsilon must lie in (0, 1], got {epsilon}")))
    }
}

/// Stationary mass of every subset, indexed by bitmask.
fn masses_by_mask(pi: &StationaryDistribution) -> Vec<f64> {
    let m = pi.m();
    let mut mass = vec![0.0; 1 << m];
    for mask in 1usize..1 << m {
        let low = mask.trailing_zeros() as usize;
        mass[mask] = mass[mask & (mask - 1)] + pi.get(low);
    }
    mass
}

fn lex_less(a: u64, b: u64, m: usize) -> bool {
    StateSet::from_mask(a, m).members() < StateSet::from_mask(b, m).members()
}

/// Exact `T(eps)` by enumerating all `2^m - 1` non-empty subsets. Needs `m <= 20`.
///
/// Ties between sets with equal `T(B)` go to the lexicographically smallest member list.
pub fn t_large(p: &TransitionMatrix, pi: &StationaryDistribution, epsilon: f64) -> Result<LargeSetTime> {
    check_epsilon(epsilon)?;
    let m = p.m();
    if m > MAX_EXHAUSTIVE_STATES {
        return Err(Error::TooManyStates { m, max: MAX_EXHAUSTIVE_STATES });
    }
    let mass = masses_by_mask(pi);
    let mut scratch = Scratch::default();
    let mut in_target = vec![false; m];
    let full = (1u64 << m) - 1;
    let (mut best, mut best_mask) = (0.0, full);
    for mask in 1..=full {
        if mass[mask as usize] < epsilon - MASS_TOL {
            continue;
        }
        for (x, flag) in in_target.iter_mut().enumerate() {
            *flag = mask >> x & 1 == 1;
        }
        let h = solve_hitting(p, &in_target, &mut scratch).ok_or(Error::SingularSystem)?;
        let v = h.iter().copied().fold(0.0, f64::max);
        if v > best || (v == best && lex_less(mask, best_mask, m)) {
            best = v;
            best_mask = mask;
        }
    }
    Ok(LargeSetTime { epsilon, value: best, argmax_set: StateSet::from_mask(best_mask, m) })
}

/// `T(B)` for every subset `B`, indexed by bitmask (entry 0 is unused and set to 0).
pub fn worst_times_by_mask(p: &TransitionMatrix) -> Result<Vec<f64>> {
    let m = p.m();
    if m > MAX_EXHAUSTIVE_STATES {
        return Err(Error::TooManyStates { m, max: MAX_EXHAUSTIVE_STATES });
    }
    let mut scratch = Scratch::default();
    let mut in_target = vec![false; m];
    let mut out = vec![0.0; 1 << m];
    for mask in 1usize..1 << m {
        for (x, flag) in in_target.iter_mut().enumerate() {
            *flag = mask >> x & 1 == 1;
        }
        let h = solve_hitting(p, &in_target, &mut scratch).ok_or(Error::SingularSystem)?;
        out[mask] = h.iter().copied().fold(0.0, f64::max);
    }
    Ok(out)
}

/// Result of [`t_large_upper`].
#[derive(Debug, Clone, PartialEq)]
pub struct LargeSetEstimate {
    pub epsilon: f64,
    pub value: f64,
    pub witness: StateSet,
    /// `false` when the value came from exhaustive enumeration.
    pub heuristic: bool,
}

/// Scalable surrogate for `T(eps)`.
///
/// For `m <= 20` this is [`t_large`]. Otherwise it maximises `T(B)` over a
/// fixed candidate family, each candidate built by adding states in some order
/// until the mass reaches `eps`:
///
/// * states by decreasing `pi` (ties by index);
/// * states by increasing `pi`;
/// * for up to [`HEURISTIC_ANCHORS`] evenly spaced anchor states `a`, states by
///   decreasing expected time to reach `a`, so that the set sits far from `a`.
///
/// The result is the best candidate's exact `T(B)`. It never exceeds the true
/// `T(eps)` and carries no guarantee of reaching it.
pub fn t_large_upper(p: &TransitionMatrix, pi: &StationaryDistribution, epsilon: f64) -> Result<LargeSetEstimate> {
    check_epsilon(epsilon)?;
    let m = p.m();
    if m <= MAX_EXHAUSTIVE_STATES {
        let exact = t_large(p, pi, epsilon)?;
        return Ok(LargeSetEstimate {
            epsilon,
            value: exact.value,
            witness: exact.argmax_set,
            heuristic: false,
        });
    }
    let candidates = heuristic_candidates(p, pi, epsilon)?;
    let mut best: Option<(f64, StateSet)> = None;
    for set in candidates {
        let v = hitting_table(p, &set)?.worst_case();
        let better = match &best {
            None => true,
            Some((bv, bs)) => v > *bv || (v == *bv && set.members() < bs.members()),
        };
        if better {
            best = Some((v, set));
        }
    }
    let (value, witness) = best.expect("candidate family is never empty");
    Ok(LargeSetEstimate { epsilon, value, witness, heuristic: true })
}

/// The candidate sets used by [`t_large_upper`] on large chains.
pub fn heuristic_candidates(p: &TransitionMatrix, pi: &StationaryDistribution, epsilon: f64) -> Result<Vec<StateSet>> {
    let m = p.m();
    let prefix = |order: &[usize]| -> Result<StateSet> {
        let mut acc = CompensatedSum::new();
        let mut members = Vec::new();
        for &x in order {
            members.push(x);
            acc.add(pi.get(x));
            if acc.value() >= epsilon - MASS_TOL {
                break;
            }
        }
        StateSet::new(members, m)
    };
    let mut out = Vec::new();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pi.get(b).total_cmp(&pi.get(a)).then(a.cmp(&b)));
    out.push(prefix(&order)?);
    order.sort_by(|&a, &b| pi.get(a).total_cmp(&pi.get(b)).then(a.cmp(&b)));
    out.push(prefix(&order)?);

    let anchors = HEURISTIC_ANCHORS.min(m);
    for k in 0..anchors {
        let anchor = k * m / anchors;
        let to_anchor = hitting_table(p, &StateSet::singleton(anchor, m)?)?;
        let g = to_anchor.times();
        order.sort_by(|&a, &b| g[b].total_cmp(&g[a]).then(a.cmp(&b)));
        out.push(prefix(&order)?);
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// Both forms of the commute inequality for one pair `(A, B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Check {
    /// `pi(A) <= T+(A,B) / (T+(A,B) + T-(B,A))`.
    pub ratio_form: BoundReport,
    /// `pi(A) T-(B,A) <= T+(A,B)`.
    pub product_form: BoundReport,
}

impl Lemma1Check {
    pub fn holds(&self) -> bool {
        self.ratio_form.holds && self.product_form.holds
    }

    pub fn vacuous(&self) -> bool {
        self.ratio_form.vacuous
    }
}

/// Builds the commute-inequality reports from precomputed quantities.
///
/// Overlapping sets make `T-(B, A) = 0`; such pairs are reported as vacuous.
pub fn lemma1_from_times(pi_a: f64, t_plus_ab: f64, t_minus_ba: f64, disjoint: bool) -> Lemma1Check {
    let denom = t_plus_ab + t_minus_ba;
    let rhs = if denom > 0.0 { t_plus_ab / denom } else { 1.0 };
    let ratio_form = BoundReport::upper("lemma1-ratio", rhs, pi_a, 0.0, CHECK_TOL)
        .param("t_plus_ab", t_plus_ab)
        .param("t_minus_ba", t_minus_ba)
        .with_vacuous(!disjoint);
    let product_form = BoundReport::upper("lemma1-product", t_plus_ab, pi_a * t_minus_ba, 0.0, CHECK_TOL)
        .param("t_plus_ab", t_plus_ab)
        .param("t_minus_ba", t_minus_ba)
        .with_vacuous(!disjoint);
    Lemma1Check { ratio_form, product_form }
}

pub fn check_lemma1(p: &TransitionMatrix, pi: &StationaryDistribution, a: &StateSet, b: &StateSet) -> Result<Lemma1Check> {
    a.non_empty()?;
    b.non_empty()?;
    let to_b = hitting_table(p, b)?;
    let to_a = hitting_table(p, a)?;
    let check = lemma1_from_times(pi.mass(a), to_b.t_plus(a)?, to_a.t_minus(b)?, a.is_disjoint(b));
    Ok(Lemma1Check {
        ratio_form: check.ratio_form.param("A", a).param("B", b),
        product_form: check.product_form.param("A", a).param("B", b),
    })
}

/// `T(A) <= 2 T(0.5) / pi(A)` from precomputed quantities. Records the
/// smallest constant that would still make the inequality hold.
pub fn lemma2_report(t_a: f64, t_half: f64, pi_a: f64) -> BoundReport {
    let report = BoundReport::upper("lemma2", 2.0 * t_half / pi_a, t_a, 0.0, CHECK_TOL)
        .param("t_half", t_half)
        .param("pi_a", pi_a);
    if t_half > 0.0 {
        report.param("min_constant", t_a * pi_a / t_half)
    } else {
        report
    }
}

pub fn check_lemma2(p: &TransitionMatrix, pi: &StationaryDistribution, a: &StateSet) -> Result<BoundReport> {
    a.non_empty()?;
    let t_half = t_large(p, pi, 0.5)?.value;
    let t_a = hitting_table(p, a)?.worst_case();
    Ok(lemma2_report(t_a, t_half, pi.mass(a)).param("A", a))
}
