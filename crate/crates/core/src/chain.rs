//! Finite Markov chains: validated transition matrices, stationary laws,
//! start laws and the seeded test-corpus generators.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::{linalg, CompensatedSum, Error, Result, StateSet};

/// Allowed deviation of each row sum from 1.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Entries within this distance outside `[0, 1]` are clamped instead of rejected.
pub const CLAMP_TOL: f64 = 1e-15;
/// Largest accepted `max |pi P - pi|` for a stationary distribution.
pub const STATIONARY_RESIDUAL_TOL: f64 = 1e-10;

const POWER_MAX_STEPS: usize = 1_000_000;
const POWER_TOL: f64 = 1e-12;

/// Row-stochastic matrix over `m` states, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    m: usize,
    p: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl TransitionMatrix {
    /// Validates a raw square matrix.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::Empty);
        }
        let mut p = Vec::with_capacity(m * m);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != m {
                return Err(Error::NonSquare { row, len: r.len(), expected: m });
            }
            for (col, &v) in r.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
                if v < -CLAMP_TOL {
                    return Err(Error::NegativeEntry { row, col, value: v });
                }
                p.push(v.clamp(0.0, if v <= 1.0 + CLAMP_TOL { 1.0 } else { v }));
            }
        }
        for row in 0..m {
            let sum: CompensatedSum = p[row * m..(row + 1) * m].iter().copied().collect();
            let sum = sum.value();
            if libm::fabs(sum - 1.0) > ROW_SUM_TOL {
                return Err(Error::NonStochasticRow { row, sum });
            }
        }
        Ok(Self { m, p, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.m {
            return Err(Error::BadParams(format!(
                "{} labels for {} states",
                labels.len(),
                self.m
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.p[x * self.m + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.p[x * self.m..(x + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.p.chunks_exact(self.m)
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Relabels states: new state `k` is old state `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.m);
        let m = self.m;
        let mut p = vec![0.0; m * m];
        for (a, &x) in perm.iter().enumerate() {
            for (b, &y) in perm.iter().enumerate() {
                p[a * m + b] = self.get(x, y);
            }
        }
        Self {
            m,
            p,
            labels: self
                .labels
                .as_ref()
                .map(|l| perm.iter().map(|&x| l[x].clone()).collect()),
        }
    }

    fn reach(&self, from: usize, forward: bool) -> Vec<bool> {
        let m = self.m;
        let mut seen = vec![false; m];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(x) = stack.pop() {
            for y in 0..m {
                let w = if forward { self.get(x, y) } else { self.get(y, x) };
                if w > 0.0 && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen
    }

    /// Whether the support graph `{(x, y) : P(x, y) > 0}` is strongly connected.
    pub fn is_irreducible(&self) -> bool {
        self.reach(0, true).iter().all(|&s| s) && self.reach(0, false).iter().all(|&s| s)
    }

    /// `max_y |(v P)(y) - v(y)|`.
    pub fn stationary_residual(&self, v: &[f64]) -> f64 {
        let m = self.m;
        (0..m)
            .map(|y| {
                let s: CompensatedSum = (0..m).map(|x| v[x] * self.get(x, y)).collect();
                libm::fabs(s.value() - v[y])
            })
            .fold(0.0, f64::max)
    }

    /// Unique stationary distribution of an irreducible chain.
    ///
    /// Direct solve of `(P^T - I) pi = 0` with the last equation replaced by
    /// `sum(pi) = 1`; power iteration on the lazy chain `(I + P) / 2` when that
    /// system is numerically singular.
    pub fn stationary(&self) -> Result<StationaryDistribution> {
        if !self.is_irreducible() {
            return Err(Error::NotIrreducible);
        }
        let candidate = self
            .stationary_direct()
            .filter(|pi| self.stationary_residual(pi) <= STATIONARY_RESIDUAL_TOL)
            .unwrap_or_else(|| self.stationary_power());
        let residual = self.stationary_residual(&candidate);
        if !(residual <= STATIONARY_RESIDUAL_TOL) {
            return Err(Error::StationaryNotConverged { residual });
        }
        Ok(StationaryDistribution { pi: candidate, residual })
    }

    fn stationary_direct(&self) -> Option<Vec<f64>> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for i in 0..m - 1 {
            for j in 0..m {
                a[i * m + j] = self.get(j, i) - if i == j { 1.0 } else { 0.0 };
            }
        }
        for j in 0..m {
            a[(m - 1) * m + j] = 1.0;
        }
        let mut b = vec![0.0; m];
        b[m - 1] = 1.0;
        linalg::solve_in_place(&mut a, m, &mut b)?;
        normalize(b)
    }

    fn stationary_power(&self) -> Vec<f64> {
        let m = self.m;
        let mut v = vec![1.0 / m as f64; m];
        let mut next = vec![0.0; m];
        for _ in 0..POWER_MAX_STEPS {
            for y in 0..m {
                let s: CompensatedSum = (0..m).map(|x| v[x] * self.get(x, y)).collect();
                next[y] = 0.5 * (v[y] + s.value());
            }
            let delta = v
                .iter()
                .zip(&next)
                .map(|(a, b)| libm::fabs(a - b))
                .fold(0.0, f64::max);
            core::mem::swap(&mut v, &mut next);
            if delta < POWER_TOL {
                break;
            }
        }
        normalize(v.clone()).unwrap_or(v)
    }
}

fn normalize(mut v: Vec<f64>) -> Option<Vec<f64>> {
    for x in v.iter_mut() {
        if *x < 0.0 {
            if *x < -1e-12 {
                return None;
            }
            *x = 0.0;
        }
    }
    let total: CompensatedSum = v.iter().copied().collect();
    let total = total.value();
    if !(total > 0.0) {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= total);
    Some(v)
}

/// Stationary law `pi` together with the recomputed residual `max |pi P - pi|`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pi: Vec<f64>,
    residual: f64,
}

impl StationaryDistribution {
    pub fn as_slice(&self) -> &[f64] {
        &self.pi
    }

    pub fn get(&self, j: usize) -> f64 {
        self.pi[j]
    }

    pub fn m(&self) -> usize {
        self.pi.len()
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `pi(set)`, summed in index order.
    pub fn mass(&self, set: &StateSet) -> f64 {
        let s: CompensatedSum = set.members().iter().map(|&j| self.pi[j]).collect();
        s.value()
    }

    /// Wraps an arbitrary probability vector; used by the IID generators and tests.
    pub fn from_probabilities(pi: Vec<f64>) -> Result<Self> {
        check_distribution(&pi, pi.len()).map_err(Error::BadParams)?;
        Ok(Self { pi, residual: 0.0 })
    }
}

fn check_distribution(v: &[f64], m: usize) -> core::result::Result<(), String> {
    if v.len() != m {
        return Err(format!("length {} for {} states", v.len(), m));
    }
    if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| !x.is_finite() || **x < 0.0) {
        return Err(format!("entry {i} is {x}"));
    }
    let total: CompensatedSum = v.iter().copied().collect();
    let total = total.value();
    if libm::fabs(total - 1.0) > ROW_SUM_TOL {
        return Err(format!("sums to {total}"));
    }
    Ok(())
}

/// Law of the first sampled state `X_1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    Stationary,
    Distribution(Vec<f64>),
}

/// A chain together with its start law.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub matrix: TransitionMatrix,
    pub start: Start,
}

impl ChainSpec {
    pub fn new(matrix: TransitionMatrix, start: Option<Vec<f64>>) -> Result<Self> {
        let start = match start {
            None => Start::Stationary,
            Some(v) => {
                check_distribution(&v, matrix.m()).map_err(Error::BadStart)?;
                Start::Distribution(v)
            }
        };
        Ok(Self { matrix, start })
    }

    pub fn stationary_start(matrix: TransitionMatrix) -> Self {
        Self { matrix, start: Start::Stationary }
    }

    /// Point mass on `state`.
    pub fn from_state(matrix: TransitionMatrix, state: usize) -> Result<Self> {
        let m = matrix.m();
        if state >= m {
            return Err(Error::StateOutOfRange { state, m });
        }
        let mut v = vec![0.0; m];
        v[state] = 1.0;
        Ok(Self { matrix, start: Start::Distribution(v) })
    }

    pub fn m(&self) -> usize {
        self.matrix.m()
    }

    /// The start law as an explicit vector.
    pub fn start_distribution(&self, pi: &StationaryDistribution) -> Vec<f64> {
        match &self.start {
            Start::Stationary => pi.as_slice().to_vec(),
            Start::Distribution(v) => v.clone(),
        }
    }
}

/// Generator families for test corpora. Every family yields an irreducible chain.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// Every row equals `mu`; an IID source.
    Iid { mu: Vec<f64> },
    /// Cycle of `m` states holding with probability `hold`, otherwise stepping
    /// to either neighbour with equal probability.
    LazyCycle { m: usize, hold: f64 },
    /// Path on `m` states: up with probability `p`, down with `q`, hold otherwise.
    BirthDeath { m: usize, p: f64, q: f64 },
    /// Rows drawn independently from a symmetric Dirichlet(`alpha`) law.
    RandomDense { m: usize, alpha: f64 },
    /// `[[1-p, p], [q, 1-q]]`.
    TwoState { p: f64, q: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Iid { .. } => "iid",
            Family::LazyCycle { .. } => "lazy-cycle",
            Family::BirthDeath { .. } => "birth-death",
            Family::RandomDense { .. } => "random-dense",
            Family::TwoState { .. } => "two-state",
        }
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::BadParams(msg.into())
}

fn in_unit(x: f64) -> bool {
    x.is_finite() && (0.0..=1.0).contains(&x)
}

/// Builds a chain from `family`. Deterministic in `(family, seed)`; only
/// `RandomDense` consumes randomness. The start law is stationary.
pub fn generate(family: &Family, seed: u64) -> Result<ChainSpec> {
    let rows: Vec<Vec<f64>> = match *family {
        Family::Iid { ref mu } => {
            if mu.is_empty() {
                return Err(bad("mu is empty"));
            }
            check_distribution(mu, mu.len()).map_err(|e| bad(format!("mu {e}")))?;
            if mu.iter().any(|&x| x <= 0.0) {
                return Err(bad("mu must be strictly positive for an irreducible chain"));
            }
            vec![mu.clone(); mu.len()]
        }
        Family::LazyCycle { m, hold } => {
            if m == 0 {
                return Err(bad("m must be at least 1"));
            }
            if !(in_unit(hold) && hold < 1.0) {
                return Err(bad(format!("hold must lie in [0, 1), got {hold}")));
            }
            let mut rows = vec![vec![0.0; m]; m];
            for (i, row) in rows.iter_mut().enumerate() {
                if m == 1 {
                    row[0] = 1.0;
                    continue;
                }
                row[i] += hold;
                row[(i + 1) % m] += (1.0 - hold) / 2.0;
                row[(i + m - 1) % m] += (1.0 - hold) / 2.0;
            }
            rows
        }
        Family::BirthDeath { m, p, q } => {
            if m == 0 {
                return Err(bad("m must be at least 1"));
            }
            if !(in_unit(p) && in_unit(q) && p > 0.0 && q > 0.0 && p + q <= 1.0) {
                return Err(bad(format!("need p, q > 0 and p + q <= 1, got p={p}, q={q}")));
            }
            let mut rows = vec![vec![0.0; m]; m];
            for (i, row) in rows.iter_mut().enumerate() {
                let up = if i + 1 < m { p } else { 0.0 };
                let down = if i > 0 { q } else { 0.0 };
                if i + 1 < m {
                    row[i + 1] = up;
                }
                if i > 0 {
                    row[i - 1] = down;
                }
                row[i] = 1.0 - up - down;
            }
            rows
        }
        Family::RandomDense { m, alpha } => {
            if m == 0 {
                return Err(bad("m must be at least 1"));
            }
            if !(alpha.is_finite() && alpha > 0.0) {
                return Err(bad(format!("alpha must be positive, got {alpha}")));
            }
            return random_dense(m, alpha, seed);
        }
        Family::TwoState { p, q } => {
            if !(in_unit(p) && in_unit(q) && p > 0.0 && q > 0.0) {
                return Err(bad(format!("need p, q in (0, 1], got p={p}, q={q}")));
            }
            vec![vec![1.0 - p, p], vec![q, 1.0 - q]]
        }
    };
    Ok(ChainSpec::stationary_start(TransitionMatrix::new(rows)?))
}

fn random_dense(m: usize, alpha: f64, seed: u64) -> Result<ChainSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| bad(format!("{e}")))?;
    loop {
        let mut rows = Vec::with_capacity(m);
        for _ in 0..m {
            let mut row: Vec<f64> = (0..m).map(|_| gamma.sample(&mut rng)).collect();
            let total: CompensatedSum = row.iter().copied().collect();
            let total = total.value();
            if !(total > 0.0) {
                row = vec![1.0 / m as f64; m];
            } else {
                row.iter_mut().for_each(|x| *x /= total);
            }
            rows.push(row);
        }
        // Dirichlet rows are positive almost surely; underflow can still zero
        // an entry, so redraw until the support graph is strongly connected.
        if let Ok(matrix) = TransitionMatrix::new(rows) {
            if matrix.is_irreducible() {
                return Ok(ChainSpec::stationary_start(matrix));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tm(rows: &[&[f64]]) -> Result<TransitionMatrix> {
        TransitionMatrix::new(rows.iter().map(|r| r.to_vec()).collect())
    }

    #[test]
    fn validate_accepts_uniform_and_single_state() {
        assert_eq!(tm(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap().m(), 2);
        assert_eq!(tm(&[&[1.0]]).unwrap().m(), 1);
    }

    #[test]
    fn validate_rejects_bad_rows() {
        match tm(&[&[0.6, 0.5], &[0.5, 0.5]]) {
            Err(Error::NonStochasticRow { row: 0, sum }) => assert_abs_diff_eq!(sum, 1.1, epsilon = 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            tm(&[&[1.5, -0.5], &[0.5, 0.5]]),
            Err(Error::NegativeEntry { row: 0, col: 1, .. })
        ));
        assert!(matches!(tm(&[&[1.0, 0.0]]), Err(Error::NonSquare { row: 0, len: 2, expected: 1 })));
        assert!(matches!(tm(&[&[f64::NAN]]), Err(Error::NonFinite { .. })));
        assert_eq!(TransitionMatrix::new(vec![]), Err(Error::Empty));
    }

    #[test]
    fn validate_clamps_rounding_noise() {
        let p = tm(&[&[-1e-16, 1.0 + 1e-16], &[0.5, 0.5]]).unwrap();
        assert_eq!(p.get(0, 0), 0.0);
        assert_eq!(p.get(0, 1), 1.0);
    }

    #[test]
    fn irreducibility() {
        assert!(tm(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap().is_irreducible());
        assert!(!tm(&[&[1.0, 0.0], &[0.5, 0.5]]).unwrap().is_irreducible());
        let cycle = tm(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]).unwrap();
        assert!(cycle.is_irreducible());
        assert!(tm(&[&[1.0]]).unwrap().is_irreducible());
    }

    #[test]
    fn stationary_examples() {
        let pi = tm(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap().stationary().unwrap();
        assert_abs_diff_eq!(pi.get(0), 0.5, epsilon = 1e-12);

        // detailed balance: 0.1 pi0 = 0.2 pi1
        let pi = tm(&[&[0.9, 0.1], &[0.2, 0.8]]).unwrap().stationary().unwrap();
        assert_abs_diff_eq!(pi.get(0), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pi.get(1), 1.0 / 3.0, epsilon = 1e-12);
        assert!(pi.residual() <= STATIONARY_RESIDUAL_TOL);

        let cycle = tm(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]).unwrap();
        let pi = cycle.stationary().unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(pi.get(j), 1.0 / 3.0, epsilon = 1e-12);
        }

        assert_eq!(tm(&[&[1.0, 0.0], &[0.5, 0.5]]).unwrap().stationary(), Err(Error::NotIrreducible));
        assert_eq!(tm(&[&[1.0]]).unwrap().stationary().unwrap().as_slice(), &[1.0]);
    }

    #[test]
    fn power_iteration_fallback_handles_periodic_chain() {
        let cycle = tm(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let v = cycle.stationary_power();
        assert_abs_diff_eq!(v[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn generator_examples() {
        let c = generate(&Family::Iid { mu: vec![0.5, 0.5] }, 0).unwrap();
        assert_eq!(c.matrix.row(0), &[0.5, 0.5]);
        assert_eq!(c.matrix.row(1), &[0.5, 0.5]);

        let c = generate(&Family::TwoState { p: 0.1, q: 0.2 }, 0).unwrap();
        assert_eq!(c.matrix.row(0), &[0.9, 0.1]);
        assert_eq!(c.matrix.row(1), &[0.2, 0.8]);

        let c = generate(&Family::LazyCycle { m: 4, hold: 0.5 }, 0).unwrap();
        assert_eq!(c.matrix.row(0), &[0.5, 0.25, 0.0, 0.25]);
        assert_eq!(c.matrix.row(2), &[0.0, 0.25, 0.5, 0.25]);

        let c = generate(&Family::BirthDeath { m: 3, p: 0.3, q: 0.2 }, 0).unwrap();
        assert_eq!(c.matrix.row(0), &[0.7, 0.3, 0.0]);
        assert_abs_diff_eq!(c.matrix.get(1, 1), 0.5, epsilon = 1e-15);
        assert_eq!(c.matrix.row(2), &[0.0, 0.2, 0.8]);
    }

    #[test]
    fn generator_rejects_bad_params() {
        assert!(matches!(generate(&Family::LazyCycle { m: 3, hold: 1.0 }, 0), Err(Error::BadParams(_))));
        assert!(matches!(generate(&Family::Iid { mu: vec![0.5, 0.6] }, 0), Err(Error::BadParams(_))));
        assert!(matches!(generate(&Family::Iid { mu: vec![1.0, 0.0] }, 0), Err(Error::BadParams(_))));
        assert!(matches!(generate(&Family::BirthDeath { m: 3, p: 0.7, q: 0.5 }, 0), Err(Error::BadParams(_))));
        assert!(matches!(generate(&Family::RandomDense { m: 3, alpha: 0.0 }, 0), Err(Error::BadParams(_))));
    }

    #[test]
    fn random_dense_is_seed_deterministic() {
        let f = Family::RandomDense { m: 6, alpha: 0.5 };
        assert_eq!(generate(&f, 9).unwrap(), generate(&f, 9).unwrap());
        assert_ne!(generate(&f, 9).unwrap(), generate(&f, 10).unwrap());
    }

    #[test]
    fn start_law_validation() {
        let p = tm(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap();
        assert!(ChainSpec::new(p.clone(), Some(vec![0.3, 0.7])).is_ok());
        assert!(matches!(ChainSpec::new(p.clone(), Some(vec![0.3, 0.6])), Err(Error::BadStart(_))));
        assert!(matches!(ChainSpec::new(p, Some(vec![-0.1, 1.1])), Err(Error::BadStart(_))));
    }

    #[test]
    fn single_state_generators() {
        for f in [
            Family::LazyCycle { m: 1, hold: 0.3 },
            Family::BirthDeath { m: 1, p: 0.5, q: 0.5 },
            Family::RandomDense { m: 1, alpha: 1.0 },
        ] {
            let c = generate(&f, 1).unwrap();
            assert_eq!(c.matrix.row(0), &[1.0]);
        }
    }
}
