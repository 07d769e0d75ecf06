//! Closed-form tail bounds for missing mass and hitting times, and the small
//! analytic facts behind them.
//!
//! The unspecified absolute constants are parameters. Defaults: `c = 1/(2e)`
//! (the `1/e` chunking rate of the hitting-time tail combined with the factor
//! 2 relating `T(A)` to `T(0.5)/pi(A)`), and `c2 = 1` for the missing-mass
//! deviation exponent, which has no known value.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::E;

use crate::report::{BoundReport, CHECK_TOL};
use crate::{CompensatedSum, Error, Result, StateSet, StationaryDistribution};

pub const DEFAULT_C: f64 = 1.0 / (2.0 * E);
pub const DEFAULT_C2: f64 = 1.0;
/// Mass threshold defining the large-set hitting time `T = T(0.5)`.
pub const DEFAULT_EPSILON: f64 = 0.5;
/// Grid on which [`certify_c`] reports the constant.
pub const C_RESOLUTION: f64 = 0.01;
/// Largest constant [`certify_c`] will report.
pub const C_CAP: f64 = 100.0;

/// How the Bernoulli success probabilities `q_j` are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QMode {
    /// `q_j = exp(-c n pi(j) / T)`.
    Theorem,
    /// `q_j = (1 - pi(j))^n`, exact for IID sources.
    IidExact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundParams {
    pub c: f64,
    /// Large-set hitting time `T(0.5)`.
    pub t_half: f64,
    pub n: u64,
    pub pi: Vec<f64>,
    pub mode: QMode,
}

impl BoundParams {
    /// `t_half` may be zero only for a single-state chain, where every bound is vacuous.
    pub fn new(c: f64, t_half: f64, n: u64, pi: &StationaryDistribution) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Domain(format!("c must be positive, got {c}")));
        }
        if n == 0 {
            return Err(Error::Domain("n must be at least 1".into()));
        }
        let single = pi.m() == 1;
        if !(t_half.is_finite() && (t_half > 0.0 || (single && t_half == 0.0))) {
            return Err(Error::Domain(format!("T(0.5) must be positive, got {t_half}")));
        }
        Ok(Self { c, t_half, n, pi: pi.as_slice().to_vec(), mode: QMode::Theorem })
    }

    /// `c = 1`, `T = 1` and exact IID survival probabilities.
    pub fn iid_exact(n: u64, pi: &StationaryDistribution) -> Result<Self> {
        let mut p = Self::new(1.0, 1.0, n, pi)?;
        p.mode = QMode::IidExact;
        Ok(p)
    }

    pub fn is_vacuous(&self) -> bool {
        self.t_half == 0.0
    }

    pub fn describe(&self) -> String {
        let mode = match self.mode {
            QMode::Theorem => "theorem",
            QMode::IidExact => "iid-exact",
        };
        format!("c={};T={};n={};mode={}", self.c, self.t_half, self.n, mode)
    }

    fn exponent(&self, mass: f64) -> f64 {
        if self.t_half == 0.0 {
            f64::NEG_INFINITY
        } else {
            -self.c * self.n as f64 * mass / self.t_half
        }
    }
}

/// Success probability of each Bernoulli surrogate `Q_j`.
pub fn q_probabilities(params: &BoundParams) -> Vec<f64> {
    params
        .pi
        .iter()
        .map(|&p| match params.mode {
            QMode::Theorem => libm::exp(params.exponent(p)),
            QMode::IidExact => iid_exact_survival(p, params.n),
        })
        .collect()
}

/// `prod_{j in J} q_j`; in theorem mode this is `exp(-c n pi(J) / T)`.
pub fn joint_survival_bound(params: &BoundParams, set: &StateSet) -> Result<f64> {
    set.non_empty()?;
    let mass: CompensatedSum = set.members().iter().map(|&j| params.pi[j]).collect();
    Ok(match params.mode {
        QMode::Theorem => libm::exp(params.exponent(mass.value())),
        QMode::IidExact => set.members().iter().map(|&j| iid_exact_survival(params.pi[j], params.n)).product(),
    })
}

/// `(1 - pi(J))^n`: the survival of `J` under an IID source.
pub fn iid_exact_survival(mass: f64, n: u64) -> f64 {
    libm::pow((1.0 - mass).clamp(0.0, 1.0), n as f64)
}

/// `1 - pi(J) <= prod_{j in J} (1 - pi(j))`.
pub fn product_inequality_check(pi: &StationaryDistribution, set: &StateSet) -> Result<BoundReport> {
    set.non_empty()?;
    let lhs = 1.0 - pi.mass(set);
    let rhs: f64 = set.members().iter().map(|&j| 1.0 - pi.get(j)).product();
    Ok(BoundReport::upper("product-inequality", rhs, lhs, 0.0, CHECK_TOL).param("J", set))
}

/// `exp(-floor(t / ceil(e * expected)))`, at most 1.
///
/// `expected` must dominate the expected hitting time from every start for
/// the chunking argument to apply. A non-positive `expected` yields 1.
pub fn hitting_tail_bound(expected: f64, t: u64) -> f64 {
    if !(expected > 0.0) {
        return 1.0;
    }
    let chunk = libm::ceil(E * expected);
    let k = libm::floor(t as f64 / chunk);
    libm::exp(-k).min(1.0)
}

/// `exp(-c t pi(A) / T(0.5))`, at most 1.
pub fn explicit_hitting_tail(pi_a: f64, t_half: f64, t: f64, c: f64) -> f64 {
    libm::exp(-c * t * pi_a / t_half).min(1.0)
}

/// Upper deviation bound for the missing mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissingMassTail {
    /// `sum_j pi(j) q_j`.
    pub mean_term: f64,
    /// `mean_term + eps`.
    pub threshold: f64,
    /// `exp(-c2 n eps^2 / T)`, the bound on `Pr[MissingMass > threshold]`.
    pub failure_bound: f64,
    pub c2: f64,
}

pub fn missing_mass_tail_bound(params: &BoundParams, epsilon: f64, c2: f64) -> Result<MissingMassTail> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(c2.is_finite() && c2 > 0.0) {
        return Err(Error::Domain(format!("c2 must be positive, got {c2}")));
    }
    let q = q_probabilities(params);
    let mean: CompensatedSum = params.pi.iter().zip(&q).map(|(p, q)| p * q).collect();
    let mean_term = mean.value();
    let failure_bound = if params.t_half == 0.0 {
        0.0
    } else {
        libm::exp(-c2 * params.n as f64 * epsilon * epsilon / params.t_half)
    };
    Ok(MissingMassTail { mean_term, threshold: mean_term + epsilon, failure_bound, c2 })
}

/// Weighting of the Bernoulli surrogates in the moment-generating comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComparatorForm {
    /// `sum_j n pi(j) Q_j`.
    Eq3,
    /// `sum_j pi(j) Q_j`, on the missing-mass scale.
    Cor1,
}

impl ComparatorForm {
    pub fn name(self) -> &'static str {
        match self {
            ComparatorForm::Eq3 => "eq3-form",
            ComparatorForm::Cor1 => "cor1-form",
        }
    }

    pub fn weights(self, pi: &[f64], n: u64) -> Vec<f64> {
        match self {
            ComparatorForm::Eq3 => pi.iter().map(|p| n as f64 * p).collect(),
            ComparatorForm::Cor1 => pi.to_vec(),
        }
    }
}

/// `E exp(s sum_j w_j Q_j) = prod_j (1 - q_j + q_j e^{s w_j})` for independent `Q_j`.
pub fn bernoulli_product_mgf(q: &[f64], weights: &[f64], s: f64) -> f64 {
    let log: CompensatedSum = q
        .iter()
        .zip(weights)
        // q = 0 contributes a factor of 1 even when e^{s w} overflows
        .map(|(&q, &w)| if q == 0.0 { 0.0 } else { libm::log1p(q * libm::expm1(s * w)) })
        .collect();
    libm::exp(log.value())
}

/// Binary relative entropy `D(p || q)` in nats, for `p, q` in `(0, 1)`.
pub fn kl_divergence(p: f64, q: f64) -> Result<f64> {
    let open = |x: f64| x > 0.0 && x < 1.0;
    if !(open(p) && open(q)) {
        return Err(Error::Domain(format!("p and q must lie in (0, 1), got p={p}, q={q}")));
    }
    Ok(p * libm::log(p / q) + (1.0 - p) * libm::log((1.0 - p) / (1.0 - q)))
}

/// `D(p || q) >= 2 (p - q)^2`.
pub fn pinsker_check(p: f64, q: f64) -> Result<BoundReport> {
    let d = kl_divergence(p, q)?;
    let lower = 2.0 * (p - q) * (p - q);
    // a lower bound: the "value" being bounded above is 2(p-q)^2, the bound is D
    Ok(BoundReport::upper("pinsker", d, lower, 0.0, CHECK_TOL).param("p", p).param("q", q))
}

/// One joint-survival measurement used to certify the constant `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationInstance {
    pub label: String,
    /// `pi(J)`.
    pub mass: f64,
    pub n: u64,
    pub t_half: f64,
    pub hits: u64,
    pub trials: u64,
}

impl CalibrationInstance {
    fn p_hat(&self) -> f64 {
        self.hits as f64 / self.trials as f64
    }

    /// Largest `c` with `p <= exp(-c n mass / T)`, capped at [`C_CAP`].
    fn limit(&self, p: f64) -> f64 {
        if p >= 1.0 {
            0.0
        } else if p <= 0.0 {
            C_CAP
        } else {
            (-libm::log(p) * self.t_half / (self.n as f64 * self.mass)).min(C_CAP)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    /// Largest grid value of `c` for which every included instance satisfies
    /// `p_hat <= exp(-c n pi(J) / T) + z-halfwidth`.
    pub certified_c: f64,
    /// Same without the confidence slack.
    pub point_c: f64,
    /// `(instance index, limit with slack)` for included instances.
    pub per_instance: Vec<(usize, f64)>,
    /// Instances skipped because `n < T(0.5)`.
    pub excluded: usize,
    /// Index of the instance that fixes `certified_c`.
    pub binding: usize,
}

fn floor_to_grid(x: f64) -> f64 {
    // divide rather than multiply so grid points print as short decimals
    let per_unit = libm::round(1.0 / C_RESOLUTION);
    libm::floor(x * per_unit + 1e-9) / per_unit
}

/// The largest constant `c` (on a 0.01 grid, capped at [`C_CAP`]) such that
/// the joint-survival bound holds on every instance with `n >= T(0.5)`, using a
/// `z`-halfwidth of slack on each empirical probability.
pub fn certify_c(instances: &[CalibrationInstance], z: f64) -> Result<Calibration> {
    let mut per_instance = Vec::new();
    let mut excluded = 0;
    let (mut certified, mut point, mut binding) = (f64::INFINITY, f64::INFINITY, 0);
    for (i, inst) in instances.iter().enumerate() {
        if !(inst.t_half > 0.0) || (inst.n as f64) < inst.t_half || inst.trials == 0 {
            excluded += 1;
            continue;
        }
        let p = inst.p_hat();
        let slack = z * libm::sqrt(p * (1.0 - p) / inst.trials as f64);
        let with_slack = inst.limit(p + slack);
        per_instance.push((i, with_slack));
        if with_slack < certified {
            certified = with_slack;
            binding = i;
        }
        point = point.min(inst.limit(p));
    }
    if per_instance.is_empty() {
        return Err(Error::EmptySuite);
    }
    let certified_c = floor_to_grid(certified);
    let point_c = floor_to_grid(point);
    if certified_c <= 0.0 && point_c >= C_RESOLUTION {
        return Err(Error::InsufficientTrials { resolution: C_RESOLUTION, point: point_c });
    }
    Ok(Calibration { certified_c, point_c, per_instance, excluded, binding })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn pi(v: &[f64]) -> StationaryDistribution {
        StationaryDistribution::from_probabilities(v.to_vec()).unwrap()
    }

    fn set(members: &[usize], m: usize) -> StateSet {
        StateSet::new(members.iter().copied(), m).unwrap()
    }

    #[test]
    fn q_examples() {
        let p = BoundParams::new(1.0, 1.0, 10, &pi(&[0.1; 10])).unwrap();
        assert_abs_diff_eq!(q_probabilities(&p)[0], 0.367_879_441_171_442_3, epsilon = 1e-15);
        let p = BoundParams::new(1.0, 2.0, 20, &pi(&[0.5, 0.5])).unwrap();
        assert_abs_diff_eq!(q_probabilities(&p)[0], 6.737_946_999_085_467e-3, epsilon = 1e-17);
    }

    #[test]
    fn params_validation() {
        let u = pi(&[0.5, 0.5]);
        assert!(BoundParams::new(0.0, 1.0, 1, &u).is_err());
        assert!(BoundParams::new(1.0, 1.0, 0, &u).is_err());
        assert!(BoundParams::new(1.0, 0.0, 1, &u).is_err());
        let single = BoundParams::new(1.0, 0.0, 1, &pi(&[1.0])).unwrap();
        assert!(single.is_vacuous());
        assert_eq!(q_probabilities(&single), vec![0.0]);
    }

    #[test]
    fn joint_bound_examples() {
        let u = pi(&[0.5, 0.5]);
        let p = BoundParams::new(1.0, 1.0, 3, &u).unwrap();
        assert_abs_diff_eq!(joint_survival_bound(&p, &set(&[0, 1], 2)).unwrap(), libm::exp(-3.0), epsilon = 1e-15);
        assert_eq!(joint_survival_bound(&p, &set(&[1], 2)).unwrap(), q_probabilities(&p)[1]);
        assert_eq!(joint_survival_bound(&p, &StateSet::default()), Err(Error::EmptySet));

        let iid = BoundParams::iid_exact(3, &u).unwrap();
        assert_eq!(joint_survival_bound(&iid, &set(&[1], 2)).unwrap(), 0.125);
    }

    #[test]
    fn iid_survival_examples() {
        assert_eq!(iid_exact_survival(0.5, 3), 0.125);
        assert_eq!(iid_exact_survival(1.0, 1), 0.0);
        assert_eq!(iid_exact_survival(0.25, 2), 0.5625);
    }

    #[test]
    fn product_inequality_examples() {
        let r = product_inequality_check(&pi(&[0.5, 0.5]), &set(&[0, 1], 2)).unwrap();
        assert!(r.holds);
        assert_abs_diff_eq!(r.value, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.bound, 0.25, epsilon = 1e-15);

        let r = product_inequality_check(&pi(&[0.3, 0.7]), &set(&[0], 2)).unwrap();
        assert_abs_diff_eq!(r.margin, 0.0, epsilon = 1e-15);

        let r = product_inequality_check(&pi(&[0.1; 10]), &StateSet::full(10)).unwrap();
        assert!(r.holds);
        assert_abs_diff_eq!(r.bound, 0.348_678_440_1, epsilon = 1e-10);
    }

    #[test]
    fn hitting_tail_examples() {
        assert_abs_diff_eq!(hitting_tail_bound(2.0, 20), libm::exp(-3.0), epsilon = 1e-15);
        assert!(libm::pow(0.5, 20.0) <= hitting_tail_bound(2.0, 20));
        assert_eq!(hitting_tail_bound(2.0, 5), 1.0);
        assert_abs_diff_eq!(hitting_tail_bound(1.0, 11), libm::exp(-3.0), epsilon = 1e-15);
        assert_eq!(hitting_tail_bound(0.0, 11), 1.0);
    }

    #[test]
    fn explicit_tail_examples() {
        assert_abs_diff_eq!(explicit_hitting_tail(0.5, 2.0, 16.0 * E, DEFAULT_C), libm::exp(-2.0), epsilon = 1e-14);
        assert_eq!(explicit_hitting_tail(0.5, 2.0, 0.0, DEFAULT_C), 1.0);
        let b = explicit_hitting_tail(0.5, 2.0, 40.0, DEFAULT_C);
        assert_abs_diff_eq!(b, libm::exp(-5.0 / E), epsilon = 1e-14);
        assert_abs_diff_eq!(b, 0.1590, epsilon = 1e-4);
        assert!(libm::pow(0.5, 40.0) <= b);
    }

    #[test]
    fn missing_mass_tail_examples() {
        let u = pi(&[0.25; 4]);
        let p = BoundParams::new(1.0, 1.0, 4, &u).unwrap();
        let r = missing_mass_tail_bound(&p, 0.1, DEFAULT_C2).unwrap();
        assert_abs_diff_eq!(r.mean_term, libm::exp(-1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(r.threshold, libm::exp(-1.0) + 0.1, epsilon = 1e-15);
        assert!(missing_mass_tail_bound(&p, 1e3, 1.0).unwrap().failure_bound < 1e-300);
        assert!(missing_mass_tail_bound(&p, 0.0, 1.0).is_err());

        let skew = pi(&[0.1, 0.2, 0.7]);
        let iid = BoundParams::iid_exact(3, &skew).unwrap();
        let r = missing_mass_tail_bound(&iid, 0.1, 1.0).unwrap();
        let exact: f64 = [0.1f64, 0.2, 0.7].iter().map(|p| p * libm::pow(1.0 - p, 3.0)).sum();
        assert_abs_diff_eq!(r.mean_term, exact, epsilon = 1e-15);
    }

    #[test]
    fn bernoulli_mgf_matches_enumeration() {
        let q = [0.2, 0.7, 0.4];
        let w = [0.5, 1.5, 0.25];
        let s = 1.3;
        let mut brute = 0.0;
        for mask in 0..8u32 {
            let mut prob = 1.0;
            let mut sum = 0.0;
            for j in 0..3 {
                if mask >> j & 1 == 1 {
                    prob *= q[j];
                    sum += w[j];
                } else {
                    prob *= 1.0 - q[j];
                }
            }
            brute += prob * libm::exp(s * sum);
        }
        assert_relative_eq!(bernoulli_product_mgf(&q, &w, s), brute, max_relative = 1e-13);
        assert_eq!(bernoulli_product_mgf(&q, &w, 0.0), 1.0);
    }

    #[test]
    fn kl_and_pinsker_examples() {
        assert_eq!(kl_divergence(0.3, 0.3).unwrap(), 0.0);
        assert!(pinsker_check(0.3, 0.3).unwrap().holds);
        // 0.5 ln 2 + 0.5 ln(2/3)
        let d = kl_divergence(0.5, 0.25).unwrap();
        assert_abs_diff_eq!(d, 0.143_841_036_225_890_3, epsilon = 1e-12);
        assert!(pinsker_check(0.5, 0.25).unwrap().holds);
        // 0.8 ln 9
        assert_abs_diff_eq!(kl_divergence(0.9, 0.1).unwrap(), 1.757_779_661_868_975_5, epsilon = 1e-12);
        assert_abs_diff_eq!(pinsker_check(0.9, 0.1).unwrap().value, 1.28, epsilon = 1e-12);
        assert!(matches!(kl_divergence(0.0, 0.5), Err(Error::Domain(_))));
        assert!(matches!(kl_divergence(0.5, 1.0), Err(Error::Domain(_))));
    }

    fn inst(mass: f64, n: u64, t_half: f64, hits: u64, trials: u64) -> CalibrationInstance {
        CalibrationInstance { label: String::new(), mass, n, t_half, hits, trials }
    }

    #[test]
    fn calibration_exact_iid_values() {
        // uniform 2-state IID, J = {0}: Pr = 0.5^n, T(0.5) = 2, so the limit is 4 ln 2
        let trials = 1_000_000;
        let instances: Vec<_> = [2u64, 4, 8]
            .iter()
            .map(|&n| inst(0.5, n, 2.0, (libm::pow(0.5, n as f64) * trials as f64) as u64, trials))
            .collect();
        let cal = certify_c(&instances, 0.0).unwrap();
        assert_abs_diff_eq!(cal.point_c, 2.77, epsilon = 1e-9);
        assert!(cal.certified_c >= 1.0);
    }

    #[test]
    fn calibration_filters_and_errors() {
        assert_eq!(certify_c(&[], 2.0), Err(Error::EmptySuite));
        assert_eq!(certify_c(&[inst(0.5, 1, 2.0, 10, 10)], 2.0), Err(Error::EmptySuite));
        // a certain event pins c to zero
        let cal = certify_c(&[inst(1.0 / 3.0, 1, 1.0, 100, 100)], 2.0).unwrap();
        assert_eq!(cal.certified_c, 0.0);
        // a handful of trials cannot resolve the constant
        assert!(matches!(
            certify_c(&[inst(0.1, 10, 1.0, 2, 4)], Z99_FOR_TESTS),
            Err(Error::InsufficientTrials { .. })
        ));
        let cal = certify_c(&[inst(0.5, 4, 1.0, 0, 1000)], 2.0).unwrap();
        assert_eq!(cal.certified_c, C_CAP);
    }

    const Z99_FOR_TESTS: f64 = crate::sim::Z99;
}
