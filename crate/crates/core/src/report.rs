use alloc::string::String;
use core::fmt::{Display, Write};

/// Absolute slack applied to every analytic inequality check.
pub const CHECK_TOL: f64 = 1e-9;

/// Outcome of comparing one quantity against one bound.
///
/// For upper-bound checks `holds` is `value <= bound + ci + tolerance` and
/// `margin` is `bound - value`. Agreement checks (an estimate against an exact
/// value) use `|value - bound| <= ci + tolerance` with `margin = ci - |value - bound|`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub name: String,
    pub chain_id: String,
    /// `key=value` pairs separated by `;`.
    pub params: String,
    pub bound: f64,
    pub value: f64,
    pub ci: f64,
    pub margin: f64,
    pub holds: bool,
    pub vacuous: bool,
}

impl BoundReport {
    pub fn upper(name: &str, bound: f64, value: f64, ci: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            chain_id: String::new(),
            params: String::new(),
            bound,
            value,
            ci,
            margin: bound - value,
            holds: value <= bound + ci + tolerance,
            vacuous: false,
        }
    }

    pub fn agreement(name: &str, expected: f64, value: f64, ci: f64, tolerance: f64) -> Self {
        let dev = libm::fabs(value - expected);
        Self {
            name: name.into(),
            chain_id: String::new(),
            params: String::new(),
            bound: expected,
            value,
            ci,
            margin: ci - dev,
            holds: dev <= ci + tolerance,
            vacuous: false,
        }
    }

    pub fn with_vacuous(mut self, vacuous: bool) -> Self {
        self.vacuous = vacuous;
        self
    }

    pub fn with_chain(mut self, id: impl Into<String>) -> Self {
        self.chain_id = id.into();
        self
    }

    pub fn param(mut self, key: &str, value: impl Display) -> Self {
        if !self.params.is_empty() {
            self.params.push(';');
        }
        let _ = write!(self.params, "{key}={value}");
        self
    }

    /// A failed, non-vacuous check.
    pub fn is_violation(&self) -> bool {
        !self.holds && !self.vacuous
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upper_uses_ci_slack() {
        let r = BoundReport::upper("x", 0.1, 0.105, 0.01, 0.0);
        assert!(r.holds);
        assert!(r.margin < 0.0);
        assert!(!BoundReport::upper("x", 0.1, 0.2, 0.01, 0.0).holds);
    }

    #[test]
    fn params_accumulate() {
        let r = BoundReport::upper("x", 1.0, 0.0, 0.0, 0.0).param("n", 3).param("J", "0|1");
        assert_eq!(r.params, "n=3;J=0|1");
    }

    #[test]
    fn violation_ignores_vacuous() {
        let r = BoundReport::upper("x", 0.0, 1.0, 0.0, 0.0);
        assert!(r.is_violation());
        assert!(!r.with_vacuous(true).is_violation());
    }
}
