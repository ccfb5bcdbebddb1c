//! Turning point probabilities and probability intervals into class decisions.

use std::fmt;

use crate::cma_ib::ProbabilityInterval;
use crate::dataset::Class;

/// Output of a classifier: a single class, or both classes when the
/// interval-dominance rule cannot separate them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Prediction {
    Determinate(Class),
    Indeterminate,
}

impl Prediction {
    pub fn is_indeterminate(self) -> bool {
        matches!(self, Prediction::Indeterminate)
    }

    pub fn class(self) -> Option<Class> {
        match self {
            Prediction::Determinate(c) => Some(c),
            Prediction::Indeterminate => None,
        }
    }

    /// Number of classes returned.
    pub fn set_size(self) -> usize {
        match self {
            Prediction::Determinate(_) => 1,
            Prediction::Indeterminate => 2,
        }
    }

    pub fn contains(self, c: Class) -> bool {
        match self {
            Prediction::Determinate(d) => d == c,
            Prediction::Indeterminate => true,
        }
    }
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prediction::Determinate(Class::C0) => f.write_str("c0"),
            Prediction::Determinate(Class::C1) => f.write_str("c1"),
            Prediction::Indeterminate => f.write_str("both"),
        }
    }
}

/// Most probable class; an exact tie goes to `c0`.
pub fn decide_point(p_c1: f64) -> Class {
    Class::from_bool(p_c1 > 0.5)
}

/// Interval dominance on the binary problem: `c1` dominates when its lower
/// probability exceeds one half, `c0` when the upper probability of `c1`
/// falls below one half. An endpoint equal to one half is indeterminate.
pub fn decide_interval(c1: &ProbabilityInterval) -> Prediction {
    if c1.lo > 0.5 {
        Prediction::Determinate(Class::C1)
    } else if c1.hi < 0.5 {
        Prediction::Determinate(Class::C0)
    } else {
        Prediction::Indeterminate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> ProbabilityInterval {
        ProbabilityInterval::new(lo, hi).unwrap()
    }

    #[test]
    fn point_rule() {
        assert_eq!(decide_point(0.51), Class::C1);
        assert_eq!(decide_point(0.49), Class::C0);
        assert_eq!(decide_point(0.5), Class::C0);
    }

    #[test]
    fn interval_rule() {
        assert_eq!(decide_interval(&iv(0.6, 0.7)), Prediction::Determinate(Class::C1));
        assert_eq!(decide_interval(&iv(0.1, 0.45)), Prediction::Determinate(Class::C0));
        assert_eq!(decide_interval(&iv(0.4, 0.6)), Prediction::Indeterminate);
        assert_eq!(decide_interval(&iv(0.5, 0.7)), Prediction::Indeterminate);
        assert_eq!(decide_interval(&iv(0.3, 0.5)), Prediction::Indeterminate);
    }

    #[test]
    fn degenerate_interval_matches_point_rule_off_the_boundary() {
        for p in [0.0, 0.2, 0.4999, 0.5001, 0.9, 1.0] {
            assert_eq!(decide_interval(&iv(p, p)), Prediction::Determinate(decide_point(p)));
        }
    }

    #[test]
    fn display_and_sets() {
        assert_eq!(Prediction::Indeterminate.to_string(), "both");
        assert_eq!(Prediction::Determinate(Class::C1).to_string(), "c1");
        assert!(Prediction::Indeterminate.contains(Class::C0));
        assert!(!Prediction::Determinate(Class::C1).contains(Class::C0));
        assert_eq!(Prediction::Indeterminate.set_size(), 2);
    }
}
