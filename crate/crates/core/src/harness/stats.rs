//! Binomial estimates with Wilson score intervals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959964;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Analytic lower bound the estimate is compared against, if any.
    pub bound: Option<f64>,
}

impl ProbabilityEstimate {
    pub fn wilson(successes: u64, trials: u64, bound: Option<f64>) -> Result<Self> {
        if trials == 0 {
            return Err(Error::param("trials", "needs at least one trial"));
        }
        if successes > trials {
            return Err(Error::param("successes", "cannot exceed trials"));
        }
        let n = trials as f64;
        let p = successes as f64 / n;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let mid = (p + z2 / (2.0 * n)) / denom;
        let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        // At p ∈ {0, 1} one end of the interval sits exactly on p.
        let lo = if successes == 0 { 0.0 } else { (mid - half).clamp(0.0, p) };
        let hi = if successes == trials { 1.0 } else { (mid + half).clamp(p, 1.0) };
        Ok(Self {
            successes,
            trials,
            estimate: p,
            ci_low: lo,
            ci_high: hi,
            bound,
        })
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }

    /// A nonpositive bound carries no information.
    pub fn vacuous(&self) -> bool {
        self.bound.is_none_or(|b| b <= 0.0)
    }

    /// One-sided check `estimate ≥ bound − half_width`; vacuous bounds pass.
    pub fn non_violation(&self) -> bool {
        match self.bound {
            Some(b) if b > 0.0 => self.estimate >= b - self.half_width(),
            _ => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn textbook_value() {
        // 8/10 at z = 1.96: (0.4902, 0.9433).
        let e = ProbabilityEstimate::wilson(8, 10, None).unwrap();
        assert!((e.ci_low - 0.4902).abs() < 1e-3);
        assert!((e.ci_high - 0.9433).abs() < 1e-3);
    }

    #[test]
    fn endpoints() {
        let e = ProbabilityEstimate::wilson(5, 5, None).unwrap();
        assert_eq!((e.estimate, e.ci_high), (1.0, 1.0));
        let e = ProbabilityEstimate::wilson(0, 5, None).unwrap();
        assert_eq!((e.estimate, e.ci_low), (0.0, 0.0));
        assert!(ProbabilityEstimate::wilson(0, 0, None).is_err());
        assert!(ProbabilityEstimate::wilson(3, 2, None).is_err());
    }

    #[test]
    fn vacuous_bound_passes() {
        let e = ProbabilityEstimate::wilson(0, 10, Some(-3.0)).unwrap();
        assert!(e.vacuous() && e.non_violation());
        let e = ProbabilityEstimate::wilson(0, 10, Some(0.9)).unwrap();
        assert!(!e.non_violation());
    }

    proptest! {
        #[test]
        fn interval_contains_estimate(n in 1u64..5000, frac in 0.0f64..=1.0) {
            let s = ((n as f64) * frac).floor() as u64;
            let e = ProbabilityEstimate::wilson(s, n, None).unwrap();
            prop_assert!(0.0 <= e.ci_low && e.ci_low <= e.estimate);
            prop_assert!(e.estimate <= e.ci_high && e.ci_high <= 1.0);
        }
    }
}
