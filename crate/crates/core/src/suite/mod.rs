//! Inequality checkers that return a verdict with statistical slack, and the
//! weak-law convergence runner.
//!
//! Every checker compares a left-hand tail probability against a multiple of
//! a right-hand one evaluated on the same sample paths. In exact mode both
//! sides are counts over the same finite pattern set and the comparison is
//! done in integers. In Monte Carlo mode a violation is only reported when
//! the lower confidence bound of the left side clears the upper confidence
//! bound of the right side.

mod configs;
mod inequality;
mod wlln;

use serde::{Deserialize, Serialize};

use crate::estimator::{clopper_pearson, JointCounts, MonteCarlo, TailEstimate};

pub use configs::{random_fixed_case, random_norming_pair, FixedVectorCase};
pub use inequality::{
    check_contraction, check_levy, check_rescaled_signs, check_rescaled_symmetric,
    default_random_t_grid, equispaced_grid, LEVY_PATTERN_LIMIT,
};
pub use wlln::{
    cross_check_symmetrization, power_of_two_grid, run_wlln, Branch, CenteringChoice, Criterion,
    SymmetrizationCheck, WllnDiagnostic, WllnPlan, WllnRow, CONVERGENCE_THRESHOLD,
    DEFAULT_CENTERING_REPLICATIONS, DEFAULT_LAMBDA_GRID, DIVERGENCE_THRESHOLD,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// How the probabilities in a check are computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Full enumeration of the finite pattern set.
    Exact,
    MonteCarlo(MonteCarlo),
}

/// The additive term `n P(||V|| > b_n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailTerm {
    pub value: f64,
    /// Equal to `value` when analytic.
    pub upper: f64,
    pub std_error: f64,
    pub analytic: bool,
}

impl TailTerm {
    pub fn analytic(value: f64) -> Self {
        TailTerm {
            value,
            upper: value,
            std_error: 0.0,
            analytic: true,
        }
    }

    /// `n` times the empirical frequency of `exceed` hits in `trials`.
    pub fn empirical(n: usize, exceed: u64, trials: u64, confidence: f64) -> Self {
        let scale = n as f64;
        let p = exceed as f64 / trials as f64;
        let (_, hi) = clopper_pearson(exceed, trials, confidence);
        TailTerm {
            value: scale * p,
            upper: scale * hi.max(p),
            std_error: scale * (p * (1.0 - p) / trials as f64).sqrt(),
            analytic: false,
        }
    }
}

/// One grid point of one inequality check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub summary: String,
    pub n: usize,
    pub t: f64,
    pub lhs: TailEstimate,
    pub rhs: TailEstimate,
    /// Multiplier applied to `rhs` in the bound (2 or 4).
    pub factor: u32,
    pub tail_term: Option<TailTerm>,
    pub rhs_bound: f64,
    pub rhs_bound_upper: f64,
    pub slack: f64,
    pub verdict: Verdict,
    /// `slack` in units of its paired standard error.
    pub sigma_margin: f64,
    pub joint: JointCounts,
}

impl InequalityReport {
    pub(crate) fn exact(
        name: &str,
        summary: &str,
        n: usize,
        t: f64,
        factor: u32,
        joint: JointCounts,
    ) -> Self {
        let total = joint.total();
        let lhs = TailEstimate::exact(joint.lhs(), total);
        let rhs = TailEstimate::exact(joint.rhs(), total);
        let rhs_bound = factor as f64 * rhs.p_hat;
        let slack = rhs_bound - lhs.p_hat;
        let holds = joint.lhs() as u128 <= factor as u128 * joint.rhs() as u128;
        let sigma_margin = if slack > 0.0 {
            f64::INFINITY
        } else if slack == 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        };
        InequalityReport {
            name: name.to_string(),
            summary: summary.to_string(),
            n,
            t,
            lhs,
            rhs,
            factor,
            tail_term: None,
            rhs_bound,
            rhs_bound_upper: rhs_bound,
            slack,
            verdict: if holds {
                Verdict::Holds
            } else {
                Verdict::Violated
            },
            sigma_margin,
            joint,
        }
    }

    /// Adds a known tail term to an exact report: the bound becomes
    /// `factor * rhs + tail`.
    pub(crate) fn with_exact_tail(mut self, tail: TailTerm) -> Self {
        debug_assert!(tail.analytic);
        self.rhs_bound += tail.value;
        self.rhs_bound_upper = self.rhs_bound;
        self.slack = self.rhs_bound - self.lhs.p_hat;
        if self.slack >= 0.0 {
            self.verdict = Verdict::Holds;
        }
        self.sigma_margin = if self.slack > 0.0 {
            f64::INFINITY
        } else if self.slack == 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        };
        self.tail_term = Some(tail);
        self
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn monte_carlo(
        name: &str,
        summary: &str,
        n: usize,
        t: f64,
        factor: u32,
        joint: JointCounts,
        tail_term: Option<TailTerm>,
        confidence: f64,
    ) -> Self {
        let total = joint.total();
        let lhs = TailEstimate::from_counts(joint.lhs(), total, confidence);
        let rhs = TailEstimate::from_counts(joint.rhs(), total, confidence);
        let c = factor as f64;
        let (tail, tail_upper, tail_se) = tail_term
            .map(|x| (x.value, x.upper, x.std_error))
            .unwrap_or((0.0, 0.0, 0.0));
        let rhs_bound = c * rhs.p_hat + tail;
        let rhs_bound_upper = c * rhs.ci_high + tail_upper;
        let slack = rhs_bound - lhs.p_hat;

        // Per-path variance of 1{lhs} - c 1{rhs} from the joint table.
        let r = total as f64;
        let (pl, pr, pb) = (lhs.p_hat, rhs.p_hat, joint.both as f64 / r);
        let mean = pl - c * pr;
        let var = (pl + c * c * pr - 2.0 * c * pb - mean * mean).max(0.0);
        let se = (var / r + tail_se * tail_se).sqrt();
        let sigma_margin = if se > 0.0 {
            slack / se
        } else if slack > 0.0 {
            f64::INFINITY
        } else if slack == 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        };

        let verdict = if lhs.ci_low > rhs_bound_upper {
            Verdict::Violated
        } else if lhs.ci_high <= rhs_bound {
            Verdict::Holds
        } else {
            Verdict::Inconclusive
        };
        InequalityReport {
            name: name.to_string(),
            summary: summary.to_string(),
            n,
            t,
            lhs,
            rhs,
            factor,
            tail_term,
            rhs_bound,
            rhs_bound_upper,
            slack,
            verdict,
            sigma_margin,
            joint,
        }
    }
}

/// The most severe verdict among `reports`.
pub fn overall_verdict<'a, I>(reports: I) -> Verdict
where
    I: IntoIterator<Item = &'a InequalityReport>,
{
    let mut out = Verdict::Holds;
    for r in reports {
        match r.verdict {
            Verdict::Violated => return Verdict::Violated,
            Verdict::Inconclusive => out = Verdict::Inconclusive,
            Verdict::Holds => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn joint(both: u64, lhs_only: u64, rhs_only: u64, neither: u64) -> JointCounts {
        JointCounts {
            both,
            lhs_only,
            rhs_only,
            neither,
        }
    }

    #[test]
    fn exact_verdict_is_integer_comparison() {
        // 3 of 8 against 2 * 1 of 8.
        let r = InequalityReport::exact("x", "", 3, 0.5, 2, joint(1, 2, 0, 5));
        assert_eq!(r.verdict, Verdict::Violated);
        let r = InequalityReport::exact("x", "", 3, 0.5, 2, joint(1, 1, 0, 6));
        assert_eq!(r.verdict, Verdict::Holds);
        assert_eq!(r.slack, 0.0);
        assert_eq!(r.lhs.ci_low, r.lhs.p_hat);
    }

    #[test]
    fn monte_carlo_verdict_rules() {
        // Far above the bound: lhs = 0.5, rhs = 0.01.
        let r = InequalityReport::monte_carlo(
            "x",
            "",
            1,
            1.0,
            2,
            joint(100, 4900, 0, 5000),
            None,
            0.99,
        );
        assert_eq!(r.verdict, Verdict::Violated);
        assert!(r.sigma_margin < -10.0);

        // lhs = rhs, comfortably below twice rhs.
        let r =
            InequalityReport::monte_carlo("x", "", 1, 1.0, 2, joint(3000, 0, 0, 7000), None, 0.99);
        assert_eq!(r.verdict, Verdict::Holds);

        // lhs slightly above 2 rhs: overlapping intervals.
        let r =
            InequalityReport::monte_carlo("x", "", 1, 1.0, 2, joint(10, 11, 0, 979), None, 0.99);
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn tail_term_enters_both_bounds() {
        let tail = TailTerm::empirical(10, 5, 1000, 0.99);
        assert!((tail.value - 0.05).abs() < 1e-15);
        assert!(tail.upper > tail.value);
        let r = InequalityReport::monte_carlo(
            "x",
            "",
            10,
            1.0,
            4,
            joint(0, 50, 0, 950),
            Some(tail),
            0.99,
        );
        assert!((r.rhs_bound - 0.05).abs() < 1e-15);
        assert!(r.rhs_bound_upper >= tail.upper);
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn overall_verdict_severity() {
        let holds = InequalityReport::exact("x", "", 1, 0.0, 2, joint(1, 0, 0, 1));
        let mut bad = holds.clone();
        bad.verdict = Verdict::Violated;
        let mut unsure = holds.clone();
        unsure.verdict = Verdict::Inconclusive;
        assert_eq!(overall_verdict([&holds, &holds]), Verdict::Holds);
        assert_eq!(overall_verdict([&holds, &unsure]), Verdict::Inconclusive);
        assert_eq!(overall_verdict([&unsure, &bad, &holds]), Verdict::Violated);
    }
}
