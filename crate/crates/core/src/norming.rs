//! Norming sequences `a_n`, `b_n` and their piecewise-linear interpolants.
//!
//! `phi` and `psi` interpolate the knots `(0, 0), (1, a_1), ..., (N, a_N)` and
//! `(0, 0), (1, b_1), ..., (N, b_N)` linearly, so `phi(n) = a_n` and `psi(n) = b_n`
//! hold exactly at every integer. When `b_n / a_n` is nondecreasing the ratio
//! `psi / phi` is nondecreasing on `(0, N]`: on each segment its derivative has
//! the sign of `a_{n-1} b_n - b_{n-1} a_n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack when comparing consecutive ratios `b_n / a_n`.
pub const RATIO_TOLERANCE: f64 = 1e-12;

/// Finite prefixes `a_1..a_N` and `b_1..b_N` of two norming sequences.
///
/// Both are strictly increasing and positive, and `b_n / a_n` is nondecreasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormingPair {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl NormingPair {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        check_sequence("a", &a)?;
        check_sequence("b", &b)?;
        if a.len() != b.len() {
            return Err(Error::InvalidNorming(format!(
                "a has {} terms but b has {}",
                a.len(),
                b.len()
            )));
        }
        check_ratio_nondecreasing(&a, &b)?;
        Ok(NormingPair { a, b })
    }

    /// `a_n = n^a_exponent`, `b_n = n^b_exponent` for `n = 1..=len`.
    pub fn power(a_exponent: f64, b_exponent: f64, len: usize) -> Result<Self> {
        NormingPair::new(
            power_sequence(a_exponent, len)?,
            power_sequence(b_exponent, len)?,
        )
    }

    /// Number of stored terms `N`.
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// `a_n` for `1 <= n <= N`.
    pub fn a(&self, n: usize) -> f64 {
        self.a[n - 1]
    }

    /// `b_n` for `1 <= n <= N`.
    pub fn b(&self, n: usize) -> f64 {
        self.b[n - 1]
    }

    pub fn a_values(&self) -> &[f64] {
        &self.a
    }

    pub fn b_values(&self) -> &[f64] {
        &self.b
    }

    /// Checks that `b_n / n^(1/p)` is nondecreasing with `p` in `[1, 2)`.
    pub fn check_stable_type_norming(&self, p: f64) -> Result<()> {
        if !(1.0..2.0).contains(&p) {
            return Err(Error::InvalidNorming(format!(
                "p must lie in [1, 2), got {p}"
            )));
        }
        let reference = power_sequence(1.0 / p, self.len())?;
        check_ratio_nondecreasing(&reference, &self.b).map_err(|e| match e {
            Error::RatioDecreasing { index, .. } => {
                Error::InvalidNorming(format!("b_n / n^(1/{p}) decreases at n = {index}"))
            }
            other => other,
        })
    }
}

fn power_sequence(exponent: f64, len: usize) -> Result<Vec<f64>> {
    if !(exponent.is_finite() && exponent > 0.0) {
        return Err(Error::InvalidNorming(format!(
            "power family exponent must be positive, got {exponent}"
        )));
    }
    Ok((1..=len).map(|n| (n as f64).powf(exponent)).collect())
}

fn check_sequence(name: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::InvalidNorming(format!("{name} is empty")));
    }
    if let Some(i) = xs.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::InvalidNorming(format!(
            "{name}_{} = {} is not a positive finite number",
            i + 1,
            xs[i]
        )));
    }
    if let Some(i) = xs.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::InvalidNorming(format!(
            "{name} is not strictly increasing at n = {}",
            i + 2
        )));
    }
    Ok(())
}

fn check_ratio_nondecreasing(a: &[f64], b: &[f64]) -> Result<()> {
    let mut previous = b[0] / a[0];
    for (i, (x, y)) in a.iter().zip(b).enumerate().skip(1) {
        let current = y / x;
        if current < previous * (1.0 - RATIO_TOLERANCE) {
            return Err(Error::RatioDecreasing {
                index: i + 1,
                previous,
                current,
            });
        }
        previous = current;
    }
    Ok(())
}

/// Continuous, strictly increasing piecewise-linear `phi` and `psi` on `[0, N]`
/// with breakpoints at the integers.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionPair {
    // knots[k] = value at t = k, with knots[0] = 0.
    phi: Vec<f64>,
    psi: Vec<f64>,
}

/// Which interpolant an inverse or evaluation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Curve {
    Phi,
    Psi,
}

impl FunctionPair {
    /// Interpolates a validated norming pair.
    pub fn build(pair: &NormingPair) -> Result<Self> {
        check_ratio_nondecreasing(&pair.a, &pair.b)?;
        Ok(Self::from_prefixes(&pair.a, &pair.b))
    }

    /// Interpolates arbitrary strictly increasing positive prefixes without the
    /// ratio condition. Intended for diagnostics such as [`Self::check_ratio_monotone`].
    pub fn interpolate_unchecked(a: &[f64], b: &[f64]) -> Result<Self> {
        check_sequence("a", a)?;
        check_sequence("b", b)?;
        if a.len() != b.len() {
            return Err(Error::InvalidNorming("a and b differ in length".into()));
        }
        Ok(Self::from_prefixes(a, b))
    }

    fn from_prefixes(a: &[f64], b: &[f64]) -> Self {
        let knots = |xs: &[f64]| std::iter::once(0.0).chain(xs.iter().copied()).collect();
        FunctionPair {
            phi: knots(a),
            psi: knots(b),
        }
    }

    /// Largest breakpoint `N`.
    pub fn horizon(&self) -> usize {
        self.phi.len() - 1
    }

    /// `a_n = phi(n)`.
    pub fn a(&self, n: usize) -> f64 {
        self.phi[n]
    }

    /// `b_n = psi(n)`.
    pub fn b(&self, n: usize) -> f64 {
        self.psi[n]
    }

    fn knots(&self, curve: Curve) -> &[f64] {
        match curve {
            Curve::Phi => &self.phi,
            Curve::Psi => &self.psi,
        }
    }

    fn check_t(&self, t: f64) -> Result<()> {
        let high = self.horizon() as f64;
        if !(0.0..=high).contains(&t) {
            return Err(Error::Domain {
                value: t,
                low: 0.0,
                high,
            });
        }
        Ok(())
    }

    pub fn eval_phi(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        Ok(interpolate(&self.phi, t))
    }

    pub fn eval_psi(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        Ok(interpolate(&self.psi, t))
    }

    pub fn eval_psi_inverse(&self, s: f64) -> Result<f64> {
        self.inverse(Curve::Psi, s)
    }

    pub fn eval_phi_inverse(&self, s: f64) -> Result<f64> {
        self.inverse(Curve::Phi, s)
    }

    fn inverse(&self, curve: Curve, s: f64) -> Result<f64> {
        let knots = self.knots(curve);
        let high = *knots.last().expect("knots never empty");
        if !(0.0..=high).contains(&s) {
            return Err(Error::Domain {
                value: s,
                low: 0.0,
                high,
            });
        }
        Ok(invert(knots, s))
    }

    /// `phi` continued linearly past `N` along its last segment.
    pub fn eval_phi_extended(&self, t: f64) -> f64 {
        extended(&self.phi, t)
    }

    /// `psi^{-1}` continued linearly past `b_N` along the last segment of `psi`.
    pub fn eval_psi_inverse_extended(&self, s: f64) -> f64 {
        let n = self.horizon();
        if s <= self.psi[n] {
            invert(&self.psi, s.max(0.0))
        } else {
            n as f64 + (s - self.psi[n]) / (self.psi[n] - self.psi[n - 1])
        }
    }

    /// `psi(t) / phi(t)` for `t > 0`; at `t = 0` the limit `b_1 / a_1`.
    pub fn ratio(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        if t == 0.0 {
            return Ok(self.psi[1] / self.phi[1]);
        }
        Ok(interpolate(&self.psi, t) / interpolate(&self.phi, t))
    }

    /// Scans `psi / phi` on `t = j / points_per_unit` for `j = 0..=N * points_per_unit`
    /// and reports the first grid point where it decreases by more than
    /// [`RATIO_TOLERANCE`] relative.
    pub fn check_ratio_monotone(&self, points_per_unit: usize) -> RatioCheck {
        let points_per_unit = points_per_unit.max(2);
        let steps = self.horizon() * points_per_unit;
        let mut previous = self.psi[1] / self.phi[1];
        for j in 1..=steps {
            let t = j as f64 / points_per_unit as f64;
            let current = interpolate(&self.psi, t) / interpolate(&self.phi, t);
            if current < previous * (1.0 - RATIO_TOLERANCE) {
                return RatioCheck {
                    monotone: false,
                    first_violation: Some(t),
                };
            }
            previous = current;
        }
        RatioCheck {
            monotone: true,
            first_violation: None,
        }
    }
}

/// Outcome of [`FunctionPair::check_ratio_monotone`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioCheck {
    pub monotone: bool,
    pub first_violation: Option<f64>,
}

#[inline]
fn interpolate(knots: &[f64], t: f64) -> f64 {
    let k = t.floor();
    let i = k as usize;
    if k == t {
        return knots[i];
    }
    knots[i] + (knots[i + 1] - knots[i]) * (t - k)
}

#[inline]
fn invert(knots: &[f64], s: f64) -> f64 {
    // First knot strictly greater than s; s lies on [knots[i-1], knots[i]).
    let i = knots.partition_point(|&x| x <= s);
    if i == knots.len() {
        return (knots.len() - 1) as f64;
    }
    let lo = knots[i - 1];
    if s == lo {
        return (i - 1) as f64;
    }
    (i - 1) as f64 + (s - lo) / (knots[i] - lo)
}

#[inline]
fn extended(knots: &[f64], t: f64) -> f64 {
    let n = knots.len() - 1;
    if t <= n as f64 {
        interpolate(knots, t.max(0.0))
    } else {
        knots[n] + (knots[n] - knots[n - 1]) * (t - n as f64)
    }
}
