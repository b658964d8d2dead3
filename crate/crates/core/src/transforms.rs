//! Deterministic sample-path operators: the radial rescaling
//! `v -> phi(psi^{-1}(||v||)) v / ||v||`, truncation, the desymmetrization
//! split, and the truncated-mean centering `gamma_n = n E[X 1{||X|| <= b_n}]`.

use crate::error::{Error, Result};
use crate::norming::FunctionPair;
use crate::sources::{DistributionSpec, Kind, Lane, Sampler, StreamKey};
use crate::space::{norm_coords, CompensatedSum, SpaceSpec, Vector};

/// Norms within this relative distance of `b_n` count as `<= b_n`, and their
/// images count as `<= a_n`.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

/// Binds a function pair, a space, and the current index `n`.
#[derive(Debug, Clone, Copy)]
pub struct TransformContext<'a> {
    functions: &'a FunctionPair,
    space: SpaceSpec,
    n: usize,
}

impl<'a> TransformContext<'a> {
    pub fn new(functions: &'a FunctionPair, space: SpaceSpec, n: usize) -> Result<Self> {
        space.validate()?;
        if n == 0 || n > functions.horizon() {
            return Err(Error::Config(format!(
                "index n = {n} outside 1..={}",
                functions.horizon()
            )));
        }
        Ok(TransformContext {
            functions,
            space,
            n,
        })
    }

    pub fn functions(&self) -> &FunctionPair {
        self.functions
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a_n(&self) -> f64 {
        self.functions.a(self.n)
    }

    pub fn b_n(&self) -> f64 {
        self.functions.b(self.n)
    }

    /// `phi(psi^{-1}(r)) / r` for `0 < r <= psi(N)` (up to the boundary tolerance).
    pub fn radial_factor(&self, r: f64) -> Result<f64> {
        let f = self.functions;
        let top = f.b(f.horizon());
        if r > top * (1.0 + BOUNDARY_TOLERANCE) {
            return Err(Error::Domain {
                value: r,
                low: 0.0,
                high: top,
            });
        }
        let s = r.min(top);
        Ok(f.eval_phi(f.eval_psi_inverse(s)?)? / r)
    }

    pub fn rescale(&self, v: &Vector) -> Result<Vector> {
        let r = self.space.norm(v)?;
        if r == 0.0 {
            return Ok(self.space.zero());
        }
        let factor = self.radial_factor(r)?;
        self.space.scale(factor, v)
    }

    /// Indicators of `{||v|| <= b_n}` and `{||rescale(v)|| <= a_n}`. Norms past
    /// `psi(N)` use the linear continuation of both interpolants.
    pub fn event_indicators(&self, v: &Vector) -> Result<(bool, bool)> {
        let r = self.space.norm(v)?;
        let b = self.b_n();
        if (r - b).abs() <= BOUNDARY_TOLERANCE * b {
            return Ok((true, true));
        }
        let f = self.functions;
        let image = if r > f.b(f.horizon()) * (1.0 + BOUNDARY_TOLERANCE) {
            let factor = radial_factor_extended(f, r);
            self.space.norm(&self.space.scale(factor, v)?)?
        } else {
            self.space.norm(&self.rescale(v)?)?
        };
        Ok((r <= b, image <= self.a_n()))
    }

    pub fn event_identity_holds(&self, v: &Vector) -> Result<bool> {
        let (before, after) = self.event_indicators(v)?;
        Ok(before == after)
    }
}

/// `phi(psi^{-1}(r)) / r` with both interpolants continued linearly past `N`;
/// defined for every `r > 0`.
#[inline]
pub fn radial_factor_extended(functions: &FunctionPair, r: f64) -> f64 {
    functions.eval_phi_extended(functions.eval_psi_inverse_extended(r)) / r
}

/// `v` when `||v|| <= threshold`, otherwise zero.
pub fn truncate(space: &SpaceSpec, v: &Vector, threshold: f64) -> Result<Vector> {
    if threshold < 0.0 {
        return Err(Error::Config(format!("negative threshold {threshold}")));
    }
    if space.norm(v)? <= threshold {
        Ok(v.clone())
    } else {
        Ok(space.zero())
    }
}

/// The two sums whose average is the truncated sum.
#[derive(Debug, Clone, PartialEq)]
pub struct DesymmetrizedSplit {
    /// `sum T_i`.
    pub sum_kept: Vector,
    /// `sum (T_i 1{||T_i|| <= c} - T_i 1{||T_i|| > c})`.
    pub flipped_sum: Vector,
}

impl DesymmetrizedSplit {
    /// `(sum_kept + flipped_sum) / 2`, which equals `sum truncate(T_i, c)`.
    pub fn half_sum(&self) -> Vector {
        let coords = self
            .sum_kept
            .coords()
            .iter()
            .zip(self.flipped_sum.coords())
            .map(|(a, b)| (a + b) / 2.0)
            .collect();
        Vector::from_coords_unchecked(coords)
    }
}

pub fn desymmetrize_split(
    space: &SpaceSpec,
    terms: &[Vector],
    threshold: f64,
) -> Result<DesymmetrizedSplit> {
    let mut kept = vec![CompensatedSum::default(); space.dim];
    let mut flipped = vec![CompensatedSum::default(); space.dim];
    for t in terms {
        let sign = if space.norm(t)? <= threshold {
            1.0
        } else {
            -1.0
        };
        for ((k, f), &x) in kept.iter_mut().zip(flipped.iter_mut()).zip(t.coords()) {
            k.add(x);
            f.add(sign * x);
        }
    }
    let finish =
        |acc: Vec<CompensatedSum>| Vector::new(acc.into_iter().map(|c| c.value()).collect());
    Ok(DesymmetrizedSplit {
        sum_kept: finish(kept)?,
        flipped_sum: finish(flipped)?,
    })
}

/// How to evaluate `gamma_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CenteringMode {
    Analytic,
    /// `replications` fresh draws from the [`Lane::Centering`] substream of `key`.
    MonteCarlo {
        replications: u64,
        key: StreamKey,
    },
}

/// `gamma_n` and its per-coordinate Monte Carlo standard error (zero when analytic).
#[derive(Debug, Clone, PartialEq)]
pub struct Centering {
    pub value: Vector,
    pub std_error: Vector,
}

pub fn gamma_n(
    spec: &DistributionSpec,
    space: &SpaceSpec,
    b_n: f64,
    n: usize,
    mode: CenteringMode,
) -> Result<Centering> {
    let scale = n as f64;
    match mode {
        CenteringMode::Analytic => {
            let mean = truncated_mean(spec, space, b_n)?;
            Ok(Centering {
                value: Vector::new(mean.iter().map(|m| scale * m).collect())?,
                std_error: space.zero(),
            })
        }
        CenteringMode::MonteCarlo { replications, key } => {
            if replications < 2 {
                return Err(Error::Config("centering needs at least 2 draws".into()));
            }
            let sampler = Sampler::new(spec, space)?;
            let mut rng = key.with_lane(Lane::Centering).rng();
            let mut buf = vec![0.0; space.dim];
            let mut sum = vec![CompensatedSum::default(); space.dim];
            let mut sum_sq = vec![CompensatedSum::default(); space.dim];
            for _ in 0..replications {
                sampler.sample_into(&mut rng, &mut buf);
                if norm_coords(&buf, space.q) <= b_n {
                    for ((s, s2), &x) in sum.iter_mut().zip(sum_sq.iter_mut()).zip(&buf) {
                        s.add(x);
                        s2.add(x * x);
                    }
                }
            }
            let r = replications as f64;
            let mut value = Vec::with_capacity(space.dim);
            let mut std_error = Vec::with_capacity(space.dim);
            for (s, s2) in sum.into_iter().zip(sum_sq) {
                let mean = s.value() / r;
                let var = (s2.value() / r - mean * mean).max(0.0) * r / (r - 1.0);
                value.push(scale * mean);
                std_error.push(scale * (var / r).sqrt());
            }
            Ok(Centering {
                value: Vector::new(value)?,
                std_error: Vector::new(std_error)?,
            })
        }
    }
}

/// `E[X 1{||X|| <= b}]` in closed form.
fn truncated_mean(spec: &DistributionSpec, space: &SpaceSpec, b: f64) -> Result<Vec<f64>> {
    if spec.is_symmetric() {
        return Ok(vec![0.0; space.dim]);
    }
    let unsupported = || Error::NoClosedForm(format!("truncated mean of {}", spec.describe()));
    match &spec.kind {
        Kind::PointMass { value } => {
            space.conforms(value)?;
            Ok(if norm_coords(value.coords(), space.q) <= b {
                value.coords().to_vec()
            } else {
                vec![0.0; space.dim]
            })
        }
        _ if space.dim != 1 => Err(unsupported()),
        Kind::Pareto { alpha } => {
            let (_, m1) = pareto_moments(*alpha, 1.0, 1.0, b);
            Ok(vec![m1])
        }
        Kind::Shifted { base, shift } => {
            let s = shift.coords()[0];
            let (lo, hi) = (-b - s, b - s);
            let (m0, m1) = scalar_moments(base, lo, hi).ok_or_else(unsupported)?;
            Ok(vec![m1 + s * m0])
        }
        _ => Err(unsupported()),
    }
}

/// `(P(Y in [lo, hi]), E[Y; Y in [lo, hi]])` for a scalar base law `Y`.
fn scalar_moments(spec: &DistributionSpec, lo: f64, hi: f64) -> Option<(f64, f64)> {
    if hi < lo {
        return Some((0.0, 0.0));
    }
    match &spec.kind {
        Kind::Pareto { alpha } => Some(pareto_moments(*alpha, 1.0, lo, hi)),
        Kind::ParetoSymmetric { alpha } => {
            let (p0, p1) = pareto_moments(*alpha, 0.5, lo, hi);
            // Negative half: Y = -Z with Z on [-hi, -lo].
            let (n0, n1) = pareto_moments(*alpha, 0.5, -hi, -lo);
            Some((p0 + n0, p1 - n1))
        }
        Kind::UniformBall { radius } => {
            let (a, c) = (lo.max(-radius), hi.min(*radius));
            if c <= a {
                return Some((0.0, 0.0));
            }
            Some(((c - a) / (2.0 * radius), (c * c - a * a) / (4.0 * radius)))
        }
        Kind::PointMass { value } => {
            let x = value.coords()[0];
            Some(if (lo..=hi).contains(&x) {
                (1.0, x)
            } else {
                (0.0, 0.0)
            })
        }
        _ => None,
    }
}

/// Mass and first moment over `[lo, hi]` of `weight * alpha * y^(-alpha-1)` on `[1, inf)`.
fn pareto_moments(alpha: f64, weight: f64, lo: f64, hi: f64) -> (f64, f64) {
    let lo = lo.max(1.0);
    if hi <= lo {
        return (0.0, 0.0);
    }
    let mass = weight * (lo.powf(-alpha) - hi.powf(-alpha));
    let first = if alpha == 1.0 {
        weight * (hi / lo).ln()
    } else {
        weight * alpha * (hi.powf(1.0 - alpha) - lo.powf(1.0 - alpha)) / (1.0 - alpha)
    };
    (mass, first)
}
