use std::f64::consts::{FRAC_2_PI, PI};

use rand_distr::{Distribution as _, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::space::{norm_coords, NormExponent, SpaceSpec, Vector};

use super::stream::{Lane, StreamKey, StreamRng};

/// How a scalar law becomes a law on `R^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lifting {
    /// Only valid when `dim = 1`.
    #[default]
    Scalar,
    /// Every coordinate drawn independently from the scalar law, scaled by `dim^(-1/q)`.
    IidCoordinates,
    /// A random direction on the unit sphere times the absolute value of a scalar draw.
    Radial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kind {
    Rademacher,
    /// `P(|X| > t) = min(1, t^-alpha)` with an independent fair sign.
    ParetoSymmetric {
        alpha: f64,
    },
    /// One-sided: density `alpha t^(-alpha-1)` on `[1, inf)`.
    Pareto {
        alpha: f64,
    },
    /// Characteristic function `exp(-|t|^alpha)`.
    StableSymmetric {
        alpha: f64,
    },
    /// Uniform on the closed norm ball of the space; ignores the lifting.
    UniformBall {
        radius: f64,
    },
    PointMass {
        value: Vector,
    },
    Shifted {
        base: Box<DistributionSpec>,
        shift: Vector,
    },
}

/// A law for i.i.d. draws, as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    #[serde(flatten)]
    pub kind: Kind,
    #[serde(default)]
    pub lifting: Lifting,
}

impl DistributionSpec {
    pub fn new(kind: Kind, lifting: Lifting) -> Self {
        DistributionSpec { kind, lifting }
    }

    pub fn scalar(kind: Kind) -> Self {
        DistributionSpec::new(kind, Lifting::Scalar)
    }

    pub fn rademacher() -> Self {
        Self::scalar(Kind::Rademacher)
    }

    pub fn pareto_symmetric(alpha: f64) -> Self {
        Self::scalar(Kind::ParetoSymmetric { alpha })
    }

    pub fn stable_symmetric(alpha: f64) -> Self {
        Self::scalar(Kind::StableSymmetric { alpha })
    }

    pub fn with_lifting(self, lifting: Lifting) -> Self {
        DistributionSpec { lifting, ..self }
    }

    /// Whether `X` and `-X` have the same law.
    pub fn is_symmetric(&self) -> bool {
        match &self.kind {
            Kind::Rademacher
            | Kind::ParetoSymmetric { .. }
            | Kind::StableSymmetric { .. }
            | Kind::UniformBall { .. } => true,
            // A uniformly random direction symmetrizes any radius law.
            Kind::Pareto { .. } => self.lifting == Lifting::Radial,
            Kind::PointMass { value } => value.is_zero(),
            Kind::Shifted { base, shift } => shift.is_zero() && base.is_symmetric(),
        }
    }

    pub fn describe(&self) -> String {
        let lifting = match self.lifting {
            Lifting::Scalar => "",
            Lifting::IidCoordinates => "/iid",
            Lifting::Radial => "/radial",
        };
        let kind = match &self.kind {
            Kind::Rademacher => "rademacher".to_string(),
            Kind::ParetoSymmetric { alpha } => format!("pareto_symmetric({alpha})"),
            Kind::Pareto { alpha } => format!("pareto({alpha})"),
            Kind::StableSymmetric { alpha } => format!("stable_symmetric({alpha})"),
            Kind::UniformBall { radius } => format!("uniform_ball({radius})"),
            Kind::PointMass { value } => format!("point_mass({:?})", value.coords()),
            Kind::Shifted { base, shift } => {
                format!("shifted({}, {:?})", base.describe(), shift.coords())
            }
        };
        format!("{kind}{lifting}")
    }
}

#[derive(Debug, Clone)]
enum ScalarLaw {
    Rademacher,
    ParetoSymmetric { inv_alpha: f64 },
    Pareto { inv_alpha: f64 },
    Stable { alpha: f64 },
}

impl ScalarLaw {
    #[inline]
    fn draw(&self, rng: &mut StreamRng) -> f64 {
        match *self {
            ScalarLaw::Rademacher => rng.sign(),
            ScalarLaw::ParetoSymmetric { inv_alpha } => {
                let (u, sign) = rng.unit_and_sign();
                sign * u.powf(-inv_alpha)
            }
            ScalarLaw::Pareto { inv_alpha } => {
                let (u, _) = rng.unit_and_sign();
                u.powf(-inv_alpha)
            }
            ScalarLaw::Stable { alpha } => stable_symmetric(alpha, rng),
        }
    }
}

/// Chambers-Mallows-Stuck transform for the symmetric alpha-stable law with
/// characteristic function `exp(-|t|^alpha)`.
#[inline]
pub fn stable_symmetric(alpha: f64, rng: &mut StreamRng) -> f64 {
    let v = PI * (rng.open01() - 0.5);
    if alpha == 1.0 {
        return v.tan();
    }
    let w = rng.exponential();
    if alpha == 2.0 {
        return 2.0 * v.sin() * w.sqrt();
    }
    let inv_alpha = 1.0 / alpha;
    (alpha * v).sin() / v.cos().powf(inv_alpha)
        * ((v * (1.0 - alpha)).cos() / w).powf((1.0 - alpha) * inv_alpha)
}

#[derive(Debug, Clone)]
enum DirectionLaw {
    Gaussian,
    Cube,
    GeneralizedGaussian(Gamma<f64>, f64),
}

#[derive(Debug, Clone)]
enum Plan {
    Scalar(ScalarLaw),
    Iid(ScalarLaw, f64),
    Radial(ScalarLaw),
    UniformBall(f64),
    PointMass(Vec<f64>),
    Shifted(Box<Plan>, Vec<f64>),
}

/// A [`DistributionSpec`] validated against a space and ready to draw from.
#[derive(Debug, Clone)]
pub struct Sampler {
    spec: DistributionSpec,
    space: SpaceSpec,
    plan: Plan,
    direction: DirectionLaw,
}

fn check_alpha(name: &str, alpha: f64, max: Option<f64>) -> Result<()> {
    let ok = alpha.is_finite() && alpha > 0.0 && max.is_none_or(|m| alpha <= m);
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidDistribution(format!(
            "{name} index {alpha} out of range"
        )))
    }
}

fn plan_for(spec: &DistributionSpec, space: &SpaceSpec) -> Result<Plan> {
    let scalar = match &spec.kind {
        Kind::Rademacher => ScalarLaw::Rademacher,
        Kind::ParetoSymmetric { alpha } => {
            check_alpha("pareto tail", *alpha, None)?;
            ScalarLaw::ParetoSymmetric {
                inv_alpha: 1.0 / alpha,
            }
        }
        Kind::Pareto { alpha } => {
            check_alpha("pareto tail", *alpha, None)?;
            ScalarLaw::Pareto {
                inv_alpha: 1.0 / alpha,
            }
        }
        Kind::StableSymmetric { alpha } => {
            check_alpha("stability", *alpha, Some(2.0))?;
            ScalarLaw::Stable { alpha: *alpha }
        }
        Kind::UniformBall { radius } => {
            if !(radius.is_finite() && *radius > 0.0) {
                return Err(Error::InvalidDistribution(format!(
                    "uniform_ball radius must be positive, got {radius}"
                )));
            }
            return Ok(Plan::UniformBall(*radius));
        }
        Kind::PointMass { value } => {
            space.conforms(value)?;
            return Ok(Plan::PointMass(value.coords().to_vec()));
        }
        Kind::Shifted { base, shift } => {
            space.conforms(shift)?;
            let base_plan = plan_for(base, space)?;
            return Ok(Plan::Shifted(Box::new(base_plan), shift.coords().to_vec()));
        }
    };
    Ok(match spec.lifting {
        Lifting::Scalar if space.dim == 1 => Plan::Scalar(scalar),
        Lifting::Scalar => {
            return Err(Error::InvalidDistribution(format!(
                "scalar lifting needs a one-dimensional space, got dim {}",
                space.dim
            )))
        }
        Lifting::IidCoordinates => {
            Plan::Iid(scalar, (space.dim as f64).powf(-space.q.reciprocal()))
        }
        Lifting::Radial => Plan::Radial(scalar),
    })
}

impl Sampler {
    pub fn new(spec: &DistributionSpec, space: &SpaceSpec) -> Result<Self> {
        space.validate()?;
        let plan = plan_for(spec, space)?;
        let direction = match space.q {
            NormExponent::Infinity => DirectionLaw::Cube,
            NormExponent::Finite(2.0) => DirectionLaw::Gaussian,
            NormExponent::Finite(q) => DirectionLaw::GeneralizedGaussian(
                Gamma::new(1.0 / q, 1.0).map_err(|e| Error::InvalidDistribution(e.to_string()))?,
                1.0 / q,
            ),
        };
        Ok(Sampler {
            spec: spec.clone(),
            space: *space,
            plan,
            direction,
        })
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim
    }

    /// Writes one draw into `out`, which must have length `dim`.
    #[inline]
    pub fn sample_into(&self, rng: &mut StreamRng, out: &mut [f64]) {
        self.run_plan(&self.plan, rng, out);
    }

    fn run_plan(&self, plan: &Plan, rng: &mut StreamRng, out: &mut [f64]) {
        match plan {
            Plan::Scalar(law) => out[0] = law.draw(rng),
            Plan::Iid(law, scale) => {
                for x in out.iter_mut() {
                    *x = scale * law.draw(rng);
                }
            }
            Plan::Radial(law) => {
                let r = law.draw(rng).abs();
                self.direction_into(rng, out);
                for x in out.iter_mut() {
                    *x *= r;
                }
            }
            Plan::UniformBall(radius) => {
                if out.len() == 1 {
                    out[0] = radius * (2.0 * rng.open01() - 1.0);
                } else {
                    let r = radius * rng.open01().powf(1.0 / out.len() as f64);
                    self.direction_into(rng, out);
                    for x in out.iter_mut() {
                        *x *= r;
                    }
                }
            }
            Plan::PointMass(v) => out.copy_from_slice(v),
            Plan::Shifted(base, shift) => {
                self.run_plan(base, rng, out);
                for (x, s) in out.iter_mut().zip(shift) {
                    *x += s;
                }
            }
        }
    }

    /// A direction with unit norm drawn from the cone measure of the unit sphere.
    fn direction_into(&self, rng: &mut StreamRng, out: &mut [f64]) {
        if out.len() == 1 {
            out[0] = rng.sign();
            return;
        }
        loop {
            for x in out.iter_mut() {
                *x = match &self.direction {
                    DirectionLaw::Gaussian => StandardNormal.sample(rng),
                    DirectionLaw::Cube => 2.0 * rng.open01() - 1.0,
                    DirectionLaw::GeneralizedGaussian(gamma, inv_q) => {
                        rng.sign() * gamma.sample(rng).powf(*inv_q)
                    }
                };
            }
            let norm = norm_coords(out, self.space.q);
            if norm > 0.0 && norm.is_finite() {
                for x in out.iter_mut() {
                    *x /= norm;
                }
                return;
            }
        }
    }

    pub fn draw(&self, rng: &mut StreamRng) -> Vector {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        Vector::from_coords_unchecked(out)
    }

    /// `P(||X|| > t)` in closed form, when the law admits one.
    pub fn norm_tail(&self, t: f64) -> Option<f64> {
        norm_tail(&self.spec, &self.space, t)
    }

    /// The law as finitely many atoms with integer weights over a common denominator.
    pub fn finite_support(&self) -> Option<FiniteLaw> {
        finite_support(&self.spec, &self.space)
    }
}

fn norm_tail(spec: &DistributionSpec, space: &SpaceSpec, t: f64) -> Option<f64> {
    let t = t.max(0.0);
    // The norm of the draw equals |scalar| for these liftings.
    let radial_like = space.dim == 1 || spec.lifting == Lifting::Radial;
    match &spec.kind {
        // Every lifting of a sign vector has unit norm.
        Kind::Rademacher => Some(if t < 1.0 { 1.0 } else { 0.0 }),
        Kind::ParetoSymmetric { alpha } | Kind::Pareto { alpha } if radial_like => {
            Some(if t < 1.0 { 1.0 } else { t.powf(-alpha) })
        }
        Kind::StableSymmetric { alpha } if radial_like && *alpha == 1.0 => Some(if t == 0.0 {
            1.0
        } else {
            FRAC_2_PI * (1.0 / t).atan()
        }),
        Kind::StableSymmetric { alpha } if radial_like && *alpha == 2.0 => Some(erfc(t / 2.0)),
        Kind::UniformBall { radius } => Some(if t >= *radius {
            0.0
        } else {
            1.0 - (t / radius).powi(space.dim as i32)
        }),
        Kind::PointMass { value } => Some(if norm_coords(value.coords(), space.q) > t {
            1.0
        } else {
            0.0
        }),
        Kind::Shifted { base, shift } => match &base.kind {
            Kind::PointMass { value } => {
                let moved: Vec<f64> = value
                    .coords()
                    .iter()
                    .zip(shift.coords())
                    .map(|(a, b)| a + b)
                    .collect();
                Some(if norm_coords(&moved, space.q) > t {
                    1.0
                } else {
                    0.0
                })
            }
            _ => None,
        },
        _ => None,
    }
}

/// A law with finitely many atoms: `P(X = atoms[i].0) = atoms[i].1 / denominator`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteLaw {
    pub atoms: Vec<(Vec<f64>, u64)>,
    pub denominator: u64,
}

impl FiniteLaw {
    /// The law of `X - X'` for independent `X`, `X'` with this law.
    pub fn difference(&self) -> FiniteLaw {
        let mut atoms: Vec<(Vec<f64>, u64)> = Vec::new();
        for (x, wx) in &self.atoms {
            for (y, wy) in &self.atoms {
                let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                match atoms.iter_mut().find(|(z, _)| z == &d) {
                    Some((_, w)) => *w += wx * wy,
                    None => atoms.push((d, wx * wy)),
                }
            }
        }
        FiniteLaw {
            atoms,
            denominator: self.denominator * self.denominator,
        }
    }
}

fn finite_support(spec: &DistributionSpec, space: &SpaceSpec) -> Option<FiniteLaw> {
    match &spec.kind {
        Kind::Rademacher => {
            let dim = space.dim;
            let (scale, patterns) = match spec.lifting {
                Lifting::Scalar if dim == 1 => (1.0, 1usize),
                Lifting::Radial if dim == 1 => (1.0, 1),
                Lifting::IidCoordinates if dim < 16 => {
                    ((dim as f64).powf(-space.q.reciprocal()), dim)
                }
                _ => return None,
            };
            let atoms = (0..1u64 << patterns)
                .map(|mask| {
                    let coords = (0..dim)
                        .map(|i| if mask >> i & 1 == 0 { scale } else { -scale })
                        .collect();
                    (coords, 1)
                })
                .collect();
            Some(FiniteLaw {
                atoms,
                denominator: 1 << patterns,
            })
        }
        Kind::PointMass { value } => Some(FiniteLaw {
            atoms: vec![(value.coords().to_vec(), 1)],
            denominator: 1,
        }),
        Kind::Shifted { base, shift } => {
            let mut law = finite_support(base, space)?;
            for (x, _) in law.atoms.iter_mut() {
                for (c, s) in x.iter_mut().zip(shift.coords()) {
                    *c += s;
                }
            }
            Some(law)
        }
        _ => None,
    }
}

/// `count` i.i.d. draws from the substream `key`.
pub fn sample(
    spec: &DistributionSpec,
    space: &SpaceSpec,
    key: StreamKey,
    count: usize,
) -> Result<Vec<Vector>> {
    let sampler = Sampler::new(spec, space)?;
    let mut rng = key.rng();
    Ok((0..count).map(|_| sampler.draw(&mut rng)).collect())
}

/// `count` i.i.d. symmetric alpha-stable reals.
pub fn sample_stable(alpha: f64, key: StreamKey, count: usize) -> Result<Vec<f64>> {
    check_alpha("stability", alpha, Some(2.0))?;
    let mut rng = key.rng();
    Ok((0..count)
        .map(|_| stable_symmetric(alpha, &mut rng))
        .collect())
}

/// Yields `(X_i, X'_i)` where the copy comes from the [`Lane::Copy`] substream of
/// the same master seed and replication.
#[derive(Debug, Clone)]
pub struct PairedSampler {
    sampler: Sampler,
    primary: StreamRng,
    copy: StreamRng,
}

impl PairedSampler {
    pub fn next_pair(&mut self) -> (Vector, Vector) {
        let x = self.sampler.draw(&mut self.primary);
        let y = self.sampler.draw(&mut self.copy);
        (x, y)
    }
}

impl Iterator for PairedSampler {
    type Item = (Vector, Vector);

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.next_pair())
    }
}

pub fn independent_copy(
    spec: &DistributionSpec,
    space: &SpaceSpec,
    key: StreamKey,
) -> Result<PairedSampler> {
    let sampler = Sampler::new(spec, space)?;
    Ok(PairedSampler {
        sampler,
        primary: key.with_lane(Lane::Primary).rng(),
        copy: key.with_lane(Lane::Copy).rng(),
    })
}
