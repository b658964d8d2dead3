//! Finite-dimensional normed spaces: R^d under an l_q norm.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The exponent `q` of an l_q norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormExponent {
    Finite(f64),
    Infinity,
}

impl NormExponent {
    pub fn is_valid(self) -> bool {
        match self {
            NormExponent::Finite(q) => q.is_finite() && q >= 1.0,
            NormExponent::Infinity => true,
        }
    }

    /// `1/q`, with `1/inf = 0`.
    pub fn reciprocal(self) -> f64 {
        match self {
            NormExponent::Finite(q) => 1.0 / q,
            NormExponent::Infinity => 0.0,
        }
    }
}

impl fmt::Display for NormExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormExponent::Finite(q) => write!(f, "{q}"),
            NormExponent::Infinity => f.write_str("inf"),
        }
    }
}

// JSON form: a number, or the string "inf".
impl Serialize for NormExponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NormExponent::Finite(q) => s.serialize_f64(*q),
            NormExponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for NormExponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(q) => Ok(NormExponent::Finite(q)),
            Raw::Text(s) if matches!(s.as_str(), "inf" | "infinity" | "max") => {
                Ok(NormExponent::Infinity)
            }
            Raw::Text(s) => Err(serde::de::Error::custom(format!(
                "norm exponent must be a number >= 1 or \"inf\", got {s:?}"
            ))),
        }
    }
}

/// Descriptor of the space l_q^dim.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub dim: usize,
    pub q: NormExponent,
}

/// An element of a finite-dimensional space. All coordinates are finite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(index) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Vector(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn scalar(x: f64) -> Result<Self> {
        Vector::new(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    // Callers inside the crate guarantee finiteness.
    pub(crate) fn from_coords_unchecked(coords: Vec<f64>) -> Self {
        Vector(coords)
    }
}

impl<'de> Deserialize<'de> for Vector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let coords = Vec::<f64>::deserialize(d)?;
        Vector::new(coords).map_err(serde::de::Error::custom)
    }
}

impl SpaceSpec {
    pub fn new(dim: usize, q: NormExponent) -> Result<Self> {
        let space = SpaceSpec { dim, q };
        space.validate()?;
        Ok(space)
    }

    pub fn real_line() -> Self {
        SpaceSpec {
            dim: 1,
            q: NormExponent::Finite(2.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidSpace("dim must be at least 1".into()));
        }
        if !self.q.is_valid() {
            return Err(Error::InvalidSpace(format!(
                "norm exponent must be >= 1 or inf, got {}",
                self.q
            )));
        }
        Ok(())
    }

    pub fn conforms(&self, v: &Vector) -> Result<()> {
        if v.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.dim(),
            });
        }
        Ok(())
    }

    pub fn zero(&self) -> Vector {
        Vector::zeros(self.dim)
    }

    pub fn norm(&self, v: &Vector) -> Result<f64> {
        self.conforms(v)?;
        Ok(norm_coords(v.coords(), self.q))
    }

    pub fn add(&self, u: &Vector, v: &Vector) -> Result<Vector> {
        self.conforms(u)?;
        self.conforms(v)?;
        let coords = u.0.iter().zip(&v.0).map(|(a, b)| a + b).collect();
        Vector::new(coords)
    }

    pub fn scale(&self, c: f64, v: &Vector) -> Result<Vector> {
        self.conforms(v)?;
        Vector::new(v.0.iter().map(|x| c * x).collect())
    }

    /// Coordinatewise sum with compensated accumulation; the empty sum is zero.
    pub fn sum<'a, I>(&self, vectors: I) -> Result<Vector>
    where
        I: IntoIterator<Item = &'a Vector>,
    {
        let mut acc = vec![CompensatedSum::default(); self.dim];
        for v in vectors {
            self.conforms(v)?;
            for (slot, &x) in acc.iter_mut().zip(&v.0) {
                slot.add(x);
            }
        }
        Vector::new(acc.into_iter().map(CompensatedSum::value).collect())
    }
}

impl fmt::Display for SpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}^{}", self.q, self.dim)
    }
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.sum + self.carry
    }
}

/// l_q norm of a coordinate slice. For a single coordinate this is exactly `|x|`.
#[inline]
pub fn norm_coords(coords: &[f64], q: NormExponent) -> f64 {
    if coords.len() == 1 {
        return coords[0].abs();
    }
    match q {
        NormExponent::Infinity => coords.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
        NormExponent::Finite(1.0) => {
            let mut acc = CompensatedSum::default();
            for x in coords {
                acc.add(x.abs());
            }
            acc.value()
        }
        NormExponent::Finite(2.0) => {
            let mut acc = CompensatedSum::default();
            for x in coords {
                acc.add(x * x);
            }
            let s = acc.value();
            if s.is_finite() && s > f64::MIN_POSITIVE {
                s.sqrt()
            } else {
                scaled_power_norm(coords, 2.0)
            }
        }
        NormExponent::Finite(q) => scaled_power_norm(coords, q),
    }
}

// m * (sum (|x|/m)^q)^(1/q) with m = max |x|; immune to overflow and underflow.
fn scaled_power_norm(coords: &[f64], q: f64) -> f64 {
    let m = coords.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let mut acc = CompensatedSum::default();
    for x in coords {
        acc.add((x.abs() / m).powf(q));
    }
    m * acc.value().powf(1.0 / q)
}
