//! Random configurations for sweeps over fixed-vector checks.

use rand::Rng;

use crate::error::Result;
use crate::norming::{FunctionPair, NormingPair};
use crate::sources::{Lane, StreamKey, StreamRng};
use crate::space::{norm_coords, NormExponent, SpaceSpec, Vector};

/// A random instance for the sign-sum checks.
#[derive(Debug, Clone)]
pub struct FixedVectorCase {
    pub space: SpaceSpec,
    pub pair: NormingPair,
    pub functions: FunctionPair,
    /// `n = vectors.len()` vectors with `||x_i|| <= b_n`.
    pub vectors: Vec<Vector>,
    /// Contraction weights in `[-1, 1]`.
    pub alpha: Vec<f64>,
}

/// A valid norming pair of length `len`: `a` has random positive increments and
/// the ratio `b_n / a_n` grows by random nonnegative factors, sometimes staying flat.
pub fn random_norming_pair(rng: &mut StreamRng, len: usize) -> Result<NormingPair> {
    if rng.gen_bool(0.25) {
        let a_exp = rng.gen_range(0.3..=1.0);
        let b_exp = rng.gen_range(a_exp..=a_exp + 0.7);
        return NormingPair::power(a_exp, b_exp, len);
    }
    let mut a = Vec::with_capacity(len);
    let mut b = Vec::with_capacity(len);
    let mut an = rng.gen_range(0.2..2.0);
    let mut ratio = rng.gen_range(0.5..3.0);
    for _ in 0..len {
        a.push(an);
        b.push(an * ratio);
        an += rng.gen_range(0.05..2.0);
        if rng.gen_bool(0.7) {
            ratio *= 1.0 + rng.gen_range(0.0..0.4);
        }
    }
    NormingPair::new(a, b)
}

fn random_direction(rng: &mut StreamRng, space: &SpaceSpec) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..space.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = norm_coords(&v, space.q);
        if r > 1e-3 {
            return v.into_iter().map(|c| c / r).collect();
        }
    }
}

/// Case `index` of the sweep seeded by `seed`, with `1 <= n <= max_n`, dimension
/// 1 to 4 and `q` in `{1, 2, inf}`. Some vectors sit exactly on `b_n`, on an
/// interior knot `b_k`, or at zero.
pub fn random_fixed_case(seed: u64, index: u64, max_n: usize) -> Result<FixedVectorCase> {
    let mut rng = StreamKey::new(seed, Lane::Configs, index).rng();
    let dim = rng.gen_range(1..=4);
    let q = match rng.gen_range(0..3) {
        0 => NormExponent::Finite(1.0),
        1 => NormExponent::Finite(2.0),
        _ => NormExponent::Infinity,
    };
    let space = SpaceSpec::new(dim, q)?;
    let n = rng.gen_range(1..=max_n.max(1));
    let pair = random_norming_pair(&mut rng, n)?;
    let functions = FunctionPair::build(&pair)?;
    let b_n = pair.b(n);
    let vectors = (0..n)
        .map(|_| {
            let radius = match rng.gen_range(0..20) {
                0 => 0.0,
                1..=3 => b_n,
                4..=7 => pair.b(rng.gen_range(1..=n)),
                _ => b_n * rng.gen_range(0.0..1.0f64),
            };
            let dir = random_direction(&mut rng, &space);
            // Rounding can push the norm past b_n by an ulp; the boundary rule absorbs it.
            Vector::new(dir.into_iter().map(|c| c * radius).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let alpha = (0..n)
        .map(|_| match rng.gen_range(0..20) {
            0 => 1.0,
            1 => -1.0,
            2 => 0.0,
            _ => rng.gen_range(-1.0..=1.0),
        })
        .collect();
    Ok(FixedVectorCase {
        space,
        pair,
        functions,
        vectors,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::MonteCarlo;
    use crate::sources::{DistributionSpec, Lifting};
    use crate::suite::{
        check_contraction, check_levy, check_rescaled_signs, check_rescaled_symmetric, Mode,
        Verdict,
    };

    #[test]
    fn cases_are_valid_and_reproducible() {
        for i in 0..50 {
            let c = random_fixed_case(1, i, 12).unwrap();
            let again = random_fixed_case(1, i, 12).unwrap();
            assert_eq!(c.vectors, again.vectors);
            let n = c.vectors.len();
            assert!((1..=12).contains(&n));
            for v in &c.vectors {
                assert!(c.space.norm(v).unwrap() <= c.pair.b(n) * (1.0 + 1e-12));
            }
            assert!(c.alpha.iter().all(|a| a.abs() <= 1.0));
        }
    }

    #[test]
    fn exact_sweep_never_violates() {
        for i in 0..40 {
            let c = random_fixed_case(2, i, 10).unwrap();
            let reports =
                check_rescaled_signs(&c.vectors, &c.functions, &c.space, None, Mode::Exact)
                    .unwrap();
            assert!(
                reports.iter().all(|r| r.verdict == Verdict::Holds),
                "case {i}"
            );
            let reports =
                check_contraction(&c.vectors, &c.alpha, &c.space, None, Mode::Exact).unwrap();
            assert!(
                reports.iter().all(|r| r.verdict == Verdict::Holds),
                "case {i}"
            );
        }
    }

    #[test]
    fn monte_carlo_sweep_has_no_significant_violation() {
        let mut configs = 0;
        for i in 0..120 {
            let c = random_fixed_case(3, i, 12).unwrap();
            let mc = MonteCarlo::new(2_000, 100 + i);
            for r in check_rescaled_signs(
                &c.vectors,
                &c.functions,
                &c.space,
                None,
                Mode::MonteCarlo(mc),
            )
            .unwrap()
            .into_iter()
            .chain(
                check_contraction(&c.vectors, &c.alpha, &c.space, None, Mode::MonteCarlo(mc))
                    .unwrap(),
            ) {
                assert_ne!(r.verdict, Verdict::Violated, "case {i} t {}", r.t);
            }
            configs += 2;
        }
        let laws = [
            DistributionSpec::pareto_symmetric(0.8),
            DistributionSpec::pareto_symmetric(1.7),
            DistributionSpec::stable_symmetric(1.2),
            DistributionSpec::rademacher(),
        ];
        for i in 0..40u64 {
            let c = random_fixed_case(4, i, 1).unwrap();
            let mut rng = StreamKey::new(4, Lane::Configs, 1_000 + i).rng();
            let n = [4usize, 16, 32][rng.gen_range(0..3)];
            let pair = random_norming_pair(&mut rng, n).unwrap();
            let functions = FunctionPair::build(&pair).unwrap();
            let lifting = if c.space.dim == 1 {
                Lifting::Scalar
            } else if i % 2 == 0 {
                Lifting::Radial
            } else {
                Lifting::IidCoordinates
            };
            let spec = laws[i as usize % laws.len()].clone().with_lifting(lifting);
            let mc = MonteCarlo::new(2_000, 500 + i);
            for r in check_rescaled_symmetric(&spec, &c.space, &functions, n, None, &mc).unwrap() {
                assert_ne!(r.verdict, Verdict::Violated, "case {i} t {}", r.t);
            }
            for r in check_levy(&spec, &c.space, n, pair.b(n), None, Mode::MonteCarlo(mc)).unwrap()
            {
                assert_ne!(r.verdict, Verdict::Violated, "case {i} t {}", r.t);
            }
            configs += 2;
        }
        assert!(configs >= 200);
    }
}
