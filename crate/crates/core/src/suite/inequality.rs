use crate::error::{Error, Result};
use crate::estimator::{run_replications, sign_pattern_norms, JointCounts, MonteCarlo, Tally};
use crate::norming::FunctionPair;
use crate::sources::{DistributionSpec, FiniteLaw, Lane, Sampler, StreamRng};
use crate::space::{norm_coords, SpaceSpec, Vector};
use crate::transforms::{radial_factor_extended, TransformContext, BOUNDARY_TOLERANCE};

use super::{InequalityReport, Mode, TailTerm};

/// Largest number of joint support patterns enumerated by [`check_levy`].
pub const LEVY_PATTERN_LIMIT: u128 = 1 << 20;

const GRID_POINTS: usize = 50;

/// `points` equispaced values on `[0, upper]`.
pub fn equispaced_grid(upper: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points)
            .map(|k| upper * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// 25 log-spaced values on `[0.01, 10]` for checks over random vectors, where
/// no a priori range of the sums is known.
pub fn default_random_t_grid() -> Vec<f64> {
    let points = 25;
    (0..points)
        .map(|k| 10f64.powf(-2.0 + 3.0 * k as f64 / (points - 1) as f64))
        .collect()
}

fn validate_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::Config("empty t grid".into()));
    }
    if let Some(t) = t_grid.iter().find(|t| !t.is_finite() || **t < 0.0) {
        return Err(Error::Config(format!(
            "t grid value {t} must be finite and >= 0"
        )));
    }
    Ok(())
}

fn total_norm(space: &SpaceSpec, x: &[Vector]) -> Result<f64> {
    x.iter().map(|v| space.norm(v)).sum()
}

#[derive(Debug, Clone)]
struct GridTally {
    joint: Vec<JointCounts>,
    exceed: u64,
}

impl GridTally {
    fn new(points: usize) -> Self {
        GridTally {
            joint: vec![JointCounts::default(); points],
            exceed: 0,
        }
    }

    fn record(&mut self, thresholds: &[(f64, f64)], lhs: f64, rhs: f64) {
        for (j, &(tl, tr)) in self.joint.iter_mut().zip(thresholds) {
            j.record(lhs > tl, rhs > tr);
        }
    }
}

impl Tally for GridTally {
    fn merge(&mut self, other: Self) {
        self.joint.merge(other.joint);
        self.exceed += other.exceed;
    }
}

/// Joint counts over all `2^n` sign patterns, one table per threshold pair.
fn enumerate_signs(
    space: &SpaceSpec,
    lhs: (&[Vector], &[f64]),
    rhs: (&[Vector], &[f64]),
    thresholds: &[(f64, f64)],
) -> Result<Vec<JointCounts>> {
    let left = sign_pattern_norms(lhs.0, lhs.1, space)?;
    let right = sign_pattern_norms(rhs.0, rhs.1, space)?;
    let mut tally = GridTally::new(thresholds.len());
    for (l, r) in left.into_iter().zip(right) {
        tally.record(thresholds, l, r);
    }
    Ok(tally.joint)
}

/// Random signs applied to both weighted sequences on each replication.
fn simulate_signs(
    mc: &MonteCarlo,
    space: &SpaceSpec,
    lhs: (&[Vector], &[f64]),
    rhs: (&[Vector], &[f64]),
    thresholds: &[(f64, f64)],
) -> Result<Vec<JointCounts>> {
    mc.validate()?;
    let dim = space.dim;
    let tally = run_replications(
        mc,
        || GridTally::new(thresholds.len()),
        |rep, tally| {
            let mut rng = mc.key(Lane::Signs, rep).rng();
            let mut sl = vec![0.0; dim];
            let mut sr = vec![0.0; dim];
            for ((xl, wl), (xr, wr)) in lhs.0.iter().zip(lhs.1).zip(rhs.0.iter().zip(rhs.1)) {
                let e = rng.sign();
                for (s, c) in sl.iter_mut().zip(xl.coords()) {
                    *s += e * wl * c;
                }
                for (s, c) in sr.iter_mut().zip(xr.coords()) {
                    *s += e * wr * c;
                }
            }
            tally.record(
                thresholds,
                norm_coords(&sl, space.q),
                norm_coords(&sr, space.q),
            );
        },
    )?;
    Ok(tally.joint)
}

fn sign_reports(
    name: &str,
    summary: &str,
    n: usize,
    t_grid: &[f64],
    joint: Vec<JointCounts>,
    mode: Mode,
) -> Vec<InequalityReport> {
    t_grid
        .iter()
        .zip(joint)
        .map(|(&t, j)| match mode {
            Mode::Exact => InequalityReport::exact(name, summary, n, t, 2, j),
            Mode::MonteCarlo(mc) => {
                InequalityReport::monte_carlo(name, summary, n, t, 2, j, None, mc.confidence)
            }
        })
        .collect()
}

/// Checks `P(||sum R_i x_i|| > t b_n) <= 2 P(||sum R_i y_i|| > t a_n)` where
/// `y_i` is the radial rescaling of `x_i` and `n = x.len()`.
///
/// Requires `||x_i|| <= b_n` for every `i`. The default grid has 50 points on
/// `[0, 1.2 sum ||x_i|| / b_n]`.
pub fn check_rescaled_signs(
    x: &[Vector],
    functions: &FunctionPair,
    space: &SpaceSpec,
    t_grid: Option<&[f64]>,
    mode: Mode,
) -> Result<Vec<InequalityReport>> {
    let n = x.len();
    if n == 0 {
        return Err(Error::Config("no vectors given".into()));
    }
    let ctx = TransformContext::new(functions, *space, n)?;
    let (a_n, b_n) = (ctx.a_n(), ctx.b_n());
    for (i, v) in x.iter().enumerate() {
        let r = space.norm(v)?;
        if r > b_n * (1.0 + BOUNDARY_TOLERANCE) {
            return Err(Error::Hypothesis(format!(
                "||x_{}|| = {r} exceeds b_n = {b_n}",
                i + 1
            )));
        }
    }
    let rescaled = x
        .iter()
        .map(|v| ctx.rescale(v))
        .collect::<Result<Vec<_>>>()?;
    let grid = match t_grid {
        Some(g) => g.to_vec(),
        None => equispaced_grid(1.2 * total_norm(space, x)? / b_n, GRID_POINTS),
    };
    validate_grid(&grid)?;
    let thresholds: Vec<(f64, f64)> = grid.iter().map(|t| (t * b_n, t * a_n)).collect();
    let ones = vec![1.0; n];
    let joint = match mode {
        Mode::Exact => enumerate_signs(space, (x, &ones), (&rescaled, &ones), &thresholds)?,
        Mode::MonteCarlo(mc) => {
            simulate_signs(&mc, space, (x, &ones), (&rescaled, &ones), &thresholds)?
        }
    };
    let summary = format!("n={n} space={space} a_n={a_n} b_n={b_n}");
    Ok(sign_reports(
        "rescaled_signs",
        &summary,
        n,
        &grid,
        joint,
        mode,
    ))
}

/// Checks `P(||sum alpha_i R_i x_i|| > t) <= 2 P(||sum R_i x_i|| > t)` for
/// `|alpha_i| <= 1`. The default grid has 50 points on `[0, 1.2 sum ||x_i||]`.
pub fn check_contraction(
    x: &[Vector],
    alpha: &[f64],
    space: &SpaceSpec,
    t_grid: Option<&[f64]>,
    mode: Mode,
) -> Result<Vec<InequalityReport>> {
    let n = x.len();
    if n == 0 {
        return Err(Error::Config("no vectors given".into()));
    }
    if alpha.len() != n {
        return Err(Error::Config(format!(
            "{n} vectors but {} weights",
            alpha.len()
        )));
    }
    if let Some((i, a)) = alpha
        .iter()
        .enumerate()
        .find(|(_, a)| !a.is_finite() || a.abs() > 1.0)
    {
        return Err(Error::Hypothesis(format!(
            "|alpha_{}| = {} exceeds 1",
            i + 1,
            a.abs()
        )));
    }
    for v in x {
        space.conforms(v)?;
    }
    let grid = match t_grid {
        Some(g) => g.to_vec(),
        None => equispaced_grid(1.2 * total_norm(space, x)?, GRID_POINTS),
    };
    validate_grid(&grid)?;
    let thresholds: Vec<(f64, f64)> = grid.iter().map(|&t| (t, t)).collect();
    let ones = vec![1.0; n];
    let joint = match mode {
        Mode::Exact => enumerate_signs(space, (x, alpha), (x, &ones), &thresholds)?,
        Mode::MonteCarlo(mc) => simulate_signs(&mc, space, (x, alpha), (x, &ones), &thresholds)?,
    };
    let summary = format!("n={n} space={space}");
    Ok(sign_reports("contraction", &summary, n, &grid, joint, mode))
}

/// Checks `P(||sum V_i|| > t b_n) <= 4 P(||sum T_i|| > t a_n) + n P(||V|| > b_n)`
/// for i.i.d. symmetric `V_i`, with `T_i` the radial rescaling of `V_i`.
///
/// The interpolants are continued linearly past the horizon, so every draw
/// has a rescaled image. The tail term is analytic when the law has a
/// closed-form norm tail and otherwise counted from the same draws.
pub fn check_rescaled_symmetric(
    spec: &DistributionSpec,
    space: &SpaceSpec,
    functions: &FunctionPair,
    n: usize,
    t_grid: Option<&[f64]>,
    mc: &MonteCarlo,
) -> Result<Vec<InequalityReport>> {
    if !spec.is_symmetric() {
        return Err(Error::Hypothesis(format!(
            "{} is not symmetric",
            spec.describe()
        )));
    }
    mc.validate()?;
    let ctx = TransformContext::new(functions, *space, n)?;
    let (a_n, b_n) = (ctx.a_n(), ctx.b_n());
    let sampler = Sampler::new(spec, space)?;
    let grid = t_grid
        .map(<[f64]>::to_vec)
        .unwrap_or_else(default_random_t_grid);
    validate_grid(&grid)?;
    let thresholds: Vec<(f64, f64)> = grid.iter().map(|t| (t * b_n, t * a_n)).collect();
    let cut = b_n * (1.0 + BOUNDARY_TOLERANCE);
    let dim = space.dim;
    let summary = format!(
        "{} n={n} space={space} a_n={a_n} b_n={b_n}",
        spec.describe()
    );
    let name = "rescaled_symmetric";

    // A single-atom law has one path; its probabilities are exact.
    if let Some(law) = sampler.finite_support().filter(|l| l.atoms.len() == 1) {
        let atom = &law.atoms[0].0;
        let r = norm_coords(atom, space.q);
        let factor = if r > 0.0 {
            radial_factor_extended(functions, r)
        } else {
            0.0
        };
        let scale = n as f64;
        let lhs = scale * r;
        let rhs = scale * factor * r;
        let tail = TailTerm::analytic(if r > cut { scale } else { 0.0 });
        return Ok(thresholds
            .iter()
            .zip(&grid)
            .map(|(&(tl, tr), &t)| {
                let mut j = JointCounts::default();
                j.record(lhs > tl, rhs > tr);
                InequalityReport::exact(name, &summary, n, t, 4, j).with_exact_tail(tail)
            })
            .collect());
    }

    let tally = run_replications(
        mc,
        || GridTally::new(thresholds.len()),
        |rep, tally| {
            let mut rng = mc.key(Lane::Primary, rep).rng();
            let mut buf = vec![0.0; dim];
            let mut sum = vec![0.0; dim];
            let mut rescaled = vec![0.0; dim];
            for _ in 0..n {
                sampler.sample_into(&mut rng, &mut buf);
                let r = norm_coords(&buf, space.q);
                if r > cut {
                    tally.exceed += 1;
                }
                let factor = if r > 0.0 {
                    radial_factor_extended(functions, r)
                } else {
                    0.0
                };
                for ((s, t), x) in sum.iter_mut().zip(rescaled.iter_mut()).zip(&buf) {
                    *s += x;
                    *t += factor * x;
                }
            }
            tally.record(
                &thresholds,
                norm_coords(&sum, space.q),
                norm_coords(&rescaled, space.q),
            );
        },
    )?;

    let tail = match sampler.norm_tail(b_n) {
        Some(p) => TailTerm::analytic(n as f64 * p),
        None => TailTerm::empirical(n, tally.exceed, n as u64 * mc.replications, mc.confidence),
    };
    Ok(grid
        .iter()
        .zip(tally.joint)
        .map(|(&t, j)| {
            InequalityReport::monte_carlo(name, &summary, n, t, 4, j, Some(tail), mc.confidence)
        })
        .collect())
}

/// Checks `P(max_i ||X_i - X'_i|| > t b) <= 2 P(||S_n - S'_n|| > t b)` where
/// `X'` is an independent copy.
///
/// Exact mode enumerates the finite law of `X - X'` and needs at most
/// [`LEVY_PATTERN_LIMIT`] joint patterns. The default grid is
/// [`default_random_t_grid`] for Monte Carlo and 50 points on
/// `[0, 1.2 n max ||d|| / b]` over the difference atoms `d` for exact mode.
pub fn check_levy(
    spec: &DistributionSpec,
    space: &SpaceSpec,
    n: usize,
    b: f64,
    t_grid: Option<&[f64]>,
    mode: Mode,
) -> Result<Vec<InequalityReport>> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::Config(format!("scale b = {b} must be positive")));
    }
    let sampler = Sampler::new(spec, space)?;
    let summary = format!("{} n={n} space={space} b_n={b}", spec.describe());
    match mode {
        Mode::Exact => {
            let law = sampler
                .finite_support()
                .ok_or_else(|| Error::Config(format!("{} has no finite support", spec.describe())))?
                .difference();
            let atom_norms: Vec<f64> = law
                .atoms
                .iter()
                .map(|(d, _)| norm_coords(d, space.q))
                .collect();
            let grid = match t_grid {
                Some(g) => g.to_vec(),
                None => {
                    let top = atom_norms.iter().cloned().fold(0.0, f64::max);
                    equispaced_grid(1.2 * n as f64 * top / b, GRID_POINTS)
                }
            };
            validate_grid(&grid)?;
            let thresholds: Vec<(f64, f64)> = grid.iter().map(|t| (t * b, t * b)).collect();
            let joint = enumerate_differences(&law, &atom_norms, space, n, &thresholds)?;
            Ok(grid
                .iter()
                .zip(joint)
                .map(|(&t, j)| InequalityReport::exact("levy", &summary, n, t, 2, j))
                .collect())
        }
        Mode::MonteCarlo(mc) => {
            mc.validate()?;
            let grid = t_grid
                .map(<[f64]>::to_vec)
                .unwrap_or_else(default_random_t_grid);
            validate_grid(&grid)?;
            let thresholds: Vec<(f64, f64)> = grid.iter().map(|t| (t * b, t * b)).collect();
            let dim = space.dim;
            let tally = run_replications(
                &mc,
                || GridTally::new(thresholds.len()),
                |rep, tally| {
                    let mut primary = mc.key(Lane::Primary, rep).rng();
                    let mut copy = mc.key(Lane::Copy, rep).rng();
                    let (max, sum) = levy_path(&sampler, &mut primary, &mut copy, n, dim);
                    tally.record(&thresholds, max, sum);
                },
            )?;
            Ok(grid
                .iter()
                .zip(tally.joint)
                .map(|(&t, j)| {
                    InequalityReport::monte_carlo("levy", &summary, n, t, 2, j, None, mc.confidence)
                })
                .collect())
        }
    }
}

/// `(max_i ||X_i - X'_i||, ||sum_i (X_i - X'_i)||)` for one replication.
fn levy_path(
    sampler: &Sampler,
    primary: &mut StreamRng,
    copy: &mut StreamRng,
    n: usize,
    dim: usize,
) -> (f64, f64) {
    let q = sampler.space().q;
    let mut x = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    let mut sum = vec![0.0; dim];
    let mut max = 0.0f64;
    for _ in 0..n {
        sampler.sample_into(primary, &mut x);
        sampler.sample_into(copy, &mut y);
        for ((xi, yi), s) in x.iter_mut().zip(&y).zip(sum.iter_mut()) {
            *xi -= yi;
            *s += *xi;
        }
        max = max.max(norm_coords(&x, q));
    }
    (max, norm_coords(&sum, q))
}

/// Weighted joint counts over every sequence of `n` atoms of `law`.
fn enumerate_differences(
    law: &FiniteLaw,
    atom_norms: &[f64],
    space: &SpaceSpec,
    n: usize,
    thresholds: &[(f64, f64)],
) -> Result<Vec<JointCounts>> {
    let k = law.atoms.len();
    let patterns = (k as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if n > 64 || patterns > LEVY_PATTERN_LIMIT {
        return Err(Error::EnumerationTooLarge {
            patterns,
            limit: LEVY_PATTERN_LIMIT,
        });
    }
    law.denominator
        .checked_pow(n as u32)
        .ok_or_else(|| Error::Config("joint weights overflow 64 bits".into()))?;
    let mut joint = vec![JointCounts::default(); thresholds.len()];
    let mut partial = vec![0.0; (n + 1) * space.dim];
    descend(
        law,
        atom_norms,
        space,
        thresholds,
        0,
        0.0,
        1,
        &mut partial,
        &mut joint,
    );
    Ok(joint)
}

#[allow(clippy::too_many_arguments)]
fn descend(
    law: &FiniteLaw,
    atom_norms: &[f64],
    space: &SpaceSpec,
    thresholds: &[(f64, f64)],
    depth: usize,
    max: f64,
    weight: u64,
    partial: &mut [f64],
    joint: &mut [JointCounts],
) {
    let dim = space.dim;
    let n = partial.len() / dim - 1;
    if depth == n {
        let sum = norm_coords(&partial[n * dim..], space.q);
        for (j, &(tl, tr)) in joint.iter_mut().zip(thresholds) {
            j.add(max > tl, sum > tr, weight);
        }
        return;
    }
    for ((atom, w), &norm) in law.atoms.iter().zip(atom_norms) {
        let (head, tail) = partial.split_at_mut((depth + 1) * dim);
        for ((next, p), a) in tail[..dim].iter_mut().zip(&head[depth * dim..]).zip(atom) {
            *next = p + a;
        }
        descend(
            law,
            atom_norms,
            space,
            thresholds,
            depth + 1,
            max.max(norm),
            weight * w,
            partial,
            joint,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norming::NormingPair;
    use crate::sources::{Kind, Lifting, StreamKey};
    use crate::space::NormExponent;
    use crate::suite::Verdict;
    use rand::Rng;

    fn line() -> SpaceSpec {
        SpaceSpec::real_line()
    }

    fn scalars(xs: &[f64]) -> Vec<Vector> {
        xs.iter().map(|&x| Vector::scalar(x).unwrap()).collect()
    }

    fn identity(n: usize) -> FunctionPair {
        FunctionPair::build(&NormingPair::power(1.0, 1.0, n).unwrap()).unwrap()
    }

    /// Direct enumeration with explicit sign vectors; independent of the
    /// depth-first partial sums used by the checker.
    fn brute_tail(x: &[Vector], w: &[f64], t: f64, space: &SpaceSpec) -> u64 {
        let n = x.len();
        let mut hits = 0;
        for mask in 0u32..1 << n {
            let mut s = vec![0.0; space.dim];
            for i in 0..n {
                let e = if mask >> i & 1 == 1 { -1.0 } else { 1.0 };
                for (sj, xj) in s.iter_mut().zip(x[i].coords()) {
                    *sj += e * w[i] * xj;
                }
            }
            if norm_coords(&s, space.q) > t {
                hits += 1;
            }
        }
        hits
    }

    #[test]
    fn identity_pair_gives_identical_events() {
        let x = scalars(&[1.0, 0.5, 2.0, 1.5]);
        let reports = check_rescaled_signs(&x, &identity(4), &line(), None, Mode::Exact).unwrap();
        assert_eq!(reports.len(), 50);
        for r in &reports {
            assert_eq!(r.joint.lhs_only + r.joint.rhs_only, 0);
            assert_eq!(r.verdict, Verdict::Holds);
            assert_eq!(r.slack, r.lhs.p_hat);
        }
    }

    #[test]
    fn zero_threshold_both_sides_one() {
        let x = scalars(&[1.0, 0.5, 2.0]);
        let f = FunctionPair::build(&NormingPair::power(0.5, 1.0, 3).unwrap()).unwrap();
        let r = &check_rescaled_signs(&x, &f, &line(), Some(&[0.0]), Mode::Exact).unwrap()[0];
        assert_eq!(r.lhs.p_hat, 1.0);
        assert_eq!(r.rhs.p_hat, 1.0);
        assert_eq!(r.rhs_bound, 2.0);
        assert_eq!(r.verdict, Verdict::Holds);
    }

    #[test]
    fn eight_vectors_in_l2_cubed() {
        let space = SpaceSpec::new(3, NormExponent::Finite(2.0)).unwrap();
        let n = 8;
        let f = FunctionPair::build(&NormingPair::power(0.5, 1.0, n).unwrap()).unwrap();
        let mut rng = StreamKey::new(11, Lane::Configs, 0).rng();
        let x: Vec<Vector> = (0..n)
            .map(|_| {
                let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let r = norm_coords(&v, space.q);
                let target = rng.gen_range(0.0..=n as f64);
                Vector::new(v.iter().map(|c| c * target / r).collect()).unwrap()
            })
            .collect();
        let reports = check_rescaled_signs(&x, &f, &space, None, Mode::Exact).unwrap();
        let ctx = TransformContext::new(&f, space, n).unwrap();
        let y: Vec<Vector> = x.iter().map(|v| ctx.rescale(v).unwrap()).collect();
        let ones = vec![1.0; n];
        for r in &reports {
            assert_eq!(r.verdict, Verdict::Holds, "t = {}", r.t);
            assert_eq!(
                r.lhs.successes,
                brute_tail(&x, &ones, r.t * n as f64, &space)
            );
            let a_n = (n as f64).sqrt();
            assert_eq!(r.rhs.successes, brute_tail(&y, &ones, r.t * a_n, &space));
            assert_eq!(r.lhs.replications, 256);
        }
    }

    #[test]
    fn hypothesis_violation_rejected() {
        let x = scalars(&[1.0, 2.5]);
        let err = check_rescaled_signs(&x, &identity(2), &line(), None, Mode::Exact).unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)));
        // Within the boundary tolerance of b_n is accepted.
        let x = scalars(&[1.0, 2.0 * (1.0 + 1e-12)]);
        assert!(check_rescaled_signs(&x, &identity(2), &line(), None, Mode::Exact).is_ok());
    }

    #[test]
    fn exact_and_monte_carlo_agree() {
        let x = scalars(&[1.0, -0.5, 2.0, 1.5, 0.25, 1.0]);
        let f = FunctionPair::build(&NormingPair::power(0.75, 1.0, 6).unwrap()).unwrap();
        let grid = [0.1, 0.3, 0.6, 0.9];
        let exact = check_rescaled_signs(&x, &f, &line(), Some(&grid), Mode::Exact).unwrap();
        let mc = MonteCarlo::new(100_000, 5);
        let sim = check_rescaled_signs(&x, &f, &line(), Some(&grid), Mode::MonteCarlo(mc)).unwrap();
        for (e, s) in exact.iter().zip(&sim) {
            assert!(s.lhs.ci_low <= e.lhs.p_hat && e.lhs.p_hat <= s.lhs.ci_high);
            assert!(s.rhs.ci_low <= e.rhs.p_hat && e.rhs.p_hat <= s.rhs.ci_high);
            assert_ne!(s.verdict, Verdict::Violated);
        }
    }

    #[test]
    fn contraction_trivial_weights() {
        let x = scalars(&[1.0, 2.0, 0.5]);
        for r in check_contraction(&x, &[1.0; 3], &line(), None, Mode::Exact).unwrap() {
            assert_eq!(r.joint.lhs_only + r.joint.rhs_only, 0);
            assert_eq!(r.verdict, Verdict::Holds);
        }
        for r in check_contraction(&x, &[0.0; 3], &line(), None, Mode::Exact).unwrap() {
            assert_eq!(r.lhs.p_hat, 0.0);
            assert_eq!(r.verdict, Verdict::Holds);
        }
    }

    #[test]
    fn contraction_ten_vectors_in_max_norm() {
        let space = SpaceSpec::new(2, NormExponent::Infinity).unwrap();
        let mut rng = StreamKey::new(12, Lane::Configs, 0).rng();
        let x: Vec<Vector> = (0..10)
            .map(|_| Vector::new(vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).unwrap())
            .collect();
        let alpha: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let reports = check_contraction(&x, &alpha, &space, None, Mode::Exact).unwrap();
        assert_eq!(reports.len(), 50);
        let ones = vec![1.0; 10];
        for r in &reports {
            assert_eq!(r.verdict, Verdict::Holds, "t = {}", r.t);
            assert_eq!(r.lhs.successes, brute_tail(&x, &alpha, r.t, &space));
            assert_eq!(r.rhs.successes, brute_tail(&x, &ones, r.t, &space));
        }
    }

    #[test]
    fn contraction_rejects_large_weight() {
        let x = scalars(&[1.0, 2.0]);
        let err = check_contraction(&x, &[0.5, -1.5], &line(), None, Mode::Exact).unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)));
    }

    #[test]
    fn too_many_signs_for_exact() {
        let x = scalars(&[1.0; 21]);
        let err = check_contraction(&x, &[1.0; 21], &line(), None, Mode::Exact).unwrap_err();
        assert!(matches!(err, Error::EnumerationTooLarge { .. }));
    }

    #[test]
    fn symmetric_identity_pair_holds() {
        let f = identity(16);
        let mc = MonteCarlo::new(20_000, 3);
        let spec = DistributionSpec::pareto_symmetric(1.5);
        for r in check_rescaled_symmetric(&spec, &line(), &f, 16, None, &mc).unwrap() {
            assert_eq!(r.joint.lhs_only + r.joint.rhs_only, 0);
            assert_eq!(r.verdict, Verdict::Holds);
            assert!(r.tail_term.unwrap().analytic);
        }
    }

    #[test]
    fn point_mass_at_zero_has_empty_lhs() {
        let f = FunctionPair::build(&NormingPair::power(0.5, 1.0, 8).unwrap()).unwrap();
        let spec = DistributionSpec::scalar(Kind::PointMass {
            value: Vector::scalar(0.0).unwrap(),
        });
        let mc = MonteCarlo::new(1_000, 3);
        for r in check_rescaled_symmetric(&spec, &line(), &f, 8, None, &mc).unwrap() {
            assert_eq!(r.lhs.successes, 0);
            assert!(r.lhs.exact);
            assert_eq!(r.verdict, Verdict::Holds);
        }
    }

    #[test]
    fn asymmetric_law_rejected() {
        let f = identity(4);
        let spec = DistributionSpec::scalar(Kind::Pareto { alpha: 2.0 });
        let err = check_rescaled_symmetric(&spec, &line(), &f, 4, None, &MonteCarlo::new(100, 1))
            .unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)));
    }

    #[test]
    fn empirical_tail_term_without_closed_form() {
        let space = SpaceSpec::new(2, NormExponent::Finite(2.0)).unwrap();
        let spec = DistributionSpec::stable_symmetric(1.5).with_lifting(Lifting::IidCoordinates);
        let f = FunctionPair::build(&NormingPair::power(0.5, 1.0, 8).unwrap()).unwrap();
        let reports =
            check_rescaled_symmetric(&spec, &space, &f, 8, None, &MonteCarlo::new(5_000, 9))
                .unwrap();
        let tail = reports[0].tail_term.unwrap();
        assert!(!tail.analytic);
        assert!(tail.upper > tail.value && tail.value > 0.0);
        assert!(reports.iter().all(|r| r.verdict != Verdict::Violated));
    }

    #[test]
    fn levy_single_term_is_identity() {
        let mc = MonteCarlo::new(5_000, 4);
        let spec = DistributionSpec::stable_symmetric(1.0);
        for r in check_levy(&spec, &line(), 1, 1.0, None, Mode::MonteCarlo(mc)).unwrap() {
            assert_eq!(r.joint.lhs_only + r.joint.rhs_only, 0);
            assert_eq!(r.verdict, Verdict::Holds);
        }
    }

    /// Direct oracle over all 4^n sign pairs of two Rademacher sequences.
    fn rademacher_levy_oracle(n: usize, t: f64) -> (u64, u64) {
        let (mut lhs, mut rhs) = (0, 0);
        for mask in 0u64..1 << (2 * n) {
            let mut sum = 0.0f64;
            let mut max = 0.0f64;
            for i in 0..n {
                let x = if mask >> i & 1 == 1 { -1.0 } else { 1.0 };
                let y = if mask >> (n + i) & 1 == 1 { -1.0 } else { 1.0 };
                sum += x - y;
                max = max.max((x - y).abs());
            }
            lhs += (max > t) as u64;
            rhs += (sum.abs() > t) as u64;
        }
        (lhs, rhs)
    }

    #[test]
    fn levy_rademacher_exact() {
        let n = 8;
        let reports = check_levy(
            &DistributionSpec::rademacher(),
            &line(),
            n,
            1.0,
            None,
            Mode::Exact,
        )
        .unwrap();
        for r in &reports {
            assert_eq!(r.verdict, Verdict::Holds, "t = {}", r.t);
            assert_eq!(r.lhs.replications, 1 << 16);
            let (lhs, rhs) = rademacher_levy_oracle(n, r.t);
            assert_eq!(
                (r.lhs.successes, r.rhs.successes),
                (lhs, rhs),
                "t = {}",
                r.t
            );
        }
    }

    #[test]
    fn levy_exact_needs_finite_support() {
        let err = check_levy(
            &DistributionSpec::pareto_symmetric(1.0),
            &line(),
            4,
            1.0,
            None,
            Mode::Exact,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = check_levy(
            &DistributionSpec::rademacher(),
            &line(),
            13,
            1.0,
            None,
            Mode::Exact,
        )
        .unwrap_err();
        assert!(matches!(err, Error::EnumerationTooLarge { .. }));
    }

    #[test]
    fn levy_cauchy_monte_carlo() {
        let mc = MonteCarlo::new(100_000, 21);
        let spec = DistributionSpec::stable_symmetric(1.0);
        let reports = check_levy(&spec, &line(), 32, 32.0, None, Mode::MonteCarlo(mc)).unwrap();
        assert!(reports.iter().all(|r| r.verdict == Verdict::Holds));
    }

    #[test]
    fn grids() {
        assert_eq!(equispaced_grid(2.0, 5), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let g = default_random_t_grid();
        assert_eq!(g.len(), 25);
        assert!((g[0] - 0.01).abs() < 1e-15 && (g[24] - 10.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
