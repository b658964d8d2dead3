use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{run_replications, MonteCarlo, TailEstimate, Tally};
use crate::norming::NormingPair;
use crate::sources::{DistributionSpec, Lane, Sampler, StreamKey};
use crate::space::{norm_coords, SpaceSpec};
use crate::transforms::{gamma_n, CenteringMode};

/// Upper confidence bound below which a probability counts as vanishing.
pub const CONVERGENCE_THRESHOLD: f64 = 0.02;
/// Lower confidence bound above which a probability counts as bounded away from zero.
pub const DIVERGENCE_THRESHOLD: f64 = 0.05;
pub const DEFAULT_LAMBDA_GRID: [f64; 4] = [0.25, 0.5, 1.0, 2.0];
pub const DEFAULT_CENTERING_REPLICATIONS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Converges,
    BoundedAway,
    Undecided,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Converges => "converges",
            Branch::BoundedAway => "bounded_away",
            Branch::Undecided => "undecided",
        }
    }
}

/// How `gamma_n` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenteringChoice {
    /// Closed form when available, otherwise Monte Carlo with
    /// [`DEFAULT_CENTERING_REPLICATIONS`] draws.
    Auto,
    Analytic,
    MonteCarlo {
        replications: u64,
    },
}

/// `1, 2, 4, ...` up to and including `max` when it is a power of two.
pub fn power_of_two_grid(max: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |n| n.checked_mul(2))
        .take_while(|&n| n <= max)
        .collect()
}

/// Grids and options for a convergence run.
#[derive(Debug, Clone, PartialEq)]
pub struct WllnPlan {
    pub n_grid: Vec<usize>,
    pub lambda_grid: Vec<f64>,
    pub centering: CenteringChoice,
    /// When set, also require `b_n / n^(1/p)` to be nondecreasing with `p` in `[1, 2)`.
    pub stable_type_p: Option<f64>,
}

impl WllnPlan {
    pub fn new(n_grid: Vec<usize>) -> Self {
        WllnPlan {
            n_grid,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            centering: CenteringChoice::Auto,
            stable_type_p: None,
        }
    }

    fn validate(&self, pair: &NormingPair) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid[0] == 0 {
            return Err(Error::Config(
                "n grid must be nonempty and start at n >= 1".into(),
            ));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n grid must be strictly increasing".into()));
        }
        let top = *self.n_grid.last().unwrap();
        if top > pair.len() {
            return Err(Error::Config(format!(
                "n grid reaches {top} but the norming sequence has {} terms",
                pair.len()
            )));
        }
        if self.lambda_grid.is_empty()
            || self
                .lambda_grid
                .iter()
                .any(|l| !(l.is_finite() && *l > 0.0))
            || self.lambda_grid.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config(
                "lambda grid must be nonempty, positive and strictly increasing".into(),
            ));
        }
        if let Some(p) = self.stable_type_p {
            pair.check_stable_type_norming(p)?;
        }
        Ok(())
    }
}

/// `n P(||X|| > b_n)`, analytically when possible and from all simulated draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub analytic: Option<f64>,
    pub empirical: f64,
    pub empirical_std_error: f64,
    pub exceedances: u64,
    pub draws: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WllnRow {
    pub n: usize,
    pub b_n: f64,
    pub gamma: Vec<f64>,
    pub gamma_std_error: Vec<f64>,
    /// `P(||S_n - gamma_n|| / b_n > lambda)`, one entry per lambda.
    pub estimates: Vec<TailEstimate>,
    pub criterion: Criterion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WllnDiagnostic {
    pub summary: String,
    /// Whether rows hold `S_n - S'_n` instead of `S_n - gamma_n`.
    pub symmetrized: bool,
    pub lambda_grid: Vec<f64>,
    pub rows: Vec<WllnRow>,
    pub branch: Branch,
    pub note: String,
}

impl WllnDiagnostic {
    pub fn n_grid(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.n).collect()
    }

    /// Whether the confidence intervals for `lambda_grid[index]` share a common
    /// point across all `n`.
    pub fn flat_within_ci(&self, index: usize) -> bool {
        let low = self
            .rows
            .iter()
            .map(|r| r.estimates[index].ci_low)
            .fold(f64::NEG_INFINITY, f64::max);
        let high = self
            .rows
            .iter()
            .map(|r| r.estimates[index].ci_high)
            .fold(f64::INFINITY, f64::min);
        low <= high
    }
}

/// Result of running the centered and symmetrized diagnostics on shared draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetrizationCheck {
    pub centered: WllnDiagnostic,
    pub symmetrized: WllnDiagnostic,
    pub agree: bool,
}

fn classify(rows: &[WllnRow]) -> (Branch, String) {
    let converges = rows
        .last()
        .map(|r| {
            r.estimates
                .iter()
                .all(|e| e.ci_high < CONVERGENCE_THRESHOLD)
        })
        .unwrap_or(false);
    let bounded = rows.len() >= 2
        && rows[rows.len() - 2..]
            .iter()
            .all(|r| r.estimates.iter().all(|e| e.ci_low > DIVERGENCE_THRESHOLD));
    match (converges, bounded) {
        (true, false) => (Branch::Converges, String::new()),
        (false, true) => (
            Branch::BoundedAway,
            "certified on the tested lambda grid only".to_string(),
        ),
        _ => (
            Branch::Undecided,
            format!(
                "estimates fall between {CONVERGENCE_THRESHOLD} and {DIVERGENCE_THRESHOLD}; \
                 enlarge the largest n"
            ),
        ),
    }
}

#[derive(Debug, Clone)]
struct WllnTally {
    lambdas: usize,
    centered: Vec<u64>,
    symmetrized: Vec<u64>,
    exceed: Vec<u64>,
}

impl Tally for WllnTally {
    fn merge(&mut self, other: Self) {
        for (a, b) in self.centered.iter_mut().zip(other.centered) {
            *a += b;
        }
        for (a, b) in self.symmetrized.iter_mut().zip(other.symmetrized) {
            *a += b;
        }
        for (a, b) in self.exceed.iter_mut().zip(other.exceed) {
            *a += b;
        }
    }
}

fn centerings(
    spec: &DistributionSpec,
    space: &SpaceSpec,
    pair: &NormingPair,
    plan: &WllnPlan,
    seed: u64,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    plan.n_grid
        .iter()
        .enumerate()
        .map(|(g, &n)| {
            let b = pair.b(n);
            let key = StreamKey::new(seed, Lane::Centering, g as u64);
            let mc = |replications| CenteringMode::MonteCarlo { replications, key };
            let c = match plan.centering {
                CenteringChoice::Analytic => gamma_n(spec, space, b, n, CenteringMode::Analytic)?,
                CenteringChoice::MonteCarlo { replications } => {
                    gamma_n(spec, space, b, n, mc(replications))?
                }
                CenteringChoice::Auto => {
                    match gamma_n(spec, space, b, n, CenteringMode::Analytic) {
                        Err(Error::NoClosedForm(_)) => {
                            gamma_n(spec, space, b, n, mc(DEFAULT_CENTERING_REPLICATIONS))?
                        }
                        other => other?,
                    }
                }
            };
            Ok((c.value.into_coords(), c.std_error.into_coords()))
        })
        .collect()
}

fn simulate(
    spec: &DistributionSpec,
    space: &SpaceSpec,
    pair: &NormingPair,
    plan: &WllnPlan,
    mc: &MonteCarlo,
    gammas: &[(Vec<f64>, Vec<f64>)],
    symmetrized: bool,
) -> Result<WllnTally> {
    let sampler = Sampler::new(spec, space)?;
    let (grid, lambdas) = (&plan.n_grid, &plan.lambda_grid);
    let b: Vec<f64> = grid.iter().map(|&n| pair.b(n)).collect();
    let top = *grid.last().unwrap();
    let dim = space.dim;
    let cells = grid.len() * lambdas.len();
    let init = || WllnTally {
        lambdas: lambdas.len(),
        centered: vec![0; cells],
        symmetrized: vec![0; if symmetrized { cells } else { 0 }],
        exceed: vec![0; grid.len()],
    };
    run_replications(mc, init, |rep, tally| {
        let mut primary = mc.key(Lane::Primary, rep).rng();
        let mut copy = mc.key(Lane::Copy, rep).rng();
        let mut x = vec![0.0; dim];
        let mut y = vec![0.0; dim];
        let mut sum = vec![0.0; dim];
        let mut diff = vec![0.0; dim];
        let mut work = vec![0.0; dim];
        let mut next = 0;
        for i in 1..=top {
            sampler.sample_into(&mut primary, &mut x);
            let r = norm_coords(&x, space.q);
            for (e, &bg) in tally.exceed.iter_mut().zip(&b) {
                if r <= bg {
                    break;
                }
                *e += 1;
            }
            for (s, xi) in sum.iter_mut().zip(&x) {
                *s += xi;
            }
            if symmetrized {
                sampler.sample_into(&mut copy, &mut y);
                for ((d, xi), yi) in diff.iter_mut().zip(&x).zip(&y) {
                    *d += xi - yi;
                }
            }
            if i == grid[next] {
                let row = next * tally.lambdas;
                for ((w, s), g) in work.iter_mut().zip(&sum).zip(&gammas[next].0) {
                    *w = s - g;
                }
                let centered = norm_coords(&work, space.q) / b[next];
                for (c, l) in tally.centered[row..row + lambdas.len()]
                    .iter_mut()
                    .zip(lambdas)
                {
                    *c += (centered > *l) as u64;
                }
                if symmetrized {
                    let s = norm_coords(&diff, space.q) / b[next];
                    for (c, l) in tally.symmetrized[row..row + lambdas.len()]
                        .iter_mut()
                        .zip(lambdas)
                    {
                        *c += (s > *l) as u64;
                    }
                }
                next += 1;
            }
        }
    })
}

#[allow(clippy::too_many_arguments)]
fn diagnostic(
    summary: &str,
    sampler: &Sampler,
    pair: &NormingPair,
    plan: &WllnPlan,
    mc: &MonteCarlo,
    gammas: &[(Vec<f64>, Vec<f64>)],
    tally: &WllnTally,
    symmetrized: bool,
) -> WllnDiagnostic {
    let counts = if symmetrized {
        &tally.symmetrized
    } else {
        &tally.centered
    };
    let draws = mc.replications * *plan.n_grid.last().unwrap() as u64;
    let lambdas = plan.lambda_grid.len();
    let rows: Vec<WllnRow> = plan
        .n_grid
        .iter()
        .enumerate()
        .map(|(g, &n)| {
            let b_n = pair.b(n);
            let p = tally.exceed[g] as f64 / draws as f64;
            let (gamma, gamma_std_error) = if symmetrized {
                (vec![0.0; sampler.dim()], vec![0.0; sampler.dim()])
            } else {
                gammas[g].clone()
            };
            WllnRow {
                n,
                b_n,
                gamma,
                gamma_std_error,
                estimates: counts[g * lambdas..(g + 1) * lambdas]
                    .iter()
                    .map(|&k| mc.estimate(k))
                    .collect(),
                criterion: Criterion {
                    analytic: sampler.norm_tail(b_n).map(|q| n as f64 * q),
                    empirical: n as f64 * p,
                    empirical_std_error: n as f64 * (p * (1.0 - p) / draws as f64).sqrt(),
                    exceedances: tally.exceed[g],
                    draws,
                },
            }
        })
        .collect();
    let (branch, note) = classify(&rows);
    WllnDiagnostic {
        summary: summary.to_string(),
        symmetrized,
        lambda_grid: plan.lambda_grid.clone(),
        rows,
        branch,
        note,
    }
}

fn run(
    spec: &DistributionSpec,
    space: &SpaceSpec,
    pair: &NormingPair,
    plan: &WllnPlan,
    mc: &MonteCarlo,
    symmetrized: bool,
) -> Result<(WllnDiagnostic, Option<WllnDiagnostic>)> {
    plan.validate(pair)?;
    mc.validate()?;
    let sampler = Sampler::new(spec, space)?;
    let gammas = centerings(spec, space, pair, plan, mc.seed)?;
    let tally = simulate(spec, space, pair, plan, mc, &gammas, symmetrized)?;
    let summary = format!("{} space={space}", spec.describe());
    let centered = diagnostic(&summary, &sampler, pair, plan, mc, &gammas, &tally, false);
    let sym =
        symmetrized.then(|| diagnostic(&summary, &sampler, pair, plan, mc, &gammas, &tally, true));
    Ok((centered, sym))
}

/// Estimates `P(||S_n - gamma_n|| / b_n > lambda)` along the grids and
/// classifies the run.
///
/// Partial sums are nested: one path of length `max n` per replication is
/// evaluated at every grid point. `converges` needs every upper bound at the
/// largest `n` below [`CONVERGENCE_THRESHOLD`]; `bounded_away` needs every
/// lower bound at the two largest `n` above [`DIVERGENCE_THRESHOLD`].
pub fn run_wlln(
    spec: &DistributionSpec,
    space: &SpaceSpec,
    pair: &NormingPair,
    plan: &WllnPlan,
    mc: &MonteCarlo,
) -> Result<WllnDiagnostic> {
    Ok(run(spec, space, pair, plan, mc, false)?.0)
}

/// Runs the centered diagnostic and the one for `S_n - S'_n` on the same
/// primary draws and reports whether the two classifications agree.
pub fn cross_check_symmetrization(
    spec: &DistributionSpec,
    space: &SpaceSpec,
    pair: &NormingPair,
    plan: &WllnPlan,
    mc: &MonteCarlo,
) -> Result<SymmetrizationCheck> {
    let (centered, symmetrized) = run(spec, space, pair, plan, mc, true)?;
    let symmetrized = symmetrized.expect("symmetrized run requested");
    Ok(SymmetrizationCheck {
        agree: centered.branch == symmetrized.branch,
        centered,
        symmetrized,
    })
}
