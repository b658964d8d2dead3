//! Tail-probability estimation: exact enumeration over Rademacher sign
//! patterns, and Monte Carlo with exact (Clopper-Pearson) binomial intervals.
//!
//! Monte Carlo work is split into fixed-size chunks of replication indices.
//! Every replication draws from its own substream, and chunk tallies are merged
//! in chunk order, so results do not depend on the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::sources::{Lane, StreamKey, StreamRng};
use crate::space::{norm_coords, SpaceSpec, Vector};

/// Largest `n` for which `2^n` sign patterns are enumerated.
pub const ENUMERATION_LIMIT: usize = 20;

/// Smallest accepted replication count.
pub const MIN_REPLICATIONS: u64 = 100;

pub const DEFAULT_CONFIDENCE: f64 = 0.99;

const CHUNK: u64 = 1024;

/// An estimate of a probability with its two-sided confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub p_hat: f64,
    pub successes: u64,
    pub replications: u64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    pub exact: bool,
}

impl TailEstimate {
    /// An exactly known probability `successes / total`.
    pub fn exact(successes: u64, total: u64) -> Self {
        let p = successes as f64 / total as f64;
        TailEstimate {
            p_hat: p,
            successes,
            replications: total,
            ci_low: p,
            ci_high: p,
            confidence: 1.0,
            exact: true,
        }
    }

    /// A binomial estimate with a Clopper-Pearson interval.
    pub fn from_counts(successes: u64, replications: u64, confidence: f64) -> Self {
        let (ci_low, ci_high) = clopper_pearson(successes, replications, confidence);
        let p_hat = successes as f64 / replications as f64;
        TailEstimate {
            p_hat,
            successes,
            replications,
            // Guard the invariant against the last ulp of the root finder.
            ci_low: ci_low.min(p_hat),
            ci_high: ci_high.max(p_hat),
            confidence,
            exact: false,
        }
    }

    /// Binomial standard error of `p_hat`; zero for exact values.
    pub fn std_error(&self) -> f64 {
        if self.exact {
            0.0
        } else {
            (self.p_hat * (1.0 - self.p_hat) / self.replications as f64).sqrt()
        }
    }
}

/// Exact two-sided binomial interval at the given confidence level.
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials, "invalid binomial counts");
    assert!(
        confidence > 0.0 && confidence < 1.0,
        "confidence must lie in (0, 1)"
    );
    let half = (1.0 - confidence) / 2.0;
    let (k, n) = (successes as f64, trials as f64);
    let low = if successes == 0 {
        0.0
    } else {
        // P(Bin(n, p) >= k) = I_p(k, n - k + 1) = half
        solve_increasing(|p| beta_reg(k, n - k + 1.0, p), half)
    };
    let high = if successes == trials {
        1.0
    } else {
        // P(Bin(n, p) <= k) = 1 - I_p(k + 1, n - k) = half
        solve_increasing(|p| beta_reg(k + 1.0, n - k, p), 1.0 - half)
    };
    (low, high)
}

fn solve_increasing(f: impl Fn(f64) -> f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Norms `||sum_i eps_i w_i x_i||` for every sign pattern, indexed by the bit
/// mask with bit `i` set when `eps_i = -1`. Partial sums accumulate left to
/// right, matching direct summation.
pub fn sign_pattern_norms(x: &[Vector], weights: &[f64], space: &SpaceSpec) -> Result<Vec<f64>> {
    if x.len() != weights.len() {
        return Err(Error::Config(format!(
            "{} vectors but {} weights",
            x.len(),
            weights.len()
        )));
    }
    let n = x.len();
    if n > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            patterns: 1u128 << n,
            limit: 1u128 << ENUMERATION_LIMIT,
        });
    }
    for v in x {
        space.conforms(v)?;
    }
    let dim = space.dim;
    let terms: Vec<Vec<f64>> = x
        .iter()
        .zip(weights)
        .map(|(v, w)| v.coords().iter().map(|c| w * c).collect())
        .collect();
    let mut norms = vec![0.0; 1 << n];
    // partial[k] holds the sum of the first k signed terms along the current branch.
    let mut partial = vec![0.0; (n + 1) * dim];
    fill_patterns(&terms, space, 0, 0, &mut partial, &mut norms);
    Ok(norms)
}

fn fill_patterns(
    terms: &[Vec<f64>],
    space: &SpaceSpec,
    depth: usize,
    mask: usize,
    partial: &mut [f64],
    norms: &mut [f64],
) {
    let dim = space.dim;
    if depth == terms.len() {
        norms[mask] = norm_coords(&partial[depth * dim..(depth + 1) * dim], space.q);
        return;
    }
    for (bit, sign) in [(0usize, 1.0f64), (1, -1.0)] {
        let (head, tail) = partial.split_at_mut((depth + 1) * dim);
        let prev = &head[depth * dim..];
        for ((next, p), t) in tail[..dim].iter_mut().zip(prev).zip(&terms[depth]) {
            *next = p + sign * t;
        }
        fill_patterns(terms, space, depth + 1, mask | bit << depth, partial, norms);
    }
}

/// Number of entries strictly greater than `t` in an ascending slice.
pub fn count_exceeding(sorted: &[f64], t: f64) -> u64 {
    (sorted.len() - sorted.partition_point(|&v| v <= t)) as u64
}

/// `P(||sum_i R_i w_i x_i|| > t)` by full enumeration of the `2^n` sign patterns.
pub fn exact_rademacher_tail(
    x: &[Vector],
    weights: &[f64],
    t: f64,
    space: &SpaceSpec,
) -> Result<TailEstimate> {
    let norms = sign_pattern_norms(x, weights, space)?;
    let hits = norms.iter().filter(|&&v| v > t).count() as u64;
    Ok(TailEstimate::exact(hits, norms.len() as u64))
}

/// Monte Carlo settings shared by every estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub replications: u64,
    pub confidence: f64,
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide. Never affects results.
    pub threads: usize,
}

impl MonteCarlo {
    pub fn new(replications: u64, seed: u64) -> Self {
        MonteCarlo {
            replications,
            confidence: DEFAULT_CONFIDENCE,
            seed,
            threads: 0,
        }
    }

    pub fn with_threads(self, threads: usize) -> Self {
        MonteCarlo { threads, ..self }
    }

    pub fn with_confidence(self, confidence: f64) -> Self {
        MonteCarlo { confidence, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::Config(format!(
                "R = {} is below the minimum of {MIN_REPLICATIONS}",
                self.replications
            )));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Config(format!(
                "confidence {} must lie in (0, 1)",
                self.confidence
            )));
        }
        Ok(())
    }

    pub fn key(&self, lane: Lane, replication: u64) -> StreamKey {
        StreamKey::new(self.seed, lane, replication)
    }

    pub fn estimate(&self, successes: u64) -> TailEstimate {
        TailEstimate::from_counts(successes, self.replications, self.confidence)
    }
}

/// Per-chunk accumulator for [`run_replications`].
pub trait Tally: Send {
    fn merge(&mut self, other: Self);
}

/// Elementwise counters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counts(pub Vec<u64>);

impl Counts {
    pub fn zeros(len: usize) -> Self {
        Counts(vec![0; len])
    }
}

impl Tally for Counts {
    fn merge(&mut self, other: Self) {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a += b;
        }
    }
}

/// Runs `body(replication_index, tally)` for every replication, in parallel.
pub fn run_replications<T, I, F>(mc: &MonteCarlo, init: I, body: F) -> Result<T>
where
    T: Tally,
    I: Fn() -> T + Sync,
    F: Fn(u64, &mut T) + Sync,
{
    let chunks = mc.replications.div_ceil(CHUNK);
    let work = || {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut tally = init();
                let end = ((c + 1) * CHUNK).min(mc.replications);
                for rep in c * CHUNK..end {
                    body(rep, &mut tally);
                }
                tally
            })
            .collect::<Vec<T>>()
    };
    let parts = if mc.threads == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(mc.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work)
    };
    let mut parts = parts.into_iter();
    let mut total = parts.next().unwrap_or_else(&init);
    for part in parts {
        total.merge(part);
    }
    Ok(total)
}

/// `P(event)` where `event` consumes one replication's primary substream.
pub fn mc_tail<E>(mc: &MonteCarlo, event: E) -> Result<TailEstimate>
where
    E: Fn(&mut StreamRng) -> bool + Sync,
{
    mc.validate()?;
    let counts = run_replications(
        mc,
        || Counts::zeros(1),
        |rep, tally| {
            let mut rng = mc.key(Lane::Primary, rep).rng();
            if event(&mut rng) {
                tally.0[0] += 1;
            }
        },
    )?;
    Ok(mc.estimate(counts.0[0]))
}

/// 2x2 table of outcomes for two events evaluated on the same paths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointCounts {
    pub both: u64,
    pub lhs_only: u64,
    pub rhs_only: u64,
    pub neither: u64,
}

impl JointCounts {
    pub fn record(&mut self, lhs: bool, rhs: bool) {
        self.add(lhs, rhs, 1);
    }

    /// Records one outcome carrying integer weight `weight`.
    pub fn add(&mut self, lhs: bool, rhs: bool, weight: u64) {
        match (lhs, rhs) {
            (true, true) => self.both += weight,
            (true, false) => self.lhs_only += weight,
            (false, true) => self.rhs_only += weight,
            (false, false) => self.neither += weight,
        }
    }

    pub fn lhs(&self) -> u64 {
        self.both + self.lhs_only
    }

    pub fn rhs(&self) -> u64 {
        self.both + self.rhs_only
    }

    pub fn total(&self) -> u64 {
        self.both + self.lhs_only + self.rhs_only + self.neither
    }
}

impl Tally for JointCounts {
    fn merge(&mut self, other: Self) {
        self.both += other.both;
        self.lhs_only += other.lhs_only;
        self.rhs_only += other.rhs_only;
        self.neither += other.neither;
    }
}

impl Tally for Vec<JointCounts> {
    fn merge(&mut self, other: Self) {
        for (a, b) in self.iter_mut().zip(other) {
            a.merge(b);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTail {
    pub lhs: TailEstimate,
    pub rhs: TailEstimate,
    pub joint: JointCounts,
}

/// Both events evaluated on the same generated path in every replication.
pub fn paired_tail<P, G, L, R>(mc: &MonteCarlo, path: G, lhs: L, rhs: R) -> Result<PairedTail>
where
    G: Fn(&mut StreamRng) -> P + Sync,
    L: Fn(&P) -> bool + Sync,
    R: Fn(&P) -> bool + Sync,
{
    mc.validate()?;
    let joint = run_replications(mc, JointCounts::default, |rep, tally| {
        let mut rng = mc.key(Lane::Primary, rep).rng();
        let p = path(&mut rng);
        tally.record(lhs(&p), rhs(&p));
    })?;
    Ok(PairedTail {
        lhs: mc.estimate(joint.lhs()),
        rhs: mc.estimate(joint.rhs()),
        joint,
    })
}
