//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use serde_json::{json, Value};

use tailcmp::norming::FunctionPair;
use tailcmp::sources::{sample_stable, stable_symmetric, StreamRng};
use tailcmp::space::norm_coords;
use tailcmp::suite::{
    check_contraction, check_rescaled_signs, check_rescaled_symmetric, power_of_two_grid,
    random_fixed_case, random_norming_pair, run_wlln, Branch, WllnPlan,
};
use tailcmp::transforms::{desymmetrize_split, truncate, TransformContext};
use tailcmp::{
    DistributionSpec, Kind, Lane, Lifting, Mode, MonteCarlo, NormExponent, NormingPair, SpaceSpec,
    StreamKey, Vector, Verdict,
};

const SEED: u64 = 20_240_917;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rng(lane: Lane, index: u64) -> StreamRng {
    StreamKey::new(SEED, lane, index).rng()
}

fn fixed_vector_sweep(limit: Duration, contraction: bool) -> Outcome {
    let start = Instant::now();
    let (mut points, mut failures, mut max_n) = (0usize, Vec::new(), 0);
    for index in 0..50 {
        let case = random_fixed_case(SEED, index, 12).map_err(|e| e.to_string())?;
        max_n = max_n.max(case.vectors.len());
        let reports = if contraction {
            check_contraction(&case.vectors, &case.alpha, &case.space, None, Mode::Exact)
        } else {
            check_rescaled_signs(
                &case.vectors,
                &case.functions,
                &case.space,
                None,
                Mode::Exact,
            )
        }
        .map_err(|e| format!("case {index}: {e}"))?;
        points += reports.len();
        failures.extend(
            reports
                .iter()
                .filter(|r| r.verdict != Verdict::Holds)
                .map(|r| format!("case {index} t={}", r.t)),
        );
    }
    let elapsed = start.elapsed();
    ensure(
        failures.is_empty() && points == 50 * 50 && elapsed < limit,
        format!(
            "{points} grid points over 50 configs (max n = {max_n}), {} exceptions {:?}, {:.1}s (limit {}s)",
            failures.len(),
            failures.iter().take(3).collect::<Vec<_>>(),
            elapsed.as_secs_f64(),
            limit.as_secs()
        ),
    )
}

fn ac1() -> Outcome {
    fixed_vector_sweep(Duration::from_secs(60), false)
}

fn ac2() -> Outcome {
    fixed_vector_sweep(Duration::from_secs(60), true)
}

/// The 20 (law, p, n) triples: every law and p once with n cycling, plus one
/// more per law at a different n.
fn ac3_configs() -> Vec<(DistributionSpec, f64, usize)> {
    let laws = [
        DistributionSpec::pareto_symmetric(0.8),
        DistributionSpec::pareto_symmetric(1.2),
        DistributionSpec::pareto_symmetric(2.0),
        DistributionSpec::stable_symmetric(1.0),
        DistributionSpec::stable_symmetric(1.5),
    ];
    let ps = [1.0, 1.5, 2.0];
    let ns = [16, 64, 256];
    let mut out = Vec::new();
    for (i, law) in laws.iter().enumerate() {
        for (j, p) in ps.iter().enumerate() {
            out.push((law.clone(), *p, ns[(i + j) % 3]));
        }
    }
    for (i, law) in laws.iter().enumerate() {
        out.push((law.clone(), ps[i % 3], ns[(2 * i + 1) % 3]));
    }
    out
}

fn ac3() -> Outcome {
    let start = Instant::now();
    let line = SpaceSpec::real_line();
    let (mut points, mut violated, mut inconclusive) = (0, 0, 0);
    let mut worst = f64::INFINITY;
    for (index, (law, p, n)) in ac3_configs().into_iter().enumerate() {
        let pair = NormingPair::power(1.0 / p, 1.0, n).map_err(|e| e.to_string())?;
        let functions = FunctionPair::build(&pair).map_err(|e| e.to_string())?;
        let mc = MonteCarlo::new(1_000_000, SEED + index as u64);
        let reports = check_rescaled_symmetric(&law, &line, &functions, n, None, &mc)
            .map_err(|e| format!("config {index}: {e}"))?;
        points += reports.len();
        for r in &reports {
            worst = worst.min(r.sigma_margin);
            match r.verdict {
                Verdict::Violated => violated += 1,
                Verdict::Inconclusive => inconclusive += 1,
                Verdict::Holds => {}
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(
        violated == 0 && elapsed < Duration::from_secs(600),
        format!(
            "20 configs, {points} grid points, R = 1e6: {violated} violated, {inconclusive} inconclusive, \
             smallest margin {worst:.1} sigma, {:.0}s (limit 600s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn ac4() -> Outcome {
    let mut families: Vec<NormingPair> = vec![
        NormingPair::power(1.0, 1.0, 64),
        NormingPair::power(0.5, 1.0, 64),
        NormingPair::power(2.0 / 3.0, 1.0, 64),
        NormingPair::power(0.7, 1.3, 64),
        NormingPair::power(1.0, 2.0, 64),
    ]
    .into_iter()
    .collect::<Result<_, _>>()
    .map_err(|e| e.to_string())?;
    let mut configs = rng(Lane::Configs, 1);
    for _ in 0..5 {
        families.push(random_norming_pair(&mut configs, 64).map_err(|e| e.to_string())?);
    }
    let qs = [
        NormExponent::Finite(1.0),
        NormExponent::Finite(2.0),
        NormExponent::Infinity,
    ];
    let (mut draws, mut mismatches) = (0u64, 0u64);
    for (f, pair) in families.iter().enumerate() {
        let functions = FunctionPair::build(pair).map_err(|e| e.to_string())?;
        let space = SpaceSpec::new(1 + f % 4, qs[f % 3]).map_err(|e| e.to_string())?;
        let top = functions.b(functions.horizon());
        let contexts: Vec<TransformContext> = (1..=functions.horizon())
            .map(|n| TransformContext::new(&functions, space, n))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let mut g = rng(Lane::Primary, f as u64);
        let mut coords = vec![0.0; space.dim];
        for _ in 0..1_000_000 {
            let n = g.gen_range(1..=functions.horizon());
            let b_n = functions.b(n);
            let r = match g.gen_range(0..10) {
                0..=3 => g.gen_range(0.0..1.2 * top),
                4 | 5 => functions.b(g.gen_range(1..=functions.horizon())),
                6 => b_n * (1.0 + g.gen_range(-1e-9..1e-9)),
                _ => b_n * g.gen_range(0.0f64..1.0).powf(-1.5),
            };
            loop {
                for c in coords.iter_mut() {
                    *c = g.gen_range(-1.0..1.0);
                }
                let norm = norm_coords(&coords, space.q);
                if norm > 1e-6 {
                    coords.iter_mut().for_each(|c| *c *= r / norm);
                    break;
                }
            }
            let v = Vector::new(coords.clone()).map_err(|e| e.to_string())?;
            draws += 1;
            if !contexts[n - 1]
                .event_identity_holds(&v)
                .map_err(|e| e.to_string())?
            {
                mismatches += 1;
            }
        }
    }
    ensure(
        mismatches == 0 && draws == 10_000_000,
        format!("{draws} draws over 10 norming families, {mismatches} mismatches"),
    )
}

fn ac5() -> Outcome {
    let mut g = rng(Lane::Primary, 5);
    let uniform = DistributionSpec::new(Kind::UniformBall { radius: 10.0 }, Lifting::Scalar);
    let mut worst = 0.0f64;
    for list in 0..100_000u64 {
        let space = SpaceSpec::new(
            1 + (list % 4) as usize,
            NormExponent::Finite(1.0 + (list % 3) as f64),
        )
        .map_err(|e| e.to_string())?;
        let len = g.gen_range(1..=32);
        let terms = tailcmp::sources::sample(
            &uniform,
            &space,
            StreamKey::new(SEED, Lane::Copy, list),
            len,
        )
        .map_err(|e| e.to_string())?;
        let threshold = g.gen_range(0.0..10.0);
        let split = desymmetrize_split(&space, &terms, threshold).map_err(|e| e.to_string())?;
        let mut direct = vec![0.0; space.dim];
        for t in &terms {
            let kept = truncate(&space, t, threshold).map_err(|e| e.to_string())?;
            for (d, x) in direct.iter_mut().zip(kept.coords()) {
                *d += x;
            }
        }
        for (a, b) in split.half_sum().coords().iter().zip(&direct) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(
        worst <= 1e-12,
        format!("100000 lists, largest coordinate difference {worst:.2e} (limit 1e-12)"),
    )
}

fn ac6() -> Outcome {
    let mut g = rng(Lane::Configs, 6);
    let (mut knot_errors, mut non_monotone, mut worst_round_trip) = (0, 0, 0.0f64);
    for _ in 0..100 {
        let pair = random_norming_pair(&mut g, 256).map_err(|e| e.to_string())?;
        let f = FunctionPair::build(&pair).map_err(|e| e.to_string())?;
        for n in 1..=256 {
            let t = n as f64;
            if f.eval_phi(t).unwrap() != pair.a(n) || f.eval_psi(t).unwrap() != pair.b(n) {
                knot_errors += 1;
            }
        }
        if !f.check_ratio_monotone(1000).monotone {
            non_monotone += 1;
        }
        let top = pair.b(256);
        for _ in 0..1000 {
            let s = g.gen_range(0.0..=top);
            let back = f.eval_psi(f.eval_psi_inverse(s).unwrap()).unwrap();
            if s > 0.0 {
                worst_round_trip = worst_round_trip.max((back - s).abs() / s);
            }
        }
        for n in 1..=256 {
            let s = pair.b(n);
            worst_round_trip = worst_round_trip
                .max((f.eval_psi(f.eval_psi_inverse(s).unwrap()).unwrap() - s).abs() / s);
        }
    }
    ensure(
        knot_errors == 0 && non_monotone == 0 && worst_round_trip <= 1e-12,
        format!(
            "100 pairs with N = 256: {knot_errors} knot mismatches, {non_monotone} non-monotone ratios, \
             worst inverse round trip {worst_round_trip:.2e} relative"
        ),
    )
}

fn ac7() -> Outcome {
    let law = DistributionSpec::pareto_symmetric(2.5);
    let top = 1 << 14;
    let pair = NormingPair::power(2.0 / 3.0, 2.0 / 3.0, top).map_err(|e| e.to_string())?;
    let mut plan = WllnPlan::new(power_of_two_grid(top));
    plan.stable_type_p = Some(1.5);
    let diag = run_wlln(
        &law,
        &SpaceSpec::real_line(),
        &pair,
        &plan,
        &MonteCarlo::new(100_000, SEED + 7),
    )
    .map_err(|e| e.to_string())?;
    let mut criterion_error = 0.0f64;
    for row in &diag.rows {
        let n = row.n as f64;
        // P(|X| > b) = b^-2.5 with b = n^(2/3).
        let oracle = n * n.powf(2.0 / 3.0).powf(-2.5);
        let got = row.criterion.analytic.ok_or("no analytic criterion")?;
        criterion_error = criterion_error.max((got - oracle).abs() / oracle);
        criterion_error = criterion_error.max((got - n.powf(-2.0 / 3.0)).abs() / oracle);
    }
    let at_8192 = diag
        .rows
        .iter()
        .find(|r| r.n == 1 << 13)
        .and_then(|r| r.criterion.analytic);
    let last = diag.rows.last().ok_or("no rows")?;
    let highs: Vec<String> = last
        .estimates
        .iter()
        .map(|e| format!("{:.4}", e.ci_high))
        .collect();
    ensure(
        criterion_error <= 1e-12 && diag.branch == Branch::Converges,
        format!(
            "criterion n^(-2/3) rel err {criterion_error:.1e} (n = 2^13: {:.6}); at n = {} CI upper bounds {:?} \
             for lambda {:?}, threshold 0.02; branch {}",
            at_8192.unwrap_or(f64::NAN),
            last.n,
            highs,
            diag.lambda_grid,
            diag.branch.as_str()
        ),
    )
}

fn ac8() -> Outcome {
    let law = DistributionSpec::stable_symmetric(1.0);
    let grid = vec![1 << 10, 1 << 12, 1 << 14];
    let pair = NormingPair::power(1.0, 1.0, 1 << 14).map_err(|e| e.to_string())?;
    let mut plan = WllnPlan::new(grid.clone());
    plan.lambda_grid = vec![0.25, 0.5, 1.0, 2.0];
    let r = 100_000u64;
    let diag = run_wlln(
        &law,
        &SpaceSpec::real_line(),
        &pair,
        &plan,
        &MonteCarlo::new(r, SEED + 8),
    )
    .map_err(|e| e.to_string())?;
    let mut problems = Vec::new();
    let mut details = Vec::new();

    // |S_n / n| is standard Cauchy: P(|C| > 1) = 1/2.
    let two_sided = 1.0 - 2.0 * 1f64.atan() / PI;
    let sigma = (two_sided * (1.0 - two_sided) / r as f64).sqrt();
    let idx = plan.lambda_grid.iter().position(|&l| l == 1.0).unwrap();
    for row in &diag.rows {
        let p = row.estimates[idx].p_hat;
        details.push(format!("n={} P(|S|/n>1)={p:.4}", row.n));
        if (p - two_sided).abs() > 3.0 * sigma {
            problems.push(format!("two-sided at n = {}", row.n));
        }
    }
    if diag.branch != Branch::BoundedAway {
        problems.push(format!("branch {}", diag.branch.as_str()));
    }
    let last = diag.rows.last().ok_or("no rows")?;
    let n = last.n as f64;
    let criterion_oracle = n * 2.0 / PI * (1.0 / n).atan();
    let c = &last.criterion;
    if (c.empirical - criterion_oracle).abs() > 3.0 * c.empirical_std_error {
        problems.push("criterion".into());
    }
    details.push(format!(
        "criterion {:.4} +- {:.4} vs {criterion_oracle:.4} (2/pi = {:.4})",
        c.empirical,
        c.empirical_std_error,
        2.0 / PI
    ));

    // One-sided tail P(S_n / n > 1) = 1/2 - arctan(1)/pi = 1/4, on nested paths.
    let one_sided = 0.5 - 1f64.atan() / PI;
    let paths = 20_000u64;
    let mut hits = vec![0u64; grid.len()];
    for rep in 0..paths {
        let mut g = StreamKey::new(SEED + 80, Lane::Primary, rep).rng();
        let (mut sum, mut k) = (0.0, 0);
        for i in 1..=*grid.last().unwrap() {
            sum += stable_symmetric(1.0, &mut g);
            if i == grid[k] {
                if sum / i as f64 > 1.0 {
                    hits[k] += 1;
                }
                k += 1;
            }
        }
    }
    let sigma1 = (one_sided * (1.0 - one_sided) / paths as f64).sqrt();
    for (n, h) in grid.iter().zip(&hits) {
        let p = *h as f64 / paths as f64;
        details.push(format!("n={n} P(S/n>1)={p:.4}"));
        if (p - one_sided).abs() > 3.0 * sigma1 {
            problems.push(format!("one-sided at n = {n}"));
        }
    }
    details.push(format!("branch {}", diag.branch.as_str()));
    ensure(
        problems.is_empty(),
        format!(
            "{}{}",
            details.join("; "),
            if problems.is_empty() {
                String::new()
            } else {
                format!("; off: {problems:?}")
            }
        ),
    )
}

fn ac9() -> Outcome {
    let r = 1_000_000usize;
    let bound = 4.0 / (r as f64).sqrt();
    let mut worst = 0.0f64;
    for (i, alpha) in [1.0, 1.5, 2.0].into_iter().enumerate() {
        let xs = sample_stable(
            alpha,
            StreamKey::new(SEED, Lane::Primary, 900 + i as u64),
            r,
        )
        .map_err(|e| e.to_string())?;
        for t in [0.25, 0.5, 1.0, 2.0] {
            let mean = xs.iter().map(|x| (t * x).cos()).sum::<f64>() / r as f64;
            let exact = (-f64::powf(t, alpha)).exp();
            worst = worst.max((mean - exact).abs());
        }
    }
    ensure(
        worst <= bound,
        format!("largest |mean cos(tX) - exp(-|t|^alpha)| = {worst:.2e} (limit {bound:.2e})"),
    )
}

fn run_cli(config: &Path, out: &Path, threads: usize) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_tailcmp"))
        .args(["run", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--threads", &threads.to_string()])
        .stderr(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    if status.code() != Some(0) {
        return Err(format!("{} exited with {status}", config.display()));
    }
    fs::read(out.join("results.csv")).map_err(|e| e.to_string())
}

fn ac10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let configs: Vec<(&str, Value)> = vec![
        (
            "signs_and_contraction",
            json!({
                "schema_version": 1, "experiment": "sweep", "seed": SEED,
                "random_cases": {"count": 50, "max_n": 12}
            }),
        ),
        (
            "symmetric",
            json!({
                "schema_version": 1, "experiment": "rescaled_symmetric", "seed": SEED,
                "distribution": {"kind": "stable_symmetric", "alpha": 1.5},
                "norming": {"a": {"power": 0.6666666666666666}, "b": {"power": 1.0}},
                "n": 64, "R": 100000
            }),
        ),
        (
            "wlln",
            json!({
                "schema_version": 1, "experiment": "wlln", "seed": SEED,
                "distribution": {"kind": "stable_symmetric", "alpha": 1.0},
                "norming": {"a": {"power": 1.0}, "b": {"power": 1.0}},
                "n_grid": [1024, 4096], "R": 10000, "cross_check": true
            }),
        ),
    ];
    let mut checked = Vec::new();
    for (name, value) in configs {
        let path = dir.path().join(format!("{name}.json"));
        fs::write(&path, value.to_string()).map_err(|e| e.to_string())?;
        let one = run_cli(&path, &dir.path().join(format!("{name}-1")), 1)?;
        let four = run_cli(&path, &dir.path().join(format!("{name}-4")), 4)?;
        if one != four {
            return Err(format!(
                "{name}: results.csv differs between 1 and 4 threads"
            ));
        }
        checked.push(format!("{name} ({} bytes)", one.len()));
    }
    Ok(format!(
        "byte-identical with --threads 1 and 4: {}",
        checked.join(", ")
    ))
}

type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("AC1", "exact rescaled sign comparison", ac1),
        ("AC2", "exact contraction", ac2),
        ("AC3", "Monte Carlo rescaled symmetric comparison", ac3),
        ("AC4", "event identity", ac4),
        ("AC5", "desymmetrization identity", ac5),
        ("AC6", "norming function construction", ac6),
        ("AC7", "weak law, convergence branch", ac7),
        ("AC8", "weak law, divergence branch", ac8),
        ("AC9", "stable generator", ac9),
        ("AC10", "thread-count determinism", ac10),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (id, title, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let start = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {id} {title} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {id} {title} ({secs:.1}s): {detail}");
            }
        }
    }
    println!("{} failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
