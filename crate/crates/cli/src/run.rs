//! Executes a parsed configuration and writes its artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use tailcmp::suite::{
    check_contraction, check_levy, check_rescaled_signs, check_rescaled_symmetric,
    cross_check_symmetrization, overall_verdict, power_of_two_grid, random_fixed_case, run_wlln,
    WllnPlan,
};
use tailcmp::{FunctionPair, InequalityReport, Lane, Mode, MonteCarlo, StreamKey, Verdict};

use crate::config::{ExperimentConfig, ExperimentKind, ModeName};
use crate::error::{CliError, Result, EXIT_VIOLATION};
use crate::output::{self, Table};

pub const DEFAULT_OUT: &str = "tailcmp-out";
pub const DEFAULT_GRID_PER_UNIT: usize = 10;

/// What a run produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub out_dir: PathBuf,
    /// Overall verdict of the inequality checks, if any ran.
    pub verdict: Option<Verdict>,
    pub summary: serde_json::Value,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            Some(Verdict::Violated) => EXIT_VIOLATION,
            _ => 0,
        }
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    seed: Option<u64>,
    threads: usize,
    wall_time_seconds: f64,
    config: &'a ExperimentConfig,
}

#[derive(Debug, Clone, Serialize)]
struct CheckSummary {
    case: String,
    experiment: ExperimentKind,
    seed: Option<u64>,
    verdict: Verdict,
    points: usize,
    holds: usize,
    violated: usize,
    inconclusive: usize,
    min_sigma_margin: f64,
    min_slack: f64,
}

impl CheckSummary {
    fn new(
        case: &str,
        kind: ExperimentKind,
        seed: Option<u64>,
        reports: &[InequalityReport],
    ) -> Self {
        let count = |v: Verdict| reports.iter().filter(|r| r.verdict == v).count();
        CheckSummary {
            case: case.to_string(),
            experiment: kind,
            seed,
            verdict: overall_verdict(reports),
            points: reports.len(),
            holds: count(Verdict::Holds),
            violated: count(Verdict::Violated),
            inconclusive: count(Verdict::Inconclusive),
            min_sigma_margin: reports
                .iter()
                .map(|r| r.sigma_margin)
                .fold(f64::INFINITY, f64::min),
            min_slack: reports
                .iter()
                .map(|r| r.slack)
                .fold(f64::INFINITY, f64::min),
        }
    }
}

fn to_value<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).unwrap_or(serde_json::Value::Null)
}

/// Seed of sub-experiment `index`, independent of the random-case streams.
pub fn derived_seed(seed: u64, index: u64) -> u64 {
    StreamKey::new(seed, Lane::Configs, index | 1 << 63)
        .rng()
        .next_u64()
}

fn monte_carlo(config: &ExperimentConfig, seed: u64, threads: usize) -> Result<MonteCarlo> {
    let mc = MonteCarlo::new(config.replications()?, seed)
        .with_confidence(config.confidence())
        .with_threads(threads);
    mc.validate()?;
    Ok(mc)
}

fn mode(config: &ExperimentConfig, seed: u64, threads: usize) -> Result<Mode> {
    Ok(match config.mode() {
        ModeName::Exact => Mode::Exact,
        ModeName::MonteCarlo => Mode::MonteCarlo(monte_carlo(config, seed, threads)?),
    })
}

/// Runs one inequality experiment.
pub fn run_inequality(
    config: &ExperimentConfig,
    seed: u64,
    threads: usize,
) -> Result<Vec<InequalityReport>> {
    let space = config.space();
    let t_grid = config.t_grid.as_deref();
    let reports = match config.experiment {
        ExperimentKind::RescaledSigns => {
            let vectors = config.require(&config.vectors, "vectors")?;
            let pair = config
                .require(&config.norming, "norming")?
                .build(vectors.len())?;
            let functions = FunctionPair::build(&pair)?;
            check_rescaled_signs(
                vectors,
                &functions,
                &space,
                t_grid,
                mode(config, seed, threads)?,
            )?
        }
        ExperimentKind::Contraction => {
            let vectors = config.require(&config.vectors, "vectors")?;
            let alpha = config.require(&config.alpha_weights, "alpha_weights")?;
            check_contraction(vectors, alpha, &space, t_grid, mode(config, seed, threads)?)?
        }
        ExperimentKind::RescaledSymmetric => {
            let n = *config.require(&config.n, "n")?;
            let pair = config.require(&config.norming, "norming")?.build(n)?;
            let functions = FunctionPair::build(&pair)?;
            let spec = config.require(&config.distribution, "distribution")?;
            let mc = monte_carlo(config, seed, threads)?;
            check_rescaled_symmetric(spec, &space, &functions, n, t_grid, &mc)?
        }
        ExperimentKind::Levy => {
            let n = *config.require(&config.n, "n")?;
            let b = match &config.norming {
                Some(source) => source.build(n)?.b(n),
                None => n as f64,
            };
            let spec = config.require(&config.distribution, "distribution")?;
            check_levy(spec, &space, n, b, t_grid, mode(config, seed, threads)?)?
        }
        other => {
            return Err(CliError::invalid(
                "experiment",
                format!("{} is not an inequality check", other.as_str()),
            ))
        }
    };
    Ok(reports)
}

struct Artifacts {
    table: Table,
    verdict: Option<Verdict>,
    summary: serde_json::Value,
}

fn inequality(config: &ExperimentConfig, seed: u64, threads: usize) -> Result<Artifacts> {
    let reports = run_inequality(config, seed, threads)?;
    let name = config.experiment.as_str();
    let summary = CheckSummary::new(name, config.experiment, Some(seed), &reports);
    Ok(Artifacts {
        table: output::inequality_table([(name, reports.as_slice())]),
        verdict: Some(summary.verdict),
        summary: to_value(&summary),
    })
}

fn wlln(config: &ExperimentConfig, seed: u64, threads: usize) -> Result<Artifacts> {
    let spec = config.require(&config.distribution, "distribution")?;
    let source = config.require(&config.norming, "norming")?;
    let space = config.space();
    let n_grid = match &config.n_grid {
        Some(grid) => grid.clone(),
        None => {
            let n_max = source
                .n_max
                .ok_or_else(|| CliError::MissingKey("n_grid".into()))?;
            power_of_two_grid(n_max)
        }
    };
    let top = n_grid.last().copied().unwrap_or(0);
    let pair = source.build(top)?;
    let mut plan = WllnPlan::new(n_grid);
    if let Some(lambdas) = &config.lambda_grid {
        plan.lambda_grid = lambdas.clone();
    }
    if let Some(c) = config.centering {
        plan.centering = c;
    }
    plan.stable_type_p = config.stable_type_p;
    let mc = monte_carlo(config, seed, threads)?;

    let mut table = Table::new(&output::WLLN_COLUMNS);
    let describe = |d: &tailcmp::WllnDiagnostic| {
        let flat: Vec<bool> = (0..d.lambda_grid.len())
            .map(|i| d.flat_within_ci(i))
            .collect();
        serde_json::json!({
            "summary": d.summary,
            "branch": d.branch,
            "note": d.note,
            "lambda_grid": d.lambda_grid,
            "n_grid": d.n_grid(),
            "flat_within_ci": flat,
        })
    };
    let summary = if config.cross_check.unwrap_or(false) {
        let check = cross_check_symmetrization(spec, &space, &pair, &plan, &mc)?;
        output::wlln_rows(&mut table, "centered", &check.centered);
        output::wlln_rows(&mut table, "symmetrized", &check.symmetrized);
        serde_json::json!({
            "experiment": "wlln",
            "seed": seed,
            "centered": describe(&check.centered),
            "symmetrized": describe(&check.symmetrized),
            "agree": check.agree,
        })
    } else {
        let diag = run_wlln(spec, &space, &pair, &plan, &mc)?;
        output::wlln_rows(&mut table, "centered", &diag);
        serde_json::json!({
            "experiment": "wlln",
            "seed": seed,
            "centered": describe(&diag),
        })
    };
    Ok(Artifacts {
        table,
        verdict: None,
        summary,
    })
}

fn construct(config: &ExperimentConfig) -> Result<Artifacts> {
    let source = config.require(&config.norming, "norming")?;
    let pair = source.build(config.n.unwrap_or(1))?;
    let functions = FunctionPair::build(&pair)?;
    let per_unit = config.grid_per_unit.unwrap_or(DEFAULT_GRID_PER_UNIT);
    let table = output::construct_table(&functions, per_unit)?;
    let mut summary = serde_json::json!({
        "experiment": "construct",
        "horizon": functions.horizon(),
        "grid_per_unit": per_unit,
        "ratio": functions.check_ratio_monotone(per_unit),
    });
    if let Some(p) = config.stable_type_p {
        summary["stable_type_p"] = serde_json::json!({
            "p": p,
            "ok": pair.check_stable_type_norming(p).is_ok(),
        });
    }
    Ok(Artifacts {
        table,
        verdict: None,
        summary,
    })
}

/// One member of a sweep.
struct Case {
    name: String,
    seed: u64,
    config: ExperimentConfig,
}

fn sweep_cases(config: &ExperimentConfig, seed: u64) -> Result<Vec<Case>> {
    let mut cases = Vec::new();
    for (i, e) in config.experiments.iter().flatten().enumerate() {
        let mut e = e.clone();
        e.confidence = e.confidence.or(config.confidence);
        cases.push(Case {
            name: format!("{i}:{}", e.experiment.as_str()),
            seed: e.seed.unwrap_or_else(|| derived_seed(seed, i as u64)),
            config: e,
        });
    }
    if let Some(random) = &config.random_cases {
        let kinds = random
            .kinds
            .clone()
            .unwrap_or_else(|| vec![ExperimentKind::RescaledSigns, ExperimentKind::Contraction]);
        let offset = cases.len() as u64;
        for index in 0..random.count {
            let case = random_fixed_case(seed, index, random.max_n)?;
            for kind in &kinds {
                let mut e = config.clone();
                e.experiment = *kind;
                e.experiments = None;
                e.random_cases = None;
                e.space = Some(case.space);
                e.vectors = Some(case.vectors.clone());
                e.norming = Some(crate::config::NormingSource {
                    a: crate::config::SequenceSource::Values(case.pair.a_values().to_vec()),
                    b: crate::config::SequenceSource::Values(case.pair.b_values().to_vec()),
                    n_max: None,
                });
                e.alpha_weights = Some(case.alpha.clone());
                cases.push(Case {
                    name: format!("random{index}:{}", kind.as_str()),
                    seed: derived_seed(seed, offset + index),
                    config: e,
                });
            }
        }
    }
    Ok(cases)
}

fn sweep(config: &ExperimentConfig, seed: u64, threads: usize) -> Result<Artifacts> {
    let cases = sweep_cases(config, seed)?;
    let work = || {
        cases
            .par_iter()
            .map(|c| run_inequality(&c.config, c.seed, 0))
            .collect::<Vec<_>>()
    };
    let results = if threads == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::invalid("threads", e.to_string()))?
            .install(work)
    };
    let mut reports = Vec::with_capacity(results.len());
    for (case, result) in cases.iter().zip(results) {
        let r =
            result.map_err(|e| CliError::invalid(&format!("case {}", case.name), e.to_string()))?;
        reports.push(r);
    }
    let table = output::inequality_table(
        cases
            .iter()
            .zip(&reports)
            .map(|(c, r)| (c.name.as_str(), r.as_slice())),
    );
    let per_case: Vec<CheckSummary> = cases
        .iter()
        .zip(&reports)
        .map(|(c, r)| CheckSummary::new(&c.name, c.config.experiment, Some(c.seed), r))
        .collect();
    let verdict = overall_verdict(reports.iter().flatten());
    let count = |v: Verdict| per_case.iter().filter(|c| c.verdict == v).count();
    let summary = serde_json::json!({
        "experiment": "sweep",
        "seed": seed,
        "verdict": verdict,
        "cases": per_case.len(),
        "holds": count(Verdict::Holds),
        "violated": count(Verdict::Violated),
        "inconclusive": count(Verdict::Inconclusive),
        "per_case": per_case,
    });
    Ok(Artifacts {
        table,
        verdict: Some(verdict),
        summary,
    })
}

/// Runs `config` and writes `results.csv`, `summary.json` and `manifest.json`
/// into its output directory.
pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    let start = Instant::now();
    let threads = config.threads.unwrap_or(0);
    let artifacts = match config.experiment {
        ExperimentKind::Construct => construct(config)?,
        ExperimentKind::Wlln => wlln(config, config.seed()?, threads)?,
        ExperimentKind::Sweep => sweep(config, config.seed()?, threads)?,
        _ => inequality(config, config.seed()?, threads)?,
    };
    let out_dir = config
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let (verdict, summary) = (artifacts.verdict, artifacts.summary.clone());
    write(&out_dir, config, artifacts, threads, start)?;
    Ok(Outcome {
        out_dir,
        verdict,
        summary,
    })
}

fn write(
    dir: &Path,
    config: &ExperimentConfig,
    a: Artifacts,
    threads: usize,
    start: Instant,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    output::write_text(dir, output::RESULTS_FILE, &a.table.into_string())?;
    output::write_json(dir, output::SUMMARY_FILE, &a.summary)?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        threads,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        config,
    };
    output::write_json(dir, output::MANIFEST_FILE, &manifest)
}

/// Builds every component a run would use without sampling: norming pairs,
/// function pairs, samplers and Monte Carlo settings.
pub fn dry_run(config: &ExperimentConfig) -> Result<()> {
    let check = |e: &ExperimentConfig| -> Result<()> {
        let space = e.space();
        space.validate()?;
        if let Some(vectors) = &e.vectors {
            for v in vectors {
                space.conforms(v)?;
            }
        }
        if let Some(source) = &e.norming {
            let needed =
                e.n.or(e.n_grid.as_ref().and_then(|g| g.last().copied()))
                    .or(e.vectors.as_ref().map(Vec::len))
                    .unwrap_or(1);
            FunctionPair::build(&source.build(needed)?)?;
        }
        if let Some(spec) = &e.distribution {
            tailcmp::sources::Sampler::new(spec, &space)?;
        }
        if e.replications.is_some() {
            MonteCarlo::new(e.replications()?, 0)
                .with_confidence(e.confidence())
                .validate()?;
        }
        Ok(())
    };
    check(config)?;
    for e in config.experiments.iter().flatten() {
        check(e)?;
    }
    Ok(())
}
