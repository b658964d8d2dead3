//! Experiment configuration: a single versioned JSON document.
//!
//! Top-level scalars may be overridden from the command line before the
//! document is deserialized, so the echo written to `manifest.json` is the
//! effective configuration and can be fed back in unchanged.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use tailcmp::estimator::DEFAULT_CONFIDENCE;
use tailcmp::suite::CenteringChoice;
use tailcmp::{DistributionSpec, NormingPair, SpaceSpec, Vector};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RescaledSigns,
    RescaledSymmetric,
    Contraction,
    Levy,
    Wlln,
    Construct,
    Sweep,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::RescaledSigns => "rescaled_signs",
            ExperimentKind::RescaledSymmetric => "rescaled_symmetric",
            ExperimentKind::Contraction => "contraction",
            ExperimentKind::Levy => "levy",
            ExperimentKind::Wlln => "wlln",
            ExperimentKind::Construct => "construct",
            ExperimentKind::Sweep => "sweep",
        }
    }

    /// Kinds that produce inequality reports.
    pub fn is_inequality(self) -> bool {
        matches!(
            self,
            ExperimentKind::RescaledSigns
                | ExperimentKind::RescaledSymmetric
                | ExperimentKind::Contraction
                | ExperimentKind::Levy
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerLaw {
    pub power: f64,
}

/// Either explicit terms `x_1..x_N` or `x_n = n^power`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SequenceSource {
    Values(Vec<f64>),
    Power(PowerLaw),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormingSource {
    pub a: SequenceSource,
    pub b: SequenceSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
}

impl NormingSource {
    /// Builds the pair; `needed` is the length used when both sides are power
    /// laws and `n_max` is absent.
    pub fn build(&self, needed: usize) -> Result<NormingPair> {
        let explicit = [&self.a, &self.b].into_iter().find_map(|s| match s {
            SequenceSource::Values(v) => Some(v.len()),
            SequenceSource::Power(_) => None,
        });
        let len = self.n_max.or(explicit).unwrap_or(needed);
        if len < needed {
            return Err(CliError::invalid(
                "norming.n_max",
                format!("{len} terms but n = {needed} is required"),
            ));
        }
        let terms = |s: &SequenceSource, key: &str| -> Result<Vec<f64>> {
            match s {
                SequenceSource::Values(v) if v.len() >= len => Ok(v[..len].to_vec()),
                SequenceSource::Values(v) => Err(CliError::invalid(
                    key,
                    format!("{} terms given, {len} required", v.len()),
                )),
                SequenceSource::Power(p) => {
                    Ok((1..=len).map(|n| (n as f64).powf(p.power)).collect())
                }
            }
        };
        Ok(NormingPair::new(
            terms(&self.a, "norming.a")?,
            terms(&self.b, "norming.b")?,
        )?)
    }
}

/// Randomly generated fixed-vector checks for a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomCases {
    pub count: u64,
    pub max_n: usize,
    /// Subset of `rescaled_signs` and `contraction`; both when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinds: Option<Vec<ExperimentKind>>,
}

macro_rules! optional {
    ($($(#[$meta:meta])* $name:ident: $ty:ty,)*) => {
        /// One experiment, or a sweep of experiments.
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct ExperimentConfig {
            pub experiment: ExperimentKind,
            $(
                $(#[$meta])*
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub $name: Option<$ty>,
            )*
        }
    };
}

optional! {
    schema_version: u32,
    seed: u64,
    space: SpaceSpec,
    distribution: DistributionSpec,
    norming: NormingSource,
    n: usize,
    n_grid: Vec<usize>,
    t_grid: Vec<f64>,
    lambda_grid: Vec<f64>,
    #[serde(rename = "R")]
    replications: u64,
    confidence: f64,
    mode: ModeName,
    vectors: Vec<Vector>,
    alpha_weights: Vec<f64>,
    centering: CenteringChoice,
    /// Also require `b_n / n^(1/p)` nondecreasing.
    stable_type_p: f64,
    cross_check: bool,
    grid_per_unit: usize,
    threads: usize,
    experiments: Vec<ExperimentConfig>,
    random_cases: RandomCases,
    out: PathBuf,
}

impl ExperimentConfig {
    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| CliError::MissingKey("seed".into()))
    }

    pub fn replications(&self) -> Result<u64> {
        self.replications
            .ok_or_else(|| CliError::MissingKey("R".into()))
    }

    pub fn confidence(&self) -> f64 {
        self.confidence.unwrap_or(DEFAULT_CONFIDENCE)
    }

    pub fn space(&self) -> SpaceSpec {
        self.space.unwrap_or_else(SpaceSpec::real_line)
    }

    pub fn mode(&self) -> ModeName {
        self.mode.unwrap_or(ModeName::Exact)
    }

    pub fn require<'a, T>(&self, value: &'a Option<T>, key: &str) -> Result<&'a T> {
        value
            .as_ref()
            .ok_or_else(|| CliError::MissingKey(key.to_string()))
    }

    /// Checks the keys each experiment kind needs. `top_level` configs must
    /// carry the schema version and a seed.
    pub fn validate(&self, top_level: bool) -> Result<()> {
        if top_level {
            match self.schema_version {
                None => return Err(CliError::MissingKey("schema_version".into())),
                Some(SCHEMA_VERSION) => {}
                Some(v) => {
                    return Err(CliError::invalid(
                        "schema_version",
                        format!("unsupported version {v}, expected {SCHEMA_VERSION}"),
                    ))
                }
            }
            if self.experiment != ExperimentKind::Construct {
                self.seed()?;
            }
        }
        if let Some(c) = self.confidence {
            if !(c > 0.0 && c < 1.0) {
                return Err(CliError::invalid("confidence", "must lie in (0, 1)"));
            }
        }
        let monte_carlo = self.mode() == ModeName::MonteCarlo;
        use ExperimentKind::*;
        match self.experiment {
            RescaledSigns => {
                self.require(&self.vectors, "vectors")?;
                self.require(&self.norming, "norming")?;
                if monte_carlo {
                    self.replications()?;
                }
            }
            Contraction => {
                self.require(&self.vectors, "vectors")?;
                self.require(&self.alpha_weights, "alpha_weights")?;
                if monte_carlo {
                    self.replications()?;
                }
            }
            RescaledSymmetric => {
                self.require(&self.distribution, "distribution")?;
                self.require(&self.norming, "norming")?;
                self.require(&self.n, "n")?;
                self.replications()?;
            }
            Levy => {
                self.require(&self.distribution, "distribution")?;
                self.require(&self.n, "n")?;
                if monte_carlo {
                    self.replications()?;
                }
            }
            Wlln => {
                self.require(&self.distribution, "distribution")?;
                self.require(&self.norming, "norming")?;
                self.replications()?;
            }
            Construct => {
                self.require(&self.norming, "norming")?;
            }
            Sweep => {
                if !top_level {
                    return Err(CliError::invalid("experiments", "sweeps cannot be nested"));
                }
                if self.experiments.is_none() && self.random_cases.is_none() {
                    return Err(CliError::MissingKey("experiments".into()));
                }
                for (i, e) in self.experiments.iter().flatten().enumerate() {
                    if !e.experiment.is_inequality() {
                        return Err(CliError::invalid(
                            &format!("experiments[{i}].experiment"),
                            "a sweep holds inequality checks only",
                        ));
                    }
                    e.validate(false)?;
                }
                if let Some(r) = &self.random_cases {
                    for k in r.kinds.iter().flatten() {
                        if !matches!(k, RescaledSigns | Contraction) {
                            return Err(CliError::invalid(
                                "random_cases.kinds",
                                "only rescaled_signs and contraction",
                            ));
                        }
                    }
                    if monte_carlo {
                        self.replications()?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Command-line overrides applied to the top level of the document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub confidence: Option<f64>,
    /// `key=value` pairs; the value is parsed as JSON, or taken as a string.
    pub set: Vec<String>,
}

impl Overrides {
    fn apply(&self, doc: &mut Value) -> Result<()> {
        let obj = doc.as_object_mut().ok_or_else(|| CliError::Schema {
            path: ".".into(),
            message: "expected a JSON object".into(),
        })?;
        for pair in &self.set {
            let (key, raw) = pair
                .split_once('=')
                .ok_or_else(|| CliError::invalid("--set", format!("`{pair}` is not key=value")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
            obj.insert(key.to_string(), value);
        }
        if let Some(seed) = self.seed {
            obj.insert("seed".into(), seed.into());
        }
        if let Some(threads) = self.threads {
            obj.insert("threads".into(), threads.into());
        }
        if let Some(out) = &self.out {
            obj.insert("out".into(), Value::String(out.display().to_string()));
        }
        if let Some(c) = self.confidence {
            obj.insert("confidence".into(), c.into());
        }
        Ok(())
    }
}

/// A manifest is accepted in place of a config: its `config` field is used.
fn unwrap_manifest(doc: Value) -> Value {
    match doc {
        Value::Object(mut obj) if obj.contains_key("config") && obj.contains_key("tool") => {
            obj.remove("config").unwrap_or(Value::Null)
        }
        other => other,
    }
}

/// Parses, overrides and validates a configuration document.
pub fn parse(text: &str, overrides: &Overrides) -> Result<ExperimentConfig> {
    let doc: Value = serde_json::from_str(text).map_err(|e| CliError::Schema {
        path: ".".into(),
        message: e.to_string(),
    })?;
    let mut doc = unwrap_manifest(doc);
    overrides.apply(&mut doc)?;
    let config: ExperimentConfig =
        serde_path_to_error::deserialize(doc).map_err(|e| CliError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    config.validate(true)?;
    Ok(config)
}

pub fn load(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text, overrides)
}
