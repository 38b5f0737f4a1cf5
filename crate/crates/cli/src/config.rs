//! Run configuration: a JSON file and command-line flags with the same keys.

use std::path::{Path, PathBuf};

use clap::Args;
use pitgof::boot::{stats_with_m, StudyConfig};
use pitgof::stats::{default_stats, StatKind, StatSettings};
use pitgof::transform::NoiseCdf;
use pitgof::{BootstrapConfig, LinkKind, ModelSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every setting of a run. Flags override values read from `--config`.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// JSON file with any of these settings
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// CSV with columns y, x1..xk
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// JSON model specification (overrides the model flags)
    #[arg(long)]
    pub model_file: Option<PathBuf>,

    /// Latent error distribution: probit, logit or chisq1
    #[arg(long)]
    pub link: Option<LinkKind>,

    /// Number of lagged outcomes in the index
    #[arg(long)]
    pub ylags: Option<usize>,

    /// Number of lagged indices in the index
    #[arg(long)]
    pub pilags: Option<usize>,

    /// Include lagged-outcome × regressor interactions
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub interactions: Option<bool>,

    /// Largest outcome value J (J ≥ 2 gives an ordered model)
    #[arg(long)]
    pub support_size: Option<usize>,

    /// Bootstrap replicates
    #[arg(long = "B")]
    #[serde(rename = "B")]
    pub b: Option<usize>,

    /// Master seed for all random streams
    #[arg(long)]
    pub seed: Option<u64>,

    /// Test levels, e.g. 0.1,0.05,0.01
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,

    /// Statistics, e.g. CvM0,KS1,BPD_2,JB
    #[arg(long, value_delimiter = ',')]
    pub stats: Option<Vec<String>>,

    /// Box-Pierce orders used by the default statistic list
    #[arg(long, value_delimiter = ',')]
    pub m: Option<Vec<usize>>,

    /// Number of pairwise lags aggregated by ADJ
    #[arg(long)]
    pub adj_m: Option<usize>,

    /// Monte Carlo scenario ids (1..=11)
    #[arg(long, value_delimiter = ',')]
    pub scenarios: Option<Vec<usize>>,

    /// Monte Carlo sample sizes
    #[arg(long = "T", value_delimiter = ',')]
    #[serde(rename = "T")]
    pub t: Option<Vec<usize>>,

    /// Monte Carlo replications
    #[arg(long = "R")]
    #[serde(rename = "R")]
    pub r: Option<usize>,

    /// Worker threads (results do not depend on it)
    #[arg(long)]
    pub threads: Option<usize>,

    /// Noise law for the continuation, as JSON, e.g. {"kind":"power","exponent":2}
    #[arg(long, value_parser = parse_noise)]
    pub noise_cdf: Option<NoiseCdf>,
}

fn parse_noise(s: &str) -> Result<NoiseCdf, String> {
    serde_json::from_str(s).map_err(|e| e.to_string())
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),*) => {
        RunConfig { config: $top.config.or($base.config), $($f: $top.$f.or($base.$f)),* }
    };
}

impl RunConfig {
    /// Reads a JSON config file.
    pub fn from_file(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::parse(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::parse(format!("config {}: {e}", path.display())))
    }

    /// `self` with every field that `top` sets replaced.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        let base = self;
        overlay!(base, top; input, out, model_file, link, ylags, pilags, interactions, support_size,
            b, seed, levels, stats, m, adj_m, scenarios, t, r, threads, noise_cdf)
    }

    /// Flags on top of the file named by `--config`, if any.
    pub fn resolve(flags: RunConfig) -> Result<RunConfig, CliError> {
        match &flags.config {
            Some(path) => Ok(RunConfig::from_file(path)?.overlay(flags)),
            None => Ok(flags),
        }
    }

    pub fn input(&self) -> Result<&Path, CliError> {
        self.input
            .as_deref()
            .ok_or_else(|| CliError::parse("missing --input"))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn support_size(&self) -> Result<usize, CliError> {
        if let Some(path) = &self.model_file {
            return Ok(self.model_from_file(path)?.support_size);
        }
        Ok(self.support_size.unwrap_or(1))
    }

    fn model_from_file(&self, path: &Path) -> Result<ModelSpec, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::parse(format!("cannot read model file {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::parse(format!("model file {}: {e}", path.display())))
    }

    /// Model specification for data with `k` regressor columns.
    pub fn model(&self, k: usize) -> Result<ModelSpec, CliError> {
        let spec = match &self.model_file {
            Some(path) => {
                let spec = self.model_from_file(path)?;
                if spec.n_regressors != k {
                    return Err(CliError::parse(format!(
                        "model file {} declares {} regressors but the input has {k} x-columns",
                        path.display(),
                        spec.n_regressors
                    )));
                }
                spec
            }
            None => {
                let j = self.support_size.unwrap_or(1);
                let interactions = self.interactions.unwrap_or(false);
                ModelSpec {
                    link: self.link.unwrap_or(LinkKind::Probit),
                    support_size: j,
                    q: self.ylags.unwrap_or(0),
                    p_ar: self.pilags.unwrap_or(0),
                    n_regressors: k,
                    interactions,
                    ordered: j >= 2,
                }
            }
        };
        spec.validate()
            .map_err(|e| CliError::parse(format!("model: {e}")))?;
        Ok(spec)
    }

    pub fn levels(&self) -> Result<Vec<f64>, CliError> {
        let levels = self
            .levels
            .clone()
            .unwrap_or_else(|| vec![0.10, 0.05, 0.01]);
        if levels.is_empty() || levels.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(CliError::parse("levels must lie in (0, 1)"));
        }
        Ok(levels)
    }

    pub fn statistics(&self) -> Result<Vec<StatKind>, CliError> {
        if let Some(names) = &self.stats {
            let kinds = names
                .iter()
                .map(|n| n.trim().parse::<StatKind>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::parse(format!("--stats: {e}")))?;
            if kinds.is_empty() {
                return Err(CliError::parse("--stats: empty list"));
            }
            return Ok(kinds);
        }
        match &self.m {
            Some(m) if m.contains(&0) => {
                Err(CliError::parse("--m: orders must be at least 1"))
            }
            Some(m) => Ok(stats_with_m(m)),
            None => Ok(default_stats()),
        }
    }

    pub fn stat_settings(&self) -> StatSettings {
        let mut s = StatSettings::default();
        if let Some(m) = self.adj_m {
            s.adj_m = m;
        }
        s
    }

    pub fn bootstrap(&self) -> Result<BootstrapConfig, CliError> {
        let config = BootstrapConfig {
            b: self.b.unwrap_or(199),
            master_seed: self.seed.unwrap_or(0),
            stats: self.statistics()?,
            settings: self.stat_settings(),
            noise_cdf: self.noise_cdf.unwrap_or(NoiseCdf::Uniform),
            ..Default::default()
        };
        config
            .validate()
            .map_err(|e| CliError::parse(e.to_string()))?;
        Ok(config)
    }

    pub fn study(&self) -> Result<StudyConfig, CliError> {
        let d = StudyConfig::default();
        let study = StudyConfig {
            scenarios: self.scenarios.clone().unwrap_or(d.scenarios),
            t: self.t.clone().unwrap_or(d.t),
            r: self.r.unwrap_or(d.r),
            seed: self.seed.unwrap_or(d.seed),
            m: self.m.clone().unwrap_or(d.m),
            stats: match &self.stats {
                Some(_) => self.statistics()?,
                None => Vec::new(),
            },
            levels: self.levels()?,
            settings: self.stat_settings(),
            noise_cdf: self.noise_cdf.unwrap_or(NoiseCdf::Uniform),
            fit: d.fit,
        };
        study
            .validate()
            .map_err(|e| CliError::parse(e.to_string()))?;
        Ok(study)
    }
}
