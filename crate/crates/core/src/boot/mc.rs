//! Monte Carlo study: scenario registry, warp-speed bootstrap and rejection
//! tables.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::{derive_seed, substream, Purpose};
use super::{residual_stats, simulate_null, MAX_FAILED_SHARE};
use crate::error::{Error, Result};
use crate::estimate::{fit_mle, FitOptions};
use crate::model::{simulate, simulate_x_ar1, LinkKind, ModelSpec, Theta};
use crate::stats::{Process, StatKind, StatSettings};
use crate::transform::NoiseCdf;

/// AR(1) coefficient of the regressor.
pub const X_AR: f64 = 0.8;
const BETA: f64 = 1.0;
const DELTA: f64 = 0.8;
const GAMMA: f64 = -2.0 * BETA;

/// Index specification of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DgpKind {
    /// `π_t = π0 + β X_t`.
    Static,
    /// `π_t = π0 + δ1 Y_{t−1} + β X_t`.
    Dynamic,
    /// `π_t = π0 + δ1 Y_{t−1} + γ1 Y_{t−1} X_t + β X_t`.
    Interactions,
}

impl DgpKind {
    fn name(self) -> &'static str {
        match self {
            DgpKind::Static => "static",
            DgpKind::Dynamic => "dynamic",
            DgpKind::Interactions => "interactions",
        }
    }

    fn spec(self, link: LinkKind) -> ModelSpec {
        match self {
            DgpKind::Static => ModelSpec::binary(link, 0, 1, false),
            DgpKind::Dynamic => ModelSpec::binary(link, 1, 1, false),
            DgpKind::Interactions => ModelSpec::binary(link, 1, 1, true),
        }
    }

    fn theta(self, spec: &ModelSpec) -> Theta {
        let mut theta = Theta {
            beta: vec![BETA],
            ..Theta::zeros(spec)
        };
        if self != DgpKind::Static {
            theta.delta = vec![DELTA];
        }
        if self == DgpKind::Interactions {
            theta.gamma = vec![GAMMA];
        }
        theta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: usize,
    pub label: String,
    pub dgp: ModelSpec,
    pub theta: Theta,
    pub null_model: ModelSpec,
}

impl Scenario {
    fn new(id: usize, link: LinkKind, dgp: DgpKind, null: DgpKind) -> Scenario {
        let short = match link {
            LinkKind::Probit => "probit",
            LinkKind::Logistic => "logit",
            LinkKind::Chisq1 => "chi2",
        };
        let spec = dgp.spec(link);
        Scenario {
            id,
            label: format!("{short} {} / probit {}", dgp.name(), null.name()),
            theta: dgp.theta(&spec),
            dgp: spec,
            null_model: null.spec(LinkKind::Probit),
        }
    }
}

/// The eleven (DGP, null) pairs of the study.
pub fn scenario_registry() -> Vec<Scenario> {
    use DgpKind::*;
    use LinkKind::*;
    [
        (Probit, Static, Static),
        (Probit, Dynamic, Dynamic),
        (Probit, Interactions, Interactions),
        (Logistic, Static, Static),
        (Chisq1, Static, Static),
        (Logistic, Dynamic, Static),
        (Chisq1, Dynamic, Static),
        (Logistic, Interactions, Dynamic),
        (Chisq1, Interactions, Dynamic),
        (Logistic, Interactions, Static),
        (Chisq1, Interactions, Static),
    ]
    .into_iter()
    .enumerate()
    .map(|(i, (link, dgp, null))| Scenario::new(i + 1, link, dgp, null))
    .collect()
}

pub fn scenario(id: usize) -> Result<Scenario> {
    scenario_registry()
        .into_iter()
        .find(|s| s.id == id)
        .ok_or_else(|| Error::Config(format!("unknown scenario {id}; ids are 1..=11")))
}

/// Table columns with Box-Pierce orders taken from `m`.
pub fn stats_with_m(m: &[usize]) -> Vec<StatKind> {
    let mut v = vec![
        StatKind::CvM(Process::Marginal),
        StatKind::CvM(Process::Pair(1)),
        StatKind::CvM(Process::Pair(2)),
        StatKind::Ks(Process::Marginal),
        StatKind::Ks(Process::Pair(1)),
        StatKind::Ks(Process::Pair(2)),
    ];
    v.extend(m.iter().map(|&m| StatKind::Bpn(m)));
    v.push(StatKind::Jb);
    v.extend(m.iter().map(|&m| StatKind::Bpd(m)));
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub scenarios: Vec<usize>,
    #[serde(rename = "T")]
    pub t: Vec<usize>,
    #[serde(rename = "R")]
    pub r: usize,
    pub seed: u64,
    /// Box-Pierce orders, used when `stats` is empty.
    pub m: Vec<usize>,
    pub stats: Vec<StatKind>,
    pub levels: Vec<f64>,
    pub settings: StatSettings,
    pub noise_cdf: NoiseCdf,
    pub fit: FitOptions,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            scenarios: (1..=11).collect(),
            t: vec![100, 300, 500],
            r: 1000,
            seed: 0,
            m: vec![1, 2, 25],
            stats: Vec::new(),
            levels: vec![0.10, 0.05, 0.01],
            settings: StatSettings::default(),
            noise_cdf: NoiseCdf::Uniform,
            fit: FitOptions::default(),
        }
    }
}

impl StudyConfig {
    pub fn statistics(&self) -> Vec<StatKind> {
        if self.stats.is_empty() {
            stats_with_m(&self.m)
        } else {
            self.stats.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 50 {
            return Err(Error::Config(format!(
                "R must be at least 50, got {}",
                self.r
            )));
        }
        if self.scenarios.is_empty() || self.t.is_empty() {
            return Err(Error::Config("no scenarios or sample sizes given".into()));
        }
        for &id in &self.scenarios {
            scenario(id)?;
        }
        if let Some(&t) = self.t.iter().find(|&&t| t < 10) {
            return Err(Error::Config(format!("sample size {t} is too small")));
        }
        if self.levels.is_empty() || self.levels.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(Error::Config("levels must lie in (0, 1)".into()));
        }
        if self.m.contains(&0) {
            return Err(Error::Config("Box-Pierce orders must be at least 1".into()));
        }
        self.settings.validate()
    }
}

/// Observed and pooled bootstrap statistics of one (scenario, T) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRun {
    pub scenario: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub seed: u64,
    pub stats: Vec<StatKind>,
    /// `observed[r][s]`, successful replications only.
    pub observed: Vec<Vec<f64>>,
    /// `pooled[r][s]`: the single bootstrap draw of replication `r`.
    pub pooled: Vec<Vec<f64>>,
    pub failed: usize,
}

/// `(1 − α)` empirical quantile of sorted draws: the `⌈(1 − α) n⌉`-th
/// order statistic.
pub fn warp_critical(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len();
    let k = (((1.0 - alpha) * n as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[k.min(n) - 1]
}

impl ScenarioRun {
    pub fn replications(&self) -> usize {
        self.observed.len()
    }

    /// Rejection percentage of statistic `s` at level `alpha`.
    pub fn rejection_rate(&self, s: usize, alpha: f64) -> f64 {
        let mut null: Vec<f64> = self.pooled.iter().map(|d| d[s]).collect();
        null.sort_by(f64::total_cmp);
        let c = warp_critical(&null, alpha);
        let hits = self.observed.iter().filter(|d| d[s] > c).count();
        100.0 * hits as f64 / self.observed.len() as f64
    }

    pub fn rows(&self, levels: &[f64]) -> Vec<RejectionRow> {
        levels
            .iter()
            .map(|&alpha| RejectionRow {
                scenario: self.scenario,
                level: alpha,
                replications: self.replications(),
                rates: (0..self.stats.len())
                    .map(|s| self.rejection_rate(s, alpha))
                    .collect(),
            })
            .collect()
    }
}

/// One warp-speed replication: statistics on DGP data and on one bootstrap
/// sample from the fitted null.
fn replication(
    scn: &Scenario,
    t: usize,
    seed: u64,
    r: u64,
    kinds: &[StatKind],
    cfg: &StudyConfig,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut x_rng = substream(seed, r, Purpose::McRegressor);
    let x = simulate_x_ar1(X_AR, t, &mut x_rng).ok()?;
    let mut y_rng = substream(seed, r, Purpose::McData);
    let data = simulate(&scn.dgp, &scn.theta, t, &x, &mut y_rng).ok()?;
    let null = &scn.null_model;
    let fit = fit_mle(null, &data, None, &cfg.fit).ok()?;
    let mut noise = substream(seed, r, Purpose::McNoise);
    let observed = residual_stats(
        null,
        &fit.theta_hat,
        &data,
        kinds,
        &cfg.settings,
        cfg.noise_cdf,
        seed,
        &mut noise,
    )
    .ok()?;

    let mut b_rng = substream(seed, r, Purpose::BootData);
    let boot = simulate_null(null, &fit.theta_hat, &data, &mut b_rng).ok()?;
    let refit = fit_mle(null, &boot, Some(&fit.theta_hat), &cfg.fit).ok()?;
    let mut b_noise = substream(seed, r, Purpose::BootNoise);
    let star = residual_stats(
        null,
        &refit.theta_hat,
        &boot,
        kinds,
        &cfg.settings,
        cfg.noise_cdf,
        seed,
        &mut b_noise,
    )
    .ok()?;
    Some((observed, star))
}

/// Warp-speed Monte Carlo of one scenario at sample size `t`. The stream
/// seed is derived from `cfg.seed`, the scenario id and `t`.
pub fn run_scenario(scn: &Scenario, t: usize, cfg: &StudyConfig) -> Result<ScenarioRun> {
    cfg.validate()?;
    let kinds = cfg.statistics();
    let seed = derive_seed(cfg.seed, scn.id as u64, t as u64);
    let draws: Vec<Option<(Vec<f64>, Vec<f64>)>> = (0..cfg.r as u64)
        .into_par_iter()
        .map(|r| replication(scn, t, seed, r, &kinds, cfg))
        .collect();
    let failed = draws.iter().filter(|d| d.is_none()).count();
    if failed as f64 > MAX_FAILED_SHARE * cfg.r as f64 {
        return Err(Error::UnreliableBootstrap {
            failed,
            total: cfg.r,
        });
    }
    let (observed, pooled) = draws.into_iter().flatten().unzip();
    Ok(ScenarioRun {
        scenario: scn.id,
        t,
        seed,
        stats: kinds,
        observed,
        pooled,
        failed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionRow {
    pub scenario: usize,
    pub level: f64,
    /// Successful replications behind the rates.
    pub replications: usize,
    /// Percentages, one per statistic.
    pub rates: Vec<f64>,
}

/// Rejection percentages for one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionTable {
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub seed: u64,
    pub stats: Vec<String>,
    pub rows: Vec<RejectionRow>,
}

impl RejectionTable {
    pub fn get(&self, scenario: usize, level: f64, stat: &str) -> Option<f64> {
        let s = self.stats.iter().position(|n| n == stat)?;
        self.rows
            .iter()
            .find(|r| r.scenario == scenario && (r.level - level).abs() < 1e-12)
            .map(|r| r.rates[s])
    }

    /// Scenario blocks of level rows, one column per statistic.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "T,scenario,level,replications")?;
        for s in &self.stats {
            write!(out, ",{s}")?;
        }
        writeln!(out)?;
        for row in &self.rows {
            write!(
                out,
                "{},{},{},{}",
                self.t,
                row.scenario,
                100.0 * row.level,
                row.replications
            )?;
            for v in &row.rates {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Runs every (scenario, T) cell of the study; one table per `T`.
pub fn run_study(cfg: &StudyConfig) -> Result<Vec<RejectionTable>> {
    cfg.validate()?;
    let names: Vec<String> = cfg.statistics().iter().map(|k| k.name()).collect();
    cfg.t
        .iter()
        .map(|&t| {
            let mut rows = Vec::new();
            for &id in &cfg.scenarios {
                let run = run_scenario(&scenario(id)?, t, cfg)?;
                rows.extend(run.rows(&cfg.levels));
            }
            Ok(RejectionTable {
                t,
                r: cfg.r,
                seed: cfg.seed,
                stats: names.clone(),
                rows,
            })
        })
        .collect()
}
