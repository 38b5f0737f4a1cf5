//! Parametric bootstrap and the Monte Carlo study harness.

mod mc;
pub mod rng;

pub use mc::{
    run_scenario, run_study, scenario, scenario_registry, stats_with_m, warp_critical, DgpKind,
    RejectionRow, RejectionTable, Scenario, ScenarioRun, StudyConfig,
};
pub use rng::{derive_seed, substream, Purpose};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{fit_mle, FitOptions};
use crate::model::{simulate, ModelSpec, Series, Theta};
use crate::stats::{compute_stats, residuals_discrete, StatInputs, StatKind, StatSettings};
use crate::transform::{randomized_pit, NoiseCdf, NoiseStream, UniformResiduals};

/// Largest tolerated share of failed bootstrap fits.
pub const MAX_FAILED_SHARE: f64 = 0.2;

/// Draws a bootstrap sample from the fitted model, reusing the observed
/// regressor path.
pub fn simulate_null<R: Rng + ?Sized>(
    spec: &ModelSpec,
    theta_hat: &Theta,
    observed: &Series,
    rng: &mut R,
) -> Result<Series> {
    simulate(spec, theta_hat, observed.len(), &observed.x, rng)
}

/// Statistics of `series` under `theta`, with freshly drawn noise.
#[allow(clippy::too_many_arguments)]
pub fn residual_stats<R: Rng + ?Sized>(
    spec: &ModelSpec,
    theta: &Theta,
    series: &Series,
    kinds: &[StatKind],
    settings: &StatSettings,
    noise_cdf: NoiseCdf,
    noise_seed: u64,
    noise_rng: &mut R,
) -> Result<Vec<f64>> {
    let noise = NoiseStream::draw(series.len(), noise_cdf, noise_seed, noise_rng)?;
    let pit = randomized_pit(spec, theta, series, &noise)?;
    let discrete = if kinds.iter().any(StatKind::needs_model) {
        Some(residuals_discrete(spec, theta, series)?)
    } else {
        None
    };
    let values = compute_stats(
        kinds,
        StatInputs {
            u: &pit.u,
            discrete: discrete.as_deref(),
        },
        settings,
    )?;
    Ok(values.into_iter().map(|v| v.value).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    #[serde(rename = "B")]
    pub b: usize,
    pub master_seed: u64,
    pub stats: Vec<StatKind>,
    pub settings: StatSettings,
    pub noise_cdf: NoiseCdf,
    pub fit: FitOptions,
    /// Re-estimate on every bootstrap sample. Must be `true`.
    pub refit: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            b: 199,
            master_seed: 0,
            stats: crate::stats::default_stats(),
            settings: StatSettings::default(),
            noise_cdf: NoiseCdf::Uniform,
            fit: FitOptions::default(),
            refit: true,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.b < 19 {
            return Err(Error::Config(format!(
                "B must be at least 19, got {}",
                self.b
            )));
        }
        if self.stats.is_empty() {
            return Err(Error::Config("no statistics requested".into()));
        }
        if !self.refit {
            return Err(Error::Config(
                "the bootstrap always re-estimates; refit must be true".into(),
            ));
        }
        self.settings.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub name: String,
    pub observed: f64,
    pub p_value: f64,
    /// Bootstrap replicates used for the p-value.
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub stats: Vec<StatReport>,
    pub theta_hat: Theta,
    pub std_errors: Vec<f64>,
    pub loglik: f64,
    pub fit_iterations: usize,
    pub master_seed: u64,
    /// Seed of the observed-data noise stream.
    pub noise_seed: u64,
    #[serde(rename = "B")]
    pub b: usize,
    pub failed_fits: usize,
    pub settings: StatSettings,
    pub noise_cdf: NoiseCdf,
    /// Noise convention, always fresh draws per replicate.
    pub noise_policy: String,
    pub warnings: Vec<String>,
}

impl TestReport {
    pub fn get(&self, name: &str) -> Option<&StatReport> {
        self.stats.iter().find(|s| s.name == name)
    }
}

/// `(1 + #{D* ≥ D}) / (B_eff + 1)`.
pub fn bootstrap_p_value(observed: f64, replicates: &[f64]) -> f64 {
    let exceed = replicates.iter().filter(|&&d| d >= observed).count();
    (1 + exceed) as f64 / (replicates.len() + 1) as f64
}

/// PIT residuals of the observed data exactly as used by
/// [`bootstrap_test`] for the observed statistics.
pub fn observed_residuals(
    spec: &ModelSpec,
    series: &Series,
    theta_hat: &Theta,
    config: &BootstrapConfig,
) -> Result<UniformResiduals> {
    let mut rng = substream(config.master_seed, 0, Purpose::ObservedNoise);
    let noise = NoiseStream::draw(series.len(), config.noise_cdf, config.master_seed, &mut rng)?;
    randomized_pit(spec, theta_hat, series, &noise)
}

/// Parametric bootstrap test of the fitted model.
pub fn bootstrap_test(
    spec: &ModelSpec,
    series: &Series,
    config: &BootstrapConfig,
) -> Result<TestReport> {
    config.validate()?;
    let fit = fit_mle(spec, series, None, &config.fit)?;
    let theta_hat = &fit.theta_hat;
    let seed = config.master_seed;
    let kinds = &config.stats;

    let mut noise_rng = substream(seed, 0, Purpose::ObservedNoise);
    let observed = residual_stats(
        spec,
        theta_hat,
        series,
        kinds,
        &config.settings,
        config.noise_cdf,
        seed,
        &mut noise_rng,
    )?;

    let draws: Vec<Option<Vec<f64>>> = (1..=config.b as u64)
        .into_par_iter()
        .map(|b| {
            let mut data_rng = substream(seed, b, Purpose::BootData);
            let boot = simulate_null(spec, theta_hat, series, &mut data_rng).ok()?;
            let refit = fit_mle(spec, &boot, Some(theta_hat), &config.fit).ok()?;
            let mut noise_rng = substream(seed, b, Purpose::BootNoise);
            residual_stats(
                spec,
                &refit.theta_hat,
                &boot,
                kinds,
                &config.settings,
                config.noise_cdf,
                seed,
                &mut noise_rng,
            )
            .ok()
        })
        .collect();

    let failed = draws.iter().filter(|d| d.is_none()).count();
    if failed as f64 > MAX_FAILED_SHARE * config.b as f64 {
        return Err(Error::UnreliableBootstrap {
            failed,
            total: config.b,
        });
    }
    let ok: Vec<&Vec<f64>> = draws.iter().flatten().collect();
    let stats = kinds
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let column: Vec<f64> = ok.iter().map(|d| d[i]).collect();
            StatReport {
                name: k.name(),
                observed: observed[i],
                p_value: bootstrap_p_value(observed[i], &column),
                replicates: column.len(),
            }
        })
        .collect();

    let mut warnings = Vec::new();
    if failed > 0 {
        warnings.push(format!(
            "{failed} of {} bootstrap fits failed and were dropped",
            config.b
        ));
    }
    if fit.small_cells > 0 {
        warnings.push(format!(
            "{} fitted cell probabilities fall below 1e-8",
            fit.small_cells
        ));
    }
    Ok(TestReport {
        stats,
        theta_hat: fit.theta_hat.clone(),
        std_errors: fit.std_errors.clone(),
        loglik: fit.loglik,
        fit_iterations: fit.iterations,
        master_seed: seed,
        noise_seed: seed,
        b: config.b,
        failed_fits: failed,
        settings: config.settings.clone(),
        noise_cdf: config.noise_cdf,
        noise_policy: "fresh continuation noise for the observed data and every bootstrap sample"
            .into(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate_x_ar1, LinkKind};
    use crate::stats::{Process, StatKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn static_probit_data(seed: u64, n: usize) -> (ModelSpec, Series) {
        let spec = ModelSpec::binary(LinkKind::Probit, 0, 1, false);
        let theta = Theta {
            beta: vec![1.0],
            ..Theta::zeros(&spec)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = simulate_x_ar1(0.8, n, &mut rng).unwrap();
        (
            spec.clone(),
            simulate(&spec, &theta, n, &x, &mut rng).unwrap(),
        )
    }

    #[test]
    fn p_value_arithmetic() {
        let reps: Vec<f64> = (0..99).map(|i| i as f64).collect();
        assert_eq!(bootstrap_p_value(1000.0, &reps), 0.01);
        assert_eq!(bootstrap_p_value(-1.0, &reps), 1.0);
        assert_eq!(bootstrap_p_value(98.0, &reps), 0.02);
    }

    #[test]
    fn static_null_frequencies() {
        let spec = ModelSpec::binary(LinkKind::Probit, 0, 0, false);
        let theta = Theta {
            pi0: 0.4,
            ..Theta::zeros(&spec)
        };
        let n = 10_000;
        let observed = Series::new(vec![0; n], vec![], 0).unwrap();
        let boot =
            simulate_null(&spec, &theta, &observed, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let p = LinkKind::Probit.cdf(0.4);
        let f = boot.y.iter().filter(|&&y| y == 1).count() as f64 / n as f64;
        assert!((f - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn null_draw_reuses_regressors() {
        let (spec, series) = static_probit_data(3, 200);
        let theta = Theta {
            beta: vec![0.9],
            ..Theta::zeros(&spec)
        };
        let a = simulate_null(&spec, &theta, &series, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = simulate_null(&spec, &theta, &series, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.x, series.x);
    }

    #[test]
    fn config_checks() {
        let mut c = BootstrapConfig::default();
        assert!(c.validate().is_ok());
        c.b = 10;
        assert!(c.validate().is_err());
        c.b = 19;
        c.stats.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn report_is_deterministic_and_valid() {
        let (spec, series) = static_probit_data(11, 150);
        let config = BootstrapConfig {
            b: 39,
            master_seed: 42,
            ..Default::default()
        };
        let a = bootstrap_test(&spec, &series, &config).unwrap();
        let b = bootstrap_test(&spec, &series, &config).unwrap();
        assert_eq!(a, b);
        for s in &a.stats {
            assert!(s.p_value > 0.0 && s.p_value <= 1.0);
            assert!(s.replicates <= 39);
        }
        assert_eq!(a.stats.len(), crate::stats::default_stats().len());
        let threaded = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| bootstrap_test(&spec, &series, &config).unwrap());
        assert_eq!(a, threaded);
    }

    #[test]
    fn noise_law_does_not_change_report() {
        // distorted noise is generated by inversion from the same uniforms,
        // so each F_z(z) matches the uniform draw up to rounding
        let (spec, series) = static_probit_data(12, 120);
        let stats = vec![
            StatKind::CvM(Process::Marginal),
            StatKind::Ks(Process::Pair(1)),
        ];
        let base = BootstrapConfig {
            b: 19,
            master_seed: 8,
            stats,
            ..Default::default()
        };
        let a = bootstrap_test(&spec, &series, &base).unwrap();
        let b = bootstrap_test(
            &spec,
            &series,
            &BootstrapConfig {
                noise_cdf: NoiseCdf::Power { exponent: 2.0 },
                ..base.clone()
            },
        )
        .unwrap();
        for (x, y) in a.stats.iter().zip(&b.stats) {
            assert!((x.observed - y.observed).abs() < 1e-9);
        }
    }

    #[test]
    fn misspecified_dynamics_are_detected() {
        let spec = ModelSpec::binary(LinkKind::Probit, 1, 1, true);
        let theta = Theta {
            delta: vec![0.8],
            beta: vec![1.0],
            gamma: vec![-2.0],
            ..Theta::zeros(&spec)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let x = simulate_x_ar1(0.8, 400, &mut rng).unwrap();
        let series = simulate(&spec, &theta, 400, &x, &mut rng).unwrap();
        let null = ModelSpec::binary(LinkKind::Probit, 0, 1, false);
        let config = BootstrapConfig {
            b: 49,
            master_seed: 1,
            stats: vec![StatKind::Bpd(2)],
            ..Default::default()
        };
        let report = bootstrap_test(&null, &series, &config).unwrap();
        assert!(report.stats[0].p_value <= 0.05, "{:?}", report.stats[0]);
    }

    #[test]
    fn initial_fit_failure_is_reported() {
        let spec = ModelSpec::binary(LinkKind::Probit, 0, 0, false);
        let series = Series::new(vec![1; 50], vec![], 0).unwrap();
        let err = bootstrap_test(&spec, &series, &BootstrapConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }
}
