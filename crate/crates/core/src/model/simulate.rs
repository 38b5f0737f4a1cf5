use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{index_unchecked, IndexState, ModelSpec, Series, Theta};
use crate::error::{Error, Result};

/// Stationary Gaussian AR(1) path `X_t = α X_{t−1} + e_t`, started from the
/// stationary law `N(0, 1/(1 − α²))`.
pub fn simulate_x_ar1<R: Rng + ?Sized>(alpha1: f64, len: usize, rng: &mut R) -> Result<Vec<f64>> {
    if alpha1.is_nan() || alpha1.abs() >= 1.0 {
        return Err(Error::NonStationary(alpha1));
    }
    let mut x = Vec::with_capacity(len);
    if len == 0 {
        return Ok(x);
    }
    let z: f64 = StandardNormal.sample(rng);
    let mut prev = z / (1.0 - alpha1 * alpha1).sqrt();
    x.push(prev);
    for _ in 1..len {
        let e: f64 = StandardNormal.sample(rng);
        prev = alpha1 * prev + e;
        x.push(prev);
    }
    Ok(x)
}

/// Simulates outcomes recursively from the latent-variable form of the model
/// given a row-major regressor matrix with `T × n_regressors` entries.
///
/// Presample outcome lags are 0 and presample index lags are the
/// unconditional mean, the same convention used for estimation.
pub fn simulate<R: Rng + ?Sized>(
    spec: &ModelSpec,
    theta: &Theta,
    len: usize,
    x: &[f64],
    rng: &mut R,
) -> Result<Series> {
    theta.validate(spec)?;
    if x.len() != len * spec.n_regressors {
        return Err(Error::Shape(format!(
            "regressor matrix has {} entries, expected {len} × {}",
            x.len(),
            spec.n_regressors
        )));
    }
    let k = spec.n_regressors;
    let thresholds = theta.thresholds(spec);
    let pre = theta.presample_index();
    let mut y: Vec<u32> = Vec::with_capacity(len);
    let mut pi: Vec<f64> = Vec::with_capacity(len);
    let mut y_lags = vec![0u32; spec.q];
    let mut pi_lags = vec![pre; spec.p_ar];
    for t in 0..len {
        for (i, slot) in y_lags.iter_mut().enumerate() {
            *slot = if t > i { y[t - 1 - i] } else { 0 };
        }
        for (i, slot) in pi_lags.iter_mut().enumerate() {
            *slot = if t > i { pi[t - 1 - i] } else { pre };
        }
        let state = IndexState {
            y_lags: &y_lags,
            pi_lags: &pi_lags,
        };
        let pi_t = index_unchecked(spec, theta, state, &x[t * k..(t + 1) * k]);
        let latent = pi_t + spec.link.sample(rng);
        let outcome = thresholds.iter().take_while(|&&m| latent > m).count();
        pi.push(pi_t);
        y.push(outcome as u32);
    }
    Series::new(y, x.to_vec(), k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinkKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lag1_autocorr(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let den: f64 = v.iter().map(|x| (x - m).powi(2)).sum();
        let num: f64 = v.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
        num / den
    }

    #[test]
    fn iid_regressor_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let x = simulate_x_ar1(0.0, n, &mut rng).unwrap();
        let m = x.iter().sum::<f64>() / n as f64;
        let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        // sd of the sample variance is about sqrt(2/n)
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt(), "{var}");
    }

    #[test]
    fn ar1_regressor_autocorrelation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = simulate_x_ar1(0.8, 100_000, &mut rng).unwrap();
        let r = lag1_autocorr(&x);
        // Bartlett sd of the lag-1 estimate is sqrt((1 − ρ²)/n) ≈ 0.0019
        assert!((r - 0.8).abs() < 0.01, "{r}");
    }

    #[test]
    fn regressor_rejects_unit_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            simulate_x_ar1(1.0, 10, &mut rng),
            Err(Error::NonStationary(_))
        ));
        assert!(simulate_x_ar1(-1.3, 10, &mut rng).is_err());
    }

    #[test]
    fn regressor_is_deterministic() {
        let a = simulate_x_ar1(0.8, 50, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = simulate_x_ar1(0.8, 50, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_law_is_fair_coin() {
        let spec = ModelSpec::binary(LinkKind::Probit, 0, 0, false);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = simulate(&spec, &Theta::zeros(&spec), 10_000, &[], &mut rng).unwrap();
        let mean = s.y.iter().map(|&y| y as f64).sum::<f64>() / 10_000.0;
        assert!((0.48..=0.52).contains(&mean), "{mean}");
    }

    #[test]
    fn dynamic_probit_has_persistence() {
        let spec = ModelSpec::binary(LinkKind::Probit, 1, 1, false);
        let theta = Theta {
            pi0: 0.0,
            delta: vec![0.8],
            beta: vec![1.0],
            ..Theta::zeros(&spec)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = simulate_x_ar1(0.8, 500, &mut rng).unwrap();
        let s = simulate(&spec, &theta, 500, &x, &mut rng).unwrap();
        let yf: Vec<f64> = s.y.iter().map(|&y| y as f64).collect();
        let mean = yf.iter().sum::<f64>() / 500.0;
        assert!(0.0 < mean && mean < 1.0);
        assert!(lag1_autocorr(&yf) > 0.0);
        assert_eq!(s.x, x);
    }

    #[test]
    fn simulation_is_deterministic() {
        let spec = ModelSpec::ordered(LinkKind::Logistic, 3, 1, 1);
        let theta = Theta {
            delta: vec![0.3],
            beta: vec![0.5],
            mu: vec![-1.0, 0.0, 1.0],
            ..Theta::zeros(&spec)
        };
        let x: Vec<f64> = (0..200).map(|t| (t as f64 * 0.1).sin()).collect();
        let a = simulate(&spec, &theta, 200, &x, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = simulate(&spec, &theta, 200, &x, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.y.iter().all(|&y| y <= 3));
    }

    #[test]
    fn ordered_frequencies_match_law() {
        let spec = ModelSpec::ordered(LinkKind::Probit, 2, 0, 0);
        let theta = Theta {
            mu: vec![0.0, 1.0],
            ..Theta::zeros(&spec)
        };
        let n = 40_000;
        let s = simulate(&spec, &theta, n, &[], &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let law = crate::model::cond_law(&spec, &theta, 0.0).unwrap();
        for j in 0..3 {
            let f = s.y.iter().filter(|&&y| y == j as u32).count() as f64 / n as f64;
            let p = law.probs()[j];
            assert!((f - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt() + 1e-3);
        }
    }
}
