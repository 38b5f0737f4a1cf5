//! Parametric conditional laws of dynamic binary and ordered choice models.
//!
//! The outcome is generated by a latent variable `Y*_t = π_t + ε_t` with
//! `ε_t` drawn from a [`LinkKind`]. The index is
//!
//! ```text
//! π_t = π0 + Σ α_i π_{t−i} + Σ δ_i Y_{t−i} + x_t'β + (Y_{t−1} x_t)'γ
//! ```
//!
//! and the outcome is the number of thresholds the latent variable exceeds.
//! Binary models have a single threshold fixed at zero and a free intercept;
//! ordered models fix the intercept at zero and estimate `J` thresholds.

mod link;
mod simulate;

pub use link::{link_cdf, LinkKind};
pub use simulate::{simulate, simulate_x_ar1};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities below this are rejected when a law is built.
pub const HARD_FLOOR: f64 = 1e-12;
/// Probabilities below this are tallied as warnings.
pub const WARN_FLOOR: f64 = 1e-8;

/// Declarative description of a conditional law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub link: LinkKind,
    /// `J`; outcomes take values in `0..=J`.
    pub support_size: usize,
    /// Number of lagged outcomes in the index.
    #[serde(default)]
    pub q: usize,
    /// Number of lagged indices in the index.
    #[serde(default)]
    pub p_ar: usize,
    #[serde(default)]
    pub n_regressors: usize,
    #[serde(default)]
    pub interactions: bool,
    #[serde(default)]
    pub ordered: bool,
}

impl ModelSpec {
    pub fn binary(link: LinkKind, q: usize, n_regressors: usize, interactions: bool) -> Self {
        ModelSpec {
            link,
            support_size: 1,
            q,
            p_ar: 0,
            n_regressors,
            interactions,
            ordered: false,
        }
    }

    pub fn ordered(link: LinkKind, support_size: usize, q: usize, n_regressors: usize) -> Self {
        ModelSpec {
            link,
            support_size,
            q,
            p_ar: 0,
            n_regressors,
            interactions: false,
            ordered: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.support_size == 0 {
            return Err(Error::InvalidModel(
                "support_size must be at least 1".into(),
            ));
        }
        if self.support_size >= 2 && !self.ordered {
            return Err(Error::InvalidModel(
                "models with more than two categories must be ordered".into(),
            ));
        }
        if self.interactions && (self.q == 0 || self.n_regressors == 0) {
            return Err(Error::InvalidModel(
                "interactions need at least one outcome lag and one regressor".into(),
            ));
        }
        Ok(())
    }

    /// Number of thresholds in use (the binary threshold is fixed at 0).
    pub fn n_thresholds(&self) -> usize {
        if self.ordered {
            self.support_size
        } else {
            0
        }
    }

    /// Number of free parameters `L_θ`.
    pub fn n_params(&self) -> usize {
        self.layout().len
    }

    /// Largest lag of the outcome used by the index; the first `max_lag`
    /// observations only serve as conditioning values.
    pub fn max_lag(&self) -> usize {
        self.q
    }

    pub fn layout(&self) -> ParamLayout {
        let mut next = 0;
        let mut take = |n: usize| {
            let r = next..next + n;
            next += n;
            r
        };
        let pi0 = take(usize::from(!self.ordered));
        let delta = take(self.q);
        let alpha = take(self.p_ar);
        let beta = take(self.n_regressors);
        let gamma = take(if self.interactions {
            self.n_regressors
        } else {
            0
        });
        let mu = take(self.n_thresholds());
        ParamLayout {
            pi0,
            delta,
            alpha,
            beta,
            gamma,
            mu,
            len: next,
        }
    }

    /// Labels of the flattened parameters, e.g. `pi0, delta1, beta1`.
    pub fn param_names(&self) -> Vec<String> {
        let l = self.layout();
        let mut names = Vec::with_capacity(l.len);
        if !l.pi0.is_empty() {
            names.push("pi0".to_string());
        }
        for (block, range) in [
            ("delta", l.delta),
            ("alpha", l.alpha),
            ("beta", l.beta),
            ("gamma", l.gamma),
            ("mu", l.mu),
        ] {
            names.extend((1..=range.len()).map(|i| format!("{block}{i}")));
        }
        names
    }
}

/// Positions of each parameter block inside a flattened [`Theta`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub pi0: std::ops::Range<usize>,
    pub delta: std::ops::Range<usize>,
    pub alpha: std::ops::Range<usize>,
    pub beta: std::ops::Range<usize>,
    pub gamma: std::ops::Range<usize>,
    pub mu: std::ops::Range<usize>,
    pub len: usize,
}

/// Named parameter vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Theta {
    #[serde(default)]
    pub pi0: f64,
    #[serde(default)]
    pub delta: Vec<f64>,
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub gamma: Vec<f64>,
    #[serde(default)]
    pub mu: Vec<f64>,
}

impl Theta {
    pub fn zeros(spec: &ModelSpec) -> Self {
        Theta {
            pi0: 0.0,
            delta: vec![0.0; spec.q],
            alpha: vec![0.0; spec.p_ar],
            beta: vec![0.0; spec.n_regressors],
            gamma: vec![
                0.0;
                if spec.interactions {
                    spec.n_regressors
                } else {
                    0
                }
            ],
            mu: (0..spec.n_thresholds()).map(|j| j as f64).collect(),
        }
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        spec.validate()?;
        let check = |name: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(Error::Shape(format!(
                    "{name} has length {got}, expected {want}"
                )))
            }
        };
        check("delta", self.delta.len(), spec.q)?;
        check("alpha", self.alpha.len(), spec.p_ar)?;
        check("beta", self.beta.len(), spec.n_regressors)?;
        check(
            "gamma",
            self.gamma.len(),
            if spec.interactions {
                spec.n_regressors
            } else {
                0
            },
        )?;
        check("mu", self.mu.len(), spec.n_thresholds())?;
        if spec.ordered && self.pi0 != 0.0 {
            return Err(Error::InvalidModel(
                "ordered models fix the intercept at 0".into(),
            ));
        }
        let all = self.flatten(spec);
        if let Some(v) = all.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("parameter value {v} is not finite")));
        }
        if let Some(w) = self.mu.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidModel(format!(
                "thresholds must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
        if !self.alpha.is_empty() && !index_ar_is_stationary(&self.alpha) {
            return Err(Error::InvalidModel(
                "roots of 1 − α(L) must lie outside the unit circle".into(),
            ));
        }
        Ok(())
    }

    /// Natural coordinates in [`ParamLayout`] order.
    pub fn flatten(&self, spec: &ModelSpec) -> Vec<f64> {
        let mut v = Vec::with_capacity(spec.n_params());
        if !spec.ordered {
            v.push(self.pi0);
        }
        v.extend_from_slice(&self.delta);
        v.extend_from_slice(&self.alpha);
        v.extend_from_slice(&self.beta);
        v.extend_from_slice(&self.gamma);
        v.extend_from_slice(&self.mu);
        v
    }

    pub fn unflatten(spec: &ModelSpec, v: &[f64]) -> Result<Self> {
        let l = spec.layout();
        if v.len() != l.len {
            return Err(Error::Shape(format!(
                "parameter vector has length {}, expected {}",
                v.len(),
                l.len
            )));
        }
        Ok(Theta {
            pi0: if spec.ordered { 0.0 } else { v[l.pi0.start] },
            delta: v[l.delta].to_vec(),
            alpha: v[l.alpha].to_vec(),
            beta: v[l.beta].to_vec(),
            gamma: v[l.gamma].to_vec(),
            mu: v[l.mu].to_vec(),
        })
    }

    /// Thresholds actually applied to the latent variable.
    pub fn thresholds<'a>(&'a self, spec: &ModelSpec) -> &'a [f64] {
        if spec.ordered {
            &self.mu
        } else {
            &[0.0]
        }
    }

    /// Presample value of the lagged index, the unconditional mean
    /// `π0 / (1 − Σα)`.
    pub fn presample_index(&self) -> f64 {
        self.pi0 / (1.0 - self.alpha.iter().sum::<f64>())
    }
}

fn index_ar_is_stationary(alpha: &[f64]) -> bool {
    let p = alpha.len();
    if p == 1 {
        return alpha[0].abs() < 1.0;
    }
    let mut companion = DMatrix::<f64>::zeros(p, p);
    for (i, a) in alpha.iter().enumerate() {
        companion[(0, i)] = *a;
    }
    for i in 1..p {
        companion[(i, i - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .all(|z| z.norm() < 1.0)
}

/// Observed or simulated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub y: Vec<u32>,
    /// Row-major `T × n_regressors` regressor matrix.
    pub x: Vec<f64>,
    pub n_regressors: usize,
}

impl Series {
    pub fn new(y: Vec<u32>, x: Vec<f64>, n_regressors: usize) -> Result<Self> {
        if x.len() != y.len() * n_regressors {
            return Err(Error::Shape(format!(
                "regressor matrix has {} entries, expected {} × {}",
                x.len(),
                y.len(),
                n_regressors
            )));
        }
        Ok(Series { y, x, n_regressors })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn x_row(&self, t: usize) -> &[f64] {
        &self.x[t * self.n_regressors..(t + 1) * self.n_regressors]
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if self.n_regressors != spec.n_regressors {
            return Err(Error::Shape(format!(
                "series has {} regressors, model expects {}",
                self.n_regressors, spec.n_regressors
            )));
        }
        let min_len = spec.q.max(spec.p_ar).max(1) + 1;
        if self.len() < min_len {
            return Err(Error::Shape(format!(
                "series of length {} is shorter than the minimum {min_len}",
                self.len()
            )));
        }
        if let Some((t, y)) = self
            .y
            .iter()
            .enumerate()
            .find(|(_, &y)| y as usize > spec.support_size)
        {
            return Err(Error::Domain(format!(
                "outcome {y} at position {t} outside 0..={}",
                spec.support_size
            )));
        }
        Ok(())
    }
}

/// Conditional distribution of one outcome on `{0, …, J}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CondLaw {
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl CondLaw {
    /// Builds a law from cell probabilities, rejecting cells below `floor`.
    pub fn from_probs(probs: Vec<f64>, floor: f64) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::Shape("a law needs at least two cells".into()));
        }
        for (j, &p) in probs.iter().enumerate() {
            if !(p >= floor && p.is_finite()) || p <= 0.0 {
                return Err(Error::CellFloor {
                    category: j,
                    prob: p,
                    floor,
                });
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("cell probabilities sum to {total}")));
        }
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cdf.push(acc.min(1.0));
        }
        *cdf.last_mut().unwrap() = 1.0;
        Ok(CondLaw { probs, cdf })
    }

    /// Binary law with `P(Y = 1) = p1`.
    pub fn binary(p1: f64) -> Result<Self> {
        Self::from_probs(vec![1.0 - p1, p1], HARD_FLOOR)
    }

    /// `J`.
    pub fn support_size(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn cdf_values(&self) -> &[f64] {
        &self.cdf
    }

    /// `P(Y = j)`, zero outside the support.
    pub fn prob(&self, j: i64) -> f64 {
        if j < 0 || j as usize >= self.probs.len() {
            0.0
        } else {
            self.probs[j as usize]
        }
    }

    /// `F(k) = P(Y ≤ k)` for any integer `k`.
    pub fn cdf(&self, k: i64) -> f64 {
        if k < 0 {
            0.0
        } else if k as usize >= self.cdf.len() {
            1.0
        } else {
            self.cdf[k as usize]
        }
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(j, p)| j as f64 * p)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.probs
            .iter()
            .enumerate()
            .map(|(j, p)| (j as f64 - m).powi(2) * p)
            .sum()
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Lags entering the index at one date.
#[derive(Debug, Clone, Copy)]
pub struct IndexState<'a> {
    /// `Y_{t−1}, Y_{t−2}, …` (most recent first).
    pub y_lags: &'a [u32],
    /// `π_{t−1}, π_{t−2}, …` (most recent first).
    pub pi_lags: &'a [f64],
}

pub fn index_value(
    spec: &ModelSpec,
    theta: &Theta,
    state: IndexState<'_>,
    x_t: &[f64],
) -> Result<f64> {
    if state.y_lags.len() != spec.q
        || state.pi_lags.len() != spec.p_ar
        || x_t.len() != spec.n_regressors
    {
        return Err(Error::Shape(format!(
            "index state has {} outcome lags, {} index lags and {} regressors; model needs {}, {}, {}",
            state.y_lags.len(),
            state.pi_lags.len(),
            x_t.len(),
            spec.q,
            spec.p_ar,
            spec.n_regressors
        )));
    }
    Ok(index_unchecked(spec, theta, state, x_t))
}

pub(crate) fn index_unchecked(
    spec: &ModelSpec,
    theta: &Theta,
    state: IndexState<'_>,
    x_t: &[f64],
) -> f64 {
    let mut pi = theta.pi0;
    for (a, p) in theta.alpha.iter().zip(state.pi_lags) {
        pi += a * p;
    }
    for (d, &y) in theta.delta.iter().zip(state.y_lags) {
        pi += d * y as f64;
    }
    for (b, x) in theta.beta.iter().zip(x_t) {
        pi += b * x;
    }
    if spec.interactions {
        let y1 = state.y_lags[0] as f64;
        for (g, x) in theta.gamma.iter().zip(x_t) {
            pi += g * y1 * x;
        }
    }
    pi
}

/// Index `π_t` for every date of `series` under the truncated information
/// set: outcome lags before the sample are 0 and index lags before the
/// sample are the unconditional mean.
pub fn index_path(spec: &ModelSpec, theta: &Theta, series: &Series) -> Vec<f64> {
    let n = series.len();
    let mut pi = Vec::with_capacity(n);
    let pre = theta.presample_index();
    let mut y_lags = vec![0u32; spec.q];
    let mut pi_lags = vec![pre; spec.p_ar];
    for t in 0..n {
        for (i, slot) in y_lags.iter_mut().enumerate() {
            *slot = if t > i { series.y[t - 1 - i] } else { 0 };
        }
        for (i, slot) in pi_lags.iter_mut().enumerate() {
            *slot = if t > i { pi[t - 1 - i] } else { pre };
        }
        let state = IndexState {
            y_lags: &y_lags,
            pi_lags: &pi_lags,
        };
        pi.push(index_unchecked(spec, theta, state, series.x_row(t)));
    }
    pi
}

/// Cell probabilities at index `pi_t`, without a floor check.
pub(crate) fn cell_probs(link: LinkKind, thresholds: &[f64], pi_t: f64) -> Vec<f64> {
    let j_max = thresholds.len();
    let mut probs = Vec::with_capacity(j_max + 1);
    for j in 0..=j_max {
        probs.push(cell_prob(link, thresholds, j, pi_t));
    }
    probs
}

/// `P(Y = j | π)` computed on whichever tail avoids cancellation.
pub(crate) fn cell_prob(link: LinkKind, thresholds: &[f64], j: usize, pi_t: f64) -> f64 {
    let j_max = thresholds.len();
    if j == 0 {
        link.cdf(thresholds[0] - pi_t)
    } else if j == j_max {
        link.sf(thresholds[j_max - 1] - pi_t)
    } else {
        let lo = thresholds[j - 1] - pi_t;
        let hi = thresholds[j] - pi_t;
        if lo > 0.0 {
            link.sf(lo) - link.sf(hi)
        } else {
            link.cdf(hi) - link.cdf(lo)
        }
    }
}

/// Conditional law at index `pi_t`, enforcing [`HARD_FLOOR`].
pub fn cond_law(spec: &ModelSpec, theta: &Theta, pi_t: f64) -> Result<CondLaw> {
    cond_law_with_floor(spec, theta, pi_t, HARD_FLOOR)
}

pub fn cond_law_with_floor(
    spec: &ModelSpec,
    theta: &Theta,
    pi_t: f64,
    floor: f64,
) -> Result<CondLaw> {
    if !pi_t.is_finite() {
        return Err(Error::Domain(format!("index value {pi_t} is not finite")));
    }
    let probs = cell_probs(spec.link, theta.thresholds(spec), pi_t);
    CondLaw::from_probs(probs, floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn interaction_spec() -> ModelSpec {
        ModelSpec::binary(LinkKind::Probit, 1, 1, true)
    }

    #[test]
    fn static_index_zero() {
        let spec = ModelSpec::binary(LinkKind::Probit, 0, 1, false);
        let theta = Theta {
            beta: vec![1.0],
            ..Theta::zeros(&spec)
        };
        let s = IndexState {
            y_lags: &[],
            pi_lags: &[],
        };
        assert_eq!(index_value(&spec, &theta, s, &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn interaction_index_by_hand() {
        let spec = interaction_spec();
        let theta = Theta {
            pi0: 0.0,
            delta: vec![0.8],
            beta: vec![1.0],
            gamma: vec![-2.0],
            ..Theta::zeros(&spec)
        };
        let s = IndexState {
            y_lags: &[1],
            pi_lags: &[],
        };
        let v = index_value(&spec, &theta, s, &[0.5]).unwrap();
        assert!((v - 0.3).abs() < 1e-15);
    }

    #[test]
    fn dynamic_index_with_zero_lag() {
        let spec = ModelSpec::binary(LinkKind::Probit, 1, 0, false);
        let theta = Theta {
            delta: vec![0.8],
            ..Theta::zeros(&spec)
        };
        let s = IndexState {
            y_lags: &[0],
            pi_lags: &[],
        };
        assert_eq!(index_value(&spec, &theta, s, &[]).unwrap(), 0.0);
    }

    #[test]
    fn index_shape_mismatch() {
        let spec = interaction_spec();
        let theta = Theta::zeros(&spec);
        let s = IndexState {
            y_lags: &[],
            pi_lags: &[],
        };
        assert!(matches!(
            index_value(&spec, &theta, s, &[0.5]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn index_lags_recursion() {
        let spec = ModelSpec {
            p_ar: 1,
            ..ModelSpec::binary(LinkKind::Probit, 0, 1, false)
        };
        let theta = Theta {
            pi0: 0.5,
            alpha: vec![0.5],
            beta: vec![1.0],
            ..Theta::zeros(&spec)
        };
        let series = Series::new(vec![0, 1, 0], vec![1.0, 0.0, -1.0], 1).unwrap();
        let pi = index_path(&spec, &theta, &series);
        // presample is 0.5 / 0.5 = 1
        assert!((pi[0] - (0.5 + 0.5 * 1.0 + 1.0)).abs() < 1e-15);
        assert!((pi[1] - (0.5 + 0.5 * pi[0])).abs() < 1e-15);
        assert!((pi[2] - (0.5 + 0.5 * pi[1] - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn binary_law_at_zero() {
        let spec = ModelSpec::binary(LinkKind::Probit, 0, 0, false);
        let law = cond_law(&spec, &Theta::zeros(&spec), 0.0).unwrap();
        assert_eq!(law.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn ordered_law_by_quadrature_values() {
        let spec = ModelSpec::ordered(LinkKind::Probit, 2, 0, 0);
        let theta = Theta {
            mu: vec![0.0, 1.0],
            ..Theta::zeros(&spec)
        };
        let law = cond_law(&spec, &theta, 0.0).unwrap();
        // Φ(1) − Φ(0) and 1 − Φ(1)
        let expect = [0.5, 0.341_344_746_068_542_9, 0.158_655_253_931_457_05];
        for (p, e) in law.probs().iter().zip(expect) {
            assert!((p - e).abs() < 1e-14, "{p} vs {e}");
        }
    }

    #[test]
    fn binary_law_at_point_three() {
        let spec = ModelSpec::binary(LinkKind::Probit, 0, 0, false);
        let law = cond_law(&spec, &Theta::zeros(&spec), 0.3).unwrap();
        assert!((law.probs()[1] - 0.617_911_422_188_952_7).abs() < 1e-15);
    }

    #[test]
    fn floor_violation() {
        let spec = ModelSpec::binary(LinkKind::Probit, 0, 0, false);
        let err = cond_law(&spec, &Theta::zeros(&spec), 9.0).unwrap_err();
        assert!(matches!(err, Error::CellFloor { category: 0, .. }));
        // chisq1 cells can be exactly zero
        let spec = ModelSpec::binary(LinkKind::Chisq1, 0, 0, false);
        assert!(cond_law(&spec, &Theta::zeros(&spec), 1.0).is_err());
    }

    #[test]
    fn chisq1_binary_uses_latent_threshold() {
        let spec = ModelSpec::binary(LinkKind::Chisq1, 0, 0, false);
        let law = cond_law(&spec, &Theta::zeros(&spec), 0.2).unwrap();
        assert!((law.probs()[0] - LinkKind::Chisq1.cdf(-0.2)).abs() < 1e-16);
    }

    #[test]
    fn spec_validation() {
        let mut spec = ModelSpec::binary(LinkKind::Probit, 0, 1, true);
        assert!(spec.validate().is_err());
        spec.q = 1;
        assert!(spec.validate().is_ok());
        let spec = ModelSpec {
            support_size: 3,
            ordered: false,
            ..ModelSpec::binary(LinkKind::Probit, 0, 0, false)
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn theta_validation() {
        let spec = ModelSpec::ordered(LinkKind::Probit, 2, 0, 0);
        let bad = Theta {
            mu: vec![1.0, 0.5],
            ..Theta::zeros(&spec)
        };
        assert!(bad.validate(&spec).is_err());
        let intercept = Theta {
            pi0: 1.0,
            ..Theta::zeros(&spec)
        };
        assert!(intercept.validate(&spec).is_err());

        let spec = ModelSpec {
            p_ar: 2,
            ..ModelSpec::binary(LinkKind::Probit, 0, 0, false)
        };
        // 1 − 0.5L − 0.6L² has a root inside the unit circle
        let explosive = Theta {
            alpha: vec![0.5, 0.6],
            ..Theta::zeros(&spec)
        };
        assert!(explosive.validate(&spec).is_err());
        let fine = Theta {
            alpha: vec![0.5, 0.3],
            ..Theta::zeros(&spec)
        };
        assert!(fine.validate(&spec).is_ok());
    }

    #[test]
    fn flatten_roundtrip() {
        let spec = ModelSpec::binary(LinkKind::Logistic, 2, 2, true);
        let theta = Theta {
            pi0: 0.1,
            delta: vec![0.2, 0.3],
            alpha: vec![],
            beta: vec![0.4, 0.5],
            gamma: vec![0.6, 0.7],
            mu: vec![],
        };
        let v = theta.flatten(&spec);
        assert_eq!(v.len(), spec.n_params());
        assert_eq!(Theta::unflatten(&spec, &v).unwrap(), theta);
    }

    #[test]
    fn json_field_names() {
        let spec = ModelSpec::binary(LinkKind::Logistic, 1, 1, true);
        let js = serde_json::to_value(&spec).unwrap();
        for key in [
            "link",
            "support_size",
            "q",
            "p_ar",
            "n_regressors",
            "interactions",
            "ordered",
        ] {
            assert!(js.get(key).is_some(), "{key}");
        }
        assert_eq!(js["link"], "logistic");
        let theta: Theta = serde_json::from_str(r#"{"pi0":0.5,"beta":[1.0]}"#).unwrap();
        assert_eq!(theta.beta, vec![1.0]);
        assert!(theta.mu.is_empty());
    }

    #[test]
    fn series_validation() {
        let spec = ModelSpec::binary(LinkKind::Probit, 1, 0, false);
        let s = Series::new(vec![0, 2, 1], vec![], 0).unwrap();
        assert!(matches!(s.validate(&spec), Err(Error::Domain(_))));
        let short = Series::new(vec![1], vec![], 0).unwrap();
        assert!(short.validate(&spec).is_err());
        assert!(Series::new(vec![0, 1], vec![1.0], 1).is_err());
    }

    fn arb_ordered() -> impl Strategy<Value = (LinkKind, Vec<f64>, f64)> {
        let link = prop_oneof![Just(LinkKind::Probit), Just(LinkKind::Logistic)];
        (
            link,
            proptest::collection::vec(0.05f64..1.5, 1..5),
            -1.5f64..1.5,
            -1.0f64..1.0,
        )
            .prop_map(|(link, gaps, pi, start)| {
                let mut mu = Vec::new();
                let mut acc = start;
                for g in gaps {
                    mu.push(acc);
                    acc += g;
                }
                (link, mu, pi)
            })
    }

    proptest! {
        #[test]
        fn law_sums_to_one((link, mu, pi) in arb_ordered()) {
            let spec = ModelSpec::ordered(link, mu.len(), 0, 0);
            let theta = Theta { mu, ..Theta::zeros(&spec) };
            let law = cond_law(&spec, &theta, pi).unwrap();
            let total: f64 = law.probs().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            for w in law.cdf_values().windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            prop_assert_eq!(*law.cdf_values().last().unwrap(), 1.0);
        }

        #[test]
        fn ordered_collapses_to_binary(pi in -4.0f64..4.0) {
            for link in [LinkKind::Probit, LinkKind::Logistic] {
                let ord = ModelSpec::ordered(link, 1, 0, 0);
                let theta_o = Theta { mu: vec![0.0], ..Theta::zeros(&ord) };
                let bin = ModelSpec::binary(link, 0, 0, false);
                let a = cond_law(&ord, &theta_o, pi).unwrap();
                let b = cond_law(&bin, &Theta::zeros(&bin), pi).unwrap();
                prop_assert_eq!(a.probs(), b.probs());
                prop_assert_eq!(a.probs()[1], link.cdf(pi));
            }
        }
    }
}
