//! Continuation of discrete outcomes and the randomized probability
//! integral transform.
//!
//! A discrete outcome `Y ∈ {0, …, J}` is continued as `Y† = Y + Z − 1` with
//! `Z ∈ [0, 1]`. Under uniform `Z` the continued cdf is
//! `F†(y) = F([y]) + (y − [y]) P([y] + 1)`, continuous and strictly
//! increasing on `[−1, J]`, and `F†(Y†)` is exactly uniform under the model.
//! With any other continuous noise law `F_z` the transform only sees
//! `F_z(Z)`, so the residuals are unchanged.

use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    cond_law_with_floor, index_path, CondLaw, ModelSpec, Series, Theta, WARN_FLOOR,
};

/// Residuals are kept in `[U_CLAMP, 1 − U_CLAMP]`.
pub const U_CLAMP: f64 = 1e-15;

/// Floor used when the pipeline builds laws: only cells that are exactly
/// zero (or not finite) are rejected.
pub(crate) const PIPELINE_FLOOR: f64 = f64::MIN_POSITIVE;

/// Continuous cdf of the continuation noise on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseCdf {
    Uniform,
    /// `F_z(z) = z^exponent`.
    Power {
        exponent: f64,
    },
    /// `F_z(z) = 1 − (1 − z^a)^b`.
    Kumaraswamy {
        a: f64,
        b: f64,
    },
}

impl NoiseCdf {
    pub fn apply(&self, z: f64) -> f64 {
        match *self {
            NoiseCdf::Uniform => z,
            NoiseCdf::Power { exponent } => {
                if exponent == 2.0 {
                    z * z
                } else {
                    z.powf(exponent)
                }
            }
            NoiseCdf::Kumaraswamy { a, b } => 1.0 - (1.0 - z.powf(a)).powf(b),
        }
    }

    /// Inverse cdf, used to draw noise with this law.
    pub fn invert(&self, v: f64) -> f64 {
        match *self {
            NoiseCdf::Uniform => v,
            NoiseCdf::Power { exponent } => v.powf(1.0 / exponent),
            NoiseCdf::Kumaraswamy { a, b } => (1.0 - (1.0 - v).powf(1.0 / b)).powf(1.0 / a),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseCdf::Uniform => true,
            NoiseCdf::Power { exponent } => exponent > 0.0 && exponent.is_finite(),
            NoiseCdf::Kumaraswamy { a, b } => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid noise law {self:?}")))
        }
    }
}

/// Continuation noise for one series, one value per date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseStream {
    pub z: Vec<f64>,
    pub noise_cdf: NoiseCdf,
    pub seed: u64,
}

impl NoiseStream {
    pub fn new(z: Vec<f64>, noise_cdf: NoiseCdf, seed: u64) -> Result<Self> {
        noise_cdf.validate()?;
        if let Some(v) = z.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("noise value {v} outside [0, 1]")));
        }
        Ok(NoiseStream { z, noise_cdf, seed })
    }

    /// Uniform noise drawn from `rng`; `seed` is recorded for reporting.
    pub fn uniform<R: Rng + ?Sized>(len: usize, seed: u64, rng: &mut R) -> Self {
        let z = (0..len).map(|_| rng.random::<f64>()).collect();
        NoiseStream {
            z,
            noise_cdf: NoiseCdf::Uniform,
            seed,
        }
    }

    /// Noise drawn from `noise_cdf` by inversion.
    pub fn draw<R: Rng + ?Sized>(
        len: usize,
        noise_cdf: NoiseCdf,
        seed: u64,
        rng: &mut R,
    ) -> Result<Self> {
        noise_cdf.validate()?;
        let z = (0..len)
            .map(|_| noise_cdf.invert(rng.random::<f64>()))
            .collect();
        Self::new(z, noise_cdf, seed)
    }

    /// The equivalent uniform stream `F_z(z)`.
    pub fn to_uniform(&self) -> NoiseStream {
        NoiseStream {
            z: self.z.iter().map(|&z| self.noise_cdf.apply(z)).collect(),
            noise_cdf: NoiseCdf::Uniform,
            seed: self.seed,
        }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

/// PIT residuals `Û_t` for dates `first_date..T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformResiduals {
    pub u: Vec<f64>,
    pub theta_used: Theta,
    pub noise_seed: u64,
    pub noise_cdf: NoiseCdf,
    /// Date of `u[0]` in the original series.
    pub first_date: usize,
    /// Conditional cells below the warning floor across all dates.
    pub small_cells: usize,
}

impl UniformResiduals {
    /// Writes the residuals as a one-column CSV with header `u`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "u")?;
        for v in &self.u {
            writeln!(out, "{v:?}")?;
        }
        Ok(())
    }
}

/// Continued cdf `F†(y)` on `[−1, J]`.
pub fn cont_cdf(law: &CondLaw, y_dag: f64) -> Result<f64> {
    let j_max = law.support_size() as f64;
    if !(-1.0..=j_max).contains(&y_dag) {
        return Err(Error::Domain(format!(
            "continued value {y_dag} outside [−1, {j_max}]"
        )));
    }
    if y_dag == j_max {
        return Ok(1.0);
    }
    let k = y_dag.floor();
    let frac = y_dag - k;
    let k = k as i64;
    Ok(law.cdf(k) + frac * law.prob(k + 1))
}

/// `F⁻¹(r)`: the largest `k ∈ {−1, …, J − 1}` with `F(k) ≤ r`.
fn lower_quantile(law: &CondLaw, r: f64) -> i64 {
    let j_max = law.support_size() as i64;
    let mut k = -1;
    while k + 1 < j_max && law.cdf(k + 1) <= r {
        k += 1;
    }
    k
}

/// Inverse of the continued cdf.
pub fn cont_quantile(law: &CondLaw, r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Domain(format!("probability {r} outside [0, 1]")));
    }
    if r == 1.0 {
        return Ok(law.support_size() as f64);
    }
    let k = lower_quantile(law, r);
    Ok(k as f64 + (r - law.cdf(k)) / law.prob(k + 1))
}

/// PIT value of one continued outcome: `F(y − 1) + F_z(z) P(y)`.
pub fn pit_value(law: &CondLaw, y: u32, z: f64, noise_cdf: &NoiseCdf) -> f64 {
    let y = y as i64;
    let u = law.cdf(y - 1) + noise_cdf.apply(z) * law.prob(y);
    u.clamp(U_CLAMP, 1.0 - U_CLAMP)
}

/// Conditional laws at the likelihood dates under the truncated
/// information set, together with the count of sub-warning-floor cells.
pub fn conditional_laws(
    spec: &ModelSpec,
    theta: &Theta,
    series: &Series,
) -> Result<(Vec<CondLaw>, usize)> {
    theta.validate(spec)?;
    series.validate(spec)?;
    let pi = index_path(spec, theta, series);
    let mut laws = Vec::with_capacity(series.len() - spec.max_lag());
    let mut small = 0;
    for &p in &pi[spec.max_lag()..] {
        let law = cond_law_with_floor(spec, theta, p, PIPELINE_FLOOR)?;
        small += law.probs().iter().filter(|&&c| c < WARN_FLOOR).count();
        laws.push(law);
    }
    Ok((laws, small))
}

/// Randomized PIT residuals of `series` under `theta` with noise `noise`
/// (one value per date; values for the conditioning dates are unused).
pub fn randomized_pit(
    spec: &ModelSpec,
    theta: &Theta,
    series: &Series,
    noise: &NoiseStream,
) -> Result<UniformResiduals> {
    if noise.len() != series.len() {
        return Err(Error::Shape(format!(
            "noise has length {}, series has length {}",
            noise.len(),
            series.len()
        )));
    }
    let (laws, small_cells) = conditional_laws(spec, theta, series)?;
    let first = spec.max_lag();
    let u = laws
        .iter()
        .enumerate()
        .map(|(i, law)| {
            pit_value(
                law,
                series.y[first + i],
                noise.z[first + i],
                &noise.noise_cdf,
            )
        })
        .collect();
    Ok(UniformResiduals {
        u,
        theta_used: theta.clone(),
        noise_seed: noise.seed,
        noise_cdf: noise.noise_cdf,
        first_date: first,
        small_cells,
    })
}

fn check_pair(g: &CondLaw, f: &CondLaw, r: f64) -> Result<()> {
    if g.support_size() != f.support_size() {
        return Err(Error::Shape(format!(
            "laws have supports 0..={} and 0..={}",
            g.support_size(),
            f.support_size()
        )));
    }
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Domain(format!("probability {r} outside [0, 1]")));
    }
    Ok(())
}

/// Signed gap `d(G, F, r) = G†((F†)⁻¹(r)) − r` evaluated from the lower
/// quantile of `F`. At `r = 1` it is 0 by continuity.
pub fn discrepancy(g: &CondLaw, f: &CondLaw, r: f64) -> Result<f64> {
    check_pair(g, f, r)?;
    if r == 1.0 {
        return Ok(0.0);
    }
    let k = lower_quantile(f, r);
    let pf = f.prob(k + 1);
    Ok(g.cdf(k) - f.cdf(k) + (r - f.cdf(k)) / pf * (g.prob(k + 1) - pf))
}

/// Same quantity through `y = (F†)⁻¹(r)` and the lower integer `[y]`.
pub fn discrepancy_from_below(g: &CondLaw, f: &CondLaw, r: f64) -> Result<f64> {
    check_pair(g, f, r)?;
    if r == 1.0 {
        return Ok(0.0);
    }
    let y = cont_quantile(f, r)?;
    let k = y.floor();
    let frac = y - k;
    let k = k as i64;
    Ok(g.cdf(k) - f.cdf(k) + frac * (g.prob(k + 1) - f.prob(k + 1)))
}

/// Same quantity through `y = (F†)⁻¹(r)` and the upper integer `[y] + 1`.
pub fn discrepancy_from_above(g: &CondLaw, f: &CondLaw, r: f64) -> Result<f64> {
    check_pair(g, f, r)?;
    if r == 1.0 {
        return Ok(0.0);
    }
    let y = cont_quantile(f, r)?;
    let k = y.floor();
    let frac = y - k;
    let k = k as i64;
    Ok(g.cdf(k + 1) - f.cdf(k + 1) + (frac - 1.0) * (g.prob(k + 1) - f.prob(k + 1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate, simulate_x_ar1, LinkKind, HARD_FLOOR};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn law(p1: f64) -> CondLaw {
        CondLaw::binary(p1).unwrap()
    }

    #[test]
    fn binary_continued_cdf() {
        let f = law(0.3);
        assert!((cont_cdf(&f, -0.5).unwrap() - 0.35).abs() < 1e-15);
        assert_eq!(cont_cdf(&f, 0.0).unwrap(), 0.7);
        assert_eq!(cont_cdf(&f, 1.0).unwrap(), 1.0);
        assert_eq!(cont_cdf(&f, -1.0).unwrap(), 0.0);
        assert!(cont_cdf(&f, 1.2).is_err());
        assert!(cont_cdf(&f, -1.01).is_err());
    }

    #[test]
    fn binary_continued_quantile() {
        let f = law(0.3);
        assert!((cont_quantile(&f, 0.35).unwrap() + 0.5).abs() < 1e-15);
        assert_eq!(cont_quantile(&f, 0.0).unwrap(), -1.0);
        assert_eq!(cont_quantile(&f, 1.0).unwrap(), 1.0);
        // ties land on the integer
        assert_eq!(cont_quantile(&f, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn pit_by_hand() {
        let f = law(0.3);
        let u = pit_value(&f, 1, 0.5, &NoiseCdf::Uniform);
        assert!((u - 0.85).abs() < 1e-15);
    }

    #[test]
    fn squared_noise_matches_uniform() {
        let f = law(0.3);
        let a = pit_value(&f, 1, 0.8, &NoiseCdf::Power { exponent: 2.0 });
        let b = pit_value(&f, 1, 0.8 * 0.8, &NoiseCdf::Uniform);
        assert_eq!(a, b);
        assert!((a - 0.892).abs() < 1e-15);
    }

    #[test]
    fn discrepancy_by_hand() {
        let g = law(0.4);
        let f = law(0.3);
        for d in [
            discrepancy(&g, &f, 0.35).unwrap(),
            discrepancy_from_below(&g, &f, 0.35).unwrap(),
            discrepancy_from_above(&g, &f, 0.35).unwrap(),
        ] {
            assert!((d + 0.05).abs() < 1e-15, "{d}");
        }
        // definition: G†(−0.5) − 0.35
        let y = cont_quantile(&f, 0.35).unwrap();
        assert!((cont_cdf(&g, y).unwrap() - 0.35 + 0.05).abs() < 1e-15);
        assert_eq!(discrepancy(&g, &f, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn discrepancy_needs_matching_support() {
        let g = CondLaw::from_probs(vec![0.2, 0.3, 0.5], HARD_FLOOR).unwrap();
        assert!(discrepancy(&g, &law(0.3), 0.5).is_err());
    }

    #[test]
    fn pit_noise_length_checked() {
        let spec = ModelSpec::binary(LinkKind::Probit, 0, 0, false);
        let series = Series::new(vec![0, 1, 1], vec![], 0).unwrap();
        let noise = NoiseStream::new(vec![0.5, 0.5], NoiseCdf::Uniform, 0).unwrap();
        assert!(matches!(
            randomized_pit(&spec, &Theta::zeros(&spec), &series, &noise),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn noise_values_checked() {
        assert!(NoiseStream::new(vec![0.2, 1.5], NoiseCdf::Uniform, 0).is_err());
        assert!(NoiseStream::new(vec![0.2], NoiseCdf::Power { exponent: -1.0 }, 0).is_err());
    }

    #[test]
    fn csv_export() {
        let r = UniformResiduals {
            u: vec![0.25, 0.5],
            theta_used: Theta::default(),
            noise_seed: 0,
            noise_cdf: NoiseCdf::Uniform,
            first_date: 0,
            small_cells: 0,
        };
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "u\n0.25\n0.5\n");
    }

    #[test]
    fn null_residuals_are_white() {
        let spec = ModelSpec::binary(LinkKind::Probit, 1, 1, true);
        let theta = Theta {
            pi0: 0.0,
            delta: vec![0.8],
            beta: vec![1.0],
            gamma: vec![-2.0],
            ..Theta::zeros(&spec)
        };
        let n = 50_000;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let x = simulate_x_ar1(0.8, n, &mut rng).unwrap();
        let series = simulate(&spec, &theta, n, &x, &mut rng).unwrap();
        let noise = NoiseStream::uniform(n, 99, &mut rng);
        let u = randomized_pit(&spec, &theta, &series, &noise).unwrap().u;
        let m = u.iter().sum::<f64>() / u.len() as f64;
        let den: f64 = u.iter().map(|v| (v - m).powi(2)).sum();
        let bound = 3.0 / (u.len() as f64).sqrt();
        for lag in 1..=5 {
            let num: f64 = (lag..u.len()).map(|t| (u[t] - m) * (u[t - lag] - m)).sum();
            assert!((num / den).abs() < bound, "lag {lag}: {}", num / den);
        }
    }

    fn arb_law() -> impl Strategy<Value = CondLaw> {
        proptest::collection::vec(0.02f64..1.0, 2..6).prop_map(|w| {
            let s: f64 = w.iter().sum();
            let mut probs: Vec<f64> = w.iter().map(|v| v / s).collect();
            let rest: f64 = probs[..probs.len() - 1].iter().sum();
            *probs.last_mut().unwrap() = 1.0 - rest;
            CondLaw::from_probs(probs, HARD_FLOOR).unwrap()
        })
    }

    fn arb_pair() -> impl Strategy<Value = (CondLaw, CondLaw)> {
        (2usize..6).prop_flat_map(|n| {
            let one = proptest::collection::vec(0.02f64..1.0, n).prop_map(|w| {
                let s: f64 = w.iter().sum();
                let mut probs: Vec<f64> = w.iter().map(|v| v / s).collect();
                let rest: f64 = probs[..probs.len() - 1].iter().sum();
                *probs.last_mut().unwrap() = 1.0 - rest;
                CondLaw::from_probs(probs, HARD_FLOOR).unwrap()
            });
            (one.clone(), one)
        })
    }

    proptest! {
        #[test]
        fn cont_cdf_increasing(f in arb_law(), mut ys in proptest::collection::vec(0.0f64..1.0, 2..30)) {
            let j = f.support_size() as f64;
            ys.iter_mut().for_each(|y| *y = -1.0 + *y * (j + 1.0));
            ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ys.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
            for w in ys.windows(2) {
                prop_assert!(cont_cdf(&f, w[0]).unwrap() < cont_cdf(&f, w[1]).unwrap());
            }
        }

        #[test]
        fn quantile_inverts_cdf(f in arb_law(), r in 0.0f64..1.0, s in 0.0f64..1.0) {
            let y = cont_quantile(&f, r).unwrap();
            prop_assert!((cont_cdf(&f, y).unwrap() - r).abs() < 1e-12);
            let j = f.support_size() as f64;
            let yy = -1.0 + s * (j + 1.0);
            let back = cont_quantile(&f, cont_cdf(&f, yy).unwrap()).unwrap();
            prop_assert!((back - yy).abs() < 1e-12);
        }

        #[test]
        fn discrepancy_representations_agree((g, f) in arb_pair(), r in 0.0f64..1.0) {
            let a = discrepancy(&g, &f, r).unwrap();
            let b = discrepancy_from_below(&g, &f, r).unwrap();
            let c = discrepancy_from_above(&g, &f, r).unwrap();
            let d = cont_cdf(&g, cont_quantile(&f, r).unwrap()).unwrap() - r;
            prop_assert!((a - b).abs() < 1e-12 && (a - c).abs() < 1e-12 && (a - d).abs() < 1e-12);
            prop_assert_eq!(discrepancy(&f, &f, r).unwrap().abs() < 1e-15, true);
        }

        #[test]
        fn noise_law_invariance(seed in 0u64..500, exponent in 0.2f64..5.0, a in 0.3f64..3.0, b in 0.3f64..3.0) {
            let spec = ModelSpec::ordered(LinkKind::Logistic, 2, 1, 1);
            let theta = Theta { delta: vec![0.5], beta: vec![0.7], mu: vec![-0.4, 0.9], ..Theta::zeros(&spec) };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = simulate_x_ar1(0.6, 80, &mut rng).unwrap();
            let series = simulate(&spec, &theta, 80, &x, &mut rng).unwrap();
            for cdf in [NoiseCdf::Power { exponent }, NoiseCdf::Kumaraswamy { a, b }] {
                let noise = NoiseStream::draw(80, cdf, seed, &mut rng).unwrap();
                let direct = randomized_pit(&spec, &theta, &series, &noise).unwrap();
                let matched = randomized_pit(&spec, &theta, &series, &noise.to_uniform()).unwrap();
                prop_assert_eq!(direct.u, matched.u);
            }
        }
    }
}
