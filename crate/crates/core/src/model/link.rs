//! Latent error distributions.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use libm::{erf, erfc};
use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Distribution of the latent error, i.e. the link between the index and
/// the outcome probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    /// Standard normal.
    Probit,
    /// Standard logistic.
    #[serde(alias = "logit")]
    Logistic,
    /// Standardized chi-square with one degree of freedom, `(χ²₁ − 1)/√2`.
    Chisq1,
}

impl LinkKind {
    pub fn name(self) -> &'static str {
        match self {
            LinkKind::Probit => "probit",
            LinkKind::Logistic => "logistic",
            LinkKind::Chisq1 => "chisq1",
        }
    }

    /// `true` when `F(x) = 1 − F(−x)`.
    pub fn is_symmetric(self) -> bool {
        !matches!(self, LinkKind::Chisq1)
    }

    pub fn cdf(self, x: f64) -> f64 {
        match self {
            LinkKind::Probit => 0.5 * erfc(-x * FRAC_1_SQRT_2),
            LinkKind::Logistic => logistic(x),
            LinkKind::Chisq1 => {
                let w = SQRT_2 * x + 1.0;
                if w <= 0.0 {
                    0.0
                } else {
                    erf((0.5 * w).sqrt())
                }
            }
        }
    }

    /// Survival function `1 − F(x)`, evaluated without cancellation.
    pub fn sf(self, x: f64) -> f64 {
        match self {
            LinkKind::Probit => 0.5 * erfc(x * FRAC_1_SQRT_2),
            LinkKind::Logistic => logistic(-x),
            LinkKind::Chisq1 => {
                let w = SQRT_2 * x + 1.0;
                if w <= 0.0 {
                    1.0
                } else {
                    erfc((0.5 * w).sqrt())
                }
            }
        }
    }

    pub fn pdf(self, x: f64) -> f64 {
        match self {
            LinkKind::Probit => FRAC_1_SQRT_2PI * (-0.5 * x * x).exp(),
            LinkKind::Logistic => logistic(x) * logistic(-x),
            LinkKind::Chisq1 => {
                let w = SQRT_2 * x + 1.0;
                if w <= 0.0 {
                    0.0
                } else {
                    (-0.5 * w).exp() / (PI * w).sqrt()
                }
            }
        }
    }

    /// Derivative of the density.
    pub fn pdf_deriv(self, x: f64) -> f64 {
        match self {
            LinkKind::Probit => -x * self.pdf(x),
            LinkKind::Logistic => {
                let (a, b) = (logistic(x), logistic(-x));
                a * b * (b - a)
            }
            LinkKind::Chisq1 => {
                let w = SQRT_2 * x + 1.0;
                if w <= 0.0 {
                    0.0
                } else {
                    -SQRT_2 * self.pdf(x) * 0.5 * (1.0 + 1.0 / w)
                }
            }
        }
    }

    /// Draws one latent error.
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            LinkKind::Probit => StandardNormal.sample(rng),
            LinkKind::Logistic => {
                let u: f64 = Open01.sample(rng);
                (u / (1.0 - u)).ln()
            }
            LinkKind::Chisq1 => {
                let z: f64 = StandardNormal.sample(rng);
                (z * z - 1.0) * FRAC_1_SQRT_2
            }
        }
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LinkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "probit" | "normal" => Ok(LinkKind::Probit),
            "logit" | "logistic" => Ok(LinkKind::Logistic),
            "chisq1" | "chi2" => Ok(LinkKind::Chisq1),
            other => Err(Error::Config(format!("unknown link `{other}`"))),
        }
    }
}

/// Checked link evaluation.
pub fn link_cdf(link: LinkKind, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("link argument {x} is not finite")));
    }
    Ok(link.cdf(x))
}
