//! Goodness-of-fit statistics computed from PIT residuals.
//!
//! Three empirical processes are supported, each a scaled sum of indicator
//! terms over `n` points:
//!
//! * marginal, `p = 1`: points `Û_{t−1}`, `t = 2..T`, scale `1/√(T−2)`;
//! * joint, `p = 2`: points `(Û_{t−1}, Û_{t−2})`, `t = 3..T`, scale `1/√(T−3)`;
//! * pairwise at lag `j`: points `(Û_t, Û_{t−j})`, `t = j+1..T`, scale `1/√(T−j)`.
//!
//! Cramér-von Mises integrals are evaluated in closed form and
//! Kolmogorov-Smirnov sups over an exact finite candidate set.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, Series, Theta};
use crate::numeric::normal_quantile;
use crate::transform::conditional_laws;

/// Empirical process underlying a CvM or KS statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Process {
    Marginal,
    Joint2,
    Pair(usize),
}

/// A statistic, identified by its report name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum StatKind {
    CvM(Process),
    Ks(Process),
    /// Weighted sum of the marginal and joint statistics.
    Adp {
        ks: bool,
    },
    /// Weighted sum of the pairwise statistics over lags `1..=m`.
    Adj {
        ks: bool,
    },
    /// Box-Pierce on the PIT residuals themselves.
    Bpu(usize),
    /// Box-Pierce on Gaussian residuals `Φ⁻¹(Û_t)`.
    Bpn(usize),
    /// Box-Pierce on standardized discrete residuals.
    Bpd(usize),
    /// Jarque-Bera on Gaussian residuals.
    Jb,
}

impl StatKind {
    pub fn name(&self) -> String {
        fn process(prefix: &str, p: &Process) -> String {
            match p {
                Process::Marginal => format!("{prefix}0"),
                Process::Joint2 => format!("{prefix}_p2"),
                Process::Pair(j) => format!("{prefix}{j}"),
            }
        }
        match self {
            StatKind::CvM(p) => process("CvM", p),
            StatKind::Ks(p) => process("KS", p),
            StatKind::Adp { ks: false } => "ADP".into(),
            StatKind::Adp { ks: true } => "ADP_KS".into(),
            StatKind::Adj { ks: false } => "ADJ".into(),
            StatKind::Adj { ks: true } => "ADJ_KS".into(),
            StatKind::Bpu(m) => format!("BPU_{m}"),
            StatKind::Bpn(m) => format!("BPN_{m}"),
            StatKind::Bpd(m) => format!("BPD_{m}"),
            StatKind::Jb => "JB".into(),
        }
    }

    /// Does the statistic need discrete residuals (and hence the model)?
    pub fn needs_model(&self) -> bool {
        matches!(self, StatKind::Bpd(_))
    }

    /// Is it a functional of an empirical process (or an aggregate of them)?
    pub fn is_empirical_process(&self) -> bool {
        matches!(
            self,
            StatKind::CvM(_) | StatKind::Ks(_) | StatKind::Adp { .. } | StatKind::Adj { .. }
        )
    }
}

impl fmt::Display for StatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl From<StatKind> for String {
    fn from(k: StatKind) -> String {
        k.name()
    }
}

impl TryFrom<String> for StatKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for StatKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown statistic `{s}`"));
        let positive = |v: &str| -> Result<usize> {
            match v.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(n),
                _ => Err(bad()),
            }
        };
        let process = |rest: &str| -> Result<Process> {
            match rest {
                "0" => Ok(Process::Marginal),
                "_p2" => Ok(Process::Joint2),
                _ => positive(rest).map(Process::Pair),
            }
        };
        match s {
            "ADP" => return Ok(StatKind::Adp { ks: false }),
            "ADP_KS" => return Ok(StatKind::Adp { ks: true }),
            "ADJ" => return Ok(StatKind::Adj { ks: false }),
            "ADJ_KS" => return Ok(StatKind::Adj { ks: true }),
            "JB" => return Ok(StatKind::Jb),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("CvM") {
            return process(rest).map(StatKind::CvM);
        }
        if let Some(rest) = s.strip_prefix("KS") {
            return process(rest).map(StatKind::Ks);
        }
        if let Some(rest) = s.strip_prefix("BPU_") {
            return positive(rest).map(StatKind::Bpu);
        }
        if let Some(rest) = s.strip_prefix("BPN_") {
            return positive(rest).map(StatKind::Bpn);
        }
        if let Some(rest) = s.strip_prefix("BPD_") {
            return positive(rest).map(StatKind::Bpd);
        }
        Err(bad())
    }
}

/// Parses a comma-separated list of statistic names.
pub fn parse_stat_list(s: &str) -> Result<Vec<StatKind>> {
    let kinds = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::parse)
        .collect::<Result<Vec<_>>>()?;
    if kinds.is_empty() {
        return Err(Error::Config("empty statistic list".into()));
    }
    Ok(kinds)
}

/// The columns of the published rejection tables.
pub fn default_stats() -> Vec<StatKind> {
    let mut v = vec![
        StatKind::CvM(Process::Marginal),
        StatKind::CvM(Process::Pair(1)),
        StatKind::CvM(Process::Pair(2)),
        StatKind::Ks(Process::Marginal),
        StatKind::Ks(Process::Pair(1)),
        StatKind::Ks(Process::Pair(2)),
    ];
    v.extend([1, 2, 25].map(StatKind::Bpn));
    v.push(StatKind::Jb);
    v.extend([1, 2, 25].map(StatKind::Bpd));
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatValue {
    pub kind: StatKind,
    pub value: f64,
}

/// Lag weights `k(j)` for aggregate statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Weights {
    /// `k(j) = 1 − j/(m + 1)`.
    #[default]
    Bartlett,
    /// `k(j) = 1`.
    Flat,
    /// `k(j) = w[j − 1]`.
    Custom(Vec<f64>),
}

impl Weights {
    pub fn weight(&self, j: usize, m: usize) -> f64 {
        match self {
            Weights::Bartlett => 1.0 - j as f64 / (m as f64 + 1.0),
            Weights::Flat => 1.0,
            Weights::Custom(w) => w.get(j - 1).copied().unwrap_or(0.0),
        }
    }
}

/// Settings for aggregate statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatSettings {
    pub weights: Weights,
    /// Number of orders `p` in ADP (at most 2).
    pub adp_m: usize,
    /// Number of lags `j` in ADJ.
    pub adj_m: usize,
}

impl Default for StatSettings {
    fn default() -> Self {
        StatSettings {
            weights: Weights::Bartlett,
            adp_m: 2,
            adj_m: 5,
        }
    }
}

impl StatSettings {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.adp_m) {
            return Err(Error::Config(format!(
                "ADP order count must be 1 or 2, got {}",
                self.adp_m
            )));
        }
        if self.adj_m == 0 {
            return Err(Error::Config("ADJ lag count must be at least 1".into()));
        }
        if let Weights::Custom(w) = &self.weights {
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Config(
                    "aggregate weights must be finite and nonnegative".into(),
                ));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Empirical processes

fn need_len(u: &[f64], min: usize, what: &str) -> Result<()> {
    if u.len() < min {
        return Err(Error::Shape(format!(
            "{what} needs at least {min} residuals, got {}",
            u.len()
        )));
    }
    Ok(())
}

/// Points and scale of a process, with `b` empty in the marginal case.
struct Points {
    a: Vec<f64>,
    b: Vec<f64>,
    scale: f64,
}

fn points(u: &[f64], process: Process) -> Result<Points> {
    let t = u.len();
    match process {
        Process::Marginal => {
            need_len(u, 3, "marginal process")?;
            Ok(Points {
                a: u[..t - 1].to_vec(),
                b: Vec::new(),
                scale: 1.0 / ((t - 2) as f64).sqrt(),
            })
        }
        Process::Joint2 => {
            need_len(u, 4, "joint process")?;
            Ok(Points {
                a: u[1..t - 1].to_vec(),
                b: u[..t - 2].to_vec(),
                scale: 1.0 / ((t - 3) as f64).sqrt(),
            })
        }
        Process::Pair(j) => {
            if j == 0 {
                return Err(Error::Domain("pairwise lag must be at least 1".into()));
            }
            need_len(u, j + 1, "pairwise process")?;
            Ok(Points {
                a: u[j..].to_vec(),
                b: u[..t - j].to_vec(),
                scale: 1.0 / ((t - j) as f64).sqrt(),
            })
        }
    }
}

/// `V_1T(r) = (1/√(T−2)) Σ_{t=2}^{T} [I(u_{t−1} ≤ r) − r]`.
pub fn v_process_1(u: &[f64], r: f64) -> Result<f64> {
    let p = points(u, Process::Marginal)?;
    let s: f64 = p.a.iter().map(|&a| if a <= r { 1.0 - r } else { -r }).sum();
    Ok(p.scale * s)
}

/// `V_2T(r1, r2) = (1/√(T−3)) Σ_{t=3}^{T} [I(u_{t−1} ≤ r1) I(u_{t−2} ≤ r2) − r1 r2]`.
pub fn v_process_p2(u: &[f64], r1: f64, r2: f64) -> Result<f64> {
    bivariate_value(&points(u, Process::Joint2)?, r1, r2)
}

/// `V_{2T,j}(r1, r2) = (1/√(T−j)) Σ_{t=j+1}^{T} [I(u_t ≤ r1) I(u_{t−j} ≤ r2) − r1 r2]`.
pub fn v_process_2j(u: &[f64], j: usize, r1: f64, r2: f64) -> Result<f64> {
    bivariate_value(&points(u, Process::Pair(j))?, r1, r2)
}

fn bivariate_value(p: &Points, r1: f64, r2: f64) -> Result<f64> {
    let rr = r1 * r2;
    let s: f64 =
        p.a.iter()
            .zip(&p.b)
            .map(|(&a, &b)| if a <= r1 && b <= r2 { 1.0 - rr } else { -rr })
            .sum();
    Ok(p.scale * s)
}

// ---------------------------------------------------------------------------
// Cramér-von Mises

/// `Σ_i Σ_k (1 − max(a_i, a_k))` in `O(n log n)`.
fn sum_one_minus_max(a: &[f64]) -> f64 {
    let mut s = a.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    // the m-th smallest (0-based) is the max of 2m + 1 ordered pairs
    let weighted: f64 = s
        .iter()
        .enumerate()
        .map(|(m, &v)| (2 * m + 1) as f64 * v)
        .sum();
    n * n - weighted
}

fn cvm_marginal(p: &Points) -> f64 {
    let n = p.a.len() as f64;
    let cross: f64 = p.a.iter().map(|&a| 1.0 - a * a).sum();
    let v = sum_one_minus_max(&p.a) - n * cross + n * n / 3.0;
    (p.scale * p.scale * v).max(0.0)
}

fn cvm_bivariate(p: &Points) -> f64 {
    let n = p.a.len();
    let mut double = 0.0;
    for i in 0..n {
        let (ai, bi) = (p.a[i], p.b[i]);
        let mut row = 0.0;
        for k in 0..n {
            row += (1.0 - ai.max(p.a[k])) * (1.0 - bi.max(p.b[k]));
        }
        double += row;
    }
    let cross: f64 =
        p.a.iter()
            .zip(&p.b)
            .map(|(&a, &b)| (1.0 - a * a) * (1.0 - b * b))
            .sum();
    let nf = n as f64;
    let v = double - 0.5 * nf * cross + nf * nf / 9.0;
    (p.scale * p.scale * v).max(0.0)
}

/// `∫ V(r)² dr` over `[0, 1]^p`, exact.
pub fn cvm_stat(u: &[f64], process: Process) -> Result<f64> {
    let p = points(u, process)?;
    Ok(match process {
        Process::Marginal => cvm_marginal(&p),
        _ => cvm_bivariate(&p),
    })
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

fn ks_marginal(p: &Points) -> f64 {
    let mut s = p.a.clone();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let nf = n as f64;
    let mut best = 0.0f64;
    let mut i = 0;
    while i < n {
        let v = s[i];
        let below = i;
        while i < n && s[i] == v {
            i += 1;
        }
        // left limit and value at the jump
        best = best.max((below as f64 - nf * v).abs());
        best = best.max((i as f64 - nf * v).abs());
    }
    p.scale * best
}

/// Sorted distinct values and the rank of each point in them (1-based, so
/// that grid index 0 stands for `r = 0`).
fn ranks(v: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut grid = v.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let rank = v
        .iter()
        .map(|x| grid.partition_point(|g| g < x) + 1)
        .collect();
    (grid, rank)
}

fn ks_bivariate(p: &Points) -> f64 {
    let n = p.a.len();
    let nf = n as f64;
    let (ga, ra) = ranks(&p.a);
    let (gb, rb) = ranks(&p.b);
    let (ka, kb) = (ga.len(), gb.len());
    // grid coordinates, index 0 is r = 0, one past the end is r = 1
    let xa = |k: usize| {
        if k == 0 {
            0.0
        } else if k <= ka {
            ga[k - 1]
        } else {
            1.0
        }
    };
    let xb = |l: usize| {
        if l == 0 {
            0.0
        } else if l <= kb {
            gb[l - 1]
        } else {
            1.0
        }
    };

    let mut by_a: Vec<Vec<usize>> = vec![Vec::new(); ka + 1];
    for i in 0..n {
        by_a[ra[i]].push(rb[i]);
    }
    // col[l] = #{i : rank_a ≤ k, rank_b = l}, accumulated over k
    let mut col = vec![0usize; kb + 1];
    let mut best = 0.0f64;
    for (k, bucket) in by_a.iter().enumerate() {
        for &l in bucket {
            col[l] += 1;
        }
        let (r1, r1_next) = (xa(k), xa(k + 1));
        let mut count = 0usize;
        for (l, &n_l) in col.iter().enumerate() {
            count += n_l;
            let c = count as f64;
            // N is constant on the cell [r1, r1_next) × [r2, r2_next); N − n r1 r2
            // peaks at the lower-left corner and bottoms out at the upper-right limit
            let hi = c - nf * r1 * xb(l);
            let lo = c - nf * r1_next * xb(l + 1);
            best = best.max(hi.abs()).max(lo.abs());
        }
    }
    p.scale * best
}

/// `sup |V(r)|` over `[0, 1]^p`, exact.
pub fn ks_stat(u: &[f64], process: Process) -> Result<f64> {
    let p = points(u, process)?;
    Ok(match process {
        Process::Marginal => ks_marginal(&p),
        _ => ks_bivariate(&p),
    })
}

// ---------------------------------------------------------------------------
// Aggregates, residual-based statistics

/// `Σ_{j=1}^{m} k(j) D_j`.
pub fn aggregate(values: &[f64], weights: &Weights, m: usize) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Shape("nothing to aggregate".into()));
    }
    if m == 0 || m > values.len() {
        return Err(Error::Shape(format!(
            "truncation {m} with {} available statistics",
            values.len()
        )));
    }
    Ok((1..=m).map(|j| weights.weight(j, m) * values[j - 1]).sum())
}

/// Gaussian residuals `Φ⁻¹(u_t)`.
pub fn residuals_gaussian(u: &[f64]) -> Result<Vec<f64>> {
    u.iter()
        .map(|&v| {
            if v > 0.0 && v < 1.0 {
                Ok(normal_quantile(v))
            } else {
                Err(Error::Domain(format!("residual {v} outside (0, 1)")))
            }
        })
        .collect()
}

/// Standardized residuals `(Y_t − E[Y_t|Ω̃_t]) / √Var(Y_t|Ω̃_t)` at the
/// likelihood dates.
pub fn residuals_discrete(spec: &ModelSpec, theta: &Theta, series: &Series) -> Result<Vec<f64>> {
    let (laws, _) = conditional_laws(spec, theta, series)?;
    let first = spec.max_lag();
    laws.iter()
        .enumerate()
        .map(|(i, law)| {
            let var = law.variance();
            if var.is_nan() || var <= 0.0 {
                return Err(Error::CellFloor {
                    category: 0,
                    prob: law.min_prob(),
                    floor: 0.0,
                });
            }
            Ok((series.y[first + i] as f64 - law.mean()) / var.sqrt())
        })
        .collect()
}

fn centered(x: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let ss: f64 = c.iter().map(|v| v * v).sum();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if ss.is_nan() || ss <= 0.0 || ss.sqrt() <= 1e-13 * scale * n.sqrt() {
        return Err(Error::DegenerateSeries(
            "series has zero sample variance".into(),
        ));
    }
    Ok((c, ss))
}

/// `T Σ_{j=1}^{m} ρ̂(j)²` with mean-centred sample autocorrelations.
pub fn box_pierce(resid: &[f64], m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("Box-Pierce needs m ≥ 1".into()));
    }
    if resid.len() < m + 2 {
        return Err(Error::Shape(format!(
            "Box-Pierce with m = {m} needs more than {} residuals, got {}",
            m + 1,
            resid.len()
        )));
    }
    let (c, ss) = centered(resid)?;
    let q: f64 = (1..=m)
        .map(|j| {
            let rho = c[j..].iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() / ss;
            rho * rho
        })
        .sum();
    Ok(resid.len() as f64 * q)
}

/// `(T/6)(S² + (K − 3)²/4)` with moment skewness and kurtosis.
pub fn jarque_bera(x: &[f64]) -> Result<f64> {
    need_len(x, 8, "Jarque-Bera")?;
    let (c, ss) = centered(x)?;
    let n = x.len() as f64;
    let m2 = ss / n;
    let m3 = c.iter().map(|v| v * v * v).sum::<f64>() / n;
    let m4 = c.iter().map(|v| v * v * v * v).sum::<f64>() / n;
    let s = m3 / m2.powf(1.5);
    let k = m4 / (m2 * m2);
    Ok(n / 6.0 * (s * s + 0.25 * (k - 3.0) * (k - 3.0)))
}

/// Covariance of the limiting pairwise process at `r` and `s`.
pub fn v2_limit_cov(r: (f64, f64), s: (f64, f64)) -> Result<f64> {
    if [r.0, r.1, s.0, s.1]
        .iter()
        .any(|v| !(0.0..=1.0).contains(v))
    {
        return Err(Error::Domain("coordinates must lie in [0, 1]".into()));
    }
    let (r1, r2) = r;
    let (s1, s2) = s;
    Ok(
        r1.min(s1) * r2.min(s2) + r1.min(s2) * r2 * s1 + r2.min(s1) * r1 * s2
            - 3.0 * r1 * r2 * s1 * s2,
    )
}

// ---------------------------------------------------------------------------
// Batch evaluation

/// Residual inputs for a batch of statistics. `discrete` is needed only by
/// `BPD_m`.
#[derive(Debug, Clone, Copy)]
pub struct StatInputs<'a> {
    pub u: &'a [f64],
    pub discrete: Option<&'a [f64]>,
}

/// Computes every statistic in `kinds`, in order.
pub fn compute_stats(
    kinds: &[StatKind],
    inputs: StatInputs<'_>,
    settings: &StatSettings,
) -> Result<Vec<StatValue>> {
    settings.validate()?;
    let u = inputs.u;
    let mut gaussian: Option<Vec<f64>> = None;
    let mut out = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let value = match kind {
            StatKind::CvM(p) => cvm_stat(u, p)?,
            StatKind::Ks(p) => ks_stat(u, p)?,
            StatKind::Adp { ks } => {
                let f = if ks { ks_stat } else { cvm_stat };
                let mut d = vec![f(u, Process::Marginal)?];
                if settings.adp_m == 2 {
                    d.push(f(u, Process::Joint2)?);
                }
                aggregate(&d, &settings.weights, settings.adp_m)?
            }
            StatKind::Adj { ks } => {
                let f = if ks { ks_stat } else { cvm_stat };
                let d = (1..=settings.adj_m)
                    .map(|j| f(u, Process::Pair(j)))
                    .collect::<Result<Vec<_>>>()?;
                aggregate(&d, &settings.weights, settings.adj_m)?
            }
            StatKind::Bpu(m) => box_pierce(u, m)?,
            StatKind::Bpn(m) => {
                if gaussian.is_none() {
                    gaussian = Some(residuals_gaussian(u)?);
                }
                box_pierce(gaussian.as_deref().unwrap(), m)?
            }
            StatKind::Jb => {
                if gaussian.is_none() {
                    gaussian = Some(residuals_gaussian(u)?);
                }
                jarque_bera(gaussian.as_deref().unwrap())?
            }
            StatKind::Bpd(m) => {
                let e = inputs
                    .discrete
                    .ok_or_else(|| Error::Config(format!("{kind} needs discrete residuals")))?;
                box_pierce(e, m)?
            }
        };
        out.push(StatValue { kind, value });
    }
    Ok(out)
}
