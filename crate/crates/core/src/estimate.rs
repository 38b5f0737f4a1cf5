//! Conditional maximum likelihood.
//!
//! The likelihood conditions on the first `q` outcomes (the truncated
//! information set), so it sums `log P(Y_t = y_t | Ω̃_t, θ)` over
//! `t = q, …, T − 1`. Index lags before the sample are set to the
//! unconditional mean of the index, exactly as in simulation.
//!
//! Ordered thresholds are optimized in gap coordinates
//! `μ_j = μ_0 + Σ_{k ≤ j} exp(c_k)` so the iterates always stay ordered.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{cell_prob, index_path, LinkKind, ModelSpec, Series, Theta, WARN_FLOOR};
use crate::numeric::normal_quantile;

/// Newton–Raphson settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Max-norm of the score at which the iteration stops.
    pub tol_grad: f64,
    pub max_iter: usize,
    /// Iterates with a larger max-norm count as diverged.
    pub theta_cap: f64,
    /// Smallest admissible gap between consecutive thresholds.
    pub tol_mu: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol_grad: 1e-8,
            max_iter: 100,
            theta_cap: 1e3,
            tol_mu: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: Theta,
    pub loglik: f64,
    /// Max-norm of the score at `theta_hat` (natural coordinates).
    pub score_norm: f64,
    /// Average outer product of the per-observation scores.
    pub info_matrix: Vec<Vec<f64>>,
    /// Square roots of the diagonal of the inverse observed information.
    pub std_errors: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Number of likelihood terms.
    pub n_obs: usize,
    /// Fitted cells below the warning floor, summed over observations.
    pub small_cells: usize,
}

/// Per-observation log probability and its derivatives with respect to the
/// index and the two bracketing thresholds.
struct ObsTerm {
    logp: f64,
    /// d log P / d(π, τ_lo, τ_hi)
    grad: [f64; 3],
    hess: [[f64; 3]; 3],
    lo: Option<usize>,
    hi: Option<usize>,
}

fn obs_term(
    link: LinkKind,
    thresholds: &[f64],
    y: usize,
    pi: f64,
    want_hess: bool,
) -> Option<ObsTerm> {
    let j_max = thresholds.len();
    let p = cell_prob(link, thresholds, y, pi);
    if p.is_nan() || p <= 0.0 || !p.is_finite() {
        return None;
    }
    let lo = (y > 0).then(|| y - 1);
    let hi = (y < j_max).then_some(y);
    let (fa, fa1) = lo
        .map(|i| {
            let a = thresholds[i] - pi;
            (link.pdf(a), link.pdf_deriv(a))
        })
        .unwrap_or((0.0, 0.0));
    let (fb, fb1) = hi
        .map(|i| {
            let b = thresholds[i] - pi;
            (link.pdf(b), link.pdf_deriv(b))
        })
        .unwrap_or((0.0, 0.0));
    // derivatives of P itself
    let dp = [fa - fb, -fa, fb];
    let grad = [dp[0] / p, dp[1] / p, dp[2] / p];
    let mut hess = [[0.0; 3]; 3];
    if want_hess {
        let d2p = [[fb1 - fa1, fa1, -fb1], [fa1, -fa1, 0.0], [-fb1, 0.0, fb1]];
        for i in 0..3 {
            for k in 0..3 {
                hess[i][k] = d2p[i][k] / p - grad[i] * grad[k];
            }
        }
    }
    Some(ObsTerm {
        logp: p.ln(),
        grad,
        hess,
        lo,
        hi,
    })
}

/// Index path together with its gradient with respect to the natural
/// parameters (row `t` holds `dπ_t/dθ`).
fn index_jet(spec: &ModelSpec, theta: &Theta, series: &Series) -> (Vec<f64>, Vec<Vec<f64>>) {
    let pi = index_path(spec, theta, series);
    let layout = spec.layout();
    let n = series.len();
    let sum_alpha: f64 = theta.alpha.iter().sum();
    let mut pre_grad = vec![0.0; layout.len];
    if !spec.ordered {
        pre_grad[layout.pi0.start] = 1.0 / (1.0 - sum_alpha);
    }
    for i in layout.alpha.clone() {
        pre_grad[i] = theta.pi0 / (1.0 - sum_alpha).powi(2);
    }
    let pre = theta.presample_index();

    let mut grads: Vec<Vec<f64>> = Vec::with_capacity(n);
    for t in 0..n {
        let mut g = vec![0.0; layout.len];
        if !spec.ordered {
            g[layout.pi0.start] = 1.0;
        }
        for (i, idx) in layout.delta.clone().enumerate() {
            g[idx] = if t > i {
                series.y[t - 1 - i] as f64
            } else {
                0.0
            };
        }
        for (i, idx) in layout.alpha.clone().enumerate() {
            g[idx] = if t > i { pi[t - 1 - i] } else { pre };
        }
        let x = series.x_row(t);
        for (i, idx) in layout.beta.clone().enumerate() {
            g[idx] = x[i];
        }
        if spec.interactions {
            let y1 = if t > 0 { series.y[t - 1] as f64 } else { 0.0 };
            for (i, idx) in layout.gamma.clone().enumerate() {
                g[idx] = y1 * x[i];
            }
        }
        for (i, a) in theta.alpha.iter().enumerate() {
            let lag: &[f64] = if t > i { &grads[t - 1 - i] } else { &pre_grad };
            for (gk, lk) in g.iter_mut().zip(lag) {
                *gk += a * lk;
            }
        }
        grads.push(g);
    }
    (pi, grads)
}

/// Pieces of the likelihood evaluated at one parameter value.
struct Evaluation {
    loglik: f64,
    /// Per-observation natural-coordinate scores.
    contributions: Vec<Vec<f64>>,
    /// Analytic Hessian (only when the index is linear in θ).
    hessian: Option<DMatrix<f64>>,
    small_cells: usize,
}

fn evaluate(
    spec: &ModelSpec,
    theta: &Theta,
    series: &Series,
    want_scores: bool,
    want_hess: bool,
) -> Result<Evaluation> {
    let layout = spec.layout();
    let linear = spec.p_ar == 0;
    let (pi, jet) = if want_scores {
        index_jet(spec, theta, series)
    } else {
        (index_path(spec, theta, series), Vec::new())
    };
    let thresholds = theta.thresholds(spec);
    let mut loglik = 0.0;
    let mut contributions = Vec::new();
    let mut hessian = (want_hess && linear).then(|| DMatrix::<f64>::zeros(layout.len, layout.len));
    let mut small_cells = 0;
    for t in spec.max_lag()..series.len() {
        let y = series.y[t] as usize;
        let term =
            obs_term(spec.link, thresholds, y, pi[t], hessian.is_some()).ok_or_else(|| {
                Error::CellFloor {
                    category: y,
                    prob: cell_prob(spec.link, thresholds, y, pi[t]),
                    floor: 0.0,
                }
            })?;
        loglik += term.logp;
        if !want_scores {
            continue;
        }
        small_cells += (0..=thresholds.len())
            .filter(|&j| cell_prob(spec.link, thresholds, j, pi[t]) < WARN_FLOOR)
            .count();
        // map (π, τ_lo, τ_hi) onto natural coordinates
        let slots: [Option<usize>; 3] = if spec.ordered {
            [
                None,
                term.lo.map(|i| layout.mu.start + i),
                term.hi.map(|i| layout.mu.start + i),
            ]
        } else {
            [None, None, None]
        };
        let dpi = &jet[t];
        let mut c = vec![0.0; layout.len];
        for (ck, dk) in c.iter_mut().zip(dpi) {
            *ck += term.grad[0] * dk;
        }
        for (slot, g) in slots[1..3].iter().zip(&term.grad[1..3]) {
            if let Some(s) = *slot {
                c[s] += g;
            }
        }
        if let Some(h) = hessian.as_mut() {
            // column of the Jacobian d(π, τ_lo, τ_hi)/dθ for coordinate k
            let jac = |v: usize, k: usize| -> f64 {
                if v == 0 {
                    dpi[k]
                } else if slots[v] == Some(k) {
                    1.0
                } else {
                    0.0
                }
            };
            let active: Vec<usize> = (0..layout.len)
                .filter(|&k| dpi[k] != 0.0 || slots[1] == Some(k) || slots[2] == Some(k))
                .collect();
            for &a in &active {
                for &b in &active {
                    let mut acc = 0.0;
                    for u in 0..3 {
                        let ja = jac(u, a);
                        if ja == 0.0 {
                            continue;
                        }
                        for w in 0..3 {
                            acc += ja * term.hess[u][w] * jac(w, b);
                        }
                    }
                    h[(a, b)] += acc;
                }
            }
        }
        contributions.push(c);
    }
    Ok(Evaluation {
        loglik,
        contributions,
        hessian,
        small_cells,
    })
}

/// Conditional log likelihood. A zero observed cell is reported as
/// [`Error::CellFloor`].
pub fn loglik(spec: &ModelSpec, theta: &Theta, series: &Series) -> Result<f64> {
    theta.validate(spec)?;
    series.validate(spec)?;
    Ok(evaluate(spec, theta, series, false, false)?.loglik)
}

/// Per-observation scores `ℓ_t`, one row per likelihood term.
pub fn score_contributions(
    spec: &ModelSpec,
    theta: &Theta,
    series: &Series,
) -> Result<Vec<Vec<f64>>> {
    theta.validate(spec)?;
    series.validate(spec)?;
    Ok(evaluate(spec, theta, series, true, false)?.contributions)
}

/// Analytic gradient of [`loglik`] in natural coordinates.
pub fn score(spec: &ModelSpec, theta: &Theta, series: &Series) -> Result<Vec<f64>> {
    let rows = score_contributions(spec, theta, series)?;
    Ok(sum_rows(&rows, spec.n_params()))
}

fn sum_rows(rows: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut total = vec![0.0; dim];
    for r in rows {
        for (t, v) in total.iter_mut().zip(r) {
            *t += v;
        }
    }
    total
}

/// Observed Hessian of the log likelihood in natural coordinates; central
/// differences of the analytic score when the index has lagged-index terms.
pub fn hessian(spec: &ModelSpec, theta: &Theta, series: &Series) -> Result<DMatrix<f64>> {
    theta.validate(spec)?;
    series.validate(spec)?;
    natural_hessian(spec, theta, series)
}

fn natural_hessian(spec: &ModelSpec, theta: &Theta, series: &Series) -> Result<DMatrix<f64>> {
    if spec.p_ar == 0 {
        return Ok(evaluate(spec, theta, series, true, true)?
            .hessian
            .expect("linear index"));
    }
    let base = theta.flatten(spec);
    let n = base.len();
    let mut h = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let step = 1e-5 * base[k].abs().max(1.0);
        let mut up = base.clone();
        let mut down = base.clone();
        up[k] += step;
        down[k] -= step;
        let gu = sum_rows(
            &evaluate(spec, &Theta::unflatten(spec, &up)?, series, true, false)?.contributions,
            n,
        );
        let gd = sum_rows(
            &evaluate(spec, &Theta::unflatten(spec, &down)?, series, true, false)?.contributions,
            n,
        );
        for i in 0..n {
            h[(i, k)] = (gu[i] - gd[i]) / (2.0 * step);
        }
    }
    Ok((&h + h.transpose()) * 0.5)
}

/// Unconstrained optimizer coordinates.
struct Reparam<'a> {
    spec: &'a ModelSpec,
}

impl Reparam<'_> {
    fn to_internal(&self, theta: &Theta) -> Vec<f64> {
        let mut v = theta.flatten(self.spec);
        let mu = self.spec.layout().mu;
        for j in (1..theta.mu.len()).rev() {
            v[mu.start + j] = (theta.mu[j] - theta.mu[j - 1]).ln();
        }
        v
    }

    fn to_theta(&self, eta: &[f64]) -> Result<Theta> {
        let mut v = eta.to_vec();
        let mu = self.spec.layout().mu;
        for j in 1..mu.len() {
            v[mu.start + j] = v[mu.start + j - 1] + eta[mu.start + j].exp();
        }
        Theta::unflatten(self.spec, &v)
    }

    /// Gradient and Hessian in internal coordinates from natural ones.
    fn transform(&self, eta: &[f64], g: &[f64], h: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = g.len();
        let mu = self.spec.layout().mu;
        let mut jac = DMatrix::<f64>::identity(n, n);
        for j in 1..mu.len() {
            for k in 0..=j {
                jac[(mu.start + j, mu.start + k)] =
                    if k == 0 { 1.0 } else { eta[mu.start + k].exp() };
            }
        }
        let gn = DVector::from_column_slice(g);
        let gi = jac.transpose() * &gn;
        let mut hi = jac.transpose() * h * &jac;
        for k in 1..mu.len() {
            let tail: f64 = (k..mu.len()).map(|j| g[mu.start + j]).sum();
            hi[(mu.start + k, mu.start + k)] += eta[mu.start + k].exp() * tail;
        }
        (gi, hi)
    }
}

/// Starting values: zeros, thresholds at standard-normal quantiles of the
/// empirical cumulative category frequencies.
pub fn default_init(spec: &ModelSpec, series: &Series) -> Theta {
    let mut theta = Theta::zeros(spec);
    if spec.ordered {
        let sample = &series.y[spec.max_lag()..];
        let n = sample.len() as f64;
        let mut acc = 0.0;
        let mut prev = f64::NEG_INFINITY;
        for j in 0..spec.support_size {
            acc += sample.iter().filter(|&&y| y as usize == j).count() as f64;
            let p = ((acc + 0.5) / (n + 1.0)).clamp(1e-6, 1.0 - 1e-6);
            let mut m = normal_quantile(p);
            if m <= prev + 1e-3 {
                m = prev + 1e-3;
            }
            theta.mu[j] = m;
            prev = m;
        }
    }
    theta
}

/// Fits the model by Newton–Raphson with step halving.
pub fn fit_mle(
    spec: &ModelSpec,
    series: &Series,
    init: Option<&Theta>,
    opts: &FitOptions,
) -> Result<FitResult> {
    spec.validate()?;
    series.validate(spec)?;
    let n_obs = series.len() - spec.max_lag();
    if n_obs <= spec.n_params() {
        return Err(Error::Shape(format!(
            "{n_obs} likelihood terms cannot identify {} parameters",
            spec.n_params()
        )));
    }
    let start = init.cloned().unwrap_or_else(|| default_init(spec, series));
    start.validate(spec)?;

    let sample = &series.y[spec.max_lag()..];
    for j in 0..=spec.support_size {
        if !sample.iter().any(|&y| y as usize == j) {
            return Err(Error::NonConvergence {
                iterations: 0,
                reason: format!("category {j} is never observed (separation)"),
                last: Box::new(start),
            });
        }
    }

    let rp = Reparam { spec };
    let mut eta = rp.to_internal(&start);
    let objective = |eta: &[f64]| -> f64 {
        match rp.to_theta(eta) {
            Ok(th) if th.validate(spec).is_ok() => evaluate(spec, &th, series, false, false)
                .map(|e| e.loglik)
                .unwrap_or(f64::NEG_INFINITY),
            _ => f64::NEG_INFINITY,
        }
    };
    let mut current = objective(&eta);
    if !current.is_finite() {
        return Err(Error::NonConvergence {
            iterations: 0,
            reason: "log likelihood is not finite at the starting value".into(),
            last: Box::new(start),
        });
    }

    let mut iterations = 0;
    let mut converged = false;
    loop {
        let theta = rp.to_theta(&eta)?;
        let ev = evaluate(spec, &theta, series, true, false)?;
        let g_nat = sum_rows(&ev.contributions, spec.n_params());
        let h_nat = natural_hessian(spec, &theta, series)?;
        let (g, h) = rp.transform(&eta, &g_nat, &h_nat);
        let gmax = g
            .amax()
            .max(g_nat.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        if gmax <= opts.tol_grad {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        let dir = newton_direction(&g, &h);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let trial: Vec<f64> = eta
                .iter()
                .zip(dir.iter())
                .map(|(e, d)| e + step * d)
                .collect();
            let value = objective(&trial);
            // equal up to summation rounding counts as no decrease
            if value.is_finite() && value >= current - 1e-12 * current.abs().max(1.0) {
                accepted = Some((trial, value));
                break;
            }
            step *= 0.5;
        }
        let Some((next, value)) = accepted else {
            break;
        };
        eta = next;
        current = value;

        let theta = rp.to_theta(&eta)?;
        let cap = theta
            .flatten(spec)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if cap > opts.theta_cap {
            return Err(Error::NonConvergence {
                iterations,
                reason: format!("parameters diverged (max |θ| = {cap:.3e})"),
                last: Box::new(theta),
            });
        }
        if let Some(j) = (1..theta.mu.len()).find(|&j| theta.mu[j] - theta.mu[j - 1] < opts.tol_mu)
        {
            return Err(Error::ThresholdCollapse {
                lower: j - 1,
                upper: j,
                gap: theta.mu[j] - theta.mu[j - 1],
            });
        }
    }

    let theta_hat = rp.to_theta(&eta)?;
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            reason: "score did not reach tolerance".into(),
            last: Box::new(theta_hat),
        });
    }
    let ev = evaluate(spec, &theta_hat, series, true, false)?;
    if ev.loglik > -1e-6 * n_obs as f64 {
        return Err(Error::NonConvergence {
            iterations,
            reason: "fitted probabilities are degenerate (separation)".into(),
            last: Box::new(theta_hat),
        });
    }
    let dim = spec.n_params();
    let g_nat = sum_rows(&ev.contributions, dim);
    let mut info = vec![vec![0.0; dim]; dim];
    for c in &ev.contributions {
        for i in 0..dim {
            for k in 0..dim {
                info[i][k] += c[i] * c[k];
            }
        }
    }
    for row in info.iter_mut() {
        for v in row.iter_mut() {
            *v /= ev.contributions.len() as f64;
        }
    }
    let h_nat = natural_hessian(spec, &theta_hat, series)?;
    let std_errors = (-h_nat)
        .try_inverse()
        .map(|inv| (0..dim).map(|i| inv[(i, i)].max(0.0).sqrt()).collect())
        .unwrap_or_else(|| vec![f64::NAN; dim]);
    Ok(FitResult {
        theta_hat,
        loglik: ev.loglik,
        score_norm: g_nat.iter().fold(0.0, |m, v| m.max(v.abs())),
        info_matrix: info,
        std_errors,
        iterations,
        converged,
        n_obs,
        small_cells: ev.small_cells,
    })
}

/// Newton step for maximization, damped until `−H + λI` is positive definite.
fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> DVector<f64> {
    let neg = -h;
    let n = g.len();
    let scale = neg.diagonal().amax().max(1e-8);
    let mut lambda = 0.0;
    for _ in 0..60 {
        let m = &neg + DMatrix::<f64>::identity(n, n) * lambda;
        if let Some(ch) = m.cholesky() {
            return ch.solve(g);
        }
        lambda = if lambda == 0.0 {
            1e-8 * scale
        } else {
            lambda * 10.0
        };
    }
    g / scale
}
