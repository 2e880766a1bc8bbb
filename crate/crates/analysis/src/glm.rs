//! Binomial GLM with logit link, fitted by iteratively reweighted least
//! squares, plus the polynomial breach-response curve built on it.

use dilemma_core::ExecMode;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::StatsError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlmOptions {
    pub max_iterations: usize,
    /// Converged when the largest absolute coefficient change is below this.
    pub tolerance: f64,
    /// Linear predictors beyond this magnitude are taken as separation.
    pub separation_eta: f64,
    pub exec: ExecMode,
}

impl Default for GlmOptions {
    fn default() -> Self {
        GlmOptions {
            max_iterations: 100,
            tolerance: 1e-10,
            separation_eta: 30.0,
            exec: ExecMode::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlmTerm {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlmFit {
    pub family: String,
    pub terms: Vec<GlmTerm>,
    pub null_deviance: f64,
    pub residual_deviance: f64,
    pub aic: f64,
    pub iterations: usize,
    /// Residual deviance after every accepted IRLS step.
    pub deviance_trace: Vec<f64>,
    pub observations: usize,
}

impl GlmFit {
    pub fn term(&self, name: &str) -> Option<&GlmTerm> {
        self.terms.iter().find(|t| t.name == name)
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.estimate).collect()
    }
}

fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// y·log(y/μ) with the 0·log 0 = 0 convention.
fn ylogy(y: f64, mu: f64) -> f64 {
    if y > 0.0 {
        y * (y / mu).ln()
    } else {
        0.0
    }
}

fn deviance(successes: &[f64], trials: &[f64], mu: &[f64]) -> f64 {
    2.0 * successes
        .iter()
        .zip(trials)
        .zip(mu)
        .map(|((&y, &m), &p)| ylogy(y, m * p) + ylogy(m - y, m * (1.0 - p)))
        .sum::<f64>()
}

fn log_likelihood(successes: &[f64], trials: &[f64], mu: &[f64]) -> f64 {
    successes
        .iter()
        .zip(trials)
        .zip(mu)
        .map(|((&y, &m), &p)| {
            let log_choose = ln_gamma(m + 1.0) - ln_gamma(y + 1.0) - ln_gamma(m - y + 1.0);
            let a = if y > 0.0 { y * p.ln() } else { 0.0 };
            let b = if m - y > 0.0 { (m - y) * (1.0 - p).ln() } else { 0.0 };
            log_choose + a + b
        })
        .sum()
}

/// Accumulates X'WX and X'Wz over rows. In parallel mode rows are split into
/// fixed chunks whose partial sums are added in chunk order, so the result
/// does not depend on thread scheduling.
fn weighted_gram(
    x: &DMatrix<f64>,
    w: &[f64],
    z: &[f64],
    exec: ExecMode,
) -> (DMatrix<f64>, DVector<f64>) {
    let p = x.ncols();
    let partial = |rows: std::ops::Range<usize>| {
        let mut xtwx = DMatrix::<f64>::zeros(p, p);
        let mut xtwz = DVector::<f64>::zeros(p);
        for i in rows {
            let wi = w[i];
            if wi == 0.0 {
                continue;
            }
            for a in 0..p {
                let xa = x[(i, a)] * wi;
                xtwz[a] += xa * z[i];
                for b in a..p {
                    xtwx[(a, b)] += xa * x[(i, b)];
                }
            }
        }
        (xtwx, xtwz)
    };
    const CHUNK: usize = 8192;
    let n = x.nrows();
    let ranges: Vec<_> = (0..n).step_by(CHUNK).map(|s| s..(s + CHUNK).min(n)).collect();
    let parts: Vec<_> = match exec {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            ranges.into_par_iter().map(partial).collect()
        }
        _ => ranges.into_iter().map(partial).collect(),
    };

    let mut xtwx = DMatrix::<f64>::zeros(p, p);
    let mut xtwz = DVector::<f64>::zeros(p);
    for (a, b) in parts {
        xtwx += a;
        xtwz += b;
    }
    for a in 0..p {
        for b in 0..a {
            xtwx[(a, b)] = xtwx[(b, a)];
        }
    }
    (xtwx, xtwz)
}

fn check_rank(x: &DMatrix<f64>, exec: ExecMode) -> Result<(), StatsError> {
    let n = x.nrows();
    let (gram, _) = weighted_gram(x, &vec![1.0; n], &vec![0.0; n], exec);
    // Scale to a correlation-like matrix so the test is unit-free.
    let scale: Vec<f64> = (0..gram.nrows()).map(|i| gram[(i, i)].sqrt()).collect();
    if scale.iter().any(|&s| s == 0.0) {
        return Err(StatsError::RankDeficientDesign);
    }
    let scaled = DMatrix::from_fn(gram.nrows(), gram.ncols(), |a, b| {
        gram[(a, b)] / (scale[a] * scale[b])
    });
    let eig = scaled.symmetric_eigenvalues();
    let max = eig.max();
    let min = eig.min();
    if min <= max * 1e-12 {
        return Err(StatsError::RankDeficientDesign);
    }
    Ok(())
}

/// [`fit_binomial_glm_with`] with default options.
pub fn fit_binomial_glm(
    x: &DMatrix<f64>,
    names: &[String],
    successes: &[f64],
    trials: &[f64],
) -> Result<GlmFit, StatsError> {
    fit_binomial_glm_with(x, names, successes, trials, GlmOptions::default())
}

/// Fits a logit-link binomial GLM. `x` must contain any intercept column
/// explicitly; `names` labels its columns.
pub fn fit_binomial_glm_with(
    x: &DMatrix<f64>,
    names: &[String],
    successes: &[f64],
    trials: &[f64],
    options: GlmOptions,
) -> Result<GlmFit, StatsError> {
    let (n, p) = x.shape();
    if names.len() != p {
        return Err(StatsError::Schema(format!(
            "{} names for {p} design columns",
            names.len()
        )));
    }
    if successes.len() != n || trials.len() != n {
        return Err(StatsError::Schema("response length differs from design rows".into()));
    }
    if n == 0 || n < p {
        return Err(StatsError::InsufficientData("fewer observations than coefficients".into()));
    }
    if successes
        .iter()
        .zip(trials)
        .any(|(&y, &m)| !(y >= 0.0 && y <= m && m > 0.0))
    {
        return Err(StatsError::InvalidInput("need 0 <= successes <= trials, trials > 0".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::InvalidInput("non-finite design entry".into()));
    }
    check_rank(x, options.exec)?;

    let eta_of = |beta: &DVector<f64>| -> Vec<f64> { (x * beta).iter().copied().collect() };
    // Start from the empirical logits, as R's glm does.
    let mut mu: Vec<f64> = successes
        .iter()
        .zip(trials)
        .map(|(&y, &m)| (y + 0.5) / (m + 1.0))
        .collect();
    let mut eta: Vec<f64> = mu.iter().map(|&p| (p / (1.0 - p)).ln()).collect();
    let mut beta = DVector::<f64>::zeros(p);
    let mut dev = f64::INFINITY;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=options.max_iterations {
        iterations = iter;
        let mut w = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n);
        for i in 0..n {
            let var = mu[i] * (1.0 - mu[i]);
            let wi = trials[i] * var;
            w.push(wi);
            z.push(if wi > 0.0 {
                eta[i] + (successes[i] - trials[i] * mu[i]) / wi
            } else {
                eta[i]
            });
        }
        let (xtwx, xtwz) = weighted_gram(x, &w, &z, options.exec);
        let chol = xtwx.cholesky().ok_or(StatsError::SeparationDetected)?;
        let proposal = chol.solve(&xtwz);

        // Step-halving keeps the deviance non-increasing.
        let mut step = proposal.clone() - &beta;
        let mut accepted = None;
        for _ in 0..40 {
            let candidate = &beta + &step;
            let cand_eta = eta_of(&candidate);
            let cand_mu: Vec<f64> = cand_eta.iter().map(|&e| logistic(e)).collect();
            let cand_dev = deviance(successes, trials, &cand_mu);
            if cand_dev.is_finite() && (cand_dev <= dev || !dev.is_finite()) {
                accepted = Some((candidate, cand_eta, cand_mu, cand_dev));
                break;
            }
            step /= 2.0;
        }
        let Some((candidate, cand_eta, cand_mu, cand_dev)) = accepted else {
            // No descent direction left: we are at the optimum.
            converged = true;
            break;
        };
        let change = (&candidate - &beta).amax();
        beta = candidate;
        eta = cand_eta;
        mu = cand_mu;
        dev = cand_dev;
        trace.push(dev);
        if change < options.tolerance {
            converged = true;
            break;
        }
    }

    let max_eta = eta.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    if !converged || max_eta > options.separation_eta {
        return Err(StatsError::SeparationDetected);
    }

    let w: Vec<f64> = mu
        .iter()
        .zip(trials)
        .map(|(&p, &m)| m * p * (1.0 - p))
        .collect();
    let (info, _) = weighted_gram(x, &w, &vec![0.0; n], options.exec);
    let cov = info
        .try_inverse()
        .ok_or(StatsError::SeparationDetected)?;
    let normal = Normal::standard();
    let terms = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let se = cov[(j, j)].max(0.0).sqrt();
            let z = beta[j] / se;
            GlmTerm {
                name: name.clone(),
                estimate: beta[j],
                std_error: se,
                z,
                p_value: (2.0 * normal.sf(z.abs())).min(1.0),
            }
        })
        .collect();

    let total_y: f64 = successes.iter().sum();
    let total_m: f64 = trials.iter().sum();
    let null_mu = vec![total_y / total_m; n];
    let null_deviance = deviance(successes, trials, &null_mu);

    Ok(GlmFit {
        family: "binomial(logit)".into(),
        terms,
        null_deviance,
        residual_deviance: dev,
        aic: -2.0 * log_likelihood(successes, trials, &mu) + 2.0 * p as f64,
        iterations,
        deviance_trace: trace,
        observations: n,
    })
}

/// η(x) = c₀ + c₁x + c₂x² + …, mapped through the inverse logit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialLogit {
    /// Coefficients in increasing power, starting with the intercept.
    pub coefficients: Vec<f64>,
}

impl PolynomialLogit {
    pub fn new(coefficients: Vec<f64>) -> Self {
        PolynomialLogit { coefficients }
    }

    /// Reads intercept and power terms from a fit, in the given order.
    pub fn from_fit(fit: &GlmFit, intercept: &str, powers: &[&str]) -> Result<Self, StatsError> {
        let mut coefficients = Vec::with_capacity(powers.len() + 1);
        for name in std::iter::once(intercept).chain(powers.iter().copied()) {
            let term = fit
                .term(name)
                .ok_or_else(|| StatsError::Schema(format!("fit has no term {name:?}")))?;
            coefficients.push(term.estimate);
        }
        Ok(PolynomialLogit { coefficients })
    }

    pub fn eta(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// dη/dx; the sign of the curve's slope, since the inverse logit is
    /// strictly increasing.
    pub fn eta_slope(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * x + k as f64 * c)
    }

    pub fn probability(&self, x: f64) -> f64 {
        logistic(self.eta(x))
    }
}

/// Predicted probability at each grid point.
pub fn breach_response_curve(model: &PolynomialLogit, grid: &[f64]) -> Vec<(f64, f64)> {
    grid.iter().map(|&x| (x, model.probability(x))).collect()
}

/// Pools `(frequency, successes, trials)` observations into `bins`
/// equal-width bins on [0, 1] (last bin closed). Returns
/// `(midpoint, successes, trials)` for every nonempty bin.
pub fn bin_by_frequency(observations: &[(f64, f64, f64)], bins: usize) -> Vec<(f64, f64, f64)> {
    assert!(bins > 0, "need at least one bin");
    let mut acc = vec![(0.0, 0.0); bins];
    for &(f, y, m) in observations {
        let idx = ((f.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        acc[idx].0 += y;
        acc[idx].1 += m;
    }
    acc.into_iter()
        .enumerate()
        .filter(|(_, (_, m))| *m > 0.0)
        .map(|(i, (y, m))| ((i as f64 + 0.5) / bins as f64, y, m))
        .collect()
}
