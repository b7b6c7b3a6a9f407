//! NB2 negative binomial regression: log link, variance `mu + mu^2 / k`.
//!
//! Coefficients and `phi = ln k` are fitted jointly by Newton's method on the
//! exact log-likelihood, with Levenberg damping when the Hessian is not
//! negative definite and step halving whenever a step lowers the likelihood.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::numerics::RowMatrix;

const MAX_ITERATIONS: usize = 200;
const LOG_LIKELIHOOD_TOL: f64 = 1e-8;
const PHI_RANGE: (f64, f64) = (-20.0, 25.0);
const MAX_HALVINGS: usize = 40;

/// Fitted NB2 model. `coefficients[0]` is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct NbModel {
    pub coefficients: Vec<f64>,
    /// `k` in `Var = mu + mu^2 / k`.
    pub dispersion: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
}

impl NbModel {
    pub fn new(coefficients: Vec<f64>, dispersion: f64) -> Result<Self> {
        if coefficients.is_empty() || !coefficients.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("NB coefficients must be finite and include an intercept"));
        }
        if !(dispersion > 0.0 && dispersion.is_finite()) {
            return Err(Error::invalid(format!("NB dispersion must be positive, got {dispersion}")));
        }
        Ok(NbModel {
            coefficients,
            dispersion,
            log_likelihood: f64::NAN,
            iterations: 0,
        })
    }

    pub fn n_features(&self) -> usize {
        self.coefficients.len() - 1
    }

    fn linear(&self, x: &[f64]) -> f64 {
        self.coefficients[0] + self.coefficients[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

/// Mean prediction `exp(b0 + x . b)`.
pub fn predict_nb(model: &NbModel, x: &[f64]) -> Result<f64> {
    check_len("NB feature width", model.n_features(), x.len())?;
    Ok(model.linear(x).exp())
}

struct Problem<'a> {
    x: &'a RowMatrix,
    y: Vec<u64>,
    log_y_factorial: f64,
}

impl Problem<'_> {
    fn eta(&self, beta: &[f64], row: usize) -> f64 {
        beta[0] + beta[1..].iter().zip(self.x.row(row)).map(|(b, v)| b * v).sum::<f64>()
    }

    fn log_likelihood(&self, beta: &[f64], phi: f64) -> f64 {
        let k = phi.exp();
        let mut ll = -self.log_y_factorial;
        for (t, &y) in self.y.iter().enumerate() {
            let eta = self.eta(beta, t);
            let mu = eta.exp();
            let log_gamma_ratio: f64 = (0..y).map(|i| (k + i as f64).ln()).sum();
            ll += log_gamma_ratio - k * (mu / k).ln_1p() + y as f64 * (eta - (k + mu).ln());
        }
        ll
    }

    /// Gradient and Hessian of the log-likelihood in `(beta, phi)`.
    fn derivatives(&self, beta: &[f64], phi: f64) -> (DVector<f64>, DMatrix<f64>) {
        let p = beta.len();
        let k = phi.exp();
        let mut grad = DVector::zeros(p + 1);
        let mut hess = DMatrix::zeros(p + 1, p + 1);
        let mut design = vec![1.0; p];
        for (t, &y) in self.y.iter().enumerate() {
            design[1..].copy_from_slice(self.x.row(t));
            let mu = self.eta(beta, t).exp();
            let yf = y as f64;
            let km = k + mu;
            let d_eta = k * (yf - mu) / km;
            let d_eta2 = -mu * k * (yf + k) / (km * km);
            let (s1, s2) = (0..y).fold((0.0, 0.0), |(a, b), i| {
                let v = 1.0 / (k + i as f64);
                (a + v, b + v * v)
            });
            let d_k = s1 - (mu / k).ln_1p() + (mu - yf) / km;
            let d_k2 = -s2 + 1.0 / k - 1.0 / km - (mu - yf) / (km * km);
            let d_eta_k = mu * (yf - mu) / (km * km);

            let d_phi = k * d_k;
            let d_phi2 = k * k * d_k2 + k * d_k;
            let d_eta_phi = k * d_eta_k;

            for a in 0..p {
                grad[a] += d_eta * design[a];
                for b in a..p {
                    hess[(a, b)] += d_eta2 * design[a] * design[b];
                }
                hess[(a, p)] += d_eta_phi * design[a];
            }
            grad[p] += d_phi;
            hess[(p, p)] += d_phi2;
        }
        for a in 0..=p {
            for b in 0..a {
                hess[(a, b)] = hess[(b, a)];
            }
        }
        (grad, hess)
    }
}

fn validate_counts(counts: &[f64]) -> Result<Vec<u64>> {
    counts
        .iter()
        .map(|&c| {
            if c >= 0.0 && c.fract() == 0.0 && c < 1e15 {
                Ok(c as u64)
            } else {
                Err(Error::invalid(format!("NB counts must be non-negative integers, got {c}")))
            }
        })
        .collect()
}

fn check_rank(x: &RowMatrix) -> Result<()> {
    let p = x.ncols() + 1;
    if x.nrows() < p {
        return Err(Error::invalid(format!(
            "NB design with intercept needs at least {p} rows, got {}",
            x.nrows()
        )));
    }
    let design = DMatrix::from_fn(x.nrows(), p, |r, c| if c == 0 { 1.0 } else { x.get(r, c - 1) });
    let sv = design.singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0 && min > 1e-10 * max) {
        return Err(Error::invalid("NB design matrix is rank deficient after adding the intercept"));
    }
    Ok(())
}

/// Newton step `(-H + lambda I)^-1 g`, raising `lambda` until the system is
/// positive definite.
fn damped_step(grad: &DVector<f64>, hess: &DMatrix<f64>) -> Option<DVector<f64>> {
    let neg = -hess.clone();
    if let Some(chol) = neg.clone().cholesky() {
        return Some(chol.solve(grad));
    }
    let scale = neg.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let mut lambda = 1e-8 * scale;
    for _ in 0..60 {
        let mut damped = neg.clone();
        for i in 0..damped.nrows() {
            damped[(i, i)] += lambda;
        }
        if let Some(chol) = damped.cholesky() {
            return Some(chol.solve(grad));
        }
        lambda *= 10.0;
    }
    None
}

/// Maximum-likelihood NB2 fit. Also returns the log-likelihood after every
/// accepted iteration.
pub fn fit_nb_traced(features: &RowMatrix, counts: &[f64]) -> Result<(NbModel, Vec<f64>)> {
    if features.nrows() == 0 {
        return Err(Error::invalid("NB fit needs at least one row"));
    }
    check_len("NB count vector", features.nrows(), counts.len())?;
    if !features.all_finite() {
        return Err(Error::invalid("NB features must be finite"));
    }
    let y = validate_counts(counts)?;
    let total: u64 = y.iter().sum();
    if total == 0 {
        return Err(Error::invalid("NB fit needs at least one positive count"));
    }
    check_rank(features)?;

    let n = y.len() as f64;
    let mean = total as f64 / n;
    let var = y.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    let k0 = if var > mean * (1.0 + 1e-6) {
        mean * mean / (var - mean)
    } else {
        1e3
    };
    let log_y_factorial = y.iter().map(|&v| (2..=v).map(|i| (i as f64).ln()).sum::<f64>()).sum();
    let problem = Problem {
        x: features,
        y,
        log_y_factorial,
    };

    let p = features.ncols() + 1;
    let mut beta = vec![0.0; p];
    beta[0] = mean.ln();
    let mut phi = k0.ln().clamp(PHI_RANGE.0, PHI_RANGE.1);
    let mut ll = problem.log_likelihood(&beta, phi);
    let mut trace = vec![ll];

    for iteration in 1..=MAX_ITERATIONS {
        let (grad, hess) = problem.derivatives(&beta, phi);
        let Some(step) = damped_step(&grad, &hess) else {
            break;
        };
        let decrement = grad.dot(&step);
        if decrement.abs() < 1e-12 {
            return Ok((finish(beta, phi, ll, iteration), trace));
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = beta.iter().enumerate().map(|(i, b)| b + t * step[i]).collect();
            let cand_phi = (phi + t * step[p]).clamp(PHI_RANGE.0, PHI_RANGE.1);
            let cand_ll = problem.log_likelihood(&cand, cand_phi);
            if cand_ll.is_finite() && cand_ll >= ll {
                accepted = Some((cand, cand_phi, cand_ll));
                break;
            }
            t *= 0.5;
        }
        let Some((nb, nphi, nll)) = accepted else {
            // no ascent left along the Newton direction
            return Ok((finish(beta, phi, ll, iteration), trace));
        };
        let change = nll - ll;
        beta = nb;
        phi = nphi;
        ll = nll;
        trace.push(ll);
        if change < LOG_LIKELIHOOD_TOL * ll.abs().max(1.0) {
            return Ok((finish(beta, phi, ll, iteration), trace));
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        coefficients: beta,
        dispersion: phi.exp(),
        log_likelihood: ll,
    })
}

fn finish(coefficients: Vec<f64>, phi: f64, log_likelihood: f64, iterations: usize) -> NbModel {
    NbModel {
        coefficients,
        dispersion: phi.exp(),
        log_likelihood,
        iterations,
    }
}

/// Maximum-likelihood NB2 fit.
pub fn fit_nb(features: &RowMatrix, counts: &[f64]) -> Result<NbModel> {
    Ok(fit_nb_traced(features, counts)?.0)
}

/// NB2 log-likelihood of `model` on the given data.
pub fn nb_log_likelihood(model: &NbModel, features: &RowMatrix, counts: &[f64]) -> Result<f64> {
    check_len("NB feature width", model.n_features(), features.ncols())?;
    check_len("NB count vector", features.nrows(), counts.len())?;
    let y = validate_counts(counts)?;
    let log_y_factorial = y.iter().map(|&v| (2..=v).map(|i| (i as f64).ln()).sum::<f64>()).sum();
    let problem = Problem {
        x: features,
        y,
        log_y_factorial,
    };
    Ok(problem.log_likelihood(&model.coefficients, model.dispersion.ln()))
}
