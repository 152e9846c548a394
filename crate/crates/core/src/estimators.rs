//! Frequentist point estimators for the GEV parameters.
//!
//! [`pwm_fit`] solves the probability-weighted-moment equations; [`ml_fit`]
//! maximizes the likelihood by BFGS in `(γ, μ, log σ)` starting from the PWM
//! point. Both are used to centre the data-dependent prior.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gev::{log_likelihood_unchecked, BlockMaxSample, GevParams};
use crate::special::gamma_fn;

/// Smallest tail index the ML search may visit.
pub const GAMMA_FLOOR: f64 = -1.0 + 1e-6;
const MAX_ITER: usize = 500;
const GRAD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Pwm,
    Ml,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: GevParams,
    pub converged: bool,
    pub log_lik: f64,
    pub n_iter: usize,
    pub method: FitMethod,
}

fn check_fit_sample(sample: &BlockMaxSample) -> Result<()> {
    if sample.len() < 3 {
        return Err(Error::Estimation(format!(
            "need at least 3 maxima, got {}",
            sample.len()
        )));
    }
    if sample.max() - sample.min() <= 0.0 {
        return Err(Error::Estimation(
            "all maxima are equal; the sample has no spread".into(),
        ));
    }
    Ok(())
}

/// Ratio `(1 - 2^γ)/(1 - 3^γ)` from the PWM equations, decreasing in `γ`.
fn pwm_ratio(gamma: f64) -> f64 {
    if gamma.abs() < 1e-10 {
        std::f64::consts::LN_2 / 3f64.ln()
    } else {
        (gamma * std::f64::consts::LN_2).exp_m1() / (gamma * 3f64.ln()).exp_m1()
    }
}

/// Probability-weighted-moment estimator (Hosking, Wallis & Wood).
///
/// Ties receive the average of their ranks in the weights.
pub fn pwm_fit(sample: &BlockMaxSample) -> Result<FitResult> {
    check_fit_sample(sample)?;
    let mut xs = sample.maxima().to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;

    let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
    let mut i = 0;
    while i < xs.len() {
        let mut j = i;
        while j + 1 < xs.len() && xs[j + 1] == xs[i] {
            j += 1;
        }
        // zero-based average rank of the tied block
        let r = (i + j) as f64 / 2.0;
        let w1 = r / (n - 1.0);
        let w2 = r * (r - 1.0) / ((n - 1.0) * (n - 2.0));
        for x in &xs[i..=j] {
            b0 += x;
            b1 += w1 * x;
            b2 += w2 * x;
        }
        i = j + 1;
    }
    b0 /= n;
    b1 /= n;
    b2 /= n;

    let l2 = 2.0 * b1 - b0;
    let ratio = l2 / (3.0 * b2 - b0);
    if !ratio.is_finite() || l2 <= 0.0 {
        return Err(Error::Estimation(format!(
            "degenerate probability-weighted moments (b0={b0}, b1={b1}, b2={b2})"
        )));
    }

    // Solve pwm_ratio(γ) = ratio on (-1, 1) by bisection.
    let edge = 1.0 - 1e-6;
    let gamma = if ratio >= pwm_ratio(-edge) {
        -edge
    } else if ratio <= pwm_ratio(edge) {
        edge
    } else {
        let (mut lo, mut hi) = (-edge, edge);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if pwm_ratio(mid) > ratio {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        0.5 * (lo + hi)
    };

    let (sigma, mu) = if gamma.abs() < 1e-10 {
        let sigma = l2 / std::f64::consts::LN_2;
        (sigma, b0 - sigma * 0.577_215_664_901_532_9)
    } else {
        let g = gamma_fn(1.0 - gamma);
        let sigma = gamma * l2 / (g * (2f64.powf(gamma) - 1.0));
        (sigma, b0 - sigma * (g - 1.0) / gamma)
    };
    let theta_hat = GevParams::new(gamma, mu, sigma)
        .map_err(|e| Error::Estimation(format!("PWM produced invalid parameters: {e}")))?;
    Ok(FitResult {
        theta_hat,
        converged: true,
        log_lik: log_likelihood_unchecked(&theta_hat, sample.maxima()),
        n_iter: 0,
        method: FitMethod::Pwm,
    })
}

/// Objective in the working parameterization `φ = (γ, μ, log σ)`.
struct Objective<'a> {
    xs: &'a [f64],
}

impl Objective<'_> {
    fn theta(phi: &Vector3<f64>) -> GevParams {
        GevParams {
            gamma: phi[0],
            mu: phi[1],
            sigma: phi[2].exp(),
        }
    }

    fn value(&self, phi: &Vector3<f64>) -> f64 {
        if !(phi[0] > GAMMA_FLOOR) || !phi.iter().all(|v| v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        log_likelihood_unchecked(&Self::theta(phi), self.xs)
    }

    fn gradient(&self, phi: &Vector3<f64>) -> Option<Vector3<f64>> {
        let theta = Self::theta(phi);
        let mut g = Vector3::zeros();
        for &x in self.xs {
            g += theta.score_unchecked(x).ok()?;
        }
        g[2] *= theta.sigma;
        Some(g)
    }
}

/// Maximum-likelihood fit.
///
/// Non-convergence within 500 iterations is reported through
/// `converged = false` rather than an error.
pub fn ml_fit(sample: &BlockMaxSample, init: Option<GevParams>) -> Result<FitResult> {
    check_fit_sample(sample)?;
    let start = match init {
        Some(theta) => theta,
        None => pwm_fit(sample)?.theta_hat,
    };
    start.validate()?;
    let objective = Objective {
        xs: sample.maxima(),
    };

    let mut phi = Vector3::new(
        start.gamma.max(GAMMA_FLOOR + 1e-3),
        start.mu,
        start.sigma.ln(),
    );
    let mut f = objective.value(&phi);
    if !f.is_finite() {
        // Widen the scale until every observation is inside the support.
        for _ in 0..60 {
            phi[2] += 0.5;
            f = objective.value(&phi);
            if f.is_finite() {
                break;
            }
        }
        if !f.is_finite() {
            return Err(Error::Estimation(
                "could not find a starting point with finite likelihood".into(),
            ));
        }
    }
    let mut grad = objective
        .gradient(&phi)
        .ok_or_else(|| Error::Estimation("score undefined at the starting point".into()))?;

    // BFGS on -f; `h` approximates the inverse Hessian of -f.
    let mut h = Matrix3::identity() / grad.norm().max(1.0);
    let mut n_iter = 0;
    let k = sample.len() as f64;
    // per-observation score with the location component in units of sigma
    let stationary = |grad: &Vector3<f64>, phi: &Vector3<f64>| {
        Vector3::new(grad[0], grad[1] * phi[2].exp(), grad[2]).amax() / k <= GRAD_TOL
    };
    let mut converged = stationary(&grad, &phi);
    while !converged && n_iter < MAX_ITER {
        n_iter += 1;
        let mut dir = h * grad;
        if dir.dot(&grad) <= 0.0 {
            h = Matrix3::identity() / grad.norm().max(1.0);
            dir = h * grad;
        }
        let slope = dir.dot(&grad);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = phi + dir * step;
            let fc = objective.value(&cand);
            if fc.is_finite() && fc >= f + 1e-4 * step * slope {
                if let Some(gc) = objective.gradient(&cand) {
                    accepted = Some((cand, fc, gc));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((cand, fc, gc)) = accepted else {
            break;
        };
        let stalled = step < 1e-6 && fc - f <= f64::EPSILON * f.abs();
        let s = cand - phi;
        // gradient of -f changes by -(gc - grad)
        let y = grad - gc;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            if n_iter == 1 {
                h = Matrix3::identity() * (sy / y.dot(&y));
            }
            let rho = 1.0 / sy;
            let i = Matrix3::identity();
            h = (i - s * y.transpose() * rho) * h * (i - y * s.transpose() * rho)
                + s * s.transpose() * rho;
        }
        phi = cand;
        f = fc;
        grad = gc;
        converged = stationary(&grad, &phi);
        if stalled {
            break;
        }
    }

    let theta_hat = Objective::theta(&phi);
    if !converged {
        // Accept a point stalled at machine precision when the normalized
        // score is negligible.
        let g = Vector3::new(grad[0], grad[1] * theta_hat.sigma, grad[2]);
        converged = g.amax() / k <= 1e-6;
    }
    Ok(FitResult {
        theta_hat,
        converged,
        log_lik: f,
        n_iter,
        method: FitMethod::Ml,
    })
}
