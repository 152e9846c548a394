//! Generalized extreme value distribution.
//!
//! Parameterized by `θ = (γ, μ, σ)` with tail index `γ`, location `μ` and
//! scale `σ > 0`:
//!
//! ```text
//! G_θ(x) = exp(-(1 + γ z)^(-1/γ)),   z = (x - μ) / σ,   1 + γ z > 0
//! G_θ(x) = exp(-exp(-z))             γ = 0
//! ```
//!
//! Every power `(1 + γ z)^(-1/γ)` is evaluated as `exp(-log1p(γ z) / γ)`, and
//! the Gumbel limit takes over when `|γ| < GAMMA_SWITCH`. The two branches
//! agree to about `|γ|·z²` at the switch, far below 1e-6 on any realistic `z`.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this `|γ|` the Gumbel limit expressions are used.
pub const GAMMA_SWITCH: f64 = 1e-8;

/// Shape, location and scale of a GEV distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    pub gamma: f64,
    pub mu: f64,
    pub sigma: f64,
}

/// Closed support interval of a GEV distribution; infinite ends use `±inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GevSupport {
    pub lower: f64,
    pub upper: f64,
}

impl GevSupport {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }
}

impl GevParams {
    pub fn new(gamma: f64, mu: f64, sigma: f64) -> Result<Self> {
        let theta = GevParams { gamma, mu, sigma };
        theta.validate()?;
        Ok(theta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.mu.is_finite() && self.sigma.is_finite()) {
            return Err(Error::Domain(format!("non-finite GEV parameters {self:?}")));
        }
        if self.sigma <= 0.0 {
            return Err(Error::Domain(format!(
                "GEV scale must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        GevParams {
            gamma: v[0],
            mu: v[1],
            sigma: v[2],
        }
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.gamma, self.mu, self.sigma)
    }

    fn is_gumbel(&self) -> bool {
        self.gamma.abs() < GAMMA_SWITCH
    }

    pub fn support(&self) -> GevSupport {
        if self.is_gumbel() {
            GevSupport {
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
            }
        } else if self.gamma > 0.0 {
            GevSupport {
                lower: self.mu - self.sigma / self.gamma,
                upper: f64::INFINITY,
            }
        } else {
            GevSupport {
                lower: f64::NEG_INFINITY,
                upper: self.mu - self.sigma / self.gamma,
            }
        }
    }

    /// `log g_θ(x)`, or `-inf` outside the support.
    pub fn log_density(&self, x: f64) -> Result<f64> {
        self.validate()?;
        if !x.is_finite() {
            return Err(Error::Domain(format!("non-finite observation {x}")));
        }
        Ok(self.log_density_unchecked(x))
    }

    /// Log-density without argument validation; callers guarantee `σ > 0`
    /// and finite `x`.
    #[inline]
    pub(crate) fn log_density_unchecked(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        if self.is_gumbel() {
            return -z - (-z).exp() - self.sigma.ln();
        }
        let gz = self.gamma * z;
        if gz <= -1.0 {
            return f64::NEG_INFINITY;
        }
        let log_t = gz.ln_1p();
        -self.sigma.ln() - (1.0 + 1.0 / self.gamma) * log_t - (-log_t / self.gamma).exp()
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        Ok(self.log_density(x)?.exp())
    }

    /// Distribution function; exactly 0 or 1 at and beyond the support ends.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.validate()?;
        if x.is_nan() {
            return Err(Error::Domain("NaN observation".into()));
        }
        Ok(self.cdf_unchecked(x))
    }

    #[inline]
    pub(crate) fn cdf_unchecked(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 1.0;
        }
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        let z = (x - self.mu) / self.sigma;
        if self.is_gumbel() {
            return (-(-z).exp()).exp();
        }
        let gz = self.gamma * z;
        if gz <= -1.0 {
            return if self.gamma > 0.0 { 0.0 } else { 1.0 };
        }
        (-(-gz.ln_1p() / self.gamma).exp()).exp()
    }

    /// Quantile expressed through `y = -log G_θ(x)`.
    #[inline]
    fn quantile_from_neg_log(&self, y: f64) -> f64 {
        if self.is_gumbel() {
            self.mu - self.sigma * y.ln()
        } else {
            self.mu + self.sigma * (-self.gamma * y.ln()).exp_m1() / self.gamma
        }
    }

    /// The `(1 - p)`-quantile `Q(p) = μ + σ((-log(1-p))^{-γ} - 1)/γ`.
    ///
    /// With `p = 1/T` this is the `T`-block return level.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        self.validate()?;
        check_probability(p)?;
        Ok(self.quantile_unchecked(p))
    }

    #[inline]
    pub(crate) fn quantile_unchecked(&self, p: f64) -> f64 {
        self.quantile_from_neg_log(-(-p).ln_1p())
    }

    /// Approximation of the `(1 - p)`-quantile of the parent distribution when
    /// `θ` describes maxima of blocks of size `m`: `Q(p_m)` with
    /// `p_m = 1 - (1 - p)^m`.
    pub fn extreme_quantile(&self, p: f64, m: usize) -> Result<f64> {
        self.validate()?;
        check_probability(p)?;
        if m == 0 {
            return Err(Error::Domain("block size must be at least 1".into()));
        }
        Ok(self.extreme_quantile_unchecked(p, m))
    }

    #[inline]
    pub(crate) fn extreme_quantile_unchecked(&self, p: f64, m: usize) -> f64 {
        self.quantile_from_neg_log(crate::special::block_neg_log_level(p, m as f64))
    }

    /// Gradient of `log g_θ(x)` with respect to `(γ, μ, σ)`.
    pub fn score(&self, x: f64) -> Result<Vector3<f64>> {
        self.validate()?;
        if !x.is_finite() {
            return Err(Error::Domain(format!("non-finite observation {x}")));
        }
        self.score_unchecked(x)
    }

    pub(crate) fn score_unchecked(&self, x: f64) -> Result<Vector3<f64>> {
        let z = (x - self.mu) / self.sigma;
        if self.is_gumbel() {
            return Ok(score_standardized(0.0, self.sigma, z, 1.0, 0.0));
        }
        let gz = self.gamma * z;
        if gz <= -1.0 {
            return Err(Error::Domain(format!(
                "score undefined at {x}: not interior to the support of {self:?}"
            )));
        }
        let log_t = gz.ln_1p();
        Ok(score_standardized(
            self.gamma,
            self.sigma,
            z,
            1.0 + gz,
            log_t,
        ))
    }

    /// One draw by inversion.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = Open01.sample(rng);
        self.quantile_from_neg_log(-u.ln())
    }
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "probability must lie in (0, 1), got {p}"
        )))
    }
}

/// `log(1+γz)/γ² - z/(γ(1+γz))`, the term of `∂/∂γ log g` that cancels for
/// small `γz`. Series: `Σ_n (-1)^n (n+1)/(n+2) γ^n z^{n+2}`.
fn shape_kernel_term(gamma: f64, z: f64, t: f64, log_t: f64) -> f64 {
    let gz = gamma * z;
    if gz.abs() < 1e-3 {
        let mut term = z * z;
        let mut acc = 0.0;
        for n in 0..8 {
            let nf = n as f64;
            acc += (nf + 1.0) / (nf + 2.0) * term;
            term *= -gz;
        }
        acc
    } else {
        log_t / (gamma * gamma) - z / (gamma * t)
    }
}

/// Score of the GEV log-density given `z`, `t = 1 + γz` and `log t`; passing
/// `t` and `log t` separately keeps precision near a finite endpoint.
fn score_standardized(gamma: f64, sigma: f64, z: f64, t: f64, log_t: f64) -> Vector3<f64> {
    // s = t^{-1/γ}, e^{-z} in the Gumbel limit
    let s = if gamma == 0.0 {
        (-z).exp()
    } else {
        (-log_t / gamma).exp()
    };
    let common = ((1.0 + gamma) - s) / (sigma * t);
    let d_gamma = (1.0 - s) * shape_kernel_term(gamma, z, t, log_t) - z / t;
    let d_mu = common;
    let d_sigma = -1.0 / sigma + z * common;
    Vector3::new(d_gamma, d_mu, d_sigma)
}

/// `k` block maxima of blocks of size `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMaxSample {
    maxima: Vec<f64>,
    block_size: usize,
    label: String,
}

impl BlockMaxSample {
    pub fn new(maxima: Vec<f64>, block_size: usize, label: impl Into<String>) -> Result<Self> {
        if maxima.is_empty() {
            return Err(Error::Domain("block-maxima sample is empty".into()));
        }
        if let Some(bad) = maxima.iter().find(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite block maximum {bad}")));
        }
        if block_size == 0 {
            return Err(Error::Domain("block size must be at least 1".into()));
        }
        Ok(BlockMaxSample {
            maxima,
            block_size,
            label: label.into(),
        })
    }

    pub fn maxima(&self) -> &[f64] {
        &self.maxima
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.maxima.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maxima.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.maxima.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.maxima
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// GEV log-likelihood of the sample; `-inf` as soon as one maximum falls
/// outside the support.
pub fn log_likelihood(theta: &GevParams, sample: &BlockMaxSample) -> Result<f64> {
    theta.validate()?;
    Ok(log_likelihood_unchecked(theta, sample.maxima()))
}

#[inline]
pub(crate) fn log_likelihood_unchecked(theta: &GevParams, xs: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &x in xs {
        let l = theta.log_density_unchecked(x);
        if l == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        acc += l;
    }
    acc
}

/// `k^{-1/2} Σ_i ∇ log g_θ(x_i)`.
pub fn score_process(theta: &GevParams, sample: &BlockMaxSample) -> Result<Vector3<f64>> {
    theta.validate()?;
    let mut acc = Vector3::zeros();
    for &x in sample.maxima() {
        acc += theta.score_unchecked(x)?;
    }
    Ok(acc / (sample.len() as f64).sqrt())
}

/// Fisher information `E[∇l ∇lᵀ]` of the standard GEV `(γ0, 0, 1)`, by
/// trapezoidal quadrature in `s = log(-log G)`.
///
/// Only finite for `γ0 > -1/2`.
pub fn fisher_info_numeric(gamma0: f64) -> Result<Matrix3<f64>> {
    if !(gamma0 > -0.5) || !gamma0.is_finite() {
        return Err(Error::Domain(format!(
            "Fisher information requires gamma0 > -1/2, got {gamma0}"
        )));
    }
    // With y = -log G(x) ~ Exp(1) and y = e^s the integrand decays like
    // e^{s(1 - 2|γ0|)} on the left for γ0 < 0 and double-exponentially on the
    // right.
    let left_rate = if gamma0 < 0.0 {
        1.0 + 2.0 * gamma0
    } else {
        1.0
    };
    let s_min = (-36.0 / left_rate).max(-20_000.0);
    let s_max = 4.0;
    let h = 0.004;
    let n = ((s_max - s_min) / h).ceil() as usize;
    let h = (s_max - s_min) / n as f64;
    let mut info = Matrix3::zeros();
    for i in 0..=n {
        let s = s_min + i as f64 * h;
        let y = s.exp();
        let weight = (-y + s).exp() * if i == 0 || i == n { 0.5 * h } else { h };
        if weight == 0.0 {
            continue;
        }
        let (z, t, log_t) = if gamma0.abs() < GAMMA_SWITCH {
            (-s, 1.0, 0.0)
        } else {
            // t = 1 + γ z = y^{-γ}
            let log_t = -gamma0 * s;
            (log_t.exp_m1() / gamma0, log_t.exp(), log_t)
        };
        let g = if gamma0.abs() < GAMMA_SWITCH {
            score_standardized(0.0, 1.0, z, t, log_t)
        } else {
            score_standardized(gamma0, 1.0, z, t, log_t)
        };
        info += g * g.transpose() * weight;
    }
    Ok(info)
}

/// Monte Carlo counterpart of [`fisher_info_numeric`] from `n` draws.
pub fn fisher_info_monte_carlo<R: Rng + ?Sized>(
    gamma0: f64,
    n: usize,
    rng: &mut R,
) -> Result<Matrix3<f64>> {
    if !(gamma0 > -0.5) || !gamma0.is_finite() {
        return Err(Error::Domain(format!(
            "Fisher information requires gamma0 > -1/2, got {gamma0}"
        )));
    }
    if n == 0 {
        return Err(Error::Domain("Monte Carlo size must be positive".into()));
    }
    let theta = GevParams::new(gamma0, 0.0, 1.0)?;
    let mut info = Matrix3::zeros();
    let mut taken = 0usize;
    while taken < n {
        let x = theta.sample(rng);
        // draws exactly on a finite endpoint have probability zero but can
        // appear through rounding
        if let Ok(g) = theta.score_unchecked(x) {
            info += g * g.transpose();
            taken += 1;
        }
    }
    Ok(info / n as f64)
}
