//! Data-dependent empirical-Bayes prior
//!
//! ```text
//! π_k(θ) = π_sh(γ) · π_loc((μ - b̂)/â)/â · π_sc(σ/â)/â
//! ```
//!
//! where `(b̂, â)` are the location and scale of a frequentist fit to the same
//! sample. Defaults: Cauchy truncated to `γ > -1`, standard normal location
//! kernel, unit exponential on `σ/â`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{ml_fit, pwm_fit, FitResult};
use crate::gev::{log_likelihood_unchecked, BlockMaxSample, GevParams};
use crate::special::{ln_gamma, normal_ln_pdf, student_t_cdf, student_t_ln_pdf};

/// Density on the tail index. Always zero for `γ ≤ -1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeKernel {
    /// Student-t with `nu` degrees of freedom truncated to `(-1, ∞)`.
    TruncatedStudentT { nu: f64 },
    /// Uniform on `(lower, upper)`, intersected with `(-1, ∞)`.
    Uniform { lower: f64, upper: f64 },
}

/// Density of the standardized location `(μ - b̂)/â`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocationKernel {
    #[default]
    StandardNormal,
    StudentT {
        nu: f64,
    },
}

/// Density of the standardized scale `σ/â`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScaleKernel {
    /// Gamma with the given shape and rate; shape 1, rate 1 is the unit
    /// exponential.
    Gamma { shape: f64, rate: f64 },
}

impl Default for ShapeKernel {
    fn default() -> Self {
        ShapeKernel::TruncatedStudentT { nu: 1.0 }
    }
}

impl Default for ScaleKernel {
    fn default() -> Self {
        ScaleKernel::Gamma {
            shape: 1.0,
            rate: 1.0,
        }
    }
}

impl ShapeKernel {
    fn validate(&self) -> Result<()> {
        match *self {
            ShapeKernel::TruncatedStudentT { nu } if nu > 0.0 && nu.is_finite() => Ok(()),
            ShapeKernel::Uniform { lower, upper }
                if lower.is_finite() && upper.is_finite() && lower.max(-1.0) < upper =>
            {
                Ok(())
            }
            other => Err(Error::Prior(format!("invalid shape kernel {other:?}"))),
        }
    }

    pub fn ln_density(&self, gamma: f64) -> f64 {
        if gamma <= -1.0 {
            return f64::NEG_INFINITY;
        }
        match *self {
            ShapeKernel::TruncatedStudentT { nu } => {
                student_t_ln_pdf(nu, gamma) - (1.0 - student_t_cdf(nu, -1.0)).ln()
            }
            ShapeKernel::Uniform { lower, upper } => {
                let lo = lower.max(-1.0);
                if gamma > lo && gamma < upper {
                    -(upper - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

impl LocationKernel {
    fn validate(&self) -> Result<()> {
        match *self {
            LocationKernel::StandardNormal => Ok(()),
            LocationKernel::StudentT { nu } if nu > 0.0 && nu.is_finite() => Ok(()),
            other => Err(Error::Prior(format!("invalid location kernel {other:?}"))),
        }
    }

    pub fn ln_density(&self, c: f64) -> f64 {
        match *self {
            LocationKernel::StandardNormal => normal_ln_pdf(c),
            LocationKernel::StudentT { nu } => student_t_ln_pdf(nu, c),
        }
    }
}

impl ScaleKernel {
    fn validate(&self) -> Result<()> {
        match *self {
            ScaleKernel::Gamma { shape, rate }
                if shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite() =>
            {
                Ok(())
            }
            other => Err(Error::Prior(format!("invalid scale kernel {other:?}"))),
        }
    }

    pub fn ln_density(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match *self {
            ScaleKernel::Gamma { shape, rate } => {
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * t.ln() - rate * t
            }
        }
    }
}

/// The three kernels, as configured by the user.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorKernels {
    pub shape: ShapeKernel,
    pub location: LocationKernel,
    pub scale: ScaleKernel,
}

impl PriorKernels {
    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        self.location.validate()?;
        self.scale.validate()
    }
}

/// A prior centred on a fit to the data; frozen once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataDependentPrior {
    pub a_hat: f64,
    pub b_hat: f64,
    pub kernels: PriorKernels,
    /// The fit the centring came from.
    pub fit: FitResult,
}

impl DataDependentPrior {
    /// Prior centred at explicitly given `(b̂, â)`.
    pub fn with_centering(
        b_hat: f64,
        a_hat: f64,
        kernels: PriorKernels,
        fit: FitResult,
    ) -> Result<Self> {
        kernels.validate()?;
        if !(a_hat > 0.0 && a_hat.is_finite() && b_hat.is_finite()) {
            return Err(Error::Prior(format!(
                "invalid centring (b_hat={b_hat}, a_hat={a_hat})"
            )));
        }
        Ok(DataDependentPrior {
            a_hat,
            b_hat,
            kernels,
            fit,
        })
    }

    /// `log π_k(θ)`; `-inf` off the parameter space.
    pub fn log_prior(&self, theta: &GevParams) -> Result<f64> {
        if !(theta.gamma.is_finite() && theta.mu.is_finite() && theta.sigma.is_finite()) {
            return Err(Error::Domain(format!("non-finite parameters {theta:?}")));
        }
        Ok(self.log_prior_unchecked(theta))
    }

    #[inline]
    pub(crate) fn log_prior_unchecked(&self, theta: &GevParams) -> f64 {
        if theta.sigma <= 0.0 || theta.gamma <= -1.0 {
            return f64::NEG_INFINITY;
        }
        let ln_a = self.a_hat.ln();
        self.kernels.shape.ln_density(theta.gamma)
            + self
                .kernels
                .location
                .ln_density((theta.mu - self.b_hat) / self.a_hat)
            - ln_a
            + self.kernels.scale.ln_density(theta.sigma / self.a_hat)
            - ln_a
    }

    /// `log L_k(θ) + log π_k(θ)`.
    pub fn log_unnormalized_posterior(
        &self,
        sample: &BlockMaxSample,
        theta: &GevParams,
    ) -> Result<f64> {
        let lp = self.log_prior(theta)?;
        if lp == f64::NEG_INFINITY {
            return Ok(lp);
        }
        Ok(lp + log_likelihood_unchecked(theta, sample.maxima()))
    }
}

/// Fits the sample (ML, falling back to PWM) and centres the kernels at the
/// fitted location and scale.
pub fn build_prior(sample: &BlockMaxSample, kernels: PriorKernels) -> Result<DataDependentPrior> {
    kernels.validate()?;
    let fit = match ml_fit(sample, None) {
        Ok(fit) if fit.converged => fit,
        ml => match pwm_fit(sample) {
            Ok(fit) => fit,
            Err(pwm_err) => {
                let ml_msg = match ml {
                    Ok(_) => "did not converge".to_string(),
                    Err(e) => e.to_string(),
                };
                return Err(Error::Prior(format!(
                    "both estimators failed (ML: {ml_msg}; PWM: {pwm_err})"
                )));
            }
        },
    };
    DataDependentPrior::with_centering(fit.theta_hat.mu, fit.theta_hat.sigma, kernels, fit)
}
