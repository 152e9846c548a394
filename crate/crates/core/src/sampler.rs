//! Adaptive Gaussian random-walk Metropolis-Hastings.
//!
//! Each step draws `θ' ~ N(θ^{(j)}, κ^{(j)} Σ^{(j)})`, accepts with
//! probability `η = min(1, π(θ')/π(θ^{(j)}))`, then adapts
//!
//! ```text
//! Σ^{(j+1)} = (1 + κ²/j) I                              j ≤ 100
//!           = Cov(θ^{(1)}, …, θ^{(j)}) + (κ²/j) I        j > 100
//! log κ^{(j+1)} = log κ^{(j)} + a (η^{(j)} - η*)
//! ```
//!
//! with the Robbins-Monro steplength `a = √(2π) e^{ζ0²/2} / (2 ζ0)`,
//! `ζ0 = -Φ^{-1}(η*/2)`. Note that `κ` multiplies the covariance itself, not
//! its square root. The empirical covariance is a streaming (Welford) update,
//! never a re-scan of the history.

use std::io::Write;
use std::path::Path;

use nalgebra::{Cholesky, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gev::{log_likelihood_unchecked, BlockMaxSample, GevParams};
use crate::prior::DataDependentPrior;
use crate::special::normal_quantile;

/// Number of initial steps that use the identity-based proposal covariance.
pub const WARMUP_STEPS: usize = 100;
const JITTER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    /// Total number of MCMC steps.
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Target acceptance probability `η*`.
    pub target_accept: f64,
    /// Initial scaling `κ^{(0)}`.
    pub kappa0: f64,
    pub seed: u64,
    /// Multiply the Robbins-Monro step by `1/max(1, j/100)`.
    pub rm_decay: bool,
    /// Stop adapting `Σ` and `κ` once burn-in is over.
    pub freeze_after_burn_in: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig::simulation()
    }
}

impl ChainConfig {
    /// 50,000 steps, 30,000 burn-in, 20,000 retained.
    pub fn simulation() -> Self {
        ChainConfig {
            n_iter: 50_000,
            burn_in: 30_000,
            thin: 1,
            target_accept: 0.234,
            kappa0: 1.0,
            seed: 0,
            rm_decay: false,
            freeze_after_burn_in: false,
        }
    }

    /// 8,000 steps, 5,000 burn-in, 3,000 retained.
    pub fn short() -> Self {
        ChainConfig {
            n_iter: 8_000,
            burn_in: 5_000,
            ..ChainConfig::simulation()
        }
    }

    /// 15,000 steps, 5,000 burn-in, 10,000 retained.
    pub fn desk() -> Self {
        ChainConfig {
            n_iter: 15_000,
            burn_in: 5_000,
            ..ChainConfig::simulation()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iter {
            return Err(Error::Config(format!(
                "burn_in ({}) must be smaller than n_iter ({})",
                self.burn_in, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config(format!(
                "target_accept must lie in (0, 1), got {}",
                self.target_accept
            )));
        }
        if !(self.kappa0 > 0.0 && self.kappa0.is_finite()) {
            return Err(Error::Config(format!(
                "kappa0 must be positive, got {}",
                self.kappa0
            )));
        }
        Ok(())
    }

    /// Number of retained draws.
    pub fn n_retained(&self) -> usize {
        (self.n_iter - self.burn_in) / self.thin
    }
}

/// Unnormalized log-density over `R^3`.
pub trait LogTarget {
    fn ln_target(&self, point: &Vector3<f64>) -> f64;
}

/// The GEV empirical-Bayes posterior as a sampling target.
pub struct GevPosterior<'a> {
    pub sample: &'a BlockMaxSample,
    pub prior: &'a DataDependentPrior,
}

impl LogTarget for GevPosterior<'_> {
    fn ln_target(&self, point: &Vector3<f64>) -> f64 {
        if !point.iter().all(|v| v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let theta = GevParams::from_vector(point);
        let lp = self.prior.log_prior_unchecked(&theta);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        lp + log_likelihood_unchecked(&theta, self.sample.maxima())
    }
}

/// Robbins-Monro steplength `a` for a target acceptance `η*`.
pub fn rm_steplength(target_accept: f64) -> f64 {
    let zeta0 = -normal_quantile(target_accept / 2.0);
    (2.0 * std::f64::consts::PI).sqrt() * (zeta0 * zeta0 / 2.0).exp() / (2.0 * zeta0)
}

/// One Robbins-Monro update of `κ` after step `j` with acceptance
/// probability `eta`.
pub fn adapt_kappa(kappa: f64, eta: f64, j: usize, config: &ChainConfig) -> f64 {
    let mut gain = rm_steplength(config.target_accept);
    if config.rm_decay {
        gain /= (j as f64 / WARMUP_STEPS as f64).max(1.0);
    }
    (kappa.ln() + gain * (eta - config.target_accept)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub accepted: bool,
    /// `min(1, π(θ')/π(θ))`, zero for proposals outside the support.
    pub eta: f64,
}

/// Mutable state of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub theta: Vector3<f64>,
    pub log_post: f64,
    /// Number of completed steps `j`.
    pub step_index: usize,
    pub kappa: f64,
    /// Current proposal covariance `Σ^{(j)}` (before scaling by `κ`).
    pub cov: Matrix3<f64>,
    /// Mean of `θ^{(1)}, …, θ^{(n)}` with `n = history_len`.
    pub running_mean: Vector3<f64>,
    /// Sum of outer products of deviations from `running_mean`.
    pub scatter: Matrix3<f64>,
    pub history_len: usize,
    pub accept_count: usize,
}

impl ChainState {
    pub fn new(theta: Vector3<f64>, log_post: f64, kappa0: f64) -> Self {
        ChainState {
            theta,
            log_post,
            step_index: 0,
            kappa: kappa0,
            cov: Matrix3::identity(),
            running_mean: Vector3::zeros(),
            scatter: Matrix3::zeros(),
            history_len: 0,
            accept_count: 0,
        }
    }

    /// Draws from `N(θ, κΣ)`. A covariance that fails Cholesky gets one
    /// `1e-10·I` jitter before giving up.
    pub fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vector3<f64>> {
        let scaled = self.cov * self.kappa;
        let chol = Cholesky::new(scaled)
            .or_else(|| Cholesky::new(scaled + Matrix3::identity() * JITTER))
            .ok_or_else(|| Error::Sampler {
                iteration: self.step_index,
                message: format!(
                    "proposal covariance not positive definite (kappa={}, cov={:?})",
                    self.kappa, self.cov
                ),
            })?;
        let eps = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
        Ok(self.theta + chol.l() * eps)
    }

    /// Metropolis accept/reject in the log domain.
    pub fn accept_step<T: LogTarget + ?Sized, R: Rng + ?Sized>(
        &mut self,
        proposal: Vector3<f64>,
        target: &T,
        rng: &mut R,
    ) -> Result<StepOutcome> {
        let lp_new = target.ln_target(&proposal);
        if lp_new.is_nan() || lp_new == f64::INFINITY {
            return Err(Error::Sampler {
                iteration: self.step_index,
                message: format!("log target {lp_new} at proposal {proposal:?}; state {self:?}"),
            });
        }
        let log_ratio = lp_new - self.log_post;
        let eta = if lp_new == f64::NEG_INFINITY {
            0.0
        } else {
            log_ratio.min(0.0).exp()
        };
        let u: f64 = Open01.sample(rng);
        let accepted = lp_new > f64::NEG_INFINITY && u.ln() < log_ratio;
        if accepted {
            self.theta = proposal;
            self.log_post = lp_new;
            self.accept_count += 1;
        }
        Ok(StepOutcome { accepted, eta })
    }

    /// Adds `θ` to the running moments.
    pub fn observe(&mut self, theta: &Vector3<f64>) {
        self.history_len += 1;
        let n = self.history_len as f64;
        let delta = theta - self.running_mean;
        self.running_mean += delta / n;
        let delta2 = theta - self.running_mean;
        self.scatter += delta * delta2.transpose();
    }

    /// `Σ^{(j+1)}` from the `j = history_len ≥ 1` draws observed so far and
    /// the current `κ^{(j)}`.
    pub fn adapt_covariance(&self) -> Matrix3<f64> {
        let j = self.history_len.max(1);
        let ridge = self.kappa * self.kappa / j as f64;
        if j <= WARMUP_STEPS {
            Matrix3::identity() * (1.0 + ridge)
        } else {
            let emp = self.scatter / (j as f64 - 1.0);
            // symmetrize away rounding drift
            (emp + emp.transpose()) * 0.5 + Matrix3::identity() * ridge
        }
    }
}

/// One row of the per-iteration chain trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub gamma: f64,
    pub mu: f64,
    pub sigma: f64,
    pub log_post: f64,
    pub kappa: f64,
    pub accepted: bool,
}

/// Output of a chain over an arbitrary target.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub retained: Vec<Vector3<f64>>,
    pub trace: Vec<TraceRow>,
    /// Acceptance rate over post-burn-in steps.
    pub accept_rate: f64,
    pub overall_accept_rate: f64,
}

/// Runs the adaptive sampler on any target from `init`.
pub fn run_adaptive_chain<T: LogTarget + ?Sized>(
    target: &T,
    init: Vector3<f64>,
    config: &ChainConfig,
) -> Result<ChainOutput> {
    config.validate()?;
    let lp0 = target.ln_target(&init);
    if !lp0.is_finite() {
        return Err(Error::ChainInit(format!(
            "log posterior at the initial point {init:?} is {lp0}; start from a point \
             inside the support of every observation (e.g. the ML or PWM fit)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = ChainState::new(init, lp0, config.kappa0);
    let mut retained = Vec::with_capacity(config.n_retained());
    let mut trace = Vec::with_capacity(config.n_iter);
    let mut post_burn_accepts = 0usize;

    for j in 0..config.n_iter {
        let proposal = state.propose(&mut rng)?;
        let outcome = state.accept_step(proposal, target, &mut rng)?;
        let iter = j + 1;
        let adapting = !(config.freeze_after_burn_in && iter > config.burn_in);
        if adapting && j >= 1 {
            state.cov = state.adapt_covariance();
        }
        let theta = state.theta;
        state.observe(&theta);
        if adapting {
            state.kappa = adapt_kappa(state.kappa, outcome.eta, j, config);
            if !(state.kappa.is_finite() && state.kappa > 0.0) {
                return Err(Error::Sampler {
                    iteration: iter,
                    message: format!("kappa degenerated to {}; state {state:?}", state.kappa),
                });
            }
        }
        state.step_index = iter;

        trace.push(TraceRow {
            iter,
            gamma: theta[0],
            mu: theta[1],
            sigma: theta[2],
            log_post: state.log_post,
            kappa: state.kappa,
            accepted: outcome.accepted,
        });
        if iter > config.burn_in {
            if outcome.accepted {
                post_burn_accepts += 1;
            }
            if (iter - config.burn_in).is_multiple_of(config.thin) {
                retained.push(theta);
            }
        }
    }

    Ok(ChainOutput {
        retained,
        accept_rate: post_burn_accepts as f64 / (config.n_iter - config.burn_in) as f64,
        overall_accept_rate: state.accept_count as f64 / config.n_iter as f64,
        trace,
    })
}

/// Retained posterior draws of `θ` with chain diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub draws: Vec<GevParams>,
    pub accept_rate: f64,
    pub overall_accept_rate: f64,
    pub trace: Vec<TraceRow>,
    pub config: ChainConfig,
    pub block_size_m: usize,
}

impl PosteriorDraws {
    /// Wraps externally produced draws (e.g. read back from CSV).
    pub fn from_draws(draws: Vec<GevParams>, block_size_m: usize) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::Domain("no posterior draws".into()));
        }
        for d in &draws {
            d.validate()?;
        }
        Ok(PosteriorDraws {
            draws,
            accept_rate: f64::NAN,
            overall_accept_rate: f64::NAN,
            trace: Vec::new(),
            config: ChainConfig::default(),
            block_size_m,
        })
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn kappa_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.kappa).collect()
    }

    pub fn log_post_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.log_post).collect()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.gamma).collect()
    }

    pub fn mus(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.mu).collect()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.sigma).collect()
    }

    /// Writes the per-iteration trace as CSV.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.trace {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io("<trace>", e))?;
        Ok(())
    }

    pub fn write_trace_file(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_trace_csv(&mut buf)?;
        crate::output::write_atomic(path, &buf)
    }
}

/// Runs the sampler on the empirical-Bayes posterior, starting from the fit
/// the prior was centred on.
pub fn run_chain(
    sample: &BlockMaxSample,
    prior: &DataDependentPrior,
    config: &ChainConfig,
) -> Result<PosteriorDraws> {
    run_chain_from(sample, prior, prior.fit.theta_hat, config)
}

pub fn run_chain_from(
    sample: &BlockMaxSample,
    prior: &DataDependentPrior,
    init: GevParams,
    config: &ChainConfig,
) -> Result<PosteriorDraws> {
    let target = GevPosterior { sample, prior };
    let out = run_adaptive_chain(&target, init.to_vector(), config)?;
    Ok(PosteriorDraws {
        draws: out.retained.iter().map(GevParams::from_vector).collect(),
        accept_rate: out.accept_rate,
        overall_accept_rate: out.overall_accept_rate,
        trace: out.trace,
        config: *config,
        block_size_m: sample.block_size(),
    })
}
