//! Empirical-Bayes inference for block maxima.
//!
//! The data are `k` block maxima modelled as GEV. A data-dependent prior is
//! centred on a classical fit (ML, with PWM as fallback), an adaptive
//! random-walk Metropolis-Hastings chain samples the resulting posterior, and
//! the draws are turned into credible intervals, credible ellipsoids, return
//! levels and posterior predictive quantiles.
//!
//! ```no_run
//! use ebgev::{build_prior, run_chain, BlockMaxSample, ChainConfig, PriorKernels};
//!
//! let sample = BlockMaxSample::new(vec![3.1, 4.7, 2.2, 5.9, 3.3, 4.0], 1, "demo")?;
//! let prior = build_prior(&sample, PriorKernels::default())?;
//! let draws = run_chain(&sample, &prior, &ChainConfig::short().with_seed(7))?;
//! let rl = ebgev::return_level_posterior(&draws, 50.0)?;
//! println!("{:?}", rl.credible_interval_asymmetric(0.05)?);
//! # Ok::<(), ebgev::Error>(())
//! ```

pub mod config;
pub mod error;
pub mod estimators;
pub mod gev;
pub mod ingest;
pub mod output;
pub mod pipeline;
pub mod posterior;
pub mod prior;
pub mod sampler;
pub mod simstudy;
pub mod special;

pub use config::{RunConfig, StudyConfig};
pub use error::{Error, Result};
pub use estimators::{ml_fit, pwm_fit, FitMethod, FitResult};
pub use gev::{
    fisher_info_monte_carlo, fisher_info_numeric, log_likelihood, score_process, BlockMaxSample,
    GevParams, GevSupport,
};
pub use ingest::{annual_maxima, parse_hurdat, read_series_csv, AnnualMaxSeries, TrackRecord};
pub use posterior::{
    ellipsoid_region, extreme_quantile_posterior, marginal, predictive_cdf, predictive_density,
    predictive_quantile, return_level_posterior, summarize, CredibleInterval, EllipsoidRegion,
    IntervalKind, PosteriorSummary, ScalarPosterior,
};
pub use prior::{build_prior, DataDependentPrior, PriorKernels};
pub use sampler::{
    run_adaptive_chain, run_chain, run_chain_from, ChainConfig, LogTarget, PosteriorDraws,
};
pub use simstudy::{
    concentration_summary, coverage_study, epsilon_schedule, generate_block_maxima,
    ConcentrationSummary, EpsilonSchedule, ScenarioGrid, TrueModel,
};
