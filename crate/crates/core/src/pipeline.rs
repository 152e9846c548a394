//! End-to-end fit: prior, chain, summaries, return levels and predictive
//! quantiles, written as plot-ready CSV/JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::estimators::FitMethod;
use crate::gev::{BlockMaxSample, GevParams};
use crate::ingest::AnnualMaxSeries;
use crate::output::{read_csv, write_csv, write_json};
use crate::posterior::{
    extreme_quantile_posterior, kernel_density, marginal, predictive_density, predictive_quantile,
    return_level_posterior, summarize, CredibleInterval, ScalarPosterior,
};
use crate::prior::build_prior;
use crate::sampler::{run_chain, PosteriorDraws};

pub const DRAW_COLUMNS: [&str; 3] = ["gamma", "mu", "sigma"];
pub const RETURN_CURVE_COLUMNS: [&str; 7] = [
    "period",
    "mean",
    "a_lower",
    "a_upper",
    "s_lower",
    "s_upper",
    "predictive",
];
pub const DENSITY_GRID_COLUMNS: [&str; 3] = ["quantity", "x", "density"];
pub const PREDICT_COLUMNS: [&str; 3] = ["period", "probability", "predictive_quantile"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl From<CredibleInterval> for Interval {
    fn from(c: CredibleInterval) -> Self {
        Interval {
            lower: c.lower,
            upper: c.upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantitySummary {
    pub name: String,
    pub mle: Option<f64>,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub a_ci: Interval,
    pub s_ci: Interval,
    /// Predictive quantile, for return levels.
    pub ppq: Option<f64>,
    pub tail_warning: bool,
}

fn quantity(
    sp: &ScalarPosterior,
    mle: Option<f64>,
    ppq: Option<f64>,
    alpha: f64,
) -> Result<QuantitySummary> {
    let a = sp.credible_interval_asymmetric(alpha)?;
    let s = sp.credible_interval_symmetric(alpha)?;
    Ok(QuantitySummary {
        name: sp.label.clone(),
        mle,
        mean: sp.mean(),
        sd: sp.sd(),
        median: sp.median(),
        tail_warning: a.tail_warning || s.tail_warning,
        a_ci: a.into(),
        s_ci: s.into(),
        ppq,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub source: String,
    pub k: usize,
    pub block_size: usize,
    pub seed: u64,
    pub alpha: f64,
    pub estimator: FitMethod,
    pub estimator_converged: bool,
    pub mle: GevParams,
    pub posterior_mean: GevParams,
    pub accept_rate: f64,
    pub n_draws: usize,
    /// Tail index, location, scale.
    pub parameters: Vec<QuantitySummary>,
    pub return_levels: Vec<ReturnLevelSummary>,
    pub extreme_quantiles: Vec<ExtremeQuantileSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnLevelSummary {
    pub period: f64,
    #[serde(flatten)]
    pub summary: QuantitySummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeQuantileSummary {
    pub p: f64,
    #[serde(flatten)]
    pub summary: QuantitySummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnCurveRow {
    pub period: f64,
    pub mean: f64,
    pub a_lower: f64,
    pub a_upper: f64,
    pub s_lower: f64,
    pub s_upper: f64,
    pub predictive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub quantity: String,
    pub x: f64,
    pub density: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrawRow {
    pub gamma: f64,
    pub mu: f64,
    pub sigma: f64,
}

/// Log-spaced return periods from 2 to 1000.
pub fn return_period_grid(n: usize) -> Vec<f64> {
    let (lo, hi) = (2f64.ln(), 1000f64.ln());
    (0..n)
        .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Everything the fit produces, before it is written out.
#[derive(Debug, Clone)]
pub struct FitOutputs {
    pub draws: PosteriorDraws,
    pub summary: FitSummary,
    pub return_curve: Vec<ReturnCurveRow>,
    pub density_grid: Vec<DensityRow>,
}

pub fn fit_sample(sample: &BlockMaxSample, config: &RunConfig) -> Result<FitOutputs> {
    config.validate()?;
    let alpha = config.output.alpha;
    let prior = build_prior(sample, config.prior)?;
    let chain = config.chain.with_seed(config.seed);
    let draws = run_chain(sample, &prior, &chain)?;
    let post = summarize(&draws, &[])?;
    let mle = prior.fit.theta_hat;

    let names = ["tail_index", "location", "scale"];
    let mle_v = [mle.gamma, mle.mu, mle.sigma];
    let mut parameters = Vec::new();
    for c in 0..3 {
        let mut sp = marginal(&draws, c)?;
        sp.label = names[c].to_string();
        parameters.push(quantity(&sp, Some(mle_v[c]), None, alpha)?);
    }

    let mut return_levels = Vec::new();
    for &t in &config.output.return_periods {
        let sp = return_level_posterior(&draws, t)?;
        let ppq = predictive_quantile(&draws, 1.0 / t)?;
        return_levels.push(ReturnLevelSummary {
            period: t,
            summary: quantity(&sp, Some(mle.quantile(1.0 / t)?), Some(ppq), alpha)?,
        });
    }
    let mut extreme_quantiles = Vec::new();
    for &p in &config.output.quantile_levels {
        let sp = extreme_quantile_posterior(&draws, p, None)?;
        extreme_quantiles.push(ExtremeQuantileSummary {
            p,
            summary: quantity(
                &sp,
                Some(mle.extreme_quantile(p, sample.block_size())?),
                None,
                alpha,
            )?,
        });
    }

    let mut return_curve = Vec::new();
    for t in return_period_grid(60) {
        let sp = return_level_posterior(&draws, t)?;
        let a = sp.credible_interval_asymmetric(alpha)?;
        let s = sp.credible_interval_symmetric(alpha)?;
        return_curve.push(ReturnCurveRow {
            period: t,
            mean: sp.mean(),
            a_lower: a.lower,
            a_upper: a.upper,
            s_lower: s.lower,
            s_upper: s.upper,
            predictive: predictive_quantile(&draws, 1.0 / t)?,
        });
    }

    let n = config.output.grid_points;
    let mut density_grid = Vec::new();
    for c in 0..3 {
        let v = marginal(&draws, c)?;
        let (lo, hi) = (v.quantile(0.0), v.quantile(1.0));
        let pad = 0.1 * (hi - lo).max(1e-12);
        let grid = linspace(lo - pad, hi + pad, n);
        for (x, d) in grid.iter().zip(kernel_density(&v.draws, &grid)) {
            density_grid.push(DensityRow {
                quantity: names[c].to_string(),
                x: *x,
                density: d,
            });
        }
    }
    let lo = predictive_quantile(&draws, 0.999)?.min(sample.min());
    let hi = predictive_quantile(&draws, 0.001)?.max(sample.max());
    for x in linspace(lo, hi, n) {
        density_grid.push(DensityRow {
            quantity: "predictive".into(),
            x,
            density: predictive_density(&draws, x),
        });
    }

    let summary = FitSummary {
        source: sample.label().to_string(),
        k: sample.len(),
        block_size: sample.block_size(),
        seed: config.seed,
        alpha,
        estimator: prior.fit.method,
        estimator_converged: prior.fit.converged,
        mle,
        posterior_mean: post.mean,
        accept_rate: draws.accept_rate,
        n_draws: draws.len(),
        parameters,
        return_levels,
        extreme_quantiles,
    };
    Ok(FitOutputs {
        draws,
        summary,
        return_curve,
        density_grid,
    })
}

pub fn fit_series(series: &AnnualMaxSeries, config: &RunConfig) -> Result<FitOutputs> {
    fit_sample(&series.to_sample(config.data.block_size)?, config)
}

#[derive(Debug, Clone)]
pub struct FitFiles {
    pub draws: PathBuf,
    pub summary: PathBuf,
    pub return_curve: PathBuf,
    pub density_grid: PathBuf,
    pub trace: PathBuf,
}

impl FitOutputs {
    pub fn write(&self, dir: &Path) -> Result<FitFiles> {
        let files = FitFiles {
            draws: dir.join("posterior_draws.csv"),
            summary: dir.join("summary.json"),
            return_curve: dir.join("return_curve.csv"),
            density_grid: dir.join("density_grid.csv"),
            trace: dir.join("trace.csv"),
        };
        write_draws(&files.draws, &self.draws)?;
        write_json(&files.summary, &self.summary)?;
        write_csv(
            &files.return_curve,
            &RETURN_CURVE_COLUMNS,
            &self.return_curve,
        )?;
        write_csv(
            &files.density_grid,
            &DENSITY_GRID_COLUMNS,
            &self.density_grid,
        )?;
        self.draws.write_trace_file(&files.trace)?;
        Ok(files)
    }
}

pub fn write_draws(path: &Path, draws: &PosteriorDraws) -> Result<()> {
    let rows: Vec<DrawRow> = draws
        .draws
        .iter()
        .map(|d| DrawRow {
            gamma: d.gamma,
            mu: d.mu,
            sigma: d.sigma,
        })
        .collect();
    write_csv(path, &DRAW_COLUMNS, &rows)
}

pub fn read_draws(path: &Path, block_size: usize) -> Result<PosteriorDraws> {
    let rows: Vec<DrawRow> = read_csv(path, &DRAW_COLUMNS)?;
    let draws = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            GevParams::new(r.gamma, r.mu, r.sigma).map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PosteriorDraws::from_draws(draws, block_size)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictRow {
    pub period: f64,
    pub probability: f64,
    pub predictive_quantile: f64,
}

/// Predictive `T`-period levels from stored draws.
pub fn predict(draws: &PosteriorDraws, periods: &[f64]) -> Result<Vec<PredictRow>> {
    periods
        .iter()
        .map(|&t| {
            if !(t > 1.0) {
                return Err(Error::Domain(format!(
                    "return period must exceed 1, got {t}"
                )));
            }
            Ok(PredictRow {
                period: t,
                probability: 1.0 / t,
                predictive_quantile: predictive_quantile(draws, 1.0 / t)?,
            })
        })
        .collect()
}
