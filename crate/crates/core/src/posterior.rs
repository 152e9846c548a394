//! Functionals of the posterior draws: summaries, credible sets, return-level
//! and extreme-quantile posteriors, and the posterior predictive.
//!
//! Empirical quantiles use the type-7 rule (linear interpolation between
//! order statistics at position `(N-1)p`). Following the usual extreme-value
//! notation, `Q(p)` denotes the `(1-p)`-quantile of a distribution; interval
//! endpoints are nonetheless always reported in ascending order.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gev::GevParams;
use crate::sampler::PosteriorDraws;
use crate::special::{chi_square_quantile, normal_quantile};

/// Type-7 empirical quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted_copy(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

/// Posterior mean, covariance and marginal quantiles of `(γ, μ, σ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean: GevParams,
    pub sd: [f64; 3],
    pub cov: [[f64; 3]; 3],
    /// `(p, [q_γ, q_μ, q_σ])` for each requested probability.
    pub quantiles: Vec<(f64, [f64; 3])>,
}

impl PosteriorSummary {
    pub fn cov_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.cov[i][j])
    }
}

pub fn summarize(draws: &PosteriorDraws, probs: &[f64]) -> Result<PosteriorSummary> {
    if draws.len() < 2 {
        return Err(Error::Domain("need at least two draws to summarize".into()));
    }
    let n = draws.len() as f64;
    let pts: Vec<Vector3<f64>> = draws.draws.iter().map(GevParams::to_vector).collect();
    let m = pts.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let cov = pts
        .iter()
        .fold(Matrix3::zeros(), |a, p| a + (p - m) * (p - m).transpose())
        / (n - 1.0);
    let cols = [
        sorted_copy(&draws.gammas()),
        sorted_copy(&draws.mus()),
        sorted_copy(&draws.sigmas()),
    ];
    let quantiles = probs
        .iter()
        .map(|&p| (p, [0, 1, 2].map(|c| quantile_sorted(&cols[c], p))))
        .collect();
    Ok(PosteriorSummary {
        mean: GevParams::from_vector(&m),
        sd: [0, 1, 2].map(|i| cov[(i, i)].max(0.0).sqrt()),
        cov: [0, 1, 2].map(|i| [0, 1, 2].map(|j| cov[(i, j)])),
        quantiles,
    })
}

/// Draws of a scalar functional of `θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarPosterior {
    pub draws: Vec<f64>,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    AsymmetricQuantile,
    SymmetricNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CredibleInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub kind: IntervalKind,
    /// Set when `N·α/2 < 1`, so the endpoints are extreme order statistics.
    pub tail_warning: bool,
}

impl CredibleInterval {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

impl ScalarPosterior {
    pub fn new(draws: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if draws.len() < 2 {
            return Err(Error::Domain(
                "a scalar posterior needs at least two draws".into(),
            ));
        }
        if let Some(bad) = draws.iter().find(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite posterior draw {bad}")));
        }
        Ok(ScalarPosterior {
            draws,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.draws)
    }

    pub fn sd(&self) -> f64 {
        sample_sd(&self.draws)
    }

    /// Type-7 empirical `p`-quantile (ordinary lower-tail convention).
    pub fn quantile(&self, p: f64) -> f64 {
        quantile_sorted(&sorted_copy(&self.draws), p)
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    /// Central `(1-α)` interval between the empirical `α/2` and `1-α/2`
    /// quantiles.
    pub fn credible_interval_asymmetric(&self, alpha: f64) -> Result<CredibleInterval> {
        check_alpha(alpha)?;
        let sorted = sorted_copy(&self.draws);
        Ok(CredibleInterval {
            lower: quantile_sorted(&sorted, alpha / 2.0),
            upper: quantile_sorted(&sorted, 1.0 - alpha / 2.0),
            level: 1.0 - alpha,
            kind: IntervalKind::AsymmetricQuantile,
            tail_warning: (self.len() as f64) * alpha / 2.0 < 1.0,
        })
    }

    /// `mean ± z_{α/2}·sd` with `z_{α/2} = Φ^{-1}(1 - α/2)`.
    pub fn credible_interval_symmetric(&self, alpha: f64) -> Result<CredibleInterval> {
        check_alpha(alpha)?;
        let z = normal_quantile(1.0 - alpha / 2.0);
        let (m, s) = (self.mean(), self.sd());
        Ok(CredibleInterval {
            lower: m - z * s,
            upper: m + z * s,
            level: 1.0 - alpha,
            kind: IntervalKind::SymmetricNormal,
            tail_warning: false,
        })
    }
}

/// Marginal posterior of one coordinate (0 = γ, 1 = μ, 2 = σ).
pub fn marginal(draws: &PosteriorDraws, coord: usize) -> Result<ScalarPosterior> {
    let (values, label) = match coord {
        0 => (draws.gammas(), "gamma"),
        1 => (draws.mus(), "mu"),
        2 => (draws.sigmas(), "sigma"),
        _ => return Err(Error::Domain(format!("no coordinate {coord}"))),
    };
    ScalarPosterior::new(values, label)
}

/// Normal-approximation credible ellipsoid
/// `E = μ̂ + Σ̂^{1/2} B(0, √χ²_{3,1-α})`.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidRegion {
    pub center: Vector3<f64>,
    pub cov_sqrt: Matrix3<f64>,
    inv_sqrt: Matrix3<f64>,
    pub radius: f64,
    pub level: f64,
}

impl EllipsoidRegion {
    pub fn from_moments(center: Vector3<f64>, cov: Matrix3<f64>, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let sym = (cov + cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let max_ev = eig.eigenvalues.amax();
        let min_ev = eig.eigenvalues.min();
        if !(max_ev > 0.0) || !(min_ev > max_ev * 1e-14) {
            return Err(Error::Region(format!(
                "posterior covariance is singular (eigenvalues {:?})",
                eig.eigenvalues.as_slice()
            )));
        }
        let q = eig.eigenvectors;
        let sqrt_d = Matrix3::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
        let inv_sqrt_d = Matrix3::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
        Ok(EllipsoidRegion {
            center,
            cov_sqrt: q * sqrt_d * q.transpose(),
            inv_sqrt: q * inv_sqrt_d * q.transpose(),
            radius: chi_square_quantile(3.0, 1.0 - alpha).sqrt(),
            level: 1.0 - alpha,
        })
    }

    /// `‖Σ̂^{-1/2}(θ - μ̂)‖₂`.
    pub fn standardized_distance(&self, theta: &Vector3<f64>) -> f64 {
        (self.inv_sqrt * (theta - self.center)).norm()
    }

    pub fn contains(&self, theta: &Vector3<f64>) -> bool {
        self.standardized_distance(theta) <= self.radius
    }
}

pub fn ellipsoid_region(draws: &PosteriorDraws, alpha: f64) -> Result<EllipsoidRegion> {
    let s = summarize(draws, &[])?;
    EllipsoidRegion::from_moments(s.mean.to_vector(), s.cov_matrix(), alpha)
}

/// Posterior of the `T`-block return level `Q_{G_θ}(1/T)`.
pub fn return_level_posterior(draws: &PosteriorDraws, period: f64) -> Result<ScalarPosterior> {
    if !(period > 1.0) || !period.is_finite() {
        return Err(Error::Domain(format!(
            "return period must exceed 1, got {period}"
        )));
    }
    let p = 1.0 / period;
    ScalarPosterior::new(
        draws
            .draws
            .iter()
            .map(|d| d.quantile_unchecked(p))
            .collect(),
        format!("return_level_T{period}"),
    )
}

/// Posterior of the approximate `(1-p)`-quantile of the parent distribution,
/// using the draws' block size unless `m` is given.
pub fn extreme_quantile_posterior(
    draws: &PosteriorDraws,
    p: f64,
    m: Option<usize>,
) -> Result<ScalarPosterior> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "probability must lie in (0, 1), got {p}"
        )));
    }
    let m = m.unwrap_or(draws.block_size_m);
    if m == 0 {
        return Err(Error::Domain("block size must be at least 1".into()));
    }
    ScalarPosterior::new(
        draws
            .draws
            .iter()
            .map(|d| d.extreme_quantile_unchecked(p, m))
            .collect(),
        format!("extreme_quantile_p{p}_m{m}"),
    )
}

/// Monte Carlo posterior predictive distribution function
/// `N^{-1} Σ G_{θ_i}(x)`.
pub fn predictive_cdf(draws: &PosteriorDraws, x: f64) -> f64 {
    let sum: f64 = draws.draws.iter().map(|d| d.cdf_unchecked(x)).sum();
    (sum / draws.len() as f64).clamp(0.0, 1.0)
}

/// Monte Carlo posterior predictive density `N^{-1} Σ g_{θ_i}(x)`.
pub fn predictive_density(draws: &PosteriorDraws, x: f64) -> f64 {
    if !x.is_finite() {
        return 0.0;
    }
    let sum: f64 = draws
        .draws
        .iter()
        .map(|d| d.log_density_unchecked(x).exp())
        .sum();
    sum / draws.len() as f64
}

/// Predictive `(1-p)`-quantile, by bisection on [`predictive_cdf`] between
/// the smallest and largest drawwise quantiles.
pub fn predictive_quantile(draws: &PosteriorDraws, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "probability must lie in (0, 1), got {p}"
        )));
    }
    if draws.is_empty() {
        return Err(Error::Domain("no posterior draws".into()));
    }
    let target = 1.0 - p;
    let (mut lo, mut hi) = draws
        .draws
        .iter()
        .map(|d| d.quantile_unchecked(p))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), q| {
            (a.min(q), b.max(q))
        });
    if lo == hi {
        return Ok(lo);
    }
    let f_lo = predictive_cdf(draws, lo);
    let f_hi = predictive_cdf(draws, hi);
    if !(f_lo <= target + 1e-12 && f_hi >= target - 1e-12) {
        return Err(Error::Numerical(format!(
            "predictive quantile bracket failed: F({lo})={f_lo}, F({hi})={f_hi}, target {target}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = predictive_cdf(draws, mid);
        if (f - target).abs() <= 1e-13 {
            return Ok(mid);
        }
        if f < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Gaussian kernel density estimate with Silverman's rule-of-thumb
/// bandwidth, evaluated on `grid`.
pub fn kernel_density(values: &[f64], grid: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let sorted = sorted_copy(values);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = sample_sd(values).min(iqr / 1.34);
    let spread = if spread > 0.0 {
        spread
    } else {
        sample_sd(values)
    };
    let bw = 0.9 * spread * n.powf(-0.2);
    if !(bw > 0.0) {
        return vec![0.0; grid.len()];
    }
    let norm = 1.0 / (n * bw * (2.0 * std::f64::consts::PI).sqrt());
    grid.iter()
        .map(|&x| {
            values
                .iter()
                .map(|&v| {
                    let u = (x - v) / bw;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect()
}
