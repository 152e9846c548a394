//! The nine data-generating distributions of the simulation study and their
//! exact norming constants.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Endpoint, exponent and constant of the Power-law model
/// `F(x) = 1 - K (x* - x)^α`.
const POWER_LAW_END: f64 = 5.0;
const POWER_LAW_ALPHA: f64 = 3.0;
const POWER_LAW_K: f64 = 1.0 / 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrueModel {
    UnitFrechet,
    StandardPareto,
    HalfCauchy,
    Gumbel,
    Exponential,
    /// Shape 2, rate 2.
    Gamma,
    /// `F(x) = exp(-(-x)^3)` on `x ≤ 0`.
    ReverseWeibull,
    /// Beta(1, 3).
    Beta,
    PowerLaw,
}

impl TrueModel {
    pub const ALL: [TrueModel; 9] = [
        TrueModel::UnitFrechet,
        TrueModel::StandardPareto,
        TrueModel::HalfCauchy,
        TrueModel::Gumbel,
        TrueModel::Exponential,
        TrueModel::Gamma,
        TrueModel::ReverseWeibull,
        TrueModel::Beta,
        TrueModel::PowerLaw,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TrueModel::UnitFrechet => "unit-frechet",
            TrueModel::StandardPareto => "standard-pareto",
            TrueModel::HalfCauchy => "half-cauchy",
            TrueModel::Gumbel => "gumbel",
            TrueModel::Exponential => "exponential",
            TrueModel::Gamma => "gamma",
            TrueModel::ReverseWeibull => "reverse-weibull",
            TrueModel::Beta => "beta",
            TrueModel::PowerLaw => "power-law",
        }
    }

    /// Tail index of the domain of attraction.
    pub fn gamma0(&self) -> f64 {
        match self {
            TrueModel::UnitFrechet | TrueModel::StandardPareto | TrueModel::HalfCauchy => 1.0,
            TrueModel::Gumbel | TrueModel::Exponential | TrueModel::Gamma => 0.0,
            TrueModel::ReverseWeibull | TrueModel::Beta | TrueModel::PowerLaw => -1.0 / 3.0,
        }
    }

    /// Distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            TrueModel::UnitFrechet => {
                if x <= 0.0 {
                    0.0
                } else {
                    (-1.0 / x).exp()
                }
            }
            TrueModel::StandardPareto => {
                if x <= 1.0 {
                    0.0
                } else {
                    1.0 - 1.0 / x
                }
            }
            TrueModel::HalfCauchy => {
                if x <= 0.0 {
                    0.0
                } else {
                    2.0 / std::f64::consts::PI * x.atan()
                }
            }
            TrueModel::Gumbel => (-(-x).exp()).exp(),
            TrueModel::Exponential => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-x).exp_m1()
                }
            }
            TrueModel::Gamma => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma22_lower(2.0 * x)
                }
            }
            TrueModel::ReverseWeibull => {
                if x >= 0.0 {
                    1.0
                } else {
                    (-(-x).powi(3)).exp()
                }
            }
            TrueModel::Beta => {
                if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    1.0 - (1.0 - x).powi(3)
                }
            }
            TrueModel::PowerLaw => {
                let lower = POWER_LAW_END - (1.0 / POWER_LAW_K).powf(1.0 / POWER_LAW_ALPHA);
                if x <= lower {
                    0.0
                } else if x >= POWER_LAW_END {
                    1.0
                } else {
                    1.0 - POWER_LAW_K * (POWER_LAW_END - x).powf(POWER_LAW_ALPHA)
                }
            }
        }
    }

    /// Density, used by oracles in tests.
    pub fn density(&self, x: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            TrueModel::UnitFrechet if x > 0.0 => (-1.0 / x).exp() / (x * x),
            TrueModel::StandardPareto if x > 1.0 => 1.0 / (x * x),
            TrueModel::HalfCauchy if x > 0.0 => 2.0 / (PI * (1.0 + x * x)),
            TrueModel::Gumbel => (-x - (-x).exp()).exp(),
            TrueModel::Exponential if x > 0.0 => (-x).exp(),
            TrueModel::Gamma if x > 0.0 => 4.0 * x * (-2.0 * x).exp(),
            TrueModel::ReverseWeibull if x < 0.0 => 3.0 * x * x * (-(-x).powi(3)).exp(),
            TrueModel::Beta if x > 0.0 && x < 1.0 => 3.0 * (1.0 - x).powi(2),
            TrueModel::PowerLaw
                if x < POWER_LAW_END
                    && x > POWER_LAW_END - (1.0 / POWER_LAW_K).powf(1.0 / POWER_LAW_ALPHA) =>
            {
                POWER_LAW_K * POWER_LAW_ALPHA * (POWER_LAW_END - x).powf(POWER_LAW_ALPHA - 1.0)
            }
            _ => 0.0,
        }
    }

    /// Quantile at lower-tail probability `u`.
    pub fn quantile(&self, u: f64) -> f64 {
        if u >= 0.5 {
            return self.upper_quantile(1.0 - u);
        }
        match self {
            TrueModel::UnitFrechet => -1.0 / u.ln(),
            TrueModel::StandardPareto => 1.0 / (1.0 - u),
            TrueModel::HalfCauchy => (std::f64::consts::FRAC_PI_2 * u).tan(),
            TrueModel::Gumbel => -(-u.ln()).ln(),
            TrueModel::Exponential => -(-u).ln_1p(),
            TrueModel::Gamma => 0.5 * invert_gamma22_lower(u),
            TrueModel::ReverseWeibull => -(-u.ln()).cbrt(),
            TrueModel::Beta => 1.0 - (1.0 - u).cbrt(),
            TrueModel::PowerLaw => {
                POWER_LAW_END - ((1.0 - u) / POWER_LAW_K).powf(1.0 / POWER_LAW_ALPHA)
            }
        }
    }

    /// Quantile at upper-tail probability `s`, i.e. `F^{-1}(1 - s)`, with
    /// full precision for small `s`.
    pub fn upper_quantile(&self, s: f64) -> f64 {
        if s > 0.5 {
            return self.quantile(1.0 - s);
        }
        match self {
            TrueModel::UnitFrechet => -1.0 / (-s).ln_1p(),
            TrueModel::StandardPareto => 1.0 / s,
            TrueModel::HalfCauchy => 1.0 / (std::f64::consts::FRAC_PI_2 * s).tan(),
            TrueModel::Gumbel => -(-(-s).ln_1p()).ln(),
            TrueModel::Exponential => -s.ln(),
            TrueModel::Gamma => 0.5 * invert_gamma22_upper(s),
            TrueModel::ReverseWeibull => -(-(-s).ln_1p()).cbrt(),
            TrueModel::Beta => 1.0 - s.cbrt(),
            TrueModel::PowerLaw => POWER_LAW_END - (s / POWER_LAW_K).powf(1.0 / POWER_LAW_ALPHA),
        }
    }

    /// One draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            // sum of two rate-2 exponentials
            TrueModel::Gamma => {
                let u1: f64 = Open01.sample(rng);
                let u2: f64 = Open01.sample(rng);
                -0.5 * (u1.ln() + u2.ln())
            }
            _ => {
                let u: f64 = Open01.sample(rng);
                self.quantile(u)
            }
        }
    }

    /// `V(y) = F^{-1}(e^{-1/y})`.
    pub fn tail_quantile_function(&self, y: f64) -> f64 {
        self.upper_quantile(-(-1.0 / y).exp_m1())
    }

    /// `(b_{m,0}, a_{m,0}) = (V(m), m V'(m))`.
    ///
    /// `m V'(m)` is the derivative of `t ↦ V(e^t)` at `t = log m`; it is in
    /// closed form where that is tidy and a central difference (relative step
    /// 1e-6 in `log m`, checked against the halved step) otherwise.
    pub fn norming_constants(&self, m: usize) -> Result<(f64, f64)> {
        if m < 2 {
            return Err(Error::Domain(format!(
                "block size must be at least 2, got {m}"
            )));
        }
        let mf = m as f64;
        let b = self.tail_quantile_function(mf);
        let u = (-1.0 / mf).exp();
        let s = -(-1.0 / mf).exp_m1();
        let a = match self {
            TrueModel::UnitFrechet => mf,
            TrueModel::StandardPareto => u / (mf * s * s),
            TrueModel::Gumbel => 1.0,
            TrueModel::Exponential => u / (mf * s),
            TrueModel::PowerLaw => {
                (1.0 / POWER_LAW_ALPHA)
                    * (1.0 / POWER_LAW_K).powf(1.0 / POWER_LAW_ALPHA)
                    * s.powf(1.0 / POWER_LAW_ALPHA - 1.0)
                    * u
                    / mf
            }
            TrueModel::HalfCauchy
            | TrueModel::Gamma
            | TrueModel::ReverseWeibull
            | TrueModel::Beta => self.log_derivative_fd(mf)?,
        };
        Ok((b, a))
    }

    fn log_derivative_fd(&self, m: f64) -> Result<f64> {
        let t = m.ln();
        let diff = |h: f64| {
            (self.tail_quantile_function((t + h).exp())
                - self.tail_quantile_function((t - h).exp()))
                / (2.0 * h)
        };
        let mut h = 1e-6;
        for _ in 0..4 {
            let full = diff(h);
            let half = diff(h / 2.0);
            if full.is_finite() && (full - half).abs() <= 1e-6 * full.abs().max(1e-12) {
                return Ok(half);
            }
            h *= 10.0;
        }
        Err(Error::Numerical(format!(
            "finite-difference norming constant unstable for {} at m={m}",
            self.name()
        )))
    }

    /// True `(1-p)`-quantile of the block maximum of `m` draws,
    /// `F^{-1}((1-p)^{1/m})`.
    pub fn block_max_quantile(&self, p: f64, m: usize) -> f64 {
        self.upper_quantile(-((-p).ln_1p() / m as f64).exp_m1())
    }
}

impl fmt::Display for TrueModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrueModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        TrueModel::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .or(match key.as_str() {
                "frechet" => Some(TrueModel::UnitFrechet),
                "pareto" => Some(TrueModel::StandardPareto),
                "exp" => Some(TrueModel::Exponential),
                "weibull" => Some(TrueModel::ReverseWeibull),
                "powerlaw" => Some(TrueModel::PowerLaw),
                _ => None,
            })
            .ok_or_else(|| Error::Config(format!("unknown model '{s}'")))
    }
}

/// Lower CDF of Gamma(2, 1) at `t`: `1 - e^{-t}(1 + t)`.
fn gamma22_lower(t: f64) -> f64 {
    -(-t).exp_m1() - t * (-t).exp()
}

/// Solve `1 - e^{-t}(1+t) = u` for `t`, `u ≤ 1/2`.
fn invert_gamma22_lower(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    // P(t) ≈ t²/2 near zero
    let mut t = (2.0 * u).sqrt();
    let (mut lo, mut hi) = (0.0, 2.0);
    for _ in 0..100 {
        let f = gamma22_lower(t) - u;
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let df = t * (-t).exp();
        let mut next = t - f / df;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-15 * t.max(1e-300) {
            return next;
        }
        t = next;
    }
    t
}

/// Solve `e^{-t}(1+t) = s` for `t`, `s ≤ 1/2`, in log form
/// `-t + log1p(t) = log s`.
fn invert_gamma22_upper(s: f64) -> f64 {
    let target = s.ln();
    let mut t = -target + (1.0 - target).ln();
    let (mut lo, mut hi) = (0.0, t.max(1.0) * 4.0 + 10.0);
    for _ in 0..200 {
        let f = -t + t.ln_1p() - target;
        // f is decreasing in t
        if f > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let df = -t / (1.0 + t);
        let mut next = t - f / df;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-15 * t {
            return next;
        }
        t = next;
    }
    t
}
