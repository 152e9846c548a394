//! Thin wrappers over `statrs` for the handful of special functions the
//! inference code needs, plus precision-safe helpers for tail probabilities.

use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF, Normal, StudentsT};

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal parameters are valid")
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn normal_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Standard normal quantile `Φ^{-1}(p)`.
pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// `(1-p)`-quantile of the chi-square distribution with `df` degrees of freedom.
pub fn chi_square_quantile(df: f64, level: f64) -> f64 {
    ChiSquared::new(df)
        .expect("chi-square degrees of freedom must be positive")
        .inverse_cdf(level)
}

pub fn student_t_ln_pdf(nu: f64, x: f64) -> f64 {
    StudentsT::new(0.0, 1.0, nu)
        .expect("student-t degrees of freedom must be positive")
        .ln_pdf(x)
}

pub fn student_t_cdf(nu: f64, x: f64) -> f64 {
    StudentsT::new(0.0, 1.0, nu)
        .expect("student-t degrees of freedom must be positive")
        .cdf(x)
}

pub fn gamma_fn(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// `-log(1 - p_m)` where `p_m = 1 - (1 - p)^m`, i.e. `-m log1p(-p)`.
///
/// This is the only quantity the block-level quantile needs, so it never
/// forms `p_m` explicitly and keeps full precision for tiny `p·m`.
pub fn block_neg_log_level(p: f64, m: f64) -> f64 {
    -m * (-p).ln_1p()
}

/// `p_m = 1 - (1 - p)^m`, evaluated as `-expm1(m log1p(-p))`.
pub fn block_exceedance(p: f64, m: f64) -> f64 {
    -(m * (-p).ln_1p()).exp_m1()
}
