//! Simulation study: posterior concentration and frequentist coverage of the
//! credible sets under known data-generating distributions.
//!
//! Each replication simulates `n = m·k` draws, keeps the `k` block maxima,
//! builds the data-dependent prior, runs the adaptive chain and checks every
//! credible set against the exact targets of the true model.

mod models;
pub mod tables;

use std::time::Instant;

use nalgebra::Vector3;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use models::TrueModel;

use crate::error::{Error, Result};
use crate::gev::BlockMaxSample;
use crate::posterior::{
    ellipsoid_region, extreme_quantile_posterior, marginal, return_level_posterior, ScalarPosterior,
};
use crate::prior::{build_prior, PriorKernels};
use crate::sampler::{run_chain, ChainConfig, PosteriorDraws};

/// Block sizes and block counts of the study, as `(m, k)`.
pub const DEFAULT_PAIRS: [(usize, usize); 4] = [(40, 20), (60, 30), (109, 50), (234, 100)];
/// Return period of the block-maximum return level under study.
pub const STUDY_RETURN_PERIOD: f64 = 100.0;
/// Tail probability of the extreme quantile of the parent distribution.
pub const STUDY_EXTREME_P: f64 = 0.001;
/// Constant `c` in `R(k) = exp(-c C_k²)`.
pub const RATE_CONSTANT: f64 = 0.01;
/// Abort a scenario when more than this fraction of replications fail.
pub const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioGrid {
    /// `(m, k)` pairs.
    pub pairs: Vec<(usize, usize)>,
    pub replications: usize,
    pub chain: ChainConfig,
    pub alpha: f64,
    pub master_seed: u64,
    pub kernels: PriorKernels,
}

impl Default for ScenarioGrid {
    fn default() -> Self {
        ScenarioGrid {
            pairs: DEFAULT_PAIRS.to_vec(),
            replications: 200,
            chain: ChainConfig::desk(),
            alpha: 0.05,
            master_seed: 20_240_601,
            kernels: PriorKernels::default(),
        }
    }
}

impl ScenarioGrid {
    pub fn validate(&self) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::Config("scenario grid has no (m, k) pairs".into()));
        }
        for &(m, k) in &self.pairs {
            if m < 2 || k < 3 {
                return Err(Error::Config(format!(
                    "invalid scenario (m={m}, k={k}): need m >= 2 and k >= 3"
                )));
            }
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        self.kernels
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.chain.validate()
    }
}

/// `k ≈ m / √log m`.
pub fn blocks_for_block_size(m: usize) -> f64 {
    let mf = m as f64;
    mf / mf.ln().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub c_k: f64,
    pub epsilon_k: f64,
    pub r_k: f64,
}

/// `C_k = (log k)²`, `ε_k = C_k/√k`, `R_k = exp(-0.01 C_k²)`.
pub fn epsilon_schedule(k: usize) -> Result<EpsilonSchedule> {
    if k < 2 {
        return Err(Error::Domain(format!("need k >= 2, got {k}")));
    }
    let kf = k as f64;
    let c_k = kf.ln().powi(2);
    Ok(EpsilonSchedule {
        c_k,
        epsilon_k: c_k / kf.sqrt(),
        r_k: (-RATE_CONSTANT * c_k * c_k).exp(),
    })
}

/// Draws `m·k` variates and returns the `k` block maxima.
pub fn generate_block_maxima<R: RngCore + ?Sized>(
    model: TrueModel,
    m: usize,
    k: usize,
    rng: &mut R,
) -> Result<BlockMaxSample> {
    if m == 0 || k == 0 {
        return Err(Error::Domain(format!("need m, k >= 1, got m={m}, k={k}")));
    }
    let maxima = (0..k)
        .map(|_| {
            (0..m)
                .map(|_| model.sample(rng))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    BlockMaxSample::new(maxima, m, format!("{model} m={m} k={k}"))
}

/// True `(γ0, b_{m,0}, a_{m,0})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueParams {
    pub gamma0: f64,
    pub b_m0: f64,
    pub a_m0: f64,
}

impl TrueParams {
    pub fn for_model(model: TrueModel, m: usize) -> Result<Self> {
        let (b_m0, a_m0) = model.norming_constants(m)?;
        Ok(TrueParams {
            gamma0: model.gamma0(),
            b_m0,
            a_m0,
        })
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.gamma0, self.b_m0, self.a_m0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationSummary {
    /// `max_i |γ_i - γ0|`
    pub gamma_norm: f64,
    /// `max_i |b_i - b_{m,0}| / a_{m,0}`
    pub b_norm: f64,
    /// `max_i |a_i / a_{m,0} - 1|`
    pub a_norm: f64,
    /// Proportion of draws whose rescaled Manhattan distance to the truth
    /// exceeds `ε_k`.
    pub p_tilde: f64,
    pub epsilon_k: f64,
    pub c_k: f64,
    pub r_k: f64,
}

pub fn concentration_summary(
    draws: &PosteriorDraws,
    truth: TrueParams,
    k: usize,
) -> Result<ConcentrationSummary> {
    if !(truth.a_m0 > 0.0) || !truth.b_m0.is_finite() || !truth.gamma0.is_finite() {
        return Err(Error::Domain(format!("invalid truth {truth:?}")));
    }
    if draws.is_empty() {
        return Err(Error::Domain("no posterior draws".into()));
    }
    let sched = epsilon_schedule(k)?;
    let mut out = ConcentrationSummary {
        gamma_norm: 0.0,
        b_norm: 0.0,
        a_norm: 0.0,
        p_tilde: 0.0,
        epsilon_k: sched.epsilon_k,
        c_k: sched.c_k,
        r_k: sched.r_k,
    };
    let mut exceed = 0usize;
    for d in &draws.draws {
        let dg = (d.gamma - truth.gamma0).abs();
        let db = ((d.mu - truth.b_m0) / truth.a_m0).abs();
        let da = (d.sigma / truth.a_m0 - 1.0).abs();
        out.gamma_norm = out.gamma_norm.max(dg);
        out.b_norm = out.b_norm.max(db);
        out.a_norm = out.a_norm.max(da);
        if dg + db + da > sched.epsilon_k {
            exceed += 1;
        }
    }
    out.p_tilde = exceed as f64 / draws.len() as f64;
    Ok(out)
}

/// Which credible sets covered their target in one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CoverageFlags {
    pub gamma0: bool,
    pub b_m0: bool,
    pub a_m0: bool,
    pub return_level: bool,
    pub extreme_quantile: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub replication: usize,
    pub symmetric: CoverageFlags,
    pub asymmetric: CoverageFlags,
    pub ellipsoid: bool,
    pub concentration: ConcentrationSummary,
    pub accept_rate: f64,
}

/// Stable per-scenario seed derived from the master seed.
pub fn scenario_seed(master_seed: u64, model: TrueModel, m: usize, k: usize) -> u64 {
    // FNV-1a over the scenario key, then one splitmix64 round
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in format!("{}/{m}/{k}", model.name()).bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = master_seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG of replication `r`: stream `r` of the scenario seed.
pub fn replication_rng(scenario_seed: u64, replication: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario_seed);
    rng.set_stream(replication as u64);
    rng
}

fn covers(sp: &ScalarPosterior, alpha: f64, truth: f64) -> Result<(bool, bool)> {
    Ok((
        sp.credible_interval_symmetric(alpha)?.contains(truth),
        sp.credible_interval_asymmetric(alpha)?.contains(truth),
    ))
}

/// Runs replication `r` of scenario `(model, m, k)`; reproducible in
/// isolation.
pub fn run_replication(
    model: TrueModel,
    m: usize,
    k: usize,
    replication: usize,
    grid: &ScenarioGrid,
) -> Result<ReplicationOutcome> {
    let seed = scenario_seed(grid.master_seed, model, m, k);
    let mut rng = replication_rng(seed, replication);
    let sample = generate_block_maxima(model, m, k, &mut rng)?;
    let chain_cfg = grid.chain.with_seed(rng.next_u64());
    let prior = build_prior(&sample, grid.kernels)?;
    let draws = run_chain(&sample, &prior, &chain_cfg)?;
    evaluate_replication(model, m, k, replication, &draws, grid.alpha)
}

/// Scores one set of draws against the true model.
pub fn evaluate_replication(
    model: TrueModel,
    m: usize,
    k: usize,
    replication: usize,
    draws: &PosteriorDraws,
    alpha: f64,
) -> Result<ReplicationOutcome> {
    let truth = TrueParams::for_model(model, m)?;
    let q_block = model.block_max_quantile(1.0 / STUDY_RETURN_PERIOD, m);
    let q_parent = model.upper_quantile(STUDY_EXTREME_P);

    let targets = [
        (marginal(draws, 0)?, truth.gamma0),
        (marginal(draws, 1)?, truth.b_m0),
        (marginal(draws, 2)?, truth.a_m0),
        (return_level_posterior(draws, STUDY_RETURN_PERIOD)?, q_block),
        (
            extreme_quantile_posterior(draws, STUDY_EXTREME_P, Some(m))?,
            q_parent,
        ),
    ];
    let mut flags = [(false, false); 5];
    for (slot, (sp, t)) in flags.iter_mut().zip(&targets) {
        *slot = covers(sp, alpha, *t)?;
    }
    let pick = |f: fn(&(bool, bool)) -> bool| CoverageFlags {
        gamma0: f(&flags[0]),
        b_m0: f(&flags[1]),
        a_m0: f(&flags[2]),
        return_level: f(&flags[3]),
        extreme_quantile: f(&flags[4]),
    };
    let ellipsoid = ellipsoid_region(draws, alpha)?.contains(&truth.to_vector());
    Ok(ReplicationOutcome {
        replication,
        symmetric: pick(|f| f.0),
        asymmetric: pick(|f| f.1),
        ellipsoid,
        concentration: concentration_summary(draws, truth, k)?,
        accept_rate: draws.accept_rate,
    })
}

/// Coverage percentages for one interval type.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CoverageRow {
    pub gamma0: f64,
    pub b_m0: f64,
    pub a_m0: f64,
    pub return_level: f64,
    pub extreme_quantile: f64,
}

impl CoverageRow {
    fn from_flags<'a>(flags: impl Iterator<Item = &'a CoverageFlags>) -> Self {
        let mut n = 0usize;
        let mut counts = [0usize; 5];
        for f in flags {
            n += 1;
            for (c, hit) in counts.iter_mut().zip([
                f.gamma0,
                f.b_m0,
                f.a_m0,
                f.return_level,
                f.extreme_quantile,
            ]) {
                *c += hit as usize;
            }
        }
        let pct = |c: usize| 100.0 * c as f64 / n.max(1) as f64;
        CoverageRow {
            gamma0: pct(counts[0]),
            b_m0: pct(counts[1]),
            a_m0: pct(counts[2]),
            return_level: pct(counts[3]),
            extreme_quantile: pct(counts[4]),
        }
    }

    pub fn values(&self) -> [f64; 5] {
        [
            self.gamma0,
            self.b_m0,
            self.a_m0,
            self.return_level,
            self.extreme_quantile,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub model: TrueModel,
    pub m: usize,
    pub k: usize,
    pub seed: u64,
    pub truth: TrueParams,
    pub schedule: EpsilonSchedule,
    /// Successful replications.
    pub replications: usize,
    pub failures: usize,
    pub failure_messages: Vec<String>,
    pub symmetric: CoverageRow,
    pub asymmetric: CoverageRow,
    /// Ellipsoid coverage in percent.
    pub ellipsoid: f64,
    /// Percentage of replications with `p̃ < R_k`.
    pub p_k: f64,
    pub mean_accept_rate: f64,
    pub outcomes: Vec<ReplicationOutcome>,
    pub seconds: f64,
}

/// Runs all replications of one `(model, m, k)` scenario in parallel.
pub fn run_scenario(
    model: TrueModel,
    m: usize,
    k: usize,
    grid: &ScenarioGrid,
) -> Result<ScenarioResult> {
    grid.validate()?;
    let started = Instant::now();
    let seed = scenario_seed(grid.master_seed, model, m, k);
    let results: Vec<Result<ReplicationOutcome>> = (0..grid.replications)
        .into_par_iter()
        .map(|r| run_replication(model, m, k, r, grid))
        .collect();

    let mut outcomes = Vec::with_capacity(results.len());
    let mut failure_messages = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(o) => outcomes.push(o),
            Err(e) => failure_messages.push(format!("replication {r}: {e}")),
        }
    }
    let failures = failure_messages.len();
    let scenario = format!("{model} m={m} k={k}");
    if failures as f64 > MAX_FAILURE_RATE * grid.replications as f64 {
        return Err(Error::Scenario {
            scenario,
            message: format!(
                "{failures} of {} replications failed; first failures: {}",
                grid.replications,
                failure_messages
                    .iter()
                    .take(3)
                    .cloned()
                    .collect::<Vec<_>>()
                    .join("; ")
            ),
        });
    }
    if outcomes.is_empty() {
        return Err(Error::Scenario {
            scenario,
            message: "no successful replications".into(),
        });
    }

    let n = outcomes.len() as f64;
    let schedule = epsilon_schedule(k)?;
    Ok(ScenarioResult {
        model,
        m,
        k,
        seed,
        truth: TrueParams::for_model(model, m)?,
        schedule,
        replications: outcomes.len(),
        failures,
        failure_messages,
        symmetric: CoverageRow::from_flags(outcomes.iter().map(|o| &o.symmetric)),
        asymmetric: CoverageRow::from_flags(outcomes.iter().map(|o| &o.asymmetric)),
        ellipsoid: 100.0 * outcomes.iter().filter(|o| o.ellipsoid).count() as f64 / n,
        p_k: 100.0
            * outcomes
                .iter()
                .filter(|o| o.concentration.p_tilde < schedule.r_k)
                .count() as f64
            / n,
        mean_accept_rate: outcomes.iter().map(|o| o.accept_rate).sum::<f64>() / n,
        outcomes,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Every `(m, k)` pair of the grid for one model; one failing scenario does
/// not stop the others.
pub fn coverage_study(model: TrueModel, grid: &ScenarioGrid) -> Vec<Result<ScenarioResult>> {
    grid.pairs
        .iter()
        .map(|&(m, k)| run_scenario(model, m, k, grid))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gev::GevParams;
    use approx::assert_relative_eq;

    #[test]
    fn schedule_table_values() {
        let expect = [
            (20, 8.97, 2.01, 0.447),
            (30, 11.57, 2.11, 0.262),
            (50, 15.30, 2.16, 0.096),
            (100, 21.21, 2.12, 0.011),
        ];
        for (k, c, e, r) in expect {
            let s = epsilon_schedule(k).unwrap();
            assert!((s.c_k - c).abs() < 0.005, "k={k} C={}", s.c_k);
            assert!((s.epsilon_k - e).abs() < 0.005, "k={k} eps={}", s.epsilon_k);
            assert!((s.r_k - r).abs() < 0.0005, "k={k} R={}", s.r_k);
        }
        assert!(epsilon_schedule(1).is_err());
    }

    #[test]
    fn unit_block_returns_raw_sample() {
        let mut a = replication_rng(7, 0);
        let mut b = replication_rng(7, 0);
        let s = generate_block_maxima(TrueModel::Exponential, 1, 25, &mut a).unwrap();
        let raw: Vec<f64> = (0..25)
            .map(|_| TrueModel::Exponential.sample(&mut b))
            .collect();
        assert_eq!(s.maxima(), raw.as_slice());
    }

    #[test]
    fn maxima_dominate_block_medians() {
        let mut a = replication_rng(3, 1);
        let mut b = replication_rng(3, 1);
        let s = generate_block_maxima(TrueModel::Gamma, 9, 30, &mut a).unwrap();
        for &mx in s.maxima() {
            let mut block: Vec<f64> = (0..9).map(|_| TrueModel::Gamma.sample(&mut b)).collect();
            block.sort_by(|x, y| x.total_cmp(y));
            assert!(mx >= block[4]);
            assert_eq!(mx, block[8]);
        }
    }

    fn draws_at(points: &[(f64, f64, f64)]) -> PosteriorDraws {
        PosteriorDraws::from_draws(
            points
                .iter()
                .map(|&(g, m, s)| GevParams::new(g, m, s).unwrap())
                .collect(),
            10,
        )
        .unwrap()
    }

    #[test]
    fn concentration_at_truth_is_zero() {
        let truth = TrueParams {
            gamma0: 0.5,
            b_m0: 10.0,
            a_m0: 2.0,
        };
        let d = draws_at(&[(0.5, 10.0, 2.0); 5]);
        let c = concentration_summary(&d, truth, 20).unwrap();
        assert_eq!(
            (c.gamma_norm, c.b_norm, c.a_norm, c.p_tilde),
            (0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn concentration_single_outlier() {
        let truth = TrueParams {
            gamma0: 0.5,
            b_m0: 10.0,
            a_m0: 2.0,
        };
        let d = draws_at(&[(3.5, 10.0, 2.0)]);
        let c = concentration_summary(&d, truth, 20).unwrap();
        assert_relative_eq!(c.gamma_norm, 3.0);
        assert_eq!(c.p_tilde, 1.0);
        let bad = TrueParams { a_m0: 0.0, ..truth };
        assert!(concentration_summary(&d, bad, 20).is_err());
    }

    #[test]
    fn replication_is_reproducible_in_isolation() {
        let grid = ScenarioGrid {
            chain: ChainConfig {
                n_iter: 2_000,
                burn_in: 1_000,
                ..ChainConfig::desk()
            },
            replications: 3,
            ..ScenarioGrid::default()
        };
        let a = run_replication(TrueModel::HalfCauchy, 40, 20, 2, &grid).unwrap();
        let b = run_replication(TrueModel::HalfCauchy, 40, 20, 2, &grid).unwrap();
        assert_eq!(a, b);
        let c = run_replication(TrueModel::HalfCauchy, 40, 20, 1, &grid).unwrap();
        assert_ne!(a.concentration, c.concentration);
    }

    #[test]
    fn block_count_schedule() {
        assert_relative_eq!(blocks_for_block_size(40), 40.0 / 40f64.ln().sqrt());
        assert!((blocks_for_block_size(40) - 20.8).abs() < 0.05);
    }
}
