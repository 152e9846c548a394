//! CSV layouts of the study tables and the JSON run manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ScenarioGrid, ScenarioResult, TrueModel};
use crate::error::Result;
use crate::output::{write_csv, write_json};

pub const CONCENTRATION_COLUMNS: [&str; 14] = [
    "model",
    "m",
    "k",
    "c_k",
    "epsilon_k",
    "r_k",
    "b_m0",
    "a_m0",
    "gamma_norm",
    "b_norm",
    "a_norm",
    "p_tilde",
    "p_k",
    "replications",
];

pub const COVERAGE_COLUMNS: [&str; 10] = [
    "model",
    "m",
    "k",
    "interval",
    "gamma0",
    "b_m0",
    "a_m0",
    "q_block_0.01",
    "q_parent_0.001",
    "ellipsoid",
];

pub const REPLICATION_COLUMNS: [&str; 19] = [
    "model",
    "m",
    "k",
    "replication",
    "s_gamma0",
    "s_b_m0",
    "s_a_m0",
    "s_return_level",
    "s_extreme_quantile",
    "a_gamma0",
    "a_b_m0",
    "a_a_m0",
    "a_return_level",
    "a_extreme_quantile",
    "ellipsoid",
    "gamma_norm",
    "b_norm",
    "a_norm",
    "p_tilde",
];

/// One row of the concentration table; norms are averaged over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub model: TrueModel,
    pub m: usize,
    pub k: usize,
    pub c_k: f64,
    pub epsilon_k: f64,
    pub r_k: f64,
    pub b_m0: f64,
    pub a_m0: f64,
    pub gamma_norm: f64,
    pub b_norm: f64,
    pub a_norm: f64,
    pub p_tilde: f64,
    pub p_k: f64,
    pub replications: usize,
}

impl ConcentrationRow {
    pub fn from_result(r: &ScenarioResult) -> Self {
        let n = r.outcomes.len().max(1) as f64;
        let avg = |f: fn(&super::ConcentrationSummary) -> f64| {
            r.outcomes.iter().map(|o| f(&o.concentration)).sum::<f64>() / n
        };
        ConcentrationRow {
            model: r.model,
            m: r.m,
            k: r.k,
            c_k: r.schedule.c_k,
            epsilon_k: r.schedule.epsilon_k,
            r_k: r.schedule.r_k,
            b_m0: r.truth.b_m0,
            a_m0: r.truth.a_m0,
            gamma_norm: avg(|c| c.gamma_norm),
            b_norm: avg(|c| c.b_norm),
            a_norm: avg(|c| c.a_norm),
            p_tilde: avg(|c| c.p_tilde),
            p_k: r.p_k,
            replications: r.replications,
        }
    }
}

/// One row of the coverage table. The ellipsoid column is left empty on the
/// asymmetric row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageTableRow {
    pub model: TrueModel,
    pub m: usize,
    pub k: usize,
    pub interval: String,
    pub gamma0: f64,
    pub b_m0: f64,
    pub a_m0: f64,
    pub q_block: f64,
    pub q_parent: f64,
    pub ellipsoid: Option<f64>,
}

impl CoverageTableRow {
    pub fn from_result(r: &ScenarioResult) -> [Self; 2] {
        let row = |interval: &str, c: &super::CoverageRow, ell: Option<f64>| CoverageTableRow {
            model: r.model,
            m: r.m,
            k: r.k,
            interval: interval.to_string(),
            gamma0: c.gamma0,
            b_m0: c.b_m0,
            a_m0: c.a_m0,
            q_block: c.return_level,
            q_parent: c.extreme_quantile,
            ellipsoid: ell,
        };
        [
            row("S", &r.symmetric, Some(r.ellipsoid)),
            row("A", &r.asymmetric, None),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub model: TrueModel,
    pub m: usize,
    pub k: usize,
    pub replication: usize,
    pub s_gamma0: bool,
    pub s_b_m0: bool,
    pub s_a_m0: bool,
    pub s_return_level: bool,
    pub s_extreme_quantile: bool,
    pub a_gamma0: bool,
    pub a_b_m0: bool,
    pub a_a_m0: bool,
    pub a_return_level: bool,
    pub a_extreme_quantile: bool,
    pub ellipsoid: bool,
    pub gamma_norm: f64,
    pub b_norm: f64,
    pub a_norm: f64,
    pub p_tilde: f64,
}

fn replication_rows(r: &ScenarioResult) -> Vec<ReplicationRow> {
    r.outcomes
        .iter()
        .map(|o| ReplicationRow {
            model: r.model,
            m: r.m,
            k: r.k,
            replication: o.replication,
            s_gamma0: o.symmetric.gamma0,
            s_b_m0: o.symmetric.b_m0,
            s_a_m0: o.symmetric.a_m0,
            s_return_level: o.symmetric.return_level,
            s_extreme_quantile: o.symmetric.extreme_quantile,
            a_gamma0: o.asymmetric.gamma0,
            a_b_m0: o.asymmetric.b_m0,
            a_a_m0: o.asymmetric.a_m0,
            a_return_level: o.asymmetric.return_level,
            a_extreme_quantile: o.asymmetric.extreme_quantile,
            ellipsoid: o.ellipsoid,
            gamma_norm: o.concentration.gamma_norm,
            b_norm: o.concentration.b_norm,
            a_norm: o.concentration.a_norm,
            p_tilde: o.concentration.p_tilde,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioManifest {
    pub model: TrueModel,
    pub m: usize,
    pub k: usize,
    pub seed: u64,
    pub status: String,
    pub replications: usize,
    pub failures: usize,
    pub failure_messages: Vec<String>,
    pub mean_accept_rate: Option<f64>,
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub crate_version: String,
    pub grid: ScenarioGrid,
    pub models: Vec<TrueModel>,
    pub scenarios: Vec<ScenarioManifest>,
    pub total_seconds: f64,
}

/// Files written by [`write_study`].
#[derive(Debug, Clone)]
pub struct StudyFiles {
    pub concentration: PathBuf,
    pub coverage: PathBuf,
    pub replications: PathBuf,
    pub manifest: PathBuf,
}

/// Writes both tables, the per-replication table and the manifest into
/// `dir`. Failed scenarios appear only in the manifest.
pub fn write_study(
    dir: &Path,
    grid: &ScenarioGrid,
    models: &[TrueModel],
    results: &[(TrueModel, usize, usize, Result<ScenarioResult>)],
    total_seconds: f64,
) -> Result<StudyFiles> {
    let mut conc = Vec::new();
    let mut cov = Vec::new();
    let mut reps = Vec::new();
    let mut scenarios = Vec::new();
    for (model, m, k, res) in results {
        let seed = super::scenario_seed(grid.master_seed, *model, *m, *k);
        match res {
            Ok(r) => {
                conc.push(ConcentrationRow::from_result(r));
                cov.extend(CoverageTableRow::from_result(r));
                reps.extend(replication_rows(r));
                scenarios.push(ScenarioManifest {
                    model: *model,
                    m: *m,
                    k: *k,
                    seed,
                    status: "ok".into(),
                    replications: r.replications,
                    failures: r.failures,
                    failure_messages: r.failure_messages.clone(),
                    mean_accept_rate: Some(r.mean_accept_rate),
                    seconds: Some(r.seconds),
                });
            }
            Err(e) => scenarios.push(ScenarioManifest {
                model: *model,
                m: *m,
                k: *k,
                seed,
                status: "aborted".into(),
                replications: 0,
                failures: grid.replications,
                failure_messages: vec![e.to_string()],
                mean_accept_rate: None,
                seconds: None,
            }),
        }
    }
    let files = StudyFiles {
        concentration: dir.join("concentration.csv"),
        coverage: dir.join("coverage.csv"),
        replications: dir.join("replications.csv"),
        manifest: dir.join("manifest.json"),
    };
    write_csv(&files.concentration, &CONCENTRATION_COLUMNS, &conc)?;
    write_csv(&files.coverage, &COVERAGE_COLUMNS, &cov)?;
    write_csv(&files.replications, &REPLICATION_COLUMNS, &reps)?;
    write_json(
        &files.manifest,
        &RunManifest {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            grid: grid.clone(),
            models: models.to_vec(),
            scenarios,
            total_seconds,
        },
    )?;
    Ok(files)
}
