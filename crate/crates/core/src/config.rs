//! TOML run configuration for the fit pipeline and the simulation study.
//!
//! ```toml
//! seed = 1
//!
//! [data]
//! input = "annual_max.csv"   # or a HURDAT2 file with format = "hurdat"
//! format = "csv"
//! block_size = 1
//!
//! [chain]
//! n_iter = 8000
//! burn_in = 5000
//!
//! [prior.shape]
//! kind = "truncated_student_t"
//! nu = 1.0
//!
//! [output]
//! dir = "out"
//! return_periods = [2.0, 5.0, 10.0, 15.0]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    annual_maxima, parse_hurdat, read_series_csv, AnnualMaxSeries, DEFAULT_YEAR_RANGE,
};
use crate::prior::PriorKernels;
use crate::sampler::ChainConfig;
use crate::simstudy::{ScenarioGrid, TrueModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    #[default]
    Csv,
    Hurdat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub input: Option<PathBuf>,
    pub format: InputFormat,
    /// Observations per block `m`.
    pub block_size: usize,
    pub year_start: i32,
    pub year_end: i32,
    /// Convert HURDAT2 winds from knots to km/h.
    pub knots_to_kmh: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            input: None,
            format: InputFormat::Csv,
            block_size: 1,
            year_start: DEFAULT_YEAR_RANGE.0,
            year_end: DEFAULT_YEAR_RANGE.1,
            knots_to_kmh: true,
        }
    }
}

impl DataConfig {
    pub fn load_series(&self) -> Result<AnnualMaxSeries> {
        let path = self
            .input
            .as_deref()
            .ok_or_else(|| Error::Config("no input file given".into()))?;
        match self.format {
            InputFormat::Csv => read_series_csv(path),
            InputFormat::Hurdat => {
                let parsed = parse_hurdat(path, self.knots_to_kmh)?;
                annual_maxima(&parsed.records, (self.year_start, self.year_end))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub return_periods: Vec<f64>,
    /// Tail probabilities `p` for the extreme quantiles `Q(p)` of the parent
    /// distribution.
    pub quantile_levels: Vec<f64>,
    pub alpha: f64,
    /// Points per axis of the density grids.
    pub grid_points: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            return_periods: vec![2.0, 5.0, 10.0, 15.0, 50.0],
            quantile_levels: Vec::new(),
            alpha: 0.05,
            grid_points: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub chain: ChainConfig,
    pub prior: PriorKernels,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            data: DataConfig::default(),
            chain: ChainConfig::short(),
            prior: PriorKernels::default(),
            output: OutputConfig::default(),
        }
    }
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_toml(path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.block_size == 0 {
            return Err(Error::Config("block_size must be at least 1".into()));
        }
        if let Some(p) = &self.data.input {
            if !p.exists() {
                let e =
                    std::io::Error::new(std::io::ErrorKind::NotFound, "input file does not exist");
                return Err(Error::io(p, e));
            }
        }
        if self.data.year_start > self.data.year_end {
            return Err(Error::Config("year_start is after year_end".into()));
        }
        if let Some(t) = self.output.return_periods.iter().find(|&&t| !(t > 1.0)) {
            return Err(Error::Config(format!("return period {t} must exceed 1")));
        }
        if let Some(p) = self
            .output
            .quantile_levels
            .iter()
            .find(|&&p| !(p > 0.0 && p < 1.0))
        {
            return Err(Error::Config(format!(
                "quantile level {p} must lie in (0, 1)"
            )));
        }
        if !(self.output.alpha > 0.0 && self.output.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha {} must lie in (0, 1)",
                self.output.alpha
            )));
        }
        if self.output.grid_points < 2 {
            return Err(Error::Config("grid_points must be at least 2".into()));
        }
        self.prior
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.chain.validate()
    }
}

/// Simulation-study configuration: which models to run over which grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub models: Vec<TrueModel>,
    pub grid: ScenarioGrid,
    pub output_dir: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            models: TrueModel::ALL.to_vec(),
            grid: ScenarioGrid::default(),
            output_dir: None,
        }
    }
}

impl StudyConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_toml(path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Config("no models selected".into()));
        }
        self.grid.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
        StudyConfig::default().validate().unwrap();
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let c = RunConfig::from_toml_str(
            r#"
            seed = 9
            [chain]
            n_iter = 100
            burn_in = 50
            [prior.location]
            kind = "student_t"
            nu = 3.0
            [output]
            return_periods = [2.0, 100.0]
            "#,
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.chain.n_iter, 100);
        assert_eq!(c.chain.target_accept, 0.234);
        assert_eq!(c.output.return_periods, vec![2.0, 100.0]);
        assert_eq!(c.data.block_size, 1);
        c.validate().unwrap();
    }

    #[test]
    fn bad_values_are_config_errors() {
        assert!(matches!(
            RunConfig::from_toml_str("bogus = 1"),
            Err(Error::Config(_))
        ));
        let mut c = RunConfig::default();
        c.output.return_periods = vec![0.5];
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = RunConfig::default();
        c.chain.burn_in = c.chain.n_iter;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn study_toml() {
        let s = StudyConfig::from_toml_str(
            r#"
            models = ["half-cauchy"]
            [grid]
            pairs = [[40, 20]]
            replications = 5
            "#,
        )
        .unwrap();
        assert_eq!(s.models, vec![TrueModel::HalfCauchy]);
        assert_eq!(s.grid.pairs, vec![(40, 20)]);
        s.validate().unwrap();
    }
}
