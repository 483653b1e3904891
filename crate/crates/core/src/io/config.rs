use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annealing::{AmplitudeSearch, DriverKind, ExperimentConfig};
use crate::error::{Error, Result};
use crate::spectra::DEFAULT_GRID_POINTS;

/// Annealing times of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum TimeGrid {
    List(Vec<f64>),
    /// `points` log-spaced values over `[lo, hi]`, endpoints included.
    Log {
        lo: f64,
        hi: f64,
        points: usize,
    },
}

impl TimeGrid {
    pub fn times(&self) -> Result<Vec<f64>> {
        let times = match self {
            TimeGrid::List(v) => v.clone(),
            TimeGrid::Log { lo, hi, points } => {
                if !(*lo > 0.0 && hi >= lo && hi.is_finite()) || *points == 0 {
                    return Err(Error::Config(format!(
                        "bad time grid [{lo}, {hi}] x {points}"
                    )));
                }
                if *points == 1 {
                    vec![*lo]
                } else {
                    let n = points - 1;
                    let ratio = (hi / lo).ln();
                    (0..=n)
                        .map(|i| match i {
                            0 => *lo,
                            i if i == n => *hi,
                            i => lo * (ratio * i as f64 / n as f64).exp(),
                        })
                        .collect()
                }
            }
        };
        if times.is_empty() || times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::Config(
                "sweep times must be positive and non-empty".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "sweep times must be strictly ascending".into(),
            ));
        }
        Ok(times)
    }
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSettings {
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Levels to keep; all of them when absent.
    #[serde(default)]
    pub level_count: Option<usize>,
    /// Label each level with its magnetization sector.
    #[serde(default)]
    pub sectors: bool,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        Self {
            grid_points: DEFAULT_GRID_POINTS,
            level_count: None,
            sectors: false,
        }
    }
}

/// On-disk experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: ExperimentConfig,
    /// Drivers compared by `sweep` and `optimize`; defaults to the experiment's.
    #[serde(default)]
    pub drivers: Option<Vec<DriverKind>>,
    #[serde(default)]
    pub amplitude_search: AmplitudeSearch,
    #[serde(default)]
    pub sweep: Option<TimeGrid>,
    #[serde(default)]
    pub spectrum: SpectrumSettings,
    /// Default output path when none is given on the command line.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// Reproduction presets shipped with the crate.
pub const PRESETS: [(&str, &str); 3] = [
    (
        "spin-star-fig3",
        include_str!("../../configs/spin-star-fig3.json"),
    ),
    ("xxz-fig4", include_str!("../../configs/xxz-fig4.json")),
    (
        "xxz-fig4-L5",
        include_str!("../../configs/xxz-fig4-L5.json"),
    ),
];

/// Couplings of the shipped random XXZ instance.
pub const COUPLING_FIXTURE: &str = include_str!("../../fixtures/xxz_couplings.json");

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingFixture {
    couplings: Vec<f64>,
}

pub fn reference_couplings() -> Vec<f64> {
    serde_json::from_str::<CouplingFixture>(COUPLING_FIXTURE)
        .expect("fixture parses")
        .couplings
}

impl ConfigFile {
    /// Parses and validates.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ConfigFile =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("schema: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            Error::Config(format!(
                "unknown preset '{name}' (available: {})",
                PRESETS.map(|p| p.0).join(", ")
            ))
        })?;
        Self::from_json(text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        self.experiment.validate().map_err(cfg)?;
        self.experiment
            .problem
            .build(self.experiment.seed)
            .map_err(cfg)?;
        if matches!(&self.drivers, Some(d) if d.is_empty()) {
            return Err(Error::Config("driver list is empty".into()));
        }
        if self.amplitude_search.grid.is_empty()
            || self
                .amplitude_search
                .grid
                .iter()
                .any(|a| !(*a > 0.0 && a.is_finite()))
        {
            return Err(Error::Config(
                "amplitude grid must be non-empty and positive".into(),
            ));
        }
        if let Some(grid) = &self.sweep {
            grid.times()?;
        }
        if self.spectrum.grid_points < 2 {
            return Err(Error::Config(
                "spectrum needs at least 2 grid points".into(),
            ));
        }
        if self.spectrum.level_count == Some(0) {
            return Err(Error::Config(
                "spectrum level_count must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn drivers(&self) -> Vec<DriverKind> {
        self.drivers
            .clone()
            .unwrap_or_else(|| vec![self.experiment.driver])
    }

    /// Sweep times, or the experiment's single `T` when no grid is configured.
    pub fn sweep_times(&self) -> Result<Vec<f64>> {
        match &self.sweep {
            Some(g) => g.times(),
            None => Ok(vec![self.experiment.annealing_time]),
        }
    }
}
