use std::io::{Read, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::annealing::{
    AmplitudeOptimum, DriverKind, ExperimentConfig, RunResult, SweepCurve, PRNG_ALGORITHM,
};
use crate::error::{Error, Result};
use crate::spectra::SpectrumTrace;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fixed 17-significant-digit rendering used in every CSV cell.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureInfo {
    /// Simulated time of the failure in ns, when known.
    pub time: Option<f64>,
    pub reason: String,
}

/// One JSON-lines row: a run outcome with enough metadata to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub version: String,
    pub prng_algorithm: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub status: RecordStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureInfo>,
    #[serde(flatten)]
    pub result: Option<RunResult>,
    /// Couplings the problem was built from, when it is a chain.
    pub couplings: Option<Vec<f64>>,
    pub config: ExperimentConfig,
}

impl ResultRecord {
    /// Record for a completed run; `config` is echoed with the run's amplitude and `T`.
    pub fn new(config: &ExperimentConfig, result: RunResult) -> Result<Self> {
        let config = config
            .with_amplitude(result.amplitude)
            .with_time(result.annealing_time);
        Ok(Self {
            version: VERSION.into(),
            prng_algorithm: PRNG_ALGORITHM.into(),
            timestamp: unix_now(),
            status: RecordStatus::Ok,
            failure: None,
            couplings: config.problem.couplings(config.seed)?,
            result: Some(result),
            config,
        })
    }

    /// Partial record for a run that raised `error`.
    pub fn failed(config: &ExperimentConfig, error: &Error) -> Self {
        let time = match error {
            Error::IntegrationFailure { time, .. } => Some(*time),
            _ => None,
        };
        Self {
            version: VERSION.into(),
            prng_algorithm: PRNG_ALGORITHM.into(),
            timestamp: unix_now(),
            status: RecordStatus::Failed,
            failure: Some(FailureInfo {
                time,
                reason: error.to_string(),
            }),
            result: None,
            couplings: config.problem.couplings(config.seed).ok().flatten(),
            config: config.clone(),
        }
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        Ok(serde_json::from_str(line)?)
    }

    /// Copy with the timestamp and wall time zeroed, for reproducibility checks.
    pub fn without_volatile(&self) -> Self {
        let mut r = self.clone();
        r.timestamp = 0;
        if let Some(res) = r.result.as_mut() {
            res.wall_time = 0.0;
        }
        r
    }
}

pub fn write_records<W: Write>(records: &[ResultRecord], mut w: W) -> Result<()> {
    for r in records {
        writeln!(w, "{}", r.to_json_line()?)?;
    }
    Ok(())
}

pub fn read_records<R: Read>(mut r: R) -> Result<Vec<ResultRecord>> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(ResultRecord::from_json_line)
        .collect()
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Numerical(format!("csv: {other:?}")),
    }
}

/// Header `s,level_0,…[,sector_0,…]`, one row per grid point.
pub fn write_spectrum_csv<W: Write>(trace: &SpectrumTrace, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let n = trace.level_count();
    let mut header = vec!["s".to_string()];
    header.extend((0..n).map(|i| format!("level_{i}")));
    if trace.sector_labels.is_some() {
        header.extend((0..n).map(|i| format!("sector_{i}")));
    }
    out.write_record(&header).map_err(csv_error)?;
    for (i, (s, row)) in trace.s_grid.iter().zip(&trace.levels).enumerate() {
        let mut cells = vec![fmt_f64(*s)];
        cells.extend(row.iter().map(|e| fmt_f64(*e)));
        if let Some(labels) = &trace.sector_labels {
            cells.extend(labels[i].iter().map(|m| m.to_string()));
        }
        out.write_record(&cells).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

/// Header `T,driver,amplitude_opt,error,fidelity`, curves one after another.
pub fn write_sweep_csv<W: Write>(curves: &[SweepCurve], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["T", "driver", "amplitude_opt", "error", "fidelity"])
        .map_err(csv_error)?;
    for c in curves {
        for p in &c.points {
            out.write_record([
                fmt_f64(p.annealing_time),
                c.driver.name().to_string(),
                fmt_f64(p.result.amplitude),
                fmt_f64(p.result.estimation_error),
                fmt_f64(p.result.ground_fidelity),
            ])
            .map_err(csv_error)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Header `amplitude,driver,error,fidelity`: the full error-vs-amplitude scans.
pub fn write_amplitude_csv<W: Write>(scans: &[(DriverKind, AmplitudeOptimum)], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["amplitude", "driver", "error", "fidelity"])
        .map_err(csv_error)?;
    for (driver, scan) in scans {
        for r in &scan.curve {
            out.write_record([
                fmt_f64(r.amplitude),
                driver.name().to_string(),
                fmt_f64(r.estimation_error),
                fmt_f64(r.ground_fidelity),
            ])
            .map_err(csv_error)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Header row and string cells of a CSV document.
pub fn read_csv<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(String::from)
        .collect();
    let rows = rd
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()
        .map_err(csv_error)?;
    Ok((header, rows))
}

/// Re-renders parsed cells: numeric cells through [`fmt_f64`], others verbatim.
pub fn normalize_csv(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(header).map_err(csv_error)?;
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .map(|c| {
                if c.contains(['e', '.']) {
                    c.parse::<f64>().map(fmt_f64).unwrap_or_else(|_| c.clone())
                } else {
                    c.clone()
                }
            })
            .collect();
        out.write_record(&cells).map_err(csv_error)?;
    }
    let bytes = out.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Numerical(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverSummary {
    pub driver: DriverKind,
    /// `T` of the smallest error.
    pub optimal_time: f64,
    pub min_error: f64,
    pub amplitude: f64,
    pub fidelity: f64,
    /// Sweep points whose best amplitude hit an edge of the grid.
    pub grid_edge_points: usize,
}

/// Per-driver optimum of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub version: String,
    pub prng_algorithm: String,
    pub drivers: Vec<DriverSummary>,
}

impl SweepSummary {
    pub fn from_curves(curves: &[SweepCurve]) -> Self {
        let drivers = curves
            .iter()
            .map(|c| {
                let best = c.optimum();
                DriverSummary {
                    driver: c.driver,
                    optimal_time: best.annealing_time,
                    min_error: best.result.estimation_error,
                    amplitude: best.result.amplitude,
                    fidelity: best.result.ground_fidelity,
                    grid_edge_points: c.points.iter().filter(|p| p.at_grid_edge).count(),
                }
            })
            .collect();
        Self {
            version: VERSION.into(),
            prng_algorithm: PRNG_ALGORITHM.into(),
            drivers,
        }
    }

    pub fn driver(&self, kind: DriverKind) -> Option<&DriverSummary> {
        self.drivers.iter().find(|d| d.driver == kind)
    }
}
