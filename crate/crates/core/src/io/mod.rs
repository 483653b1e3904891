//! Config ingestion, result records and plot-ready CSV output.
//!
//! Records are JSON lines with shortest round-trip floats; CSV cells use a
//! fixed 17-significant-digit format.

mod config;
mod output;

pub use config::{
    reference_couplings, ConfigFile, SpectrumSettings, TimeGrid, COUPLING_FIXTURE, PRESETS,
};
pub use output::{
    fmt_f64, normalize_csv, read_csv, read_records, write_amplitude_csv, write_records,
    write_spectrum_csv, write_sweep_csv, DriverSummary, FailureInfo, RecordStatus, ResultRecord,
    SweepSummary, VERSION,
};
