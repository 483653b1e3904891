use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use symanneal::annealing::{
    optimize_amplitude_with, sweep_annealing_time, DriverKind, Instance, SweepOptions,
};
use symanneal::io::{
    write_amplitude_csv, write_records, write_spectrum_csv, write_sweep_csv, ConfigFile,
    ResultRecord, SweepSummary,
};
use symanneal::parallel::{set_thread_limit, Execution};
use symanneal::spectra::{trace_labeled_spectrum, trace_spectrum};
use symanneal::{verify, Error};

const THREADS_ENV: &str = "SYMANNEAL_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "symanneal",
    version,
    about = "Symmetric-subspace quantum annealing simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Instantaneous spectrum of H(s) along the schedule, as CSV.
    Spectrum(Common),
    /// One annealing run per driver, as JSON lines on standard output.
    Anneal(Common),
    /// Error versus annealing time with per-T amplitude optimization.
    Sweep(Common),
    /// Error versus driver amplitude at the configured annealing time.
    Optimize(Common),
    /// Built-in oracle and invariant checks.
    Verify(Threads),
}

#[derive(Args, Debug)]
struct Threads {
    /// Worker thread cap (overrides SYMANNEAL_THREADS).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment config file (JSON).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in reproduction preset.
    #[arg(long)]
    preset: Option<String>,
    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated drivers, e.g. `xy` or `transverse,xy`.
    #[arg(long, value_delimiter = ',')]
    drivers: Option<Vec<DriverKind>>,
    /// Label spectrum levels by magnetization sector.
    #[arg(long)]
    sectors: bool,
    /// Overrides the experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    threads: Threads,
}

/// Failure carrying its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_numerical() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::from(e).into()
    }
}

type CmdResult = Result<(), Failure>;

fn apply_threads(t: &Threads) -> CmdResult {
    let n = match t.threads {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| Failure {
                code: 1,
                message: format!("{THREADS_ENV}={v} is not a thread count"),
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Failure {
                code: 1,
                message: "thread count must be positive".into(),
            });
        }
        if !set_thread_limit(n) {
            log::warn!("thread pool already initialized; ignoring limit {n}");
        }
    }
    Ok(())
}

fn load(common: &Common) -> Result<ConfigFile, Failure> {
    let mut cfg = match (&common.config, &common.preset) {
        (Some(path), _) => ConfigFile::load(path)?,
        (None, Some(name)) => ConfigFile::preset(name)?,
        (None, None) => {
            return Err(Failure {
                code: 1,
                message: "one of --config or --preset is required".into(),
            })
        }
    };
    if let Some(seed) = common.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(d) = &common.drivers {
        if d.is_empty() {
            return Err(Error::Config("--drivers is empty".into()).into());
        }
        cfg.drivers = Some(d.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_path(common: &Common, cfg: &ConfigFile) -> Option<PathBuf> {
    common.out.clone().or_else(|| cfg.out.clone())
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure {
        code: 1,
        message: format!("cannot write {}: {e}", path.display()),
    })
}

/// Writes through `emit` to `path`, or to standard output.
fn emit_to(
    path: Option<&Path>,
    emit: impl FnOnce(&mut dyn Write) -> symanneal::Result<()>,
) -> CmdResult {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            emit(&mut w)?;
            w.flush()?;
        }
        None => {
            let mut w = io::stdout().lock();
            emit(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_spectrum(common: &Common) -> CmdResult {
    let cfg = load(common)?;
    let driver = cfg.drivers()[0];
    let exp = cfg.experiment.with_driver(driver);
    let instance = Instance::new(&exp)?;
    let schedule = instance.schedule(exp.amplitude, exp.annealing_time)?;
    let levels = cfg.spectrum.level_count.unwrap_or(schedule.problem().dim());
    let trace = if common.sectors || cfg.spectrum.sectors {
        if driver == DriverKind::Transverse {
            return Err(
                Error::Config("--sectors needs a magnetization-conserving driver".into()).into(),
            );
        }
        trace_labeled_spectrum(&schedule, cfg.spectrum.grid_points, levels)?
    } else {
        trace_spectrum(&schedule, cfg.spectrum.grid_points, levels)?
    };
    emit_to(out_path(common, &cfg).as_deref(), |w| {
        write_spectrum_csv(&trace, w)
    })
}

fn cmd_anneal(common: &Common) -> CmdResult {
    let cfg = load(common)?;
    let mut records = Vec::new();
    let mut failure = None;
    for driver in cfg.drivers() {
        let exp = cfg.experiment.with_driver(driver);
        match symanneal::annealing::run(&exp) {
            Ok(r) => records.push(ResultRecord::new(&exp, r)?),
            Err(e) => {
                records.push(ResultRecord::failed(&exp, &e));
                failure = Some(Failure::from(e));
                break;
            }
        }
    }
    emit_to(out_path(common, &cfg).as_deref(), |w| {
        write_records(&records, w)
    })?;
    failure.map_or(Ok(()), Err)
}

fn cmd_sweep(common: &Common) -> CmdResult {
    let cfg = load(common)?;
    let times = cfg.sweep_times()?;
    let options = SweepOptions {
        optimize: true,
        search: cfg.amplitude_search.clone(),
        execution: Execution::default(),
    };
    let mut curves = Vec::new();
    for driver in cfg.drivers() {
        log::info!(
            "sweeping {driver} driver over {} annealing times",
            times.len()
        );
        let exp = cfg.experiment.with_driver(driver);
        curves.push(sweep_annealing_time(&exp, &times, &options)?);
    }
    let summary = SweepSummary::from_curves(&curves);
    let out = out_path(common, &cfg);
    emit_to(out.as_deref(), |w| write_sweep_csv(&curves, w))?;
    let summary_json = serde_json::to_string_pretty(&summary).map_err(Error::from)?;
    match &out {
        Some(p) => {
            let mut w = create(&with_suffix(p, ".summary.json"))?;
            writeln!(w, "{summary_json}")?;
            w.flush()?;
            let records = curves
                .iter()
                .flat_map(|c| {
                    let exp = cfg.experiment.with_driver(c.driver);
                    c.points
                        .iter()
                        .map(move |pt| ResultRecord::new(&exp, pt.result.clone()))
                })
                .collect::<symanneal::Result<Vec<_>>>()?;
            let mut w = create(&with_suffix(p, ".records.jsonl"))?;
            write_records(&records, &mut w)?;
            w.flush()?;
        }
        None => eprintln!("{summary_json}"),
    }
    Ok(())
}

fn cmd_optimize(common: &Common) -> CmdResult {
    let cfg = load(common)?;
    let mut scans = Vec::new();
    for driver in cfg.drivers() {
        let exp = cfg.experiment.with_driver(driver);
        let opt = optimize_amplitude_with(&exp, &cfg.amplitude_search, Execution::default())?;
        eprintln!(
            "{driver}: best amplitude {} GHz, error {:.6e}",
            opt.best_amplitude, opt.best.estimation_error
        );
        scans.push((driver, opt));
    }
    emit_to(out_path(common, &cfg).as_deref(), |w| {
        write_amplitude_csv(&scans, w)
    })
}

fn cmd_verify() -> CmdResult {
    let results = verify::run_all();
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut out = io::stdout().lock();
    for r in &results {
        let mark = if r.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{mark}  {:width$}  {}", r.name, r.detail)?;
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    writeln!(out, "{} checks, {failed} failed", results.len())?;
    if failed > 0 {
        return Err(Failure {
            code: 3,
            message: format!("{failed} verification check(s) failed"),
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Verify(t) => apply_threads(t).and_then(|_| cmd_verify()),
        Command::Spectrum(c) => apply_threads(&c.threads).and_then(|_| cmd_spectrum(c)),
        Command::Anneal(c) => apply_threads(&c.threads).and_then(|_| cmd_anneal(c)),
        Command::Sweep(c) => apply_threads(&c.threads).and_then(|_| cmd_sweep(c)),
        Command::Optimize(c) => apply_threads(&c.threads).and_then(|_| cmd_optimize(c)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
