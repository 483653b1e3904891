//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use symanneal::annealing::{
    log_grid, optimize_amplitude_with, run, sweep_annealing_time, AmplitudeSearch, DriverKind,
    ExperimentConfig, Instance, SweepCurve, SweepOptions,
};
use symanneal::evolution::{
    dephased_coherence, evolve_closed, evolve_open, DensityMatrix, IntegratorParams, NoiseSpec,
};
use symanneal::hamiltonians::{
    random_xxz_chain, sz_commutator_norm, transverse_field, xy_ring, AnnealSchedule, SpinStarParams,
};
use symanneal::io::{reference_couplings, ConfigFile, ResultRecord, SweepSummary};
use symanneal::linalg::spectrum_distance;
use symanneal::parallel::Execution;
use symanneal::spin_ops::{ManyBodyOperator, StateVector};
use symanneal::symmetry;
use symanneal::verify::jordan_wigner_deviation;

type Check = Result<String, String>;
type Criterion = (usize, &'static str, Option<Duration>, fn() -> Check);

fn ok_or<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn preset(name: &str) -> ConfigFile {
    ConfigFile::preset(name).expect("preset loads")
}

/// The two reproduction instances.
fn instances() -> [(&'static str, ConfigFile); 2] {
    [
        ("spin-star", preset("spin-star-fig3")),
        ("xxz", preset("xxz-fig4")),
    ]
}

fn within_budget(elapsed: Duration, budget: Duration) -> Result<(), String> {
    if elapsed <= budget {
        Ok(())
    } else {
        Err(format!("took {elapsed:.1?}, budget {budget:?}"))
    }
}

fn symmetry_suite() -> Check {
    let hs: [(&str, ManyBodyOperator, bool); 4] = [
        ("xy", ok_or(xy_ring(4, 1.0))?, true),
        (
            "xxz",
            ok_or(random_xxz_chain(&reference_couplings()[..3], 0.7))?,
            true,
        ),
        (
            "spin-star",
            ok_or(SpinStarParams::reproduction().build())?,
            true,
        ),
        ("transverse", ok_or(transverse_field(4, 1.0))?, false),
    ];
    let mut worst_union: f64 = 0.0;
    for (name, h, conserving) in &hs {
        let n = ok_or(sz_commutator_norm(h))?;
        if *conserving && n > 1e-12 {
            return Err(format!("{name}: |[H,Sz]| = {n:.3e}"));
        }
        if !*conserving && n <= 0.5 {
            return Err(format!("{name}: |[H,Sz]| = {n} not > 0.5"));
        }
        if *conserving {
            let union = ok_or(symmetry::sector_resolved_spectrum(h))?;
            worst_union = worst_union.max(spectrum_distance(&union, &ok_or(h.eigenvalues())?));
        }
    }
    if worst_union > 1e-9 {
        return Err(format!("sector-union spectrum mismatch {worst_union:.3e}"));
    }
    Ok(format!(
        "commutators as required; sector-union mismatch {worst_union:.1e}"
    ))
}

fn dephasing_analytics() -> Check {
    let mut worst: f64 = 0.0;
    for rate in [2.5e-5, 1e-4] {
        let h = ManyBodyOperator::zeros(1);
        let schedule = ok_or(AnnealSchedule::new(h.clone(), h, 1e5))?;
        let rho0 = DensityMatrix::from_pure(&ok_or(StateVector::all_plus(1))?);
        let params = IntegratorParams {
            sample_count: 101,
            ..Default::default()
        };
        let traj = ok_or(evolve_open(
            &rho0,
            &schedule,
            &ok_or(NoiseSpec::dephasing(rate))?,
            &params,
        ))?;
        for (t, rho) in &traj.samples {
            let expected = dephased_coherence(rate, *t);
            let got = rho.matrix()[(0, 1)].norm();
            worst = worst.max((got - expected).abs() / expected);
        }
    }
    if worst < 1e-6 {
        Ok(format!("max relative error {worst:.2e} over T <= 1e5 ns"))
    } else {
        Err(format!("relative error {worst:.3e}"))
    }
}

fn open_closed_equivalence() -> Check {
    let cfg = preset("xxz-fig4").experiment;
    let mut report = Vec::new();
    let tight = IntegratorParams {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        ..Default::default()
    };
    for driver in [DriverKind::Transverse, DriverKind::Xy] {
        let exp = cfg.with_driver(driver).with_time(1e3);
        let instance = ok_or(Instance::new(&exp))?;
        let schedule = ok_or(instance.schedule(exp.amplitude, 1e3))?;
        let psi0 = match instance.sectors().first() {
            None => ok_or(StateVector::all_plus(4))?,
            Some(s) => ok_or(symmetry::sector_ground_state(schedule.driver(), s))?.state,
        };
        let closed = ok_or(evolve_closed(&psi0, &schedule, &tight))?;
        let open = ok_or(evolve_open(
            &DensityMatrix::from_pure(&psi0),
            &schedule,
            &NoiseSpec::none(),
            &IntegratorParams::default(),
        ))?;
        let d = open
            .final_state
            .trace_distance(&DensityMatrix::from_pure(&closed.final_state));
        if d > 1e-6 {
            return Err(format!("{driver}: trace distance {d:.3e}"));
        }
        report.push(format!("{driver} {d:.1e}"));
    }
    Ok(format!(
        "trace distance at T = 1e3 ns: {}",
        report.join(", ")
    ))
}

fn sector_population_conservation() -> Check {
    let mut report = Vec::new();
    for (name, cfg) in instances() {
        let mut exp = cfg.experiment.with_driver(DriverKind::Xy).with_time(50.0);
        exp.integrator.sector_reduction = false;
        exp.integrator.sample_count = 60;
        if exp.noise.rate == 0.0 {
            return Err(format!("{name}: preset has no dephasing"));
        }
        let instance = ok_or(Instance::new(&exp))?;
        let (_, traj) = ok_or(instance.run_detailed(exp.amplitude, exp.annealing_time))?;
        let dec = ok_or(symmetry::decompose(instance.problem().sites()))?;
        let p0 = traj.samples[0].1.sector_populations(&dec);
        let mut worst: f64 = 0.0;
        for (_, rho) in &traj.samples {
            for (a, b) in rho.sector_populations(&dec).iter().zip(&p0) {
                worst = worst.max((a - b).abs());
            }
        }
        if traj.samples.len() < 50 || worst > 1e-8 {
            return Err(format!(
                "{name}: drift {worst:.3e} over {} samples",
                traj.samples.len()
            ));
        }
        report.push(format!(
            "{name} {worst:.1e} ({} samples)",
            traj.samples.len()
        ));
    }
    Ok(format!("population drift: {}", report.join(", ")))
}

fn jordan_wigner() -> Check {
    let d = ok_or(jordan_wigner_deviation(xy_ring, 8))?;
    if d <= 1e-9 {
        Ok(format!("max deviation {d:.1e} for L <= 8, all fillings"))
    } else {
        Err(format!("deviation {d:.3e}"))
    }
}

fn adiabatic_limit() -> Check {
    let search = AmplitudeSearch {
        grid: ok_or(log_grid(0.05, 20.0, 5))?,
        refine: false,
    };
    let mut report = Vec::new();
    for (name, cfg) in instances() {
        for driver in [DriverKind::Transverse, DriverKind::Xy] {
            let mut exp = cfg.experiment.with_driver(driver);
            exp.noise = NoiseSpec::none();
            let mut t = 10.0;
            loop {
                let opt = ok_or(optimize_amplitude_with(
                    &exp.with_time(t),
                    &search,
                    Execution::default(),
                ))?;
                if opt.best.estimation_error < 1e-3 {
                    report.push(format!(
                        "{name}/{driver} T={t} err={:.1e}",
                        opt.best.estimation_error
                    ));
                    break;
                }
                t *= 2.0;
                if t > 1e5 {
                    return Err(format!(
                        "{name}/{driver}: error {:.3e} at T = {}",
                        opt.best.estimation_error,
                        t / 2.0
                    ));
                }
            }
        }
    }
    Ok(report.join(", "))
}

struct Sweeps {
    curves: Vec<(&'static str, ExperimentConfig, Vec<SweepCurve>)>,
}

fn run_sweeps() -> Result<Sweeps, String> {
    let mut curves = Vec::new();
    for (name, cfg) in instances() {
        let times = ok_or(cfg.sweep_times())?;
        let options = SweepOptions {
            search: cfg.amplitude_search.clone(),
            ..Default::default()
        };
        let mut per_driver = Vec::new();
        for driver in cfg.drivers() {
            per_driver.push(ok_or(sweep_annealing_time(
                &cfg.experiment.with_driver(driver),
                &times,
                &options,
            ))?);
        }
        curves.push((name, cfg.experiment.clone(), per_driver));
    }
    Ok(Sweeps { curves })
}

fn ratio_claims(sweeps: &Sweeps) -> Check {
    let mut report = Vec::new();
    for (name, _, curves) in &sweeps.curves {
        let summary = SweepSummary::from_curves(curves);
        let tf = summary
            .driver(DriverKind::Transverse)
            .ok_or("no transverse curve")?;
        let xy = summary.driver(DriverKind::Xy).ok_or("no xy curve")?;
        let required = if *name == "spin-star" { 2.0 } else { 5.0 };
        let ratio = tf.min_error / xy.min_error;
        let line = format!(
            "{name}: ratio {ratio:.2} (need >= {required}), T_opt xy {:.3} vs transverse {:.3}",
            xy.optimal_time, tf.optimal_time
        );
        if ratio < required || xy.optimal_time >= tf.optimal_time {
            return Err(line);
        }
        report.push(line);
    }
    Ok(report.join("; "))
}

fn integrator_convergence(sweeps: &Sweeps) -> Check {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (name, exp, curves) in &sweeps.curves {
        for curve in curves {
            for p in &curve.points {
                let mut cfg = exp
                    .with_driver(curve.driver)
                    .with_amplitude(p.result.amplitude)
                    .with_time(p.annealing_time);
                cfg.integrator = cfg.integrator.with_tolerance_factor(0.5);
                let fine = ok_or(run(&cfg))?;
                let rel = (fine.estimation_error - p.result.estimation_error).abs()
                    / p.result.estimation_error;
                if rel >= 0.01 {
                    return Err(format!(
                        "{name}/{} T={}: relative change {rel:.3e}",
                        curve.driver, p.annealing_time
                    ));
                }
                worst = worst.max(rel);
                count += 1;
            }
        }
    }
    Ok(format!(
        "{count} reported errors, max relative change {worst:.1e}"
    ))
}

fn determinism() -> Check {
    let records = || -> Result<Vec<String>, String> {
        let mut out = Vec::new();
        for (_, cfg) in instances() {
            let times = [2.0, 8.0];
            let options = SweepOptions {
                search: AmplitudeSearch {
                    grid: vec![0.3, 1.0, 3.0],
                    refine: true,
                },
                execution: Execution::Parallel,
                ..Default::default()
            };
            for driver in cfg.drivers() {
                let exp = cfg.experiment.with_driver(driver);
                let curve = ok_or(sweep_annealing_time(&exp, &times, &options))?;
                for p in curve.points {
                    let rec = ok_or(ResultRecord::new(&exp, p.result))?;
                    out.push(ok_or(rec.without_volatile().to_json_line())?);
                }
            }
        }
        Ok(out)
    };
    let a = records()?;
    let b = records()?;
    if a == b {
        Ok(format!("{} records identical across two runs", a.len()))
    } else {
        Err("records differ between runs".into())
    }
}

fn report(n: usize, title: &str, budget: Option<Duration>, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    let result = match (result, budget) {
        (Ok(msg), Some(b)) => within_budget(elapsed, b).map(|_| msg),
        (r, _) => r,
    };
    let (mark, detail, passed) = match result {
        Ok(d) => ("PASS", d, true),
        Err(d) => ("FAIL", d, false),
    };
    println!("{mark} criterion {n} ({title}, {elapsed:.1?}): {detail}");
    passed
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags such as `--nocapture`; listing must not run anything.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    // Bare numbers select criteria; all run by default.
    let only: Vec<usize> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: usize| only.is_empty() || only.contains(&n);
    let secs = |s: u64| Some(Duration::from_secs(s));
    let checks: [Criterion; 5] = [
        (1, "symmetry suite", secs(1), symmetry_suite),
        (2, "dephasing analytics", secs(10), dephasing_analytics),
        (
            3,
            "open/closed equivalence",
            secs(60),
            open_closed_equivalence,
        ),
        (
            4,
            "sector-population conservation",
            secs(120),
            sector_population_conservation,
        ),
        (5, "Jordan-Wigner cross-check", secs(10), jordan_wigner),
    ];
    let mut passed = Vec::new();
    for (n, title, budget, f) in checks {
        if wanted(n) {
            passed.push(report(n, title, budget, f));
        }
    }
    if wanted(6) {
        passed.push(report(6, "adiabatic limit", secs(300), adiabatic_limit));
    }
    if wanted(7) || wanted(8) {
        let start = Instant::now();
        let sweeps = run_sweeps();
        let sweep_time = start.elapsed();
        match &sweeps {
            Ok(s) => {
                if wanted(7) {
                    passed.push(report(7, "ratio claims", None, || {
                        within_budget(sweep_time, Duration::from_secs(30 * 60))?;
                        ratio_claims(s).map(|m| format!("{m} (sweeps {sweep_time:.0?})"))
                    }));
                }
                if wanted(8) {
                    passed.push(report(8, "integrator convergence", None, || {
                        integrator_convergence(s)
                    }));
                }
            }
            Err(e) => {
                for (n, title) in [(7, "ratio claims"), (8, "integrator convergence")] {
                    if wanted(n) {
                        println!("FAIL criterion {n} ({title}): sweep failed: {e}");
                        passed.push(false);
                    }
                }
            }
        }
    }
    if wanted(9) {
        passed.push(report(9, "determinism", None, determinism));
    }
    let failed = passed.iter().filter(|p| !**p).count();
    println!("acceptance: {} criteria, {failed} failed", passed.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
