//! Annealing experiments: instance construction, initial states, single runs,
//! drive-amplitude optimization and annealing-time sweeps.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{
    evolve_open, DensityMatrix, IntegrationStats, IntegratorParams, NoiseSpec, Trajectory,
};
use crate::hamiltonians::{
    random_xxz_chain, transverse_field, xy_ring, AnnealSchedule, SpinStarParams,
};
use crate::linalg;
use crate::parallel::Execution;
use crate::spin_ops::{expectation, ManyBodyOperator, StateVector};
use crate::symmetry::{self, Sector, SectorDecomposition, CONSERVATION_TOL, DEGENERACY_TOL};

/// Identifier of the generator behind [`sample_couplings`], recorded in outputs.
pub const PRNG_ALGORITHM: &str = "chacha8/rand_chacha-0.9/seed_from_u64/uniform-f64";

fn default_lo() -> f64 {
    0.0
}

fn default_hi() -> f64 {
    2.0
}

/// The problem Hamiltonian of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemSpec {
    SpinStar(SpinStarParams),
    /// Open XXZ chain with explicit couplings.
    Xxz {
        couplings: Vec<f64>,
        anisotropy: f64,
    },
    /// Open XXZ chain with couplings drawn by [`sample_couplings`] from the config seed.
    RandomXxz {
        sites: usize,
        anisotropy: f64,
        #[serde(default = "default_lo")]
        lo: f64,
        #[serde(default = "default_hi")]
        hi: f64,
    },
}

impl ProblemSpec {
    pub fn sites(&self) -> usize {
        match self {
            ProblemSpec::SpinStar(p) => p.outer + 1,
            ProblemSpec::Xxz { couplings, .. } => couplings.len() + 1,
            ProblemSpec::RandomXxz { sites, .. } => *sites,
        }
    }

    /// Couplings actually used (sampled for `RandomXxz`).
    pub fn couplings(&self, seed: u64) -> Result<Option<Vec<f64>>> {
        Ok(match self {
            ProblemSpec::SpinStar(_) => None,
            ProblemSpec::Xxz { couplings, .. } => Some(couplings.clone()),
            ProblemSpec::RandomXxz { sites, lo, hi, .. } => {
                if *sites < 2 {
                    return Err(Error::arg("random XXZ chain needs at least 2 sites"));
                }
                Some(sample_couplings(seed, sites - 1, *lo, *hi)?)
            }
        })
    }

    pub fn build(&self, seed: u64) -> Result<ManyBodyOperator> {
        match self {
            ProblemSpec::SpinStar(p) => p.build(),
            ProblemSpec::Xxz {
                couplings,
                anisotropy,
            } => random_xxz_chain(couplings, *anisotropy),
            ProblemSpec::RandomXxz { anisotropy, .. } => {
                let couplings = self.couplings(seed)?.unwrap_or_default();
                random_xxz_chain(&couplings, *anisotropy)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriverKind {
    /// `-B Σ σx`, started from `|+…+⟩`.
    Transverse,
    /// XY ring `g Σ (σ+σ- + σ-σ+)`, started from its ground state in one sector.
    Xy,
}

impl DriverKind {
    pub fn build(self, sites: usize, amplitude: f64) -> Result<ManyBodyOperator> {
        match self {
            DriverKind::Transverse => transverse_field(sites, amplitude),
            DriverKind::Xy => xy_ring(sites, amplitude),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DriverKind::Transverse => "transverse",
            DriverKind::Xy => "xy",
        }
    }
}

impl std::fmt::Display for DriverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DriverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "transverse" | "tf" => Ok(DriverKind::Transverse),
            "xy" => Ok(DriverKind::Xy),
            other => Err(Error::Config(format!("unknown driver '{other}'"))),
        }
    }
}

/// Which magnetization sector the XY driver anneals in. The transverse
/// driver ignores this and always starts from `|+…+⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectorPolicy {
    /// The sector holding the exact problem ground state.
    #[default]
    Auto,
    /// A fixed magnetization `m`.
    Fixed(i64),
    /// The global ground state of the driver.
    Global,
    /// Every sector; the run with the lowest final energy is reported.
    SweepSectors,
}

/// One annealing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub driver: DriverKind,
    /// `B` (transverse) or `g` (XY) in GHz.
    pub amplitude: f64,
    /// `T` in ns.
    pub annealing_time: f64,
    #[serde(default = "NoiseSpec::none")]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub sector_policy: SectorPolicy,
    #[serde(default)]
    pub integrator: IntegratorParams,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::arg(format!(
                "amplitude {} must be positive",
                self.amplitude
            )));
        }
        if !(self.annealing_time > 0.0 && self.annealing_time.is_finite()) {
            return Err(Error::arg(format!(
                "annealing time {} must be positive",
                self.annealing_time
            )));
        }
        self.noise.validate()?;
        self.integrator.validate()
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self {
            amplitude,
            ..self.clone()
        }
    }

    pub fn with_time(&self, annealing_time: f64) -> Self {
        Self {
            annealing_time,
            ..self.clone()
        }
    }

    pub fn with_driver(&self, driver: DriverKind) -> Self {
        Self {
            driver,
            ..self.clone()
        }
    }
}

/// Outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub e_true: f64,
    pub e_qa: f64,
    /// `|e_true - e_qa|`.
    pub estimation_error: f64,
    /// Population of the problem's ground eigenspace at `T`.
    pub ground_fidelity: f64,
    pub ground_degeneracy: usize,
    pub amplitude: f64,
    pub annealing_time: f64,
    /// Magnetization of the annealed sector (XY driver only).
    pub sector: Option<i64>,
    /// Sector magnetizations `L, L-2, …, -L`, indexing the population vectors.
    pub magnetizations: Vec<i64>,
    pub populations_initial: Vec<f64>,
    pub populations_final: Vec<f64>,
    pub stats: IntegrationStats,
    /// Seconds.
    pub wall_time: f64,
}

/// Amplitude-independent data of an experiment, computed once and shared by
/// every run of a sweep.
#[derive(Debug, Clone)]
pub struct Instance {
    config: ExperimentConfig,
    problem: ManyBodyOperator,
    e_true: f64,
    ground_space: Vec<StateVector>,
    decomposition: SectorDecomposition,
    sectors: Vec<Sector>,
}

fn degeneracy_window(values: &[f64]) -> f64 {
    let range = values.last().unwrap_or(&0.0) - values.first().unwrap_or(&0.0);
    DEGENERACY_TOL * range.max(1.0)
}

impl Instance {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.noise.validate()?;
        config.integrator.validate()?;
        let problem = config.problem.build(config.seed)?;
        let sites = problem.sites();
        let eig = problem.eigh()?;
        let e_true = eig.values[0];
        let window = degeneracy_window(&eig.values);
        let ground_space = eig
            .values
            .iter()
            .take_while(|&&e| e - e_true <= window)
            .enumerate()
            .map(|(i, _)| StateVector::normalized(sites, eig.vectors.column(i).into_owned()))
            .collect::<Result<Vec<_>>>()?;
        let decomposition = symmetry::decompose(sites)?;
        let sectors = match config.driver {
            DriverKind::Transverse => Vec::new(),
            DriverKind::Xy => xy_sectors(config, &problem, &decomposition)?,
        };
        Ok(Self {
            config: config.clone(),
            problem,
            e_true,
            ground_space,
            decomposition,
            sectors,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn problem(&self) -> &ManyBodyOperator {
        &self.problem
    }

    pub fn e_true(&self) -> f64 {
        self.e_true
    }

    /// Sectors an XY run starts in; empty for the transverse driver.
    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn schedule(&self, amplitude: f64, annealing_time: f64) -> Result<AnnealSchedule> {
        let driver = self.config.driver.build(self.problem.sites(), amplitude)?;
        AnnealSchedule::new(self.problem.clone(), driver, annealing_time)
    }

    fn start(&self, driver: &ManyBodyOperator, sector: Option<&Sector>) -> Result<DensityMatrix> {
        match sector {
            None => Ok(DensityMatrix::from_pure(&StateVector::all_plus(
                self.problem.sites(),
            )?)),
            Some(s) => {
                let g = symmetry::sector_ground_state(driver, s)?;
                if g.degeneracy > 1 {
                    log::warn!(
                        "driver ground state in sector m = {} is {}-fold degenerate",
                        s.magnetization(),
                        g.degeneracy
                    );
                }
                Ok(DensityMatrix::from_pure(&g.state))
            }
        }
    }

    /// Initial state for the given amplitude (first candidate sector for XY).
    pub fn initial_state(&self, amplitude: f64) -> Result<DensityMatrix> {
        let driver = self.config.driver.build(self.problem.sites(), amplitude)?;
        self.start(&driver, self.sectors.first())
    }

    fn run_in(
        &self,
        amplitude: f64,
        annealing_time: f64,
        sector: Option<&Sector>,
    ) -> Result<(RunResult, Trajectory<DensityMatrix>)> {
        let clock = Instant::now();
        let schedule = self.schedule(amplitude, annealing_time)?;
        let rho0 = self.start(schedule.driver(), sector)?;
        let traj = evolve_open(
            &rho0,
            &schedule,
            &self.config.noise,
            &self.config.integrator,
        )?;
        let rho = &traj.final_state;
        let e_qa = expectation(&self.problem, rho)?;
        let ground_fidelity = self.ground_space.iter().map(|g| rho.fidelity(g)).sum();
        let result = RunResult {
            e_true: self.e_true,
            e_qa,
            estimation_error: (self.e_true - e_qa).abs(),
            ground_fidelity,
            ground_degeneracy: self.ground_space.len(),
            amplitude,
            annealing_time,
            sector: sector.map(Sector::magnetization),
            magnetizations: self
                .decomposition
                .sectors()
                .iter()
                .map(Sector::magnetization)
                .collect(),
            populations_initial: rho0.sector_populations(&self.decomposition),
            populations_final: rho.sector_populations(&self.decomposition),
            stats: traj.stats,
            wall_time: clock.elapsed().as_secs_f64(),
        };
        Ok((result, traj))
    }

    /// Runs at `amplitude` and `annealing_time`, returning the full trajectory.
    pub fn run_detailed(
        &self,
        amplitude: f64,
        annealing_time: f64,
    ) -> Result<(RunResult, Trajectory<DensityMatrix>)> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::arg(format!(
                "amplitude {amplitude} must be positive"
            )));
        }
        if self.sectors.is_empty() {
            return self.run_in(amplitude, annealing_time, None);
        }
        let mut best: Option<(RunResult, Trajectory<DensityMatrix>)> = None;
        for s in &self.sectors {
            let candidate = self.run_in(amplitude, annealing_time, Some(s))?;
            if best.as_ref().map_or(true, |b| candidate.0.e_qa < b.0.e_qa) {
                best = Some(candidate);
            }
        }
        best.ok_or_else(|| Error::Config("no sector to anneal in".into()))
    }

    pub fn run(&self, amplitude: f64, annealing_time: f64) -> Result<RunResult> {
        Ok(self.run_detailed(amplitude, annealing_time)?.0)
    }
}

/// Lowest energy of `h` in each sector, ordered like `decomposition`.
fn sector_ground_energies(
    h: &ManyBodyOperator,
    decomposition: &SectorDecomposition,
) -> Result<Vec<f64>> {
    decomposition
        .sectors()
        .iter()
        .map(|s| Ok(symmetry::restrict(h, s)?.eigenvalues()[0]))
        .collect()
}

/// The unique sector minimizing `energies`, or an ambiguity error.
fn lowest_sector(
    energies: &[f64],
    decomposition: &SectorDecomposition,
    what: &str,
) -> Result<Sector> {
    let mut sorted = energies.to_vec();
    sorted.sort_by(f64::total_cmp);
    let window = degeneracy_window(&sorted);
    let lowest = sorted[0];
    let hits: Vec<&Sector> = decomposition
        .sectors()
        .iter()
        .zip(energies)
        .filter(|(_, &e)| e - lowest <= window)
        .map(|(s, _)| s)
        .collect();
    match hits.as_slice() {
        [one] => Ok((*one).clone()),
        many => Err(Error::Ambiguity(format!(
            "{what} ground state is degenerate across sectors m = {:?}; choose a fixed sector",
            many.iter().map(|s| s.magnetization()).collect::<Vec<_>>()
        ))),
    }
}

fn xy_sectors(
    config: &ExperimentConfig,
    problem: &ManyBodyOperator,
    decomposition: &SectorDecomposition,
) -> Result<Vec<Sector>> {
    let sites = problem.sites();
    let leak = symmetry::leakage_of(problem.matrix());
    if leak > CONSERVATION_TOL {
        return Err(Error::contract(format!(
            "XY driver requires an S_z-conserving problem (leakage {leak:.3e})"
        )));
    }
    match config.sector_policy {
        SectorPolicy::Auto => {
            let e = sector_ground_energies(problem, decomposition)?;
            Ok(vec![lowest_sector(&e, decomposition, "problem")?])
        }
        SectorPolicy::Fixed(m) => Ok(vec![Sector::with_magnetization(sites, m)?]),
        SectorPolicy::Global => {
            let driver = xy_ring(sites, config.amplitude)?;
            let e = sector_ground_energies(&driver, decomposition)?;
            Ok(vec![lowest_sector(&e, decomposition, "driver")?])
        }
        SectorPolicy::SweepSectors => Ok(decomposition.sectors().to_vec()),
    }
}

/// The state the schedule starts from.
pub fn initial_state(config: &ExperimentConfig) -> Result<DensityMatrix> {
    config.validate()?;
    Instance::new(config)?.initial_state(config.amplitude)
}

/// A single annealing run.
pub fn run(config: &ExperimentConfig) -> Result<RunResult> {
    config.validate()?;
    Instance::new(config)?.run(config.amplitude, config.annealing_time)
}

/// `points_per_decade` log-spaced values covering `[lo, hi]` with exact endpoints.
pub fn log_grid(lo: f64, hi: f64, points_per_decade: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || points_per_decade == 0 {
        return Err(Error::arg(format!("invalid log grid [{lo}, {hi}]")));
    }
    let decades = (hi / lo).log10();
    let intervals = (decades * points_per_decade as f64).round().max(1.0) as usize;
    Ok((0..=intervals)
        .map(|i| match i {
            0 => lo,
            i if i == intervals => hi,
            i => lo * 10f64.powf(decades * i as f64 / intervals as f64),
        })
        .collect())
}

/// 25 points per decade over `[0.05, 20]` GHz.
pub fn default_amplitude_grid() -> Vec<f64> {
    log_grid(0.05, 20.0, 25).expect("static grid")
}

/// Amplitude grid plus optional golden-section refinement on the best bracket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeSearch {
    pub grid: Vec<f64>,
    #[serde(default)]
    pub refine: bool,
}

impl Default for AmplitudeSearch {
    fn default() -> Self {
        Self {
            grid: default_amplitude_grid(),
            refine: false,
        }
    }
}

impl AmplitudeSearch {
    fn sorted_grid(&self) -> Result<Vec<f64>> {
        if self.grid.is_empty() {
            return Err(Error::arg("amplitude grid is empty"));
        }
        if let Some(bad) = self.grid.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::arg(format!("amplitude {bad} must be positive")));
        }
        let mut g = self.grid.clone();
        g.sort_by(f64::total_cmp);
        g.dedup();
        Ok(g)
    }
}

const GOLDEN_ITERATIONS: usize = 10;

/// Best amplitude of an error-vs-amplitude scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeOptimum {
    pub best_amplitude: f64,
    pub best: RunResult,
    /// Grid scan in ascending amplitude.
    pub curve: Vec<RunResult>,
    /// The grid minimum sits on an endpoint of the grid.
    pub at_grid_edge: bool,
}

/// Index of the smallest error; ties go to the earlier (smaller) amplitude.
fn argmin(curve: &[RunResult]) -> usize {
    let mut best = 0;
    for (i, r) in curve.iter().enumerate() {
        if r.estimation_error < curve[best].estimation_error {
            best = i;
        }
    }
    best
}

fn golden_refine(instance: &Instance, annealing_time: f64, lo: f64, hi: f64) -> Result<RunResult> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let eval = |x: f64| instance.run(x.exp(), annealing_time);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    for _ in 0..GOLDEN_ITERATIONS {
        if fc.estimation_error <= fd.estimation_error {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d)?;
        }
    }
    Ok(if fc.estimation_error <= fd.estimation_error {
        fc
    } else {
        fd
    })
}

fn finish_optimum(
    instance: &Instance,
    annealing_time: f64,
    grid: &[f64],
    curve: Vec<RunResult>,
    refine: bool,
) -> Result<AmplitudeOptimum> {
    let i = argmin(&curve);
    let at_grid_edge = curve.len() > 1 && (i == 0 || i == curve.len() - 1);
    if at_grid_edge {
        log::warn!(
            "{} driver, T = {annealing_time} ns: best amplitude {} is a grid endpoint; widen the grid",
            instance.config.driver,
            grid[i]
        );
    }
    let mut best = curve[i].clone();
    if refine && curve.len() > 1 {
        let lo = grid[i.saturating_sub(1)];
        let hi = grid[(i + 1).min(grid.len() - 1)];
        let r = golden_refine(instance, annealing_time, lo, hi)?;
        if r.estimation_error < best.estimation_error {
            best = r;
        }
    }
    Ok(AmplitudeOptimum {
        best_amplitude: best.amplitude,
        best,
        curve,
        at_grid_edge,
    })
}

/// Runs every grid amplitude and returns the error minimizer.
pub fn optimize_amplitude(config: &ExperimentConfig, grid: &[f64]) -> Result<AmplitudeOptimum> {
    let search = AmplitudeSearch {
        grid: grid.to_vec(),
        refine: false,
    };
    optimize_amplitude_with(config, &search, Execution::default())
}

pub fn optimize_amplitude_with(
    config: &ExperimentConfig,
    search: &AmplitudeSearch,
    execution: Execution,
) -> Result<AmplitudeOptimum> {
    config.validate()?;
    let grid = search.sorted_grid()?;
    let instance = Instance::new(config)?;
    let curve = execution
        .map(&grid, |&a| instance.run(a, config.annealing_time))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    finish_optimum(
        &instance,
        config.annealing_time,
        &grid,
        curve,
        search.refine,
    )
}

/// Options for [`sweep_annealing_time`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    /// Optimize the amplitude separately at every `T`; otherwise use `config.amplitude`.
    pub optimize: bool,
    pub search: AmplitudeSearch,
    pub execution: Execution,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            optimize: true,
            search: AmplitudeSearch::default(),
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub annealing_time: f64,
    pub result: RunResult,
    pub at_grid_edge: bool,
}

/// Error-vs-`T` curve of one driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub driver: DriverKind,
    pub points: Vec<SweepPoint>,
}

impl SweepCurve {
    /// The point of smallest error (earliest `T` on ties).
    pub fn optimum(&self) -> &SweepPoint {
        let mut best = &self.points[0];
        for p in &self.points {
            if p.result.estimation_error < best.result.estimation_error {
                best = p;
            }
        }
        best
    }
}

/// Runs every `T` in `t_list`, optimizing the amplitude per `T` when requested.
/// All `(T, amplitude)` cells are scheduled as one batch of independent jobs.
pub fn sweep_annealing_time(
    config: &ExperimentConfig,
    t_list: &[f64],
    options: &SweepOptions,
) -> Result<SweepCurve> {
    config.validate()?;
    if t_list.is_empty() {
        return Err(Error::arg("annealing-time list is empty"));
    }
    if t_list.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::arg("annealing times must be positive"));
    }
    if t_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::arg("annealing times must be strictly ascending"));
    }
    let instance = Instance::new(config)?;
    let grid = if options.optimize {
        options.search.sorted_grid()?
    } else {
        vec![config.amplitude]
    };
    let cells: Vec<(f64, f64)> = t_list
        .iter()
        .flat_map(|&t| grid.iter().map(move |&a| (t, a)))
        .collect();
    let mut results = options
        .execution
        .map(&cells, |&(t, a)| instance.run(a, t))
        .into_iter();
    let mut per_t = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let curve = results
            .by_ref()
            .take(grid.len())
            .collect::<Result<Vec<_>>>()?;
        per_t.push((t, curve));
    }
    let refine = options.optimize && options.search.refine;
    let optima = options.execution.map(&per_t, |(t, curve)| {
        finish_optimum(&instance, *t, &grid, curve.clone(), refine)
    });
    let points = per_t
        .iter()
        .zip(optima)
        .map(|((t, _), o)| {
            let o = o?;
            Ok(SweepPoint {
                annealing_time: *t,
                result: o.best,
                at_grid_edge: options.optimize && o.at_grid_edge,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepCurve {
        driver: config.driver,
        points,
    })
}

/// `count` values uniform on `[lo, hi)` from ChaCha8 seeded with `seed`.
pub fn sample_couplings(seed: u64, count: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::arg(format!("empty interval [{lo}, {hi})")));
    }
    if count == 0 {
        return Err(Error::arg("count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| rng.random_range(lo..hi)).collect())
}

/// `⟨g|ρ|g⟩` summed over the ground eigenspace of `h`.
pub fn ground_fidelity(h: &ManyBodyOperator, rho: &DensityMatrix) -> Result<f64> {
    let eig = h.eigh()?;
    let window = degeneracy_window(&eig.values);
    let mut total = 0.0;
    for (i, e) in eig.values.iter().enumerate() {
        if e - eig.values[0] > window {
            break;
        }
        let v = eig.vectors.column(i);
        total += linalg::trace_product(&(v * v.adjoint()), rho.matrix()).re;
    }
    Ok(total)
}
