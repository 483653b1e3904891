//! Time evolution along an annealing schedule: the GKSL master equation with
//! per-site Pauli dephasing, and the closed-system Schrödinger equation.

mod integrator;
mod kernel;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::AnnealSchedule;
use crate::linalg::{self, c, CMatrix, C64};
use crate::spin_ops::{
    embed, single_site_pauli, ManyBodyOperator, PauliKind, QuantumState, StateVector, MAX_SITES,
};
use crate::symmetry::{self, Sector, SectorDecomposition, CONSERVATION_TOL};

pub use integrator::IntegrationStats;
use integrator::{AdaptiveSettings, Dop853, OdeSystem, Rk4, StepFailure};
use kernel::{Dissipator, GkslSystem, LinearHamiltonian, SchrodingerSystem};

pub const TRACE_TOL: f64 = 1e-9;
pub const DENSITY_HERMITIAN_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;
pub const CLOSED_NORM_TOL: f64 = 1e-8;
/// Smallest factor the adaptive tolerances are scaled by when a sample
/// violates the density-matrix invariants.
pub const MIN_TOLERANCE_FACTOR: f64 = 1e-4;

/// A density matrix on `sites` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    sites: usize,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates trace, Hermiticity and positivity.
    pub fn new(sites: usize, matrix: CMatrix) -> Result<Self> {
        if sites == 0 || sites > MAX_SITES {
            return Err(Error::arg(format!(
                "site count {sites} outside 1..={MAX_SITES}"
            )));
        }
        let dim = 1usize << sites;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::arg(format!(
                "{}x{} matrix for {sites} sites",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if let Some(reason) = invariant_violation(&matrix) {
            return Err(Error::contract(reason));
        }
        Ok(Self { sites, matrix })
    }

    pub(crate) fn from_parts(sites: usize, matrix: CMatrix) -> Self {
        Self { sites, matrix }
    }

    pub fn from_pure(state: &StateVector) -> Self {
        Self {
            sites: state.sites(),
            matrix: state.projector(),
        }
    }

    pub fn maximally_mixed(sites: usize) -> Result<Self> {
        if sites == 0 || sites > MAX_SITES {
            return Err(Error::arg(format!(
                "site count {sites} outside 1..={MAX_SITES}"
            )));
        }
        let dim = 1usize << sites;
        let matrix = CMatrix::identity(dim, dim) * c(1.0 / dim as f64, 0.0);
        Ok(Self { sites, matrix })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Real parts of the diagonal (basis-state populations).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_product(&self.matrix, &self.matrix).re
    }

    /// `½‖ρ - σ‖₁`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = &self.matrix - &other.matrix;
        0.5 * linalg::eigvalsh(&diff).iter().map(|x| x.abs()).sum::<f64>()
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity(&self, state: &StateVector) -> f64 {
        state.raw_expectation(&self.matrix).re
    }

    /// `Tr(P_m ρ)` for each sector of `decomposition`.
    pub fn sector_populations(&self, decomposition: &SectorDecomposition) -> Vec<f64> {
        decomposition.populations(&self.diagonal())
    }
}

impl QuantumState for DensityMatrix {
    fn sites(&self) -> usize {
        self.sites
    }

    fn raw_expectation(&self, m: &CMatrix) -> C64 {
        linalg::trace_product(&self.matrix, m)
    }
}

fn invariant_violation(m: &CMatrix) -> Option<String> {
    let tr = linalg::trace(m);
    if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL || !tr.re.is_finite() {
        return Some(format!("trace {tr} differs from 1"));
    }
    let defect = linalg::hermitian_defect(m);
    if defect > DENSITY_HERMITIAN_TOL {
        return Some(format!("Hermiticity defect {defect:.3e}"));
    }
    let lowest = linalg::eigvalsh(m).first().copied().unwrap_or(0.0);
    if lowest < -POSITIVITY_TOL {
        return Some(format!("negative eigenvalue {lowest:.3e}"));
    }
    None
}

/// Per-site Lindblad operator. Only Hermitian involutions are representable,
/// so `σρσ - ρ` is the exact dissipator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LindbladKind {
    X,
    Y,
    #[default]
    Z,
}

impl LindbladKind {
    fn pauli(self) -> PauliKind {
        match self {
            LindbladKind::X => PauliKind::X,
            LindbladKind::Y => PauliKind::Y,
            LindbladKind::Z => PauliKind::Z,
        }
    }
}

/// Uniform dephasing at `rate` (GHz) on every site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub rate: f64,
    #[serde(default)]
    pub operator: LindbladKind,
}

impl NoiseSpec {
    pub fn new(rate: f64, operator: LindbladKind) -> Result<Self> {
        let spec = Self { rate, operator };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dephasing(rate: f64) -> Result<Self> {
        Self::new(rate, LindbladKind::Z)
    }

    pub fn none() -> Self {
        Self {
            rate: 0.0,
            operator: LindbladKind::Z,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate >= 0.0 && self.rate.is_finite()) {
            return Err(Error::arg(format!("noise rate {} must be >= 0", self.rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Dormand–Prince 8(5,3) with adaptive steps.
    #[default]
    AdaptiveRk,
    /// Classic RK4 with uniform steps of at most `max_step`.
    FixedRk4,
}

fn default_rel_tol() -> f64 {
    1e-8
}

fn default_abs_tol() -> f64 {
    1e-10
}

fn default_sample_count() -> usize {
    51
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorParams {
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    /// Largest step in ns; `None` means `T / 1000`.
    #[serde(default)]
    pub max_step: Option<f64>,
    /// Uniform sample times, endpoints included.
    #[serde(default = "default_sample_count")]
    pub sample_count: usize,
    /// Integrate inside a single magnetization sector when the dynamics allow it.
    #[serde(default = "default_true")]
    pub sector_reduction: bool,
}

impl Default for IntegratorParams {
    fn default() -> Self {
        Self {
            method: Method::AdaptiveRk,
            rel_tol: default_rel_tol(),
            abs_tol: default_abs_tol(),
            max_step: None,
            sample_count: default_sample_count(),
            sector_reduction: true,
        }
    }
}

impl IntegratorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::arg("integrator tolerances must be positive"));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::arg(format!("max_step {h} must be positive")));
            }
        }
        if self.sample_count < 2 {
            return Err(Error::arg(format!(
                "sample_count {} must be at least 2",
                self.sample_count
            )));
        }
        Ok(())
    }

    /// Both tolerances scaled by `factor`.
    pub fn with_tolerance_factor(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }

    fn step_cap(&self, total_time: f64) -> f64 {
        self.max_step.unwrap_or(total_time / 1000.0).min(total_time)
    }

    fn sample_times(&self, total_time: f64) -> Vec<f64> {
        let n = self.sample_count - 1;
        (0..=n)
            .map(|i| {
                if i == n {
                    total_time
                } else {
                    total_time * i as f64 / n as f64
                }
            })
            .collect()
    }
}

/// `dρ/dt = -i[H, ρ] + γ Σ_n (σ_n ρ σ_n - ρ)`, evaluated with dense matrix products.
pub fn gksl_rhs(rho: &DensityMatrix, h: &ManyBodyOperator, noise: &NoiseSpec) -> Result<CMatrix> {
    if h.sites() != rho.sites() {
        return Err(Error::arg(format!(
            "Hamiltonian on {} sites, state on {}",
            h.sites(),
            rho.sites()
        )));
    }
    noise.validate()?;
    let r = rho.matrix();
    let hm = h.matrix();
    let mut out = (hm * r - r * hm) * c(0.0, -1.0);
    if noise.rate > 0.0 {
        let local = single_site_pauli(noise.operator.pauli());
        let gamma = c(noise.rate, 0.0);
        for site in 1..=rho.sites() {
            let s = embed(&local, site, rho.sites())?;
            let sm = s.matrix();
            out += (sm * r * sm - r) * gamma;
        }
    }
    Ok(out)
}

/// Result of an integration: the final state and the uniformly spaced samples.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub final_state: S,
    /// `(t, state)` at `sample_count` uniform times including `0` and `T`.
    pub samples: Vec<(f64, S)>,
    pub stats: IntegrationStats,
    /// The sector the dynamics was confined to, when reduction was used.
    pub reduced_to: Option<Sector>,
}

enum Stepper {
    Adaptive(Dop853),
    Fixed(Rk4),
}

impl Stepper {
    fn new(n: usize, params: &IntegratorParams, total_time: f64) -> Self {
        let cap = params.step_cap(total_time);
        match params.method {
            Method::AdaptiveRk => Stepper::Adaptive(Dop853::new(
                n,
                AdaptiveSettings {
                    rel_tol: params.rel_tol,
                    abs_tol: params.abs_tol,
                    max_step: cap,
                },
            )),
            Method::FixedRk4 => Stepper::Fixed(Rk4::new(n, cap)),
        }
    }

    fn advance<S: OdeSystem>(
        &mut self,
        sys: &mut S,
        t0: f64,
        t1: f64,
        y: &mut [f64],
    ) -> Result<()> {
        let r = match self {
            Stepper::Adaptive(s) => s.advance(sys, t0, t1, y),
            Stepper::Fixed(s) => s.advance(sys, t0, t1, y),
        };
        r.map_err(|f| match f {
            StepFailure::StepUnderflow { time } => Error::IntegrationFailure {
                time,
                reason: "step size underflow".into(),
            },
            StepFailure::NonFinite { time } => Error::IntegrationFailure {
                time,
                reason: "non-finite state".into(),
            },
        })
    }

    fn stats(&self) -> IntegrationStats {
        match self {
            Stepper::Adaptive(s) => s.stats,
            Stepper::Fixed(s) => s.stats,
        }
    }
}

/// The single sector holding all of `rho`, if the schedule and noise keep it there.
fn confining_sector(
    rho: &CMatrix,
    sites: usize,
    schedule: &AnnealSchedule,
    noise: &NoiseSpec,
) -> Option<Sector> {
    if noise.rate > 0.0 && noise.operator != LindbladKind::Z {
        return None;
    }
    if symmetry::leakage_of(schedule.problem().matrix()) > CONSERVATION_TOL
        || symmetry::leakage_of(schedule.driver().matrix()) > CONSERVATION_TOL
    {
        return None;
    }
    let dec = symmetry::decompose(sites).ok()?;
    let diag: Vec<f64> = (0..rho.nrows()).map(|i| rho[(i, i)].re).collect();
    let pops = dec.populations(&diag);
    let occupied: Vec<usize> = (0..pops.len()).filter(|&i| pops[i] != 0.0).collect();
    if occupied.len() != 1 {
        return None;
    }
    let sector = dec.sectors()[occupied[0]].clone();
    let inside = sector.embed_matrix(&sector.restrict_matrix(rho));
    (linalg::max_abs_diff(&inside, rho) == 0.0).then_some(sector)
}

/// Integrates the master equation from `rho0` over `[0, T]`.
///
/// With σ^z (or no) noise, `S_z`-conserving Hamiltonians and `rho0` inside one
/// sector, the integration runs on that sector's block and is re-embedded.
///
/// A sample violating trace, Hermiticity or positivity bounds is re-integrated
/// from the previous sample with adaptive tolerances tightened tenfold, down to
/// [`MIN_TOLERANCE_FACTOR`]; beyond that the violation is an
/// [`Error::IntegrationFailure`].
pub fn evolve_open(
    rho0: &DensityMatrix,
    schedule: &AnnealSchedule,
    noise: &NoiseSpec,
    params: &IntegratorParams,
) -> Result<Trajectory<DensityMatrix>> {
    params.validate()?;
    noise.validate()?;
    let sites = rho0.sites();
    if schedule.sites() != sites {
        return Err(Error::arg(format!(
            "schedule on {} sites, state on {sites}",
            schedule.sites()
        )));
    }
    if let Some(reason) = invariant_violation(rho0.matrix()) {
        return Err(Error::contract(format!("initial state: {reason}")));
    }
    let total_time = schedule.total_time();
    let sector = if params.sector_reduction {
        confining_sector(rho0.matrix(), sites, schedule, noise)
    } else {
        None
    };

    let (driver, problem, start, basis) = match &sector {
        Some(s) => (
            s.restrict_matrix(schedule.driver().matrix()),
            s.restrict_matrix(schedule.problem().matrix()),
            s.restrict_matrix(rho0.matrix()),
            s.indices().to_vec(),
        ),
        None => (
            schedule.driver().matrix().clone(),
            schedule.problem().matrix().clone(),
            rho0.matrix().clone(),
            (0..1usize << sites).collect(),
        ),
    };
    let dim = basis.len();
    let mut system = GkslSystem::new(
        LinearHamiltonian::new(&driver, &problem, total_time),
        Dissipator::new(noise.operator, noise.rate, sites, &basis),
    );
    let lift = |m: CMatrix| match &sector {
        Some(s) => s.embed_matrix(&m),
        None => m,
    };
    let times = params.sample_times(total_time);
    let mut tolerance_factor = 1.0;
    let mut stats = IntegrationStats::default();
    let samples = loop {
        let attempt = params.with_tolerance_factor(tolerance_factor);
        let mut stepper = Stepper::new(system.len(), &attempt, total_time);
        let mut y = kernel::matrix_to_planes(&start);
        let mut samples = Vec::with_capacity(times.len());
        samples.push((0.0, rho0.clone()));
        let mut violation = None;
        for w in times.windows(2) {
            stepper.advance(&mut system, w[0], w[1], &mut y)?;
            let block = kernel::planes_to_matrix(&y, dim);
            if let Some(reason) = invariant_violation(&block) {
                violation = Some((w[1], reason));
                break;
            }
            samples.push((w[1], DensityMatrix::from_parts(sites, lift(block))));
        }
        stats += stepper.stats();
        let Some((time, reason)) = violation else {
            break samples;
        };
        if params.method != Method::AdaptiveRk || tolerance_factor <= MIN_TOLERANCE_FACTOR {
            return Err(Error::IntegrationFailure { time, reason });
        }
        tolerance_factor *= 0.1;
        stats.retries += 1;
        log::debug!("{reason} at t = {time}; restarting at tolerance factor {tolerance_factor:e}");
    };
    let final_state = samples
        .last()
        .map(|s| s.1.clone())
        .unwrap_or_else(|| rho0.clone());
    Ok(Trajectory {
        final_state,
        samples,
        stats,
        reduced_to: sector,
    })
}

/// Integrates `dψ/dt = -iH(t)ψ` from `psi0` over `[0, T]`.
pub fn evolve_closed(
    psi0: &StateVector,
    schedule: &AnnealSchedule,
    params: &IntegratorParams,
) -> Result<Trajectory<StateVector>> {
    params.validate()?;
    let sites = psi0.sites();
    if schedule.sites() != sites {
        return Err(Error::arg(format!(
            "schedule on {} sites, state on {sites}",
            schedule.sites()
        )));
    }
    let total_time = schedule.total_time();
    let mut system = SchrodingerSystem {
        hamiltonian: LinearHamiltonian::new(
            schedule.driver().matrix(),
            schedule.problem().matrix(),
            total_time,
        ),
    };
    let dim = psi0.dim();
    let mut y = kernel::vector_to_planes(psi0.amplitudes());
    let mut stepper = Stepper::new(system.len(), params, total_time);
    let times = params.sample_times(total_time);
    let mut samples = Vec::with_capacity(times.len());
    samples.push((0.0, psi0.clone()));
    for w in times.windows(2) {
        stepper.advance(&mut system, w[0], w[1], &mut y)?;
        let v = kernel::planes_to_vector(&y, dim);
        let norm = v.norm();
        if (norm - 1.0).abs() > CLOSED_NORM_TOL || !norm.is_finite() {
            return Err(Error::IntegrationFailure {
                time: w[1],
                reason: format!("norm {norm} drifted from 1"),
            });
        }
        samples.push((w[1], StateVector::from_parts(sites, v)));
    }
    let final_state = samples
        .last()
        .map(|s| s.1.clone())
        .unwrap_or_else(|| psi0.clone());
    Ok(Trajectory {
        final_state,
        samples,
        stats: stepper.stats(),
        reduced_to: None,
    })
}

/// Master-equation right-hand side from the production kernel at time `t`.
pub(crate) fn kernel_rhs(
    rho: &DensityMatrix,
    schedule: &AnnealSchedule,
    noise: &NoiseSpec,
    t: f64,
) -> CMatrix {
    let dim = rho.dim();
    let basis: Vec<usize> = (0..dim).collect();
    let mut system = GkslSystem::new(
        LinearHamiltonian::new(
            schedule.driver().matrix(),
            schedule.problem().matrix(),
            schedule.total_time(),
        ),
        Dissipator::new(noise.operator, noise.rate, rho.sites(), &basis),
    );
    let y = kernel::matrix_to_planes(rho.matrix());
    let mut dy = vec![0.0; y.len()];
    system.rhs(t, &y, &mut dy);
    kernel::planes_to_matrix(&dy, dim)
}

/// Single-qubit `|+⟩⟨+|` coherence under σ^z dephasing alone: `½ e^{-2γt}`.
pub fn dephased_coherence(rate: f64, t: f64) -> f64 {
    0.5 * (-2.0 * rate * t).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{random_xxz_chain, transverse_field, xy_ring, SpinStarParams};
    use crate::linalg::{max_abs, max_abs_diff};
    use crate::spin_ops::total_sz;

    fn plus_state() -> DensityMatrix {
        DensityMatrix::from_pure(&StateVector::all_plus(1).unwrap())
    }

    fn zero_op(sites: usize) -> ManyBodyOperator {
        ManyBodyOperator::zeros(sites)
    }

    const COUPLINGS: [f64; 3] = [0.8441683664299817, 0.47574391516586223, 0.06980280523824778];

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(1, CMatrix::identity(2, 2)).is_err());
        let mut m = CMatrix::identity(2, 2) * c(0.5, 0.0);
        assert!(DensityMatrix::new(1, m.clone()).is_ok());
        m[(0, 1)] = c(0.1, 0.0);
        assert!(DensityMatrix::new(1, m.clone()).is_err());
        m[(1, 0)] = c(0.1, 0.0);
        assert!(DensityMatrix::new(1, m.clone()).is_ok());
        m[(0, 1)] = c(0.9, 0.0);
        m[(1, 0)] = c(0.9, 0.0);
        assert!(DensityMatrix::new(1, m).is_err());
    }

    #[test]
    fn rhs_vanishes_without_dynamics() {
        let d = gksl_rhs(&plus_state(), &zero_op(1), &NoiseSpec::none()).unwrap();
        assert_eq!(max_abs(&d), 0.0);
    }

    #[test]
    fn rhs_dephasing_of_plus_state() {
        let gamma = 0.3;
        let d = gksl_rhs(
            &plus_state(),
            &zero_op(1),
            &NoiseSpec::dephasing(gamma).unwrap(),
        )
        .unwrap();
        assert!((d[(0, 1)] - c(-2.0 * gamma * 0.5, 0.0)).norm() < 1e-15);
        assert!((d[(1, 0)] - c(-2.0 * gamma * 0.5, 0.0)).norm() < 1e-15);
        assert!(d[(0, 0)].norm() < 1e-15 && d[(1, 1)].norm() < 1e-15);
    }

    #[test]
    fn rhs_commutator_with_sigma_z() {
        let h = single_site_pauli(PauliKind::Z);
        let d = gksl_rhs(&plus_state(), &h, &NoiseSpec::none()).unwrap();
        assert!((d[(0, 1)] - c(0.0, -1.0)).norm() < 1e-15);
        assert!((d[(1, 0)] - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn rhs_rejects_dimension_mismatch() {
        assert!(matches!(
            gksl_rhs(&plus_state(), &zero_op(2), &NoiseSpec::none()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn rhs_is_traceless_and_hermitian() {
        let h = SpinStarParams::reproduction().build().unwrap();
        let rho = DensityMatrix::from_pure(&StateVector::all_plus(4).unwrap());
        for kind in [LindbladKind::X, LindbladKind::Y, LindbladKind::Z] {
            let d = gksl_rhs(&rho, &h, &NoiseSpec::new(0.2, kind).unwrap()).unwrap();
            assert!(linalg::trace(&d).norm() < 1e-12);
            assert!(linalg::hermitian_defect(&d) < 1e-12);
        }
    }

    #[test]
    fn fast_kernel_matches_matrix_products() {
        let problem = SpinStarParams::reproduction().build().unwrap();
        let driver = transverse_field(4, 1.3).unwrap();
        let total = 7.0;
        let schedule = AnnealSchedule::new(problem.clone(), driver.clone(), total).unwrap();
        let mut rho = CMatrix::from_fn(16, 16, |i, j| {
            c(
                ((i * 7 + j * 3) % 5) as f64 * 0.01,
                ((i + 2 * j) % 3) as f64 * 0.01,
            )
        });
        rho = (&rho + rho.adjoint()) * c(0.5, 0.0);
        let rho = DensityMatrix::from_parts(4, rho);
        for kind in [LindbladKind::X, LindbladKind::Y, LindbladKind::Z] {
            let noise = NoiseSpec::new(0.37, kind).unwrap();
            let fast = kernel_rhs(&rho, &schedule, &noise, 2.5);
            let slow = gksl_rhs(&rho, &schedule.at(2.5).unwrap(), &noise).unwrap();
            assert!(max_abs_diff(&fast, &slow) < 1e-12, "{kind:?}");
        }
    }

    #[test]
    fn dephasing_matches_analytic_decay() {
        let rate = 2.5e-5;
        let total = 1e4;
        let h = zero_op(1);
        let schedule = AnnealSchedule::new(h.clone(), h, total).unwrap();
        let traj = evolve_open(
            &plus_state(),
            &schedule,
            &NoiseSpec::dephasing(rate).unwrap(),
            &IntegratorParams::default(),
        )
        .unwrap();
        for (t, rho) in &traj.samples {
            let expected = dephased_coherence(rate, *t);
            assert!((rho.matrix()[(0, 1)].re - expected).abs() < 1e-6);
        }
        let got = traj.final_state.matrix()[(0, 1)].re;
        assert!((got - dephased_coherence(rate, total)).abs() < 1e-6);
    }

    #[test]
    fn diagonal_state_is_stationary() {
        let h = total_sz(3).unwrap();
        let schedule = AnnealSchedule::new(h.clone(), h, 50.0).unwrap();
        let rho = DensityMatrix::maximally_mixed(3).unwrap();
        let traj = evolve_open(
            &rho,
            &schedule,
            &NoiseSpec::none(),
            &IntegratorParams::default(),
        )
        .unwrap();
        assert!(max_abs_diff(traj.final_state.matrix(), rho.matrix()) < 1e-12);
        assert_eq!(traj.samples.len(), 51);
        assert_eq!(traj.samples.last().unwrap().0, 50.0);
    }

    #[test]
    fn eigenstate_only_acquires_phase() {
        let h = xy_ring(4, 1.0).unwrap();
        let eig = h.eigh().unwrap();
        let v = eig.vectors.column(3).into_owned();
        let psi = StateVector::new(4, v).unwrap();
        let schedule = AnnealSchedule::new(h.clone(), h, 20.0).unwrap();
        let traj = evolve_closed(&psi, &schedule, &IntegratorParams::default()).unwrap();
        assert!((psi.overlap(&traj.final_state).norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn slow_single_qubit_sweep_is_adiabatic() {
        let driver = transverse_field(1, 1.0).unwrap();
        let problem = single_site_pauli(PauliKind::Z);
        let schedule = AnnealSchedule::new(problem.clone(), driver, 2000.0).unwrap();
        let psi0 = StateVector::all_plus(1).unwrap();
        let params = IntegratorParams {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            ..Default::default()
        };
        let traj = evolve_closed(&psi0, &schedule, &params).unwrap();
        let ground = StateVector::basis(1, 1).unwrap();
        assert!(ground.overlap(&traj.final_state).norm_sqr() > 1.0 - 1e-6);
    }

    #[test]
    fn open_matches_closed_without_noise() {
        let problem = random_xxz_chain(&COUPLINGS, 0.7).unwrap();
        let driver = transverse_field(4, 1.0).unwrap();
        let schedule = AnnealSchedule::new(problem, driver, 30.0).unwrap();
        let psi0 = StateVector::all_plus(4).unwrap();
        let params = IntegratorParams::default();
        let closed = evolve_closed(&psi0, &schedule, &params).unwrap();
        let open = evolve_open(
            &DensityMatrix::from_pure(&psi0),
            &schedule,
            &NoiseSpec::none(),
            &params,
        )
        .unwrap();
        let d = open
            .final_state
            .trace_distance(&DensityMatrix::from_pure(&closed.final_state));
        assert!(d < 1e-6, "trace distance {d}");
    }

    fn xy_sector_start(sites: usize, k: usize) -> DensityMatrix {
        let driver = xy_ring(sites, 1.0).unwrap();
        let sector = Sector::new(sites, k).unwrap();
        let g = symmetry::sector_ground_state(&driver, &sector).unwrap();
        DensityMatrix::from_pure(&g.state)
    }

    #[test]
    fn reduction_agrees_with_full_space() {
        let problem = random_xxz_chain(&COUPLINGS, 0.7).unwrap();
        let schedule = AnnealSchedule::new(problem, xy_ring(4, 0.8).unwrap(), 6.0).unwrap();
        let rho0 = xy_sector_start(4, 2);
        let noise = NoiseSpec::dephasing(0.05).unwrap();
        let reduced = evolve_open(&rho0, &schedule, &noise, &IntegratorParams::default()).unwrap();
        assert_eq!(reduced.reduced_to.as_ref().map(|s| s.dim()), Some(6));
        let full_params = IntegratorParams {
            sector_reduction: false,
            ..Default::default()
        };
        let full = evolve_open(&rho0, &schedule, &noise, &full_params).unwrap();
        assert!(full.reduced_to.is_none());
        assert!(max_abs_diff(reduced.final_state.matrix(), full.final_state.matrix()) < 1e-8);
    }

    #[test]
    fn sector_populations_are_conserved_under_dephasing() {
        let problem = SpinStarParams::reproduction().build().unwrap();
        let schedule = AnnealSchedule::new(problem, xy_ring(4, 2.0).unwrap(), 5.0).unwrap();
        let rho0 = xy_sector_start(4, 2);
        let noise = NoiseSpec::dephasing(0.02).unwrap();
        let params = IntegratorParams {
            sector_reduction: false,
            ..Default::default()
        };
        let traj = evolve_open(&rho0, &schedule, &noise, &params).unwrap();
        let dec = symmetry::decompose(4).unwrap();
        let p0 = rho0.sector_populations(&dec);
        for (_, rho) in &traj.samples {
            let p = rho.sector_populations(&dec);
            for (a, b) in p.iter().zip(&p0) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn purity_decreases_under_dephasing() {
        let problem = random_xxz_chain(&COUPLINGS, 0.7).unwrap();
        let schedule =
            AnnealSchedule::new(problem, transverse_field(4, 1.0).unwrap(), 20.0).unwrap();
        let rho0 = DensityMatrix::from_pure(&StateVector::all_plus(4).unwrap());
        let traj = evolve_open(
            &rho0,
            &schedule,
            &NoiseSpec::dephasing(0.05).unwrap(),
            &IntegratorParams::default(),
        )
        .unwrap();
        let purities: Vec<f64> = traj.samples.iter().map(|(_, r)| r.purity()).collect();
        for w in purities.windows(2) {
            assert!(w[1] <= w[0] + 1e-8);
        }
        assert!(purities.last().unwrap() < &0.99);
    }

    #[test]
    fn fixed_rk4_agrees_with_adaptive() {
        let problem = SpinStarParams::reproduction().build().unwrap();
        let schedule = AnnealSchedule::new(problem, xy_ring(4, 2.7).unwrap(), 3.0).unwrap();
        let rho0 = xy_sector_start(4, 2);
        let noise = NoiseSpec::dephasing(2.5e-5).unwrap();
        let adaptive = evolve_open(&rho0, &schedule, &noise, &IntegratorParams::default()).unwrap();
        let rk4 = evolve_open(
            &rho0,
            &schedule,
            &noise,
            &IntegratorParams {
                method: Method::FixedRk4,
                max_step: Some(5e-4),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(adaptive.final_state.trace_distance(&rk4.final_state) < 1e-7);
    }

    #[test]
    fn params_validation() {
        let mut p = IntegratorParams::default();
        assert!(p.validate().is_ok());
        p.sample_count = 1;
        assert!(p.validate().is_err());
        p = IntegratorParams {
            rel_tol: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        assert!(NoiseSpec::dephasing(-1.0).is_err());
    }

    #[test]
    fn lindblad_kind_parsing_rejects_non_involutions() {
        let ok: NoiseSpec = serde_json::from_str(r#"{"rate":0.1,"operator":"y"}"#).unwrap();
        assert_eq!(ok.operator, LindbladKind::Y);
        assert!(serde_json::from_str::<NoiseSpec>(r#"{"rate":0.1,"operator":"plus"}"#).is_err());
    }

    #[test]
    fn long_pure_runs_tighten_instead_of_failing() {
        let problem = SpinStarParams::reproduction().build().unwrap();
        let schedule =
            AnnealSchedule::new(problem, transverse_field(4, 1.0).unwrap(), 100.0).unwrap();
        let rho0 = DensityMatrix::from_pure(&StateVector::all_plus(4).unwrap());
        let traj = evolve_open(
            &rho0,
            &schedule,
            &NoiseSpec::none(),
            &IntegratorParams::default(),
        )
        .unwrap();
        assert!(traj.stats.retries >= 1);
        for (_, rho) in &traj.samples {
            assert!(linalg::eigvalsh(rho.matrix())[0] >= -POSITIVITY_TOL);
        }
        let fixed = IntegratorParams {
            method: Method::FixedRk4,
            max_step: Some(2.0),
            ..Default::default()
        };
        assert!(matches!(
            evolve_open(&rho0, &schedule, &NoiseSpec::none(), &fixed),
            Err(Error::IntegrationFailure { .. })
        ));
    }
}
