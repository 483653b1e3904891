//! Driver and problem Hamiltonians and the linear annealing schedule.
//!
//! Energies are in GHz and times in ns with ħ = 1: a level at energy `E`
//! accumulates phase `E·t` with no factor of 2π.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix};
use crate::spin_ops::{
    pauli_matrix, site_product, total_sz, ManyBodyOperator, PauliKind, MAX_SITES,
};

fn check_sites(sites: usize, min: usize) -> Result<()> {
    if sites < min || sites > MAX_SITES {
        return Err(Error::arg(format!(
            "site count {sites} outside {min}..={MAX_SITES}"
        )));
    }
    Ok(())
}

/// Conventional driver `-B Σ_j σx_j`.
pub fn transverse_field(sites: usize, amplitude: f64) -> Result<ManyBodyOperator> {
    check_sites(sites, 1)?;
    let x = pauli_matrix(PauliKind::X);
    let dim = 1usize << sites;
    let mut m = CMatrix::zeros(dim, dim);
    for j in 1..=sites {
        m += site_product(&[(j, &x)], sites).into_matrix();
    }
    Ok(ManyBodyOperator::from_parts(sites, m * c(-amplitude, 0.0)))
}

/// Periodic XY ring `g Σ_j (σ+_j σ-_{j+1} + σ-_j σ+_{j+1})` with `σ_{L+1} ≡ σ_1`.
///
/// For `L = 2` both bonds join sites 1 and 2 and are kept, doubling the
/// flip-flop amplitude.
pub fn xy_ring(sites: usize, coupling: f64) -> Result<ManyBodyOperator> {
    if sites < 2 {
        return Err(Error::arg(format!(
            "XY ring needs at least 2 sites, got {sites}"
        )));
    }
    check_sites(sites, 2)?;
    let plus = pauli_matrix(PauliKind::Plus);
    let minus = pauli_matrix(PauliKind::Minus);
    let dim = 1usize << sites;
    let mut m = CMatrix::zeros(dim, dim);
    for j in 1..=sites {
        let next = j % sites + 1;
        m += site_product(&[(j, &plus), (next, &minus)], sites).into_matrix();
        m += site_product(&[(j, &minus), (next, &plus)], sites).into_matrix();
    }
    Ok(ManyBodyOperator::from_parts(sites, m * c(coupling, 0.0)))
}

/// How the outer-spin weights `e^{±2π j/L}` of the deformed spin star are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinStarPhase {
    /// Unit-modulus phases `e^{±2πi j/L}`.
    #[default]
    Complex,
    /// Real weights `e^{2π j/L}`; `J-` is taken as the adjoint of `J+`.
    Real,
}

/// Parameters of the deformed spin star.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinStarParams {
    /// Number of outer spins; the register holds `outer + 1` qubits.
    pub outer: usize,
    pub omega: f64,
    pub omega1: f64,
    pub coupling: f64,
    #[serde(default)]
    pub phase: SpinStarPhase,
}

impl SpinStarParams {
    /// `ω = ω₁ = 0.5 GHz`, `J = 5 GHz`, three outer spins.
    pub fn reproduction() -> Self {
        Self {
            outer: 3,
            omega: 0.5,
            omega1: 0.5,
            coupling: 5.0,
            phase: SpinStarPhase::Complex,
        }
    }

    pub fn build(&self) -> Result<ManyBodyOperator> {
        deformed_spin_star(
            self.outer,
            self.omega,
            self.omega1,
            self.coupling,
            self.phase,
        )
    }
}

/// Deformed spin star `ω σz_0 + ω₁ Jz + J(σ+_0 J- + σ-_0 J+)`.
///
/// The central qubit is the first tensor factor (site 1); outer spin `j` sits at
/// site `j + 1`. `J+ = Σ_j w_j σ+_j`, `J- = (J+)†` and `Jz = Σ_j σz_j` over the
/// outer spins, with `w_j = e^{2πi j/L}` or `e^{2π j/L}` depending on `phase`.
pub fn deformed_spin_star(
    outer: usize,
    omega: f64,
    omega1: f64,
    coupling: f64,
    phase: SpinStarPhase,
) -> Result<ManyBodyOperator> {
    if outer == 0 {
        return Err(Error::arg("spin star needs at least one outer spin"));
    }
    let sites = outer + 1;
    check_sites(sites, 2)?;
    let z = pauli_matrix(PauliKind::Z);
    let plus = pauli_matrix(PauliKind::Plus);
    let minus = pauli_matrix(PauliKind::Minus);
    let dim = 1usize << sites;

    let mut m = site_product(&[(1, &z)], sites).into_matrix() * c(omega, 0.0);
    for j in 1..=outer {
        let site = j + 1;
        let angle = 2.0 * PI * j as f64 / outer as f64;
        let weight = match phase {
            SpinStarPhase::Complex => c(angle.cos(), angle.sin()),
            SpinStarPhase::Real => c(angle.exp(), 0.0),
        };
        m += site_product(&[(site, &z)], sites).into_matrix() * c(omega1, 0.0);
        // σ+_0 J- carries conj(w_j), σ-_0 J+ carries w_j.
        let down_out = site_product(&[(1, &plus), (site, &minus)], sites).into_matrix();
        let up_out = site_product(&[(1, &minus), (site, &plus)], sites).into_matrix();
        m += down_out * (weight.conj() * coupling);
        m += up_out * (weight * coupling);
    }
    debug_assert_eq!(m.nrows(), dim);
    Ok(ManyBodyOperator::from_parts(sites, m))
}

/// Open XXZ chain `Σ_j J_j (σx_j σx_{j+1} + σy_j σy_{j+1} + Δ σz_j σz_{j+1})` on
/// `couplings.len() + 1` sites.
pub fn random_xxz_chain(couplings: &[f64], anisotropy: f64) -> Result<ManyBodyOperator> {
    if couplings.is_empty() {
        return Err(Error::arg("XXZ chain needs at least one coupling"));
    }
    let sites = couplings.len() + 1;
    check_sites(sites, 2)?;
    let x = pauli_matrix(PauliKind::X);
    let y = pauli_matrix(PauliKind::Y);
    let z = pauli_matrix(PauliKind::Z);
    let dim = 1usize << sites;
    let mut m = CMatrix::zeros(dim, dim);
    for (i, &jj) in couplings.iter().enumerate() {
        let (a, b) = (i + 1, i + 2);
        let bond = site_product(&[(a, &x), (b, &x)], sites).into_matrix()
            + site_product(&[(a, &y), (b, &y)], sites).into_matrix()
            + site_product(&[(a, &z), (b, &z)], sites).into_matrix() * c(anisotropy, 0.0);
        m += bond * c(jj, 0.0);
    }
    Ok(ManyBodyOperator::from_parts(sites, m))
}

/// Linear interpolation `H(t) = (t/T) H_P + (1 - t/T) H_D`.
#[derive(Debug, Clone)]
pub struct AnnealSchedule {
    problem: ManyBodyOperator,
    driver: ManyBodyOperator,
    total_time: f64,
}

impl AnnealSchedule {
    pub fn new(
        problem: ManyBodyOperator,
        driver: ManyBodyOperator,
        total_time: f64,
    ) -> Result<Self> {
        if problem.sites() != driver.sites() {
            return Err(Error::arg(format!(
                "problem on {} sites, driver on {}",
                problem.sites(),
                driver.sites()
            )));
        }
        problem.require_hermitian("problem Hamiltonian")?;
        driver.require_hermitian("driver Hamiltonian")?;
        if !(total_time > 0.0 && total_time.is_finite()) {
            return Err(Error::arg(format!(
                "annealing time {total_time} must be positive"
            )));
        }
        Ok(Self {
            problem,
            driver,
            total_time,
        })
    }

    pub fn problem(&self) -> &ManyBodyOperator {
        &self.problem
    }

    pub fn driver(&self) -> &ManyBodyOperator {
        &self.driver
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn sites(&self) -> usize {
        self.problem.sites()
    }

    /// `H(t)` for `t ∈ [0, T]`.
    pub fn at(&self, t: f64) -> Result<ManyBodyOperator> {
        if !(0.0..=self.total_time).contains(&t) {
            return Err(Error::arg(format!(
                "time {t} outside [0, {}]",
                self.total_time
            )));
        }
        Ok(self.at_fraction(t / self.total_time))
    }

    /// `H` at schedule fraction `s = t/T`; endpoints return the stored operators exactly.
    pub fn at_fraction(&self, s: f64) -> ManyBodyOperator {
        if s == 0.0 {
            return self.driver.clone();
        }
        if s == 1.0 {
            return self.problem.clone();
        }
        let m = self.problem.matrix() * c(s, 0.0) + self.driver.matrix() * c(1.0 - s, 0.0);
        ManyBodyOperator::from_parts(self.sites(), m)
    }

    /// Same Hamiltonians with a different annealing time.
    pub fn with_total_time(&self, total_time: f64) -> Result<Self> {
        Self::new(self.problem.clone(), self.driver.clone(), total_time)
    }
}

/// Ground energy of `xy_ring(L, g)` among states with `down_spins` down spins,
/// from the Jordan–Wigner free-fermion spectrum.
///
/// Down spins map to fermions hopping with amplitude `4g`. The ring closure
/// picks up the fermion parity: odd fillings see periodic momenta `2πn/L`,
/// even fillings antiperiodic `2π(n + 1/2)/L`. Single-particle energies are
/// `8g cos q` and the sector ground state fills the lowest `down_spins` of them.
pub fn xy_ground_energy_analytic(sites: usize, coupling: f64, down_spins: usize) -> Result<f64> {
    if sites < 2 {
        return Err(Error::arg(format!(
            "XY ring needs at least 2 sites, got {sites}"
        )));
    }
    if down_spins > sites {
        return Err(Error::arg(format!(
            "filling {down_spins} outside 0..={sites}"
        )));
    }
    let offset = if down_spins % 2 == 1 { 0.0 } else { 0.5 };
    let mut energies: Vec<f64> = (0..sites)
        .map(|n| {
            let q = 2.0 * PI * (n as f64 + offset) / sites as f64;
            8.0 * coupling * q.cos()
        })
        .collect();
    energies.sort_by(f64::total_cmp);
    Ok(energies[..down_spins].iter().sum())
}

/// `‖[H, S_z]‖_max` for an operator on its own register.
pub fn sz_commutator_norm(h: &ManyBodyOperator) -> Result<f64> {
    let sz = total_sz(h.sites())?;
    Ok(crate::spin_ops::commutator(h, &sz)?.max_abs())
}
