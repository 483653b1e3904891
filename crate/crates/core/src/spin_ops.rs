//! Many-body spin operators on `L` qubits as dense `2^L × 2^L` matrices.
//!
//! Basis convention: computational index `a` has site 1 as its most significant
//! bit, so site `j` (1-based) reads bit `L - j`. A zero bit is spin up
//! (`σz = +1`), a one bit is spin down. The ladder operators follow
//! `σ± = σx ± iσy` with no factor 1/2, so `σ+ = [[0, 2], [0, 0]]`.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64, I, ONE, ZERO};

/// Elementwise tolerance below which an operator counts as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on `|‖ψ‖ - 1|` for a valid state vector.
pub const NORM_TOL: f64 = 1e-10;
/// Largest imaginary part of an expectation value that is silently discarded.
pub const EXPECTATION_IMAG_TOL: f64 = 1e-10;
/// Largest supported site count for dense operators.
pub const MAX_SITES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PauliKind {
    X,
    Y,
    Z,
    Plus,
    Minus,
    Identity,
}

/// Dense operator on `sites` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct ManyBodyOperator {
    sites: usize,
    matrix: CMatrix,
    hermitian: bool,
}

impl ManyBodyOperator {
    pub fn new(sites: usize, matrix: CMatrix) -> Result<Self> {
        if sites == 0 || sites > MAX_SITES {
            return Err(Error::arg(format!(
                "site count {sites} outside 1..={MAX_SITES}"
            )));
        }
        let dim = 1usize << sites;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::arg(format!(
                "matrix is {}x{}, expected {dim}x{dim} for {sites} sites",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self::from_parts(sites, matrix))
    }

    /// Infallible constructor for internally built matrices of known shape.
    pub(crate) fn from_parts(sites: usize, matrix: CMatrix) -> Self {
        debug_assert_eq!(matrix.nrows(), 1 << sites);
        let hermitian = linalg::hermitian_defect(&matrix) <= HERMITIAN_TOL;
        Self {
            sites,
            matrix,
            hermitian,
        }
    }

    pub fn zeros(sites: usize) -> Self {
        let dim = 1 << sites;
        Self::from_parts(sites, CMatrix::zeros(dim, dim))
    }

    pub fn identity(sites: usize) -> Self {
        let dim = 1 << sites;
        Self::from_parts(sites, CMatrix::identity(dim, dim))
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

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::from_parts(self.sites, &self.matrix * c(factor, 0.0))
    }

    /// Operator product `self · rhs`.
    pub fn compose(&self, rhs: &Self) -> Result<Self> {
        check_same_sites(self, rhs)?;
        Ok(Self::from_parts(self.sites, &self.matrix * &rhs.matrix))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_parts(self.sites, self.matrix.adjoint())
    }

    /// Ascending eigenvalues. Requires a Hermitian operator.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.require_hermitian("eigenvalues")?;
        Ok(linalg::eigvalsh(&self.matrix))
    }

    pub fn eigh(&self) -> Result<linalg::HermitianEigen> {
        self.require_hermitian("eigendecomposition")?;
        Ok(linalg::eigh(&self.matrix))
    }

    /// Smallest eigenvalue.
    pub fn ground_energy(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.matrix)
    }

    pub(crate) fn require_hermitian(&self, what: &str) -> Result<()> {
        if self.hermitian {
            Ok(())
        } else {
            Err(Error::contract(format!(
                "{what} requires a Hermitian operator (defect {:.3e})",
                linalg::hermitian_defect(&self.matrix)
            )))
        }
    }
}

fn check_same_sites(a: &ManyBodyOperator, b: &ManyBodyOperator) -> Result<()> {
    if a.sites != b.sites {
        return Err(Error::arg(format!(
            "operators act on {} and {} sites",
            a.sites, b.sites
        )));
    }
    Ok(())
}

impl Add for &ManyBodyOperator {
    type Output = ManyBodyOperator;

    /// Panics if the operands act on different site counts.
    fn add(self, rhs: Self) -> ManyBodyOperator {
        assert_eq!(self.sites, rhs.sites, "site count mismatch in operator sum");
        ManyBodyOperator::from_parts(self.sites, &self.matrix + &rhs.matrix)
    }
}

impl Sub for &ManyBodyOperator {
    type Output = ManyBodyOperator;

    fn sub(self, rhs: Self) -> ManyBodyOperator {
        assert_eq!(
            self.sites, rhs.sites,
            "site count mismatch in operator difference"
        );
        ManyBodyOperator::from_parts(self.sites, &self.matrix - &rhs.matrix)
    }
}

impl Mul<f64> for &ManyBodyOperator {
    type Output = ManyBodyOperator;

    fn mul(self, rhs: f64) -> ManyBodyOperator {
        self.scale(rhs)
    }
}

impl Neg for &ManyBodyOperator {
    type Output = ManyBodyOperator;

    fn neg(self) -> ManyBodyOperator {
        self.scale(-1.0)
    }
}

/// The 2×2 matrix of a single-site operator.
pub fn pauli_matrix(kind: PauliKind) -> CMatrix {
    let entries = match kind {
        PauliKind::X => [ZERO, ONE, ONE, ZERO],
        PauliKind::Y => [ZERO, -I, I, ZERO],
        PauliKind::Z => [ONE, ZERO, ZERO, -ONE],
        PauliKind::Plus => [ZERO, c(2.0, 0.0), ZERO, ZERO],
        PauliKind::Minus => [ZERO, ZERO, c(2.0, 0.0), ZERO],
        PauliKind::Identity => [ONE, ZERO, ZERO, ONE],
    };
    CMatrix::from_row_slice(2, 2, &entries)
}

pub fn single_site_pauli(kind: PauliKind) -> ManyBodyOperator {
    ManyBodyOperator::from_parts(1, pauli_matrix(kind))
}

/// Bit position of 1-based `site` in an `sites`-qubit basis index.
#[inline]
pub(crate) fn site_shift(site: usize, sites: usize) -> usize {
    sites - site
}

/// Spin-down count of a basis index.
#[inline]
pub fn down_count(index: usize) -> usize {
    index.count_ones() as usize
}

/// Places a single-site operator at `site` (1-based) of an `total_sites` register.
pub fn embed(op: &ManyBodyOperator, site: usize, total_sites: usize) -> Result<ManyBodyOperator> {
    if op.sites != 1 {
        return Err(Error::arg(format!(
            "embed expects a single-site operator, got {} sites",
            op.sites
        )));
    }
    if total_sites == 0 || total_sites > MAX_SITES {
        return Err(Error::arg(format!(
            "site count {total_sites} outside 1..={MAX_SITES}"
        )));
    }
    if site == 0 || site > total_sites {
        return Err(Error::arg(format!("site {site} outside 1..={total_sites}")));
    }
    Ok(site_product(&[(site, &op.matrix)], total_sites))
}

/// Product of single-site 2×2 factors acting on pairwise distinct sites.
pub(crate) fn site_product(factors: &[(usize, &CMatrix)], sites: usize) -> ManyBodyOperator {
    let dim = 1usize << sites;
    let shifts: Vec<usize> = factors.iter().map(|(s, _)| site_shift(*s, sites)).collect();
    debug_assert!(
        {
            let mut s = shifts.clone();
            s.sort_unstable();
            s.windows(2).all(|w| w[0] != w[1])
        },
        "site_product factors must act on distinct sites"
    );
    let mask: usize = shifts.iter().map(|s| 1usize << s).sum();
    let mut m = CMatrix::zeros(dim, dim);
    let k = factors.len();
    for a in 0..dim {
        let rest = a & !mask;
        for pattern in 0..(1usize << k) {
            let mut b = rest;
            let mut amp = ONE;
            for (f, ((_, op), &sh)) in factors.iter().zip(&shifts).enumerate() {
                let rb = (pattern >> f) & 1;
                let ra = (a >> sh) & 1;
                amp *= op[(ra, rb)];
                if amp == ZERO {
                    break;
                }
                b |= rb << sh;
            }
            if amp != ZERO {
                m[(a, b)] += amp;
            }
        }
    }
    ManyBodyOperator::from_parts(sites, m)
}

/// Total magnetization `Σ_j σz_j`; eigenvalue `L - 2k` on states with `k` down spins.
pub fn total_sz(sites: usize) -> Result<ManyBodyOperator> {
    if sites == 0 || sites > MAX_SITES {
        return Err(Error::arg(format!(
            "site count {sites} outside 1..={MAX_SITES}"
        )));
    }
    let dim = 1usize << sites;
    let diag = CVector::from_iterator(
        dim,
        (0..dim).map(|a| c(sites as f64 - 2.0 * down_count(a) as f64, 0.0)),
    );
    Ok(ManyBodyOperator::from_parts(
        sites,
        CMatrix::from_diagonal(&diag),
    ))
}

/// `AB - BA`.
pub fn commutator(a: &ManyBodyOperator, b: &ManyBodyOperator) -> Result<ManyBodyOperator> {
    check_same_sites(a, b)?;
    let ab = &a.matrix * &b.matrix;
    let ba = &b.matrix * &a.matrix;
    Ok(ManyBodyOperator::from_parts(a.sites, ab - ba))
}

/// A state that can report `Tr(ρ·M)` for a matrix of its dimension.
pub trait QuantumState {
    fn sites(&self) -> usize;

    /// The unchecked complex expectation of `m`.
    fn raw_expectation(&self, m: &CMatrix) -> C64;
}

/// Real expectation value of a Hermitian observable.
pub fn expectation<S: QuantumState + ?Sized>(op: &ManyBodyOperator, state: &S) -> Result<f64> {
    if op.sites() != state.sites() {
        return Err(Error::arg(format!(
            "operator on {} sites, state on {}",
            op.sites(),
            state.sites()
        )));
    }
    op.require_hermitian("expectation")?;
    let z = state.raw_expectation(op.matrix());
    if z.im.abs() > EXPECTATION_IMAG_TOL {
        return Err(Error::Numerical(format!(
            "expectation has imaginary residue {:.3e}",
            z.im
        )));
    }
    Ok(z.re)
}

/// Normalized pure state on `sites` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    sites: usize,
    amplitudes: CVector,
}

impl StateVector {
    pub fn new(sites: usize, amplitudes: CVector) -> Result<Self> {
        if sites == 0 || sites > MAX_SITES {
            return Err(Error::arg(format!(
                "site count {sites} outside 1..={MAX_SITES}"
            )));
        }
        if amplitudes.len() != 1 << sites {
            return Err(Error::arg(format!(
                "{} amplitudes for {sites} sites",
                amplitudes.len()
            )));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::contract(format!("state norm {norm} differs from 1")));
        }
        Ok(Self { sites, amplitudes })
    }

    /// Normalizes `amplitudes` first; fails on the zero vector.
    pub fn normalized(sites: usize, amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::arg("cannot normalize a zero or non-finite vector"));
        }
        Self::new(sites, amplitudes.unscale(norm))
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(sites: usize, index: usize) -> Result<Self> {
        let dim = 1usize << sites.min(MAX_SITES + 1);
        if index >= dim {
            return Err(Error::arg(format!("basis index {index} >= {dim}")));
        }
        let mut v = CVector::zeros(dim);
        v[index] = ONE;
        Self::new(sites, v)
    }

    /// `|+⟩^⊗L`, the ground state of the transverse-field driver.
    pub fn all_plus(sites: usize) -> Result<Self> {
        if sites == 0 || sites > MAX_SITES {
            return Err(Error::arg(format!(
                "site count {sites} outside 1..={MAX_SITES}"
            )));
        }
        let dim = 1usize << sites;
        let amp = c(1.0 / (dim as f64).sqrt(), 0.0);
        Self::new(sites, CVector::from_element(dim, amp))
    }

    pub(crate) fn from_parts(sites: usize, amplitudes: CVector) -> Self {
        Self { sites, amplitudes }
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &StateVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

impl QuantumState for StateVector {
    fn sites(&self) -> usize {
        self.sites
    }

    fn raw_expectation(&self, m: &CMatrix) -> C64 {
        self.amplitudes.dotc(&(m * &self.amplitudes))
    }
}
