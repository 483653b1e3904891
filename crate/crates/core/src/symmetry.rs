//! Total-magnetization sectors: decomposition, restriction and sector ground states.
//!
//! Sectors are keyed internally by the down-spin count `k`; the external label
//! is the `S_z` eigenvalue `m = L - 2k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, ZERO};
use crate::spin_ops::{commutator, down_count, ManyBodyOperator, StateVector, MAX_SITES};

/// Leakage above which an operator is treated as not conserving `S_z`.
pub const CONSERVATION_TOL: f64 = 1e-10;
/// Relative (to the spectral range) window for calling two levels degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// One magnetization sector: every basis state with `down_spins` down spins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sector {
    sites: usize,
    down_spins: usize,
    indices: Vec<usize>,
}

impl Sector {
    pub fn new(sites: usize, down_spins: usize) -> Result<Self> {
        if sites == 0 || sites > MAX_SITES {
            return Err(Error::arg(format!(
                "site count {sites} outside 1..={MAX_SITES}"
            )));
        }
        if down_spins > sites {
            return Err(Error::arg(format!(
                "filling {down_spins} outside 0..={sites}"
            )));
        }
        let indices = (0..1usize << sites)
            .filter(|&a| down_count(a) == down_spins)
            .collect();
        Ok(Self {
            sites,
            down_spins,
            indices,
        })
    }

    /// Sector with `S_z` eigenvalue `magnetization`.
    pub fn with_magnetization(sites: usize, magnetization: i64) -> Result<Self> {
        let l = sites as i64;
        if magnetization.abs() > l || (l - magnetization) % 2 != 0 {
            return Err(Error::arg(format!(
                "magnetization {magnetization} impossible on {sites} sites"
            )));
        }
        Self::new(sites, ((l - magnetization) / 2) as usize)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn down_spins(&self) -> usize {
        self.down_spins
    }

    pub fn magnetization(&self) -> i64 {
        self.sites as i64 - 2 * self.down_spins as i64
    }

    /// Sorted computational basis indices of the sector.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn contains(&self, index: usize) -> bool {
        down_count(index) == self.down_spins && index < (1usize << self.sites)
    }

    /// Sub-matrix of `m` on this sector's rows and columns.
    pub(crate) fn restrict_matrix(&self, m: &CMatrix) -> CMatrix {
        let d = self.dim();
        CMatrix::from_fn(d, d, |i, j| m[(self.indices[i], self.indices[j])])
    }

    /// Places a sector block back in the full space, zero elsewhere.
    pub(crate) fn embed_matrix(&self, block: &CMatrix) -> CMatrix {
        let dim = 1usize << self.sites;
        let mut m = CMatrix::zeros(dim, dim);
        for (i, &a) in self.indices.iter().enumerate() {
            for (j, &b) in self.indices.iter().enumerate() {
                m[(a, b)] = block[(i, j)];
            }
        }
        m
    }

    pub(crate) fn embed_vector(&self, v: &CVector) -> CVector {
        let mut full = CVector::zeros(1usize << self.sites);
        for (i, &a) in self.indices.iter().enumerate() {
            full[a] = v[i];
        }
        full
    }
}

/// Partition of the `2^L` basis into the `L + 1` magnetization sectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectorDecomposition {
    sites: usize,
    sectors: Vec<Sector>,
}

impl SectorDecomposition {
    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Sectors ordered by magnetization `L, L-2, …, -L`.
    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn by_magnetization(&self, magnetization: i64) -> Option<&Sector> {
        self.sectors
            .iter()
            .find(|s| s.magnetization() == magnetization)
    }

    /// Populations `Σ_{a ∈ sector} p_a` from a diagonal of probabilities.
    pub fn populations(&self, diagonal: &[f64]) -> Vec<f64> {
        self.sectors
            .iter()
            .map(|s| s.indices.iter().map(|&a| diagonal[a]).sum())
            .collect()
    }
}

pub fn decompose(sites: usize) -> Result<SectorDecomposition> {
    let sectors = (0..=sites)
        .map(|k| Sector::new(sites, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(SectorDecomposition { sites, sectors })
}

/// True iff `max |[H, Q]| ≤ tol`.
pub fn is_conserved(h: &ManyBodyOperator, q: &ManyBodyOperator, tol: f64) -> Result<bool> {
    Ok(commutator(h, q)?.max_abs() <= tol)
}

/// Largest matrix element of `op` between different magnetization sectors.
pub fn block_leakage(op: &ManyBodyOperator, decomposition: &SectorDecomposition) -> Result<f64> {
    if op.sites() != decomposition.sites() {
        return Err(Error::arg(format!(
            "operator on {} sites, decomposition on {}",
            op.sites(),
            decomposition.sites()
        )));
    }
    Ok(leakage_of(op.matrix()))
}

pub(crate) fn leakage_of(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for a in 0..n {
        let ka = down_count(a);
        for b in 0..n {
            if down_count(b) != ka {
                worst = worst.max(m[(a, b)].norm());
            }
        }
    }
    worst
}

/// A Hamiltonian block on one sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorOperator {
    sector: Sector,
    matrix: CMatrix,
}

impl SectorOperator {
    pub fn magnetization(&self) -> i64 {
        self.sector.magnetization()
    }

    pub fn parent_sites(&self) -> usize {
        self.sector.sites()
    }

    pub fn sector(&self) -> &Sector {
        &self.sector
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_hermitian(&self) -> bool {
        linalg::hermitian_defect(&self.matrix) <= crate::spin_ops::HERMITIAN_TOL
    }

    /// Ascending block eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.matrix)
    }

    /// Full-space operator equal to this block on the sector and zero elsewhere.
    pub fn embed(&self) -> ManyBodyOperator {
        ManyBodyOperator::from_parts(self.sector.sites(), self.sector.embed_matrix(&self.matrix))
    }
}

/// Block of `op` on `sector`; `op` must conserve `S_z`.
pub fn restrict(op: &ManyBodyOperator, sector: &Sector) -> Result<SectorOperator> {
    if op.sites() != sector.sites() {
        return Err(Error::arg(format!(
            "operator on {} sites, sector on {}",
            op.sites(),
            sector.sites()
        )));
    }
    let leak = leakage_of(op.matrix());
    if leak > CONSERVATION_TOL {
        return Err(Error::contract(format!(
            "operator does not conserve S_z (leakage {leak:.3e})"
        )));
    }
    Ok(SectorOperator {
        sector: sector.clone(),
        matrix: sector.restrict_matrix(op.matrix()),
    })
}

/// Lowest eigenpair of a sector block, embedded in the full space.
#[derive(Debug, Clone)]
pub struct SectorGroundState {
    pub energy: f64,
    pub state: StateVector,
    /// Number of block levels within the degeneracy window of the lowest one.
    pub degeneracy: usize,
}

/// Ground state of `h` restricted to `sector`.
///
/// Within a degenerate lowest eigenspace the state is the projection of the
/// lowest-index sector basis vector with nonzero overlap. The global phase
/// makes the first non-negligible amplitude real and positive.
pub fn sector_ground_state(h: &ManyBodyOperator, sector: &Sector) -> Result<SectorGroundState> {
    let block = restrict(h, sector)?;
    if !block.is_hermitian() {
        return Err(Error::contract("sector block is not Hermitian"));
    }
    let eig = linalg::eigh(&block.matrix);
    let lowest = eig.values[0];
    let range = eig.values[eig.values.len() - 1] - lowest;
    let window = DEGENERACY_TOL * range;
    let degeneracy = eig
        .values
        .iter()
        .take_while(|&&e| e - lowest <= window)
        .count();

    let local = if degeneracy == 1 {
        eig.vectors.column(0).into_owned()
    } else {
        let basis = eig.vectors.columns(0, degeneracy);
        let mut chosen = None;
        for i in 0..block.dim() {
            // Projection of e_i onto the degenerate eigenspace.
            let coeffs: CVector = basis.row(i).adjoint();
            let v = basis * coeffs;
            if v.norm() > 1e-8 {
                chosen = Some(v);
                break;
            }
        }
        chosen.ok_or_else(|| Error::Numerical("empty degenerate eigenspace".into()))?
    };
    let local = fix_phase(local.unscale(local.norm()));
    let state = StateVector::new(sector.sites(), sector.embed_vector(&local))?;
    Ok(SectorGroundState {
        energy: lowest,
        state,
        degeneracy,
    })
}

/// Rotates `v` so its first non-negligible entry is real and positive.
pub(crate) fn fix_phase(v: CVector) -> CVector {
    let scale = v.iter().fold(0.0, |m: f64, z| m.max(z.norm()));
    match v.iter().find(|z| z.norm() > 1e-8 * scale) {
        Some(&z) if z != ZERO => {
            let phase = z.conj() / z.norm();
            v * phase
        }
        _ => v,
    }
}

/// Full-space spectrum recovered as the sorted union of all sector spectra.
pub fn sector_resolved_spectrum(h: &ManyBodyOperator) -> Result<Vec<f64>> {
    let dec = decompose(h.sites())?;
    let mut all = Vec::with_capacity(h.dim());
    for s in dec.sectors() {
        all.extend(restrict(h, s)?.eigenvalues());
    }
    all.sort_by(f64::total_cmp);
    Ok(all)
}

#[cfg(test)]
pub(crate) fn shifted(h: &ManyBodyOperator, shift: f64) -> ManyBodyOperator {
    let id = CMatrix::identity(h.dim(), h.dim()) * linalg::c(shift, 0.0);
    ManyBodyOperator::from_parts(h.sites(), h.matrix() + id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{
        random_xxz_chain, transverse_field, xy_ground_energy_analytic, xy_ring, SpinStarParams,
    };
    use crate::linalg::spectrum_distance;
    use crate::spin_ops::total_sz;
    use proptest::prelude::*;

    const TABLE_J3: [f64; 3] = [0.8441683664299817, 0.47574391516586223, 0.06980280523824778];

    #[test]
    fn decompose_small() {
        let d = decompose(2).unwrap();
        let got: Vec<(i64, Vec<usize>)> = d
            .sectors()
            .iter()
            .map(|s| (s.magnetization(), s.indices().to_vec()))
            .collect();
        assert_eq!(got, vec![(2, vec![0]), (0, vec![1, 2]), (-2, vec![3])]);
        let sizes: Vec<usize> = decompose(4)
            .unwrap()
            .sectors()
            .iter()
            .map(Sector::dim)
            .collect();
        assert_eq!(sizes, vec![1, 4, 6, 4, 1]);
        assert_eq!(decompose(1).unwrap().sectors().len(), 2);
    }

    #[test]
    fn sectors_partition_the_basis() {
        for l in 1..=8 {
            let d = decompose(l).unwrap();
            let mut all: Vec<usize> = d
                .sectors()
                .iter()
                .flat_map(|s| s.indices().to_vec())
                .collect();
            assert!(d
                .sectors()
                .iter()
                .all(|s| s.indices().windows(2).all(|w| w[0] < w[1])));
            all.sort_unstable();
            assert_eq!(all, (0..1usize << l).collect::<Vec<_>>());
        }
    }

    #[test]
    fn conservation_checks() {
        let sz = total_sz(4).unwrap();
        assert!(is_conserved(&xy_ring(4, 1.0).unwrap(), &sz, 1e-12).unwrap());
        assert!(!is_conserved(&transverse_field(4, 1.0).unwrap(), &sz, 1e-12).unwrap());
        let h = transverse_field(4, 1.0).unwrap();
        assert!(is_conserved(&h, &ManyBodyOperator::identity(4), 0.0).unwrap());
        assert!(is_conserved(&h, &total_sz(3).unwrap(), 1.0).is_err());
    }

    #[test]
    fn leakage_values() {
        let d4 = decompose(4).unwrap();
        assert_eq!(block_leakage(&xy_ring(4, 1.0).unwrap(), &d4).unwrap(), 0.0);
        let d2 = decompose(2).unwrap();
        assert_eq!(
            block_leakage(&transverse_field(2, 1.0).unwrap(), &d2).unwrap(),
            1.0
        );
        let star = SpinStarParams::reproduction().build().unwrap();
        assert!(block_leakage(&star, &d4).unwrap() <= 1e-15);
    }

    #[test]
    fn restrict_examples() {
        let s = Sector::with_magnetization(3, 1).unwrap();
        let block = restrict(&total_sz(3).unwrap(), &s).unwrap();
        assert_eq!(*block.matrix(), CMatrix::identity(3, 3));
        let zero = restrict(&ManyBodyOperator::zeros(3), &s).unwrap();
        assert_eq!(
            zero.matrix().iter().fold(0.0, |m: f64, z| m.max(z.norm())),
            0.0
        );
        let err = restrict(&transverse_field(3, 1.0).unwrap(), &s).unwrap_err();
        assert!(matches!(err, Error::Contract(ref m) if m.contains("leakage")));
    }

    #[test]
    fn restricted_block_spectrum_is_subset() {
        let h = xy_ring(4, 1.0).unwrap();
        let full = h.eigenvalues().unwrap();
        let block = restrict(&h, &Sector::with_magnetization(4, 0).unwrap()).unwrap();
        for e in block.eigenvalues() {
            assert!(full.iter().any(|f| (f - e).abs() < 1e-9));
        }
        assert_eq!(block.dim(), 6);
    }

    #[test]
    fn union_of_sector_spectra_is_full_spectrum() {
        let cases = vec![
            xy_ring(4, 1.0).unwrap(),
            random_xxz_chain(&TABLE_J3, 0.7).unwrap(),
            SpinStarParams::reproduction().build().unwrap(),
            xy_ring(6, 0.3).unwrap(),
        ];
        for h in cases {
            let full = h.eigenvalues().unwrap();
            let union = sector_resolved_spectrum(&h).unwrap();
            assert!(spectrum_distance(&full, &union) < 1e-9);
        }
    }

    #[test]
    fn embed_then_restrict_is_identity() {
        let h = random_xxz_chain(&TABLE_J3, 0.7).unwrap();
        let s = Sector::with_magnetization(4, 0).unwrap();
        let block = restrict(&h, &s).unwrap();
        let again = restrict(&block.embed(), &s).unwrap();
        assert_eq!(block, again);
    }

    #[test]
    fn ground_state_examples() {
        let g = sector_ground_state(
            &total_sz(2).unwrap(),
            &Sector::with_magnetization(2, -2).unwrap(),
        )
        .unwrap();
        assert_eq!(g.energy, -2.0);
        assert_eq!(g.state, StateVector::basis(2, 3).unwrap());

        let g = sector_ground_state(
            &xy_ring(4, 1.0).unwrap(),
            &Sector::with_magnetization(4, 0).unwrap(),
        )
        .unwrap();
        assert!((g.energy - xy_ground_energy_analytic(4, 1.0, 2).unwrap()).abs() < 1e-9);
        assert_eq!(g.degeneracy, 1);

        let h = random_xxz_chain(&TABLE_J3, 0.7).unwrap();
        let best = decompose(4)
            .unwrap()
            .sectors()
            .iter()
            .map(|s| sector_ground_state(&h, s).unwrap().energy)
            .fold(f64::INFINITY, f64::min);
        assert!((best - h.ground_energy().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn ground_state_is_an_eigenvector_with_fixed_phase() {
        let h = SpinStarParams::reproduction().build().unwrap();
        let s = Sector::with_magnetization(4, 0).unwrap();
        let g = sector_ground_state(&h, &s).unwrap();
        let v = g.state.amplitudes();
        let hv = h.matrix() * v;
        assert!((hv - v * linalg::c(g.energy, 0.0)).norm() < 1e-9);
        let first = v.iter().find(|z| z.norm() > 1e-8).unwrap();
        assert!(first.im.abs() < 1e-14 && first.re > 0.0);
        for a in 0..16 {
            if !s.contains(a) {
                assert_eq!(v[a], ZERO);
            }
        }
    }

    #[test]
    fn degenerate_sector_is_flagged() {
        // Odd ring: one down spin fills one of the two degenerate momenta ±2π/3.
        let h = xy_ring(3, 1.0).unwrap();
        let g = sector_ground_state(&h, &Sector::new(3, 1).unwrap()).unwrap();
        assert_eq!(g.degeneracy, 2);
        let again = sector_ground_state(&h, &Sector::new(3, 1).unwrap()).unwrap();
        assert_eq!(g.state, again.state);
        // One-dimensional sector: trivially non-degenerate.
        let g = sector_ground_state(&h, &Sector::new(3, 0).unwrap()).unwrap();
        assert_eq!(g.degeneracy, 1);
    }

    proptest! {
        #[test]
        fn ground_energy_shift_covariance(shift in -5.0f64..5.0, k in 0usize..=4) {
            let h = random_xxz_chain(&TABLE_J3, 0.7).unwrap();
            let s = Sector::new(4, k).unwrap();
            let e0 = sector_ground_state(&h, &s).unwrap().energy;
            let e1 = sector_ground_state(&shifted(&h, shift), &s).unwrap().energy;
            prop_assert!((e1 - (e0 + shift)).abs() < 1e-9);
        }

        #[test]
        fn leakage_zero_iff_conserved(
            couplings in prop::collection::vec(0.0f64..2.0, 1..5),
            delta in -1.0f64..1.0,
            field in prop_oneof![Just(0.0), 0.1f64..1.0],
        ) {
            let h = random_xxz_chain(&couplings, delta).unwrap();
            let l = h.sites();
            let h = &h + &transverse_field(l, field).unwrap();
            let leak = block_leakage(&h, &decompose(l).unwrap()).unwrap();
            let conserved = is_conserved(&h, &total_sz(l).unwrap(), 1e-12).unwrap();
            prop_assert_eq!(leak == 0.0, conserved);
        }

        #[test]
        fn sector_union_matches_full(
            couplings in prop::collection::vec(0.0f64..2.0, 1..6),
            delta in -1.5f64..1.5,
            g in 0.0f64..2.0,
        ) {
            let h = random_xxz_chain(&couplings, delta).unwrap();
            let l = h.sites();
            let h = if l >= 2 { &h + &xy_ring(l, g).unwrap() } else { h };
            let full = h.eigenvalues().unwrap();
            let union = sector_resolved_spectrum(&h).unwrap();
            prop_assert!(spectrum_distance(&full, &union) < 1e-9);
        }
    }
}
