//! Built-in oracle and invariant checks run by `symanneal verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annealing::sample_couplings;
use crate::error::Result;
use crate::evolution::{
    dephased_coherence, evolve_closed, evolve_open, gksl_rhs, kernel_rhs, DensityMatrix,
    IntegratorParams, LindbladKind, NoiseSpec,
};
use crate::hamiltonians::{
    random_xxz_chain, sz_commutator_norm, transverse_field, xy_ground_energy_analytic, xy_ring,
    AnnealSchedule, SpinStarParams,
};
use crate::io::reference_couplings;
use crate::linalg::{self, c, max_abs_diff, spectrum_distance, CMatrix};
use crate::spin_ops::{
    commutator, embed, pauli_matrix, single_site_pauli, ManyBodyOperator, PauliKind, StateVector,
};
use crate::symmetry::{self, Sector};

/// Result of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type CheckResult = std::result::Result<String, String>;
type NamedCheck = (&'static str, fn() -> CheckResult);

fn outcome(name: &'static str, r: CheckResult) -> CheckOutcome {
    match r {
        Ok(detail) => CheckOutcome {
            name,
            passed: true,
            detail,
        },
        Err(detail) => CheckOutcome {
            name,
            passed: false,
            detail,
        },
    }
}

fn lift<T>(r: Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn within(what: &str, value: f64, tol: f64) -> CheckResult {
    if value <= tol {
        Ok(format!("{what} = {value:.2e} <= {tol:.0e}"))
    } else {
        Err(format!("{what} = {value:.3e} exceeds {tol:.0e}"))
    }
}

fn xxz4() -> Result<ManyBodyOperator> {
    random_xxz_chain(&reference_couplings()[..3], 0.7)
}

fn pauli_algebra() -> CheckResult {
    let x = pauli_matrix(PauliKind::X);
    let y = pauli_matrix(PauliKind::Y);
    let z = pauli_matrix(PauliKind::Z);
    let p = pauli_matrix(PauliKind::Plus);
    let m = pauli_matrix(PauliKind::Minus);
    let id = CMatrix::identity(2, 2);
    let worst = [
        max_abs_diff(&(&x * &y), &(&z * c(0.0, 1.0))),
        max_abs_diff(&(&x * &x), &id),
        max_abs_diff(&p, &(&x + &y * c(0.0, 1.0))),
        max_abs_diff(&(&p * &m - &m * &p), &(&z * c(4.0, 0.0))),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    within("Pauli identity defect", worst, 1e-15)
}

fn random_hermitian(rng: &mut ChaCha8Rng, sites: usize) -> ManyBodyOperator {
    let dim = 1 << sites;
    let a = CMatrix::from_fn(dim, dim, |_, _| {
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let h = (&a + a.adjoint()) * c(0.5, 0.0);
    ManyBodyOperator::new(sites, h).expect("Hermitian by construction")
}

fn commutator_identities() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..8 {
        let a = random_hermitian(&mut rng, 3);
        let b = random_hermitian(&mut rng, 3);
        let ab = lift(commutator(&a, &b))?;
        let ba = lift(commutator(&b, &a))?;
        worst = worst
            .max(max_abs_diff(ab.matrix(), &-ba.matrix()))
            .max(max_abs_diff(&ab.matrix().adjoint(), &-ab.matrix()));
    }
    within("antisymmetry / anti-Hermiticity defect", worst, 1e-12)
}

fn distinct_sites_commute() -> CheckResult {
    let mut worst: f64 = 0.0;
    for (k1, k2) in [
        (PauliKind::X, PauliKind::Y),
        (PauliKind::Z, PauliKind::Plus),
    ] {
        let a = lift(embed(&single_site_pauli(k1), 1, 3))?;
        let b = lift(embed(&single_site_pauli(k2), 3, 3))?;
        let ab = lift(a.compose(&b))?;
        let ba = lift(b.compose(&a))?;
        worst = worst.max(max_abs_diff(ab.matrix(), ba.matrix()));
    }
    within("commutator of distinct-site operators", worst, 0.0)
}

fn sz_conservation() -> CheckResult {
    let conserving = [
        ("xy", lift(xy_ring(4, 1.0))?),
        ("xxz", lift(xxz4())?),
        ("spin star", lift(SpinStarParams::reproduction().build())?),
    ];
    for (name, h) in &conserving {
        let n = lift(sz_commutator_norm(h))?;
        if n > 1e-12 {
            return Err(format!("{name}: |[H, Sz]| = {n:.3e}"));
        }
    }
    let tf = lift(sz_commutator_norm(&lift(transverse_field(4, 1.0))?))?;
    if tf <= 0.5 {
        return Err(format!(
            "transverse field: |[H, Sz]| = {tf} should exceed 0.5"
        ));
    }
    Ok(format!("XY/XXZ/star commute; transverse {tf}"))
}

/// Largest deviation between the Jordan–Wigner energies and dense sector
/// diagonalization of `builder(L, 1)` for `2 <= L <= max_sites`, every filling.
pub fn jordan_wigner_deviation<F>(builder: F, max_sites: usize) -> Result<f64>
where
    F: Fn(usize, f64) -> Result<ManyBodyOperator>,
{
    let mut worst: f64 = 0.0;
    for sites in 2..=max_sites {
        let h = builder(sites, 1.0)?;
        for k in 0..=sites {
            let block = symmetry::restrict(&h, &Sector::new(sites, k)?)?;
            let dense = block.eigenvalues()[0];
            let analytic = xy_ground_energy_analytic(sites, 1.0, k)?;
            worst = worst.max((dense - analytic).abs());
        }
    }
    Ok(worst)
}

/// The Jordan–Wigner cross-check against an arbitrary XY-ring builder.
pub fn check_jordan_wigner<F>(builder: F) -> CheckOutcome
where
    F: Fn(usize, f64) -> Result<ManyBodyOperator>,
{
    let r = lift(jordan_wigner_deviation(builder, 8))
        .and_then(|d| within("max |E_JW - E_dense|, L <= 8", d, 1e-9));
    outcome("jordan-wigner", r)
}

fn sector_union_spectra() -> CheckResult {
    let hs = [
        lift(xy_ring(4, 1.0))?,
        lift(xxz4())?,
        lift(random_xxz_chain(&reference_couplings(), 0.7))?,
        lift(SpinStarParams::reproduction().build())?,
    ];
    let mut worst: f64 = 0.0;
    for h in &hs {
        let union = lift(symmetry::sector_resolved_spectrum(h))?;
        worst = worst.max(spectrum_distance(&union, &lift(h.eigenvalues())?));
    }
    within("sector-union vs full spectrum", worst, 1e-9)
}

fn spin_star_ground_energy() -> CheckResult {
    let h = lift(SpinStarParams::reproduction().build())?;
    let full = lift(h.ground_energy())?;
    let sector = lift(symmetry::sector_ground_state(&h, &lift(Sector::new(4, 2))?))?.energy;
    within(
        "|E_0 + 40| (full and m = 0 sector)",
        (full + 40.0).abs().max((sector + 40.0).abs()),
        1e-9,
    )
}

fn xy_gap_scaling() -> CheckResult {
    let mut gaps = Vec::new();
    for l in [4, 6, 8] {
        let h = lift(xy_ring(l, 1.0))?;
        let ev = lift(symmetry::restrict(
            &h,
            &lift(Sector::with_magnetization(l, 0))?,
        ))?
        .eigenvalues();
        gaps.push(ev[1] - ev[0]);
    }
    if gaps[0] > gaps[1] && gaps[1] > gaps[2] {
        Ok(format!("m = 0 gaps {gaps:.4?} decrease with L"))
    } else {
        Err(format!("gaps {gaps:?} do not decrease"))
    }
}

fn schedule_endpoints() -> CheckResult {
    let problem = lift(SpinStarParams::reproduction().build())?;
    let driver = lift(transverse_field(4, 1.0))?;
    let schedule = lift(AnnealSchedule::new(problem.clone(), driver.clone(), 1.0))?;
    let t = lift(crate::spectra::trace_spectrum(&schedule, 3, 16))?;
    let d0 = spectrum_distance(&t.levels[0], &lift(driver.eigenvalues())?);
    let d1 = spectrum_distance(&t.levels[2], &lift(problem.eigenvalues())?);
    within("endpoint spectrum mismatch", d0.max(d1), 1e-10)
}

fn dephasing_analytics() -> CheckResult {
    let mut worst: f64 = 0.0;
    for rate in [2.5e-5, 1e-4] {
        let h = ManyBodyOperator::zeros(1);
        let schedule = lift(AnnealSchedule::new(h.clone(), h, 1e4))?;
        let rho0 = DensityMatrix::from_pure(&lift(StateVector::all_plus(1))?);
        let noise = lift(NoiseSpec::dephasing(rate))?;
        let traj = lift(evolve_open(
            &rho0,
            &schedule,
            &noise,
            &IntegratorParams::default(),
        ))?;
        for (t, rho) in &traj.samples {
            let expected = dephased_coherence(rate, *t);
            worst = worst.max((rho.matrix()[(0, 1)].re - expected).abs() / expected);
        }
    }
    within("relative coherence error", worst, 1e-6)
}

fn kernel_matches_products() -> CheckResult {
    let problem = lift(SpinStarParams::reproduction().build())?;
    let schedule = lift(AnnealSchedule::new(problem, lift(xy_ring(4, 1.5))?, 3.0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let a = CMatrix::from_fn(16, 16, |_, _| {
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let rho = DensityMatrix::from_parts(4, &a * a.adjoint());
    let mut worst: f64 = 0.0;
    for kind in [LindbladKind::X, LindbladKind::Y, LindbladKind::Z] {
        let noise = lift(NoiseSpec::new(0.3, kind))?;
        let fast = kernel_rhs(&rho, &schedule, &noise, 1.2);
        let slow = lift(gksl_rhs(&rho, &lift(schedule.at(1.2))?, &noise))?;
        worst = worst.max(max_abs_diff(&fast, &slow) / linalg::max_abs(&slow));
    }
    within("relative kernel vs matrix-product RHS", worst, 1e-12)
}

fn open_closed_equivalence() -> CheckResult {
    let schedule = lift(AnnealSchedule::new(
        lift(xxz4())?,
        lift(transverse_field(4, 1.0))?,
        20.0,
    ))?;
    let psi0 = lift(StateVector::all_plus(4))?;
    let params = IntegratorParams::default();
    let closed = lift(evolve_closed(&psi0, &schedule, &params))?;
    let open = lift(evolve_open(
        &DensityMatrix::from_pure(&psi0),
        &schedule,
        &NoiseSpec::none(),
        &params,
    ))?;
    let d = open
        .final_state
        .trace_distance(&DensityMatrix::from_pure(&closed.final_state));
    within("trace distance open vs closed", d, 1e-6)
}

fn sector_population_conservation() -> CheckResult {
    let problem = lift(SpinStarParams::reproduction().build())?;
    let driver = lift(xy_ring(4, 2.0))?;
    let g = lift(symmetry::sector_ground_state(
        &driver,
        &lift(Sector::new(4, 2))?,
    ))?;
    let schedule = lift(AnnealSchedule::new(problem, driver, 5.0))?;
    let params = IntegratorParams {
        sector_reduction: false,
        ..Default::default()
    };
    let rho0 = DensityMatrix::from_pure(&g.state);
    let traj = lift(evolve_open(
        &rho0,
        &schedule,
        &lift(NoiseSpec::dephasing(0.01))?,
        &params,
    ))?;
    let dec = lift(symmetry::decompose(4))?;
    let p0 = rho0.sector_populations(&dec);
    let worst = traj
        .samples
        .iter()
        .flat_map(|(_, r)| {
            r.sector_populations(&dec)
                .into_iter()
                .zip(p0.clone())
                .map(|(a, b)| (a - b).abs())
        })
        .fold(0.0, f64::max);
    within("sector population drift", worst, 1e-8)
}

fn density_invariants() -> CheckResult {
    let schedule = lift(AnnealSchedule::new(
        lift(xxz4())?,
        lift(transverse_field(4, 1.0))?,
        10.0,
    ))?;
    let rho0 = DensityMatrix::from_pure(&lift(StateVector::all_plus(4))?);
    let traj = lift(evolve_open(
        &rho0,
        &schedule,
        &lift(NoiseSpec::dephasing(0.05))?,
        &IntegratorParams::default(),
    ))?;
    for (t, rho) in &traj.samples {
        lift(DensityMatrix::new(4, rho.matrix().clone())).map_err(|e| format!("t = {t}: {e}"))?;
    }
    Ok(format!("{} samples valid", traj.samples.len()))
}

fn coupling_sampler() -> CheckResult {
    let a = lift(sample_couplings(3, 1000, 0.0, 2.0))?;
    let b = lift(sample_couplings(3, 1000, 0.0, 2.0))?;
    if a != b {
        return Err("same seed gave different couplings".into());
    }
    if !a.iter().all(|x| (0.0..2.0).contains(x)) {
        return Err("sample outside [0, 2)".into());
    }
    Ok("deterministic and in range".into())
}

/// Runs every check in a fixed order.
pub fn run_all() -> Vec<CheckOutcome> {
    let checks: [NamedCheck; 14] = [
        ("pauli-algebra", pauli_algebra),
        ("commutator-identities", commutator_identities),
        ("distinct-sites-commute", distinct_sites_commute),
        ("sz-conservation", sz_conservation),
        ("sector-union-spectra", sector_union_spectra),
        ("spin-star-ground-energy", spin_star_ground_energy),
        ("xy-gap-scaling", xy_gap_scaling),
        ("schedule-endpoints", schedule_endpoints),
        ("dephasing-analytics", dephasing_analytics),
        ("gksl-kernel", kernel_matches_products),
        ("open-closed-equivalence", open_closed_equivalence),
        (
            "sector-population-conservation",
            sector_population_conservation,
        ),
        ("density-invariants", density_invariants),
        ("coupling-sampler", coupling_sampler),
    ];
    let mut out: Vec<CheckOutcome> = checks.iter().map(|(n, f)| outcome(n, f())).collect();
    out.insert(4, check_jordan_wigner(xy_ring));
    out
}
