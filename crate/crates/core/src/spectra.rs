//! Instantaneous spectra of `H(s)` along the schedule and minimum gaps.
//!
//! Levels are matched across grid points by sorted order, so the traces are
//! blind to level crossings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::AnnealSchedule;
use crate::linalg;
use crate::parallel::Execution;
use crate::symmetry::{self, Sector, CONSERVATION_TOL};

pub const DEFAULT_GRID_POINTS: usize = 201;

/// Lowest levels of `H(s)` on a grid of schedule fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTrace {
    pub s_grid: Vec<f64>,
    /// `levels[i][n]`: level `n` at `s_grid[i]`, ascending in `n`.
    pub levels: Vec<Vec<f64>>,
    /// Magnetization of each level at each grid point, when sector-resolved.
    pub sector_labels: Option<Vec<Vec<i64>>>,
}

impl SpectrumTrace {
    pub fn level_count(&self) -> usize {
        self.levels.first().map_or(0, Vec::len)
    }
}

/// `n` uniform points on `[0, 1]` with exact endpoints.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    let last = n.saturating_sub(1);
    (0..n)
        .map(|i| {
            if i == last {
                1.0
            } else {
                i as f64 / last as f64
            }
        })
        .collect()
}

fn check_grid(grid_points: usize) -> Result<()> {
    if grid_points < 2 {
        return Err(Error::arg(format!(
            "grid needs at least 2 points, got {grid_points}"
        )));
    }
    Ok(())
}

fn require_conserving(schedule: &AnnealSchedule) -> Result<()> {
    for (name, h) in [
        ("problem", schedule.problem()),
        ("driver", schedule.driver()),
    ] {
        let leak = symmetry::leakage_of(h.matrix());
        if leak > CONSERVATION_TOL {
            return Err(Error::contract(format!(
                "{name} Hamiltonian does not conserve S_z (leakage {leak:.3e})"
            )));
        }
    }
    Ok(())
}

/// Lowest `level_count` eigenvalues of `H(s)` on a uniform grid.
pub fn trace_spectrum(
    schedule: &AnnealSchedule,
    grid_points: usize,
    level_count: usize,
) -> Result<SpectrumTrace> {
    trace_spectrum_with(schedule, grid_points, level_count, Execution::default())
}

pub fn trace_spectrum_with(
    schedule: &AnnealSchedule,
    grid_points: usize,
    level_count: usize,
    execution: Execution,
) -> Result<SpectrumTrace> {
    check_grid(grid_points)?;
    let dim = schedule.problem().dim();
    if level_count == 0 || level_count > dim {
        return Err(Error::arg(format!(
            "level_count {level_count} outside 1..={dim}"
        )));
    }
    let s_grid = uniform_grid(grid_points);
    let levels = execution.map(&s_grid, |&s| {
        let mut ev = linalg::eigvalsh(schedule.at_fraction(s).matrix());
        ev.truncate(level_count);
        ev
    });
    Ok(SpectrumTrace {
        s_grid,
        levels,
        sector_labels: None,
    })
}

/// Lowest `level_count` eigenvalues of the `H(s)` block on `sector`.
pub fn trace_sector_spectrum(
    schedule: &AnnealSchedule,
    sector: &Sector,
    grid_points: usize,
    level_count: usize,
) -> Result<SpectrumTrace> {
    check_grid(grid_points)?;
    require_conserving(schedule)?;
    if sector.sites() != schedule.sites() {
        return Err(Error::arg(format!(
            "sector on {} sites, schedule on {}",
            sector.sites(),
            schedule.sites()
        )));
    }
    if level_count == 0 || level_count > sector.dim() {
        return Err(Error::arg(format!(
            "level_count {level_count} outside 1..={}",
            sector.dim()
        )));
    }
    let s_grid = uniform_grid(grid_points);
    let levels = Execution::default().map(&s_grid, |&s| {
        let block = sector.restrict_matrix(schedule.at_fraction(s).matrix());
        let mut ev = linalg::eigvalsh(&block);
        ev.truncate(level_count);
        ev
    });
    let m = sector.magnetization();
    Ok(SpectrumTrace {
        s_grid,
        sector_labels: Some(vec![vec![m; level_count]; grid_points]),
        levels,
    })
}

/// Full sorted spectrum assembled from every sector, each level tagged with
/// its magnetization.
pub fn trace_labeled_spectrum(
    schedule: &AnnealSchedule,
    grid_points: usize,
    level_count: usize,
) -> Result<SpectrumTrace> {
    check_grid(grid_points)?;
    require_conserving(schedule)?;
    let dim = schedule.problem().dim();
    if level_count == 0 || level_count > dim {
        return Err(Error::arg(format!(
            "level_count {level_count} outside 1..={dim}"
        )));
    }
    let dec = symmetry::decompose(schedule.sites())?;
    let s_grid = uniform_grid(grid_points);
    let rows = Execution::default().map(&s_grid, |&s| {
        let h = schedule.at_fraction(s);
        let mut tagged: Vec<(f64, i64)> = Vec::with_capacity(dim);
        for sector in dec.sectors() {
            let m = sector.magnetization();
            let ev = linalg::eigvalsh(&sector.restrict_matrix(h.matrix()));
            tagged.extend(ev.into_iter().map(|e| (e, m)));
        }
        tagged.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        tagged.truncate(level_count);
        tagged
    });
    let levels = rows
        .iter()
        .map(|r| r.iter().map(|x| x.0).collect())
        .collect();
    let labels = rows
        .iter()
        .map(|r| r.iter().map(|x| x.1).collect())
        .collect();
    Ok(SpectrumTrace {
        s_grid,
        levels,
        sector_labels: Some(labels),
    })
}

/// Smallest `E₁ - E₀` over the grid and the first `s` attaining it.
///
/// With `within_sector`, only levels labelled with that magnetization count;
/// the trace must then carry sector labels.
pub fn min_gap(trace: &SpectrumTrace, within_sector: Option<i64>) -> Result<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for (i, (&s, row)) in trace.s_grid.iter().zip(&trace.levels).enumerate() {
        let (e0, e1) = match within_sector {
            None => match row.as_slice() {
                [a, b, ..] => (*a, *b),
                _ => return Err(Error::arg("gap needs at least 2 levels")),
            },
            Some(m) => {
                let labels = trace
                    .sector_labels
                    .as_ref()
                    .ok_or_else(|| Error::arg("trace has no sector labels"))?;
                let mut it = row
                    .iter()
                    .zip(&labels[i])
                    .filter(|(_, &l)| l == m)
                    .map(|x| *x.0);
                match (it.next(), it.next()) {
                    (Some(a), Some(b)) => (a, b),
                    _ => {
                        return Err(Error::arg(format!(
                            "fewer than 2 levels in sector m = {m} at s = {s}"
                        )))
                    }
                }
            }
        };
        let gap = e1 - e0;
        if best.map_or(true, |(_, g)| gap < g) {
            best = Some((s, gap));
        }
    }
    best.ok_or_else(|| Error::arg("empty spectrum trace"))
}
