//! Grid transport bounds between pickup and delivery densities.
//!
//! On a grid partition, the optimistic plan moves delivery-cell mass to
//! pickup cells at the *smallest* cell-to-cell distance and the pessimistic
//! plan at the *largest*; their objectives bracket the Euclidean
//! Wasserstein distance `W(φ_D, φ_P)`.

mod grid;
mod kappa;
pub mod simplex;

use std::io::Write;

use serde::Serialize;

pub use grid::{axis_resolution, build_grid, max_cell_distance, min_cell_distance, GridPartition};
pub use kappa::{integrate_functional, kappa, kappa_pair, BETA_M3};

use crate::distributions::DensityModel;
use crate::error::{CraneError, Result};
use simplex::solve_transportation;

/// Cell budget for the dense cost matrix.
pub const MAX_CELLS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    Optimistic,
    Pessimistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanEntry {
    /// Delivery cell C^i.
    pub i: usize,
    /// Pickup cell C^j.
    pub j: usize,
    pub alpha: f64,
}

/// Sparse transportation matrix `[α_ij]` with `Σ_j α_ij = φ_D(C^i)` and
/// `Σ_i α_ij = φ_P(C^j)`.
#[derive(Debug, Clone, Serialize)]
pub struct TransportPlan {
    pub kind: PlanKind,
    /// Positive entries sorted by `(i, j)`.
    pub entries: Vec<PlanEntry>,
    pub objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
}

impl TransportPlan {
    pub fn alpha(&self, i: usize, j: usize) -> f64 {
        self.entries
            .binary_search_by(|e| (e.i, e.j).cmp(&(i, j)))
            .map(|k| self.entries[k].alpha)
            .unwrap_or(0.0)
    }

    pub fn row_sums(&self, cells: usize) -> Vec<f64> {
        let mut s = vec![0.0; cells];
        for e in &self.entries {
            s[e.i] += e.alpha;
        }
        s
    }

    pub fn col_sums(&self, cells: usize) -> Vec<f64> {
        let mut s = vec![0.0; cells];
        for e in &self.entries {
            s[e.j] += e.alpha;
        }
        s
    }

    /// Entries of row `i` (deliveries in cell `i`).
    pub fn row(&self, i: usize) -> &[PlanEntry] {
        let start = self.entries.partition_point(|e| e.i < i);
        let end = self.entries.partition_point(|e| e.i <= i);
        &self.entries[start..end]
    }

    pub fn cost_of(&self, kind: PlanKind, gp: &GridPartition) -> f64 {
        self.entries
            .iter()
            .map(|e| e.alpha * cell_cost(kind, gp, e.i, e.j))
            .sum()
    }

    /// Objective recomputed from the entries with this plan's cost matrix.
    pub fn recomputed_objective(&self, gp: &GridPartition) -> f64 {
        self.cost_of(self.kind, gp)
    }

    /// Largest marginal violation.
    pub fn marginal_error(&self, gp: &GridPartition) -> f64 {
        let rows = self.row_sums(gp.len());
        let cols = self.col_sums(gp.len());
        rows.iter()
            .zip(&gp.measures_d)
            .chain(cols.iter().zip(&gp.measures_p))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Rows `(i, j, alpha, min_dist, max_dist)` as CSV.
    pub fn write_csv<W: Write>(&self, gp: &GridPartition, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "alpha", "min_dist", "max_dist"])?;
        for e in &self.entries {
            w.serialize((
                e.i,
                e.j,
                e.alpha,
                min_cell_distance(&gp.cells[e.i], &gp.cells[e.j]),
                max_cell_distance(&gp.cells[e.i], &gp.cells[e.j]),
            ))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn cell_cost(kind: PlanKind, gp: &GridPartition, i: usize, j: usize) -> f64 {
    match kind {
        PlanKind::Optimistic => min_cell_distance(&gp.cells[i], &gp.cells[j]),
        PlanKind::Pessimistic => max_cell_distance(&gp.cells[i], &gp.cells[j]),
    }
}

fn solve_plan(gp: &GridPartition, kind: PlanKind) -> Result<TransportPlan> {
    if gp.len() > MAX_CELLS {
        return Err(CraneError::Size(format!(
            "grid has {} cells; the dense solver is capped at {MAX_CELLS}",
            gp.len()
        )));
    }
    let rows: Vec<usize> = (0..gp.len()).filter(|&i| gp.measures_d[i] > 0.0).collect();
    let cols: Vec<usize> = (0..gp.len()).filter(|&j| gp.measures_p[j] > 0.0).collect();
    let supply: Vec<f64> = rows.iter().map(|&i| gp.measures_d[i]).collect();
    let demand: Vec<f64> = cols.iter().map(|&j| gp.measures_p[j]).collect();
    let mut cost = Vec::with_capacity(rows.len() * cols.len());
    for &i in &rows {
        for &j in &cols {
            cost.push(cell_cost(kind, gp, i, j));
        }
    }
    let sol = solve_transportation(&supply, &demand, &cost)?;
    let mut entries: Vec<PlanEntry> = sol
        .basis
        .iter()
        // drop round-off residue left by the flow recomputation
        .filter(|(_, _, f)| *f > 1e-15)
        .map(|&(r, c, f)| PlanEntry {
            i: rows[r],
            j: cols[c],
            alpha: f,
        })
        .collect();
    entries.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)));
    Ok(TransportPlan {
        kind,
        entries,
        objective: sol.objective,
        dual_objective: sol.dual_objective,
        iterations: sol.iterations,
    })
}

/// Optimal plan under min cell-to-cell distances; its objective is a lower
/// bound on `W(φ_D, φ_P)`.
pub fn solve_optimistic(gp: &GridPartition) -> Result<TransportPlan> {
    solve_plan(gp, PlanKind::Optimistic)
}

/// Optimal plan under max cell-to-cell distances; its objective is an upper
/// bound on `W(φ_D, φ_P)`.
pub fn solve_pessimistic(gp: &GridPartition) -> Result<TransportPlan> {
    solve_plan(gp, PlanKind::Pessimistic)
}

#[derive(Debug, Clone, Serialize)]
pub struct WassersteinBracket {
    pub lower: f64,
    pub upper: f64,
    #[serde(skip)]
    pub grid: GridPartition,
    #[serde(skip)]
    pub optimistic: TransportPlan,
    #[serde(skip)]
    pub pessimistic: TransportPlan,
}

impl WassersteinBracket {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// `Σ ᾱ_ij (max_ij − min_ij)`: the slack of the pessimistic plan, which
    /// bounds the bracket width from above.
    pub fn pessimistic_slack(&self) -> f64 {
        self.pessimistic
            .entries
            .iter()
            .map(|e| {
                e.alpha
                    * (max_cell_distance(&self.grid.cells[e.i], &self.grid.cells[e.j])
                        - min_cell_distance(&self.grid.cells[e.i], &self.grid.cells[e.j]))
            })
            .sum()
    }
}

/// Bracket `W(φ_D, φ_P)` between the optimistic and pessimistic grid plans
/// at resolution `r` on the joint environment of both densities.
pub fn wasserstein_bracket(pickups: &DensityModel, deliveries: &DensityModel, r: usize) -> Result<WassersteinBracket> {
    let env = pickups.env.union_hull(&deliveries.env);
    let grid = build_grid(&env, r, pickups, deliveries)?;
    let optimistic = solve_optimistic(&grid)?;
    let pessimistic = solve_pessimistic(&grid)?;
    Ok(WassersteinBracket {
        lower: optimistic.objective,
        upper: pessimistic.objective,
        grid,
        optimistic,
        pessimistic,
    })
}
