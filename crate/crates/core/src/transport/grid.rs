use serde::Serialize;

use crate::distributions::DensityModel;
use crate::error::{CraneError, Result};
use crate::geometry::{Aabb, Point};

/// Regular grid over the environment with pickup and delivery cell masses.
///
/// `r` counts cells along the longest axis; every other axis gets
/// `round(r · side_k / side_max)` cells (at least one), so cells are
/// near-cubic and a hypercube environment gets exactly `r^d` cubes.
/// Cells are stored in row-major order with the last axis fastest.
#[derive(Debug, Clone, Serialize)]
pub struct GridPartition {
    pub env: Aabb,
    pub r: usize,
    pub resolution: Vec<usize>,
    pub cells: Vec<Aabb>,
    /// φ_P(C) per cell.
    pub measures_p: Vec<f64>,
    /// φ_D(C) per cell.
    pub measures_d: Vec<f64>,
}

pub fn axis_resolution(env: &Aabb, r: usize) -> Vec<usize> {
    let longest = (0..env.dim()).map(|k| env.side(k)).fold(0.0, f64::max);
    (0..env.dim())
        .map(|k| ((r as f64 * env.side(k) / longest).round() as usize).max(1))
        .collect()
}

impl GridPartition {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_side(&self, axis: usize) -> f64 {
        self.env.side(axis) / self.resolution[axis] as f64
    }

    /// Diagonal of one cell (`L√d / r` for a hypercube).
    pub fn cell_diagonal(&self) -> f64 {
        (0..self.env.dim())
            .map(|k| self.cell_side(k).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Index of the cell containing `p`; points on shared faces go to the
    /// higher cell, points on the upper env boundary to the last cell.
    pub fn locate(&self, p: &Point) -> Option<usize> {
        if !self.env.contains(p) {
            return None;
        }
        let mut idx = 0;
        for k in 0..self.env.dim() {
            let rk = self.resolution[k];
            let t = (p.coords[k] - self.env.lo[k]) / self.env.side(k) * rk as f64;
            let c = (t.floor() as isize).clamp(0, rk as isize - 1) as usize;
            idx = idx * rk + c;
        }
        Some(idx)
    }
}

pub fn build_grid(env: &Aabb, r: usize, pickups: &DensityModel, deliveries: &DensityModel) -> Result<GridPartition> {
    if r == 0 {
        return Err(CraneError::Argument("grid resolution r must be ≥ 1".into()));
    }
    if pickups.dimension != env.dim() || deliveries.dimension != env.dim() {
        return Err(CraneError::Config("grid and densities differ in dimension".into()));
    }
    let resolution = axis_resolution(env, r);
    let total: usize = resolution.iter().product();
    let d = env.dim();
    let mut cells = Vec::with_capacity(total);
    let mut index = vec![0usize; d];
    for _ in 0..total {
        let lo: Vec<f64> = (0..d)
            .map(|k| env.lo[k] + env.side(k) * index[k] as f64 / resolution[k] as f64)
            .collect();
        let hi: Vec<f64> = (0..d)
            .map(|k| {
                if index[k] + 1 == resolution[k] {
                    env.hi[k]
                } else {
                    env.lo[k] + env.side(k) * (index[k] + 1) as f64 / resolution[k] as f64
                }
            })
            .collect();
        cells.push(Aabb { lo, hi });
        for k in (0..d).rev() {
            index[k] += 1;
            if index[k] < resolution[k] {
                break;
            }
            index[k] = 0;
        }
    }
    let measures_p = normalized(cells.iter().map(|c| pickups.cell_measure(c)).collect())?;
    let measures_d = normalized(cells.iter().map(|c| deliveries.cell_measure(c)).collect())?;
    Ok(GridPartition {
        env: env.clone(),
        r,
        resolution,
        cells,
        measures_p,
        measures_d,
    })
}

/// Rescale so the masses sum to one; quadrature error in ball/box volumes is
/// far below the 1e-6 feasibility tolerance, this only removes round-off.
fn normalized(mut m: Vec<f64>) -> Result<Vec<f64>> {
    let s: f64 = m.iter().sum();
    if (s - 1.0).abs() > 1e-6 {
        return Err(CraneError::Numeric(format!(
            "grid cell masses sum to {s}; density support leaves the grid"
        )));
    }
    m.iter_mut().for_each(|v| *v /= s);
    Ok(m)
}

pub fn min_cell_distance(a: &Aabb, b: &Aabb) -> f64 {
    a.min_distance(b)
}

pub fn max_cell_distance(a: &Aabb, b: &Aabb) -> f64 {
    a.max_distance(b)
}
