use crate::distributions::{DensityModel, Shape};
use crate::error::{CraneError, Result};
use crate::geometry::{Aabb, Point};

/// Asymptotic constant of the 3-D Euclidean bipartite matching cost for
/// uniform points on the unit cube.
pub const BETA_M3: f64 = 0.7080;

const MAX_DEPTH: u32 = 6;
const LEAF_SAMPLES_PER_AXIS: usize = 4;

fn require_d3(d: usize) -> Result<()> {
    if d != 3 {
        return Err(CraneError::UnsupportedDimension {
            dimension: d,
            message: "the matching constant β_M,d is only known for d = 3".into(),
        });
    }
    Ok(())
}

/// `β_M,3 ∫ φ(x)^{2/3} dx`.
///
/// Closed form when the regions are disjoint (each contributes
/// `vol · (w / vol)^{2/3}`), adaptive quadrature otherwise.
pub fn kappa(phi: &DensityModel) -> Result<f64> {
    require_d3(phi.dimension)?;
    let exponent = 1.0 - 1.0 / phi.dimension as f64;
    let integral = if phi.regions_disjoint() {
        phi.regions
            .iter()
            .filter(|r| r.weight > 0.0)
            .map(|r| {
                let vol = r.shape.volume();
                vol * (r.weight / vol).powf(exponent)
            })
            .sum()
    } else {
        integrate_functional(&[phi], &phi.env, |dens| dens[0].powf(exponent))
    };
    Ok(BETA_M3 * integral)
}

/// `(κ, κ̃)`: κ is the smaller of the two single-density values, κ̃ moves
/// the minimum inside the integral, `β ∫ min(φ_P, φ_D)^{2/3}`.
pub fn kappa_pair(pickups: &DensityModel, deliveries: &DensityModel) -> Result<(f64, f64)> {
    require_d3(pickups.dimension)?;
    require_d3(deliveries.dimension)?;
    let k = kappa(pickups)?.min(kappa(deliveries)?);
    if pickups.regions == deliveries.regions {
        return Ok((k, k));
    }
    let exponent = 1.0 - 1.0 / pickups.dimension as f64;
    let env = pickups.env.union_hull(&deliveries.env);
    let integral = integrate_functional(&[pickups, deliveries], &env, |dens| {
        dens[0].min(dens[1]).powf(exponent)
    });
    Ok((k, BETA_M3 * integral))
}

#[derive(Clone, Copy, PartialEq)]
enum Cover {
    Empty,
    Full,
    Partial,
}

fn cover(shape: &Shape, cell: &Aabb) -> Cover {
    match shape {
        Shape::Box { lo, hi } => {
            let b = Aabb {
                lo: lo.clone(),
                hi: hi.clone(),
            };
            if cell.intersection_volume(&b) <= 0.0 {
                Cover::Empty
            } else if b.contains_box(cell, 0.0) {
                Cover::Full
            } else {
                Cover::Partial
            }
        }
        Shape::Ball { center, radius } => {
            let c = Point::new(center.clone());
            if cell.distance_to_point(&c) >= *radius {
                Cover::Empty
            } else if cell.farthest_distance_to_point(&c) <= *radius {
                Cover::Full
            } else {
                Cover::Partial
            }
        }
    }
}

/// `∫_env f(φ_1(x), …, φ_k(x)) dx` for piecewise-uniform densities.
///
/// The environment is first cut at every box-region face, so box-only
/// models integrate exactly. Cells crossed by a ball boundary are bisected
/// along every axis up to a fixed depth and then integrated by a midpoint
/// rule with 4 samples per axis.
pub fn integrate_functional<F>(models: &[&DensityModel], env: &Aabb, f: F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let d = env.dim();
    let mut cuts: Vec<Vec<f64>> = (0..d).map(|k| vec![env.lo[k], env.hi[k]]).collect();
    for m in models {
        for r in &m.regions {
            let bb = r.shape.bounding_box();
            for k in 0..d {
                for x in [bb.lo[k], bb.hi[k]] {
                    if x > env.lo[k] && x < env.hi[k] {
                        cuts[k].push(x);
                    }
                }
            }
        }
    }
    for c in cuts.iter_mut() {
        c.sort_by(|a, b| a.partial_cmp(b).unwrap());
        c.dedup();
    }
    let mut total = 0.0;
    let mut idx = vec![0usize; d];
    let counts: Vec<usize> = cuts.iter().map(|c| c.len() - 1).collect();
    let atoms: usize = counts.iter().product();
    let mut dens = vec![0.0; models.len()];
    for _ in 0..atoms {
        let cell = Aabb {
            lo: (0..d).map(|k| cuts[k][idx[k]]).collect(),
            hi: (0..d).map(|k| cuts[k][idx[k] + 1]).collect(),
        };
        total += integrate_cell(models, &cell, &f, MAX_DEPTH, &mut dens);
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] < counts[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    total
}

fn integrate_cell<F>(models: &[&DensityModel], cell: &Aabb, f: &F, depth: u32, dens: &mut [f64]) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let vol = cell.volume();
    if vol <= 0.0 {
        return 0.0;
    }
    let mut partial = false;
    for (k, m) in models.iter().enumerate() {
        dens[k] = 0.0;
        for r in m.regions.iter().filter(|r| r.weight > 0.0) {
            match cover(&r.shape, cell) {
                Cover::Full => dens[k] += r.weight / r.shape.volume(),
                Cover::Partial => partial = true,
                Cover::Empty => {}
            }
        }
    }
    if !partial {
        return vol * f(dens);
    }
    let d = cell.dim();
    if depth == 0 {
        let s = LEAF_SAMPLES_PER_AXIS;
        let mut acc = 0.0;
        let mut idx = vec![0usize; d];
        let samples = s.pow(d as u32);
        for _ in 0..samples {
            let p = Point::new(
                (0..d)
                    .map(|k| cell.lo[k] + cell.side(k) * (idx[k] as f64 + 0.5) / s as f64)
                    .collect(),
            );
            for (k, m) in models.iter().enumerate() {
                dens[k] = m.density_at(&p);
            }
            acc += f(dens);
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] < s {
                    break;
                }
                idx[k] = 0;
            }
        }
        return vol * acc / samples as f64;
    }
    let c = cell.center();
    let mut total = 0.0;
    for corner in 0..(1usize << d) {
        let child = Aabb {
            lo: (0..d)
                .map(|k| if corner >> k & 1 == 0 { cell.lo[k] } else { c.coords[k] })
                .collect(),
            hi: (0..d)
                .map(|k| if corner >> k & 1 == 0 { c.coords[k] } else { cell.hi[k] })
                .collect(),
        };
        total += integrate_cell(models, &child, f, depth - 1, dens);
    }
    total
}
