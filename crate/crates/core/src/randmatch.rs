//! Randomized bipartite matching through shadow pickups.
//!
//! Each delivery draws a *shadow* pickup: first a pickup cell according to
//! the row of a transportation plan for the delivery's cell, then a point
//! from the pickup density conditioned on that cell. The shadows are then
//! optimally matched to the real pickups and each delivery inherits its
//! shadow's partner. The sampler never sees the real pickups, so shadows
//! are i.i.d. with the pickup density and independent of them.

use log::warn;
use rand::Rng;

use crate::distributions::DensityModel;
use crate::error::{CraneError, Result};
use crate::geometry::Point;
use crate::matching::{hungarian, Matching};
use crate::rng::{RngStream, StreamRng};
use crate::transport::{axis_resolution, build_grid, solve_pessimistic, GridPartition, TransportPlan, MAX_CELLS};

#[derive(Debug, Clone, PartialEq)]
pub struct ShadowAssignment {
    /// One shadow pickup per delivery, same order as the deliveries.
    pub shadows: Vec<Point>,
    /// `(delivery cell i, pickup cell j)` used for each shadow.
    pub cell_choices: Vec<(usize, usize)>,
}

impl ShadowAssignment {
    /// Σ ‖X'_k − Y_k‖.
    pub fn displacement(&self, deliveries: &[Point]) -> f64 {
        self.shadows.iter().zip(deliveries).map(|(s, y)| s.distance(y)).sum()
    }
}

/// Draw one shadow pickup per delivery.
pub fn sample_shadows(
    deliveries: &[Point],
    gp: &GridPartition,
    plan: &TransportPlan,
    pickups: &DensityModel,
    rng: &mut StreamRng,
) -> Result<ShadowAssignment> {
    let mut shadows = Vec::with_capacity(deliveries.len());
    let mut cell_choices = Vec::with_capacity(deliveries.len());
    for (k, y) in deliveries.iter().enumerate() {
        let i = gp
            .locate(y)
            .ok_or_else(|| CraneError::Sampling(format!("delivery {k} lies outside the grid")))?;
        let row = plan.row(i);
        let mass: f64 = row.iter().map(|e| e.alpha).sum();
        if !(gp.measures_d[i] > 0.0) || !(mass > 0.0) {
            return Err(CraneError::Sampling(format!(
                "delivery {k} lies in cell {i}, which has zero delivery measure"
            )));
        }
        // j with probability α_ij / φ_D(C^i)
        let u = rng.random::<f64>() * mass;
        let mut acc = 0.0;
        let mut j = row[row.len() - 1].j;
        for e in row {
            acc += e.alpha;
            if u < acc {
                j = e.j;
                break;
            }
        }
        shadows.push(pickups.sample_in_cell(&gp.cells[j], rng)?);
        cell_choices.push((i, j));
    }
    Ok(ShadowAssignment {
        shadows,
        cell_choices,
    })
}

#[derive(Debug, Clone)]
pub struct RandomizedMatching {
    /// Delivery → pickup matching induced through the shadows.
    pub matching: Matching,
    pub shadows: ShadowAssignment,
    /// Σ ‖X'_k − Y_k‖.
    pub shadow_displacement: f64,
    /// Optimal matching cost between shadows and real pickups.
    pub shadow_matching_cost: f64,
    /// Resolution actually used (only meaningful for the automatic variant).
    pub r: usize,
}

/// Match deliveries to pickups through shadow sites drawn with a given
/// partition and plan.
pub fn randomized_ebmp(
    pickups: &[Point],
    deliveries: &[Point],
    gp: &GridPartition,
    plan: &TransportPlan,
    pickup_density: &DensityModel,
    rng: &mut StreamRng,
) -> Result<RandomizedMatching> {
    if pickups.len() != deliveries.len() {
        return Err(CraneError::Argument(format!(
            "{} pickups but {} deliveries",
            pickups.len(),
            deliveries.len()
        )));
    }
    let shadows = sample_shadows(deliveries, gp, plan, pickup_density, rng)?;
    compose_through_shadows(pickups, deliveries, shadows, gp.r)
}

fn compose_through_shadows(
    pickups: &[Point],
    deliveries: &[Point],
    shadows: ShadowAssignment,
    r: usize,
) -> Result<RandomizedMatching> {
    // shadow k (owned by delivery k) ↔ pickup τ(k)
    let inner = hungarian(pickups, &shadows.shadows)?;
    let matching = Matching::from_permutation(inner.perm.clone(), pickups, deliveries)?;
    let shadow_displacement = shadows.displacement(deliveries);
    let bound = shadow_displacement + inner.total_cost;
    debug_assert!(matching.total_cost <= bound * (1.0 + 1e-12) + 1e-12);
    Ok(RandomizedMatching {
        matching,
        shadows,
        shadow_displacement,
        shadow_matching_cost: inner.total_cost,
        r,
    })
}

/// Grid resolution `⌈n^{1/d} · √ln(e + n)⌉`, which grows faster than
/// `n^{1/d}`.
pub fn default_resolution(n: usize, d: usize) -> usize {
    let n = n.max(1) as f64;
    (n.powf(1.0 / d as f64) * (std::f64::consts::E + n).ln().sqrt()).ceil() as usize
}

/// Randomized matching with the resolution chosen from `n`, on the grid
/// over both densities' environment, using the pessimistic plan. The
/// resolution is lowered until the grid has at most 4096 cells.
pub fn randomized_ebmp_auto(
    pickups: &[Point],
    deliveries: &[Point],
    pickup_density: &DensityModel,
    delivery_density: &DensityModel,
    stream: RngStream,
) -> Result<RandomizedMatching> {
    let n = pickups.len();
    if n == 0 || n != deliveries.len() {
        return Err(CraneError::Argument("need n ≥ 1 pickups and as many deliveries".into()));
    }
    let env = pickup_density.env.union_hull(&delivery_density.env);
    let wanted = default_resolution(n, env.dim());
    let mut r = wanted;
    while r > 1 && axis_resolution(&env, r).iter().product::<usize>() > MAX_CELLS {
        r -= 1;
    }
    if r < wanted {
        warn!("grid resolution capped at {r} (wanted {wanted}) to stay within {MAX_CELLS} cells");
    }
    let gp = build_grid(&env, r, pickup_density, delivery_density)?;
    let plan = solve_pessimistic(&gp)?;
    let mut rng = stream.rng();
    randomized_ebmp(pickups, deliveries, &gp, &plan, pickup_density, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{case1, uniform_cube};
    use crate::instance::instance_from_samples;
    use crate::transport::solve_optimistic;

    /// Symmetric variant: shadows drawn for the pickups from the delivery
    /// density, matched to the real deliveries.
    fn randomized_ebmp_symmetric(
        pickups: &[Point],
        deliveries: &[Point],
        gp: &GridPartition,
        plan_transposed: &TransportPlan,
        delivery_density: &DensityModel,
        rng: &mut StreamRng,
    ) -> Result<RandomizedMatching> {
        let shadows = sample_shadows(pickups, gp, plan_transposed, delivery_density, rng)?;
        // delivery-side matching: shadow k (of pickup k) ↔ delivery τ(k)
        let inner = hungarian(deliveries, &shadows.shadows)?;
        let perm = inner.perm.inverse();
        let matching = Matching::from_permutation(perm, pickups, deliveries)?;
        let disp = shadows.displacement(pickups);
        Ok(RandomizedMatching {
            matching,
            shadows,
            shadow_displacement: disp,
            shadow_matching_cost: inner.total_cost,
            r: gp.r,
        })
    }

    #[test]
    fn resolution_formula() {
        assert_eq!(default_resolution(1, 3), 2);
        assert_eq!(default_resolution(1000, 3), 27);
        let mut prev = 0.0;
        for e in 1..=6 {
            let n = 10usize.pow(e);
            let ratio = default_resolution(n, 3) as f64 / (n as f64).powf(1.0 / 3.0);
            assert!(ratio >= prev);
            prev = ratio;
        }
        assert!(prev > 3.5);
    }

    #[test]
    fn single_cell_uses_the_only_pair() {
        let (p, d) = uniform_cube(2);
        let gp = build_grid(&p.env, 1, &p, &d).unwrap();
        let plan = solve_pessimistic(&gp).unwrap();
        let inst = instance_from_samples(&p, &d, 20, RngStream::new(2, 0)).unwrap();
        let mut a = RngStream::new(2, 9).rng();
        let sh = sample_shadows(&inst.deliveries(), &gp, &plan, &p, &mut a).unwrap();
        for (k, s) in sh.shadows.iter().enumerate() {
            assert_eq!(sh.cell_choices[k], (0, 0));
            assert!(p.env.contains(s));
        }
    }

    #[test]
    fn case1_far_cube_deliveries_shadow_to_middle_cube() {
        let (p, d) = case1();
        let gp = build_grid(&p.env, 7, &p, &d).unwrap();
        let plan = solve_optimistic(&gp).unwrap();
        let inst = instance_from_samples(&p, &d, 200, RngStream::new(4, 0)).unwrap();
        let mut rng = RngStream::new(4, 1).rng();
        let sh = sample_shadows(&inst.deliveries(), &gp, &plan, &p, &mut rng).unwrap();
        for (y, s) in inst.deliveries().iter().zip(&sh.shadows) {
            if y.coords[0] > 1.0 {
                assert!(s.coords[0] >= -2.5 && s.coords[0] <= -1.5);
            }
        }
    }

    #[test]
    fn zero_measure_cell_is_an_error() {
        let (p, d) = case1();
        let gp = build_grid(&p.env, 7, &p, &d).unwrap();
        let plan = solve_optimistic(&gp).unwrap();
        let stray = vec![Point::new(vec![0.0, 0.0, 0.0])];
        let mut rng = RngStream::new(0, 0).rng();
        assert!(matches!(
            sample_shadows(&stray, &gp, &plan, &p, &mut rng),
            Err(CraneError::Sampling(_))
        ));
    }

    #[test]
    fn shadows_equal_to_pickups_cost_only_displacement() {
        let (p, d) = uniform_cube(2);
        let inst = instance_from_samples(&p, &d, 15, RngStream::new(8, 0)).unwrap();
        let x = inst.pickups();
        let y = inst.deliveries();
        let shadows = ShadowAssignment {
            shadows: x.clone(),
            cell_choices: vec![(0, 0); 15],
        };
        let out = compose_through_shadows(&x, &y, shadows, 1).unwrap();
        assert_eq!(out.shadow_matching_cost, 0.0);
        assert!(out.matching.perm.is_identity());
        assert!((out.matching.total_cost - out.shadow_displacement).abs() < 1e-12);
    }

    #[test]
    fn single_pair_and_lower_bound() {
        let (p, d) = case1();
        let inst = instance_from_samples(&p, &d, 1, RngStream::new(1, 0)).unwrap();
        let out = randomized_ebmp_auto(&inst.pickups(), &inst.deliveries(), &p, &d, RngStream::new(1, 1)).unwrap();
        assert_eq!(out.r, 2);
        assert!((out.matching.total_cost - inst.demands[0].length()).abs() < 1e-12);

        let inst = instance_from_samples(&p, &d, 100, RngStream::new(5, 0)).unwrap();
        let out = randomized_ebmp_auto(&inst.pickups(), &inst.deliveries(), &p, &d, RngStream::new(5, 1)).unwrap();
        let opt = hungarian(&inst.pickups(), &inst.deliveries()).unwrap();
        assert!(out.matching.total_cost >= opt.total_cost - 1e-9);
        assert!(out.matching.total_cost <= out.shadow_displacement + out.shadow_matching_cost + 1e-9);
    }

    #[test]
    fn symmetric_variant_is_a_valid_matching() {
        let (p, d) = uniform_cube(2);
        let gp = build_grid(&p.env, 4, &p, &d).unwrap();
        let plan = solve_pessimistic(&gp).unwrap();
        let inst = instance_from_samples(&p, &d, 40, RngStream::new(6, 0)).unwrap();
        let mut rng = RngStream::new(6, 1).rng();
        // equal densities: the plan is its own transpose
        let out = randomized_ebmp_symmetric(&inst.pickups(), &inst.deliveries(), &gp, &plan, &d, &mut rng).unwrap();
        let opt = hungarian(&inst.pickups(), &inst.deliveries()).unwrap();
        assert!(out.matching.total_cost >= opt.total_cost - 1e-9);
        assert!(out.matching.total_cost <= out.shadow_displacement + out.shadow_matching_cost + 1e-9);
    }
}
