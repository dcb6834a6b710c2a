//! Piecewise-uniform densities over boxes and balls.
//!
//! A [`DensityModel`] is a finite mixture: each region carries a probability
//! weight spread uniformly over its volume. Regions may overlap, in which
//! case densities add.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CraneError, Result};
use crate::geometry::{ball_box_volume, unit_ball_volume, Aabb, Point};
use crate::rng::{RngStream, StreamRng};

const WEIGHT_TOL: f64 = 1e-12;
const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Shape {
    pub fn from_box(b: &Aabb) -> Self {
        Shape::Box {
            lo: b.lo.clone(),
            hi: b.hi.clone(),
        }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        Shape::Ball { center, radius }
    }

    pub fn dim(&self) -> usize {
        match self {
            Shape::Box { lo, .. } => lo.len(),
            Shape::Ball { center, .. } => center.len(),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Shape::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| h - l).product(),
            Shape::Ball { center, radius } => unit_ball_volume(center.len()) * radius.powi(center.len() as i32),
        }
    }

    pub fn bounding_box(&self) -> Aabb {
        match self {
            Shape::Box { lo, hi } => Aabb {
                lo: lo.clone(),
                hi: hi.clone(),
            },
            Shape::Ball { center, radius } => Aabb {
                lo: center.iter().map(|c| c - radius).collect(),
                hi: center.iter().map(|c| c + radius).collect(),
            },
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match self {
            Shape::Box { lo, hi } => p
                .coords
                .iter()
                .enumerate()
                .all(|(k, &c)| c >= lo[k] && c <= hi[k]),
            Shape::Ball { center, radius } => {
                p.distance(&Point::new(center.clone())) <= *radius
            }
        }
    }

    /// Volume of `self ∩ cell`.
    pub fn overlap_volume(&self, cell: &Aabb) -> f64 {
        match self {
            Shape::Box { lo, hi } => cell.intersection_volume(&Aabb {
                lo: lo.clone(),
                hi: hi.clone(),
            }),
            Shape::Ball { center, radius } => {
                ball_box_volume(&Point::new(center.clone()), *radius, cell)
            }
        }
    }

    fn sample(&self, rng: &mut StreamRng) -> Point {
        match self {
            Shape::Box { lo, hi } => Point::new(
                lo.iter()
                    .zip(hi)
                    .map(|(l, h)| l + (h - l) * rng.random::<f64>())
                    .collect(),
            ),
            Shape::Ball { center, radius } => {
                let d = center.len();
                let mut dir: Vec<f64>;
                loop {
                    dir = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                    let norm = dir.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
                    if norm > 1e-12 {
                        dir.iter_mut().for_each(|v| *v /= norm);
                        break;
                    }
                }
                let rad = radius * rng.random::<f64>().powf(1.0 / d as f64);
                Point::new(center.iter().zip(&dir).map(|(c, u)| c + rad * u).collect())
            }
        }
    }

    /// Uniform draw from `self ∩ cell`, or `None` when the overlap is empty.
    fn sample_within(&self, cell: &Aabb, rng: &mut StreamRng) -> Option<Point> {
        let clip = cell.intersection(&self.bounding_box())?;
        match self {
            Shape::Box { .. } => Some(Shape::from_box(&clip).sample(rng)),
            Shape::Ball { .. } => {
                let proposal = Shape::from_box(&clip);
                for _ in 0..MAX_REJECTIONS {
                    let p = proposal.sample(rng);
                    if self.contains(&p) {
                        return Some(p);
                    }
                }
                None
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub shape: Shape,
    pub weight: f64,
}

/// Absolutely continuous density on an explicit environment box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDensity")]
pub struct DensityModel {
    pub dimension: usize,
    pub env: Aabb,
    pub regions: Vec<Region>,
}

#[derive(Deserialize)]
struct RawDensity {
    dimension: usize,
    env: Aabb,
    regions: Vec<Region>,
}

impl TryFrom<RawDensity> for DensityModel {
    type Error = CraneError;

    fn try_from(raw: RawDensity) -> Result<Self> {
        DensityModel::new(raw.dimension, raw.env, raw.regions)
    }
}

impl DensityModel {
    pub fn new(dimension: usize, env: Aabb, regions: Vec<Region>) -> Result<Self> {
        if !(2..=3).contains(&dimension) {
            return Err(CraneError::Config(format!(
                "dimension must be 2 or 3, got {dimension}"
            )));
        }
        let env = Aabb::new(env.lo, env.hi)?;
        if env.dim() != dimension {
            return Err(CraneError::Config("environment dimension mismatch".into()));
        }
        if regions.is_empty() {
            return Err(CraneError::Config("density needs at least one region".into()));
        }
        let mut total = 0.0;
        for (i, r) in regions.iter().enumerate() {
            if r.shape.dim() != dimension {
                return Err(CraneError::Config(format!("region {i} has wrong dimension")));
            }
            if !(r.weight >= 0.0) || !r.weight.is_finite() {
                return Err(CraneError::Config(format!("region {i} has invalid weight")));
            }
            if r.weight > 0.0 && !(r.shape.volume() > 0.0) {
                return Err(CraneError::Config(format!("region {i} has zero volume")));
            }
            if let Shape::Ball { radius, .. } = r.shape {
                if !(radius > 0.0) {
                    return Err(CraneError::Config(format!("region {i} has nonpositive radius")));
                }
            }
            if !env.contains_box(&r.shape.bounding_box(), 1e-12) {
                return Err(CraneError::Config(format!("region {i} extends outside env")));
            }
            total += r.weight;
        }
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(CraneError::Config(format!(
                "region weights sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            dimension,
            env,
            regions,
        })
    }

    /// Uniform density on the given box.
    pub fn uniform(env: Aabb) -> Result<Self> {
        let d = env.dim();
        let shape = Shape::from_box(&env);
        Self::new(d, env, vec![Region { shape, weight: 1.0 }])
    }

    pub fn uniform_unit_cube(dimension: usize) -> Self {
        Self::uniform(Aabb::unit(dimension)).expect("unit cube is a valid density")
    }

    /// Density value at a point.
    pub fn density_at(&self, p: &Point) -> f64 {
        self.regions
            .iter()
            .filter(|r| r.weight > 0.0 && r.shape.contains(p))
            .map(|r| r.weight / r.shape.volume())
            .sum()
    }

    /// Draw one point: region by weight, then uniform within the region.
    pub fn sample(&self, rng: &mut StreamRng) -> Point {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = &self.regions[self.regions.len() - 1];
        for r in &self.regions {
            acc += r.weight;
            if u < acc && r.weight > 0.0 {
                chosen = r;
                break;
            }
        }
        if chosen.weight == 0.0 {
            chosen = self
                .regions
                .iter()
                .rev()
                .find(|r| r.weight > 0.0)
                .expect("some region has positive weight");
        }
        chosen.shape.sample(rng)
    }

    pub fn sample_n(&self, n: usize, rng: &mut StreamRng) -> Vec<Point> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    /// Probability mass of one region inside `cell`.
    pub fn region_mass(&self, region: &Region, cell: &Aabb) -> f64 {
        if region.weight == 0.0 {
            return 0.0;
        }
        region.weight * (region.shape.overlap_volume(cell) / region.shape.volume()).clamp(0.0, 1.0)
    }

    /// Probability that a draw falls in `cell`.
    pub fn cell_measure(&self, cell: &Aabb) -> f64 {
        self.regions
            .iter()
            .map(|r| self.region_mass(r, cell))
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    /// Draw from the density conditioned on landing in `cell`.
    ///
    /// The region is chosen by its mass inside the cell, then a point is
    /// drawn uniformly from region ∩ cell (directly for boxes, by rejection
    /// from the clipped bounding box for balls).
    pub fn sample_in_cell(&self, cell: &Aabb, rng: &mut StreamRng) -> Result<Point> {
        let masses: Vec<f64> = self.regions.iter().map(|r| self.region_mass(r, cell)).collect();
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(CraneError::Sampling(format!(
                "cell {:?}..{:?} has zero probability",
                cell.lo, cell.hi
            )));
        }
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut idx = masses.iter().rposition(|&m| m > 0.0).unwrap();
        for (i, m) in masses.iter().enumerate() {
            acc += m;
            if u < acc && *m > 0.0 {
                idx = i;
                break;
            }
        }
        self.regions[idx]
            .shape
            .sample_within(cell, rng)
            .ok_or_else(|| CraneError::Sampling(format!("rejection sampling failed in region {idx}")))
    }

    /// True when no two positive-weight regions share volume.
    pub fn regions_disjoint(&self) -> bool {
        let active: Vec<&Region> = self.regions.iter().filter(|r| r.weight > 0.0).collect();
        for (i, a) in active.iter().enumerate() {
            for b in &active[i + 1..] {
                if shapes_overlap(&a.shape, &b.shape) {
                    return false;
                }
            }
        }
        true
    }
}

fn shapes_overlap(a: &Shape, b: &Shape) -> bool {
    match (a, b) {
        (Shape::Box { .. }, Shape::Box { .. }) => {
            a.bounding_box().intersection_volume(&b.bounding_box()) > 0.0
        }
        (Shape::Ball { center: c1, radius: r1 }, Shape::Ball { center: c2, radius: r2 }) => {
            Point::new(c1.clone()).distance(&Point::new(c2.clone())) < r1 + r2
        }
        (Shape::Box { lo, hi }, Shape::Ball { center, radius })
        | (Shape::Ball { center, radius }, Shape::Box { lo, hi }) => {
            let b = Aabb {
                lo: lo.clone(),
                hi: hi.clone(),
            };
            b.distance_to_point(&Point::new(center.clone())) < *radius && b.volume() > 0.0
        }
    }
}

/// Two unit cubes of pickups at x = −4 and x = −2; deliveries at x = −4
/// and x = +2. Each cube carries half the mass. The environment is the
/// tight bounding box of the three cubes.
pub fn case1() -> (DensityModel, DensityModel) {
    let cube = |x: f64| Shape::from_box(&Aabb::cube(&[x, 0.0, 0.0], 1.0));
    let env = Aabb::new(vec![-4.5, -0.5, -0.5], vec![2.5, 0.5, 0.5]).unwrap();
    let pickups = DensityModel::new(
        3,
        env.clone(),
        vec![
            Region { shape: cube(-4.0), weight: 0.5 },
            Region { shape: cube(-2.0), weight: 0.5 },
        ],
    )
    .unwrap();
    let deliveries = DensityModel::new(
        3,
        env,
        vec![
            Region { shape: cube(-4.0), weight: 0.5 },
            Region { shape: cube(2.0), weight: 0.5 },
        ],
    )
    .unwrap();
    (pickups, deliveries)
}

/// Concentric balls: pickups uniform in radius 2, deliveries uniform in
/// radius 1, environment `[−2, 2]³`.
pub fn case2() -> (DensityModel, DensityModel) {
    let env = Aabb::new(vec![-2.0; 3], vec![2.0; 3]).unwrap();
    let pickups = DensityModel::new(
        3,
        env.clone(),
        vec![Region { shape: Shape::ball(vec![0.0; 3], 2.0), weight: 1.0 }],
    )
    .unwrap();
    let deliveries = DensityModel::new(
        3,
        env,
        vec![Region { shape: Shape::ball(vec![0.0; 3], 1.0), weight: 1.0 }],
    )
    .unwrap();
    (pickups, deliveries)
}

/// Uniform pickups and deliveries on the unit cube `[0, 1]^d`.
pub fn uniform_cube(dimension: usize) -> (DensityModel, DensityModel) {
    let u = DensityModel::uniform_unit_cube(dimension);
    (u.clone(), u)
}

/// Look up a fixture pair by name: `case1`, `case2` or `uniform-cube`
/// (three-dimensional).
pub fn named_case(name: &str) -> Option<(DensityModel, DensityModel)> {
    match name {
        "case1" => Some(case1()),
        "case2" => Some(case2()),
        "uniform-cube" => Some(uniform_cube(3)),
        _ => None,
    }
}

/// Monte Carlo estimate of `E‖Y − X‖` for independent `X ~ pickups`,
/// `Y ~ deliveries`, returned with its standard error.
pub fn mean_pair_distance(
    pickups: &DensityModel,
    deliveries: &DensityModel,
    samples: usize,
    stream: RngStream,
) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(CraneError::Argument("mean_pair_distance needs at least 2 samples".into()));
    }
    if pickups.dimension != deliveries.dimension {
        return Err(CraneError::Config("density dimensions differ".into()));
    }
    let mut rng = stream.rng();
    // Welford
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 0..samples {
        let x = pickups.sample(&mut rng);
        let y = deliveries.sample(&mut rng);
        let d = x.distance(&y);
        let delta = d - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (d - mean);
    }
    let var = m2 / (samples - 1) as f64;
    Ok((mean, (var / samples as f64).sqrt()))
}
