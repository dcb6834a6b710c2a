//! Pickup/delivery instances and their JSON form.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distributions::DensityModel;
use crate::error::{CraneError, Result};
use crate::geometry::{Aabb, Point};
use crate::rng::RngStream;

/// One transport request: carry an item from `pickup` to `delivery`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub pickup: Point,
    pub delivery: Point,
}

impl Demand {
    pub fn new(pickup: impl Into<Point>, delivery: impl Into<Point>) -> Self {
        Self {
            pickup: pickup.into(),
            delivery: delivery.into(),
        }
    }

    /// Carrying distance ‖y − x‖.
    pub fn length(&self) -> f64 {
        self.pickup.distance(&self.delivery)
    }
}

/// `n ≥ 1` demands inside an explicit environment box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Instance {
    pub dimension: usize,
    pub env: Aabb,
    pub demands: Vec<Demand>,
}

impl Instance {
    pub fn new(env: Aabb, demands: Vec<Demand>) -> Result<Self> {
        let dimension = env.dim();
        if !(2..=3).contains(&dimension) {
            return Err(CraneError::Argument(format!(
                "dimension must be 2 or 3, got {dimension}"
            )));
        }
        if demands.is_empty() {
            return Err(CraneError::Parse("n must be ≥ 1".into()));
        }
        for (index, d) in demands.iter().enumerate() {
            for (what, p) in [("pickup", &d.pickup), ("delivery", &d.delivery)] {
                if p.dim() != dimension {
                    return Err(CraneError::DemandParse {
                        index,
                        message: format!("{what} has dimension {}, expected {dimension}", p.dim()),
                    });
                }
                if !p.is_finite() {
                    return Err(CraneError::DemandParse {
                        index,
                        message: format!("{what} has non-finite coordinates"),
                    });
                }
                if !env.contains(p) {
                    return Err(CraneError::DemandParse {
                        index,
                        message: format!("{what} {:?} lies outside env", p.coords),
                    });
                }
            }
        }
        Ok(Self {
            dimension,
            env,
            demands,
        })
    }

    /// Build an instance whose environment is the bounding box of its points.
    pub fn from_demands(demands: Vec<Demand>) -> Result<Self> {
        let first = demands
            .first()
            .ok_or_else(|| CraneError::Parse("n must be ≥ 1".into()))?;
        let d = first.pickup.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for dm in &demands {
            for p in [&dm.pickup, &dm.delivery] {
                for k in 0..d.min(p.dim()) {
                    lo[k] = lo[k].min(p.coords[k]);
                    hi[k] = hi[k].max(p.coords[k]);
                }
            }
        }
        Instance::new(Aabb::new(lo, hi)?, demands)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.demands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demands.is_empty()
    }

    pub fn pickups(&self) -> Vec<Point> {
        self.demands.iter().map(|d| d.pickup.clone()).collect()
    }

    pub fn deliveries(&self) -> Vec<Point> {
        self.demands.iter().map(|d| d.delivery.clone()).collect()
    }

    /// D(Ω): distance between opposite corners of the environment.
    pub fn env_diameter(&self) -> f64 {
        self.env.diameter()
    }

    /// Σ ‖y_i − x_i‖.
    pub fn carry_length(&self) -> f64 {
        self.demands.iter().map(Demand::length).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RawInstance::from(self)).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawInstance =
            serde_json::from_str(text).map_err(|e| CraneError::Parse(e.to_string()))?;
        raw.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    dimension: usize,
    env: RawEnv,
    demands: Vec<RawDemand>,
}

#[derive(Serialize, Deserialize)]
struct RawEnv {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDemand {
    pickup: Vec<f64>,
    delivery: Vec<f64>,
}

impl From<&Instance> for RawInstance {
    fn from(inst: &Instance) -> Self {
        RawInstance {
            dimension: inst.dimension,
            env: RawEnv {
                lo: inst.env.lo.clone(),
                hi: inst.env.hi.clone(),
            },
            demands: inst
                .demands
                .iter()
                .map(|d| RawDemand {
                    pickup: d.pickup.coords.clone(),
                    delivery: d.delivery.coords.clone(),
                })
                .collect(),
        }
    }
}

impl TryFrom<RawInstance> for Instance {
    type Error = CraneError;

    fn try_from(raw: RawInstance) -> Result<Self> {
        if raw.demands.is_empty() {
            return Err(CraneError::Parse("n must be ≥ 1".into()));
        }
        if raw.env.lo.len() != raw.dimension || raw.env.hi.len() != raw.dimension {
            return Err(CraneError::Parse(format!(
                "env bounds do not match dimension {}",
                raw.dimension
            )));
        }
        let env = Aabb::new(raw.env.lo, raw.env.hi).map_err(|e| CraneError::Parse(e.to_string()))?;
        let demands = raw
            .demands
            .into_iter()
            .map(|d| Demand::new(d.pickup, d.delivery))
            .collect();
        Instance::new(env, demands)
    }
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let text = fs::read_to_string(path)?;
    Instance::from_json(&text)
}

pub fn write_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, instance.to_json())?;
    Ok(())
}

/// Sample `n` demands with pickups i.i.d. from `pickups` and deliveries
/// i.i.d. from `deliveries`. Pickups and deliveries use separate derived
/// streams so each sequence is reproducible on its own.
pub fn instance_from_samples(
    pickups: &DensityModel,
    deliveries: &DensityModel,
    n: usize,
    stream: RngStream,
) -> Result<Instance> {
    if pickups.dimension != deliveries.dimension {
        return Err(CraneError::Config(format!(
            "pickup density has dimension {} but delivery density has {}",
            pickups.dimension, deliveries.dimension
        )));
    }
    if n == 0 {
        return Err(CraneError::Argument("n must be ≥ 1".into()));
    }
    let mut prng = stream.derive(1).rng();
    let mut drng = stream.derive(2).rng();
    let demands = (0..n)
        .map(|_| Demand {
            pickup: pickups.sample(&mut prng),
            delivery: deliveries.sample(&mut drng),
        })
        .collect();
    Instance::new(pickups.env.union_hull(&deliveries.env), demands)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{case1, uniform_cube};

    #[test]
    fn samples_are_deterministic_and_contained() {
        let (p, d) = uniform_cube(2);
        let a = instance_from_samples(&p, &d, 5, RngStream::new(1, 0)).unwrap();
        let b = instance_from_samples(&p, &d, 5, RngStream::new(1, 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        for dm in &a.demands {
            for p in [&dm.pickup, &dm.delivery] {
                assert!(p.coords.iter().all(|c| (0.0..=1.0).contains(c)));
            }
        }
        let c = instance_from_samples(&p, &d, 5, RngStream::new(1, 1)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn case1_half_of_pickups_in_far_cube() {
        let (p, d) = case1();
        let inst = instance_from_samples(&p, &d, 1000, RngStream::new(7, 0)).unwrap();
        let frac = inst.demands.iter().filter(|dm| dm.pickup.coords[0] < -3.0).count() as f64 / 1000.0;
        assert!((frac - 0.5).abs() <= 0.05, "fraction {frac}");
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let (p, _) = uniform_cube(2);
        let (_, d) = uniform_cube(3);
        assert!(matches!(
            instance_from_samples(&p, &d, 3, RngStream::new(0, 0)),
            Err(CraneError::Config(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let (p, d) = case1();
        let inst = instance_from_samples(&p, &d, 3, RngStream::new(11, 2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.json");
        write_instance(&inst, &path).unwrap();
        assert_eq!(read_instance(&path).unwrap(), inst);
    }

    #[test]
    fn wrong_point_dimension_names_demand() {
        let text = r#"{"dimension": 3, "env": {"lo": [0,0,0], "hi": [1,1,1]},
            "demands": [{"pickup": [0.1,0.1,0.1], "delivery": [0.2,0.2,0.2]},
                        {"pickup": [0.5,0.5], "delivery": [0.2,0.2,0.2]}]}"#;
        match Instance::from_json(text) {
            Err(CraneError::DemandParse { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_and_malformed_inputs() {
        let empty = r#"{"dimension": 2, "env": {"lo": [0,0], "hi": [1,1]}, "demands": []}"#;
        let err = Instance::from_json(empty).unwrap_err();
        assert!(err.to_string().contains("n must be ≥ 1"));
        assert!(matches!(Instance::from_json("{not json"), Err(CraneError::Parse(_))));
        let outside = r#"{"dimension": 2, "env": {"lo": [0,0], "hi": [1,1]},
            "demands": [{"pickup": [2,0], "delivery": [0,0]}]}"#;
        assert!(matches!(
            Instance::from_json(outside),
            Err(CraneError::DemandParse { index: 0, .. })
        ));
    }
}
