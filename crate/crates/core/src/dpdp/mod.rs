//! Dynamic pickup and delivery with unit-capacity vehicles.
//!
//! Demands arrive as a Poisson process with i.i.d. pickup and delivery
//! sites. Vehicles travel in straight lines at constant speed and carry one
//! demand at a time. Two routing policies are simulated: nearest neighbor
//! and a gated policy that serves each batch of outstanding demands along a
//! SPLICE tour cut into one fragment per vehicle.
//!
//! The stability threshold is `λ* = m·v / (E‖Y − X‖ + W)`, with `W` the
//! Wasserstein distance from the delivery to the pickup density.

mod sim;
mod trace;

use serde::{Deserialize, Serialize};

use crate::distributions::{named_case, DensityModel};
use crate::error::{CraneError, Result};
use crate::rng::RngStream;

pub use sim::{simulate, simulate_scripted, split_tour, ScriptedArrival};
pub use trace::{EventKind, SimDemand, SimTrace, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    NearestNeighbor,
    GatedSplice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct DpdpConfig {
    pub lambda: f64,
    pub m: usize,
    pub v: f64,
    pub phi_p: DensityModel,
    pub phi_d: DensityModel,
    pub policy: Policy,
    pub horizon: f64,
    pub warmup: f64,
    /// Spacing of queue-length samples.
    pub sample_interval: f64,
    pub seed: RngStream,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    lambda: f64,
    #[serde(default = "one")]
    m: usize,
    #[serde(default = "one_f")]
    v: f64,
    #[serde(default)]
    case: Option<String>,
    #[serde(default)]
    phi_p: Option<DensityModel>,
    #[serde(default)]
    phi_d: Option<DensityModel>,
    policy: Policy,
    horizon: f64,
    #[serde(default)]
    warmup: Option<f64>,
    #[serde(default)]
    sample_interval: Option<f64>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    stream: u64,
}

fn one() -> usize {
    1
}

fn one_f() -> f64 {
    1.0
}

impl TryFrom<RawConfig> for DpdpConfig {
    type Error = CraneError;

    fn try_from(raw: RawConfig) -> Result<Self> {
        let (phi_p, phi_d) = match (raw.case, raw.phi_p, raw.phi_d) {
            (Some(name), None, None) => {
                named_case(&name).ok_or_else(|| CraneError::Config(format!("unknown case `{name}`")))?
            }
            (None, Some(p), Some(d)) => (p, d),
            _ => {
                return Err(CraneError::Config(
                    "give either `case` or both `phi_p` and `phi_d`".into(),
                ))
            }
        };
        let mut cfg = DpdpConfig {
            lambda: raw.lambda,
            m: raw.m,
            v: raw.v,
            phi_p,
            phi_d,
            policy: raw.policy,
            horizon: raw.horizon,
            warmup: raw.warmup.unwrap_or(0.1 * raw.horizon),
            sample_interval: raw.sample_interval.unwrap_or(raw.horizon / 1000.0),
            seed: RngStream::new(raw.seed, raw.stream),
        };
        cfg.validate()?;
        cfg.sample_interval = cfg.sample_interval.max(f64::MIN_POSITIVE);
        Ok(cfg)
    }
}

impl DpdpConfig {
    /// Config with warmup `T/10` and `T/1000` sample spacing.
    pub fn new(
        lambda: f64,
        m: usize,
        v: f64,
        (phi_p, phi_d): (DensityModel, DensityModel),
        policy: Policy,
        horizon: f64,
        seed: RngStream,
    ) -> Result<Self> {
        let cfg = Self {
            lambda,
            m,
            v,
            phi_p,
            phi_d,
            policy,
            horizon,
            warmup: 0.1 * horizon,
            sample_interval: horizon / 1000.0,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(CraneError::Config("lambda > 0 required".into()));
        }
        if self.m == 0 {
            return Err(CraneError::Config("m ≥ 1 required".into()));
        }
        if !(self.v > 0.0) || !self.v.is_finite() {
            return Err(CraneError::Config("v > 0 required".into()));
        }
        if !(self.horizon.is_finite() && self.warmup >= 0.0 && self.horizon > self.warmup) {
            return Err(CraneError::Config("horizon > warmup ≥ 0 required".into()));
        }
        if !(self.sample_interval > 0.0) {
            return Err(CraneError::Config("sample_interval > 0 required".into()));
        }
        if self.phi_p.dimension != self.phi_d.dimension {
            return Err(CraneError::Config("pickup and delivery densities differ in dimension".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| match e.classify() {
            serde_json::error::Category::Data => CraneError::Config(e.to_string()),
            _ => CraneError::Parse(e.to_string()),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({
            "lambda": self.lambda,
            "m": self.m,
            "v": self.v,
            "phi_p": self.phi_p,
            "phi_d": self.phi_d,
            "policy": self.policy,
            "horizon": self.horizon,
            "warmup": self.warmup,
            "sample_interval": self.sample_interval,
            "seed": self.seed.seed,
            "stream": self.seed.stream,
        }))
        .expect("config serializes")
    }
}

/// `ϱ = λ (E‖Y − X‖ + W) / (v m)`.
pub fn load_factor(lambda: f64, m: usize, v: f64, mean_yx: f64, w: f64) -> Result<f64> {
    if !(lambda > 0.0) || m == 0 || !(v > 0.0) {
        return Err(CraneError::Argument("load factor needs λ > 0, m ≥ 1, v > 0".into()));
    }
    if !(mean_yx > 0.0) || !(w >= 0.0) {
        return Err(CraneError::Argument("load factor needs E‖Y−X‖ > 0 and W ≥ 0".into()));
    }
    Ok(lambda * (mean_yx + w) / (v * m as f64))
}

/// The arrival rate at which the load factor reaches one.
pub fn lambda_star(m: usize, v: f64, mean_yx: f64, w: f64) -> Result<f64> {
    if m == 0 || !(v > 0.0) {
        return Err(CraneError::Argument("λ* needs m ≥ 1 and v > 0".into()));
    }
    let travel = mean_yx + w;
    if !(travel > 0.0) || !(mean_yx >= 0.0) || !(w >= 0.0) {
        return Err(CraneError::Argument("λ* needs positive mean travel per demand".into()));
    }
    Ok(m as f64 * v / travel)
}

/// Throughput estimate `λ − (n(T) − n(T_w)) / (T − T_w)` of an overloaded
/// run, with `n` the outstanding count and `T_w` the warmup. For a stable
/// run this just returns about `λ`.
pub fn estimate_lambda_star(trace: &SimTrace, lambda: f64) -> f64 {
    let growth = trace.outstanding_at(trace.horizon) as f64 - trace.outstanding_at(trace.warmup) as f64;
    lambda - growth / (trace.horizon - trace.warmup)
}

/// Mean outstanding count and least-squares growth rate of the queue after
/// warmup.
pub fn stability_diagnostic(trace: &SimTrace) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = trace
        .queue_samples
        .iter()
        .filter(|(t, _)| *t >= trace.warmup)
        .map(|&(t, n)| (t, n as f64))
        .collect();
    if pts.is_empty() {
        return (0.0, 0.0);
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let mn = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mn)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (mn, slope)
}
