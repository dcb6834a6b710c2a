use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use crane_core::distributions::{mean_pair_distance, named_case, DensityModel};
use crane_core::dpdp::{self, DpdpConfig};
use crane_core::matching::{brute_force_matching, hungarian, Matching};
use crane_core::randmatch::randomized_ebmp_auto;
use crane_core::scp::{exact_scp, splice};
use crane_core::transport::{axis_resolution, kappa_pair, wasserstein_bracket, MAX_CELLS};
use crane_core::{instance_from_samples, read_instance, CraneError, RngStream};
use serde::Serialize;
use serde_json::json;

use crate::{Common, MatchAlgorithm, PlanChoice, SolveAlgorithm};

pub fn density_pair(case: &str) -> Result<(DensityModel, DensityModel), CraneError> {
    named_case(case).ok_or_else(|| {
        CraneError::Argument(format!("unknown case `{case}` (expected case1, case2 or uniform-cube)"))
    })
}

/// Write `text` to `out`, or to standard output when no path is given.
fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            writeln!(io::stdout(), "{text}")?;
            Ok(())
        }
    }
}

pub fn sample(case: &str, n: usize, common: &Common) -> anyhow::Result<()> {
    let (p, d) = density_pair(case)?;
    let inst = instance_from_samples(&p, &d, n, RngStream::new(common.seed, 0))?;
    emit(common.out.as_deref(), &inst.to_json())
}

pub fn solve(input: &Path, algorithm: SolveAlgorithm, common: &Common) -> anyhow::Result<()> {
    let inst = read_instance(input).with_context(|| format!("reading {}", input.display()))?;
    let (tour, name) = match algorithm {
        SolveAlgorithm::Splice => (splice(&inst)?.0, "splice"),
        SolveAlgorithm::Exact => (exact_scp(&inst)?, "exact"),
    };
    if let Some(path) = &common.out {
        fs::write(path, tour.to_json(Some(name))).with_context(|| format!("writing {}", path.display()))?;
    }
    let order: Vec<String> = tour.order.iter().map(|i| (i + 1).to_string()).collect();
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "total_length={}", tour.total_length)?;
    writeln!(stdout, "subtour_count={}", tour.subtour_count)?;
    writeln!(stdout, "order={}", order.join(","))?;
    Ok(())
}

#[derive(Serialize)]
struct MatchingJson<'a> {
    algorithm: &'a str,
    /// Entry `i` is the 1-based pickup matched to delivery `i + 1`.
    pickup_for_delivery: Vec<usize>,
    total_cost: f64,
    avg_cost: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    resolution: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    shadow_displacement: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    shadow_matching_cost: Option<f64>,
}

impl<'a> MatchingJson<'a> {
    fn new(algorithm: &'a str, m: &Matching) -> Self {
        Self {
            algorithm,
            pickup_for_delivery: m.perm.to_one_based(),
            total_cost: m.total_cost,
            avg_cost: m.avg_cost,
            resolution: None,
            shadow_displacement: None,
            shadow_matching_cost: None,
        }
    }
}

pub fn matching(input: &Path, algorithm: MatchAlgorithm, case: Option<&str>, common: &Common) -> anyhow::Result<()> {
    let inst = read_instance(input).with_context(|| format!("reading {}", input.display()))?;
    let (x, y) = (inst.pickups(), inst.deliveries());
    let out = match algorithm {
        MatchAlgorithm::Hungarian => MatchingJson::new("hungarian", &hungarian(&x, &y)?),
        MatchAlgorithm::Brute => MatchingJson::new("brute", &brute_force_matching(&x, &y)?),
        MatchAlgorithm::Randomized => {
            let case = case.ok_or_else(|| CraneError::Argument("randomized matching needs --case".into()))?;
            let (p, d) = density_pair(case)?;
            let r = randomized_ebmp_auto(&x, &y, &p, &d, RngStream::new(common.seed, 0))?;
            let mut j = MatchingJson::new("randomized", &r.matching);
            j.resolution = Some(r.r);
            j.shadow_displacement = Some(r.shadow_displacement);
            j.shadow_matching_cost = Some(r.shadow_matching_cost);
            j
        }
    };
    emit(common.out.as_deref(), &serde_json::to_string_pretty(&out)?)
}

pub fn wasserstein(case: &str, r: usize, plan: PlanChoice, common: &Common) -> anyhow::Result<()> {
    let (p, d) = density_pair(case)?;
    let b = wasserstein_bracket(&p, &d, r)?;
    if let Some(path) = &common.out {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let chosen = match plan {
            PlanChoice::Optimistic => &b.optimistic,
            PlanChoice::Pessimistic => &b.pessimistic,
        };
        chosen.write_csv(&b.grid, BufWriter::new(file))?;
    }
    let summary = json!({
        "case": case,
        "r": r,
        "cells": b.grid.len(),
        "lower": b.lower,
        "upper": b.upper,
        "midpoint": b.midpoint(),
        "width": b.width(),
    });
    writeln!(io::stdout(), "{}", serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

pub fn kappa(case: &str) -> anyhow::Result<()> {
    let (p, d) = density_pair(case)?;
    let (k, kt) = kappa_pair(&p, &d)?;
    let summary = json!({ "case": case, "kappa": k, "kappa_tilde": kt });
    writeln!(io::stdout(), "{}", serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

/// Largest resolution whose grid stays within the cell cap.
fn finest_resolution(p: &DensityModel, d: &DensityModel) -> usize {
    let env = p.env.union_hull(&d.env);
    (1..=64)
        .take_while(|&r| axis_resolution(&env, r).iter().product::<usize>() <= MAX_CELLS)
        .last()
        .unwrap_or(1)
}

pub fn simulate(config: &Path, resolution: Option<usize>, common: &Common) -> anyhow::Result<()> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let cfg = DpdpConfig::from_json(&text)?;
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let trace = dpdp::simulate(&cfg)?;
    trace.write_events_csv(BufWriter::new(File::create(dir.join("events.csv"))?))?;
    trace.write_queue_csv(BufWriter::new(File::create(dir.join("queue.csv"))?))?;

    let (mean_outstanding, growth_rate) = dpdp::stability_diagnostic(&trace);
    let (mean_yx, mean_yx_se) = mean_pair_distance(&cfg.phi_p, &cfg.phi_d, 1_000_000, cfg.seed.derive(2))?;
    let r = resolution.unwrap_or_else(|| finest_resolution(&cfg.phi_p, &cfg.phi_d));
    let bracket = wasserstein_bracket(&cfg.phi_p, &cfg.phi_d, r)?;
    let w = bracket.midpoint();
    let summary = json!({
        "policy": cfg.policy,
        "lambda": cfg.lambda,
        "arrivals": trace.demands.len(),
        "served": trace.served(),
        "mean_wait": trace.mean_wait(),
        "mean_outstanding": mean_outstanding,
        "growth_rate": growth_rate,
        "lambda_star_estimate": dpdp::estimate_lambda_star(&trace, cfg.lambda),
        "mean_pair_distance": mean_yx,
        "mean_pair_distance_se": mean_yx_se,
        "wasserstein_lower": bracket.lower,
        "wasserstein_upper": bracket.upper,
        "resolution": r,
        "load_factor": dpdp::load_factor(cfg.lambda, cfg.m, cfg.v, mean_yx, w)?,
        "lambda_star_theoretical": dpdp::lambda_star(cfg.m, cfg.v, mean_yx, w)?,
    });
    let mut f = BufWriter::new(File::create(dir.join("summary.json"))?);
    writeln!(f, "{}", serde_json::to_string_pretty(&summary)?)?;
    f.flush()?;
    let stdout = io::stdout();
    writeln!(stdout.lock(), "{}", serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}
