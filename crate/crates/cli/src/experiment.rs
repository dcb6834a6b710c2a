use std::fs::File;
use std::io::{self, Write};
use std::time::Instant;

use anyhow::Context;
use crane_core::distributions::mean_pair_distance;
use crane_core::dpdp::{estimate_lambda_star, lambda_star, simulate, DpdpConfig, Policy};
use crane_core::matching::hungarian;
use crane_core::scp::{exact_scp, scp_lower_bound, splice, EXACT_MAX_N};
use crane_core::transport::{kappa_pair, wasserstein_bracket};
use crane_core::{instance_from_samples, CraneError, RngStream};
use rayon::prelude::*;

use crate::commands::density_pair;
use crate::{Common, UnknownPreset};

const PRESETS: [&str; 6] = ["fig4", "fig5", "fig6", "fig7", "table1", "table2"];

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub preset: String,
    pub cases: Vec<String>,
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

impl ExperimentSpec {
    fn validate(&self) -> Result<(), CraneError> {
        if self.trials == 0 {
            return Err(CraneError::Argument("trials must be at least 1".into()));
        }
        // table1 alone may leave sizes empty and use per-case resolutions
        let empty_ok = self.preset == "table1";
        if (self.sizes.is_empty() && !empty_ok) || self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CraneError::Argument("sizes must be a nonempty ascending list".into()));
        }
        if self.sizes.first() == Some(&0) {
            return Err(CraneError::Argument("sizes must be positive".into()));
        }
        for c in &self.cases {
            density_pair(c)?;
        }
        Ok(())
    }

    /// Stream for one trial at one size.
    fn stream(&self, n: usize, trial: usize) -> RngStream {
        RngStream::new(self.seed, trial as u64).derive(n as u64)
    }

    fn grid(&self) -> Vec<(usize, usize)> {
        self.sizes
            .iter()
            .flat_map(|&n| (0..self.trials).map(move |t| (n, t)))
            .collect()
    }
}

/// Closed-form Wasserstein distances of the built-in density pairs.
fn analytic_wasserstein(case: &str) -> f64 {
    match case {
        "case1" => 2.0,
        "case2" => 0.75,
        _ => 0.0,
    }
}

fn defaults(preset: &str) -> (Vec<&'static str>, Vec<usize>, usize) {
    match preset {
        "fig4" => (vec!["uniform-cube"], (4..=12).collect(), 25),
        "fig5" => (vec!["uniform-cube"], (4..=12).collect(), 5),
        "fig6" => (vec!["uniform-cube"], vec![100, 200, 500, 1000], 3),
        "fig7" => (vec!["case1"], vec![100, 200, 500, 1000], 10),
        "table1" => (vec!["case1", "case2"], Vec::new(), 1),
        _ => (vec!["case1", "case2"], vec![5000], 5),
    }
}

fn fmt(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

type Rows = Vec<Vec<String>>;

pub fn run(
    preset: &str,
    case: Option<&str>,
    sizes: Option<Vec<usize>>,
    trials: Option<usize>,
    common: &Common,
) -> anyhow::Result<()> {
    if !PRESETS.contains(&preset) {
        return Err(UnknownPreset(preset.to_string()).into());
    }
    let (default_cases, default_sizes, default_trials) = defaults(preset);
    let cases = match case {
        Some(c) => vec![c.to_string()],
        None => default_cases.into_iter().map(String::from).collect(),
    };
    let sizes = sizes.unwrap_or(default_sizes);
    let spec = ExperimentSpec {
        preset: preset.to_string(),
        cases,
        sizes,
        trials: trials.unwrap_or(default_trials),
        seed: common.seed,
    };
    spec.validate()?;

    let (header, rows): (Vec<&str>, Rows) = match preset {
        "fig4" => fig4(&spec)?,
        "fig5" => fig5(&spec)?,
        "fig6" => fig6(&spec)?,
        "fig7" => fig7(&spec)?,
        "table1" => table1(&spec)?,
        _ => table2(&spec)?,
    };
    let sink: Box<dyn Write> = match &common.out {
        Some(path) => Box::new(File::create(path).with_context(|| format!("creating {}", path.display()))?),
        None => Box::new(io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(&header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn prefix(spec: &ExperimentSpec, case: &str, n: Option<usize>, trial: usize) -> Vec<String> {
    vec![
        spec.preset.clone(),
        case.to_string(),
        n.map(|n| n.to_string()).unwrap_or_default(),
        trial.to_string(),
        spec.seed.to_string(),
    ]
}

const KEY: [&str; 5] = ["preset", "case", "n", "trial", "seed"];

fn header(extra: &[&'static str]) -> Vec<&'static str> {
    KEY.iter().chain(extra).copied().collect()
}

fn per_case<F>(spec: &ExperimentSpec, parallel: bool, f: F) -> anyhow::Result<Rows>
where
    F: Fn(&str, usize, usize) -> anyhow::Result<Vec<String>> + Sync,
{
    let mut rows = Vec::new();
    for case in &spec.cases {
        let grid = spec.grid();
        let part: anyhow::Result<Rows> = if parallel {
            grid.par_iter().map(|&(n, t)| f(case, n, t)).collect()
        } else {
            grid.iter().map(|&(n, t)| f(case, n, t)).collect()
        };
        rows.extend(part?);
    }
    Ok(rows)
}

fn fig4(spec: &ExperimentSpec) -> anyhow::Result<(Vec<&'static str>, Rows)> {
    let rows = per_case(spec, true, |case, n, trial| {
        let (p, d) = density_pair(case)?;
        let inst = instance_from_samples(&p, &d, n, spec.stream(n, trial))?;
        let (tour, diag) = splice(&inst)?;
        let lower = scp_lower_bound(&inst)?;
        let exact = if n <= EXACT_MAX_N { Some(exact_scp(&inst)?.total_length) } else { None };
        let mut row = prefix(spec, case, Some(n), trial);
        row.extend([
            fmt(tour.total_length),
            opt(exact),
            fmt(lower),
            opt(exact.map(|e| tour.total_length / e)),
            fmt(tour.total_length / lower),
            diag.subtour_count.to_string(),
        ]);
        Ok(row)
    })?;
    Ok((header(&["L_splice", "L_exact", "L_lower", "ratio", "ratio_lower", "subtours"]), rows))
}

fn millis(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

// Timing presets run sequentially so trials do not compete for cores.
fn fig5(spec: &ExperimentSpec) -> anyhow::Result<(Vec<&'static str>, Rows)> {
    let rows = per_case(spec, false, |case, n, trial| {
        let (p, d) = density_pair(case)?;
        let inst = instance_from_samples(&p, &d, n, spec.stream(n, trial))?;
        let t = Instant::now();
        let (tour, _) = splice(&inst)?;
        let t_splice = millis(t);
        let (exact, t_exact) = if n <= EXACT_MAX_N {
            let t = Instant::now();
            let e = exact_scp(&inst)?;
            (Some(e.total_length), Some(millis(t)))
        } else {
            (None, None)
        };
        let mut row = prefix(spec, case, Some(n), trial);
        row.extend([fmt(t_splice), opt(t_exact), fmt(tour.total_length), opt(exact)]);
        Ok(row)
    })?;
    Ok((header(&["t_splice_ms", "t_exact_ms", "L_splice", "L_exact"]), rows))
}

fn fig6(spec: &ExperimentSpec) -> anyhow::Result<(Vec<&'static str>, Rows)> {
    let rows = per_case(spec, false, |case, n, trial| {
        let (p, d) = density_pair(case)?;
        let inst = instance_from_samples(&p, &d, n, spec.stream(n, trial))?;
        let t = Instant::now();
        let m = hungarian(&inst.pickups(), &inst.deliveries())?;
        let t_matching = millis(t);
        let t = Instant::now();
        let (tour, diag) = splice(&inst)?;
        let t_splice = millis(t);
        let lower = inst.carry_length() + m.total_cost;
        let mut row = prefix(spec, case, Some(n), trial);
        row.extend([
            fmt(t_matching),
            fmt(t_splice),
            fmt(tour.total_length),
            fmt(lower),
            diag.subtour_count.to_string(),
        ]);
        Ok(row)
    })?;
    Ok((header(&["t_matching_ms", "t_splice_ms", "L_splice", "L_lower", "subtours"]), rows))
}

fn fig7(spec: &ExperimentSpec) -> anyhow::Result<(Vec<&'static str>, Rows)> {
    let rows = per_case(spec, true, |case, n, trial| {
        let (p, d) = density_pair(case)?;
        let inst = instance_from_samples(&p, &d, n, spec.stream(n, trial))?;
        let lm = hungarian(&inst.pickups(), &inst.deliveries())?.total_cost;
        let w = analytic_wasserstein(case);
        let nf = n as f64;
        let scale = nf.powf(1.0 - 1.0 / p.dimension as f64);
        let mut row = prefix(spec, case, Some(n), trial);
        row.extend([
            fmt(w),
            fmt(lm),
            fmt(lm / nf),
            fmt((lm - nf * w) / scale),
            fmt((lm - w) / scale),
        ]);
        Ok(row)
    })?;
    Ok((header(&["W", "L_M", "L_M_over_n", "residual", "residual_caption"]), rows))
}

/// Sizes are read as grid resolutions.
fn table1(spec: &ExperimentSpec) -> anyhow::Result<(Vec<&'static str>, Rows)> {
    let mut rows = Vec::new();
    for case in &spec.cases {
        let (p, d) = density_pair(case)?;
        let (k, kt) = kappa_pair(&p, &d)?;
        let resolutions = if spec.sizes.is_empty() {
            vec![if case == "case1" { 56 } else { 8 }]
        } else {
            spec.sizes.clone()
        };
        for r in resolutions {
            let b = wasserstein_bracket(&p, &d, r)?;
            let mut row = prefix(spec, case, None, 0);
            row.extend([
                r.to_string(),
                b.grid.len().to_string(),
                fmt(b.lower),
                fmt(b.upper),
                fmt(b.midpoint()),
                fmt(k),
                fmt(kt),
            ]);
            rows.push(row);
        }
    }
    Ok((header(&["r", "cells", "W_lower", "W_upper", "W_mid", "kappa", "kappa_tilde"]), rows))
}

/// Sizes are read as simulation horizons.
fn table2(spec: &ExperimentSpec) -> anyhow::Result<(Vec<&'static str>, Rows)> {
    let mut rows = Vec::new();
    for case in &spec.cases {
        let (p, d) = density_pair(case)?;
        let (mean_yx, se) = mean_pair_distance(&p, &d, 1_000_000, RngStream::new(spec.seed, 0).derive(u64::MAX))?;
        let w = analytic_wasserstein(case);
        let threshold = lambda_star(1, 1.0, mean_yx, w)?;
        let grid = spec.grid();
        let part: anyhow::Result<Rows> = grid
            .par_iter()
            .map(|&(horizon, trial)| {
                let cfg = DpdpConfig::new(
                    1.0,
                    1,
                    1.0,
                    (p.clone(), d.clone()),
                    Policy::NearestNeighbor,
                    horizon as f64,
                    RngStream::new(spec.seed, trial as u64),
                )?;
                let trace = simulate(&cfg)?;
                let mut row = prefix(spec, case, None, trial);
                row.extend([
                    horizon.to_string(),
                    fmt(mean_yx),
                    fmt(se),
                    fmt(w),
                    fmt(threshold),
                    fmt(estimate_lambda_star(&trace, 1.0)),
                ]);
                Ok(row)
            })
            .collect();
        rows.extend(part?);
    }
    Ok((
        header(&["horizon", "mean_yx", "mean_yx_se", "W", "lambda_star", "lambda_star_estimate"]),
        rows,
    ))
}
