//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run all criteria with `cargo test -p crane-core --test acceptance`, or
//! pick some by number: `cargo test -p crane-core --test acceptance -- 4 7`.

use std::process::ExitCode;
use std::time::Instant;

use crane_core::distributions::{case1, case2, mean_pair_distance, uniform_cube, DensityModel};
use crane_core::dpdp::{estimate_lambda_star, lambda_star, simulate, stability_diagnostic, DpdpConfig, Policy};
use crane_core::matching::{brute_force_matching, hungarian};
use crane_core::permutation::Permutation;
use crane_core::randmatch::{default_resolution, sample_shadows};
use crane_core::scp::{exact_scp, scp_lower_bound, splice};
use crane_core::transport::{
    build_grid, kappa_pair, solve_optimistic, solve_pessimistic, wasserstein_bracket, GridPartition, PlanKind,
    TransportPlan,
};
use crane_core::{instance_from_samples, Instance, Point, RngStream};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(checks: Vec<(bool, String)>) -> Self {
        Outcome {
            pass: checks.iter().all(|c| c.0),
            detail: checks
                .into_iter()
                .map(|(ok, s)| if ok { s } else { format!("{s} <-- FAIL") })
                .collect::<Vec<_>>()
                .join("; "),
        }
    }
}

// ---------- independent oracles ----------

fn cost(x: &[Point], y: &[Point], sigma: &[usize]) -> f64 {
    sigma.iter().enumerate().map(|(i, &j)| x[j].distance(&y[i])).sum()
}

/// All permutations of `0..n` by Heap's algorithm.
fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = vec![a.clone()];
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

fn oracle_matching(x: &[Point], y: &[Point]) -> f64 {
    permutations(x.len()).iter().map(|s| cost(x, y, s)).fold(f64::INFINITY, f64::min)
}

/// Shortest stacker crane tour by enumerating every cyclic order.
fn oracle_scp(inst: &Instance) -> f64 {
    let n = inst.len();
    let d = &inst.demands;
    let carry: f64 = d.iter().map(|q| q.pickup.distance(&q.delivery)).sum();
    let mut best = f64::INFINITY;
    for rest in permutations(n - 1) {
        let order: Vec<usize> = std::iter::once(0).chain(rest.iter().map(|&k| k + 1)).collect();
        let links: f64 = (0..n)
            .map(|k| d[order[k]].delivery.distance(&d[order[(k + 1) % n]].pickup))
            .sum();
        best = best.min(carry + links);
    }
    best
}

fn cycles(sigma: &[usize]) -> usize {
    let mut seen = vec![false; sigma.len()];
    let mut count = 0;
    for s in 0..sigma.len() {
        if !seen[s] {
            count += 1;
            let mut k = s;
            while !seen[k] {
                seen[k] = true;
                k = sigma[k];
            }
        }
    }
    count
}

fn harmonic(n: usize) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn chi_square_p(observed: &[f64], expected: &[f64]) -> f64 {
    let stat: f64 = observed.iter().zip(expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = (observed.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

fn sample(p: &DensityModel, d: &DensityModel, n: usize, seed: u64, stream: u64) -> Instance {
    instance_from_samples(p, d, n, RngStream::new(seed, stream)).unwrap()
}

// ---------- criteria ----------

fn c1_matching_oracle() -> Outcome {
    let mut rng = RngStream::new(101, 0).rng();
    let mut worst: f64 = 0.0;
    let mut brute_worst: f64 = 0.0;
    for k in 0..200 {
        let n = rng.random_range(1..=7);
        let d = if k % 2 == 0 { 2 } else { 3 };
        let (p, q) = uniform_cube(d);
        let inst = sample(&p, &q, n, 101, k + 1);
        let (x, y) = (inst.pickups(), inst.deliveries());
        let h = hungarian(&x, &y).unwrap().total_cost;
        worst = worst.max((h - oracle_matching(&x, &y)).abs());
        brute_worst = brute_worst.max((h - brute_force_matching(&x, &y).unwrap().total_cost).abs());
    }
    Outcome::new(vec![
        (worst <= 1e-9, format!("200 instances, max |hungarian - enumeration| = {worst:.1e}")),
        (brute_worst <= 1e-9, format!("max |hungarian - brute_force_matching| = {brute_worst:.1e}")),
    ])
}

fn c2_scp_oracle() -> Outcome {
    let mut rng = RngStream::new(102, 0).rng();
    let mut worst: f64 = 0.0;
    let mut splice_below = 0;
    for k in 0..100 {
        let n = rng.random_range(1..=8);
        let (p, q) = uniform_cube(2 + (k % 2) as usize);
        let inst = sample(&p, &q, n, 102, k + 1);
        let exact = exact_scp(&inst).unwrap().total_length;
        worst = worst.max((exact - oracle_scp(&inst)).abs());
        if splice(&inst).unwrap().0.total_length < exact - 1e-9 {
            splice_below += 1;
        }
    }
    Outcome::new(vec![
        (worst <= 1e-9, format!("100 instances, max |exact - cyclic enumeration| = {worst:.1e}")),
        (splice_below == 0, format!("splice shorter than exact in {splice_below} cases")),
    ])
}

fn c3_subtours_are_cycles() -> Outcome {
    let mut rng = RngStream::new(103, 0).rng();
    let mut mismatches = 0;
    let mut total = 0;
    for k in 0..500 {
        let n = rng.random_range(1..=60);
        let (p, q) = uniform_cube(2 + (k % 2) as usize);
        let inst = sample(&p, &q, n, 103, k + 1);
        let (tour, diag) = splice(&inst).unwrap();
        let c = cycles(diag.matching.perm.as_slice());
        total += c;
        if tour.subtour_count != c {
            mismatches += 1;
        }
    }
    Outcome::new(vec![(
        mismatches == 0,
        format!("500 instances ({total} cycles total), {mismatches} subtour/cycle mismatches"),
    )])
}

fn c4_equiprobable_optima() -> Outcome {
    let perms = permutations(3);
    let mut counts = [0.0f64; 6];
    let (p, q) = uniform_cube(2);
    for k in 0..6000 {
        let inst = sample(&p, &q, 3, 104, k);
        let m = hungarian(&inst.pickups(), &inst.deliveries()).unwrap();
        let idx = perms.iter().position(|s| s.as_slice() == m.perm.as_slice()).unwrap();
        counts[idx] += 1.0;
    }
    let pval = chi_square_p(&counts, &[1000.0; 6]);
    Outcome::new(vec![(pval > 0.001, format!("counts {counts:?}, chi-square p = {pval:.4}"))])
}

fn c5_cycle_statistics() -> Outcome {
    let mut rng = RngStream::new(105, 0).rng();
    let counts: Vec<f64> = (0..200)
        .map(|_| cycles(Permutation::random(1000, &mut rng).as_slice()) as f64)
        .collect();
    let (mean, se) = mean_se(&counts);
    let h = harmonic(1000);
    Outcome::new(vec![(
        (mean - h).abs() <= 3.0 * se,
        format!("mean cycles {mean:.4} vs H_1000 = {h:.4}, SE {se:.4}"),
    )])
}

fn c6_splice_near_optimal() -> Outcome {
    let (p, q) = uniform_cube(3);
    let ratios: Vec<f64> = (0..25)
        .map(|t| {
            let inst = sample(&p, &q, 10, 106, t);
            splice(&inst).unwrap().0.total_length / exact_scp(&inst).unwrap().total_length
        })
        .collect();
    let r10 = mean_se(&ratios).0;
    let lb_ratio = |n: usize| {
        let r: Vec<f64> = (0..10)
            .map(|t| {
                let inst = sample(&p, &q, n, 106, 1000 + t);
                splice(&inst).unwrap().0.total_length / scp_lower_bound(&inst).unwrap()
            })
            .collect();
        mean_se(&r).0
    };
    let (r200, r1000) = (lb_ratio(200), lb_ratio(1000));
    Outcome::new(vec![
        (r10 <= 1.20, format!("n=10 mean L_splice/L_exact = {r10:.4}")),
        (r200 <= 1.10, format!("n=200 mean L_splice/lower = {r200:.4}")),
        (r1000 <= 1.05, format!("n=1000 mean L_splice/lower = {r1000:.4}")),
    ])
}

fn c7_table1() -> Outcome {
    let (k1, kt1) = kappa_pair(&case1().0, &case1().1).unwrap();
    let (k2, kt2) = kappa_pair(&case2().0, &case2().1).unwrap();
    let (p1, d1) = case1();
    let b1 = wasserstein_bracket(&p1, &d1, 56).unwrap();
    let side = (0..3).map(|a| b1.grid.cell_side(a)).fold(0.0, f64::max);
    let (p2, d2) = case2();
    let b2 = wasserstein_bracket(&p2, &d2, 8).unwrap();
    Outcome::new(vec![
        ((k1 - 0.892).abs() <= 0.005, format!("case1 kappa {k1:.4}")),
        ((kt1 - 0.446).abs() <= 0.005, format!("case1 kappa~ {kt1:.4}")),
        ((k2 - 1.141).abs() <= 0.01, format!("case2 kappa {k2:.4}")),
        ((kt2 - 0.285).abs() <= 0.01, format!("case2 kappa~ {kt2:.4}")),
        (
            side <= 0.125 + 1e-12 && b1.lower >= 1.8 && b1.upper <= 2.2,
            format!("case1 side {side} bracket [{:.4}, {:.4}]", b1.lower, b1.upper),
        ),
        (
            b2.lower <= 0.75 && 0.75 <= b2.upper && (b2.midpoint() - 0.75).abs() <= 0.25,
            format!("case2 r=8 bracket [{:.4}, {:.4}] mid {:.4}", b2.lower, b2.upper, b2.midpoint()),
        ),
    ])
}

fn c8_table2_statistics() -> Outcome {
    let (p1, d1) = case1();
    let (p2, d2) = case2();
    let (m1, se1) = mean_pair_distance(&p1, &d1, 1_000_000, RngStream::new(108, 1)).unwrap();
    let (m2, se2) = mean_pair_distance(&p2, &d2, 1_000_000, RngStream::new(108, 2)).unwrap();
    let l1 = lambda_star(1, 1.0, m1, 2.0).unwrap();
    let l2 = lambda_star(1, 1.0, m2, 0.75).unwrap();
    Outcome::new(vec![
        ((m1 - 3.2).abs() <= 0.05, format!("case1 E|Y-X| {m1:.4} (SE {se1:.1e})")),
        ((m2 - 1.66).abs() <= 0.03, format!("case2 E|Y-X| {m2:.4} (SE {se2:.1e})")),
        ((l1 - 0.190).abs() <= 0.003, format!("case1 lambda* {l1:.4}")),
        ((l2 - 0.415).abs() <= 0.005, format!("case2 lambda* {l2:.4}")),
    ])
}

fn c9_matching_scaling() -> Outcome {
    let n = 1000;
    let run = |(p, d): (DensityModel, DensityModel), w: f64, stream: u64| {
        let mut per = Vec::new();
        let mut resid = Vec::new();
        for t in 0..10 {
            let inst = sample(&p, &d, n, 109, stream * 100 + t);
            let lm = hungarian(&inst.pickups(), &inst.deliveries()).unwrap().total_cost;
            per.push(lm / n as f64);
            resid.push((lm - n as f64 * w) / (n as f64).powf(2.0 / 3.0));
        }
        (mean_se(&per).0, mean_se(&resid).0)
    };
    let (a1, r1) = run(case1(), 2.0, 1);
    let (a2, _) = run(case2(), 0.75, 2);
    Outcome::new(vec![
        ((1.90..=2.15).contains(&a1), format!("case1 mean L_M/n {a1:.4}")),
        (r1 <= 0.892, format!("case1 mean residual {r1:.4}")),
        ((0.70..=0.85).contains(&a2), format!("case2 mean L_M/n {a2:.4}")),
    ])
}

/// Chi-square p-value of the shadows' cell counts against φ_P cell masses,
/// pooling cells with expected count below 5.
fn shadow_marginal_p(gp: &GridPartition, shadows: &[Point], n: usize) -> f64 {
    let mut counts = vec![0.0; gp.len()];
    for s in shadows {
        counts[gp.locate(s).expect("shadow inside the grid")] += 1.0;
    }
    let (mut obs, mut exp) = (Vec::new(), Vec::new());
    let (mut pool_o, mut pool_e) = (0.0, 0.0);
    for j in 0..gp.len() {
        let e = gp.measures_p[j] * n as f64;
        if e >= 5.0 {
            obs.push(counts[j]);
            exp.push(e);
        } else {
            pool_o += counts[j];
            pool_e += e;
        }
    }
    if pool_e > 0.0 {
        obs.push(pool_o);
        exp.push(pool_e);
    }
    chi_square_p(&obs, &exp)
}

fn displacement_stats(shadows: &[Point], y: &[Point]) -> (f64, f64) {
    let d: Vec<f64> = shadows.iter().zip(y).map(|(s, q)| s.distance(q)).collect();
    mean_se(&d)
}

fn c10_shadow_bounds() -> Outcome {
    let mut checks = Vec::new();
    let setups: [(&str, (DensityModel, DensityModel), usize); 3] = [
        ("square", uniform_cube(2), 8),
        ("case1", case1(), 14),
        ("case2", case2(), 8),
    ];
    for (k, (name, (p, d), r)) in setups.into_iter().enumerate() {
        let env = p.env.union_hull(&d.env);
        let gp = build_grid(&env, r, &p, &d).unwrap();
        let plans: [TransportPlan; 2] = [solve_optimistic(&gp).unwrap(), solve_pessimistic(&gp).unwrap()];
        for plan in &plans {
            // shadow marginal at n = 5000
            let mut rng = RngStream::new(110, 10 * k as u64).rng();
            let y = d.sample_n(5000, &mut rng);
            let sh = sample_shadows(&y, &gp, plan, &p, &mut rng).unwrap();
            let pval = shadow_marginal_p(&gp, &sh.shadows, 5000);
            checks.push((pval > 0.001, format!("{name} {:?} marginal p = {pval:.3}", plan.kind)));
            // shadow displacement over 10^4 draws
            let y = d.sample_n(10_000, &mut rng);
            let sh = sample_shadows(&y, &gp, plan, &p, &mut rng).unwrap();
            let (m, se) = displacement_stats(&sh.shadows, &y);
            let bound = plan.cost_of(PlanKind::Pessimistic, &gp);
            checks.push((m <= bound + 3.0 * se, format!("{name} E|X'-Y| {m:.4} <= {bound:.4}")));
        }
    }
    // matching gap with the automatic resolution and pessimistic plan
    let (p, d) = case1();
    let n = 5000;
    let env = p.env.union_hull(&d.env);
    let r = default_resolution(n, 3);
    let gp = build_grid(&env, r, &p, &d).unwrap();
    let lower = solve_optimistic(&gp).unwrap().objective;
    let plan = solve_pessimistic(&gp).unwrap();
    let mut rng = RngStream::new(110, 99).rng();
    let y = d.sample_n(10_000, &mut rng);
    let sh = sample_shadows(&y, &gp, &plan, &p, &mut rng).unwrap();
    let (m, se) = displacement_stats(&sh.shadows, &y);
    let l = (0..3).map(|a| env.side(a)).fold(0.0, f64::max);
    let slack = 2.0 * l * 3f64.sqrt() / r as f64;
    checks.push((
        m - lower <= slack + 3.0 * se,
        format!("case1 r={r} gap {:.4} <= {slack:.4}", m - lower),
    ));
    Outcome::new(checks)
}

fn c11_dynamics() -> Outcome {
    let mut checks = Vec::new();
    let windows = [(0.15, 0.25), (0.36, 0.48)];
    for (k, (name, pair, w)) in [("case1", case1(), 2.0), ("case2", case2(), 0.75)].into_iter().enumerate() {
        let (lo, hi) = windows[k];
        let nn = |seed: u64| {
            let cfg = DpdpConfig::new(1.0, 1, 1.0, pair.clone(), Policy::NearestNeighbor, 5000.0, RngStream::new(seed, 0))
                .unwrap();
            estimate_lambda_star(&simulate(&cfg).unwrap(), 1.0)
        };
        let single = nn(0);
        let ests: Vec<f64> = (0..5).map(nn).collect();
        let mean = mean_se(&ests).0;
        checks.push(((lo..=hi).contains(&single), format!("{name} NN estimate {single:.4} in [{lo}, {hi}]")));
        checks.push(((lo..=hi).contains(&mean), format!("{name} NN 5-seed mean {mean:.4}")));

        let (myx, _) = mean_pair_distance(&pair.0, &pair.1, 200_000, RngStream::new(111, k as u64)).unwrap();
        let ls = lambda_star(1, 1.0, myx, w).unwrap();
        for factor in [0.5, 2.0] {
            let lam = factor * ls;
            let cfg = DpdpConfig::new(lam, 1, 1.0, pair.clone(), Policy::GatedSplice, 5000.0, RngStream::new(7, 0)).unwrap();
            let tr = simulate(&cfg).unwrap();
            let (_, b) = stability_diagnostic(&tr);
            if factor < 1.0 {
                checks.push((b.abs() < 0.01 * lam, format!("{name} gated at 0.5 lambda* slope {b:.5}")));
            } else {
                let gap = lam - ls;
                checks.push((
                    (0.5 * gap..=1.5 * gap).contains(&b),
                    format!("{name} gated at 2 lambda* slope {b:.4} vs lambda - lambda* = {gap:.4}"),
                ));
            }
        }
    }
    Outcome::new(checks)
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("matching oracle equivalence", c1_matching_oracle),
        ("exact tour oracle equivalence", c2_scp_oracle),
        ("subtours equal matching cycles", c3_subtours_are_cycles),
        ("optimal permutations equiprobable", c4_equiprobable_optima),
        ("cycle count statistics", c5_cycle_statistics),
        ("SPLICE near-optimality", c6_splice_near_optimal),
        ("kappa constants and Wasserstein brackets", c7_table1),
        ("mean pair distance and stability threshold", c8_table2_statistics),
        ("matching cost scaling", c9_matching_scaling),
        ("shadow sampling bounds", c10_shadow_bounds),
        ("queue dynamics and threshold estimates", c11_dynamics),
    ];
    let picked: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    let start = Instant::now();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = k + 1;
        if !picked.is_empty() && !picked.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let out = run();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {id:>2}. {name} ({:.1}s): {}", t.elapsed().as_secs_f64(), out.detail);
        if !out.pass {
            failed.push(id);
        }
    }
    println!("acceptance: {} failed {:?} ({:.1}s)", failed.len(), failed, start.elapsed().as_secs_f64());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
