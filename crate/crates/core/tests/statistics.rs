use crane_core::distributions::{case1, case2, mean_pair_distance, uniform_cube};
use crane_core::matching::hungarian;
use crane_core::randmatch::randomized_ebmp_auto;
use crane_core::{instance_from_samples, RngStream};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Kolmogorov–Smirnov distance of a sample against the uniform law on [0, 1].
fn ks_uniform(mut u: Vec<f64>) -> f64 {
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).max((i + 1) as f64 / n - x))
        .fold(0.0, f64::max)
}

#[test]
fn ball_radii_follow_cube_law() {
    let (p, d) = case2();
    let mut rng = RngStream::new(31, 0).rng();
    let n = 20_000;
    for (model, radius) in [(&p, 2.0), (&d, 1.0)] {
        let u: Vec<f64> = model
            .sample_n(n, &mut rng)
            .iter()
            .map(|q| (q.coords.iter().map(|c| c * c).sum::<f64>().sqrt() / radius).powi(3))
            .collect();
        let ks = ks_uniform(u);
        // 1% critical value
        assert!(ks < 1.63 / (n as f64).sqrt(), "{ks}");
    }
}

#[test]
fn case1_region_masses_and_uniform_coordinates() {
    let (p, _) = case1();
    let mut rng = RngStream::new(32, 0).rng();
    let n = 20_000;
    let pts = p.sample_n(n, &mut rng);
    let left = pts.iter().filter(|q| q.coords[0] < -3.0).count() as f64;
    let stat = (left - n as f64 / 2.0).powi(2) / (n as f64 / 2.0) * 2.0;
    assert!(1.0 - ChiSquared::new(1.0).unwrap().cdf(stat) > 0.001);
    // y coordinate uniform on [−0.5, 0.5]
    let ks = ks_uniform(pts.iter().map(|q| q.coords[1] + 0.5).collect());
    assert!(ks < 1.63 / (n as f64).sqrt(), "{ks}");
}

#[test]
fn unit_square_mean_distance() {
    let (p, d) = uniform_cube(2);
    let (m, se) = mean_pair_distance(&p, &d, 400_000, RngStream::new(33, 0)).unwrap();
    let exact = (2.0 + 2f64.sqrt() + 5.0 * (1.0 + 2f64.sqrt()).ln()) / 15.0;
    assert!((m - exact).abs() < 4.0 * se, "{m} vs {exact}");
}

#[test]
fn randomized_matching_case1_per_match_cost() {
    let (p, d) = case1();
    let n = 500;
    let mut total = 0.0;
    for t in 0..10 {
        let inst = instance_from_samples(&p, &d, n, RngStream::new(34, t)).unwrap();
        let out = randomized_ebmp_auto(&inst.pickups(), &inst.deliveries(), &p, &d, RngStream::new(35, t)).unwrap();
        let opt = hungarian(&inst.pickups(), &inst.deliveries()).unwrap();
        assert!(out.matching.total_cost >= opt.total_cost - 1e-9);
        total += out.matching.avg_cost;
    }
    let mean = total / 10.0;
    assert!((2.0..=2.5).contains(&mean), "{mean}");
}

#[test]
fn randomized_matching_equal_densities_is_short() {
    let (p, d) = uniform_cube(3);
    let inst = instance_from_samples(&p, &d, 1000, RngStream::new(36, 0)).unwrap();
    let out = randomized_ebmp_auto(&inst.pickups(), &inst.deliveries(), &p, &d, RngStream::new(36, 1)).unwrap();
    assert!(out.r <= 16);
    assert!(out.matching.avg_cost <= 0.15, "{}", out.matching.avg_cost);
}
