//! Stacker crane tours: the SPLICE heuristic, an exact branch-and-bound
//! solver for small instances, and the matching lower bound.
//!
//! A tour is a cyclic order of demands; visiting demand `i` means driving
//! `x_i → y_i`, after which the vehicle moves empty to the next pickup.

use serde::Serialize;

use crate::error::{CraneError, Result};
use crate::instance::Instance;
use crate::matching::{hungarian, Matching};
use crate::permutation::Permutation;

/// Largest instance accepted by [`exact_scp`].
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct Tour {
    /// Demand indices (0-based) in visiting order, starting at demand 0.
    pub order: Vec<usize>,
    /// Σ ‖y_i − x_i‖.
    pub pd_length: f64,
    /// Delivery→pickup links kept from the matching.
    pub matching_length: f64,
    /// Delivery→pickup links added to join subtours.
    pub connecting_length: f64,
    pub total_length: f64,
    pub subtour_count: usize,
}

#[derive(Serialize)]
struct TourJson<'a> {
    order: Vec<usize>,
    total_length: f64,
    pd_length: f64,
    matching_length: f64,
    connecting_length: f64,
    subtour_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    algorithm: Option<&'a str>,
}

impl Tour {
    /// JSON with 1-based demand indices.
    pub fn to_json(&self, algorithm: Option<&str>) -> String {
        serde_json::to_string_pretty(&TourJson {
            order: self.order.iter().map(|i| i + 1).collect(),
            total_length: self.total_length,
            pd_length: self.pd_length,
            matching_length: self.matching_length,
            connecting_length: self.connecting_length,
            subtour_count: self.subtour_count,
            algorithm,
        })
        .expect("tour serializes")
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Length of the closed tour `x_{o1} → y_{o1} → x_{o2} → … → y_{on} → x_{o1}`.
pub fn tour_length(order: &[usize], inst: &Instance) -> f64 {
    let n = order.len();
    (0..n)
        .map(|k| {
            let cur = &inst.demands[order[k]];
            let next = &inst.demands[order[(k + 1) % n]];
            cur.length() + cur.delivery.distance(&next.pickup)
        })
        .sum()
}

/// Check that `tour` visits every demand exactly once and that its
/// bookkeeping matches the geometry.
pub fn check_tour(tour: &Tour, inst: &Instance) -> Result<()> {
    let n = inst.len();
    let mut seen = vec![false; n];
    if tour.order.len() != n {
        return Err(CraneError::Numeric(format!(
            "tour visits {} demands, instance has {n}",
            tour.order.len()
        )));
    }
    for &i in &tour.order {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(CraneError::Numeric(format!("demand {i} visited twice or out of range")));
        }
    }
    let sum = tour.pd_length + tour.matching_length + tour.connecting_length;
    let geo = tour_length(&tour.order, inst);
    let scale = geo.abs().max(1.0);
    if (sum - tour.total_length).abs() > 1e-9 * scale || (geo - tour.total_length).abs() > 1e-9 * scale {
        return Err(CraneError::Numeric(format!(
            "tour length mismatch: parts {sum}, total {}, geometric {geo}",
            tour.total_length
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpliceDiagnostics {
    pub subtour_count: usize,
    pub matching: Matching,
    /// Cycles of the matching permutation as delivery index lists.
    pub subtours: Vec<Vec<usize>>,
}

/// Links touched while joining subtours, as `(delivery, pickup)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectingLinks {
    pub removed: Vec<(usize, usize)>,
    pub added: Vec<(usize, usize)>,
    /// `successor[i]`: demand visited after delivering demand `i`.
    pub successor: Vec<usize>,
}

/// Join the subtours of a matching into one tour by nearest-pickup splicing.
///
/// Subtours are taken in the given order (callers pass canonical order:
/// sorted by smallest demand). `base` is the delivery whose matching link
/// enters the smallest pickup of the first subtour, so that subtour keeps
/// its traversal from that pickup. For each following subtour the link
/// leaving `y_prev` is redirected to the closest pickup of that subtour
/// (ties to the smaller index), and the walk resumes at the delivery that
/// used to feed that pickup. A final link closes the tour at `x_σ(base)`.
pub fn connect_subtours(subtours: &[Vec<usize>], matching: &Matching, inst: &Instance) -> ConnectingLinks {
    let sigma = &matching.perm;
    let inv = sigma.inverse();
    let mut successor = sigma.as_slice().to_vec();
    let mut removed = Vec::new();
    let mut added = Vec::new();
    if subtours.len() <= 1 {
        return ConnectingLinks { removed, added, successor };
    }
    let first_min = *subtours[0].iter().min().expect("non-empty subtour");
    let base = inv.apply(first_min);
    let mut prev = base;
    for next_tour in &subtours[1..] {
        removed.push((prev, sigma.apply(prev)));
        let y = &inst.demands[prev].delivery;
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for &j in next_tour {
            let d = y.distance(&inst.demands[j].pickup);
            if d < best_d || (d == best_d && j < best) {
                best = j;
                best_d = d;
            }
        }
        added.push((prev, best));
        successor[prev] = best;
        prev = inv.apply(best);
    }
    removed.push((prev, sigma.apply(prev)));
    added.push((prev, sigma.apply(base)));
    successor[prev] = sigma.apply(base);
    ConnectingLinks { removed, added, successor }
}

fn order_from_successor(successor: &[usize]) -> Vec<usize> {
    let mut order = Vec::with_capacity(successor.len());
    let mut i = 0;
    loop {
        order.push(i);
        i = successor[i];
        if i == 0 || order.len() > successor.len() {
            break;
        }
    }
    order
}

fn link_length(inst: &Instance, links: &[(usize, usize)]) -> f64 {
    links
        .iter()
        .map(|&(i, j)| inst.demands[i].delivery.distance(&inst.demands[j].pickup))
        .sum()
}

/// Run SPLICE: optimal matching, then splice the resulting subtours.
/// A single demand yields the tour `x₁ → y₁ → x₁`.
pub fn splice(inst: &Instance) -> Result<(Tour, SpliceDiagnostics)> {
    let matching = hungarian(&inst.pickups(), &inst.deliveries())?;
    Ok(splice_with_matching(inst, matching))
}

/// SPLICE from a precomputed matching (any optimal matching is valid).
pub fn splice_with_matching(inst: &Instance, matching: Matching) -> (Tour, SpliceDiagnostics) {
    let subtours = matching.perm.decompose().cycles;
    let links = connect_subtours(&subtours, &matching, inst);
    let pd_length = inst.carry_length();
    let matching_length = matching.total_cost - link_length(inst, &links.removed);
    let connecting_length = link_length(inst, &links.added);
    let order = order_from_successor(&links.successor);
    debug_assert_eq!(order.len(), inst.len());
    let tour = Tour {
        order,
        pd_length,
        matching_length,
        connecting_length,
        total_length: pd_length + matching_length + connecting_length,
        subtour_count: subtours.len(),
    };
    let diag = SpliceDiagnostics {
        subtour_count: subtours.len(),
        matching,
        subtours,
    };
    (tour, diag)
}

/// Σ ‖y_i − x_i‖ plus the optimal matching cost; no stacker crane tour is
/// shorter.
pub fn scp_lower_bound(inst: &Instance) -> Result<f64> {
    let m = hungarian(&inst.pickups(), &inst.deliveries())?;
    Ok(inst.carry_length() + m.total_cost)
}

/// Optimal stacker crane tour for n ≤ 12.
///
/// Depth-first branch and bound over cyclic orders starting at demand 0.
/// Children are expanded in increasing demand index; a node is pruned when
/// its partial cost plus, for every delivery still needing an outgoing link,
/// the cheapest admissible link exceeds the incumbent. SPLICE seeds the
/// incumbent bound. Only strictly shorter tours replace the incumbent, so
/// among equal-length optima the lexicographically smallest order wins.
pub fn exact_scp(inst: &Instance) -> Result<Tour> {
    let n = inst.len();
    if n > EXACT_MAX_N {
        return Err(CraneError::Size(format!(
            "exact solver is limited to n ≤ {EXACT_MAX_N} (got {n}); use splice instead"
        )));
    }
    let pd_length = inst.carry_length();
    // link[i * n + j] = ‖x_j − y_i‖
    let link: Vec<f64> = inst
        .demands
        .iter()
        .flat_map(|a| inst.demands.iter().map(move |b| a.delivery.distance(&b.pickup)))
        .collect();

    let (seed_tour, _) = splice(inst)?;
    let seed_links = seed_tour.total_length - pd_length;

    let mut search = Search {
        n,
        link: &link,
        best_cost: seed_links * (1.0 + 1e-12) + 1e-12,
        best_order: None,
        path: vec![0],
        visited: vec![false; n],
    };
    search.visited[0] = true;
    search.dfs(0.0);

    let order = search.best_order.unwrap_or(seed_tour.order);
    let links = (0..n).map(|k| link[order[k] * n + order[(k + 1) % n]]).sum::<f64>();
    Ok(Tour {
        order,
        pd_length,
        matching_length: links,
        connecting_length: 0.0,
        total_length: pd_length + links,
        subtour_count: 1,
    })
}

struct Search<'a> {
    n: usize,
    link: &'a [f64],
    best_cost: f64,
    best_order: Option<Vec<usize>>,
    path: Vec<usize>,
    visited: Vec<bool>,
}

impl Search<'_> {
    fn bound(&self, current: usize) -> f64 {
        let n = self.n;
        // every unvisited demand and the current one still needs an outgoing
        // link to an unvisited demand or back to demand 0
        let mut total = 0.0;
        for i in (0..n).filter(|&i| i == current || !self.visited[i]) {
            let mut m = f64::INFINITY;
            for j in 0..n {
                if j != i && (!self.visited[j] || j == 0) && !(i == current && j == 0 && self.path.len() < n) {
                    m = m.min(self.link[i * n + j]);
                }
            }
            if m.is_finite() {
                total += m;
            }
        }
        total
    }

    fn dfs(&mut self, partial: f64) {
        let n = self.n;
        let current = *self.path.last().unwrap();
        if self.path.len() == n {
            let cost = partial + self.link[current * n];
            if cost < self.best_cost {
                self.best_cost = cost;
                self.best_order = Some(self.path.clone());
            }
            return;
        }
        if partial + self.bound(current) >= self.best_cost {
            return;
        }
        for j in 1..n {
            if self.visited[j] {
                continue;
            }
            let cost = partial + self.link[current * n + j];
            if cost >= self.best_cost {
                continue;
            }
            self.visited[j] = true;
            self.path.push(j);
            self.dfs(cost);
            self.path.pop();
            self.visited[j] = false;
        }
    }
}

/// Tour through the demands in the order given, charged entirely to
/// delivery→pickup links of one cycle.
pub fn tour_from_order(order: Vec<usize>, inst: &Instance) -> Tour {
    let n = order.len();
    let pd_length = inst.carry_length();
    let links: f64 = (0..n)
        .map(|k| inst.demands[order[k]].delivery.distance(&inst.demands[order[(k + 1) % n]].pickup))
        .sum();
    Tour {
        order,
        pd_length,
        matching_length: links,
        connecting_length: 0.0,
        total_length: pd_length + links,
        subtour_count: 1,
    }
}

/// Cyclic permutation σ with σ(order[k]) = order[k + 1].
pub fn order_to_permutation(order: &[usize]) -> Permutation {
    let n = order.len();
    let mut map = vec![0; n];
    for k in 0..n {
        map[order[k]] = order[(k + 1) % n];
    }
    Permutation::new(map).expect("tour order is a permutation")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aabb;
    use crate::instance::Demand;

    fn single() -> Instance {
        Instance::from_demands(vec![Demand::new([0.0, 0.0], [3.0, 4.0])]).unwrap()
    }

    #[test]
    fn single_demand_goes_there_and_back() {
        let inst = single();
        let (tour, diag) = splice(&inst).unwrap();
        assert_eq!(tour.order, vec![0]);
        assert_eq!(tour.total_length, 10.0);
        assert_eq!(tour.connecting_length, 0.0);
        assert_eq!(diag.subtour_count, 1);
        let exact = exact_scp(&inst).unwrap();
        assert_eq!(exact.order, tour.order);
        assert_eq!(exact.total_length, 10.0);
    }

    #[test]
    fn two_demands_forced_cycle() {
        let inst = Instance::from_demands(vec![
            Demand::new([0.0, 0.0], [1.0, 0.0]),
            Demand::new([0.0, 2.0], [1.0, 3.0]),
        ])
        .unwrap();
        let exact = exact_scp(&inst).unwrap();
        let d = &inst.demands;
        let expected = inst.carry_length() + d[1].pickup.distance(&d[0].delivery) + d[0].pickup.distance(&d[1].delivery);
        assert!((exact.total_length - expected).abs() < 1e-12);
        assert_eq!(exact.order, vec![0, 1]);
    }

    #[test]
    fn coincident_singletons_connect_for_free() {
        let demands = (0..4).map(|_| Demand::new([0.0, 0.0], [0.0, 0.0])).collect();
        let inst = Instance::new(Aabb::unit(2), demands).unwrap();
        let m = Matching::from_permutation(Permutation::identity(4), &inst.pickups(), &inst.deliveries()).unwrap();
        let subtours = m.perm.decompose().cycles;
        assert_eq!(subtours.len(), 4);
        let links = connect_subtours(&subtours, &m, &inst);
        assert_eq!(links.added.len(), 4);
        assert_eq!(link_length(&inst, &links.added), 0.0);
        assert_eq!(scp_lower_bound(&inst).unwrap(), 0.0);
    }

    #[test]
    fn exact_rejects_large() {
        let demands = (0..13).map(|i| Demand::new([i as f64, 0.0], [i as f64, 1.0])).collect();
        let inst = Instance::from_demands(demands).unwrap();
        assert!(matches!(exact_scp(&inst), Err(CraneError::Size(_))));
    }

    #[test]
    fn check_tour_catches_bad_bookkeeping() {
        let inst = Instance::from_demands(vec![
            Demand::new([0.0, 0.0], [1.0, 0.0]),
            Demand::new([0.0, 2.0], [1.0, 3.0]),
        ])
        .unwrap();
        let mut t = tour_from_order(vec![0, 1], &inst);
        assert!(check_tour(&t, &inst).is_ok());
        t.total_length += 1.0;
        assert!(check_tour(&t, &inst).is_err());
        let dup = Tour { order: vec![0, 0], ..tour_from_order(vec![0, 1], &inst) };
        assert!(check_tour(&dup, &inst).is_err());
    }

    #[test]
    fn order_permutation_is_single_cycle() {
        let p = order_to_permutation(&[0, 3, 1, 2]);
        assert_eq!(p.cycle_count(), 1);
        assert_eq!(order_from_successor(p.as_slice()), vec![0, 3, 1, 2]);
    }
}
