//! Exact Euclidean bipartite matching.
//!
//! A matching pairs delivery `y_i` with pickup `x_{σ(i)}`; its cost is
//! `Σ_i ‖x_{σ(i)} − y_i‖`.

use serde::Serialize;

use crate::error::{CraneError, Result};
use crate::geometry::Point;
use crate::permutation::Permutation;

/// Largest size accepted by [`brute_force_matching`].
pub const BRUTE_FORCE_MAX_N: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matching {
    /// `perm.apply(i)` is the pickup matched to delivery `i`.
    pub perm: Permutation,
    pub total_cost: f64,
    pub avg_cost: f64,
}

impl Matching {
    fn new(perm: Permutation, total_cost: f64) -> Self {
        let n = perm.len();
        Self {
            perm,
            total_cost,
            avg_cost: total_cost / n as f64,
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Build from an arbitrary permutation, computing its cost.
    pub fn from_permutation(perm: Permutation, pickups: &[Point], deliveries: &[Point]) -> Result<Self> {
        let cost = match_cost(&perm, pickups, deliveries)?;
        Ok(Self::new(perm, cost))
    }
}

fn check_sizes(pickups: &[Point], deliveries: &[Point]) -> Result<usize> {
    if pickups.len() != deliveries.len() {
        return Err(CraneError::Argument(format!(
            "point sets differ in size: {} pickups, {} deliveries",
            pickups.len(),
            deliveries.len()
        )));
    }
    if pickups.is_empty() {
        return Err(CraneError::Argument("matching needs n ≥ 1".into()));
    }
    let d = pickups[0].dim();
    if pickups.iter().chain(deliveries).any(|p| p.dim() != d) {
        return Err(CraneError::Argument("points have mixed dimensions".into()));
    }
    Ok(pickups.len())
}

/// Σ_i ‖x_{σ(i)} − y_i‖.
pub fn match_cost(perm: &Permutation, pickups: &[Point], deliveries: &[Point]) -> Result<f64> {
    let n = check_sizes(pickups, deliveries)?;
    if perm.len() != n {
        return Err(CraneError::Argument(format!(
            "permutation has size {}, point sets have {n}",
            perm.len()
        )));
    }
    Ok((0..n)
        .map(|i| pickups[perm.apply(i)].distance(&deliveries[i]))
        .sum())
}

/// Row-major `n × n` matrix with `cost[i * n + j] = ‖x_j − y_i‖`.
fn distance_matrix(pickups: &[Point], deliveries: &[Point]) -> Vec<f64> {
    let n = pickups.len();
    let mut cost = Vec::with_capacity(n * n);
    for y in deliveries {
        for x in pickups {
            cost.push(x.distance(y));
        }
    }
    cost
}

/// Minimum-cost perfect matching by the Hungarian method with row potentials
/// (shortest augmenting paths), O(n³).
///
/// Rows (deliveries) are inserted in increasing index order. While growing
/// an augmenting tree the next column is the unvisited one with the smallest
/// reduced slack, ties going to the smallest column index; the search stops
/// at the first free column reached. The result is therefore a deterministic
/// function of the input.
pub fn hungarian(pickups: &[Point], deliveries: &[Point]) -> Result<Matching> {
    let n = check_sizes(pickups, deliveries)?;
    let cost = distance_matrix(pickups, deliveries);
    let assignment = solve_assignment(&cost, n);
    let perm = Permutation::new(assignment).expect("assignment is a bijection");
    let total = (0..n).map(|i| cost[i * n + perm.apply(i)]).sum();
    Ok(Matching::new(perm, total))
}

/// Assignment on a dense row-major cost matrix; returns `col[row]`.
pub(crate) fn solve_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    debug_assert_eq!(cost.len(), n * n);
    // 1-based bookkeeping with a virtual column 0
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![f64::INFINITY; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let ui0 = u[i0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - ui0 - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of = vec![0usize; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
    }
    col_of
}

/// Exhaustive search over all n! permutations (n ≤ 9). Permutations are
/// visited in lexicographic order and only a strictly cheaper one replaces
/// the incumbent, so ties resolve to the lexicographically smallest σ.
pub fn brute_force_matching(pickups: &[Point], deliveries: &[Point]) -> Result<Matching> {
    let n = check_sizes(pickups, deliveries)?;
    if n > BRUTE_FORCE_MAX_N {
        return Err(CraneError::Size(format!(
            "brute-force matching refuses n = {n} (limit {BRUTE_FORCE_MAX_N})"
        )));
    }
    let cost = distance_matrix(pickups, deliveries);
    let mut best: Option<(f64, Permutation)> = None;
    for p in Permutation::all(n) {
        let c: f64 = (0..n).map(|i| cost[i * n + p.apply(i)]).sum();
        if best.as_ref().is_none_or(|(b, _)| c < *b) {
            best = Some((c, p));
        }
    }
    let (c, p) = best.expect("n ≥ 1 has at least one permutation");
    Ok(Matching::new(p, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand::Rng;

    fn pts(v: &[f64]) -> Vec<Point> {
        v.iter().map(|&x| Point::new(vec![x, 0.0])).collect()
    }

    #[test]
    fn single_pair() {
        let x = vec![Point::new(vec![0.0, 0.0])];
        let y = vec![Point::new(vec![3.0, 4.0])];
        let m = hungarian(&x, &y).unwrap();
        assert!(m.perm.is_identity());
        assert_eq!(m.total_cost, 5.0);
        assert_eq!(brute_force_matching(&x, &y).unwrap().total_cost, 5.0);
    }

    #[test]
    fn uncrossed_on_a_line() {
        let m = hungarian(&pts(&[0.0, 1.0]), &pts(&[0.1, 0.9])).unwrap();
        assert!(m.perm.is_identity());
        assert!((m.total_cost - 0.2).abs() < 1e-12);
        let crossed = Permutation::from_one_based(&[2, 1]).unwrap();
        let c = match_cost(&crossed, &pts(&[0.0, 1.0]), &pts(&[0.1, 0.9])).unwrap();
        assert!((c - 1.8).abs() < 1e-12);
    }

    #[test]
    fn coincident_sets_cost_zero() {
        let x = pts(&[0.3, 0.7]);
        assert_eq!(brute_force_matching(&x, &x).unwrap().total_cost, 0.0);
        assert_eq!(hungarian(&x, &x).unwrap().total_cost, 0.0);
    }

    #[test]
    fn size_errors() {
        assert!(matches!(hungarian(&pts(&[0.0]), &pts(&[0.0, 1.0])), Err(CraneError::Argument(_))));
        let ten = pts(&[0.0; 10]);
        assert!(matches!(brute_force_matching(&ten, &ten), Err(CraneError::Size(_))));
    }

    #[test]
    fn n3_enumeration_certificate() {
        let mut rng = RngStream::new(3, 3).rng();
        let rand_pts = |rng: &mut crate::rng::StreamRng| -> Vec<Point> {
            (0..3).map(|_| Point::new(vec![rng.random(), rng.random()])).collect()
        };
        let x = rand_pts(&mut rng);
        let y = rand_pts(&mut rng);
        let best = brute_force_matching(&x, &y).unwrap();
        let all: Vec<f64> = Permutation::all(3).map(|p| match_cost(&p, &x, &y).unwrap()).collect();
        assert!(all.iter().all(|&c| best.total_cost <= c));
        assert!(all.contains(&best.total_cost));
    }

    #[test]
    fn translation_invariance() {
        let mut rng = RngStream::new(9, 0).rng();
        let x: Vec<Point> = (0..6).map(|_| Point::new(vec![rng.random(), rng.random(), rng.random()])).collect();
        let y: Vec<Point> = (0..6).map(|_| Point::new(vec![rng.random(), rng.random(), rng.random()])).collect();
        let p = Permutation::random(6, &mut rng);
        let off = [10.0, -3.0, 0.5];
        let xs: Vec<Point> = x.iter().map(|q| q.translated(&off)).collect();
        let ys: Vec<Point> = y.iter().map(|q| q.translated(&off)).collect();
        let a = match_cost(&p, &x, &y).unwrap();
        let b = match_cost(&p, &xs, &ys).unwrap();
        assert!((a - b).abs() < 1e-12 * a.max(1.0));
    }
}
