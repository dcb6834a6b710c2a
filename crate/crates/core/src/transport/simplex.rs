//! Transportation simplex (MODI / u-v method).
//!
//! Initial basis by Vogel's approximation, then pivots on the spanning tree
//! of basic cells. Supplies are perturbed by ε (and the last demand by m·ε)
//! so every basis met is nondegenerate; the final flows are recomputed on
//! the optimal basis from the unperturbed marginals. Entering cells come
//! from partial Dantzig pricing over cyclic row blocks; after a run of
//! zero-step pivots the solver falls back to Bland's rule (first eligible
//! cell, smallest-index leaving cell) until a pivot makes progress.

use crate::error::{CraneError, Result};

const PERTURBATION: f64 = 1e-12;
const DEGENERATE_STREAK: usize = 20;

#[derive(Debug, Clone)]
pub struct TransportSolution {
    /// Basic cells `(row, col, flow)` of the optimal basis (m + n − 1 of them).
    pub basis: Vec<(usize, usize, f64)>,
    pub objective: f64,
    pub dual_objective: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub iterations: usize,
}

#[derive(Clone, Copy)]
struct Edge {
    row: usize,
    col: usize,
    flow: f64,
}

/// Solve `min Σ c_ij f_ij` s.t. row sums = `supply`, column sums = `demand`,
/// `f ≥ 0`. `cost` is row-major `supply.len() × demand.len()`.
pub fn solve_transportation(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportSolution> {
    let m = supply.len();
    let n = demand.len();
    if m == 0 || n == 0 {
        return Err(CraneError::Numeric("transportation problem with no rows or columns".into()));
    }
    if cost.len() != m * n {
        return Err(CraneError::Argument("cost matrix has the wrong size".into()));
    }
    if supply.iter().chain(demand).any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(CraneError::Numeric("marginals must be finite and nonnegative".into()));
    }
    let sa: f64 = supply.iter().sum();
    let sb: f64 = demand.iter().sum();
    if (sa - sb).abs() > 1e-6 {
        return Err(CraneError::Numeric(format!(
            "infeasible marginals: supplies sum to {sa}, demands to {sb}"
        )));
    }
    // balance exactly on the demand side
    let mut demand_bal = demand.to_vec();
    let scale = if sb > 0.0 { sa / sb } else { 1.0 };
    demand_bal.iter_mut().for_each(|b| *b *= scale);

    let mut a: Vec<f64> = supply.iter().map(|x| x + PERTURBATION).collect();
    let mut b = demand_bal.clone();
    b[n - 1] += m as f64 * PERTURBATION;

    let mut edges = vogel(&a, &b, cost, m, n);
    let mut tree = Tree::new(m, n, &edges);
    let max_cost = cost.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
    let tol = 1e-11 * max_cost.max(1.0);
    let block = (m / 256).max(16).min(m);
    let max_iter = 200 * (m + n) + 10_000;

    let mut cursor = 0usize;
    let mut degenerate = 0usize;
    let mut iterations = 0usize;
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    loop {
        tree.potentials(&edges, cost, n, &mut u, &mut v);
        let bland = degenerate >= DEGENERATE_STREAK;
        let entering = if bland {
            first_negative(cost, &u, &v, m, n, tol)
        } else {
            partial_pricing(cost, &u, &v, m, n, tol, block, &mut cursor)
        };
        let Some((ei, ej)) = entering else { break };
        iterations += 1;
        if iterations > max_iter {
            return Err(CraneError::Numeric(format!(
                "transportation simplex did not converge in {max_iter} pivots"
            )));
        }
        let cycle = tree.cycle(ei, ej, &edges);
        // odd positions lose flow
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (k, &e) in cycle.iter().enumerate() {
            if k % 2 == 0 {
                let f = edges[e].flow;
                let better = f < theta
                    || (f == theta && (edges[e].row, edges[e].col) < (edges[leave].row, edges[leave].col));
                if better {
                    theta = f;
                    leave = e;
                }
            }
        }
        for (k, &e) in cycle.iter().enumerate() {
            if k % 2 == 0 {
                edges[e].flow -= theta;
            } else {
                edges[e].flow += theta;
            }
        }
        if theta <= 1e-3 * PERTURBATION {
            degenerate += 1;
        } else {
            degenerate = 0;
        }
        tree.replace(leave, ei, ej, &mut edges, theta);
        if iterations % 256 == 0 {
            tree.recompute_flows(&mut edges, &a, &b);
        }
    }

    // flows on the optimal basis from the true marginals
    a.copy_from_slice(supply);
    b.copy_from_slice(&demand_bal);
    tree.recompute_flows(&mut edges, &a, &b);
    for e in edges.iter_mut() {
        if e.flow < 0.0 {
            if e.flow < -1e-9 {
                log::warn!("basic flow {} clamped to zero", e.flow);
            }
            e.flow = 0.0;
        }
    }
    let objective = edges.iter().map(|e| e.flow * cost[e.row * n + e.col]).sum();
    let dual_objective = a.iter().zip(&u).map(|(x, y)| x * y).sum::<f64>()
        + b.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
    Ok(TransportSolution {
        basis: edges.iter().map(|e| (e.row, e.col, e.flow)).collect(),
        objective,
        dual_objective,
        u,
        v,
        iterations,
    })
}

fn partial_pricing(
    cost: &[f64],
    u: &[f64],
    v: &[f64],
    m: usize,
    n: usize,
    tol: f64,
    block: usize,
    cursor: &mut usize,
) -> Option<(usize, usize)> {
    let mut best = -tol;
    let mut found = None;
    for scanned in 0..m {
        let i = (*cursor + scanned) % m;
        let row = &cost[i * n..(i + 1) * n];
        let ui = u[i];
        for j in 0..n {
            let d = row[j] - ui - v[j];
            if d < best {
                best = d;
                found = Some((i, j));
            }
        }
        if found.is_some() && scanned + 1 >= block {
            *cursor = (i + 1) % m;
            return found;
        }
    }
    found
}

fn first_negative(cost: &[f64], u: &[f64], v: &[f64], m: usize, n: usize, tol: f64) -> Option<(usize, usize)> {
    for i in 0..m {
        for j in 0..n {
            if cost[i * n + j] - u[i] - v[j] < -tol {
                return Some((i, j));
            }
        }
    }
    None
}

/// Vogel's approximation: m + n − 1 basic cells forming a spanning tree.
fn vogel(a: &[f64], b: &[f64], cost: &[f64], m: usize, n: usize) -> Vec<Edge> {
    let mut s = a.to_vec();
    let mut d = b.to_vec();
    // line indices sorted by (cost, index)
    let sorted = |len: usize, key: &dyn Fn(usize) -> f64| -> Vec<u32> {
        let mut keyed: Vec<(f64, u32)> = (0..len).map(|k| (key(k), k as u32)).collect();
        keyed.sort_unstable_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
        keyed.into_iter().map(|(_, k)| k).collect()
    };
    let row_order: Vec<Vec<u32>> = (0..m).map(|i| sorted(n, &|j| cost[i * n + j])).collect();
    let col_order: Vec<Vec<u32>> = (0..n).map(|j| sorted(m, &|i| cost[i * n + j])).collect();
    let mut row_alive = vec![true; m];
    let mut col_alive = vec![true; n];
    let mut row_ptr = vec![(0usize, 1usize); m];
    let mut col_ptr = vec![(0usize, 1usize); n];
    let mut rows_left = m;
    let mut cols_left = n;
    let mut edges = Vec::with_capacity(m + n - 1);

    // first two live entries of a sorted line, advancing lazy pointers
    fn front_two(order: &[u32], alive: &[bool], ptr: &mut (usize, usize)) -> (Option<u32>, Option<u32>) {
        while ptr.0 < order.len() && !alive[order[ptr.0] as usize] {
            ptr.0 += 1;
        }
        if ptr.1 <= ptr.0 {
            ptr.1 = ptr.0 + 1;
        }
        while ptr.1 < order.len() && !alive[order[ptr.1] as usize] {
            ptr.1 += 1;
        }
        (order.get(ptr.0).copied(), order.get(ptr.1).copied())
    }

    let line_penalty = |f: Option<u32>, g: Option<u32>, at: &dyn Fn(u32) -> f64| {
        let c1 = at(f.expect("live line has a live partner"));
        g.map_or(c1, |g| at(g) - c1)
    };
    let mut row_pen: Vec<f64> = (0..m)
        .map(|i| {
            let (f, g) = front_two(&row_order[i], &col_alive, &mut row_ptr[i]);
            line_penalty(f, g, &|j| cost[i * n + j as usize])
        })
        .collect();
    let mut col_pen: Vec<f64> = (0..n)
        .map(|j| {
            let (f, g) = front_two(&col_order[j], &row_alive, &mut col_ptr[j]);
            line_penalty(f, g, &|i| cost[i as usize * n + j])
        })
        .collect();

    while rows_left + cols_left > 1 {
        // (penalty, is_row, line)
        let mut pick: Option<(f64, bool, usize)> = None;
        for i in (0..m).filter(|&i| row_alive[i]) {
            if pick.is_none_or(|(p, _, _)| row_pen[i] > p) {
                pick = Some((row_pen[i], true, i));
            }
        }
        for j in (0..n).filter(|&j| col_alive[j]) {
            if pick.is_none_or(|(p, _, _)| col_pen[j] > p) {
                pick = Some((col_pen[j], false, j));
            }
        }
        let (_, is_row, line) = pick.expect("some line is alive");
        let (i, j) = if is_row {
            (line, row_order[line][row_ptr[line].0] as usize)
        } else {
            (col_order[line][col_ptr[line].0] as usize, line)
        };
        let x = s[i].min(d[j]);
        let row_exhausted = s[i] <= d[j];
        s[i] -= x;
        d[j] -= x;
        edges.push(Edge { row: i, col: j, flow: x });
        let cross_row = if rows_left == 1 {
            false
        } else if cols_left == 1 {
            true
        } else {
            row_exhausted
        };
        if cross_row {
            row_alive[i] = false;
            rows_left -= 1;
            // refresh columns whose two cheapest live rows included i
            for c in (0..n).filter(|&c| rows_left > 0 && col_alive[c]) {
                let (p0, p1) = col_ptr[c];
                let order = &col_order[c];
                if order.get(p0) == Some(&(i as u32)) || order.get(p1) == Some(&(i as u32)) {
                    let (f, g) = front_two(order, &row_alive, &mut col_ptr[c]);
                    col_pen[c] = line_penalty(f, g, &|r| cost[r as usize * n + c]);
                }
            }
        } else {
            col_alive[j] = false;
            cols_left -= 1;
            for r in (0..m).filter(|&r| cols_left > 0 && row_alive[r]) {
                let (p0, p1) = row_ptr[r];
                let order = &row_order[r];
                if order.get(p0) == Some(&(j as u32)) || order.get(p1) == Some(&(j as u32)) {
                    let (f, g) = front_two(order, &col_alive, &mut row_ptr[r]);
                    row_pen[r] = line_penalty(f, g, &|c| cost[r * n + c as usize]);
                }
            }
        }
    }
    edges
}

/// Spanning tree over row nodes `0..m` and column nodes `m..m+n`.
struct Tree {
    m: usize,
    adj: Vec<Vec<usize>>,
    parent_edge: Vec<usize>,
    parent: Vec<usize>,
    depth: Vec<usize>,
    order: Vec<usize>,
}

impl Tree {
    fn new(m: usize, n: usize, edges: &[Edge]) -> Self {
        let mut adj = vec![Vec::new(); m + n];
        for (k, e) in edges.iter().enumerate() {
            adj[e.row].push(k);
            adj[m + e.col].push(k);
        }
        Self {
            m,
            adj,
            parent_edge: vec![usize::MAX; m + n],
            parent: vec![usize::MAX; m + n],
            depth: vec![0; m + n],
            order: Vec::with_capacity(m + n),
        }
    }

    fn other(&self, e: &Edge, node: usize) -> usize {
        if node < self.m {
            self.m + e.col
        } else {
            e.row
        }
    }

    /// BFS from row 0 and fill potentials with u_0 = 0.
    fn potentials(&mut self, edges: &[Edge], cost: &[f64], n: usize, u: &mut [f64], v: &mut [f64]) {
        let m = self.m;
        self.parent_edge.iter_mut().for_each(|p| *p = usize::MAX);
        self.order.clear();
        self.order.push(0);
        self.parent[0] = usize::MAX;
        self.depth[0] = 0;
        u[0] = 0.0;
        let mut head = 0;
        while head < self.order.len() {
            let node = self.order[head];
            head += 1;
            for &k in &self.adj[node] {
                if k == self.parent_edge[node] {
                    continue;
                }
                let e = &edges[k];
                let next = self.other(e, node);
                self.parent_edge[next] = k;
                self.parent[next] = node;
                self.depth[next] = self.depth[node] + 1;
                let c = cost[e.row * n + e.col];
                if next >= m {
                    v[e.col] = c - u[e.row];
                } else {
                    u[e.row] = c - v[e.col];
                }
                self.order.push(next);
            }
        }
        debug_assert_eq!(self.order.len(), self.adj.len(), "basis is not spanning");
    }

    /// Edges of the tree path from column `col` to row `row`, in order.
    /// Together with the entering cell they form the pivot cycle.
    fn cycle(&self, row: usize, col: usize, _edges: &[Edge]) -> Vec<usize> {
        let mut a = self.m + col;
        let mut b = row;
        let mut from_col = Vec::new();
        let mut from_row = Vec::new();
        while self.depth[a] > self.depth[b] {
            from_col.push(self.parent_edge[a]);
            a = self.parent[a];
        }
        while self.depth[b] > self.depth[a] {
            from_row.push(self.parent_edge[b]);
            b = self.parent[b];
        }
        while a != b {
            from_col.push(self.parent_edge[a]);
            a = self.parent[a];
            from_row.push(self.parent_edge[b]);
            b = self.parent[b];
        }
        from_row.reverse();
        from_col.extend(from_row);
        from_col
    }

    fn replace(&mut self, leave: usize, row: usize, col: usize, edges: &mut [Edge], flow: f64) {
        let old = edges[leave];
        let m = self.m;
        self.adj[old.row].retain(|&k| k != leave);
        self.adj[m + old.col].retain(|&k| k != leave);
        edges[leave] = Edge { row, col, flow };
        self.adj[row].push(leave);
        self.adj[m + col].push(leave);
    }

    /// Solve the basic flows from the marginals by peeling leaves.
    fn recompute_flows(&self, edges: &mut [Edge], a: &[f64], b: &[f64]) {
        let m = self.m;
        let nodes = self.adj.len();
        let mut rest: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
        let mut degree: Vec<usize> = self.adj.iter().map(Vec::len).collect();
        let mut done = vec![false; edges.len()];
        let mut stack: Vec<usize> = (0..nodes).filter(|&k| degree[k] == 1).collect();
        while let Some(node) = stack.pop() {
            if degree[node] != 1 {
                continue;
            }
            let Some(&k) = self.adj[node].iter().find(|&&k| !done[k]) else { continue };
            done[k] = true;
            let f = rest[node];
            edges[k].flow = f;
            let other = if node < m { m + edges[k].col } else { edges[k].row };
            rest[node] = 0.0;
            rest[other] -= f;
            degree[node] = 0;
            degree[other] -= 1;
            if degree[other] == 1 {
                stack.push(other);
            }
        }
    }
}
