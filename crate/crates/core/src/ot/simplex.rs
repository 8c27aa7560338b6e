//! Primal network simplex for the dense transportation problem.
//!
//! Sources `0..n` supply the first marginal, sinks `n..n+m` absorb the
//! second and an artificial root closes the initial spanning tree. Arcs
//! `i·m + j` are the real transport arcs; arc `n·m + u` is the artificial
//! arc of node `u`. Costs are `−⟨x_i, y_j⟩` shifted to be nonnegative.
//! Leaving arcs follow the strongly-feasible-tree rule, which rules out
//! cycling on the (highly degenerate) transportation polytope.

use super::{Coupling, DualPotentials, OtMethodTag, SolverDiagnostics, TransportResult};
use crate::error::{Error, Result};
use crate::measures::{dot, DiscreteMeasure};

pub const DEFAULT_LP_CAP: usize = 1_000_000;

pub fn mcov_lp(p: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<TransportResult> {
    mcov_lp_with_cap(p, q, DEFAULT_LP_CAP)
}

pub fn mcov_lp_with_cap(p: &DiscreteMeasure, q: &DiscreteMeasure, cap: usize) -> Result<TransportResult> {
    p.check_dim(q.dim())?;
    let (n, m) = (p.len(), q.len());
    if n * m > cap {
        return Err(Error::SizeCapExceeded { size: n * m, cap });
    }
    let mut cost = Vec::with_capacity(n * m);
    for (x, _) in p.atoms() {
        for (y, _) in q.atoms() {
            cost.push(-dot(x, y));
        }
    }
    let sol = solve_transport(p.weights(), q.weights(), &cost)?;
    let entries: Vec<(usize, usize, f64)> = sol
        .flows
        .iter()
        .map(|&(e, v)| (e / m, e % m, v))
        .collect();
    let coupling = Coupling::new(n, m, entries);
    let value = coupling.covariance(p, q);
    // potentials of the shifted minimization problem → MCov convention
    let f: Vec<f64> = sol.pi[..n].to_vec();
    let g: Vec<f64> = sol.pi[n..n + m].iter().map(|v| -v - sol.shift).collect();
    let potentials = DualPotentials::normalized(f, g);
    let gap = (potentials.dual_value(p.weights(), q.weights()) - value).abs();
    let marginal_violation = coupling.marginal_violation(p.weights(), q.weights());
    Ok(TransportResult {
        value,
        coupling,
        potentials,
        method: OtMethodTag::Lp,
        epsilon: None,
        diagnostics: SolverDiagnostics { iterations: sol.pivots, marginal_violation, duality_gap: gap },
    })
}

pub(crate) struct TransportSolution {
    /// `(arc, flow)` for arcs carrying positive flow.
    pub flows: Vec<(usize, f64)>,
    /// Node potentials with `c_ij + π_i − π_{n+j} ≥ 0` on every real arc.
    pub pi: Vec<f64>,
    /// Constant subtracted from the raw costs.
    pub shift: f64,
    pub pivots: usize,
}

struct Tree {
    n: usize,
    m: usize,
    cost: Vec<f64>,
    art_cost: f64,
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    /// `true` when `pred[u]` is oriented u → parent.
    up: Vec<bool>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    children: Vec<Vec<usize>>,
}

impl Tree {
    fn root(&self) -> usize {
        self.n + self.m
    }

    fn ends(&self, e: usize) -> (usize, usize) {
        let nm = self.n * self.m;
        if e < nm {
            (e / self.m, self.n + e % self.m)
        } else {
            let u = e - nm;
            if u < self.n {
                (u, self.root())
            } else {
                (self.root(), u)
            }
        }
    }

    fn arc_cost(&self, e: usize) -> f64 {
        let nm = self.n * self.m;
        if e < nm {
            self.cost[e]
        } else if e - nm < self.n {
            0.0
        } else {
            self.art_cost
        }
    }

    fn reduced_cost(&self, e: usize) -> f64 {
        let (s, t) = self.ends(e);
        self.arc_cost(e) + self.pi[s] - self.pi[t]
    }

    fn detach(&mut self, child: usize, parent: usize) {
        let list = &mut self.children[parent];
        if let Some(pos) = list.iter().position(|&c| c == child) {
            list.swap_remove(pos);
        }
    }

    /// Recomputes depth and potentials below `top`, whose parent is set.
    fn refresh_subtree(&mut self, top: usize) {
        let mut stack = vec![top];
        while let Some(u) = stack.pop() {
            let par = self.parent[u];
            let e = self.pred[u];
            let c = self.arc_cost(e);
            self.depth[u] = self.depth[par] + 1;
            self.pi[u] = if self.up[u] { self.pi[par] - c } else { self.pi[par] + c };
            stack.extend_from_slice(&self.children[u]);
        }
    }
}

pub(crate) fn solve_transport(a: &[f64], b: &[f64], raw_cost: &[f64]) -> Result<TransportSolution> {
    let (n, m) = (a.len(), b.len());
    debug_assert_eq!(raw_cost.len(), n * m);
    let shift = raw_cost.iter().copied().fold(f64::INFINITY, f64::min);
    let cost: Vec<f64> = raw_cost.iter().map(|c| c - shift).collect();
    let max_cost = cost.iter().copied().fold(0.0, f64::max);
    let nodes = n + m + 1;
    let art_cost = (max_cost + 1.0) * nodes as f64;
    let nm = n * m;
    let root = n + m;

    let mut t = Tree {
        n,
        m,
        cost,
        art_cost,
        flow: vec![0.0; nm + n + m],
        in_tree: vec![false; nm + n + m],
        parent: vec![root; nodes],
        pred: vec![usize::MAX; nodes],
        up: vec![false; nodes],
        depth: vec![0; nodes],
        pi: vec![0.0; nodes],
        children: vec![Vec::new(); nodes],
    };
    t.children[root] = (0..n + m).collect();
    for u in 0..n + m {
        let e = nm + u;
        t.pred[u] = e;
        t.in_tree[e] = true;
        t.depth[u] = 1;
        if u < n {
            t.up[u] = true;
            t.flow[e] = a[u];
            t.pi[u] = 0.0;
        } else {
            t.up[u] = false;
            t.flow[e] = b[u - n];
            t.pi[u] = art_cost;
        }
    }

    let eps = 1e-12 * (1.0 + max_cost);
    let block = ((nm as f64).sqrt() as usize).max(10).min(nm.max(1));
    let max_pivots = 50 * nodes * nodes.max(64) + 10_000;
    let mut next = 0usize;
    let mut pivots = 0usize;

    loop {
        // block search pricing
        let mut best = usize::MAX;
        let mut best_rc = -eps;
        let mut scanned = 0usize;
        let mut in_block = 0usize;
        while scanned < nm {
            let e = next;
            next += 1;
            if next == nm {
                next = 0;
            }
            scanned += 1;
            in_block += 1;
            if !t.in_tree[e] {
                let rc = t.reduced_cost(e);
                if rc < best_rc {
                    best_rc = rc;
                    best = e;
                }
            }
            if in_block >= block {
                if best != usize::MAX {
                    break;
                }
                in_block = 0;
            }
        }
        if best == usize::MAX {
            break;
        }
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::NoConvergence(pivots));
        }
        pivot(&mut t, best)?;
    }

    let art_flow: f64 = (nm..nm + n + m).map(|e| t.flow[e]).sum();
    if art_flow > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "transport problem left {art_flow:e} mass on artificial arcs"
        )));
    }
    let mut flows: Vec<(usize, f64)> = (0..n + m)
        .map(|u| t.pred[u])
        .filter(|&e| e < nm && t.flow[e] > 0.0)
        .map(|e| (e, t.flow[e]))
        .collect();
    flows.sort_unstable_by_key(|&(e, _)| e);
    let pi = t.pi[..n + m].to_vec();
    Ok(TransportSolution { flows, pi, shift, pivots })
}

fn pivot(t: &mut Tree, in_arc: usize) -> Result<()> {
    let (first, second) = t.ends(in_arc);

    // join node of the cycle
    let (mut u, mut v) = (first, second);
    while u != v {
        if t.depth[u] >= t.depth[v] {
            u = t.parent[u];
        } else {
            v = t.parent[v];
        }
    }
    let join = u;

    // flow travels join → first → (in_arc) → second → join
    let mut delta = f64::INFINITY;
    let mut u_out = usize::MAX;
    let mut on_first = true;
    let mut u = first;
    while u != join {
        if t.up[u] {
            let d = t.flow[t.pred[u]];
            if d < delta {
                delta = d;
                u_out = u;
                on_first = true;
            }
        }
        u = t.parent[u];
    }
    let mut u = second;
    while u != join {
        if !t.up[u] {
            let d = t.flow[t.pred[u]];
            if d <= delta {
                delta = d;
                u_out = u;
                on_first = false;
            }
        }
        u = t.parent[u];
    }
    if u_out == usize::MAX {
        return Err(Error::InvalidInput("unbounded transport cycle".into()));
    }

    if delta > 0.0 {
        t.flow[in_arc] += delta;
        let mut u = first;
        while u != join {
            let e = t.pred[u];
            if t.up[u] {
                t.flow[e] -= delta;
            } else {
                t.flow[e] += delta;
            }
            u = t.parent[u];
        }
        let mut u = second;
        while u != join {
            let e = t.pred[u];
            if t.up[u] {
                t.flow[e] += delta;
            } else {
                t.flow[e] -= delta;
            }
            u = t.parent[u];
        }
    }

    let (u_in, v_in) = if on_first { (first, second) } else { (second, first) };
    let out_arc = t.pred[u_out];

    // path u_in → … → u_out gets re-hung below v_in
    let mut path = vec![u_in];
    let mut w = u_in;
    while w != u_out {
        w = t.parent[w];
        path.push(w);
    }
    let old_parent_out = t.parent[u_out];
    t.detach(u_out, old_parent_out);
    let old_pred: Vec<usize> = path.iter().map(|&x| t.pred[x]).collect();
    let old_up: Vec<bool> = path.iter().map(|&x| t.up[x]).collect();
    for k in (1..path.len()).rev() {
        let (child, new_parent) = (path[k], path[k - 1]);
        t.detach(new_parent, child);
        t.parent[child] = new_parent;
        t.pred[child] = old_pred[k - 1];
        t.up[child] = !old_up[k - 1];
        t.children[new_parent].push(child);
    }
    t.parent[u_in] = v_in;
    t.pred[u_in] = in_arc;
    t.up[u_in] = t.ends(in_arc).0 == u_in;
    t.children[v_in].push(u_in);

    t.in_tree[in_arc] = true;
    t.in_tree[out_arc] = false;
    t.refresh_subtree(u_in);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::{brute_force_mcov, mcov_exact_1d};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_measure(rng: &mut ChaCha8Rng, n: usize, d: usize, uniform: bool) -> DiscreteMeasure {
        let pts: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let w: Vec<f64> = (0..n)
            .map(|_| if uniform { 1.0 } else { rng.gen_range(0.05..1.0) })
            .collect();
        DiscreteMeasure::from_flat(d, pts, w).unwrap()
    }

    #[test]
    fn agrees_with_quantile_coupling_in_1d() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(1..12);
            let m = rng.gen_range(1..12);
            let p = random_measure(&mut rng, n, 1, false);
            let q = random_measure(&mut rng, m, 1, false);
            let lp = mcov_lp(&p, &q).unwrap();
            let ex = mcov_exact_1d(&p, &q).unwrap();
            assert_abs_diff_eq!(lp.value, ex.value, epsilon = 1e-9);
        }
    }

    #[test]
    fn agrees_with_permutation_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 1..=3 {
            for n in 1..=7 {
                let p = random_measure(&mut rng, n, d, true);
                let q = random_measure(&mut rng, n, d, true);
                let lp = mcov_lp(&p, &q).unwrap();
                let bf = brute_force_mcov(&p, &q).unwrap();
                assert_abs_diff_eq!(lp.value, bf, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn simplex_basis_vectors() {
        let k = 4;
        let pts: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let p = DiscreteMeasure::from_points(&pts, &vec![1.0; k]).unwrap();
        let r = mcov_lp(&p, &p).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn strong_duality_and_feasibility() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = random_measure(&mut rng, 15, 2, false);
            let q = random_measure(&mut rng, 9, 2, false);
            let r = mcov_lp(&p, &q).unwrap();
            assert_eq!(r.potentials.f[0], 0.0);
            assert!(r.potentials.max_infeasibility(&p, &q) <= 1e-8);
            assert!(r.diagnostics.duality_gap <= 1e-8, "{}", r.diagnostics.duality_gap);
            assert!(r.diagnostics.marginal_violation <= 1e-9);
            assert!(r.coupling.entries().iter().all(|e| e.2 > 0.0));
        }
    }

    #[test]
    fn size_cap() {
        let p = DiscreteMeasure::uniform_1d(&[0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            mcov_lp_with_cap(&p, &p, 8),
            Err(Error::SizeCapExceeded { size: 9, cap: 8 })
        ));
    }

    #[test]
    fn larger_instance_finishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_measure(&mut rng, 400, 2, false);
        let q = random_measure(&mut rng, 300, 2, false);
        let r = mcov_lp(&p, &q).unwrap();
        assert!(r.diagnostics.duality_gap < 1e-8);
        assert!(r.diagnostics.marginal_violation < 1e-9);
    }
}
