//! Exact proximal operator of the graph fused lasso,
//!
//! ```text
//! argmin_z (eta/2) ||z - b||^2 + lambda ||H z||_1
//! ```
//!
//! solved by divide and conquer over minimum cuts. For a node group sharing a
//! tentative level `c` (the group mean), the set of nodes whose optimal value
//! lies above `c` is a minimum cut of
//!
//! ```text
//! sum_{i in U} eta (c - b_i) + lambda * cut(U)
//! ```
//!
//! If the cut is trivial the whole group takes value `c`. Otherwise the group
//! splits in two; every edge crossing the split has a known sign and folds
//! into the data terms of its endpoints as a linear offset of `+-lambda`.
//! Each group is visited once, so the number of cut problems is at most
//! twice the number of distinct values in the solution.

use rayon::prelude::*;

use crate::data_model::CoefMatrix;
use crate::error::{invalid, Error, Result};
use crate::knn_graph::KnnGraph;
use crate::maxflow::{BkGraph, FlowNetwork};

/// Default relative tolerance for the optimality certificate.
pub const DEFAULT_PROX_TOL: f64 = 1e-8;

// relative threshold for accepting a cut as a strict improvement
const CUT_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    pub z: Vec<f64>,
    /// `min_w ||eta (z - b) + lambda H' w||_inf` over sign-consistent `w`.
    pub kkt_residual: f64,
    /// Number of minimum-cut problems solved.
    pub iterations: usize,
}

/// Reusable scratch space for repeated prox evaluations on one graph.
#[derive(Debug, Default, Clone)]
pub struct FusedProxSolver {
    net: BkGraph,
    offset: Vec<f64>,
    local: Vec<usize>,
    deriv: Vec<f64>,
    // spanning-forest warm start of each cut problem, in local indices
    supply: Vec<f64>,
    tree_parent: Vec<usize>,
    tree_flow: Vec<f64>,
    order: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl FusedProxSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Writes the prox of `b` into `out` and returns the number of cut
    /// problems solved. Inputs are assumed finite and `eta > 0`.
    pub fn solve_into(
        &mut self,
        graph: &KnnGraph,
        b: &[f64],
        lambda: f64,
        eta: f64,
        out: &mut [f64],
    ) -> usize {
        let n = graph.n_nodes();
        debug_assert_eq!(b.len(), n);
        debug_assert_eq!(out.len(), n);
        if lambda == 0.0 || graph.n_edges() == 0 {
            out.copy_from_slice(b);
            return 0;
        }

        self.offset.clear();
        self.offset.resize(n, 0.0);
        self.local.clear();
        self.local.resize(n, NONE);

        let mut cuts = 0;
        let mut stack: Vec<Vec<usize>> = graph.components().iter().rev().cloned().collect();
        while let Some(group) = stack.pop() {
            let m = group.len();
            let target = |i: usize, off: &[f64]| b[i] - off[i] / eta;
            if m == 1 {
                let i = group[0];
                out[i] = target(i, &self.offset);
                continue;
            }
            let level = group.iter().map(|&i| target(i, &self.offset)).sum::<f64>() / m as f64;

            // derivative of each node's data term at `level`
            self.deriv.clear();
            let mut scale = 0.0;
            for &i in &group {
                let w = eta * (level - target(i, &self.offset));
                scale += w.abs();
                self.deriv.push(w);
            }
            if scale <= f64::MIN_POSITIVE {
                for &i in &group {
                    out[i] = level;
                }
                continue;
            }

            for (li, &i) in group.iter().enumerate() {
                self.local[i] = li;
            }
            self.route_on_tree(graph, &group, lambda);
            self.net.reset(m);
            for li in 0..m {
                // positive: source arc, negative: sink arc
                self.net.add_terminal(li, self.supply[li]);
            }
            for (li, &i) in group.iter().enumerate() {
                for &k in graph.neighbors(i) {
                    let lk = self.local[k];
                    if lk == NONE || k < i {
                        continue;
                    }
                    // tree edges carry the routed flow from child to parent
                    if self.tree_parent[lk] == li {
                        let f = self.tree_flow[lk];
                        self.net.add_edge(lk, li, lambda - f, lambda + f);
                    } else if self.tree_parent[li] == lk {
                        let f = self.tree_flow[li];
                        self.net.add_edge(li, lk, lambda - f, lambda + f);
                    } else {
                        self.net.add_edge(li, lk, lambda, lambda);
                    }
                }
            }
            cuts += 1;
            let eps = 1e-15 * scale.max(lambda);
            self.net.max_flow(eps);

            // value of the cut relative to keeping the group whole
            let side: Vec<bool> = (0..m).map(|li| self.net.in_source_set(li)).collect();
            let mut value: f64 = (0..m).filter(|&li| side[li]).map(|li| self.deriv[li]).sum();
            for (li, &i) in group.iter().enumerate() {
                if side[li] {
                    for &k in graph.neighbors(i) {
                        let lk = self.local[k];
                        if lk != NONE && !side[lk] {
                            value += lambda;
                        }
                    }
                }
            }

            let mut upper = Vec::new();
            let mut lower = Vec::new();
            if value < -CUT_REL_TOL * scale {
                for (li, &i) in group.iter().enumerate() {
                    if side[li] {
                        upper.push(i);
                    } else {
                        lower.push(i);
                    }
                }
            }
            if upper.is_empty() || lower.is_empty() {
                for &i in &group {
                    out[i] = level;
                    self.local[i] = NONE;
                }
                continue;
            }

            // fold crossing edges: upper endpoint gains +lambda, lower -lambda
            for &i in &upper {
                for &k in graph.neighbors(i) {
                    let lk = self.local[k];
                    if lk != NONE && !side[lk] {
                        self.offset[i] += lambda;
                        self.offset[k] -= lambda;
                    }
                }
            }
            for &i in &group {
                self.local[i] = NONE;
            }
            stack.push(lower);
            stack.push(upper);
        }
        cuts
    }

    /// Routes the terminal supplies `-deriv` along a BFS spanning forest of
    /// the group, clipping each tree edge at `lambda`. What cannot be routed
    /// stays in `supply`. Residual capacities plus the leftover supplies
    /// define a network with the same minimum cuts as the original.
    fn route_on_tree(&mut self, graph: &KnnGraph, group: &[usize], lambda: f64) {
        let m = group.len();
        self.supply.clear();
        self.supply.extend(self.deriv.iter().map(|w| -w));
        self.tree_parent.clear();
        self.tree_parent.resize(m, NONE);
        self.tree_flow.clear();
        self.tree_flow.resize(m, 0.0);
        self.order.clear();
        let mut seen = vec![false; m];
        for root in 0..m {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let start = self.order.len();
            self.order.push(root);
            let mut head = start;
            while head < self.order.len() {
                let lu = self.order[head];
                head += 1;
                for &k in graph.neighbors(group[lu]) {
                    let lk = self.local[k];
                    if lk != NONE && !seen[lk] {
                        seen[lk] = true;
                        self.tree_parent[lk] = lu;
                        self.order.push(lk);
                    }
                }
            }
        }
        for idx in (0..m).rev() {
            let lu = self.order[idx];
            let parent = self.tree_parent[lu];
            if parent == NONE {
                continue;
            }
            let f = self.supply[lu].clamp(-lambda, lambda);
            self.tree_flow[lu] = f;
            self.supply[lu] -= f;
            self.supply[parent] += f;
        }
    }
}

fn check_inputs(graph: &KnnGraph, b: &[f64], lambda: f64, eta: f64) -> Result<()> {
    if b.len() != graph.n_nodes() {
        return Err(Error::DimensionMismatch {
            field: "b",
            expected: graph.n_nodes(),
            found: b.len(),
        });
    }
    if let Some(i) = b.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            field: "b",
            row: i + 1,
            col: 1,
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", "must be finite and nonnegative"));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(invalid("eta", "must be positive"));
    }
    Ok(())
}

/// Solves the prox for one node vector and certifies the result.
///
/// Fails with [`Error::ProxKkt`] if the optimality residual exceeds
/// `tol * eta * (1 + ||b||_inf)`.
pub fn graph_fused_prox(
    graph: &KnnGraph,
    b: &[f64],
    lambda: f64,
    eta: f64,
    tol: f64,
) -> Result<ProxResult> {
    check_inputs(graph, b, lambda, eta)?;
    let mut z = vec![0.0; b.len()];
    let iterations = FusedProxSolver::new().solve_into(graph, b, lambda, eta, &mut z);
    let kkt_residual = kkt_residual(graph, b, &z, lambda, eta)?;
    let bound = tol * eta * (1.0 + crate::data_model::max_abs(b));
    if kkt_residual > bound {
        return Err(Error::ProxKkt {
            residual: kkt_residual,
            bound,
        });
    }
    Ok(ProxResult {
        z,
        kkt_residual,
        iterations,
    })
}

/// Applies the prox to every column of `b`, in parallel over columns.
pub fn prox_batch(
    graph: &KnnGraph,
    b: &CoefMatrix,
    lambda: f64,
    eta: f64,
    tol: f64,
) -> Result<CoefMatrix> {
    let columns: Vec<Result<Vec<f64>>> = b
        .columns()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|col| graph_fused_prox(graph, col, lambda, eta, tol).map(|r| r.z))
        .collect();
    CoefMatrix::from_columns(columns.into_iter().collect::<Result<Vec<_>>>()?)
}

/// Unchecked batch prox used inside the ADMM loop.
pub(crate) fn prox_columns_into(
    graph: &KnnGraph,
    b: &CoefMatrix,
    lambda: f64,
    eta: f64,
    out: &mut CoefMatrix,
) {
    let n = b.n();
    out.as_mut_slice()
        .par_chunks_mut(n.max(1))
        .zip(b.as_slice().par_chunks(n.max(1)))
        .for_each_init(FusedProxSolver::new, |solver, (dst, src)| {
            solver.solve_into(graph, src, lambda, eta, dst);
        });
}

/// Finds a dual certificate for a candidate prox solution `z` and returns
/// the stationarity residual `||eta (z - b) + lambda H' w||_inf`.
///
/// Edges with a nonzero difference get `w_m = sign((H z)_m)`. On fused edges
/// `w_m in [-1, 1]` is chosen by a feasibility max-flow so that the residual
/// is as small as the fused structure of `z` allows.
pub fn kkt_residual(graph: &KnnGraph, b: &[f64], z: &[f64], lambda: f64, eta: f64) -> Result<f64> {
    let w = dual_certificate(graph, b, z, lambda, eta)?;
    let htw = graph.apply_ht(&w)?;
    Ok(z.iter()
        .zip(b)
        .zip(&htw)
        .map(|((&zi, &bi), &h)| (eta * (zi - bi) + lambda * h).abs())
        .fold(0.0, f64::max))
}

/// Edge multipliers `w` with `|w_m| <= 1` certifying optimality of `z`.
pub fn dual_certificate(
    graph: &KnnGraph,
    b: &[f64],
    z: &[f64],
    lambda: f64,
    eta: f64,
) -> Result<Vec<f64>> {
    check_inputs(graph, b, lambda, eta)?;
    if z.len() != b.len() {
        return Err(Error::DimensionMismatch {
            field: "z",
            expected: b.len(),
            found: z.len(),
        });
    }
    let n = graph.n_nodes();
    let mut w = vec![0.0; graph.n_edges()];
    if lambda == 0.0 {
        return Ok(w);
    }
    let zero = 1e-12 * (1.0 + crate::data_model::max_abs(z));
    let mut fused = Vec::new();
    for (m, &(a, c)) in graph.edges().iter().enumerate() {
        let d = z[a] - z[c];
        if d.abs() > zero {
            w[m] = d.signum();
        } else {
            fused.push(m);
        }
    }
    // required net outflow on fused edges: H'w = -eta (z - b) / lambda
    let fixed = graph.apply_ht(&w)?;
    let need: Vec<f64> = (0..n)
        .map(|i| -eta * (z[i] - b[i]) / lambda - fixed[i])
        .collect();
    if fused.is_empty() {
        return Ok(w);
    }
    let mut net = FlowNetwork::default();
    let (s, t) = (n, n + 1);
    net.reset(n + 2);
    let mut scale: f64 = 1.0;
    for (i, &d) in need.iter().enumerate() {
        scale = scale.max(d.abs());
        if d > 0.0 {
            net.add_edge(s, i, d, 0.0);
        } else if d < 0.0 {
            net.add_edge(i, t, -d, 0.0);
        }
    }
    let arcs: Vec<usize> = fused
        .iter()
        .map(|&m| {
            let (a, c) = graph.edges()[m];
            net.add_edge(a, c, 1.0, 1.0)
        })
        .collect();
    net.max_flow(s, t, 1e-15 * scale);
    for (&m, &arc) in fused.iter().zip(&arcs) {
        w[m] = net.flow(arc).clamp(-1.0, 1.0);
    }
    Ok(w)
}
