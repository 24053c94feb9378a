//! Reference solvers for small instances, independent of the ADMM and
//! max-flow code paths.
//!
//! * [`lp_solve`] solves the full penalized problem exactly as a linear
//!   program (both the check loss and the l1 fusion are piecewise linear).
//! * [`qp_prox`] solves the fused prox through its box-constrained dual by
//!   exact coordinate ascent and stops on a certified duality gap.

use crate::data_model::{CoefMatrix, Dataset};
use crate::error::{Error, Result};
use crate::knn_graph::KnnGraph;

/// Largest LP accepted by [`lp_solve`], counted as `n p + 2 n + 2 p |E|`.
pub const LP_MAX_VARS: usize = 5000;

const PIVOT_TOL: f64 = 1e-9;

/// Dense two-phase simplex for `min c'x  s.t.  A x = b, x >= 0`.
///
/// Pricing is Dantzig's rule; after a run of degenerate pivots it switches to
/// Bland's rule for the rest of the phase, which rules out cycling.
#[derive(Debug, Clone)]
pub struct DenseLp {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpVertex {
    pub x: Vec<f64>,
    pub value: f64,
    pub pivots: usize,
}

struct Tableau {
    rows: usize,
    cols: usize, // structural + artificial columns, rhs stored separately
    t: Vec<f64>, // rows x cols
    rhs: Vec<f64>,
    obj: Vec<f64>, // reduced costs
    obj_rhs: f64,  // minus the current objective value
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.cols + c]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let cols = self.cols;
        let inv = 1.0 / self.at(pr, pc);
        for c in 0..cols {
            self.t[pr * cols + c] *= inv;
        }
        self.rhs[pr] *= inv;
        self.t[pr * cols + pc] = 1.0;
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.at(r, pc);
            if f != 0.0 {
                for c in 0..cols {
                    self.t[r * cols + c] -= f * self.t[pr * cols + c];
                }
                self.t[r * cols + pc] = 0.0;
                self.rhs[r] -= f * self.rhs[pr];
            }
        }
        let f = self.obj[pc];
        if f != 0.0 {
            for c in 0..cols {
                self.obj[c] -= f * self.t[pr * cols + c];
            }
            self.obj[pc] = 0.0;
            self.obj_rhs -= f * self.rhs[pr];
        }
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    /// Runs simplex iterations over the allowed columns.
    fn optimize(&mut self, allowed: &[bool], max_pivots: usize) -> Result<()> {
        let mut degenerate_run = 0usize;
        let mut bland = false;
        loop {
            let entering = if bland {
                (0..self.cols).find(|&c| allowed[c] && self.obj[c] < -PIVOT_TOL)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for c in 0..self.cols {
                    if allowed[c] && self.obj[c] < -PIVOT_TOL && best.is_none_or(|(_, v)| self.obj[c] < v) {
                        best = Some((c, self.obj[c]));
                    }
                }
                best.map(|(c, _)| c)
            };
            let Some(pc) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let ratio = self.rhs[r] / a;
                    let better = match leave {
                        None => true,
                        Some((lr, lv)) => {
                            ratio < lv - 1e-12
                                || (ratio <= lv + 1e-12 && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((pr, ratio)) = leave else {
                return Err(Error::Lp("problem is unbounded".into()));
            };
            if ratio.abs() <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run > 50 {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
            self.pivot(pr, pc);
            if self.pivots > max_pivots {
                return Err(Error::Lp(format!("no optimum after {max_pivots} pivots")));
            }
        }
    }
}

impl DenseLp {
    pub fn solve(&self) -> Result<LpVertex> {
        let m = self.a.len();
        let n = self.c.len();
        if self.b.len() != m || self.a.iter().any(|r| r.len() != n) {
            return Err(Error::Lp("inconsistent LP dimensions".into()));
        }
        let cols = n + m;
        let mut tab = Tableau {
            rows: m,
            cols,
            t: vec![0.0; m * cols],
            rhs: vec![0.0; m],
            obj: vec![0.0; cols],
            obj_rhs: 0.0,
            basis: (n..n + m).collect(),
            pivots: 0,
        };
        for r in 0..m {
            let sign = if self.b[r] < 0.0 { -1.0 } else { 1.0 };
            for c in 0..n {
                tab.t[r * cols + c] = sign * self.a[r][c];
            }
            tab.t[r * cols + n + r] = 1.0;
            tab.rhs[r] = sign * self.b[r];
        }
        // phase 1: minimize the sum of artificials
        for r in 0..m {
            for c in 0..n {
                tab.obj[c] -= tab.t[r * cols + c];
            }
            tab.obj_rhs -= tab.rhs[r];
        }
        let max_pivots = 50 * (m + cols) + 10_000;
        let structural: Vec<bool> = (0..cols).map(|c| c < n).collect();
        let everything = vec![true; cols];
        tab.optimize(&everything, max_pivots)?;
        let infeasibility = -tab.obj_rhs;
        let scale = 1.0 + self.b.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        if infeasibility > 1e-9 * scale {
            return Err(Error::Lp(format!("infeasible (phase 1 value {infeasibility:e})")));
        }
        // drive remaining artificials out of the basis
        for r in 0..m {
            if tab.basis[r] >= n {
                if let Some(c) = (0..n).find(|&c| tab.at(r, c).abs() > PIVOT_TOL) {
                    tab.pivot(r, c);
                }
            }
        }
        // phase 2
        tab.obj = vec![0.0; cols];
        tab.obj[..n].copy_from_slice(&self.c);
        tab.obj_rhs = 0.0;
        for r in 0..m {
            let bc = tab.basis[r];
            let cb = if bc < n { self.c[bc] } else { 0.0 };
            if cb != 0.0 {
                for c in 0..cols {
                    tab.obj[c] -= cb * tab.t[r * cols + c];
                }
                tab.obj_rhs -= cb * tab.rhs[r];
            }
        }
        tab.optimize(&structural, max_pivots)?;

        let mut x = vec![0.0; n];
        for r in 0..m {
            if tab.basis[r] < n {
                x[tab.basis[r]] = tab.rhs[r].max(0.0);
            }
        }
        let value = x.iter().zip(&self.c).map(|(a, b)| a * b).sum();
        Ok(LpVertex {
            x,
            value,
            pivots: tab.pivots,
        })
    }
}

/// Exact minimizer of the averaged penalized objective.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub beta: CoefMatrix,
    pub optimum: f64,
    /// `max(max_i min(r+_i, r-_i), max_jm min(e+_jm, e-_jm))`; zero at a
    /// vertex because each split pair has opposite columns.
    pub complementarity: f64,
    pub pivots: usize,
}

/// Solves the penalized problem through its LP reformulation.
///
/// Variables: `beta = beta+ - beta-`, residual splits `r+ - r- = y - X beta`,
/// and edge splits `e+ - e- = H beta_j`.
pub fn lp_solve(dataset: &Dataset, graph: &KnnGraph, lambda: f64) -> Result<LpSolution> {
    dataset.validate()?;
    let (n, p) = (dataset.n(), dataset.p);
    let ne = graph.n_edges();
    if graph.n_nodes() != n {
        return Err(Error::DimensionMismatch {
            field: "graph nodes",
            expected: n,
            found: graph.n_nodes(),
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(crate::error::invalid("lambda", "must be finite and nonnegative"));
    }
    let size = n * p + 2 * n + 2 * p * ne;
    if size > LP_MAX_VARS {
        return Err(Error::LpTooLarge {
            vars: size,
            limit: LP_MAX_VARS,
        });
    }

    let np = n * p;
    let bp = |j: usize, i: usize| j * n + i;
    let bm = |j: usize, i: usize| np + j * n + i;
    let rp = |i: usize| 2 * np + i;
    let rm = |i: usize| 2 * np + n + i;
    let ep = |j: usize, m: usize| 2 * np + 2 * n + j * ne + m;
    let em = |j: usize, m: usize| 2 * np + 2 * n + p * ne + j * ne + m;
    let nvar = 2 * np + 2 * n + 2 * p * ne;

    let mut c = vec![0.0; nvar];
    let nf = n as f64;
    for i in 0..n {
        c[rp(i)] = dataset.tau[i] / nf;
        c[rm(i)] = (1.0 - dataset.tau[i]) / nf;
    }
    for j in 0..p {
        for m in 0..ne {
            c[ep(j, m)] = lambda;
            c[em(j, m)] = lambda;
        }
    }
    let mut a = Vec::with_capacity(n + p * ne);
    let mut b = Vec::with_capacity(n + p * ne);
    for i in 0..n {
        let mut row = vec![0.0; nvar];
        for j in 0..p {
            row[bp(j, i)] = dataset.x(i, j);
            row[bm(j, i)] = -dataset.x(i, j);
        }
        row[rp(i)] = 1.0;
        row[rm(i)] = -1.0;
        a.push(row);
        b.push(dataset.y[i]);
    }
    for j in 0..p {
        for (m, &(ia, ic)) in graph.edges().iter().enumerate() {
            let mut row = vec![0.0; nvar];
            row[bp(j, ia)] = 1.0;
            row[bm(j, ia)] = -1.0;
            row[bp(j, ic)] = -1.0;
            row[bm(j, ic)] = 1.0;
            row[ep(j, m)] = -1.0;
            row[em(j, m)] = 1.0;
            a.push(row);
            b.push(0.0);
        }
    }
    let vertex = DenseLp { a, b, c }.solve()?;
    let x = &vertex.x;
    let beta = CoefMatrix::from_fn(n, p, |i, j| x[bp(j, i)] - x[bm(j, i)]);
    let mut complementarity: f64 = 0.0;
    for i in 0..n {
        complementarity = complementarity.max(x[rp(i)].min(x[rm(i)]));
    }
    for j in 0..p {
        for m in 0..ne {
            complementarity = complementarity.max(x[ep(j, m)].min(x[em(j, m)]));
        }
    }
    Ok(LpSolution {
        beta,
        optimum: vertex.value,
        complementarity,
        pivots: vertex.pivots,
    })
}

/// Result of the dual coordinate-ascent prox.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProx {
    pub z: Vec<f64>,
    /// Primal minus dual objective at termination.
    pub gap: f64,
    /// Certified bound on `||z - z*||_2`, i.e. `sqrt(2 gap / eta)`.
    pub error_bound: f64,
    pub sweeps: usize,
}

/// Fused prox via the dual problem
/// `max_{|w| <= 1} lambda w'H b - lambda^2/(2 eta) ||H'w||^2`, with
/// `z = b - (lambda/eta) H'w`.
///
/// Each coordinate step is solved exactly; iteration stops when the duality
/// gap drops below `gap_tol` or `max_sweeps` is reached.
pub fn qp_prox(
    graph: &KnnGraph,
    b: &[f64],
    lambda: f64,
    eta: f64,
    gap_tol: f64,
    max_sweeps: usize,
) -> QpProx {
    let mut z = b.to_vec();
    if lambda == 0.0 || graph.n_edges() == 0 {
        return QpProx {
            z,
            gap: 0.0,
            error_bound: 0.0,
            sweeps: 0,
        };
    }
    let edges = graph.edges();
    let mut w = vec![0.0; edges.len()];
    let step = lambda / eta;
    // with z = b - (lambda/eta) H'w the gap is lambda sum_m (|(Hz)_m| - w_m (Hz)_m),
    // a sum of nonnegative terms
    let gap_of = |z: &[f64], w: &[f64]| {
        lambda
            * edges
                .iter()
                .zip(w)
                .map(|(&(a, c), wm)| {
                    let d = z[a] - z[c];
                    d.abs() - wm * d
                })
                .sum::<f64>()
    };
    let mut sweeps = 0;
    let mut gap = gap_of(&z, &w);
    while sweeps < max_sweeps && gap > gap_tol {
        for _ in 0..16 {
            for (m, &(a, c)) in edges.iter().enumerate() {
                let target = (w[m] + (z[a] - z[c]) / (2.0 * step)).clamp(-1.0, 1.0);
                let delta = target - w[m];
                if delta != 0.0 {
                    w[m] = target;
                    z[a] -= step * delta;
                    z[c] += step * delta;
                }
            }
            sweeps += 1;
        }
        // refresh z from w to shed accumulated rounding
        let htw = graph.apply_ht(&w).expect("edge count matches");
        for i in 0..z.len() {
            z[i] = b[i] - step * htw[i];
        }
        gap = gap_of(&z, &w).max(0.0);
    }
    QpProx {
        error_bound: (2.0 * gap / eta).sqrt(),
        z,
        gap,
        sweeps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::DEFAULT_DELTA;
    use crate::quantile_loss::objective;

    #[test]
    fn dense_lp_textbook() {
        // min -x - y s.t. x + 2y + s1 = 4, 3x + y + s2 = 6  -> (1.6, 1.2), value -2.8
        let lp = DenseLp {
            a: vec![vec![1.0, 2.0, 1.0, 0.0], vec![3.0, 1.0, 0.0, 1.0]],
            b: vec![4.0, 6.0],
            c: vec![-1.0, -1.0, 0.0, 0.0],
        };
        let v = lp.solve().unwrap();
        assert!((v.value + 2.8).abs() < 1e-12);
        assert!((v.x[0] - 1.6).abs() < 1e-12 && (v.x[1] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn dense_lp_infeasible_and_unbounded() {
        let infeasible = DenseLp {
            a: vec![vec![1.0, 1.0]],
            b: vec![-1.0],
            c: vec![0.0, 0.0],
        };
        assert!(infeasible.solve().is_err());
        let unbounded = DenseLp {
            a: vec![vec![1.0, -1.0]],
            b: vec![0.0],
            c: vec![-1.0, 0.0],
        };
        assert!(unbounded.solve().is_err());
    }

    #[test]
    fn degenerate_lp_terminates() {
        // Beale's classic cycling example under Dantzig's rule
        let lp = DenseLp {
            a: vec![
                vec![0.25, -60.0, -0.04, 9.0, 1.0, 0.0, 0.0],
                vec![0.5, -90.0, -0.02, 3.0, 0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            ],
            b: vec![0.0, 0.0, 1.0],
            c: vec![-0.75, 150.0, -0.02, 6.0, 0.0, 0.0, 0.0],
        };
        let v = lp.solve().unwrap();
        assert!((v.value + 0.05).abs() < 1e-9, "{}", v.value);
    }

    fn two_node() -> (Dataset, KnnGraph) {
        let ds = Dataset {
            y: vec![0.0, 2.0],
            x: vec![1.0, 1.0],
            p: 1,
            t: vec![0.1, 0.2],
            tau: vec![0.5, 0.5],
            delta: DEFAULT_DELTA,
        };
        (ds, KnnGraph::from_edges(2, vec![(0, 1)]))
    }

    #[test]
    fn lp_two_node_example() {
        let (ds, g) = two_node();
        let sol = lp_solve(&ds, &g, 0.1).unwrap();
        assert!((sol.optimum - 0.2).abs() < 1e-12);
        assert!((sol.beta.get(0, 0)).abs() < 1e-12);
        assert!((sol.beta.get(1, 0) - 2.0).abs() < 1e-12);
        // exhaustive breakpoint check
        for a in 0..3 {
            for b in 0..3 {
                let beta = CoefMatrix::from_columns(vec![vec![a as f64, b as f64]]).unwrap();
                let v = objective(&ds, &beta, &g, 0.1).unwrap().total;
                assert!(sol.optimum <= v + 1e-12);
            }
        }
        assert!(sol.complementarity <= 1e-9);
    }

    #[test]
    fn lp_interpolates_without_penalty() {
        let (ds, g) = two_node();
        let sol = lp_solve(&ds, &g, 0.0).unwrap();
        assert!(sol.optimum.abs() < 1e-12);
    }

    #[test]
    fn lp_size_guard() {
        let n = 50;
        let ds = Dataset::new(
            vec![0.0; n],
            vec![1.0; n * 20],
            20,
            (0..n).map(|i| i as f64 / n as f64).collect(),
            vec![0.5; n],
        )
        .unwrap();
        let g = crate::knn_graph::build_knn_graph(&ds.points(), 5).unwrap();
        assert!(matches!(lp_solve(&ds, &g, 1.0), Err(Error::LpTooLarge { .. })));
    }

    #[test]
    fn qp_prox_two_node() {
        let g = KnnGraph::from_edges(2, vec![(0, 1)]);
        let r = qp_prox(&g, &[0.0, 2.0], 0.5, 1.0, 1e-20, 10_000);
        assert!((r.z[0] - 0.5).abs() < 1e-9 && (r.z[1] - 1.5).abs() < 1e-9);
        let r = qp_prox(&g, &[0.0, 2.0], 2.0, 1.0, 1e-20, 10_000);
        assert!((r.z[0] - 1.0).abs() < 1e-9 && (r.z[1] - 1.0).abs() < 1e-9);
    }
}
