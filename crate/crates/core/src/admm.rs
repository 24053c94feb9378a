//! ADMM driver for the penalized quantile objective.
//!
//! The loss is split per sample and the penalty per covariate:
//!
//! ```text
//! min sum_i rho_tau_i(y_i - x_i' beta^i) + n lambda sum_j ||H z_j||_1   s.t. beta_j = z_j
//! ```
//!
//! which is the averaged objective multiplied through by `n`. Each iteration
//! runs a closed-form update of every sample's coefficient vector, a fused
//! prox per covariate on `beta_j + u_j`, and the dual step
//! `u_j += eta (beta_j - z_j)`. The reported estimate is the `z` copy, whose
//! fused differences are exactly zero.

use rayon::prelude::*;

use crate::data_model::{CoefMatrix, Dataset, SolverConfig};
use crate::error::{Error, Result};
use crate::fused_prox::prox_columns_into;
use crate::knn_graph::KnnGraph;
use crate::quantile_loss::{objective, ObjectiveValue};

/// Iterates of the splitting scheme; also used to warm-start a new fit.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub beta: CoefMatrix,
    pub z: CoefMatrix,
    /// Scaled dual variables.
    pub u: CoefMatrix,
    pub eta: f64,
    pub iter: usize,
    /// `max_j ||beta_j - z_j||_inf`
    pub primal_res: f64,
    /// `eta * max_j ||z_j - z_j_prev||_inf`
    pub dual_res: f64,
}

impl AdmmState {
    pub fn zeros(n: usize, p: usize, eta: f64) -> Self {
        AdmmState {
            beta: CoefMatrix::zeros(n, p),
            z: CoefMatrix::zeros(n, p),
            u: CoefMatrix::zeros(n, p),
            eta,
            iter: 0,
            primal_res: f64::INFINITY,
            dual_res: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta_hat: CoefMatrix,
    pub lambda: f64,
    pub objective: ObjectiveValue,
    pub converged: bool,
    pub iters: usize,
    /// Absolute threshold used to decide which fused differences are nonzero.
    pub fuse_eps: f64,
    /// Per covariate, the edge ids with `|(H beta_hat_j)_m| > fuse_eps`.
    pub support: Vec<Vec<usize>>,
    /// Samples with an all-zero covariate row; their loss does not depend on
    /// the coefficients.
    pub zero_rows: Vec<usize>,
    pub state: AdmmState,
}

impl FitResult {
    /// `sum_j |S_j|`.
    pub fn support_total(&self) -> usize {
        self.support.iter().map(Vec::len).sum()
    }
}

fn update_sample(x: &[f64], y: f64, tau: f64, w: &mut [f64], eta: f64) -> bool {
    let xx: f64 = x.iter().map(|v| v * v).sum();
    if xx == 0.0 {
        return false;
    }
    let g = x.iter().zip(w.iter()).map(|(a, b)| a * b).sum::<f64>() - y;
    let s = xx / eta;
    let coef = if g > (1.0 - tau) * s {
        (tau - 1.0) / eta
    } else if g < -tau * s {
        tau / eta
    } else {
        // interpolating case: v = -eta g / x'x
        -g / xx
    };
    for (wi, xi) in w.iter_mut().zip(x) {
        *wi += coef * xi;
    }
    true
}

fn beta_update_into(dataset: &Dataset, z: &CoefMatrix, u: &CoefMatrix, eta: f64, out: &mut CoefMatrix) {
    let (n, p) = (dataset.n(), dataset.p);
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut w: Vec<f64> = (0..p).map(|j| z.get(i, j) - u.get(i, j)).collect();
            update_sample(dataset.row(i), dataset.y[i], dataset.tau[i], &mut w, eta);
            w
        })
        .collect();
    for j in 0..p {
        let col = out.col_mut(j);
        for (i, v) in col.iter_mut().enumerate() {
            *v = rows[i * p + j];
        }
    }
}

/// Closed-form minimizer of `rho_tau_i(y_i - x_i' b) + (eta/2) ||b - z^i + u^i||^2`
/// for every sample `i`.
///
/// A sample with `x_i = 0` has a constant loss, so its coefficients are set
/// to `z^i - u^i`.
pub fn beta_update(dataset: &Dataset, z: &CoefMatrix, u: &CoefMatrix, eta: f64) -> Result<CoefMatrix> {
    z.check_shape(dataset.n(), dataset.p)?;
    u.check_shape(dataset.n(), dataset.p)?;
    if !(eta > 0.0) {
        return Err(crate::error::invalid("eta", "must be positive"));
    }
    let mut out = CoefMatrix::zeros(dataset.n(), dataset.p);
    beta_update_into(dataset, z, u, eta, &mut out);
    Ok(out)
}

/// `u + eta (beta - z)`.
pub fn dual_update(u: &CoefMatrix, beta: &CoefMatrix, z: &CoefMatrix, eta: f64) -> CoefMatrix {
    let mut out = u.clone();
    for ((o, &b), &zz) in out
        .as_mut_slice()
        .iter_mut()
        .zip(beta.as_slice())
        .zip(z.as_slice())
    {
        *o += eta * (b - zz);
    }
    out
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Fits from a zero start.
pub fn fit(dataset: &Dataset, graph: &KnnGraph, config: &SolverConfig) -> Result<FitResult> {
    fit_warm(dataset, graph, config, None)
}

/// Fits starting from `warm` when given (its `eta` is kept).
///
/// Running out of iterations is not an error: the result carries
/// `converged = false` and the last iterate.
pub fn fit_warm(
    dataset: &Dataset,
    graph: &KnnGraph,
    config: &SolverConfig,
    warm: Option<&AdmmState>,
) -> Result<FitResult> {
    dataset.validate()?;
    let (n, p) = (dataset.n(), dataset.p);
    if graph.n_nodes() != n {
        return Err(Error::DimensionMismatch {
            field: "graph nodes",
            expected: n,
            found: graph.n_nodes(),
        });
    }
    if config.k >= n {
        return Err(Error::NeighborCount { k: config.k, n });
    }
    config.validate(n)?;

    let mut state = match warm {
        Some(s) => {
            s.beta.check_shape(n, p)?;
            s.z.check_shape(n, p)?;
            s.u.check_shape(n, p)?;
            let mut s = s.clone();
            s.iter = 0;
            s
        }
        None => AdmmState::zeros(n, p, config.eta),
    };

    let zero_rows: Vec<usize> = (0..n)
        .filter(|&i| dataset.row(i).iter().all(|&v| v == 0.0))
        .collect();
    let lambda_sum = config.lambda * n as f64;
    let tol_primal = config.primal_threshold(&dataset.y);
    let tol_dual = config.dual_threshold(&dataset.y);

    let mut b = CoefMatrix::zeros(n, p);
    let mut z_next = CoefMatrix::zeros(n, p);
    let mut converged = false;
    while state.iter < config.max_iter {
        state.iter += 1;
        let eta = state.eta;
        beta_update_into(dataset, &state.z, &state.u, eta, &mut state.beta);

        for ((bv, &beta), &u) in b
            .as_mut_slice()
            .iter_mut()
            .zip(state.beta.as_slice())
            .zip(state.u.as_slice())
        {
            *bv = beta + u;
        }
        prox_columns_into(graph, &b, lambda_sum, eta, &mut z_next);

        for ((u, &beta), &z) in state
            .u
            .as_mut_slice()
            .iter_mut()
            .zip(state.beta.as_slice())
            .zip(z_next.as_slice())
        {
            *u += eta * (beta - z);
        }
        state.primal_res = max_abs_diff(state.beta.as_slice(), z_next.as_slice());
        state.dual_res = eta * max_abs_diff(z_next.as_slice(), state.z.as_slice());
        std::mem::swap(&mut state.z, &mut z_next);

        if state.primal_res <= tol_primal && state.dual_res <= tol_dual {
            converged = true;
            break;
        }
        if config.balance_eta {
            let factor = if state.primal_res > 10.0 * state.dual_res {
                2.0
            } else if state.dual_res > 10.0 * state.primal_res {
                0.5
            } else {
                1.0
            };
            if factor != 1.0 {
                state.eta *= factor;
                for u in state.u.as_mut_slice() {
                    *u /= factor;
                }
            }
        }
    }

    let beta_hat = state.z.clone();
    let objective = objective(dataset, &beta_hat, graph, config.lambda)?;
    let fuse_eps = config.fuse_threshold(&beta_hat);
    let support = support_sets(graph, &beta_hat, fuse_eps);
    Ok(FitResult {
        beta_hat,
        lambda: config.lambda,
        objective,
        converged,
        iters: state.iter,
        fuse_eps,
        support,
        zero_rows,
        state,
    })
}

/// Edge ids with `|(H beta_j)_m| > eps`, per covariate.
pub fn support_sets(graph: &KnnGraph, beta: &CoefMatrix, eps: f64) -> Vec<Vec<usize>> {
    beta.columns()
        .map(|c| {
            graph
                .edges()
                .iter()
                .enumerate()
                .filter(|&(_, &(a, b))| (c[a] - c[b]).abs() > eps)
                .map(|(m, _)| m)
                .collect()
        })
        .collect()
}

/// Stationarity residual of the averaged objective at `beta`.
///
/// Searches jointly for per-sample loss subgradients `v_i in [tau_i - 1, tau_i]`
/// and edge multipliers `|w| <= 1` (equal to the sign on nonzero differences)
/// minimizing `max_ij |-(1/n) v_i x_ij + lambda (H' w_j)_i|`, and returns that
/// minimum. Samples with `|r_i| <= zero_tol` count as interpolated and edges
/// with `|(H beta_j)_m| <= zero_tol` as fused. The search is a small linear
/// program, so this is meant for small instances only.
pub fn kkt_residual(
    dataset: &Dataset,
    graph: &KnnGraph,
    beta: &CoefMatrix,
    lambda: f64,
    zero_tol: f64,
) -> Result<f64> {
    use crate::oracle::{DenseLp, LP_MAX_VARS};
    use crate::quantile_loss::residuals;

    let (n, p) = (dataset.n(), dataset.p);
    let r = residuals(dataset, beta)?;
    let nf = n as f64;
    let n_edges = graph.n_edges();

    // incidence columns: (H' e_m)_i
    let mut incidence: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_edges];
    let mut unit = vec![0.0; n_edges];
    for m in 0..n_edges {
        unit[m] = 1.0;
        let col = graph.apply_ht(&unit)?;
        unit[m] = 0.0;
        incidence[m] = col.iter().enumerate().filter(|(_, &h)| h != 0.0).map(|(i, &h)| (i, h)).collect();
    }

    // variable layout: free v offsets, fused w offsets, then s
    let mut base = vec![vec![0.0; n]; p]; // constant part of each residual
    let mut terms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n * p]; // (var, coef) per (j, i)
    let mut upper = Vec::new();
    for i in 0..n {
        let (lo, fixed) = if r[i] > zero_tol {
            (dataset.tau[i], true)
        } else if r[i] < -zero_tol {
            (dataset.tau[i] - 1.0, true)
        } else {
            (dataset.tau[i] - 1.0, false)
        };
        let var = upper.len();
        if !fixed {
            upper.push(1.0);
        }
        for j in 0..p {
            let x = dataset.x(i, j);
            base[j][i] -= lo * x / nf;
            if !fixed && x != 0.0 {
                terms[j * n + i].push((var, -x / nf));
            }
        }
    }
    if lambda != 0.0 {
        for j in 0..p {
            let diffs = graph.apply_h(beta.col(j))?;
            for (m, &d) in diffs.iter().enumerate() {
                if d.abs() > zero_tol {
                    for &(i, h) in &incidence[m] {
                        base[j][i] += lambda * d.signum() * h;
                    }
                } else {
                    // w = c - 1 with c in [0, 2]
                    let var = upper.len();
                    upper.push(2.0);
                    for &(i, h) in &incidence[m] {
                        base[j][i] -= lambda * h;
                        terms[j * n + i].push((var, lambda * h));
                    }
                }
            }
        }
    }

    let n_box = upper.len();
    let s = n_box;
    let rows = 2 * n * p + n_box;
    let vars = n_box + 1 + rows;
    if vars > LP_MAX_VARS {
        return Err(Error::LpTooLarge { vars, limit: LP_MAX_VARS });
    }
    let mut a = vec![vec![0.0; vars]; rows];
    let mut b = vec![0.0; rows];
    let mut row = 0;
    for j in 0..p {
        for i in 0..n {
            for sign in [1.0, -1.0] {
                // sign * (base + terms) - s + slack = 0
                for &(var, coef) in &terms[j * n + i] {
                    a[row][var] += sign * coef;
                }
                a[row][s] = -1.0;
                a[row][n_box + 1 + row] = 1.0;
                b[row] = -sign * base[j][i];
                row += 1;
            }
        }
    }
    for (var, &ub) in upper.iter().enumerate() {
        a[row][var] = 1.0;
        a[row][n_box + 1 + row] = 1.0;
        b[row] = ub;
        row += 1;
    }
    let mut c = vec![0.0; vars];
    c[s] = 1.0;
    let sol = DenseLp { a, b, c }.solve()?;
    Ok(sol.value.max(0.0))
}
