//! Penalty path with warm starts and BIC selection of `lambda`.

use crate::admm::{fit_warm, FitResult};
use crate::data_model::{CoefMatrix, Dataset, SolverConfig};
use crate::error::{invalid, Result};
use crate::knn_graph::KnnGraph;
use crate::quantile_loss::total_check_loss;

/// Floor applied to the total check loss inside the logarithm.
pub const LOSS_FLOOR: f64 = 1e-10;

pub const DEFAULT_N_LAMBDA: usize = 30;
pub const DEFAULT_LAMBDA_MIN_RATIO: f64 = 1e-3;

/// Doubling steps allowed while searching for the fully fusing `lambda`.
const MAX_DOUBLINGS: usize = 60;

/// `log(max(sum_i rho, floor)) + (log n / n) * #{nonzero fused differences}`.
///
/// Differences count as nonzero when they exceed `fuse_eps` in magnitude.
pub fn bic(dataset: &Dataset, beta: &CoefMatrix, graph: &KnnGraph, fuse_eps: f64) -> Result<f64> {
    let loss = total_check_loss(dataset, beta)?;
    let nf = dataset.n() as f64;
    let support: usize = beta
        .columns()
        .map(|c| graph.count_nonzero_diffs(c, fuse_eps))
        .sum();
    Ok(loss.max(LOSS_FLOOR).ln() + nf.ln() / nf * support as f64)
}

/// Fits along a descending `lambda` grid.
#[derive(Debug, Clone)]
pub struct PathResult {
    pub lambdas: Vec<f64>,
    pub fits: Vec<FitResult>,
    pub bics: Vec<f64>,
    /// Index of the smallest BIC (first one on ties).
    pub selected: usize,
}

impl PathResult {
    pub fn best(&self) -> &FitResult {
        &self.fits[self.selected]
    }
}

fn fully_fused(fit: &FitResult) -> bool {
    fit.support_total() == 0
}

/// Smallest power-of-two multiple of a starting guess that fuses every
/// coefficient, refined downward by halving. Returns the `lambda` and its fit.
fn find_lambda_max(dataset: &Dataset, graph: &KnnGraph, config: &SolverConfig) -> Result<FitResult> {
    let n = dataset.n() as f64;
    let start = (0..dataset.p)
        .map(|j| (0..dataset.n()).map(|i| dataset.x(i, j).abs()).sum::<f64>() / n)
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE.sqrt());

    let run = |lambda: f64, warm: Option<&FitResult>| {
        let cfg = SolverConfig {
            lambda,
            ..config.clone()
        };
        fit_warm(dataset, graph, &cfg, warm.map(|f| &f.state))
    };

    let mut fused = run(start, None)?;
    let mut doublings = 0;
    while !fully_fused(&fused) {
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(invalid("lambda", "no finite penalty fuses every coefficient"));
        }
        let next = run(fused.lambda * 2.0, Some(&fused))?;
        fused = next;
    }
    loop {
        let half = run(fused.lambda / 2.0, Some(&fused))?;
        if !fully_fused(&half) {
            return Ok(fused);
        }
        fused = half;
    }
}

/// Fits `n_lambda` log-spaced penalties from the smallest fully fusing value
/// down to `lambda_min_ratio` times it, warm-starting each fit from the
/// previous one, and selects the BIC minimizer.
///
/// Fits that hit the iteration cap stay in the path with `converged = false`.
pub fn lambda_path(
    dataset: &Dataset,
    graph: &KnnGraph,
    config: &SolverConfig,
    n_lambda: usize,
    lambda_min_ratio: f64,
) -> Result<PathResult> {
    if n_lambda < 2 {
        return Err(invalid("n_lambda", "need at least 2 penalties"));
    }
    if !(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0) {
        return Err(invalid("lambda_min_ratio", format!("{lambda_min_ratio} is not in (0, 1)")));
    }
    config.validate(dataset.n())?;

    let top = find_lambda_max(dataset, graph, config)?;
    let lambda_max = top.lambda;
    let lambdas: Vec<f64> = (0..n_lambda)
        .map(|k| lambda_max * lambda_min_ratio.powf(k as f64 / (n_lambda - 1) as f64))
        .collect();

    let mut fits: Vec<FitResult> = Vec::with_capacity(n_lambda);
    let mut bics = Vec::with_capacity(n_lambda);
    for (k, &lambda) in lambdas.iter().enumerate() {
        let fit = if k == 0 {
            top.clone()
        } else {
            let cfg = SolverConfig {
                lambda,
                ..config.clone()
            };
            fit_warm(dataset, graph, &cfg, Some(&fits[k - 1].state))?
        };
        bics.push(bic(dataset, &fit.beta_hat, graph, fit.fuse_eps)?);
        fits.push(fit);
    }
    let selected = argmin(&bics);
    Ok(PathResult {
        lambdas,
        fits,
        bics,
        selected,
    })
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &b) in v.iter().enumerate() {
        if b < v[best] {
            best = i;
        }
    }
    best
}

/// Number of fused clusters per covariate: connected components of the graph
/// after dropping edges whose difference exceeds `eps`.
pub fn cluster_counts(graph: &KnnGraph, beta: &CoefMatrix, eps: f64) -> Vec<usize> {
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    beta.columns()
        .map(|col| {
            let mut parent: Vec<usize> = (0..col.len()).collect();
            let mut clusters = col.len();
            for &(a, b) in graph.edges() {
                if (col[a] - col[b]).abs() <= eps {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    if ra != rb {
                        parent[ra] = rb;
                        clusters -= 1;
                    }
                }
            }
            clusters
        })
        .collect()
}
