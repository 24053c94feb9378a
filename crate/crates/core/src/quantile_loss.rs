//! Check loss and the penalized objective.

use crate::data_model::{CoefMatrix, Dataset};
use crate::error::{invalid, Result};
use crate::knn_graph::KnnGraph;

/// Objective split into its data-fit and penalty parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    /// `(1/n) sum_i rho_tau_i(r_i)`
    pub loss: f64,
    /// `lambda * sum_j ||H beta_j||_1`
    pub penalty: f64,
    pub total: f64,
}

/// `rho_tau(u) = u * (tau - 1{u < 0})`.
pub fn check_loss(u: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(invalid("tau", format!("{tau} is outside (0, 1)")));
    }
    Ok(rho(u, tau))
}

#[inline]
pub(crate) fn rho(u: f64, tau: f64) -> f64 {
    if u >= 0.0 {
        tau * u
    } else {
        (tau - 1.0) * u
    }
}

/// Residuals `y_i - x_i' beta^i`.
pub fn residuals(dataset: &Dataset, beta: &CoefMatrix) -> Result<Vec<f64>> {
    beta.check_shape(dataset.n(), dataset.p)?;
    Ok((0..dataset.n())
        .map(|i| {
            let fitted: f64 = dataset
                .row(i)
                .iter()
                .enumerate()
                .map(|(j, &x)| x * beta.get(i, j))
                .sum();
            dataset.y[i] - fitted
        })
        .collect())
}

/// Unaveraged check loss `sum_i rho_tau_i(r_i)`.
pub fn total_check_loss(dataset: &Dataset, beta: &CoefMatrix) -> Result<f64> {
    let r = residuals(dataset, beta)?;
    Ok(r.iter().zip(&dataset.tau).map(|(&u, &tau)| rho(u, tau)).sum())
}

/// Penalized objective at `beta`.
pub fn objective(
    dataset: &Dataset,
    beta: &CoefMatrix,
    graph: &KnnGraph,
    lambda: f64,
) -> Result<ObjectiveValue> {
    if graph.n_nodes() != dataset.n() {
        return Err(crate::error::Error::DimensionMismatch {
            field: "graph nodes",
            expected: dataset.n(),
            found: graph.n_nodes(),
        });
    }
    if !(lambda >= 0.0) {
        return Err(invalid("lambda", "must be nonnegative"));
    }
    let loss = total_check_loss(dataset, beta)? / dataset.n() as f64;
    let penalty = if lambda == 0.0 {
        0.0
    } else {
        lambda * beta.columns().map(|c| graph.l1_diff(c)).sum::<f64>()
    };
    Ok(ObjectiveValue {
        loss,
        penalty,
        total: loss + penalty,
    })
}
