//! Evaluation against known coefficient surfaces: MSE, pairwise cluster
//! recovery (precision, recall, TNR, NPV) and grid mean squared difference.
//!
//! Pair metrics are defined over all unordered sample pairs `(i, i')`. A pair
//! is *separated* in the truth when the true values differ exactly, and
//! separated in the estimate when the estimated values differ by more than
//! `zero_eps`. The pairs are never materialized; counts come from sorting.

use rayon::prelude::*;

use crate::data_model::CoefMatrix;
use crate::error::{invalid, Error, Result};
use crate::predict::CoefGrid;

/// `(1/n) sum_i sum_j (est_ij - truth_ij)^2`.
pub fn mse(est: &CoefMatrix, truth: &CoefMatrix) -> Result<f64> {
    truth.check_shape(est.n(), est.p())?;
    if est.n() == 0 {
        return Err(invalid("est", "no samples"));
    }
    let ss: f64 = est
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(ss / est.n() as f64)
}

/// Pair counts behind [`PairConfusion`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    pub total: u64,
    /// Pairs separated in the truth.
    pub truth_separated: u64,
    /// Pairs separated in the estimate.
    pub est_separated: u64,
    /// Pairs separated in both.
    pub both_separated: u64,
    /// Pairs joined in both.
    pub both_joined: u64,
}

/// Cluster recovery rates; `None` where the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairConfusion {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub tnr: Option<f64>,
    pub npv: Option<f64>,
    pub counts: PairCounts,
}

impl PairConfusion {
    fn from_counts(c: PairCounts) -> Self {
        let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        PairConfusion {
            precision: ratio(c.both_separated, c.est_separated),
            recall: ratio(c.both_separated, c.truth_separated),
            tnr: ratio(c.both_joined, c.total - c.truth_separated),
            npv: ratio(c.both_joined, c.total - c.est_separated),
            counts: c,
        }
    }

    /// Four `0`/`1` digits for precision, recall, tnr, npv.
    pub fn defined_flags(&self) -> String {
        [self.precision, self.recall, self.tnr, self.npv]
            .iter()
            .map(|v| if v.is_some() { '1' } else { '0' })
            .collect()
    }
}

fn pairs(m: u64) -> u64 {
    m * m.saturating_sub(1) / 2
}

/// Pairs of a sorted slice whose values lie within `eps` of each other.
fn close_pairs(sorted: &[f64], eps: f64) -> u64 {
    let mut count = 0u64;
    let mut lo = 0;
    for hi in 0..sorted.len() {
        while sorted[hi] - sorted[lo] > eps {
            lo += 1;
        }
        count += (hi - lo) as u64;
    }
    count
}

/// Pairwise cluster confusion of one covariate. Truth values are compared
/// exactly; estimates are joined when `|a - b| <= zero_eps`.
pub fn pair_confusion(est: &[f64], truth: &[f64], zero_eps: f64) -> Result<PairConfusion> {
    if est.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            field: "truth column",
            expected: est.len(),
            found: truth.len(),
        });
    }
    if !(zero_eps >= 0.0) {
        return Err(invalid("zero_eps", "must be nonnegative"));
    }
    if let Some(i) = est.iter().chain(truth).position(|v| !v.is_finite()) {
        let (field, row) = if i < est.len() { ("est", i) } else { ("truth", i - est.len()) };
        return Err(Error::NonFinite { field, row: row + 1, col: 1 });
    }

    let n = est.len() as u64;
    let mut by_truth: Vec<(f64, f64)> = truth.iter().copied().zip(est.iter().copied()).collect();
    by_truth.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mut truth_joined = 0u64;
    let mut both_joined = 0u64;
    let mut start = 0;
    let mut group_est = Vec::new();
    while start < by_truth.len() {
        let mut end = start + 1;
        while end < by_truth.len() && by_truth[end].0 == by_truth[start].0 {
            end += 1;
        }
        truth_joined += pairs((end - start) as u64);
        group_est.clear();
        group_est.extend(by_truth[start..end].iter().map(|p| p.1));
        // -0.0 and 0.0 sort apart but compare equal, so re-sort the group
        group_est.sort_by(f64::total_cmp);
        both_joined += close_pairs(&group_est, zero_eps);
        start = end;
    }

    let mut sorted_est = est.to_vec();
    sorted_est.sort_by(f64::total_cmp);
    let est_joined = close_pairs(&sorted_est, zero_eps);

    let total = pairs(n);
    let truth_separated = total - truth_joined;
    let est_separated = total - est_joined;
    // inclusion-exclusion over the joined sets
    let both_separated = total + both_joined - truth_joined - est_joined;
    Ok(PairConfusion::from_counts(PairCounts {
        total,
        truth_separated,
        est_separated,
        both_separated,
        both_joined,
    }))
}

/// [`pair_confusion`] for every covariate, in parallel.
pub fn pair_confusion_all(est: &CoefMatrix, truth: &CoefMatrix, zero_eps: f64) -> Result<Vec<PairConfusion>> {
    truth.check_shape(est.n(), est.p())?;
    (0..est.p())
        .into_par_iter()
        .map(|j| pair_confusion(est.col(j), truth.col(j), zero_eps))
        .collect()
}

/// Mean squared difference between two coefficient grids over all cells and
/// covariates.
pub fn msd(a: &CoefGrid, b: &CoefGrid) -> Result<f64> {
    if a.t_grid != b.t_grid || a.tau_grid != b.tau_grid || a.p != b.p || a.values.len() != b.values.len() {
        return Err(invalid("grid", "grids differ in points or covariate count"));
    }
    if a.values.is_empty() {
        return Err(invalid("grid", "grid is empty"));
    }
    let ss: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(ss / a.values.len() as f64)
}
