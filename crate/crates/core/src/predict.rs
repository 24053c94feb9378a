//! Coefficient and quantile prediction at new `(t, tau)` points by averaging
//! the fitted coefficients of the `K` nearest training points.

use rayon::prelude::*;

use crate::data_model::CoefMatrix;
use crate::error::{invalid, Error, Result};
use crate::knn_graph::nearest_neighbors;

/// Fitted coefficient surfaces evaluated on a rectangular `(t, tau)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefGrid {
    pub t_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
    pub p: usize,
    /// Flattened `[k][l][j]`, `j` fastest.
    pub values: Vec<f64>,
}

impl CoefGrid {
    pub fn get(&self, k: usize, l: usize, j: usize) -> f64 {
        self.values[(k * self.tau_grid.len() + l) * self.p + j]
    }

    /// Number of grid cells (not counting covariates).
    pub fn cells(&self) -> usize {
        self.t_grid.len() * self.tau_grid.len()
    }

    /// Builds a grid by evaluating `f(t, tau)` at every cell; `f` must return
    /// `p` values.
    pub fn from_fn(
        t_grid: Vec<f64>,
        tau_grid: Vec<f64>,
        p: usize,
        f: impl Fn(f64, f64) -> Vec<f64> + Sync,
    ) -> Result<CoefGrid> {
        check_grid("t_grid", &t_grid)?;
        check_grid("tau_grid", &tau_grid)?;
        let nl = tau_grid.len();
        let cells: Vec<Vec<f64>> = (0..t_grid.len() * nl)
            .into_par_iter()
            .map(|c| f(t_grid[c / nl], tau_grid[c % nl]))
            .collect();
        let mut values = Vec::with_capacity(cells.len() * p);
        for cell in cells {
            if cell.len() != p {
                return Err(Error::DimensionMismatch {
                    field: "grid cell",
                    expected: p,
                    found: cell.len(),
                });
            }
            values.extend(cell);
        }
        Ok(CoefGrid {
            t_grid,
            tau_grid,
            p,
            values,
        })
    }

    /// Mean of the squared entries.
    pub fn mean_square(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64
    }
}

fn check_grid(name: &'static str, g: &[f64]) -> Result<()> {
    if g.is_empty() {
        return Err(invalid(name, "grid is empty"));
    }
    if g.iter().any(|v| !v.is_finite()) || g.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid(name, "grid must be finite and strictly increasing"));
    }
    Ok(())
}

/// `t_k = k / t_steps` for `k = 1..=t_steps`.
pub fn t_grid(t_steps: usize) -> Vec<f64> {
    (1..=t_steps).map(|k| k as f64 / t_steps as f64).collect()
}

/// `tau_l = lo + l (hi - lo) / tau_steps` for `l = 1..=tau_steps`.
pub fn tau_grid(lo: f64, hi: f64, tau_steps: usize) -> Vec<f64> {
    (1..=tau_steps)
        .map(|l| lo + (hi - lo) * l as f64 / tau_steps as f64)
        .collect()
}

/// The 100 x 90 evaluation grid `t = 0.01, ..., 1.00`, `tau = 0.06, ..., 0.95`.
pub fn default_grid() -> (Vec<f64>, Vec<f64>) {
    (t_grid(100), tau_grid(0.05, 0.95, 90))
}

fn check_inputs(beta: &CoefMatrix, train_points: &[(f64, f64)], k: usize) -> Result<()> {
    if train_points.is_empty() {
        return Err(invalid("train_points", "training set is empty"));
    }
    beta.check_shape(train_points.len(), beta.p())?;
    if k == 0 || k > train_points.len() {
        return Err(Error::NeighborCount {
            k,
            n: train_points.len(),
        });
    }
    Ok(())
}

fn average_rows(beta: &CoefMatrix, rows: &[usize]) -> Vec<f64> {
    let inv = 1.0 / rows.len() as f64;
    (0..beta.p())
        .map(|j| {
            let col = beta.col(j);
            rows.iter().map(|&i| col[i]).sum::<f64>() * inv
        })
        .collect()
}

/// Mean coefficient row over the `k` training points nearest to `query`,
/// using the metric and tie-break of the training graph.
pub fn predict_coef(
    beta: &CoefMatrix,
    train_points: &[(f64, f64)],
    query: (f64, f64),
    k: usize,
) -> Result<Vec<f64>> {
    check_inputs(beta, train_points, k)?;
    if !(query.0.is_finite() && query.1.is_finite()) {
        return Err(invalid("query", "point is not finite"));
    }
    let nbrs = nearest_neighbors(train_points, query, k, (1.0, 1.0), None);
    Ok(average_rows(beta, &nbrs))
}

/// Predicted conditional quantile `x' beta(t, tau)`.
pub fn predict_quantile(
    beta: &CoefMatrix,
    train_points: &[(f64, f64)],
    x: &[f64],
    query: (f64, f64),
    k: usize,
) -> Result<f64> {
    if x.len() != beta.p() {
        return Err(Error::DimensionMismatch {
            field: "x",
            expected: beta.p(),
            found: x.len(),
        });
    }
    let coef = predict_coef(beta, train_points, query, k)?;
    Ok(x.iter().zip(&coef).map(|(a, b)| a * b).sum())
}

/// Predicted coefficients on every cell of `t_grid x tau_grid`.
pub fn eval_grid(
    beta: &CoefMatrix,
    train_points: &[(f64, f64)],
    t_grid: &[f64],
    tau_grid: &[f64],
    k: usize,
) -> Result<CoefGrid> {
    check_inputs(beta, train_points, k)?;
    CoefGrid::from_fn(t_grid.to_vec(), tau_grid.to_vec(), beta.p(), |t, tau| {
        let nbrs = nearest_neighbors(train_points, (t, tau), k, (1.0, 1.0), None);
        average_rows(beta, &nbrs)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn three() -> (CoefMatrix, Vec<(f64, f64)>) {
        let beta = CoefMatrix::from_columns(vec![vec![1.0, 3.0, 100.0], vec![0.0, -2.0, 4.0]]).unwrap();
        (beta, vec![(0.1, 0.1), (0.2, 0.1), (0.9, 0.9)])
    }

    #[test]
    fn nearest_self_with_k1() {
        let (beta, pts) = three();
        assert_eq!(predict_coef(&beta, &pts, (0.2, 0.1), 1).unwrap(), vec![3.0, -2.0]);
    }

    #[test]
    fn k_equal_n_gives_column_means() {
        let (beta, pts) = three();
        let c = predict_coef(&beta, &pts, (0.5, 0.5), 3).unwrap();
        assert!((c[0] - 104.0 / 3.0).abs() < 1e-12);
        assert!((c[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn hand_picked_neighbors() {
        let (beta, pts) = three();
        let c = predict_coef(&beta, &pts, (0.15, 0.12), 2).unwrap();
        assert_eq!(c[0], 2.0);
    }

    #[test]
    fn quantile_is_dot_product() {
        let beta = CoefMatrix::from_columns(vec![vec![1.0, 2.0]]).unwrap();
        let pts = vec![(0.1, 0.5), (0.2, 0.5)];
        assert_eq!(predict_quantile(&beta, &pts, &[2.0], (0.15, 0.5), 2).unwrap(), 3.0);
        assert_eq!(predict_quantile(&beta, &pts, &[0.0], (0.15, 0.5), 2).unwrap(), 0.0);
        assert!(predict_quantile(&beta, &pts, &[1.0, 1.0], (0.15, 0.5), 2).is_err());
        let (b3, p3) = three();
        let e2 = predict_quantile(&b3, &p3, &[0.0, 1.0], (0.15, 0.12), 2).unwrap();
        assert_eq!(e2, predict_coef(&b3, &p3, (0.15, 0.12), 2).unwrap()[1]);
    }

    #[test]
    fn bad_inputs() {
        let (beta, pts) = three();
        assert!(predict_coef(&beta, &[], (0.1, 0.1), 1).is_err());
        assert!(predict_coef(&beta, &pts, (0.1, 0.1), 4).is_err());
        assert!(predict_coef(&beta, &pts, (f64::NAN, 0.1), 1).is_err());
        assert!(eval_grid(&beta, &pts, &[], &[0.5], 1).is_err());
        assert!(eval_grid(&beta, &pts, &[0.5, 0.4], &[0.5], 1).is_err());
    }

    #[test]
    fn grid_layout() {
        let (beta, pts) = three();
        let one = eval_grid(&beta, &pts, &[0.15], &[0.12], 2).unwrap();
        assert_eq!(one.values, predict_coef(&beta, &pts, (0.15, 0.12), 2).unwrap());

        let g = eval_grid(&beta, &pts, &[0.1, 0.9], &[0.1, 0.5, 0.9], 1).unwrap();
        assert_eq!(g.values.len(), 2 * 3 * 2);
        for (k, &t) in g.t_grid.iter().enumerate() {
            for (l, &tau) in g.tau_grid.iter().enumerate() {
                let c = predict_coef(&beta, &pts, (t, tau), 1).unwrap();
                assert_eq!(g.get(k, l, 0), c[0]);
                assert_eq!(g.get(k, l, 1), c[1]);
            }
        }
    }

    #[test]
    fn default_grid_shape() {
        let (t, tau) = default_grid();
        assert_eq!((t.len(), tau.len()), (100, 90));
        assert!((t[0] - 0.01).abs() < 1e-15 && t[99] == 1.0);
        assert!((tau[0] - 0.06).abs() < 1e-12 && (tau[89] - 0.95).abs() < 1e-12);
        let beta = CoefMatrix::from_fn(4, 2, |_, j| j as f64 + 0.5);
        let pts = vec![(0.1, 0.1), (0.4, 0.6), (0.7, 0.2), (0.9, 0.9)];
        let g = eval_grid(&beta, &pts, &t, &tau, 3).unwrap();
        assert_eq!(g.values.len(), 9000 * 2);
        assert!(g.values.chunks(2).all(|c| c == [0.5, 1.5]));
    }

    proptest! {
        #[test]
        fn prediction_inside_neighbor_hull(
            vals in prop::collection::vec(-10.0f64..10.0, 12),
            coords in prop::collection::vec(0.0f64..1.0, 24),
            q in (0.0f64..1.0, 0.0f64..1.0),
            k in 1usize..12,
        ) {
            let pts: Vec<(f64, f64)> = coords.chunks(2).map(|c| (c[0], c[1])).collect();
            let beta = CoefMatrix::from_columns(vec![vals.clone()]).unwrap();
            let c = predict_coef(&beta, &pts, q, k).unwrap()[0];
            let nbrs = nearest_neighbors(&pts, q, k, (1.0, 1.0), None);
            let lo = nbrs.iter().map(|&i| vals[i]).fold(f64::INFINITY, f64::min);
            let hi = nbrs.iter().map(|&i| vals[i]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(c >= lo - 1e-12 && c <= hi + 1e-12);
        }
    }
}
