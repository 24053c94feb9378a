//! Sample containers, coefficient matrices and solver configuration.

use crate::error::{invalid, Error, Result};

/// Default quantile interval used when the data do not say otherwise.
pub const DEFAULT_DELTA: (f64, f64) = (0.05, 0.95);

/// Observations `(y_i, x_i, t_i, tau_i)` for `i = 1..n`.
///
/// `x` is stored row-major: sample `i` occupies `x[i * p..(i + 1) * p]`.
/// `delta` is the quantile interval the levels were drawn from. It is
/// metadata only; fitting requires `tau_i` in `(0, 1)` and nothing more.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub p: usize,
    pub t: Vec<f64>,
    pub tau: Vec<f64>,
    pub delta: (f64, f64),
}

impl Dataset {
    /// Builds and validates a dataset with the default quantile interval.
    pub fn new(y: Vec<f64>, x: Vec<f64>, p: usize, t: Vec<f64>, tau: Vec<f64>) -> Result<Self> {
        let ds = Dataset {
            y,
            x,
            p,
            t,
            tau,
            delta: DEFAULT_DELTA,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn x(&self, i: usize, j: usize) -> f64 {
        self.x[i * self.p + j]
    }

    /// The graph nodes `(t_i, tau_i)`.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.t.iter().copied().zip(self.tau.iter().copied()).collect()
    }

    /// Checks every structural and range invariant. Idempotent, no side effects.
    pub fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if n == 0 {
            return Err(Error::DimensionMismatch {
                field: "y",
                expected: 1,
                found: 0,
            });
        }
        if self.p == 0 {
            return Err(invalid("p", "at least one covariate column is required"));
        }
        if self.x.len() != n * self.p {
            return Err(Error::DimensionMismatch {
                field: "x",
                expected: n * self.p,
                found: self.x.len(),
            });
        }
        for (field, v) in [("t", &self.t), ("tau", &self.tau)] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    field,
                    expected: n,
                    found: v.len(),
                });
            }
        }
        for (i, &v) in self.y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    field: "y",
                    row: i + 1,
                    col: 1,
                });
            }
        }
        for (k, &v) in self.x.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    field: "x",
                    row: k / self.p + 1,
                    col: k % self.p + 1,
                });
            }
        }
        for (i, &v) in self.t.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    field: "t",
                    row: i + 1,
                    col: 1,
                });
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange {
                    field: "t",
                    index: i + 1,
                    value: v,
                    expected: "[0, 1]",
                });
            }
        }
        for (i, &v) in self.tau.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    field: "tau",
                    row: i + 1,
                    col: 1,
                });
            }
            if v <= 0.0 || v >= 1.0 {
                return Err(Error::OutOfRange {
                    field: "tau",
                    index: i + 1,
                    value: v,
                    expected: "(0, 1)",
                });
            }
        }
        let (lo, hi) = self.delta;
        if !(lo > 0.0 && lo < hi && hi < 1.0) {
            return Err(invalid(
                "delta",
                format!("quantile interval ({lo}, {hi}) must satisfy 0 < lo < hi < 1"),
            ));
        }
        Ok(())
    }

    /// Columns that look continuous: more than two distinct values.
    /// Intercepts and 0/1 indicators are left out.
    pub fn continuous_columns(&self) -> Vec<usize> {
        (0..self.p)
            .filter(|&j| {
                let mut seen: Vec<f64> = Vec::with_capacity(3);
                for i in 0..self.n() {
                    let v = self.x(i, j);
                    if !seen.contains(&v) {
                        seen.push(v);
                        if seen.len() > 2 {
                            return true;
                        }
                    }
                }
                false
            })
            .collect()
    }

    /// Returns a copy with the given columns centered and scaled to unit
    /// sample standard deviation, plus the `(mean, sd)` used for each.
    pub fn standardized(&self, columns: &[usize]) -> Result<(Dataset, Vec<(f64, f64)>)> {
        let n = self.n();
        if n < 2 {
            return Err(invalid("standardize", "need at least two samples"));
        }
        let mut out = self.clone();
        let mut stats = Vec::with_capacity(columns.len());
        for &j in columns {
            if j >= self.p {
                return Err(invalid("standardize", format!("column {} out of range", j + 1)));
            }
            let mean = (0..n).map(|i| self.x(i, j)).sum::<f64>() / n as f64;
            let var = (0..n)
                .map(|i| (self.x(i, j) - mean).powi(2))
                .sum::<f64>()
                / (n - 1) as f64;
            let sd = var.sqrt();
            if sd == 0.0 || !sd.is_finite() {
                return Err(invalid(
                    "standardize",
                    format!("column {} has zero variance", j + 1),
                ));
            }
            for i in 0..n {
                out.x[i * self.p + j] = (self.x(i, j) - mean) / sd;
            }
            stats.push((mean, sd));
        }
        Ok((out, stats))
    }
}

/// Per-sample coefficients: entry `(i, j)` is `beta_j(t_i, tau_i)`.
///
/// Stored column-major so each covariate's node vector `beta_j` is a
/// contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl CoefMatrix {
    pub fn zeros(n: usize, p: usize) -> Self {
        CoefMatrix {
            n,
            p,
            data: vec![0.0; n * p],
        }
    }

    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let p = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * p);
        for (j, c) in columns.into_iter().enumerate() {
            if c.len() != n {
                return Err(Error::DimensionMismatch {
                    field: "beta column",
                    expected: n,
                    found: c.len(),
                });
            }
            if let Some(i) = c.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    field: "beta",
                    row: i + 1,
                    col: j + 1,
                });
            }
            data.extend(c);
        }
        Ok(CoefMatrix { n, p, data })
    }

    /// Builds a matrix by evaluating `f(i, j)` for every entry.
    pub fn from_fn(n: usize, p: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * p);
        for j in 0..p {
            for i in 0..n {
                data.push(f(i, j));
            }
        }
        CoefMatrix { n, p, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.n + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.n + i] = v;
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n.max(1)).take(self.p)
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.p).map(|j| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_shape(&self, n: usize, p: usize) -> Result<()> {
        if self.n != n {
            return Err(Error::DimensionMismatch {
                field: "beta rows",
                expected: n,
                found: self.n,
            });
        }
        if self.p != p {
            return Err(Error::DimensionMismatch {
                field: "beta columns",
                expected: p,
                found: self.p,
            });
        }
        Ok(())
    }
}

/// Settings for a single ADMM fit.
///
/// `tol_primal` and `tol_dual` are relative: the stopping thresholds are
/// `tol * (1 + max|y|)`. `fuse_eps` is relative to `1 + max|beta_hat|`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    pub k: usize,
    pub eta: f64,
    pub max_iter: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub fuse_eps: f64,
    /// Relative optimality tolerance of the fused prox cut test.
    pub prox_tol: f64,
    /// Residual balancing of `eta` (off by default).
    pub balance_eta: bool,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 0.0,
            k: 5,
            eta: 1.0,
            max_iter: 10_000,
            tol_primal: 1e-4,
            tol_dual: 1e-4,
            fuse_eps: 1e-6,
            prox_tol: 1e-8,
            balance_eta: false,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        SolverConfig {
            lambda,
            ..Default::default()
        }
    }

    /// Checks parameter ranges against a problem of `n` samples.
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid("lambda", format!("{} is not a finite nonnegative number", self.lambda)));
        }
        if self.k == 0 {
            return Err(invalid("k", "must be positive"));
        }
        if self.k >= n {
            return Err(Error::NeighborCount { k: self.k, n });
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(invalid("eta", format!("{} is not positive", self.eta)));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "must be positive"));
        }
        for (name, v) in [
            ("tol_primal", self.tol_primal),
            ("tol_dual", self.tol_dual),
            ("fuse_eps", self.fuse_eps),
            ("prox_tol", self.prox_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("{v} is not positive")));
            }
        }
        Ok(())
    }

    /// Absolute stopping threshold for the primal residual on data `y`.
    pub fn primal_threshold(&self, y: &[f64]) -> f64 {
        self.tol_primal * (1.0 + max_abs(y))
    }

    pub fn dual_threshold(&self, y: &[f64]) -> f64 {
        self.tol_dual * (1.0 + max_abs(y))
    }

    /// Absolute threshold below which a fused difference counts as zero.
    pub fn fuse_threshold(&self, beta: &CoefMatrix) -> f64 {
        self.fuse_eps * (1.0 + beta.max_abs())
    }
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
