//! Synthetic varying random-coefficient model with known quantile
//! coefficient surfaces.
//!
//! Covariate 1 is a constant intercept. The response is driven by a latent
//! `U ~ uniform(0, 1)` that enters every random coefficient monotonically,
//! so the conditional `tau`-quantile of `y` is `sum_j x_j beta_j(t, tau)`
//! with the surfaces returned by [`true_coef`].

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};

use crate::data_model::{CoefMatrix, Dataset, DEFAULT_DELTA};
use crate::error::{invalid, Error, Result};

/// Smallest number of columns: the seven active coefficients plus two nulls.
pub const MIN_COLUMNS: usize = 9;

/// How quantile levels are attached to observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuantileMode {
    /// `tau_i ~ uniform(lo, hi)`, independent of everything else.
    Random { lo: f64, hi: f64 },
    /// Every observation is replicated across `tau = 0.05, 0.10, ..., 0.95`.
    Grid19,
}

impl Default for QuantileMode {
    fn default() -> Self {
        QuantileMode::Random {
            lo: DEFAULT_DELTA.0,
            hi: DEFAULT_DELTA.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    /// Number of independent observations (before grid replication).
    pub n: usize,
    /// Number of covariate columns, intercept included.
    pub d: usize,
    pub seed: u64,
    pub mode: QuantileMode,
}

impl SimSpec {
    pub fn new(n: usize, d: usize, seed: u64) -> Self {
        SimSpec {
            n,
            d,
            seed,
            mode: QuantileMode::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        if self.d < MIN_COLUMNS {
            return Err(invalid("d", format!("{} is below the minimum of {MIN_COLUMNS}", self.d)));
        }
        if let QuantileMode::Random { lo, hi } = self.mode {
            if !(0.0 < lo && lo < hi && hi < 1.0) {
                return Err(invalid("quantile interval", format!("({lo}, {hi}) is not inside (0, 1)")));
            }
        }
        Ok(())
    }
}

/// The 19 quantile levels of [`QuantileMode::Grid19`].
pub fn grid19() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).collect()
}

/// True coefficient surface `beta_j(t, tau)`, with `j` counted from 1.
pub fn true_coef(j: usize, d: usize, t: f64, tau: f64) -> Result<f64> {
    if j == 0 || j > d {
        return Err(Error::OutOfRange {
            field: "coefficient index",
            index: j,
            value: j as f64,
            expected: "1..=d",
        });
    }
    Ok(coef(j, t, tau))
}

fn coef(j: usize, t: f64, tau: f64) -> f64 {
    match j {
        1 => 1.0,
        2 => -7.0,
        3 => 10.0 + 2.0 * (2.0 * PI * t).sin(),
        4 => 3.0 + 2.0 * tau,
        5 => step(tau),
        6 => step(t),
        7 => 3.0 * t + 3.0 * tau,
        _ => 0.0,
    }
}

fn step(v: f64) -> f64 {
    if v > 0.5 {
        5.0
    } else {
        0.0
    }
}

/// Draws a dataset and the matching truth matrix. The result is a pure
/// function of `spec`.
pub fn generate(spec: &SimSpec) -> Result<(Dataset, CoefMatrix)> {
    spec.validate()?;
    let d = spec.d;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let coin = Bernoulli::new(0.5).expect("valid probability");

    let reps = match spec.mode {
        QuantileMode::Random { .. } => 1,
        QuantileMode::Grid19 => 19,
    };
    let rows = spec.n * reps;
    let mut y = Vec::with_capacity(rows);
    let mut x = Vec::with_capacity(rows * d);
    let mut t = Vec::with_capacity(rows);
    let mut tau = Vec::with_capacity(rows);
    let mut xi = vec![0.0; d];
    let levels = grid19();

    for _ in 0..spec.n {
        // fixed draw order: t, columns 2..d, U, then tau
        let ti: f64 = rng.random();
        xi[0] = 1.0;
        for (j, slot) in xi.iter_mut().enumerate().skip(1) {
            *slot = match j + 1 {
                3 | 6 | 7 => rng.random::<f64>(),
                4 | 5 => f64::from(u8::from(coin.sample(&mut rng))),
                _ => StandardNormal.sample(&mut rng),
            };
        }
        let ui: f64 = rng.random();
        let yi = response(&xi, ti, ui);

        match spec.mode {
            QuantileMode::Random { lo, hi } => {
                y.push(yi);
                x.extend_from_slice(&xi);
                t.push(ti);
                tau.push(rng.random_range(lo..hi));
            }
            QuantileMode::Grid19 => {
                for &level in &levels {
                    y.push(yi);
                    x.extend_from_slice(&xi);
                    t.push(ti);
                    tau.push(level);
                }
            }
        }
    }

    let mut dataset = Dataset::new(y, x, d, t, tau)?;
    if let QuantileMode::Random { lo, hi } = spec.mode {
        dataset.delta = (lo, hi);
    }
    let truth = truth_matrix(&dataset);
    Ok((dataset, truth))
}

/// The response as a function of the covariates, the index and the latent
/// uniform. The sixth coefficient switches on `t`, in line with its
/// quantile surface; columns past the seventh carry zero coefficients.
fn response(x: &[f64], t: f64, u: f64) -> f64 {
    x[0] - 7.0 * x[1]
        + (10.0 + 2.0 * (2.0 * PI * t).sin()) * x[2]
        + (3.0 + 2.0 * u) * x[3]
        + step(u) * x[4]
        + step(t) * x[5]
        + 3.0 * (u + t) * x[6]
}

/// Truth matrix `beta_j(t_i, tau_i)` for a dataset laid out like
/// [`generate`] output (intercept in column 1).
pub fn truth_matrix(dataset: &Dataset) -> CoefMatrix {
    CoefMatrix::from_fn(dataset.n(), dataset.p, |i, j| {
        coef(j + 1, dataset.t[i], dataset.tau[i])
    })
}

/// Copy of `dataset` with fresh `tau_i ~ uniform(lo, hi)`.
pub fn redraw_tau(dataset: &Dataset, lo: f64, hi: f64, seed: u64) -> Result<Dataset> {
    if !(0.0 < lo && lo < hi && hi < 1.0) {
        return Err(invalid("quantile interval", format!("({lo}, {hi}) is not inside (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = dataset.clone();
    for tau in &mut out.tau {
        *tau = rng.random_range(lo..hi);
    }
    out.delta = (lo, hi);
    Ok(out)
}
