//! Varying-coefficient regional quantile regression with a K-nearest-neighbor
//! fused-lasso penalty.
//!
//! Each sample `i` carries an index value `t_i` in `[0, 1]` and its own
//! quantile level `tau_i`. Coefficients are estimated per sample by
//! minimizing
//!
//! ```text
//! (1/n) sum_i rho_tau_i(y_i - x_i' beta^i) + lambda sum_j ||H beta_j||_1
//! ```
//!
//! where `H` is the oriented incidence matrix of the KNN graph built on the
//! points `(t_i, tau_i)`. The fused penalty produces piecewise-constant
//! coefficient surfaces over the `(t, tau)` plane.

pub mod admm;
pub mod data_model;
pub mod error;
pub mod fused_prox;
pub mod io;
pub mod knn_graph;
mod maxflow;
pub mod metrics;
pub mod model_select;
pub mod oracle;
pub mod predict;
pub mod quantile_loss;
pub mod simulate;

pub use admm::{fit, fit_warm, AdmmState, FitResult};
pub use data_model::{CoefMatrix, Dataset, SolverConfig};
pub use error::{Error, Result};
pub use knn_graph::{build_knn_graph, KnnGraph};
pub use quantile_loss::ObjectiveValue;
