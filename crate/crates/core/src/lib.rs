//! Randomized-smoothing SVRG for composite nonsmooth finite sums
//! `min_x (1/N) Σ f_i(x) + R(x)`.
//!
//! - [`objective`]: component oracles, separable regularizers, proximal maps
//! - [`smoothing`]: smoothing densities, perturbation batches, smoothed gradients
//! - [`solvers`]: RS-SVRG and the Prox-SGD / Prox-FGD / RS-SGD / RS-SAG baselines
//! - [`ranking`]: synthetic bipartite-ranking instances with hinge losses
//! - [`bench`]: reference optima, convergence bounds, comparisons and studies

pub mod bench;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod objective;
pub mod ranking;
pub mod rng;
pub mod smoothing;
pub mod solvers;

pub use error::{Error, Result};
pub use exec::Exec;
pub use objective::{CompositeProblem, Point, Regularizer};
pub use ranking::{RankingInstance, RegSetting};
pub use smoothing::{SmoothingDistribution, SmoothingKind};
pub use solvers::{EpochSchedule, RunTrace, SolverConfig, SolverKind};
