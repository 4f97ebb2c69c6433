//! Geodesic curves on the parameter manifold of pairwise isotropic
//! Gaussian-Markov random fields.
//!
//! The manifold is the three-dimensional space of `(μ, σ², β)`. Its metric is
//! the first-order Fisher information of the local conditional density, which
//! has a closed form in terms of the 3×3 patch covariance of a field sample.
//! Geodesics are integrated with a fourth-order Runge-Kutta scheme while the
//! covariance is re-estimated from Markov chain Monte Carlo field outcomes.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line front end and batch experiments live in the companion
//! `gmrf-geodesic-cli` crate.
//!
//! Module map:
//!
//! - [`model`], [`field`], [`sampler`]: the random field, its pseudo-likelihood
//!   and the lattice samplers.
//! - [`patch`]: 3×3 patch covariance, its `ρ`/`Σp⁻` split and the entry-sum
//!   functional used by the tensorial metric formulas.
//! - [`metric`]: metric tensor, regularized inverse, derivatives and entropy.
//! - [`christoffel`]: the 27 connection coefficients.
//! - [`geodesic`]: the first-order geodesic system, RK4 and arc length.
//! - [`validation`]: Monte-Carlo and finite-difference oracles.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod christoffel;
pub mod error;
pub mod field;
pub mod geodesic;
pub mod linalg;
pub mod metric;
pub mod model;
pub mod patch;
pub mod sampler;
pub mod validation;

pub use christoffel::{christoffel_general, christoffel_specialized, ChristoffelTensor};
pub use error::{Error, Result};
pub use field::{Boundary, FieldSample};
pub use geodesic::{
    euclidean_distance, integrate, reverse_run, rk4_step, ChristoffelRefresh, GeodesicCurve,
    GeodesicState, IntegratorConfig, Mode, ReversedRun,
};
pub use metric::{
    entropy, inverse_metric, metric_derivatives, metric_tensor, BlockSym3, EntropyValue,
    G33BetaDerivative, InverseMetric, MetricDerivatives, MetricTensor, TensorSums,
};
pub use model::{ModelParams, NeighborhoodOrder, NeighborhoodSpec};
pub use patch::{kron_sum, patch_stats, sum_all, PatchStats};
pub use sampler::{sample_field, FieldSampler, Kernel, McmcConfig};
