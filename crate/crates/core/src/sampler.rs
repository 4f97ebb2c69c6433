//! Local conditional density, pseudo-likelihood and lattice samplers.
//!
//! Every site of a pairwise isotropic GMRF is conditionally normal given its
//! neighbours:
//!
//! ```text
//! x_i | η_i ~ N( μ + β Σ_{j∈η_i} (x_j − μ), σ² )
//! ```
//!
//! Two single-site kernels are provided. [`Kernel::Gibbs`] draws each site
//! from that conditional exactly and therefore targets the joint GMRF, which
//! is only proper for `β` inside `(−1/4, 1/8)` on the 8-neighbour torus.
//! [`Kernel::Metropolis`] proposes from `N(μ, σ²)` and accepts on the ratio of
//! conditional densities. It stays bounded for every `β` and is the kernel the
//! geodesic experiments use, but its stationary law is not the GMRF (at
//! `β = 0` it is `N(μ, σ²/2)`).

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::field::{Boundary, FieldSample};
use crate::model::{ModelParams, NeighborhoodSpec};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn check_site(x_i: f64, neighbors: &[f64], params: &ModelParams) -> Result<()> {
    ensure_finite(x_i, "x_i")?;
    if neighbors.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("neighbor value"));
    }
    params.validate()
}

/// Residual `r = (x_i − μ) − β Σ (x_j − μ)` and the neighbour deviation sum.
#[inline]
fn residual(x_i: f64, neighbors: &[f64], params: &ModelParams) -> (f64, f64) {
    let s: f64 = neighbors.iter().map(|x| x - params.mu).sum();
    ((x_i - params.mu) - params.beta * s, s)
}

pub fn local_conditional_logpdf(x_i: f64, neighbors: &[f64], params: &ModelParams) -> Result<f64> {
    check_site(x_i, neighbors, params)?;
    let (r, _) = residual(x_i, neighbors, params);
    Ok(-0.5 * (LN_2PI + libm::log(params.sigma2)) - r * r / (2.0 * params.sigma2))
}

/// Gradient of the log conditional density with respect to `(μ, σ², β)`.
pub fn score(x_i: f64, neighbors: &[f64], params: &ModelParams) -> Result<[f64; 3]> {
    check_site(x_i, neighbors, params)?;
    Ok(score_unchecked(x_i, neighbors, params))
}

#[inline]
pub(crate) fn score_unchecked(x_i: f64, neighbors: &[f64], params: &ModelParams) -> [f64; 3] {
    let (r, s) = residual(x_i, neighbors, params);
    let s2 = params.sigma2;
    let delta = neighbors.len() as f64;
    [
        (1.0 - params.beta * delta) * r / s2,
        -0.5 / s2 + r * r / (2.0 * s2 * s2),
        r * s / s2,
    ]
}

/// Sum of the log conditional densities over all evaluated sites.
pub fn pseudo_log_likelihood(
    field: &FieldSample,
    params: &ModelParams,
    hood: &NeighborhoodSpec,
) -> Result<f64> {
    params.validate()?;
    field.check_evaluable(hood)?;
    let norm = -0.5 * (LN_2PI + libm::log(params.sigma2));
    let mut total = 0.0;
    for (row, col) in field.evaluated_sites(hood.radius()) {
        let s = field.neighbor_deviation_sum(row, col, hood, params.mu);
        let r = (field.get(row, col) - params.mu) - params.beta * s;
        total += norm - r * r / (2.0 * params.sigma2);
    }
    Ok(total)
}

/// Exponential-family view of the pseudo-likelihood: `c·T + d(θ) + S(X)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaturalDecomposition {
    pub c: [f64; 5],
    pub d: f64,
    pub sufficient_stats: [f64; 5],
    pub s_of_x: f64,
}

impl NaturalDecomposition {
    pub fn log_likelihood(&self) -> f64 {
        let dot: f64 = self
            .c
            .iter()
            .zip(&self.sufficient_stats)
            .map(|(c, t)| c * t)
            .sum();
        dot + self.d + self.s_of_x
    }
}

pub fn natural_decomposition(
    field: &FieldSample,
    params: &ModelParams,
    hood: &NeighborhoodSpec,
) -> Result<NaturalDecomposition> {
    params.validate()?;
    field.check_evaluable(hood)?;
    let ModelParams { mu, sigma2, beta } = *params;
    let delta = hood.delta() as f64;

    let mut t = [0.0; 5];
    let mut n = 0usize;
    let mut nb = Vec::with_capacity(hood.delta());
    nb.resize(hood.delta(), 0.0);
    for (row, col) in field.evaluated_sites(hood.radius()) {
        let x = field.get(row, col);
        field.neighbor_values(row, col, hood, &mut nb);
        let s: f64 = nb.iter().sum();
        t[0] += x;
        t[1] += x * x;
        t[2] += x * s;
        t[3] += s;
        t[4] += s * s;
        n += 1;
    }
    let n = n as f64;
    let shrink = 1.0 - beta * delta;
    let c = [
        mu / sigma2 * shrink,
        -0.5 / sigma2,
        beta / sigma2,
        -(beta * mu / sigma2) * shrink,
        -beta * beta / (2.0 * sigma2),
    ];
    let d = -0.5 * n * (LN_2PI + libm::log(sigma2) + mu * mu / sigma2)
        + beta * delta * mu * mu * n / sigma2 * (1.0 - 0.5 * beta * delta);
    Ok(NaturalDecomposition {
        c,
        d,
        sufficient_stats: t,
        s_of_x: 0.0,
    })
}

/// Single-site update rule used by the sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// Exact draw from the local conditional normal.
    #[default]
    Gibbs,
    /// Independent `N(μ, σ²)` proposal accepted with probability
    /// `min(1, p(y | η) / p(x | η))`.
    Metropolis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub lattice_size: (usize, usize),
    pub burn_in_sweeps: usize,
    pub sweeps_per_sample: usize,
    pub seed: u64,
    /// A value further than this many conditional standard deviations from
    /// `μ` aborts the run.
    pub divergence_threshold: f64,
    pub kernel: Kernel,
    pub boundary: Boundary,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            lattice_size: (64, 64),
            burn_in_sweeps: 100,
            sweeps_per_sample: 5,
            seed: 0,
            divergence_threshold: 50.0,
            kernel: Kernel::Gibbs,
            boundary: Boundary::Toroidal,
        }
    }
}

pub const MIN_MCMC_SIDE: usize = 16;

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.lattice_size;
        if h < MIN_MCMC_SIDE || w < MIN_MCMC_SIDE {
            return Err(Error::LatticeTooSmall {
                height: h,
                width: w,
                min: MIN_MCMC_SIDE,
            });
        }
        if self.sweeps_per_sample == 0 {
            return Err(Error::domain("sweeps_per_sample must be at least 1"));
        }
        if !(self.divergence_threshold > 0.0) {
            return Err(Error::domain("divergence_threshold must be positive"));
        }
        Ok(())
    }
}

/// A seeded lattice sampler that owns its random stream.
///
/// The generator is ChaCha8 seeded with [`McmcConfig::seed`]; distinct
/// `stream` values give independent sequences from the same seed.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    cfg: McmcConfig,
    rng: ChaCha8Rng,
}

impl FieldSampler {
    pub fn new(cfg: McmcConfig) -> Result<Self> {
        Self::with_stream(cfg, 0)
    }

    pub fn with_stream(cfg: McmcConfig, stream: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        Ok(FieldSampler { cfg, rng })
    }

    pub fn config(&self) -> &McmcConfig {
        &self.cfg
    }

    /// White-noise start followed by `burn_in_sweeps` sweeps.
    pub fn cold(&mut self, params: &ModelParams, hood: &NeighborhoodSpec) -> Result<FieldSample> {
        params.validate()?;
        let (h, w) = self.cfg.lattice_size;
        let sd = libm::sqrt(params.sigma2);
        let values = (0..h * w)
            .map(|_| params.mu + sd * self.rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut field = FieldSample::from_parts_unchecked(h, w, values, self.cfg.boundary);
        field.check_evaluable(hood)?;
        self.run_sweeps(&mut field, params, hood, self.cfg.burn_in_sweeps)?;
        Ok(field)
    }

    /// Continues the chain from `field` for `sweeps_per_sample` sweeps.
    pub fn refresh(
        &mut self,
        field: &mut FieldSample,
        params: &ModelParams,
        hood: &NeighborhoodSpec,
    ) -> Result<()> {
        params.validate()?;
        field.check_evaluable(hood)?;
        self.run_sweeps(field, params, hood, self.cfg.sweeps_per_sample)
    }

    fn run_sweeps(
        &mut self,
        field: &mut FieldSample,
        params: &ModelParams,
        hood: &NeighborhoodSpec,
        sweeps: usize,
    ) -> Result<()> {
        for sweep in 0..sweeps {
            self.sweep(field, params, hood, sweep)?;
        }
        Ok(())
    }

    /// One raster-order pass over the evaluated sites.
    fn sweep(
        &mut self,
        field: &mut FieldSample,
        params: &ModelParams,
        hood: &NeighborhoodSpec,
        sweep: usize,
    ) -> Result<()> {
        let ModelParams { mu, sigma2, beta } = *params;
        let sd = libm::sqrt(sigma2);
        let limit = self.cfg.divergence_threshold * sd;
        let (h, w) = field.dims();
        let radius = hood.radius();
        let (r0, r1, c0, c1) = match field.boundary() {
            Boundary::Toroidal => (0, h, 0, w),
            Boundary::InteriorOnly => (radius, h - radius, radius, w - radius),
        };
        for row in r0..r1 {
            for col in c0..c1 {
                let s = field.neighbor_deviation_sum(row, col, hood, mu);
                let mean = mu + beta * s;
                let idx = row * w + col;
                let current = field.values()[idx];
                let next = match self.cfg.kernel {
                    Kernel::Gibbs => mean + sd * self.rng.sample::<f64, _>(StandardNormal),
                    Kernel::Metropolis => {
                        let proposal = mu + sd * self.rng.sample::<f64, _>(StandardNormal);
                        let log_ratio = ((current - mean) * (current - mean)
                            - (proposal - mean) * (proposal - mean))
                            / (2.0 * sigma2);
                        let u: f64 = self.rng.random();
                        if log_ratio >= 0.0 || libm::log(u) < log_ratio {
                            proposal
                        } else {
                            current
                        }
                    }
                };
                if !next.is_finite() || libm::fabs(next - mu) > limit {
                    return Err(Error::SamplerDivergence {
                        sweep,
                        site: idx,
                        value: next,
                    });
                }
                field.values_mut()[idx] = next;
            }
        }
        Ok(())
    }
}

/// Draws a field at `params`.
///
/// Without `initial` the chain starts from white noise and runs
/// `burn_in_sweeps`; with it, the chain continues from that field for
/// `sweeps_per_sample`. Identical inputs give bit-identical output.
pub fn sample_field(
    params: &ModelParams,
    hood: &NeighborhoodSpec,
    cfg: &McmcConfig,
    initial: Option<&FieldSample>,
) -> Result<FieldSample> {
    let mut sampler = FieldSampler::new(*cfg)?;
    match initial {
        None => sampler.cold(params, hood),
        Some(start) => {
            let mut field = start.clone().with_boundary(cfg.boundary);
            sampler.refresh(&mut field, params, hood)?;
            Ok(field)
        }
    }
}
