//! Geodesic integration.
//!
//! The second-order geodesic equations are rewritten as the first-order
//! system `γ′ = α`, `α_k′ = −αᵀΓᵏα` on the six-dimensional state `(γ, α)` and
//! advanced with classical fourth-order Runge-Kutta. In [`Mode::Mcmc`] the
//! patch covariance is re-estimated from a fresh field outcome at every step,
//! so the right-hand side is itself random.
//!
//! Arc length follows the left-point rule `Σ ‖α_i‖ h` in coordinate space.
//! The metric length `Σ √(α_iᵀ(g+λI)α_i) h` is kept next to it.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::christoffel::{christoffel_at, ChristoffelTensor};
use crate::error::{Error, Result};
use crate::field::FieldSample;
use crate::linalg::{norm, sub, Vec3};
use crate::metric::{metric_from_sums, G33BetaDerivative, TensorSums};
use crate::model::{ModelParams, NeighborhoodSpec};
use crate::patch::patch_stats;
use crate::sampler::{FieldSampler, Kernel, McmcConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// New field outcome and covariance estimate every step.
    #[default]
    Mcmc,
    /// One covariance estimate, held for the whole curve.
    Frozen,
}

/// How often `Γ` is re-evaluated inside a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChristoffelRefresh {
    /// Once per step at the step's start point, fixed across the four stages.
    PerStep,
    /// At every stage position, with the step's covariance estimate. This is
    /// the scheme that is actually fourth order in `h`.
    PerStage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState {
    pub t: f64,
    /// `(μ, σ², β)`
    pub gamma: Vec3,
    pub alpha: Vec3,
}

impl GeodesicState {
    pub fn new(t: f64, gamma: Vec3, alpha: Vec3) -> Self {
        GeodesicState { t, gamma, alpha }
    }

    fn check(&self) -> Result<()> {
        if self.gamma.iter().chain(&self.alpha).any(|v| !v.is_finite()) {
            return Err(Error::Integration("non-finite state".to_string()));
        }
        if self.gamma[1] <= 0.0 {
            return Err(Error::Integration(format!("sigma2 left the domain: {}", self.gamma[1])));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub a: f64,
    pub b: f64,
    pub steps: usize,
    pub lambda: f64,
    pub mode: Mode,
    pub mcmc: McmcConfig,
    pub hood: NeighborhoodSpec,
    /// Start tangents with a larger component trigger a warning.
    pub alpha_magnitude_warn: f64,
    /// `None` picks per step for MCMC and per stage for frozen runs.
    pub refresh: Option<ChristoffelRefresh>,
    /// Continue the previous step's chain instead of restarting from noise.
    pub warm_start: bool,
    /// Covariance sums for frozen mode. `None` samples one field at the start.
    pub frozen_stats: Option<TensorSums>,
    pub g33_form: G33BetaDerivative,
}

impl Default for IntegratorConfig {
    /// `a = 0`, `b = 5`, 200 steps, `λ = 0.01`, 64×64 lattice with 100
    /// burn-in and 5 sweeps per step under the Metropolis kernel.
    fn default() -> Self {
        IntegratorConfig {
            a: 0.0,
            b: 5.0,
            steps: 200,
            lambda: 0.01,
            mode: Mode::Mcmc,
            mcmc: McmcConfig {
                kernel: Kernel::Metropolis,
                ..McmcConfig::default()
            },
            hood: NeighborhoodSpec::second_order(),
            alpha_magnitude_warn: 0.5,
            refresh: None,
            warm_start: true,
            frozen_stats: None,
            g33_form: G33BetaDerivative::Exact,
        }
    }
}

impl IntegratorConfig {
    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.steps as f64
    }

    pub fn refresh(&self) -> ChristoffelRefresh {
        self.refresh.unwrap_or(match self.mode {
            Mode::Mcmc => ChristoffelRefresh::PerStep,
            Mode::Frozen => ChristoffelRefresh::PerStage,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::domain("steps must be at least 1"));
        }
        if !(self.a.is_finite() && self.b.is_finite() && self.b > self.a) {
            return Err(Error::domain(format!("need finite a < b, got a={} b={}", self.a, self.b)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::domain(format!("lambda must be a finite non-negative number, got {}", self.lambda)));
        }
        if self.mode == Mode::Mcmc || self.frozen_stats.is_none() {
            self.mcmc.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicCurve {
    pub states: Vec<GeodesicState>,
    pub h: f64,
    /// `Σ ‖α_i‖ h`
    pub distance: f64,
    /// `Σ √(α_iᵀ(g+λI)α_i) h`
    pub riemannian_length: f64,
    /// Metric speed at each state that started a completed step.
    pub speeds: Vec<f64>,
    /// Index of the step that failed.
    pub diverged_at: Option<usize>,
    pub divergence_reason: Option<String>,
    /// The sums a frozen run was integrated with.
    pub frozen_stats: Option<TensorSums>,
}

impl GeodesicCurve {
    pub fn start(&self) -> &GeodesicState {
        &self.states[0]
    }

    pub fn end(&self) -> &GeodesicState {
        self.states.last().expect("a curve holds at least its start state")
    }

    pub fn completed(&self) -> bool {
        self.diverged_at.is_none()
    }

    /// Distance between the first and last position.
    pub fn euclidean_distance(&self) -> f64 {
        euclidean_distance(&self.start().gamma, &self.end().gamma)
    }

    /// `Σ ‖γ_{i+1} − γ_i‖`, never shorter than the chord.
    pub fn polyline_length(&self) -> f64 {
        self.states.windows(2).map(|w| euclidean_distance(&w[0].gamma, &w[1].gamma)).sum()
    }

    /// `h Σ |‖α_{i+1}‖ − ‖α_i‖|`, a bound on how far the left-point sum
    /// [`distance`](Self::distance) can sit from the exact integral of `‖α‖`.
    pub fn quadrature_gap(&self) -> f64 {
        self.h * self.states.windows(2).map(|w| libm::fabs(norm(&w[1].alpha) - norm(&w[0].alpha))).sum::<f64>()
    }

    /// `‖α_{i−1}‖ h` for each state, zero for the first.
    pub fn step_norms(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.h;
        core::iter::once(0.0).chain(self.states.windows(2).map(move |w| norm(&w[0].alpha) * h))
    }
}

pub fn euclidean_distance(p: &Vec3, q: &Vec3) -> f64 {
    norm(&sub(p, q))
}

/// `(α, −αᵀΓ¹α, −αᵀΓ²α, −αᵀΓ³α)`
pub fn geodesic_rhs(state: &GeodesicState, christoffel: &ChristoffelTensor) -> [f64; 6] {
    let acc = christoffel.acceleration(&state.alpha);
    let a = state.alpha;
    [a[0], a[1], a[2], acc[0], acc[1], acc[2]]
}

/// One RK4 step with `Γ` held fixed.
pub fn rk4_step(state: &GeodesicState, christoffel: &ChristoffelTensor, h: f64) -> Result<GeodesicState> {
    rk4_step_with(state, h, |_| Ok(*christoffel))
}

/// One RK4 step evaluating `Γ` at each stage position.
pub fn rk4_step_with<F>(state: &GeodesicState, h: f64, mut christoffel: F) -> Result<GeodesicState>
where
    F: FnMut(&Vec3) -> Result<ChristoffelTensor>,
{
    if !(h > 0.0) {
        return Err(Error::domain(format!("step size must be positive, got {h}")));
    }
    let shifted = |k: &[f64; 6], c: f64| {
        let mut s = *state;
        for i in 0..3 {
            s.gamma[i] += c * k[i];
            s.alpha[i] += c * k[i + 3];
        }
        s
    };
    let mut stage = |s: &GeodesicState| -> Result<[f64; 6]> { Ok(geodesic_rhs(s, &christoffel(&s.gamma)?)) };
    let k1 = stage(state)?;
    let k2 = stage(&shifted(&k1, h / 2.0))?;
    let k3 = stage(&shifted(&k2, h / 2.0))?;
    let k4 = stage(&shifted(&k3, h))?;
    let mut next = *state;
    next.t += h;
    for i in 0..3 {
        next.gamma[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        next.alpha[i] += h / 6.0 * (k1[i + 3] + 2.0 * k2[i + 3] + 2.0 * k3[i + 3] + k4[i + 3]);
    }
    next.check()?;
    Ok(next)
}

/// Covariance source for one integration.
struct StatsSource<'a> {
    cfg: &'a IntegratorConfig,
    sampler: Option<FieldSampler>,
    field: Option<FieldSample>,
    frozen: Option<TensorSums>,
}

impl<'a> StatsSource<'a> {
    fn new(cfg: &'a IntegratorConfig) -> Result<Self> {
        let needs_sampler = cfg.mode == Mode::Mcmc || cfg.frozen_stats.is_none();
        let sampler = if needs_sampler { Some(FieldSampler::new(cfg.mcmc)?) } else { None };
        Ok(StatsSource {
            cfg,
            sampler,
            field: None,
            frozen: cfg.frozen_stats,
        })
    }

    fn sample(&mut self, params: &ModelParams) -> Result<TensorSums> {
        let sampler = self.sampler.as_mut().expect("sampler present when sampling");
        let hood = &self.cfg.hood;
        match self.field.as_mut() {
            Some(field) if self.cfg.warm_start => sampler.refresh(field, params, hood)?,
            _ => self.field = Some(sampler.cold(params, hood)?),
        }
        let stats = patch_stats(self.field.as_ref().expect("field just sampled"))?;
        Ok(TensorSums::from_stats(&stats))
    }

    fn at(&mut self, params: &ModelParams) -> Result<TensorSums> {
        match (self.cfg.mode, self.frozen) {
            (Mode::Frozen, Some(s)) => Ok(s),
            (Mode::Frozen, None) => {
                let s = self.sample(params)?;
                self.frozen = Some(s);
                Ok(s)
            }
            (Mode::Mcmc, _) => self.sample(params),
        }
    }
}

fn params_of(gamma: &Vec3) -> Result<ModelParams> {
    ModelParams::from_array(*gamma).map_err(|e| Error::Integration(e.to_string()))
}

/// Integrates from `start_gamma` with initial tangent `start_alpha` over `[a, b]`.
///
/// Invalid configuration or start points are errors. A failure after the
/// first step has begun (sampler divergence, `σ² ≤ 0`, singular metric,
/// non-finite state) ends the curve early and sets `diverged_at`.
pub fn integrate(start_gamma: Vec3, start_alpha: Vec3, cfg: &IntegratorConfig) -> Result<GeodesicCurve> {
    cfg.validate()?;
    ModelParams::from_array(start_gamma)?;
    for (v, what) in start_alpha.iter().zip(["alpha1", "alpha2", "alpha3"]) {
        crate::error::ensure_finite(*v, what)?;
        if libm::fabs(*v) > cfg.alpha_magnitude_warn {
            log::warn!(
                "|{what}| = {} exceeds {}; the integration may become unstable",
                libm::fabs(*v),
                cfg.alpha_magnitude_warn
            );
        }
    }

    let h = cfg.h();
    let refresh = cfg.refresh();
    let mut source = StatsSource::new(cfg)?;
    let mut state = GeodesicState::new(cfg.a, start_gamma, start_alpha);
    let mut curve = GeodesicCurve {
        states: Vec::with_capacity(cfg.steps + 1),
        h,
        distance: 0.0,
        riemannian_length: 0.0,
        speeds: Vec::with_capacity(cfg.steps),
        diverged_at: None,
        divergence_reason: None,
        frozen_stats: None,
    };
    curve.states.push(state);

    for i in 0..cfg.steps {
        let step = |source: &mut StatsSource| -> Result<(GeodesicState, f64)> {
            let params = params_of(&state.gamma)?;
            let sums = source.at(&params)?;
            let speed = metric_from_sums(&params, &sums, cfg.hood.delta())?.speed(&state.alpha, cfg.lambda);
            let at = |gamma: &Vec3| christoffel_at(&params_of(gamma)?, &sums, cfg.hood.delta(), cfg.lambda, cfg.g33_form);
            let next = match refresh {
                ChristoffelRefresh::PerStep => rk4_step(&state, &at(&state.gamma)?, h)?,
                ChristoffelRefresh::PerStage => rk4_step_with(&state, h, at)?,
            };
            Ok((next, speed))
        };
        match step(&mut source) {
            Ok((next, speed)) => {
                curve.distance += norm(&state.alpha) * h;
                curve.riemannian_length += speed * h;
                curve.speeds.push(speed);
                state = next;
                curve.states.push(state);
            }
            Err(e) => {
                log::debug!("curve diverged at step {i}: {e}");
                curve.diverged_at = Some(i);
                curve.divergence_reason = Some(e.to_string());
                break;
            }
        }
    }
    if cfg.mode == Mode::Frozen {
        curve.frozen_stats = source.frozen;
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReversedRun {
    pub curve: GeodesicCurve,
    /// `‖γ_rev(t_i) − γ_fwd(b − t_i)‖` for each reversed state.
    pub divergence: Vec<f64>,
}

/// Starts at the end of `forward` with the negated tangent and integrates
/// under the same configuration. Frozen runs reuse the forward covariance.
pub fn reverse_run(forward: &GeodesicCurve, cfg: &IntegratorConfig) -> Result<ReversedRun> {
    if !forward.completed() {
        return Err(Error::domain("cannot reverse a curve that diverged"));
    }
    let mut cfg = cfg.clone();
    if cfg.mode == Mode::Frozen && forward.frozen_stats.is_some() {
        cfg.frozen_stats = forward.frozen_stats;
    }
    let end = forward.end();
    let back = [-end.alpha[0], -end.alpha[1], -end.alpha[2]];
    let curve = integrate(end.gamma, back, &cfg)?;
    let divergence = curve
        .states
        .iter()
        .zip(forward.states.iter().rev())
        .map(|(r, f)| euclidean_distance(&r.gamma, &f.gamma))
        .collect();
    Ok(ReversedRun { curve, divergence })
}
