//! Closed-form Fisher metric of the `(μ, σ², β)` manifold.
//!
//! The metric, its inverse and its derivatives all share the block pattern
//!
//! ```text
//! ⎡ a11  0    0  ⎤
//! ⎢ 0    a22  a23⎥
//! ⎣ 0    a23  a33⎦
//! ```
//!
//! because the cross terms between `μ` and the other coordinates are odd
//! Gaussian moments. [`BlockSym3`] stores the four free entries only, so the
//! zeros and the symmetry hold by construction.
//!
//! Every formula is written for fixed patch statistics. Holding `ρ` and
//! `Σp⁻` constant while moving `θ` is what "the derivative of the metric"
//! means here.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use crate::model::ModelParams;
use crate::patch::{kron_sum, sum_all, PatchStats};

/// Symmetric 3×3 matrix whose `(1,2)` and `(1,3)` entries are zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
pub struct BlockSym3 {
    pub a11: f64,
    pub a22: f64,
    pub a23: f64,
    pub a33: f64,
}

impl BlockSym3 {
    pub fn matrix(&self) -> Mat3 {
        [
            [self.a11, 0.0, 0.0],
            [0.0, self.a22, self.a23],
            [0.0, self.a23, self.a33],
        ]
    }

    /// Zero-based entry access.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.a11,
            (1, 1) => self.a22,
            (2, 2) => self.a33,
            (1, 2) | (2, 1) => self.a23,
            (0..=2, 0..=2) => 0.0,
            _ => panic!("index ({i}, {j}) out of range"),
        }
    }

    pub fn quadratic_form(&self, v: &Vec3) -> f64 {
        self.a11 * v[0] * v[0] + self.a22 * v[1] * v[1] + 2.0 * self.a23 * v[1] * v[2] + self.a33 * v[2] * v[2]
    }

    fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a22.is_finite() && self.a23.is_finite() && self.a33.is_finite()
    }
}

/// Serialized as a row-major 3×3 array.
impl Serialize for BlockSym3 {
    fn serialize<S: Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        self.matrix().serialize(serializer)
    }
}

/// The entry sums every metric formula depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorSums {
    /// `‖ρ‖₊`
    pub rho: f64,
    /// `‖Σp⁻‖₊`
    pub sigma_minus: f64,
    /// `‖ρ ⊗ ρ‖₊`
    pub rho_rho: f64,
    /// `‖ρ ⊗ Σp⁻‖₊`
    pub rho_sigma: f64,
    /// `‖Σp⁻ ⊗ Σp⁻‖₊`
    pub sigma_sigma: f64,
}

impl TensorSums {
    pub fn from_stats(stats: &PatchStats) -> Self {
        TensorSums {
            rho: sum_all(&stats.rho),
            sigma_minus: sum_all(&stats.sigma_minus),
            rho_rho: kron_sum(&stats.rho, &stats.rho),
            rho_sigma: kron_sum(&stats.rho, &stats.sigma_minus),
            sigma_sigma: kron_sum(&stats.sigma_minus, &stats.sigma_minus),
        }
    }

    /// Sums for a given `‖ρ‖₊` and `‖Σp⁻‖₊`, using the factorized Kronecker sums.
    pub fn from_totals(rho: f64, sigma_minus: f64) -> Self {
        TensorSums {
            rho,
            sigma_minus,
            rho_rho: rho * rho,
            rho_sigma: rho * sigma_minus,
            sigma_sigma: sigma_minus * sigma_minus,
        }
    }

    /// Sums of [`PatchStats::independent`].
    pub fn independent(sigma2: f64) -> Self {
        Self::from_totals(0.0, 8.0 * sigma2)
    }
}

impl From<&PatchStats> for TensorSums {
    fn from(stats: &PatchStats) -> Self {
        Self::from_stats(stats)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTensor {
    pub g: BlockSym3,
}

impl MetricTensor {
    pub fn matrix(&self) -> Mat3 {
        self.g.matrix()
    }

    /// `√(vᵀ (g + λI) v)`.
    pub fn speed(&self, v: &Vec3, lambda: f64) -> f64 {
        let q = self.g.quadratic_form(v) + lambda * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        libm::sqrt(q.max(0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseMetric {
    pub g_inv: BlockSym3,
    pub lambda: f64,
}

/// `∂g/∂σ²` and `∂g/∂β`. The metric does not depend on `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricDerivatives {
    pub dg_dtheta2: BlockSym3,
    pub dg_dtheta3: BlockSym3,
}

impl MetricDerivatives {
    /// `∂g_{ij}/∂θ_m` with zero-based `m`.
    #[inline]
    pub fn partial(&self, m: usize, i: usize, j: usize) -> f64 {
        match m {
            0 => 0.0,
            1 => self.dg_dtheta2.get(i, j),
            2 => self.dg_dtheta3.get(i, j),
            _ => panic!("coordinate {m} out of range"),
        }
    }
}

/// Which closed form to use for `∂g33/∂β`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum G33BetaDerivative {
    /// `(−6‖ρ⊗Σp⁻‖₊ + 6β‖Σp⁻⊗Σp⁻‖₊) / σ⁴`, the β-derivative of `g33`.
    #[default]
    Exact,
    /// `−(6β‖ρ⊗Σp⁻‖₊ − 6β‖Σp⁻⊗Σp⁻‖₊) / σ⁴`, as originally published. It
    /// carries a spurious factor `β` on the first term and disagrees with
    /// finite differences whenever `β ≠ 1` and `‖ρ⊗Σp⁻‖₊ ≠ 0`.
    Published,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyValue {
    pub h_beta: f64,
    pub h_gauss: f64,
}

/// Recurring polynomial pieces of the closed forms.
struct Terms {
    s: f64,
    beta: f64,
    shrink: f64,
    delta: f64,
    /// `2β‖ρ‖₊ − β²‖Σp⁻‖₊`
    a: f64,
    /// `3β²‖ρ⊗ρ‖₊ − 3β³‖ρ⊗Σp⁻‖₊ + 3β⁴‖Σp⁻⊗Σp⁻‖₊`
    b: f64,
    /// `‖ρ‖₊ − β‖Σp⁻‖₊`
    c: f64,
    /// `6β‖ρ⊗ρ‖₊ − 9β²‖ρ⊗Σp⁻‖₊ + 3β³‖Σp⁻⊗Σp⁻‖₊`
    d: f64,
    /// `2‖ρ⊗ρ‖₊ − 6β‖ρ⊗Σp⁻‖₊ + 3β²‖Σp⁻⊗Σp⁻‖₊`
    e: f64,
}

impl Terms {
    fn new(params: &ModelParams, t: &TensorSums, delta: usize) -> Result<Self> {
        params.validate()?;
        let ModelParams { sigma2: s, beta, .. } = *params;
        let (b2, b3, b4) = (beta * beta, beta * beta * beta, beta * beta * beta * beta);
        let delta = delta as f64;
        Ok(Terms {
            s,
            beta,
            shrink: 1.0 - beta * delta,
            delta,
            a: 2.0 * beta * t.rho - b2 * t.sigma_minus,
            b: 3.0 * b2 * t.rho_rho - 3.0 * b3 * t.rho_sigma + 3.0 * b4 * t.sigma_sigma,
            c: t.rho - beta * t.sigma_minus,
            d: 6.0 * beta * t.rho_rho - 9.0 * b2 * t.rho_sigma + 3.0 * b3 * t.sigma_sigma,
            e: 2.0 * t.rho_rho - 6.0 * beta * t.rho_sigma + 3.0 * b2 * t.sigma_sigma,
        })
    }
}

pub fn metric_tensor(params: &ModelParams, stats: &PatchStats, delta: usize) -> Result<MetricTensor> {
    metric_from_sums(params, &TensorSums::from_stats(stats), delta)
}

pub fn metric_from_sums(params: &ModelParams, sums: &TensorSums, delta: usize) -> Result<MetricTensor> {
    let Terms { s, shrink, a, b, c, d, e, .. } = Terms::new(params, sums, delta)?;
    let (s2, s3, s4) = (s * s, s * s * s, s * s * s * s);
    Ok(MetricTensor {
        g: BlockSym3 {
            a11: shrink * shrink / s * (1.0 - a / s),
            a22: 0.5 / s2 - a / s3 + b / s4,
            a23: c / s2 - d / (2.0 * s3),
            a33: sums.sigma_minus / s + e / s2,
        },
    })
}

/// Inverse of `g + λI` through the block closed forms.
pub fn inverse_metric(g: &MetricTensor, lambda: f64) -> Result<InverseMetric> {
    let m = &g.g;
    let a11 = m.a11 + lambda;
    let a22 = m.a22 + lambda;
    let a33 = m.a33 + lambda;
    let a23 = m.a23;
    let det_block = a22 * a33 - a23 * a23;
    let determinant = a11 * det_block;
    let scale = libm::fabs(a22 * a33) + a23 * a23;
    if !determinant.is_finite()
        || a11 == 0.0
        || libm::fabs(det_block) <= f64::EPSILON * scale
    {
        return Err(Error::SingularMetric { determinant });
    }
    let g_inv = BlockSym3 {
        a11: 1.0 / a11,
        a22: a33 / det_block,
        a23: a23 / (a23 * a23 - a22 * a33),
        a33: a22 / det_block,
    };
    if !g_inv.is_finite() {
        return Err(Error::SingularMetric { determinant });
    }
    Ok(InverseMetric { g_inv, lambda })
}

pub fn metric_derivatives(params: &ModelParams, stats: &PatchStats, delta: usize) -> Result<MetricDerivatives> {
    derivatives_from_sums(params, &TensorSums::from_stats(stats), delta, G33BetaDerivative::Exact)
}

pub fn derivatives_from_sums(
    params: &ModelParams,
    sums: &TensorSums,
    delta: usize,
    form: G33BetaDerivative,
) -> Result<MetricDerivatives> {
    let Terms { s, beta, shrink, delta, a, b, c, d, e } = Terms::new(params, sums, delta)?;
    let t = sums;
    let (s2, s3, s4, s5) = (s * s, s * s * s, s * s * s * s, s * s * s * s * s);
    let (b2, b3) = (beta * beta, beta * beta * beta);
    let sq = shrink * shrink;

    let dg_dtheta2 = BlockSym3 {
        a11: -sq / s2 + 2.0 * sq * a / s3,
        a22: -1.0 / s3 + 3.0 * a / s4 - 4.0 * b / s5,
        a23: -2.0 * c / s3 + 1.5 * d / s4,
        a33: -t.sigma_minus / s2 - 2.0 * e / s3,
    };

    let grad_a = 2.0 * t.rho - 2.0 * beta * t.sigma_minus;
    let d33 = match form {
        G33BetaDerivative::Exact => (-6.0 * t.rho_sigma + 6.0 * beta * t.sigma_sigma) / s2,
        G33BetaDerivative::Published => -(6.0 * beta * t.rho_sigma - 6.0 * beta * t.sigma_sigma) / s2,
    };
    let dg_dtheta3 = BlockSym3 {
        a11: -2.0 * delta * shrink / s * (1.0 - a / s) - sq / s2 * grad_a,
        a22: -grad_a / s3 + (6.0 * beta * t.rho_rho - 9.0 * b2 * t.rho_sigma + 12.0 * b3 * t.sigma_sigma) / s4,
        a23: -t.sigma_minus / s2 - (6.0 * t.rho_rho - 18.0 * beta * t.rho_sigma + 9.0 * b2 * t.sigma_sigma) / (2.0 * s3),
        a33: d33,
    };
    Ok(MetricDerivatives { dg_dtheta2, dg_dtheta3 })
}

/// Expected self-information of the local conditional density.
pub fn entropy(params: &ModelParams, stats: &PatchStats) -> Result<EntropyValue> {
    entropy_from_sums(params, &TensorSums::from_stats(stats))
}

pub fn entropy_from_sums(params: &ModelParams, sums: &TensorSums) -> Result<EntropyValue> {
    params.validate()?;
    let ModelParams { sigma2, beta, .. } = *params;
    let h_gauss = 0.5 * libm::log(2.0 * core::f64::consts::PI * core::f64::consts::E * sigma2);
    let h_beta = h_gauss - (beta * sums.rho - 0.5 * beta * beta * sums.sigma_minus) / sigma2;
    Ok(EntropyValue { h_beta, h_gauss })
}
