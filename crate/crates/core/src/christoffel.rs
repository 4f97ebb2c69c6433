//! Connection coefficients `Γᵏ_ij` of the metric.
//!
//! Indices are zero-based in code: 0 is `μ`, 1 is `σ²`, 2 is `β`. Because the
//! metric is block diagonal in `μ` and does not depend on `μ`, thirteen of the
//! twenty-seven symbols vanish identically.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{quadratic_form, Mat3, Vec3};
use crate::metric::{
    derivatives_from_sums, inverse_metric, metric_from_sums, G33BetaDerivative, InverseMetric,
    MetricDerivatives, TensorSums,
};
use crate::model::ModelParams;

/// `gamma1[i][j] = Γ¹_ij` and likewise for the other two upper indices.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChristoffelTensor {
    pub gamma1: Mat3,
    pub gamma2: Mat3,
    pub gamma3: Mat3,
}

impl ChristoffelTensor {
    /// `Γᵏ` with zero-based `k`.
    pub fn upper(&self, k: usize) -> &Mat3 {
        match k {
            0 => &self.gamma1,
            1 => &self.gamma2,
            2 => &self.gamma3,
            _ => panic!("upper index {k} out of range"),
        }
    }

    fn upper_mut(&mut self, k: usize) -> &mut Mat3 {
        match k {
            0 => &mut self.gamma1,
            1 => &mut self.gamma2,
            2 => &mut self.gamma3,
            _ => panic!("upper index {k} out of range"),
        }
    }

    /// `(−αᵀΓ¹α, −αᵀΓ²α, −αᵀΓ³α)`.
    pub fn acceleration(&self, alpha: &Vec3) -> Vec3 {
        [
            -quadratic_form(&self.gamma1, alpha),
            -quadratic_form(&self.gamma2, alpha),
            -quadratic_form(&self.gamma3, alpha),
        ]
    }

    fn set_sym(&mut self, k: usize, i: usize, j: usize, v: f64) {
        let m = self.upper_mut(k);
        m[i][j] = v;
        m[j][i] = v;
    }
}

/// Closed forms for the fourteen non-vanishing symbols.
pub fn christoffel_specialized(g_inv: &InverseMetric, dg: &MetricDerivatives) -> ChristoffelTensor {
    let gi = &g_inv.g_inv;
    let (d2, d3) = (&dg.dg_dtheta2, &dg.dg_dtheta3);
    let mut out = ChristoffelTensor::default();

    out.set_sym(0, 0, 1, 0.5 * d2.a11 * gi.a11);
    out.set_sym(0, 0, 2, 0.5 * d3.a11 * gi.a11);

    out.gamma2[0][0] = -0.5 * (d2.a11 * gi.a22 + d3.a11 * gi.a23);
    out.gamma3[0][0] = -0.5 * (d2.a11 * gi.a23 + d3.a11 * gi.a33);

    // (σ², β) block: the 2-D formula with rows of the inverse picked by k.
    let first = d2.a22;
    let second = 2.0 * d2.a23 - d3.a22;
    let mixed_s = d3.a22;
    let mixed_b = d2.a33;
    let third = 2.0 * d3.a23 - d2.a33;
    let fourth = d3.a33;
    for (k, (up_s, up_b)) in [(1, (gi.a22, gi.a23)), (2, (gi.a23, gi.a33))] {
        out.set_sym(k, 1, 1, 0.5 * (first * up_s + second * up_b));
        out.set_sym(k, 1, 2, 0.5 * (mixed_s * up_s + mixed_b * up_b));
        out.set_sym(k, 2, 2, 0.5 * (third * up_s + fourth * up_b));
    }
    out
}

/// `Γᵏ_ij = ½ Σ_m (∂_i g_jm + ∂_j g_im − ∂_m g_ij) g^{mk}`, evaluated term by term.
pub fn christoffel_general(g_inv: &InverseMetric, dg: &MetricDerivatives) -> ChristoffelTensor {
    let gi = g_inv.g_inv.matrix();
    let mut out = ChristoffelTensor::default();
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for (m, row) in gi.iter().enumerate() {
                    acc += (dg.partial(i, j, m) + dg.partial(j, i, m) - dg.partial(m, i, j)) * row[k];
                }
                out.upper_mut(k)[i][j] = 0.5 * acc;
            }
        }
    }
    out
}

/// Symbols at `params` for frozen tensor sums.
pub fn christoffel_at(
    params: &ModelParams,
    sums: &TensorSums,
    delta: usize,
    lambda: f64,
    form: G33BetaDerivative,
) -> Result<ChristoffelTensor> {
    let g = metric_from_sums(params, sums, delta)?;
    let g_inv = inverse_metric(&g, lambda)?;
    let dg = derivatives_from_sums(params, sums, delta, form)?;
    Ok(christoffel_specialized(&g_inv, &dg))
}
