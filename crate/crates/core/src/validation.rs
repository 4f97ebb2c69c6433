//! Brute-force oracles for the closed forms.
//!
//! [`mc_fisher`] averages outer products of the score over sampled fields.
//! [`fd_metric_derivatives`] and [`fd_score_check`] compare analytic
//! gradients with central differences.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat3;
use crate::metric::{derivatives_from_sums, metric_from_sums, metric_tensor, BlockSym3, G33BetaDerivative, TensorSums};
use crate::model::{ModelParams, NeighborhoodSpec};
use crate::patch::PatchStats;
use crate::sampler::{local_conditional_logpdf, score, score_unchecked, FieldSampler, McmcConfig};

/// An estimate next to its reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub estimate: Mat3,
    pub reference: Mat3,
    /// Standard error of each estimate entry, zero for deterministic oracles.
    pub std_error: Mat3,
    /// Largest `|estimate − reference| / |reference|` over the diagonal.
    pub max_rel_error_diag: f64,
    /// Largest `|estimate − reference|` off the diagonal.
    pub max_abs_error_offdiag: f64,
    pub n_samples: usize,
}

impl OracleReport {
    fn new(estimate: Mat3, reference: Mat3, std_error: Mat3, n_samples: usize) -> Self {
        let mut rel = 0.0f64;
        let mut off = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let diff = libm::fabs(estimate[i][j] - reference[i][j]);
                if i == j {
                    rel = rel.max(diff / libm::fabs(reference[i][i]));
                } else {
                    off = off.max(diff);
                }
            }
        }
        OracleReport {
            estimate,
            reference,
            std_error,
            max_rel_error_diag: rel,
            max_abs_error_offdiag: off,
            n_samples,
        }
    }

    /// `|estimate[i][j] − reference[i][j]|` in standard errors.
    pub fn z_score(&self, i: usize, j: usize) -> f64 {
        libm::fabs(self.estimate[i][j] - self.reference[i][j]) / self.std_error[i][j]
    }
}

/// Monte-Carlo Fisher information.
///
/// Field `f` is drawn cold from stream `f` of `cfg.seed`. Each field
/// contributes the mean of `s sᵀ` over its evaluated sites, and the estimate
/// is the mean of those per-field matrices, so the standard errors come
/// from the spread between fields. The reference is the closed-form metric
/// with the patch covariance pooled over all fields.
pub fn mc_fisher(
    params: &ModelParams,
    hood: &NeighborhoodSpec,
    cfg: &McmcConfig,
    n_fields: usize,
) -> Result<OracleReport> {
    params.validate()?;
    if n_fields == 0 {
        return Err(Error::domain("n_fields must be at least 1"));
    }
    let mut per_field = Vec::with_capacity(n_fields);
    let mut fields = Vec::with_capacity(n_fields);
    let mut nb = Vec::new();
    nb.resize(hood.delta(), 0.0);
    let mut n_samples = 0;
    for f in 0..n_fields {
        let mut sampler = FieldSampler::with_stream(*cfg, f as u64)?;
        let field = sampler.cold(params, hood)?;
        let mut acc = [[0.0; 3]; 3];
        let mut count = 0usize;
        for (row, col) in field.evaluated_sites(hood.radius()) {
            field.neighbor_values(row, col, hood, &mut nb);
            let s = score_unchecked(field.get(row, col), &nb, params);
            for i in 0..3 {
                for j in 0..3 {
                    acc[i][j] += s[i] * s[j];
                }
            }
            count += 1;
        }
        for row in &mut acc {
            for v in row.iter_mut() {
                *v /= count as f64;
            }
        }
        n_samples += count;
        per_field.push(acc);
        fields.push(field);
    }

    let n = n_fields as f64;
    let mut mean = [[0.0; 3]; 3];
    for m in &per_field {
        for i in 0..3 {
            for j in 0..3 {
                mean[i][j] += m[i][j] / n;
            }
        }
    }
    let mut se = [[f64::INFINITY; 3]; 3];
    if n_fields > 1 {
        for i in 0..3 {
            for j in 0..3 {
                let var = per_field.iter().map(|m| (m[i][j] - mean[i][j]) * (m[i][j] - mean[i][j])).sum::<f64>() / (n - 1.0);
                se[i][j] = libm::sqrt(var / n);
            }
        }
    }
    let stats = PatchStats::pooled(&fields)?;
    let reference = metric_tensor(params, &stats, hood.delta())?.matrix();
    Ok(OracleReport::new(mean, reference, se, n_samples))
}

/// Relative error with a floor on the denominator, so that entries which
/// are exactly zero in the reference are compared absolutely.
fn rel_error(estimate: f64, reference: f64, floor: f64) -> f64 {
    libm::fabs(estimate - reference) / libm::fabs(reference).max(floor)
}

/// Central differences of the metric with the covariance sums held fixed.
///
/// The five-point stencil keeps truncation error far below the tolerance
/// even for entries that are small differences of large terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    pub d_sigma2: OracleReport,
    pub d_beta: OracleReport,
    /// Largest `|∂g_ij/∂μ|` by central differences.
    pub mu_slope: f64,
    /// Largest relative error over all sixteen free entries. Entries whose
    /// reference is below `1e-6` of the metric's scale are compared in
    /// absolute terms against that scale.
    pub max_rel_error: f64,
}

impl DerivativeCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol && self.mu_slope < 1e-8
    }
}

pub fn fd_metric_derivatives(params: &ModelParams, stats: &PatchStats, delta: usize, step: f64) -> Result<DerivativeCheck> {
    fd_metric_derivatives_with(params, &TensorSums::from_stats(stats), delta, step, G33BetaDerivative::Exact)
}

pub fn fd_metric_derivatives_with(
    params: &ModelParams,
    sums: &TensorSums,
    delta: usize,
    step: f64,
    form: G33BetaDerivative,
) -> Result<DerivativeCheck> {
    if !(step > 0.0) || params.sigma2 - 2.0 * step <= 0.0 {
        return Err(Error::domain("need step > 0 and sigma2 - 2 step > 0"));
    }
    let g_at = |p: ModelParams| metric_from_sums(&p, sums, delta).map(|g| g.g);
    let shift = |k: usize, by: f64| {
        let mut t = params.to_array();
        t[k] += by;
        ModelParams { mu: t[0], sigma2: t[1], beta: t[2] }
    };
    // Five-point central stencil, O(step⁴).
    let central = |k: usize| -> Result<BlockSym3> {
        let (p2, p1) = (g_at(shift(k, 2.0 * step))?, g_at(shift(k, step))?);
        let (m1, m2) = (g_at(shift(k, -step))?, g_at(shift(k, -2.0 * step))?);
        let d = |f: fn(&BlockSym3) -> f64| (-f(&p2) + 8.0 * f(&p1) - 8.0 * f(&m1) + f(&m2)) / (12.0 * step);
        Ok(BlockSym3 {
            a11: d(|g| g.a11),
            a22: d(|g| g.a22),
            a23: d(|g| g.a23),
            a33: d(|g| g.a33),
        })
    };
    let fd_mu = central(0)?;
    let fd_s2 = central(1)?;
    let fd_b = central(2)?;
    let exact = derivatives_from_sums(params, sums, delta, form)?;

    let g = g_at(*params)?;
    let floor = 1e-6 * [g.a11, g.a22, g.a23, g.a33].iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
    let mut max_rel = 0.0f64;
    for (fd, cf) in [(&fd_s2, &exact.dg_dtheta2), (&fd_b, &exact.dg_dtheta3)] {
        for (x, y) in [(fd.a11, cf.a11), (fd.a22, cf.a22), (fd.a23, cf.a23), (fd.a33, cf.a33)] {
            max_rel = max_rel.max(rel_error(x, y, floor));
        }
    }
    let mu_slope = [fd_mu.a11, fd_mu.a22, fd_mu.a23, fd_mu.a33].iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
    let zero = [[0.0; 3]; 3];
    Ok(DerivativeCheck {
        d_sigma2: OracleReport::new(fd_s2.matrix(), exact.dg_dtheta2.matrix(), zero, 1),
        d_beta: OracleReport::new(fd_b.matrix(), exact.dg_dtheta3.matrix(), zero, 1),
        mu_slope,
        max_rel_error: max_rel,
    })
}

/// Analytic score against central differences of the log density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCheck {
    /// Largest relative error, with denominators floored at `1e-3`.
    pub max_rel_error: f64,
    pub n_samples: usize,
}

pub fn fd_score_check(params: &ModelParams, samples: &[(f64, Vec<f64>)], step: f64) -> Result<ScoreCheck> {
    if !(step > 0.0) || params.sigma2 - step <= 0.0 {
        return Err(Error::domain("need step > 0 and sigma2 - step > 0"));
    }
    let mut max_rel = 0.0f64;
    for (x, nb) in samples {
        let analytic = score(*x, nb, params)?;
        for (k, an) in analytic.iter().enumerate() {
            let mut up = params.to_array();
            let mut down = up;
            up[k] += step;
            down[k] -= step;
            let f = |t: [f64; 3]| local_conditional_logpdf(*x, nb, &ModelParams { mu: t[0], sigma2: t[1], beta: t[2] });
            let fd = (f(up)? - f(down)?) / (2.0 * step);
            max_rel = max_rel.max(rel_error(fd, *an, 1e-3));
        }
    }
    Ok(ScoreCheck {
        max_rel_error: max_rel,
        n_samples: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::vec;

    fn p(mu: f64, s2: f64, b: f64) -> ModelParams {
        ModelParams::new(mu, s2, b).unwrap()
    }

    #[test]
    fn fd_matches_at_independence() {
        let check = fd_metric_derivatives(&p(0.0, 1.0, 0.0), &PatchStats::independent(1.0), 8, 1e-4).unwrap();
        assert!(check.passes(1e-5), "{check:?}");
        assert!((check.d_beta.estimate[0][0] + 16.0).abs() < 16.0 * 1e-5);
    }

    #[test]
    fn published_g33_form_fails_fd() {
        let sums = TensorSums::from_totals(1.5, 6.0);
        let params = p(0.0, 1.0, 0.2);
        let good = fd_metric_derivatives_with(&params, &sums, 8, 1e-4, G33BetaDerivative::Exact).unwrap();
        let bad = fd_metric_derivatives_with(&params, &sums, 8, 1e-4, G33BetaDerivative::Published).unwrap();
        assert!(good.passes(1e-5));
        assert!(!bad.passes(1e-5));
    }

    #[test]
    fn zero_residual_score() {
        let params = p(1.0, 2.0, 0.1);
        let nb = vec![1.0; 8];
        assert_eq!(score(1.0, &nb, &params).unwrap(), [0.0, -0.25, 0.0]);
        let check = fd_score_check(&params, &[(1.0, nb)], 1e-5).unwrap();
        assert!(check.max_rel_error < 1e-6);
    }

    #[test]
    fn beta_zero_score_component() {
        let params = p(0.5, 1.5, 0.0);
        let nb: std::vec::Vec<f64> = (0..8).map(|k| f64::from(k) * 0.3 - 1.0).collect();
        let x = 2.0;
        let s: f64 = nb.iter().map(|v| v - 0.5).sum();
        let expected = (x - 0.5) * s / 1.5;
        assert!((score(x, &nb, &params).unwrap()[2] - expected).abs() < 1e-14);
        assert!(fd_score_check(&params, &[(x, nb)], 1e-5).unwrap().max_rel_error < 1e-6);
    }

    #[test]
    fn bad_arguments() {
        let params = p(0.0, 1.0, 0.0);
        assert!(fd_score_check(&params, &[], 0.0).is_err());
        assert!(fd_metric_derivatives(&params, &PatchStats::independent(1.0), 8, 2.0).is_err());
        assert!(mc_fisher(&params, &NeighborhoodSpec::second_order(), &McmcConfig::default(), 0).is_err());
    }
}
