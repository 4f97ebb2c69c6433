use gmrf_geodesic::linalg::{identity, mat_mul, max_abs_diff, Mat3};
use gmrf_geodesic::metric::{derivatives_from_sums, entropy_from_sums, metric_from_sums};
use gmrf_geodesic::patch::{decompose, PatchCovariance, CENTER};
use gmrf_geodesic::validation::{fd_metric_derivatives_with, fd_score_check};
use gmrf_geodesic::*;
use proptest::prelude::*;

fn explicit_kron(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (ar, ac, br, bc) = (a.len(), a[0].len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; ac * bc]; ar * br];
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[i * br + k][j * bc + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn matrix(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(-10.0..10.0f64, c), r))
}

fn spd_covariance() -> impl Strategy<Value = PatchCovariance> {
    (prop::array::uniform9(prop::array::uniform9(-1.0..1.0f64)), 0.05..2.0f64).prop_map(|(a, jitter)| {
        let mut c = [[0.0; 9]; 9];
        for i in 0..9 {
            for j in 0..9 {
                c[i][j] = (0..9).map(|k| a[i][k] * a[j][k]).sum::<f64>();
            }
            c[i][i] += jitter;
        }
        c
    })
}

fn params() -> impl Strategy<Value = ModelParams> {
    (-10.0..10.0f64, 0.1..10.0f64, -0.5..0.5f64).prop_map(|(m, s, b)| ModelParams::new(m, s, b).unwrap())
}

fn cofactor_inverse(m: &Mat3) -> Mat3 {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let cof = [
        [c(1, 2, 1, 2), -c(1, 2, 0, 2), c(1, 2, 0, 1)],
        [-c(0, 2, 1, 2), c(0, 2, 0, 2), -c(0, 2, 0, 1)],
        [c(0, 1, 1, 2), -c(0, 1, 0, 2), c(0, 1, 0, 1)],
    ];
    let det = m[0][0] * cof[0][0] + m[0][1] * cof[0][1] + m[0][2] * cof[0][2];
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            inv[i][j] = cof[j][i] / det;
        }
    }
    inv
}

proptest! {
    #[test]
    fn kron_sum_matches_explicit_product(a in matrix(4), b in matrix(4)) {
        let explicit: f64 = explicit_kron(&a, &b).iter().flatten().sum();
        let flat_a: Vec<f64> = a.concat();
        let flat_b: Vec<f64> = b.concat();
        let fast = kron_sum(&flat_a, &flat_b);
        prop_assert!((fast - explicit).abs() <= 1e-12 * explicit.abs().max(1.0));
    }

    #[test]
    fn decompose_reassembles(cov in spd_covariance()) {
        let (rho, minus) = decompose(&cov);
        let others: Vec<usize> = (0..9).filter(|&k| k != CENTER).collect();
        for (a, &i) in others.iter().enumerate() {
            prop_assert_eq!(rho[a], cov[CENTER][i]);
            for (b, &j) in others.iter().enumerate() {
                prop_assert_eq!(minus[a][b], cov[i][j]);
            }
        }
    }

    #[test]
    fn metric_structure(p in params(), cov in spd_covariance()) {
        let stats = PatchStats::from_covariance(cov, 100);
        let g = metric_tensor(&p, &stats, 8).unwrap().matrix();
        let d = metric_derivatives(&p, &stats, 8).unwrap();
        for m in [g, d.dg_dtheta2.matrix(), d.dg_dtheta3.matrix()] {
            prop_assert_eq!(m[0][1], 0.0);
            prop_assert_eq!(m[0][2], 0.0);
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert_eq!(m[i][j], m[j][i]);
                }
            }
        }
    }

    #[test]
    fn inverse_matches_cofactor_oracle(p in params(), cov in spd_covariance(), lambda in 0.0..0.1f64) {
        let stats = PatchStats::from_covariance(cov, 100);
        let g = metric_tensor(&p, &stats, 8).unwrap();
        let Ok(inv) = inverse_metric(&g, lambda) else { return Ok(()) };
        let mut reg = g.matrix();
        for (i, row) in reg.iter_mut().enumerate() {
            row[i] += lambda;
        }
        let oracle = cofactor_inverse(&reg);
        let scale = oracle.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(max_abs_diff(&inv.g_inv.matrix(), &oracle) <= 1e-10 * scale);
        let cond = scale * reg.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(max_abs_diff(&mat_mul(&inv.g_inv.matrix(), &reg), &identity()) <= 1e-12 * cond.max(1.0));
    }

    #[test]
    fn christoffel_forms_agree(p in params(), cov in spd_covariance(), lambda in 0.001..0.1f64) {
        let stats = PatchStats::from_covariance(cov, 100);
        let g = metric_tensor(&p, &stats, 8).unwrap();
        let Ok(inv) = inverse_metric(&g, lambda) else { return Ok(()) };
        let d = metric_derivatives(&p, &stats, 8).unwrap();
        let a = christoffel_specialized(&inv, &d);
        let b = christoffel_general(&inv, &d);
        for k in 0..3 {
            let scale = b.upper(k).iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
            prop_assert!(max_abs_diff(a.upper(k), b.upper(k)) <= 1e-12 * scale);
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert_eq!(a.upper(k)[i][j], a.upper(k)[j][i]);
                }
            }
        }
        for (k, i, j) in [(0, 0, 0), (0, 1, 1), (0, 1, 2), (0, 2, 2), (1, 0, 1), (1, 0, 2), (2, 0, 1), (2, 0, 2)] {
            prop_assert_eq!(a.upper(k)[i][j], 0.0);
            prop_assert_eq!(a.upper(k)[j][i], 0.0);
        }
    }

    #[test]
    fn derivatives_match_finite_differences(p in params(), rho in -3.0..3.0f64, sm in 0.5..20.0f64) {
        prop_assume!(p.sigma2 > 0.2);
        let sums = TensorSums::from_totals(rho, sm);
        let check = fd_metric_derivatives_with(&p, &sums, 8, 1e-4, G33BetaDerivative::Exact).unwrap();
        prop_assert!(check.passes(1e-5), "{:?}", check);
    }

    #[test]
    fn entropy_is_quadratic_in_beta(s in 0.1..10.0f64, rho in -3.0..3.0f64, sm in 0.0..20.0f64) {
        let sums = TensorSums::from_totals(rho, sm);
        let h = |b: f64| entropy_from_sums(&ModelParams::new(0.0, s, b).unwrap(), &sums).unwrap().h_beta;
        let (h0, h1, h2) = (h(0.0), h(0.1), h(0.2));
        // Newton forward differences on the grid 0, 0.1, 0.2 extrapolated to 0.3.
        let predicted = h0 - 3.0 * h1 + 3.0 * h2;
        prop_assert!((predicted - h(0.3)).abs() <= 1e-12);
    }

    #[test]
    fn score_matches_finite_differences(
        p in (-2.0..2.0f64, 0.5..4.0f64, -0.2..0.2f64).prop_map(|(m, s, b)| ModelParams::new(m, s, b).unwrap()),
        x in -5.0..5.0f64,
        nb in prop::collection::vec(-5.0..5.0f64, 8),
    ) {
        let check = fd_score_check(&p, &[(x, nb)], 1e-5).unwrap();
        prop_assert!(check.max_rel_error < 1e-6, "{:?}", check);
    }
}

#[test]
fn independence_metric_at_several_variances() {
    for s in [0.5, 1.0, 2.0, 10.0] {
        let p = ModelParams::new(1.0, s, 0.0).unwrap();
        let g = metric_tensor(&p, &PatchStats::independent(s), 8).unwrap().matrix();
        assert_eq!(g, [[1.0 / s, 0.0, 0.0], [0.0, 1.0 / (2.0 * s * s), 0.0], [0.0, 0.0, 8.0]]);
    }
}

#[test]
fn sums_from_stats_match_totals() {
    let mut cov = [[0.0; 9]; 9];
    for (i, row) in cov.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = 1.0 / (1.0 + (i as f64 - j as f64).abs());
        }
    }
    let stats = PatchStats::from_covariance(cov, 10);
    let a = TensorSums::from_stats(&stats);
    let b = TensorSums::from_totals(sum_all(&stats.rho), sum_all(&stats.sigma_minus));
    assert_eq!(a, b);
    let p = ModelParams::new(0.0, 1.5, 0.07).unwrap();
    assert_eq!(metric_from_sums(&p, &a, 8), metric_tensor(&p, &stats, 8));
    assert_eq!(
        derivatives_from_sums(&p, &a, 8, G33BetaDerivative::Exact),
        metric_derivatives(&p, &stats, 8)
    );
}
