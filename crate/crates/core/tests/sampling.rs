use gmrf_geodesic::sampler::{local_conditional_logpdf, natural_decomposition, pseudo_log_likelihood};
use gmrf_geodesic::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn hood() -> NeighborhoodSpec {
    NeighborhoodSpec::second_order()
}

fn cfg(seed: u64, kernel: Kernel) -> McmcConfig {
    McmcConfig { seed, kernel, ..McmcConfig::default() }
}

fn neighbor_correlation(f: &FieldSample) -> f64 {
    let (m, v) = (f.mean(), f.variance());
    let (h, w) = f.dims();
    let mut acc = 0.0;
    for r in 0..h {
        for c in 0..w {
            acc += (f.get(r, c) - m) * (f.get(r, (c + 1) % w) - m);
        }
    }
    acc / (h * w) as f64 / v
}

#[test]
fn gibbs_at_independence_matches_moments() {
    let p = ModelParams::new(2.0, 3.0, 0.0).unwrap();
    let f = sample_field(&p, &hood(), &cfg(7, Kernel::Gibbs), None).unwrap();
    let n = f.values().len() as f64;
    assert!((f.mean() - 2.0).abs() < 4.0 * (3.0 / n).sqrt());
    assert!((f.variance() / 3.0 - 1.0).abs() < 0.1);
    assert!(neighbor_correlation(&f).abs() < 0.1);
}

#[test]
fn metropolis_at_independence_halves_the_variance() {
    let p = ModelParams::new(0.0, 2.0, 0.0).unwrap();
    let f = sample_field(&p, &hood(), &cfg(3, Kernel::Metropolis), None).unwrap();
    assert!((f.variance() / 1.0 - 1.0).abs() < 0.1, "variance {}", f.variance());
}

#[test]
fn positive_coupling_raises_neighbor_correlation() {
    for seed in 0..10 {
        let at = |b: f64| {
            let p = ModelParams::new(0.0, 1.0, b).unwrap();
            neighbor_correlation(&sample_field(&p, &hood(), &cfg(seed, Kernel::Gibbs), None).unwrap())
        };
        let (c0, c1) = (at(0.0), at(0.1));
        assert!(c1 > c0 + 0.1, "seed {seed}: {c0} vs {c1}");
    }
}

#[test]
fn sampling_is_deterministic() {
    let p = ModelParams::new(1.0, 1.0, 0.05).unwrap();
    for kernel in [Kernel::Gibbs, Kernel::Metropolis] {
        let a = sample_field(&p, &hood(), &cfg(11, kernel), None).unwrap();
        let b = sample_field(&p, &hood(), &cfg(11, kernel), None).unwrap();
        let c = sample_field(&p, &hood(), &cfg(12, kernel), None).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let a2 = sample_field(&p, &hood(), &cfg(11, kernel), Some(&a)).unwrap();
        let b2 = sample_field(&p, &hood(), &cfg(11, kernel), Some(&b)).unwrap();
        assert_eq!(a2, b2);
    }
}

#[test]
fn streams_are_independent() {
    let p = ModelParams::new(0.0, 1.0, 0.0).unwrap();
    let a = FieldSampler::with_stream(cfg(5, Kernel::Gibbs), 0).unwrap().cold(&p, &hood()).unwrap();
    let b = FieldSampler::with_stream(cfg(5, Kernel::Gibbs), 1).unwrap().cold(&p, &hood()).unwrap();
    assert_ne!(a, b);
}

#[test]
fn natural_decomposition_reproduces_pseudo_likelihood() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for k in 0..100 {
        let boundary = if k % 2 == 0 { Boundary::Toroidal } else { Boundary::InteriorOnly };
        let values: Vec<f64> = (0..64).map(|_| rng.random_range(-3.0..3.0)).collect();
        let f = FieldSample::new(8, 8, values, boundary).unwrap();
        let p = ModelParams::new(rng.random_range(-2.0..2.0), rng.random_range(0.2..4.0), rng.random_range(-0.3..0.3)).unwrap();
        let pll = pseudo_log_likelihood(&f, &p, &hood()).unwrap();
        let nat = natural_decomposition(&f, &p, &hood()).unwrap();
        assert!((nat.log_likelihood() - pll).abs() <= 1e-9 * pll.abs().max(1.0), "{} vs {pll}", nat.log_likelihood());
    }
}

#[test]
fn conditional_density_integrates_to_one() {
    let p = ModelParams::new(0.5, 1.7, 0.08).unwrap();
    let nb = [0.1, -0.4, 1.2, 0.0, 0.7, -1.1, 0.3, 0.9];
    let sd = p.sigma2.sqrt();
    let (lo, hi, n) = (-20.0 * sd, 20.0 * sd, 20_000);
    let dx = (hi - lo) / n as f64;
    let total: f64 = (0..=n)
        .map(|i| {
            let x = lo + i as f64 * dx;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            w * local_conditional_logpdf(x, &nb, &p).unwrap().exp()
        })
        .sum::<f64>()
        * dx;
    assert!((total - 1.0).abs() < 1e-9);
}
