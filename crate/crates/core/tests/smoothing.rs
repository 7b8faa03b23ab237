use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rssvrg::linalg::norm2;
use rssvrg::objective::{AbsComponents, HingeComponents};
use rssvrg::rng::seeded;
use rssvrg::smoothing::{
    sample_batch, smoothed_component_grad, smoothed_full_grad, smoothed_gradient_table,
    PerturbationBatch,
};
use rssvrg::{CompositeProblem, RankingInstance, Regularizer, SmoothingDistribution, SmoothingKind};

fn abs1() -> CompositeProblem {
    CompositeProblem::new(Arc::new(AbsComponents::new(1)), Regularizer::None).unwrap()
}

/// Φ(z) via the complementary error function.
fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

#[test]
fn abs_gaussian_gradient_matches_closed_form() {
    let p = abs1();
    let dist = SmoothingDistribution::new(SmoothingKind::Gaussian, 1).unwrap();
    let m = 100_000;
    let batch = sample_batch(&dist, m, 1.0, 1, &mut seeded(21)).unwrap();
    let g = smoothed_component_grad(&p, 0, &[0.5], &batch).unwrap()[0];

    let expect = 1.0 - 2.0 * std_normal_cdf(-0.5);
    assert!((expect - 0.38292).abs() < 1e-5);
    let stderr = ((1.0 - expect * expect) / m as f64).sqrt();
    assert!((g - expect).abs() <= 3.0 * stderr, "{g} vs {expect} (se {stderr})");

    // independent plain-loop estimate from the same draws
    let naive: f64 = batch.iter().map(|z| (0.5 + z[0]).signum()).sum::<f64>() / m as f64;
    assert!((g - naive).abs() < 1e-12);
}

#[test]
fn abs_gaussian_value_at_zero_is_mean_abs_normal() {
    let p = abs1();
    let dist = SmoothingDistribution::new(SmoothingKind::Gaussian, 1).unwrap();
    let est = rssvrg::smoothing::estimate_smoothed_value(&p, &dist, &[0.0], 1.0, 100_000, &mut seeded(22))
        .unwrap();
    let expect = (2.0 / std::f64::consts::PI).sqrt();
    assert!((est.mean - expect).abs() <= 3.0 * est.stderr);
}

#[test]
fn antithetic_batch_gives_exact_zero_at_kink() {
    let p = abs1();
    let mut rng = seeded(23);
    let mut samples = Vec::new();
    for _ in 0..5000 {
        let z: f64 = StandardNormal.sample(&mut rng);
        samples.extend([z, -z]);
    }
    let batch = PerturbationBatch::from_samples(1, samples, 1.0, 0).unwrap();
    assert_eq!(smoothed_component_grad(&p, 0, &[0.0], &batch).unwrap()[0], 0.0);
}

#[test]
fn hinge_in_linear_region_gives_exact_negative_row() {
    // margin ≤ 1 − a‖u‖ keeps every perturbed point on the active side
    let u = vec![0.25, -0.125, 0.5];
    let p = CompositeProblem::new(
        Arc::new(HingeComponents::new(3, u.clone()).unwrap()),
        Regularizer::None,
    )
    .unwrap();
    let dist = SmoothingDistribution::new(SmoothingKind::L2Ball, 3).unwrap();
    let a = 0.1;
    let batch = sample_batch(&dist, 512, a, 0, &mut seeded(24)).unwrap();
    let x = [0.0, 0.0, 0.0];
    let g = smoothed_component_grad(&p, 0, &x, &batch).unwrap();
    for (gk, uk) in g.iter().zip(&u) {
        assert_eq!(*gk, -uk);
    }
}

#[test]
fn full_gradient_matches_double_loop() {
    let inst = RankingInstance::generate(60, 4, 25).unwrap();
    let p = inst.to_problem().unwrap();
    let dist = SmoothingDistribution::new(SmoothingKind::LinfBall, 4).unwrap();
    let batch = sample_batch(&dist, 7, 0.01, 1, &mut seeded(26)).unwrap();
    let x = [0.004, -0.002, 0.001, 0.003];

    let mut naive = [0.0; 4];
    for i in 0..inst.n_pairs() {
        let u = inst.diff(i);
        for z in batch.iter() {
            let mut margin = 0.0;
            for k in 0..4 {
                margin += u[k] * (x[k] + 0.01 * z[k]);
            }
            if 1.0 - margin > 0.0 {
                for k in 0..4 {
                    naive[k] -= u[k] / (7.0 * 60.0);
                }
            }
        }
    }
    let g = smoothed_full_grad(&p, &x, &batch).unwrap();
    for k in 0..4 {
        assert!((g[k] - naive[k]).abs() < 1e-10 * (1.0 + naive[k].abs()));
    }
    let table = smoothed_gradient_table(&p, &x, &batch).unwrap();
    assert_eq!(table.len(), 60);
    for i in [0, 17, 59] {
        assert_eq!(table.row(i), smoothed_component_grad(&p, i, &x, &batch).unwrap().as_slice());
    }
}

#[test]
fn smoothed_gradients_bounded_by_l0() {
    let inst = RankingInstance::generate(100, 5, 27).unwrap();
    let p = inst.to_problem().unwrap();
    let mut rng = seeded(28);
    for kind in SmoothingKind::ALL {
        let dist = SmoothingDistribution::new(kind, 5).unwrap();
        for _ in 0..200 {
            let batch = sample_batch(&dist, 5, 0.01, 1, &mut rng).unwrap();
            let i = rng.gen_range(0..100);
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-0.02..0.02)).collect();
            let g = smoothed_component_grad(&p, i, &x, &batch).unwrap();
            assert!(norm2(&g) <= p.lipschitz_l0() * (1.0 + 1e-12));
        }
    }
}

#[test]
fn batches_reproduce_under_seed() {
    let dist = SmoothingDistribution::new(SmoothingKind::Gaussian, 6).unwrap();
    let a = sample_batch(&dist, 9, 0.5, 2, &mut seeded(29)).unwrap();
    let b = sample_batch(&dist, 9, 0.5, 2, &mut seeded(29)).unwrap();
    let c = sample_batch(&dist, 9, 0.5, 2, &mut seeded(30)).unwrap();
    assert!(a.iter().eq(b.iter()));
    assert!(!a.iter().eq(c.iter()));
}
