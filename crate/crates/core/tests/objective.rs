use std::sync::Arc;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rssvrg::linalg::{dot, norm2};
use rssvrg::objective::HingeComponents;
use rssvrg::rng::seeded;
use rssvrg::{CompositeProblem, RankingInstance, RegSetting, Regularizer};

fn hinge_problem() -> (RankingInstance, CompositeProblem) {
    let inst = RankingInstance::generate(200, 6, 41).unwrap();
    let p = inst.to_problem().unwrap();
    (inst, p)
}

fn random_point(rng: &mut impl Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Minimizes `h(x) = ½(x − y)² + γ(λ₁x² + λ₂|x|)` over a step-1e-4 grid on [-10, 10].
fn grid_prox(y: f64, gamma: f64, l1: f64, l2: f64) -> (f64, f64) {
    let h = |x: f64| 0.5 * (x - y) * (x - y) + gamma * (l1 * x * x + l2 * x.abs());
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=200_000 {
        let x = -10.0 + k as f64 * 1e-4;
        let v = h(x);
        if v < best.0 {
            best = (v, x);
        }
    }
    best
}

#[test]
fn prox_examples_match_grid_oracle() {
    // l1(λ₂=1), y=(3, −0.5, 0), γ=1
    let x = Regularizer::L1 { lambda2: 1.0 }.prox(&[3.0, -0.5, 0.0], 1.0).unwrap();
    for (xi, yi) in x.iter().zip([3.0, -0.5, 0.0]) {
        let (_, xg) = grid_prox(yi, 1.0, 0.0, 1.0);
        assert!((xi - xg).abs() <= 1e-4);
    }
    assert_eq!(x, vec![2.0, 0.0, 0.0]);

    let (_, xg) = grid_prox(3.0, 1.0, 0.5, 1.0);
    assert!((xg - 1.0).abs() <= 1e-4);
}

#[test]
fn elastic_net_prox_beats_grid() {
    let mut rng = seeded(3);
    for _ in 0..200 {
        let (l1, l2) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let gamma = rng.gen_range(0.01..2.0);
        let y: f64 = rng.gen_range(-5.0..5.0);
        let reg = Regularizer::ElasticNet { lambda1: l1, lambda2: l2 };
        let x = reg.prox(&[y], gamma).unwrap()[0];
        let h = 0.5 * (x - y) * (x - y) + gamma * reg.value(&[x]);
        let (hg, _) = grid_prox(y, gamma, l1, l2);
        assert!(h <= hg + 1e-6, "y={y} γ={gamma}: {h} > {hg}");
    }
}

#[test]
fn subgradient_inequality_on_hinge() {
    let (_, p) = hinge_problem();
    let mut rng = seeded(5);
    for _ in 0..1000 {
        let i = rng.gen_range(0..p.n_components());
        let x = random_point(&mut rng, p.dim(), 0.05);
        let y = random_point(&mut rng, p.dim(), 0.05);
        let g = p.component_subgradient(i, &x).unwrap();
        let diff: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let slack = p.component_value(i, &y).unwrap() - p.component_value(i, &x).unwrap() - dot(&g, &diff);
        assert!(slack >= -1e-9, "slack {slack}");
    }
}

#[test]
fn hinge_loss_is_midpoint_convex() {
    let (_, p) = hinge_problem();
    let mut rng = seeded(6);
    for _ in 0..1000 {
        let x = random_point(&mut rng, p.dim(), 0.05);
        let y = random_point(&mut rng, p.dim(), 0.05);
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let lhs = p.loss(&mid).unwrap();
        let rhs = 0.5 * (p.loss(&x).unwrap() + p.loss(&y).unwrap());
        assert!(lhs <= rhs + 1e-9);
    }
}

#[test]
fn hinge_subgradients_bounded_by_l0() {
    let (_, p) = hinge_problem();
    let mut rng = seeded(7);
    for _ in 0..1000 {
        let i = rng.gen_range(0..p.n_components());
        let x = random_point(&mut rng, p.dim(), 0.05);
        assert!(norm2(&p.component_subgradient(i, &x).unwrap()) <= p.lipschitz_l0());
    }
}

#[test]
#[allow(clippy::needless_range_loop)]
fn objective_matches_naive_sum() {
    let (inst, _) = hinge_problem();
    let p = CompositeProblem::new(
        Arc::new(HingeComponents::new(inst.dim(), inst.diffs().to_vec()).unwrap()),
        RegSetting::Elastic.regularizer(),
    )
    .unwrap();
    let mut rng = seeded(8);
    for _ in 0..50 {
        let w = random_point(&mut rng, p.dim(), 0.1);
        let mut total = 0.0;
        for i in 0..inst.n_pairs() {
            let mut margin = 0.0;
            for j in 0..inst.dim() {
                margin += inst.diff(i)[j] * w[j];
            }
            total += if 1.0 - margin > 0.0 { 1.0 - margin } else { 0.0 };
        }
        let mut r = 0.0;
        for v in &w {
            r += 0.01 * v * v + 0.01 * v.abs();
        }
        let naive = total / inst.n_pairs() as f64 + r;
        assert!((p.evaluate(&w).unwrap() - naive).abs() < 1e-12);
    }
}

#[test]
fn objective_invariant_under_reordering() {
    let (inst, p) = hinge_problem();
    let d = inst.dim();
    let mut order: Vec<usize> = (0..inst.n_pairs()).collect();
    order.shuffle(&mut seeded(9));
    let permuted: Vec<f64> = order.iter().flat_map(|&i| inst.diff(i).to_vec()).collect();
    let q = CompositeProblem::new(
        Arc::new(HingeComponents::new(d, permuted).unwrap()),
        p.regularizer(),
    )
    .unwrap();
    let mut rng = seeded(10);
    for _ in 0..100 {
        let w = random_point(&mut rng, d, 0.1);
        assert!((p.evaluate(&w).unwrap() - q.evaluate(&w).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn prox_is_nonexpansive_on_random_pairs() {
    let mut rng = seeded(11);
    for _ in 0..1000 {
        let reg = Regularizer::ElasticNet {
            lambda1: rng.gen_range(0.0..2.0),
            lambda2: rng.gen_range(0.0..2.0),
        };
        let gamma = rng.gen_range(1e-3..3.0);
        let y1 = random_point(&mut rng, 5, 10.0);
        let y2 = random_point(&mut rng, 5, 10.0);
        let (x1, x2) = (reg.prox(&y1, gamma).unwrap(), reg.prox(&y2, gamma).unwrap());
        let dx: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a - b).collect();
        let dy: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a - b).collect();
        assert!(norm2(&dx) <= norm2(&dy) + 1e-12);
    }
}

proptest! {
    #[test]
    fn prox_nonexpansive(
        y1 in prop::collection::vec(-50.0f64..50.0, 4),
        y2 in prop::collection::vec(-50.0f64..50.0, 4),
        l1 in 0.0f64..3.0,
        l2 in 0.0f64..3.0,
        gamma in 1e-4f64..5.0,
    ) {
        let reg = Regularizer::ElasticNet { lambda1: l1, lambda2: l2 };
        let x1 = reg.prox(&y1, gamma).unwrap();
        let x2 = reg.prox(&y2, gamma).unwrap();
        let dx: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a - b).collect();
        let dy: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a - b).collect();
        prop_assert!(norm2(&dx) <= norm2(&dy) + 1e-12);
    }

    #[test]
    fn regularizer_nonnegative(x in prop::collection::vec(-1e3f64..1e3, 1..8), l1 in 0.0f64..2.0, l2 in 0.0f64..2.0) {
        let reg = Regularizer::ElasticNet { lambda1: l1, lambda2: l2 };
        prop_assert!(reg.value(&x) >= 0.0);
    }
}
