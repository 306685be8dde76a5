mod oracles;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use riskstop_core::metrics::auroc;
use riskstop_core::probe::{fit_logistic, LogisticObjective, TrainConfig};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..100 {
        let n = rng.random_range(5..40);
        let dim = rng.random_range(1..10);
        let features: Vec<f64> = (0..n * dim).map(|_| normal(&mut rng)).collect();
        let targets: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
        let l2 = if case % 3 == 0 { 0.0 } else { rng.random_range(0.0..0.5) };
        let obj = LogisticObjective {
            features: &features,
            dim,
            targets: &targets,
            sample_weights: &weights,
            l2,
        };
        let mut x: Vec<f64> = (0..=dim).map(|_| normal(&mut rng)).collect();
        x[dim] *= 0.5;

        let (_, grad, grad_b) = obj.loss_and_gradient(&x[..dim], x[dim]);
        let fd = oracles::finite_difference(|p| obj.loss(&p[..dim], p[dim]), &x, 1e-5);
        let analytic: Vec<f64> = grad.iter().copied().chain([grad_b]).collect();
        for (i, (&a, &f)) in analytic.iter().zip(&fd).enumerate() {
            let scale = a.abs().max(f.abs()).max(1e-3);
            assert!((a - f).abs() / scale < 1e-5, "case {case} coord {i}: {a} vs {f}");
        }
    }
}

#[test]
fn separable_toy_set_reaches_perfect_auroc() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dim = 4;
    let mut features = Vec::new();
    let mut targets = Vec::new();
    for i in 0..200 {
        let y = i % 2 == 0;
        let margin = if y { 1.0 } else { -1.0 };
        features.push(margin * rng.random_range(0.5..2.0));
        for _ in 1..dim {
            features.push(normal(&mut rng));
        }
        targets.push(y);
    }
    let fit = fit_logistic(&features, dim, &targets, &TrainConfig::default()).unwrap();
    let scores: Vec<f64> = features
        .chunks(dim)
        .map(|r| r.iter().zip(&fit.weights).map(|(a, b)| a * b).sum::<f64>() + fit.bias)
        .collect();
    assert_eq!(auroc(&scores, &targets).unwrap(), 1.0);
    assert!(fit.final_loss < fit.initial_loss);
}

#[test]
fn auroc_equals_pairwise_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..50 {
        let n = rng.random_range(2..300);
        // coarse scores force plenty of ties
        let levels = rng.random_range(2..20);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        labels[0] = true;
        labels[1] = false;
        let ours = auroc(&scores, &labels).unwrap();
        let theirs = oracles::pairwise_auroc(&scores, &labels);
        assert_eq!(ours, theirs, "case {case}");
    }
}
