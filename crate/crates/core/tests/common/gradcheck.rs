//! Finite-difference sweeps over random loss instances. Each returns the
//! largest relative error seen over `count` instances.

use ndarray::Array2;
use proxyhash::objectives::{
    consensus_code, inter_modal_loss, margin_dynamic_softmax, pairwise_loss_ablation, phnet_loss, total_objective,
    Hyperparams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

pub fn phnet(seed: u64, count: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut checked, mut worst) = (0, 0.0f64);
    while checked < count {
        let c = rng.gen_range(1..=8);
        let k = rng.gen_range(2..=16);
        let g: Array2<f64> = Array2::from_shape_simple_fn((c, k), || rng.gen_range(-0.95..0.95));
        // Resample instances near the hinge or sign kinks.
        let gram = g.dot(&g.t());
        let near_kink = (0..c).any(|i| (0..c).any(|j| i != j && gram[[i, j]].abs() < 0.05))
            || g.iter().any(|v| v.abs() < 10.0 * FD_STEP);
        if near_kink {
            continue;
        }
        let (alpha, beta) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let (_, grad) = phnet_loss(g.view(), alpha, beta).unwrap();
        let flat: Vec<f64> = g.iter().copied().collect();
        let numeric = numeric_gradient(&flat, FD_STEP, |v| {
            let m = Array2::from_shape_vec((c, k), v.to_vec()).unwrap();
            phnet_loss(m.view(), alpha, beta).unwrap().0
        });
        worst = worst.max(relative_error(&grad.iter().copied().collect::<Vec<_>>(), &numeric));
        checked += 1;
    }
    worst
}

pub fn margin_softmax(seed: u64, count: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let (c, k) = (rng.gen_range(2..=16), rng.gen_range(4..=64));
        let g = random_codebook(&mut rng, c, k);
        let labels = random_labels(&mut rng, c);
        let b = random_continuous(&mut rng, k, 0.9);
        let (eta, mu) = (rng.gen_range(0.05..1.0), rng.gen_range(0.0..1.0));
        let l = margin_dynamic_softmax(&b, &labels, &g, eta, mu).unwrap();
        let numeric = numeric_gradient(&b, FD_STEP, |v| margin_dynamic_softmax(v, &labels, &g, eta, mu).unwrap().value);
        worst = worst.max(relative_error(&l.grad, &numeric));
    }
    worst
}

pub fn inter_modal(seed: u64, count: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let (c, k) = (rng.gen_range(2..=16), rng.gen_range(4..=64));
        let g = random_codebook(&mut rng, c, k);
        let labels = random_labels(&mut rng, c);
        let (v, t) = (random_continuous(&mut rng, k, 0.9), random_continuous(&mut rng, k, 0.9));
        let (eta, mu) = (rng.gen_range(0.05..1.0), rng.gen_range(0.0..1.0));
        let l = inter_modal_loss(&v, &t, &labels, &g, eta, mu).unwrap();
        let nv = numeric_gradient(&v, FD_STEP, |x| inter_modal_loss(x, &t, &labels, &g, eta, mu).unwrap().value);
        let nt = numeric_gradient(&t, FD_STEP, |x| inter_modal_loss(&v, x, &labels, &g, eta, mu).unwrap().value);
        worst = worst.max(relative_error(&l.grad_img, &nv)).max(relative_error(&l.grad_txt, &nt));
    }
    worst
}

pub fn total(seed: u64, count: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let (c, k) = (rng.gen_range(2..=16), rng.gen_range(4..=64));
        let g = random_codebook(&mut rng, c, k);
        let labels = random_labels(&mut rng, c);
        let (v, t) = (random_continuous(&mut rng, k, 0.9), random_continuous(&mut rng, k, 0.9));
        let hp = Hyperparams {
            eta: rng.gen_range(0.05..1.0),
            mu: rng.gen_range(0.0..1.0),
            lambda: rng.gen_range(0.0..1.0),
            gamma: rng.gen_range(0.0..1.0),
            bits: k,
            ..Default::default()
        };
        // The consensus target is frozen at the base point.
        let cons = consensus_code(&v, &t).unwrap();
        let l = total_objective(&v, &t, &labels, &g, &cons, &hp).unwrap();
        let nv = numeric_gradient(&v, FD_STEP, |x| total_objective(x, &t, &labels, &g, &cons, &hp).unwrap().value);
        let nt = numeric_gradient(&t, FD_STEP, |x| total_objective(&v, x, &labels, &g, &cons, &hp).unwrap().value);
        worst = worst.max(relative_error(&l.grad_img, &nv)).max(relative_error(&l.grad_txt, &nt));
    }
    worst
}

pub fn pairwise(seed: u64, count: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let (c, k) = (rng.gen_range(1..=16), rng.gen_range(4..=64));
        let g = random_codebook(&mut rng, c, k);
        let s: Vec<bool> = (0..c).map(|_| rng.gen()).collect();
        let b = random_continuous(&mut rng, k, 0.9);
        let l = pairwise_loss_ablation(&b, &s, &g).unwrap();
        let numeric = numeric_gradient(&b, FD_STEP, |x| pairwise_loss_ablation(x, &s, &g).unwrap().value);
        worst = worst.max(relative_error(&l.grad, &numeric));
    }
    worst
}
