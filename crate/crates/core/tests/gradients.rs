//! Analytic gradients against central finite differences.

mod common;

use common::*;
use ndarray::Array2;
use proxyhash::network::Mlp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn network_backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut checked = 0;
    while checked < 100 {
        let input = rng.gen_range(1..=8);
        let hidden: Vec<usize> = (0..rng.gen_range(0..=2)).map(|_| rng.gen_range(1..=8)).collect();
        let k = rng.gen_range(1..=8);
        let batch = rng.gen_range(1..=3);
        let net = Mlp::xavier(input, &hidden, k, &mut rng).unwrap();
        // Non-zero biases so hidden units are not all symmetric about zero.
        let mut theta = flatten(&net);
        theta.iter_mut().for_each(|t| *t += rng.gen_range(-0.3..0.3));
        let net = unflatten(&net, &theta);
        let x = Array2::from_shape_simple_fn((batch, input), || rng.gen_range(-2.0..2.0));
        let up = Array2::from_shape_simple_fn((batch, k), || rng.gen_range(-1.0..1.0));
        if min_relu_margin(&net, &x) < 10.0 * FD_STEP {
            continue;
        }

        let trace = net.forward_trace(x.view()).unwrap();
        let (grads, dx) = net.backward(&trace, up.view()).unwrap();
        let analytic: Vec<f64> = grads
            .layers
            .iter()
            .flat_map(|g| g.weights.iter().chain(g.bias.iter()).copied().collect::<Vec<_>>())
            .collect();
        let objective = |t: &[f64]| {
            let out = unflatten(&net, t).forward_batch(x.view()).unwrap();
            (&out * &up).sum()
        };
        let numeric = numeric_gradient(&theta, FD_STEP, objective);
        let err = relative_error(&analytic, &numeric);
        assert!(err <= FD_TOL, "parameter gradient rel err {err}");

        let flat_x: Vec<f64> = x.iter().copied().collect();
        let numeric_dx = numeric_gradient(&flat_x, FD_STEP, |v| {
            let xv = Array2::from_shape_vec((batch, input), v.to_vec()).unwrap();
            (&net.forward_batch(xv.view()).unwrap() * &up).sum()
        });
        let err = relative_error(&dx.iter().copied().collect::<Vec<_>>(), &numeric_dx);
        assert!(err <= FD_TOL, "input gradient rel err {err}");
        checked += 1;
    }
}

#[test]
fn phnet_loss_gradient_matches_finite_differences() {
    let err = gradcheck::phnet(101, 100);
    assert!(err <= FD_TOL, "rel err {err}");
}

#[test]
fn margin_softmax_gradient_matches_finite_differences() {
    let err = gradcheck::margin_softmax(102, 100);
    assert!(err <= FD_TOL, "rel err {err}");
}

#[test]
fn inter_modal_gradient_matches_finite_differences() {
    let err = gradcheck::inter_modal(103, 100);
    assert!(err <= FD_TOL, "rel err {err}");
}

#[test]
fn total_objective_gradient_matches_finite_differences() {
    let err = gradcheck::total(104, 100);
    assert!(err <= FD_TOL, "rel err {err}");
}

#[test]
fn pairwise_gradient_matches_finite_differences() {
    let err = gradcheck::pairwise(105, 100);
    assert!(err <= FD_TOL, "rel err {err}");
}
