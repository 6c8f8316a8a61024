//! Oracles shared by the integration suites: central finite differences and
//! random instance generators.

#![allow(dead_code)]

pub mod gradcheck;

use ndarray::Array2;
use proxyhash::codespace::{BinaryCode, ProxyCodebook};
use proxyhash::network::{Activation, Mlp};
use proxyhash::objectives::LabelSets;
use rand::Rng;

pub const FD_STEP: f64 = 1e-3;
pub const FD_TOL: f64 = 1e-4;

/// Central-difference gradient of `f` at `x`.
pub fn numeric_gradient(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|j| {
            probe[j] = x[j] + h;
            let up = f(&probe);
            probe[j] = x[j] - h;
            let down = f(&probe);
            probe[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// ‖a − b‖ / max(‖a‖, ‖b‖), zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub fn random_code(rng: &mut impl Rng, k: usize) -> BinaryCode {
    let signs: Vec<i8> = (0..k).map(|_| if rng.gen() { 1 } else { -1 }).collect();
    BinaryCode::from_signs(&signs).unwrap()
}

pub fn random_codebook(rng: &mut impl Rng, c: usize, k: usize) -> ProxyCodebook {
    ProxyCodebook::new((0..c).map(|_| random_code(rng, k)).collect()).unwrap()
}

/// Random non-empty positive set; each category is positive with prob 0.3.
pub fn random_labels(rng: &mut impl Rng, c: usize) -> LabelSets {
    let mut row: Vec<u8> = (0..c).map(|_| u8::from(rng.gen_bool(0.3))).collect();
    if row.iter().all(|&v| v == 0) {
        row[rng.gen_range(0..c)] = 1;
    }
    LabelSets::from_multi_hot(&row).unwrap()
}

pub fn random_continuous(rng: &mut impl Rng, k: usize, bound: f64) -> Vec<f64> {
    (0..k).map(|_| rng.gen_range(-bound..bound)).collect()
}

/// Flattened parameters of a network, in layer order (weights then bias).
pub fn flatten(net: &Mlp) -> Vec<f64> {
    net.layers()
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied().collect::<Vec<_>>())
        .collect()
}

/// Rebuilds `template` with the flattened parameters `theta`.
pub fn unflatten(template: &Mlp, theta: &[f64]) -> Mlp {
    let mut at = 0;
    let layers = template
        .layers()
        .iter()
        .map(|l| {
            let mut l = l.clone();
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = theta[at];
                at += 1;
            }
            l
        })
        .collect();
    Mlp::new(layers).unwrap()
}

/// Smallest |pre-activation| over relu units, to keep finite differences away
/// from kinks.
pub fn min_relu_margin(net: &Mlp, x: &Array2<f64>) -> f64 {
    let mut a = x.clone();
    let mut best = f64::INFINITY;
    for layer in net.layers() {
        let mut z = a.dot(&layer.weights.t());
        z += &layer.bias;
        if layer.activation == Activation::Relu {
            best = z.iter().fold(best, |m, v| m.min(v.abs()));
            z.mapv_inplace(|v| v.max(0.0));
        } else {
            z.mapv_inplace(f64::tanh);
        }
        a = z;
    }
    best
}
