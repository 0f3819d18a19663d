#![allow(dead_code)]

use npu::units::{Chain, Layer, LayerKind};
use npu::{Graph, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries with magnitude in `[lo, hi]`, negative with probability one half
/// when `mixed_sign`.
pub fn random_input(rng: &mut impl Rng, rows: usize, cols: usize, lo: f64, hi: f64, mixed_sign: bool) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| {
            let m = rng.gen_range(lo..hi);
            if mixed_sign && rng.gen_bool(0.5) {
                -m
            } else {
                m
            }
        })
        .collect();
    Tensor::new(rows, cols, data).unwrap()
}

/// `Σ weights ⊙ chain(x)`, so every output gets a distinct sensitivity.
pub fn weighted_output(chain: &Chain, x: &Tensor, weights: &Tensor) -> f64 {
    let y = chain.eval(x).unwrap();
    y.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum()
}

/// Largest error between autodiff and central differences over all
/// parameters, scaled by `max(|analytic|, |numeric|, floor)`.
pub fn fd_max_rel_error(chain: &Chain, x: &Tensor, weights: &Tensor, h: f64, floor: f64) -> f64 {
    let mut g = Graph::new();
    let bound = chain.bind(&mut g);
    let xv = g.constant(x.clone());
    let y = chain.forward(&mut g, &bound, xv).unwrap();
    let wv = g.constant(weights.clone());
    let prod = g.mul(y, wv).unwrap();
    let loss = g.sum(prod);
    g.backward(loss).unwrap();
    let grads: Vec<Tensor> = bound.all().map(|v| g.grad(v).unwrap().clone()).collect();

    let mut worst: f64 = 0.0;
    let mut probe = chain.clone();
    for (p, grad) in grads.iter().enumerate() {
        for k in 0..grad.len() {
            let orig = probe.params_mut()[p].data()[k];
            probe.params_mut()[p].data_mut()[k] = orig + h;
            let up = weighted_output(&probe, x, weights);
            probe.params_mut()[p].data_mut()[k] = orig - h;
            let down = weighted_output(&probe, x, weights);
            probe.params_mut()[p].data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grad.data()[k];
            let scale = analytic.abs().max(numeric.abs()).max(floor);
            worst = worst.max((analytic - numeric).abs() / scale);
        }
    }
    worst
}

/// A single random layer of `kind` with parameters kept away from the clamp
/// and gate boundaries, where the derivative is undefined.
pub fn smooth_layer(kind: LayerKind, inp: usize, out: usize, seed: u64) -> Chain {
    let mut chain = Chain::init(&[(kind, inp, out)], seed).unwrap();
    let mut r = rng(seed ^ 0xabc);
    match &mut chain.layers_mut()[0] {
        Layer::Nau(p) => p.a.data_mut().iter_mut().for_each(|v| *v = r.gen_range(-0.9..0.9)),
        Layer::Nmu(p) => p.m.data_mut().iter_mut().for_each(|v| *v = r.gen_range(0.1..0.9)),
        Layer::Npu(p) => {
            p.wr.data_mut().iter_mut().for_each(|v| *v = r.gen_range(-1.5..1.5));
            if !p.real_only {
                p.wi.data_mut().iter_mut().for_each(|v| *v = r.gen_range(-1.0..1.0));
            }
            p.g.data_mut().iter_mut().for_each(|v| *v = r.gen_range(0.1..0.9));
        }
        Layer::Nalu(p) => {
            for t in [&mut p.w, &mut p.m, &mut p.g] {
                t.data_mut().iter_mut().for_each(|v| *v = r.gen_range(-1.0..1.0));
            }
        }
        Layer::Dense(p) => p.b.data_mut().iter_mut().for_each(|v| *v = r.gen_range(-0.5..0.5)),
    }
    chain
}

/// Inputs that keep every unit away from its non-smooth points: NMU,
/// NALU and Dense see any sign; power units see magnitudes in `[0.3, 2]`.
pub fn smooth_input(kind: LayerKind, rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    match kind {
        LayerKind::NaiveNpu | LayerKind::Npu | LayerKind::RealNpu | LayerKind::Nalu => {
            random_input(rng, rows, cols, 0.3, 2.0, true)
        }
        _ => random_input(rng, rows, cols, 0.0, 2.0, true),
    }
}

pub const ALL_KINDS: [LayerKind; 8] = [
    LayerKind::Nau,
    LayerKind::Nmu,
    LayerKind::Nalu,
    LayerKind::NaiveNpu,
    LayerKind::Npu,
    LayerKind::RealNpu,
    LayerKind::Dense,
    LayerKind::DenseSigmoid,
];
