//! Test-side oracles and random problem generators. Nothing here calls the
//! library's forward pass or derivative code.
#![allow(dead_code)]

use fbpnn::harness::config::{random_mlp, LayerShape};
use fbpnn::{Activation, Dataset, Mlp, ParamId, Sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ACTIVATIONS: [Activation; 3] = [
    Activation::LogSigmoid,
    Activation::TanSigmoid,
    Activation::Linear,
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn act(kind: Activation, g: f64) -> f64 {
    match kind {
        Activation::LogSigmoid => 1.0 / (1.0 + (-g).exp()),
        Activation::TanSigmoid => 2.0 / (1.0 + (-2.0 * g).exp()) - 1.0,
        Activation::Linear => g,
    }
}

/// Net input of layer `m` (0-based) for input `x`.
pub fn net_input(mlp: &Mlp, m: usize, x: &[f64]) -> Vec<f64> {
    let mut beta = x.to_vec();
    for (k, layer) in mlp.layers().iter().enumerate() {
        let g: Vec<f64> = (0..layer.out_width())
            .map(|i| {
                layer.bias(i)
                    + (0..layer.in_width())
                        .map(|j| layer.weight(i, j) * beta[j])
                        .sum::<f64>()
            })
            .collect();
        if k == m {
            return g;
        }
        beta = g.iter().map(|&v| act(layer.activation(), v)).collect();
    }
    unreachable!("layer index out of range")
}

/// Network output when layer `m`'s net input is replaced by `g`.
pub fn output_from(mlp: &Mlp, m: usize, g: &[f64]) -> Vec<f64> {
    let layers = mlp.layers();
    let mut beta: Vec<f64> = g.iter().map(|&v| act(layers[m].activation(), v)).collect();
    for layer in &layers[m + 1..] {
        beta = (0..layer.out_width())
            .map(|i| {
                let g = layer.bias(i)
                    + (0..layer.in_width())
                        .map(|j| layer.weight(i, j) * beta[j])
                        .sum::<f64>();
                act(layer.activation(), g)
            })
            .collect();
    }
    beta
}

pub fn output(mlp: &Mlp, x: &[f64]) -> Vec<f64> {
    output_from(mlp, 0, &net_input(mlp, 0, x))
}

pub fn sq_err(out: &[f64], q: &[f64]) -> f64 {
    out.iter().zip(q).map(|(b, q)| (q - b) * (q - b)).sum()
}

/// Mean over samples of the squared error, by the oracle forward pass.
pub fn loss(mlp: &Mlp, data: &Dataset) -> f64 {
    data.samples()
        .iter()
        .map(|s| sq_err(&output(mlp, &s.input), &s.target))
        .sum::<f64>()
        / data.len() as f64
}

/// Central difference of `loss` in one parameter.
pub fn fd_param(mlp: &Mlp, data: &Dataset, id: ParamId, h: f64) -> f64 {
    let x = mlp.get(id).unwrap();
    let mut m = mlp.clone();
    m.set(id, x + h).unwrap();
    let up = loss(&m, data);
    m.set(id, x - h).unwrap();
    let down = loss(&m, data);
    (up - down) / (2.0 * h)
}

/// Central difference of one sample's squared error in net input g_i^m.
pub fn fd_net_input(mlp: &Mlp, s: &Sample, m: usize, i: usize, h: f64) -> f64 {
    let g = net_input(mlp, m, &s.input);
    let at = |d: f64| {
        let mut g = g.clone();
        g[i] += d;
        sq_err(&output_from(mlp, m, &g), &s.target)
    };
    (at(h) - at(-h)) / (2.0 * h)
}

/// Random network with at most 3 layers and widths at most 4.
pub fn random_network(rng: &mut ChaCha8Rng) -> Mlp {
    let input = rng.gen_range(1..=4);
    let depth = rng.gen_range(1..=3);
    let layers: Vec<LayerShape> = (0..depth)
        .map(|_| LayerShape {
            width: rng.gen_range(1..=4),
            activation: ACTIVATIONS[rng.gen_range(0..3)],
        })
        .collect();
    random_mlp(input, &layers, rng.gen(), 1.5).unwrap()
}

pub fn random_dataset(rng: &mut ChaCha8Rng, mlp: &Mlp, samples: usize) -> Dataset {
    Dataset::new(
        (0..samples)
            .map(|_| {
                Sample::new(
                    (0..mlp.input_width())
                        .map(|_| rng.gen_range(-2.0..2.0))
                        .collect(),
                    (0..mlp.output_width())
                        .map(|_| rng.gen_range(-1.0..1.0))
                        .collect(),
                )
            })
            .collect(),
    )
    .unwrap()
}

/// |a − b| relative to the larger magnitude, with an absolute floor for
/// values that are zero up to finite-difference noise.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
