//! Networks and datasets of the built-in experiments.

use crate::network::{Activation, Dataset, Layer, Mlp, ParamId, Sample};

/// First-layer weights of the 1-15-1 filter network. Slots 0 and 10 are the
/// tracked pair and are overwritten by each experiment's initial condition.
pub const EX5_W1: [f64; 15] = [
    0.0, 20.8597, 21.2543, -21.0232, -21.3975, 21.0826, -21.0743, 21.0052, 21.0272, 20.9446, 0.0,
    -21.1307, 21.2419, 20.9357, 21.0157,
];
pub const EX5_W2: [f64; 15] = [
    -0.7629, -0.7168, 1.1592, 0.4330, 0.9470, 0.5903, -1.1983, -0.7002, -0.3756, -1.0144, -0.2451,
    -1.3834, 0.4546, 0.2460, 0.3230,
];
pub const EX5_B1: [f64; 15] = [
    -21.0070, -18.1627, -14.6449, 11.9684, 8.0087, -5.7329, 2.0816, 0.7399, 2.7071, 6.1967,
    -8.9802, -11.7774, 14.6532, 18.0707, 20.9846,
];
pub const EX5_B2: f64 = -0.4954;

pub const TABLE1_INPUTS: [f64; 20] = [
    -1.0, -0.9, -0.8, -0.7, -0.6, -0.5, -0.4, -0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6,
    0.7, 0.8, 0.9,
];
pub const TABLE1_OUTPUTS: [f64; 20] = [
    -0.832, -0.423, -0.024, 0.344, 1.282, 3.456, 4.020, 3.232, 2.102, 1.504, 0.248, 1.242, 2.344,
    3.262, 2.052, 1.684, 1.022, 2.224, 3.022, 1.984,
];

/// Optimal values of the 1-2-1 log-sigmoid network:
/// (w1_1_1, w1_2_1, b1_1, b1_2, w2_1_1, w2_1_2, b2_1).
pub const FIG2_OPTIMAL: [f64; 7] = [10.0, 10.0, -5.0, 5.0, 1.0, 1.0, -1.0];

/// Tracked pair of the 1-2-1 experiments.
pub fn fig2_tracked() -> [ParamId; 2] {
    [ParamId::weight(1, 1, 1), ParamId::weight(2, 1, 1)]
}

/// Tracked pair of the filter experiments.
pub fn ex5_tracked() -> [ParamId; 2] {
    [ParamId::weight(1, 1, 1), ParamId::weight(1, 11, 1)]
}

/// 1-2-1 network, log-sigmoid in both layers. With `optimal = false` the
/// tracked pair is zeroed, ready for an experiment's initial condition.
pub fn build_fig2_network(optimal: bool) -> Mlp {
    let [w11, w21, b11, b12, w2a, w2b, b2] = FIG2_OPTIMAL;
    let (w11, w2a) = if optimal { (w11, w2a) } else { (0.0, 0.0) };
    Mlp::new(
        1,
        vec![
            Layer::new(1, 2, vec![w11, w21], vec![b11, b12], Activation::LogSigmoid)
                .expect("static shape"),
            Layer::new(2, 1, vec![w2a, w2b], vec![b2], Activation::LogSigmoid)
                .expect("static shape"),
        ],
    )
    .expect("static shape")
}

/// 41 points p = −2.0, −1.9, …, 2.0 labelled by the optimal 1-2-1 network.
pub fn build_fig3_dataset() -> Dataset {
    let mlp = build_fig2_network(true);
    let samples = (0..=40)
        .map(|k| {
            let p = (k as f64 - 20.0) / 10.0;
            let q = mlp.forward(&[p]).expect("width 1").output()[0];
            Sample::scalar(p, q)
        })
        .collect();
    Dataset::new(samples).expect("finite")
}

/// 1-15-1 network, tan-sigmoid hidden layer and linear output, with the
/// tracked pair zeroed.
pub fn build_ex5_network() -> Mlp {
    Mlp::new(
        1,
        vec![
            Layer::new(
                1,
                15,
                EX5_W1.to_vec(),
                EX5_B1.to_vec(),
                Activation::TanSigmoid,
            )
            .expect("static shape"),
            Layer::new(15, 1, EX5_W2.to_vec(), vec![EX5_B2], Activation::Linear)
                .expect("static shape"),
        ],
    )
    .expect("static shape")
}

/// The 20 input/output pairs of the nonlinear filter.
pub fn table1_dataset() -> Dataset {
    Dataset::from_pairs(TABLE1_INPUTS.into_iter().zip(TABLE1_OUTPUTS)).expect("finite")
}
