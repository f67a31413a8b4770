//! n-order sensitivities: derivatives of the squared error with respect to
//! each neuron's net input, for n = 1, 2, 3.
//!
//! Higher orders follow a per-path recurrence. For layers feeding more than
//! one downstream neuron the per-path terms are summed and mixed partials
//! across neurons are ignored, so orders 2 and 3 are exact only on
//! single-path chains.

use crate::error::{Error, Result};
use crate::network::{Activation, ForwardTrace, Mlp};

/// Sensitivities of one layer, indexed `[order - 1][neuron]`.
pub type LayerSensitivity = [Vec<f64>; 3];

/// Sensitivities of every layer, first layer first.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityStack {
    layers: Vec<LayerSensitivity>,
}

impl SensitivityStack {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Order-`n` sensitivities (1 ≤ n ≤ 3) of layer `m` (0-based).
    pub fn get(&self, n: usize, m: usize) -> &[f64] {
        assert!((1..=3).contains(&n), "sensitivity order must be 1, 2 or 3");
        &self.layers[m][n - 1]
    }

    /// The three orders for neuron `i` of layer `m`.
    pub fn neuron(&self, m: usize, i: usize) -> [f64; 3] {
        let l = &self.layers[m];
        [l[0][i], l[1][i], l[2][i]]
    }

    pub fn layers(&self) -> &[LayerSensitivity] {
        &self.layers
    }

    pub fn output_layer(&self) -> &LayerSensitivity {
        self.layers.last().expect("stack has at least one layer")
    }
}

/// Seeds at the output layer from the residual e = q − β and the output
/// activation's derivatives.
pub fn output_sensitivities(
    trace: &ForwardTrace,
    target: &[f64],
    activation: Activation,
) -> Result<LayerSensitivity> {
    let out = trace.output();
    if target.len() != out.len() {
        return Err(Error::shape("target", out.len(), target.len()));
    }
    let g = trace.net_input(trace.depth() - 1);
    let mut seeds: LayerSensitivity = [
        vec![0.0; out.len()],
        vec![0.0; out.len()],
        vec![0.0; out.len()],
    ];
    for i in 0..out.len() {
        let e = target[i] - out[i];
        let [_, d1, d2, d3] = activation.derivatives(g[i]);
        seeds[0][i] = -2.0 * e * d1;
        seeds[1][i] = -2.0 * (e * d2 - d1 * d1);
        seeds[2][i] = -2.0 * (e * d3 - 3.0 * d1 * d2);
    }
    Ok(seeds)
}

/// Propagates output seeds back to the first layer:
/// ρ_n[m][j] = Σ_i (w^{m+1}_{ij} · f^m'(g^m_j))^n · ρ_n[m+1][i].
#[allow(clippy::needless_range_loop)]
pub fn backprop_sensitivities(
    mlp: &Mlp,
    trace: &ForwardTrace,
    seeds: LayerSensitivity,
) -> Result<SensitivityStack> {
    let depth = mlp.depth();
    if trace.depth() != depth {
        return Err(Error::shape("trace depth", depth, trace.depth()));
    }
    for s in &seeds {
        if s.len() != mlp.output_width() {
            return Err(Error::shape(
                "output sensitivities",
                mlp.output_width(),
                s.len(),
            ));
        }
    }
    let layers = mlp.layers();
    let mut stack = vec![seeds];
    for m in (0..depth - 1).rev() {
        let next = &layers[m + 1];
        let upstream = stack.last().expect("seeded");
        let act = layers[m].activation();
        let width = layers[m].out_width();
        let mut cur: LayerSensitivity = [vec![0.0; width], vec![0.0; width], vec![0.0; width]];
        for j in 0..width {
            let slope = act.derivatives(trace.net_input(m)[j])[1];
            for i in 0..next.out_width() {
                let a = next.weight(i, j) * slope;
                let mut an = a;
                for n in 0..3 {
                    cur[n][j] += an * upstream[n][i];
                    an *= a;
                }
            }
        }
        stack.push(cur);
    }
    stack.reverse();
    Ok(SensitivityStack { layers: stack })
}

/// Forward-traced sensitivities for one sample.
pub fn sensitivities(mlp: &Mlp, trace: &ForwardTrace, target: &[f64]) -> Result<SensitivityStack> {
    let act = mlp.layers()[mlp.depth() - 1].activation();
    let seeds = output_sensitivities(trace, target, act)?;
    backprop_sensitivities(mlp, trace, seeds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Layer;
    use approx::assert_relative_eq;

    fn single_linear(w: f64, b: f64) -> Mlp {
        Mlp::new(
            1,
            vec![Layer::new(1, 1, vec![w], vec![b], Activation::Linear).unwrap()],
        )
        .unwrap()
    }

    fn fig2_optimal() -> Mlp {
        Mlp::new(
            1,
            vec![
                Layer::from_rows(
                    vec![vec![10.0], vec![10.0]],
                    vec![-5.0, 5.0],
                    Activation::LogSigmoid,
                )
                .unwrap(),
                Layer::from_rows(vec![vec![1.0, 1.0]], vec![-1.0], Activation::LogSigmoid).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn linear_seeds_at_perfect_fit() {
        let mlp = single_linear(2.0, 0.5);
        let trace = mlp.forward(&[1.0]).unwrap();
        let s = output_sensitivities(&trace, &[2.5], Activation::Linear).unwrap();
        assert_eq!(s, [vec![0.0], vec![2.0], vec![0.0]]);
    }

    #[test]
    fn linear_seeds_with_unit_residual() {
        let mlp = single_linear(1.0, 0.0);
        let trace = mlp.forward(&[1.0]).unwrap();
        let s = output_sensitivities(&trace, &[0.0], Activation::Linear).unwrap();
        assert_eq!(s, [vec![2.0], vec![2.0], vec![0.0]]);
    }

    #[test]
    fn log_sigmoid_seeds_at_zero() {
        let mlp = Mlp::new(
            1,
            vec![Layer::new(1, 1, vec![0.0], vec![0.0], Activation::LogSigmoid).unwrap()],
        )
        .unwrap();
        let trace = mlp.forward(&[0.3]).unwrap();
        let s = output_sensitivities(&trace, &[1.0], Activation::LogSigmoid).unwrap();
        assert_relative_eq!(s[0][0], -0.25, max_relative = 1e-15);
        assert_relative_eq!(s[1][0], 0.125, max_relative = 1e-15);
        // (1 − σ)² = (1/2 − g/4 + g³/48 + …)² has g³ coefficient 1/48, so the third derivative is 1/8
        assert_relative_eq!(s[2][0], 0.125, max_relative = 1e-15);
    }

    #[test]
    fn seeds_reject_wrong_target_width() {
        let mlp = single_linear(1.0, 0.0);
        let trace = mlp.forward(&[1.0]).unwrap();
        assert!(output_sensitivities(&trace, &[0.0, 1.0], Activation::Linear).is_err());
    }

    #[test]
    fn zero_downstream_weights_zero_sensitivity() {
        let mut mlp = fig2_optimal();
        mlp.set("w2_1_1".parse().unwrap(), 0.0).unwrap();
        mlp.set("w2_1_2".parse().unwrap(), 0.0).unwrap();
        let trace = mlp.forward(&[0.7]).unwrap();
        let stack = sensitivities(&mlp, &trace, &[0.9]).unwrap();
        for n in 1..=3 {
            assert!(stack.get(n, 0).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn unit_chain_copies_seeds() {
        let layers = (0..3)
            .map(|_| Layer::new(1, 1, vec![1.0], vec![0.0], Activation::Linear).unwrap())
            .collect();
        let mlp = Mlp::new(1, layers).unwrap();
        let trace = mlp.forward(&[0.4]).unwrap();
        let stack = sensitivities(&mlp, &trace, &[1.3]).unwrap();
        for m in 0..3 {
            for n in 1..=3 {
                assert_eq!(stack.get(n, m), stack.get(n, 2));
            }
        }
    }

    #[test]
    fn fig2_optimum_first_order_vanishes() {
        let mlp = fig2_optimal();
        let trace = mlp.forward(&[0.0]).unwrap();
        let q = trace.output()[0];
        let stack = sensitivities(&mlp, &trace, &[q]).unwrap();
        assert!(stack.get(1, 0).iter().all(|&x| x == 0.0));
        assert!(stack.get(1, 1).iter().all(|&x| x == 0.0));
    }
}
