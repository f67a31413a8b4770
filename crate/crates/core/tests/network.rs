mod common;

use common::*;
use fbpnn::harness::{build_fig2_network, build_fig3_dataset};
use fbpnn::{activation_eval, mean_squared_error, squared_error, Activation, Dataset, Sample};
use proptest::prelude::*;

#[test]
fn fig2_forward_at_origin() {
    let t = build_fig2_network(true).forward(&[0.0]).unwrap();
    assert_eq!(t.net_input(0), &[-5.0, 5.0]);
    let s = |g: f64| 1.0 / (1.0 + (-g).exp());
    assert!((t.layer_output(0)[0] - 0.00669285).abs() < 1e-8);
    assert!((t.layer_output(0)[1] - 0.99330715).abs() < 1e-8);
    assert!(t.net_input(1)[0].abs() < 1e-15);
    assert!((t.output()[0] - s(0.0)).abs() < 1e-15);
}

#[test]
fn fig2_forward_matches_composed_sigmoids() {
    let s = |g: f64| 1.0 / (1.0 + (-g).exp());
    let target = |p: f64| s(s(10.0 * p - 5.0) + s(10.0 * p + 5.0) - 1.0);
    let mlp = build_fig2_network(true);
    for p in [-2.0, -0.7, 0.3, 1.9] {
        let got = mlp.forward(&[p]).unwrap().output()[0];
        assert!(
            (got - target(p)).abs() < 1e-15,
            "p={p}: {got} vs {}",
            target(p)
        );
    }
}

#[test]
fn fig3_dataset_is_exact_for_generating_network() {
    let data = build_fig3_dataset();
    assert_eq!(data.len(), 41);
    assert_eq!(data.samples()[0].input, vec![-2.0]);
    assert_eq!(
        mean_squared_error(&build_fig2_network(true), &data).unwrap(),
        0.0
    );
}

#[test]
fn wrong_widths_are_shape_errors() {
    let mlp = build_fig2_network(true);
    assert!(matches!(
        mlp.forward(&[1.0, 2.0]),
        Err(fbpnn::Error::Shape { .. })
    ));
    assert!(squared_error(&[1.0], &[1.0, 2.0]).is_err());
    let data = Dataset::new(vec![Sample::new(vec![1.0, 2.0], vec![0.0])]).unwrap();
    assert!(mean_squared_error(&mlp, &data).is_err());
}

proptest! {
    #[test]
    fn activation_derivatives_match_differences(g in -6.0f64..6.0, k in 1usize..=3, which in 0usize..3) {
        let kind = ACTIVATIONS[which];
        const H: f64 = 1e-4;
        let lower = |x: f64| activation_eval(kind, x, k - 1);
        let fd = (lower(g + H) - lower(g - H)) / (2.0 * H);
        let exact = activation_eval(kind, g, k);
        prop_assert!(rel_err(exact, fd, 1e-3) <= 1e-5, "{kind:?} order {k} at {g}: {exact} vs {fd}");
    }

    #[test]
    fn forward_matches_oracle_and_is_deterministic(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mlp = random_network(&mut r);
        let data = random_dataset(&mut r, &mlp, 3);
        for s in data.samples() {
            let a = mlp.forward(&s.input).unwrap();
            let b = mlp.forward(&s.input).unwrap();
            prop_assert_eq!(&a, &b);
            for (x, y) in a.output().iter().zip(output(&mlp, &s.input)) {
                prop_assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
            }
            for m in 0..mlp.depth() {
                let layer = &mlp.layers()[m];
                for (i, &g) in a.net_input(m).iter().enumerate() {
                    let recomputed = layer.bias(i)
                        + (0..layer.in_width()).map(|j| layer.weight(i, j) * a.layer_input(m)[j]).sum::<f64>();
                    prop_assert_eq!(g, recomputed);
                    prop_assert_eq!(a.layer_output(m)[i], layer.activation().eval(g));
                }
            }
        }
    }

    #[test]
    fn squared_error_symmetric_and_zero_only_on_equality(
        a in prop::collection::vec(-1e3f64..1e3, 1..5),
        b in prop::collection::vec(-1e3f64..1e3, 1..5),
    ) {
        let n = a.len().min(b.len());
        let (a, b) = (&a[..n], &b[..n]);
        let ab = squared_error(a, b).unwrap();
        prop_assert_eq!(ab, squared_error(b, a).unwrap());
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab == 0.0, a == b);
        prop_assert_eq!(squared_error(a, a).unwrap(), 0.0);
    }

    #[test]
    fn self_generated_targets_give_zero_error(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mlp = random_network(&mut r);
        let probe = random_dataset(&mut r, &mlp, 4);
        let data = Dataset::new(
            probe.samples().iter().map(|s| Sample::new(s.input.clone(), mlp.forward(&s.input).unwrap().output().to_vec())).collect(),
        ).unwrap();
        prop_assert_eq!(mean_squared_error(&mlp, &data).unwrap(), 0.0);
    }

    #[test]
    fn saturated_sigmoids_stay_finite(g in prop::num::f64::NORMAL, which in 0usize..2) {
        let kind = [Activation::LogSigmoid, Activation::TanSigmoid][which];
        for k in 0..=3 {
            prop_assert!(activation_eval(kind, g, k).is_finite());
        }
    }
}
