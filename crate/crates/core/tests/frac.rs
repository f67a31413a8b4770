use fbpnn::{frac_binomial, gamma, gl_derivative_numeric, FractionalOrder, GlGrid};
use proptest::prelude::*;

/// Γ(x) for x > 0 by the Stirling series after shifting x above 20; an
/// oracle independent of the library's Lanczos form.
fn stirling_gamma(x: f64) -> f64 {
    let mut shift = 1.0;
    let mut z = x;
    while z < 20.0 {
        shift *= z;
        z += 1.0;
    }
    let series = 1.0 / (12.0 * z) - 1.0 / (360.0 * z.powi(3)) + 1.0 / (1260.0 * z.powi(5))
        - 1.0 / (1680.0 * z.powi(7));
    let ln = (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + series;
    ln.exp() / shift
}

fn order(v: f64) -> FractionalOrder {
    FractionalOrder::new(v).unwrap()
}

#[test]
fn gamma_agrees_with_stirling_oracle() {
    for k in 1..=200 {
        let x = 0.1 * k as f64;
        let (a, b) = (gamma(x).unwrap(), stirling_gamma(x));
        assert!(((a - b) / b).abs() < 1e-12, "Γ({x}) = {a}, oracle {b}");
    }
}

#[test]
fn gamma_reflection_for_negative_arguments() {
    for x in [-0.5, -1.5, -2.3, -7.9] {
        let expected =
            std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * stirling_gamma(1.0 - x));
        let got = gamma(x).unwrap();
        assert!(
            ((got - expected) / expected).abs() < 1e-11,
            "Γ({x}) = {got}, expected {expected}"
        );
    }
}

#[test]
fn binomial_vanishes_for_integer_tops() {
    for m in 0..=10u32 {
        for n in m + 1..=10 {
            assert_eq!(frac_binomial(order(m as f64), n), 0.0, "C({m},{n})");
        }
    }
}

#[test]
fn gl_of_power_matches_closed_form() {
    // D^v x^2 over [0, x] is 2 x^(2−v) / Γ(3−v)
    let x = 1.3;
    for v in [0.25, 0.5, 0.9, 1.4] {
        let grid = GlGrid::new(0.0, x, 200_000).unwrap();
        let got = gl_derivative_numeric(|t| t * t, &grid, order(v)).unwrap();
        let exact = 2.0 * x.powf(2.0 - v) / stirling_gamma(3.0 - v);
        assert!(
            ((got - exact) / exact).abs() < 1e-4,
            "v={v}: {got} vs {exact}"
        );
    }
}

proptest! {
    #[test]
    fn gamma_recurrence(x in 0.1f64..20.0) {
        let g1 = gamma(x + 1.0).unwrap();
        prop_assert!((g1 - x * gamma(x).unwrap()).abs() / g1 <= 1e-12);
    }

    #[test]
    fn binomial_matches_gamma_ratio(v in 0.01f64..1.99, n in 0u32..=5) {
        prop_assume!((v - 1.0).abs() > 1e-6);
        let direct = gamma(1.0 + v).unwrap() / (gamma(1.0 - n as f64 + v).unwrap() * gamma(1.0 + n as f64).unwrap());
        let c = frac_binomial(order(v), n);
        prop_assert!((c - direct).abs() <= 1e-10 * direct.abs().max(1e-300), "C({v},{n}) = {c}, ratio {direct}");
    }

    #[test]
    fn gl_refinement_is_monotone(
        coeffs in prop::collection::vec(-2.0f64..2.0, 1..4),
        v in 0.1f64..1.9,
        span in 0.5f64..3.0,
    ) {
        prop_assume!((v - 1.0).abs() > 0.05);
        // a polynomial with a nonzero top coefficient, so the error does not vanish
        let poly = |t: f64| coeffs.iter().rev().fold(1.0, |acc, c| acc * t + c);
        let at = |n: usize| gl_derivative_numeric(poly, &GlGrid::new(0.0, span, n).unwrap(), order(v)).unwrap();
        let (coarse, mid, fine) = (at(500), at(1000), at(2000));
        prop_assert!((fine - mid).abs() < (mid - coarse).abs());
    }

    #[test]
    fn order_zero_is_identity(x in -50.0f64..50.0, span in 1e-3f64..100.0, n in 2usize..10_000) {
        let f = |t: f64| t.cos() * 3.0 - t;
        let grid = GlGrid::new(x - span, x, n).unwrap();
        prop_assert_eq!(gl_derivative_numeric(f, &grid, FractionalOrder::ZERO).unwrap(), f(x));
    }
}
