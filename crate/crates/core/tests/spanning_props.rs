use barrier_repl_core::c64;
use barrier_repl_core::payoffs::{power_exp, sbko_image, PayoffFn};
use barrier_repl_core::pricer::{price_payoff_under_law, TerminalLaw};
use barrier_repl_core::spanning::{reconstruction_error, span_payoff};
use proptest::prelude::*;

fn grid(a: f64, b: f64, cells: usize) -> Vec<f64> {
    (0..=cells).map(|i| a + (b - a) * i as f64 / cells as f64).collect()
}

type Smooth = fn(f64) -> f64;

fn smooth_payoffs() -> [(&'static str, Smooth); 3] {
    [
        ("log contract", |s| -2.0 * (s / 100.0).ln()),
        ("square root", |s| 10.0 * s.sqrt()),
        ("bump", |s| 10.0 * (-(s - 100.0).powi(2) / 800.0).exp()),
    ]
}

#[test]
fn reconstruction_error_is_second_order() {
    for (name, f) in smooth_payoffs() {
        let errs: Vec<f64> = [60, 120, 240]
            .iter()
            .map(|&c| {
                let p = span_payoff(f, 100.0, &grid(50.0, 200.0, c), &[]).unwrap();
                reconstruction_error(&p, f, 50.0, 200.0, 4001)
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.5..=4.5).contains(&ratio), "{name}: {errs:?}");
        }
    }
}

#[test]
fn portfolio_value_matches_direct_expectation() {
    let law = TerminalLaw::Mixture { x0: 100f64.ln(), components: vec![(0.5, 0.01), (0.5, 0.04)] };
    for (name, f) in smooth_payoffs() {
        let p = span_payoff(f, 100.0, &grid(20.0, 500.0, 960), &[]).unwrap();
        let direct = price_payoff_under_law(&PayoffFn::of_x(name, move |x| c64(f(x.exp()), 0.0)), &law).unwrap();
        assert!((p.value_under_law(&law) - direct.re).abs() < 1e-3, "{name}");
    }
}

#[test]
fn knock_out_variance_swap_image_is_spanned() {
    let l = 90f64.ln();
    let g = sbko_image(power_exp(0, 1, c64(0.0, 0.0), c64(0.0, 0.0)), l);
    let breaks: Vec<f64> = g.breakpoints.iter().map(|x| x.exp()).collect();
    for v in [0.01, 0.04, 0.16] {
        let f = |s: f64| g.eval(s.ln(), v).re;
        let p = span_payoff(f, 110.0, &grid(50.0, 200.0, 199), &breaks).unwrap();
        let err = reconstruction_error(&p, f, 60.0, 150.0, 9001);
        assert!(err <= 1e-3, "v={v}: {err}");
    }
}

proptest! {
    #[test]
    fn piecewise_linear_payoffs_are_exact_on_nodes(
        k1 in 60.0..140.0f64, k2 in 60.0..140.0f64, a in -2.0..2.0f64, b in -2.0..2.0f64, c in -5.0..5.0f64
    ) {
        let f = move |s: f64| c + a * (s - k1).max(0.0) + b * (k2 - s).max(0.0);
        let g = grid(50.0, 200.0, 60);
        let p = span_payoff(f, 100.0, &g, &[k1, k2]).unwrap();
        // slopes come from finite differences, so allow roundoff relative to the payoff scale
        let scale = 1.0 + g.iter().map(|&s| f(s).abs()).fold(0.0, f64::max);
        for s in g.iter().copied().chain([k1, k2]) {
            prop_assert!((p.payoff(s) - f(s)).abs() < 1e-9 * scale, "S={s}");
        }
        prop_assert!((p.bond_weight - f(100.0)).abs() < 1e-12);
    }
}
