use barrier_repl_core::charfun::{charfun_identity_rhs, root_v, Branch};
use barrier_repl_core::simulator::{mc_expect, uniform_grid, McConfig, McEstimate, Monitoring, VolModel};
use barrier_repl_core::{c64, Complex64, I};

fn models() -> Vec<VolModel> {
    vec![VolModel::Deterministic { schedule: vec![(0.0, 0.15), (0.5, 0.3)] }, VolModel::two_state(0.1, 0.35, 3.0, 0)]
}

fn config(model: VolModel, seed: u64) -> McConfig {
    McConfig {
        model,
        times: uniform_grid(1.0, 16),
        x0: 0.1,
        n_paths: 20_000,
        seed,
        barrier: None,
        mode: Monitoring::GridOnly,
    }
}

fn within(e: &McEstimate, want: Complex64) -> bool {
    (e.mean - want).norm() <= 3.0 * e.std_error + 1e-14
}

#[test]
fn charfun_identity_both_branches() {
    let cases = [
        (c64(0.5, 0.0), c64(0.0, 0.0)),
        (c64(1.0, 0.0), c64(0.2, 0.0)),
        (c64(-0.7, 0.1), c64(0.3, 0.1)),
        (c64(0.0, 0.0), c64(0.5, 0.0)),
    ];
    for model in models() {
        let cfg = config(model, 17);
        for (w, s) in cases {
            for b in [Branch::Plus, Branch::Minus] {
                let (pre, u) = charfun_identity_rhs(w, s, cfg.x0, 0.0, b).unwrap();
                let est = mc_expect(&cfg, 1, |o, out| {
                    let lhs = (I * w * o.x_t() + I * s * o.qv_t()).exp();
                    out[0] = lhs - pre * (I * u * o.x_t()).exp();
                })
                .unwrap();
                assert!(within(&est[0], c64(0.0, 0.0)), "{:?} w={w} s={s} {b:?}: {:?}", cfg.model, est[0]);
            }
        }
    }
}

#[test]
fn rebate_exponential_is_martingale() {
    for model in models() {
        let cfg = config(model, 23);
        for s in [c64(0.5, 0.0), c64(-0.2, 0.1)] {
            let v = root_v(s, Branch::Plus).unwrap().value;
            let est = mc_expect(&cfg, 1, |o, out| out[0] = (I * v * o.x_t() + I * s * o.qv_t()).exp()).unwrap();
            assert!(within(&est[0], (I * v * cfg.x0).exp()), "s={s}: {:?}", est[0]);
        }
    }
}

#[test]
fn put_call_symmetry_for_calls() {
    let strikes: Vec<f64> = (0..9).map(|i| 0.8 + 0.05 * i as f64).collect();
    for model in models() {
        let mut cfg = config(model, 31);
        cfg.x0 = 0.0;
        let est = mc_expect(&cfg, strikes.len(), |o, out| {
            let x = o.x_t();
            for (slot, &k) in out.iter_mut().zip(&strikes) {
                let g = |y: f64| (y.exp() - k).max(0.0);
                *slot = c64(g(x) - x.exp() * g(-x), 0.0);
            }
        })
        .unwrap();
        for (e, k) in est.iter().zip(&strikes) {
            assert!(within(e, c64(0.0, 0.0)), "K={k}: {e:?}");
        }
    }
}
