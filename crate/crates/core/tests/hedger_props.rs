use barrier_repl_core::c64;
use barrier_repl_core::charfun::{root_u, Branch};
use barrier_repl_core::dual::DualComplex;
use barrier_repl_core::hedger::{expm_dual, simulate_hedge, HedgeSpec, QEngine};
use barrier_repl_core::simulator::{mc_expect, simulate_path, uniform_grid, McConfig, Monitoring, VolModel};

fn regime() -> VolModel {
    VolModel::two_state(0.1, 0.3, 2.0, 0)
}

#[test]
fn q_is_a_martingale() {
    let model = regime();
    let engine = QEngine::new(model.clone(), 1.0);
    let u = DualComplex::constant(root_u(c64(1.0, 0.0), c64(0.2, 0.0), Branch::Plus).unwrap().value);
    let times = uniform_grid(0.5, 8);
    let cfg = McConfig { model, times, x0: 0.0, n_paths: 20_000, seed: 9, barrier: None, mode: Monitoring::GridOnly };
    let est = mc_expect(&cfg, 1, |o, out| {
        let p = o.path;
        out[0] = engine.q_value(0.5, p.x_t(), *p.regime.last().unwrap(), u).primal();
    })
    .unwrap();
    let q0 = engine.q_value(0.0, 0.0, 0, u).primal();
    assert!((est[0].mean - q0).norm() <= 3.0 * est[0].std_error, "{:?} vs {q0}", est[0]);
}

#[test]
fn expected_quadratic_variation_matches_generator_oracle() {
    // E int sigma^2 from the block matrix [[G, diag sigma^2], [0, 0]]
    let model = regime();
    let VolModel::RegimeSwitching { states, generator, .. } = &model else { unreachable!() };
    let n = states.len();
    let t = 1.0;
    let mut a = vec![vec![DualComplex::default(); 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = DualComplex::from(generator[i][j] * t);
        }
        a[i][n + i] = DualComplex::from(states[i] * states[i] * t);
    }
    let e = expm_dual(&a);
    let want: f64 = (n..2 * n).map(|j| e[0][j].primal().re).sum();
    let cfg = McConfig {
        model,
        times: uniform_grid(t, 4),
        x0: 0.0,
        n_paths: 20_000,
        seed: 4,
        barrier: None,
        mode: Monitoring::GridOnly,
    };
    let est = mc_expect(&cfg, 1, |o, out| out[0] = c64(o.qv_t(), 0.0)).unwrap();
    assert!((est[0].mean.re - want).abs() <= 3.0 * est[0].std_error, "{:?} vs {want}", est[0]);
    // and through the Laplace transform: d/dc E e^{c V} at c = 0
    let engine = QEngine::new(regime(), t);
    let lap = engine.laplace(0.0, 0, DualComplex::var_a(c64(0.0, 0.0)));
    assert!((lap.partial(1, 0).re - want).abs() < 1e-12);
}

#[test]
fn fine_rebalancing_tracks_the_claim() {
    let model = regime();
    let engine = QEngine::new(model.clone(), 1.0);
    let spec = HedgeSpec { omega: c64(0.5, 0.0), s: c64(0.2, 0.0), n: 1, m: 0, branch: Branch::Plus };
    let mut last = f64::INFINITY;
    for steps in [64, 256, 1024] {
        let times = uniform_grid(1.0, steps);
        let mut ms = 0.0;
        for p in 0..200 {
            let path = simulate_path(&model, &times, 0.0, 12, p);
            let run = simulate_hedge(&spec, &engine, &path, 1).unwrap();
            ms += run.error.norm_sqr();
        }
        let rms = (ms / 200.0).sqrt();
        assert!(rms < last, "{steps}: {rms}");
        last = rms;
    }
    assert!(last < 5e-4);
}

#[test]
fn deterministic_q_matches_closed_form() {
    let model = VolModel::Deterministic { schedule: vec![(0.0, 0.1), (0.4, 0.25)] };
    let engine = QEngine::new(model.clone(), 1.0);
    let u = c64(0.7, -0.2);
    let rem = model.deterministic_qv(0.3, 1.0).unwrap();
    let want = (barrier_repl_core::I * u * 0.05 - (u * u + barrier_repl_core::I * u) * (rem / 2.0)).exp();
    let got = engine.q_value(0.3, 0.05, 0, DualComplex::constant(u)).primal();
    assert!((got - want).norm() < 1e-14);
}
