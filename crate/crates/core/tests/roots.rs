use barrier_repl_core::charfun::{conditional_charfun, discriminant, root_u, root_v, Branch};
use barrier_repl_core::dual::DualComplex;
use barrier_repl_core::{c64, Complex64, I};
use proptest::prelude::*;

fn branch() -> impl Strategy<Value = Branch> {
    prop_oneof![Just(Branch::Plus), Just(Branch::Minus)]
}

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn root_reproduces_conditional_charfun(
        wr in -3.0..3.0f64, wi in -1.5..1.0f64, sr in -2.0..2.0f64, si in -1.0..1.0f64, b in branch()
    ) {
        let (w, s) = (c64(wr, wi), c64(sr, si));
        prop_assume!(discriminant(w, s).norm() > 1e-6);
        let u = root_u(w, s, b).unwrap().value;
        for i in 0..=20 {
            let v = i as f64 / 20.0;
            let lhs = conditional_charfun(u, c64(0.0, 0.0), v);
            let rhs = conditional_charfun(w, s, v);
            prop_assert!(close(lhs, rhs, 1e-12), "v={v} {lhs} {rhs}");
        }
    }

    #[test]
    fn branches_sum_to_minus_i(wr in -5.0..5.0f64, wi in -2.0..2.0f64, sr in -3.0..3.0f64, si in -3.0..3.0f64) {
        let (w, s) = (c64(wr, wi), c64(sr, si));
        prop_assume!(discriminant(w, s).norm() > 1e-6);
        let sum = root_u(w, s, Branch::Plus).unwrap().value + root_u(w, s, Branch::Minus).unwrap().value;
        prop_assert!((sum + I).norm() < 1e-14);
        prop_assume!((0.25 - 2.0 * I * s).norm() > 1e-6);
        let sum = root_v(s, Branch::Plus).unwrap().value + root_v(s, Branch::Minus).unwrap().value;
        prop_assert!((sum + I).norm() < 1e-14);
    }

    #[test]
    fn rebate_root_makes_exponential_martingale(sr in -2.0..2.0f64, si in -1.0..1.0f64, b in branch()) {
        let s = c64(sr, si);
        prop_assume!((0.25 - 2.0 * I * s).norm() > 1e-6);
        let v = root_v(s, b).unwrap().value;
        // E exp(i v dX + i s dQ) = 1 for every variance increment
        for q in [0.1, 0.5, 2.0] {
            prop_assert!(close(conditional_charfun(v, s, q), c64(1.0, 0.0), 1e-12));
        }
    }

    #[test]
    fn partials_match_finite_differences(
        wr in -2.0..2.0f64, wi in -1.0..0.5f64, sr in -1.0..1.0f64, si in -1.0..1.0f64, b in branch()
    ) {
        let (w, s) = (c64(wr, wi), c64(sr, si));
        let d = discriminant(w, s);
        // stay clear of the cut of the principal square root
        prop_assume!(d.norm() > 0.05 && d.arg().abs() < 2.8);
        let h = 1e-5;
        let r = root_u(w, s, b).unwrap();
        let f = |w: Complex64, s: Complex64| root_u(w, s, b).unwrap();
        let fd_w = (f(w + h, s).value - f(w - h, s).value) / (2.0 * h);
        let fd_s = (f(w, s + h).value - f(w, s - h).value) / (2.0 * h);
        prop_assert!(close(fd_w, r.d_omega, 1e-6), "{fd_w} {}", r.d_omega);
        prop_assert!(close(fd_s, r.d_s, 1e-6), "{fd_s} {}", r.d_s);
        let hi = r.higher.unwrap();
        let fd_ww = (f(w + h, s).d_omega - f(w - h, s).d_omega) / (2.0 * h);
        let fd_ws = (f(w, s + h).d_omega - f(w, s - h).d_omega) / (2.0 * h);
        let fd_ss = (f(w, s + h).d_s - f(w, s - h).d_s) / (2.0 * h);
        prop_assert!(close(fd_ww, hi.d_omega_omega, 1e-6));
        prop_assert!(close(fd_ws, hi.d_omega_s, 1e-6));
        prop_assert!(close(fd_ss, hi.d_s_s, 1e-6));
    }

    #[test]
    fn dual_exp_log_round_trip(ar in -1.0..1.0f64, ai in -1.0..1.0f64, br in 0.5..2.0f64, bi in -1.0..1.0f64) {
        let x = DualComplex::var_a(c64(ar, ai)) + DualComplex::var_b(c64(br, bi));
        let y = x.exp().ln();
        for (j, k) in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)] {
            prop_assert!((y.partial(j, k) - x.partial(j, k)).norm() < 1e-12);
        }
    }
}

#[test]
fn plus_branch_normalization() {
    let r = root_u(c64(0.0, 0.0), c64(0.0, 0.0), Branch::Plus).unwrap();
    assert!(r.value.norm() < 1e-16);
    assert!((r.d_s + 2.0).norm() < 1e-14);
}
