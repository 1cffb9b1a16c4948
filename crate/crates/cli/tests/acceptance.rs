//! Acceptance run: one PASS/FAIL line per criterion with its measurements.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use barrier_repl::commands::{
    curve_rows, hedge_case_report, identity_checks, oracle_check, pcs_check, root_residuals, terminal_law,
    variance_swap_notionals, zero_value_checks,
};
use barrier_repl::config::{BranchName, HedgeCase, RunConfig};
use barrier_repl::error::CliError;
use barrier_repl_core::c64;
use barrier_repl_core::claim::{BarrierSpec, ClaimKind, ClaimSpec, Side};
use barrier_repl_core::pricer::{price_rebate_powerexp, ClaimNumerics, PowerExpParams, TerminalLaw};
use barrier_repl_core::simulator::VolModel;
use barrier_repl_core::spanning::{reconstruction_error, span_payoff};
use barrier_repl_core::special::{first_passage_above, first_passage_below};

struct Outcome {
    passed: bool,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self { passed: true, lines: Vec::new() }
    }

    fn check(&mut self, ok: bool, msg: String) {
        self.passed &= ok;
        self.lines.push(format!("{} {msg}", if ok { "ok  " } else { "FAIL" }));
    }
}

fn deterministic() -> VolModel {
    VolModel::Deterministic { schedule: vec![(0.0, 0.2), (0.5, 0.3)] }
}

fn regime(lo: f64, hi: f64) -> VolModel {
    VolModel::two_state(lo, hi, 2.0, 0)
}

fn c1() -> Result<Outcome, CliError> {
    let mut o = Outcome::new();
    let (res, sum) = root_residuals(1000, 1);
    o.check(res <= 1e-12, format!("root residual {res:.2e} <= 1e-12"));
    o.check(sum <= 1e-14, format!("branch sums {sum:.2e} <= 1e-14"));
    let x0 = 100f64.ln();
    for (name, model, seed) in [("deterministic", deterministic(), 101), ("regime", regime(0.15, 0.3), 102)] {
        for c in identity_checks(&model, 1.0, x0, 100_000, seed)? {
            o.check(c.passed, format!("{name}: {} {:.2} <= 3", c.name, c.measured));
        }
    }
    Ok(o)
}

fn c2() -> Result<Outcome, CliError> {
    let mut o = Outcome::new();
    for (name, model, seed) in [("deterministic", deterministic(), 201), ("regime", regime(0.15, 0.3), 202)] {
        let c = pcs_check(&model, 1.0, 100f64.ln(), 100_000, seed)?;
        o.check(c.passed, format!("{name}: 9 calls, max z {:.2} <= 3", c.measured));
    }
    Ok(o)
}

fn c3() -> Result<Outcome, CliError> {
    let mut o = Outcome::new();
    let b = BarrierSpec::double(90f64.ln(), 110f64.ln(), 100f64.ln());
    let phis = [
        (0, 1, c64(0.0, 0.0), c64(0.0, 0.0)),
        (1, 0, c64(0.0, 0.0), c64(0.0, 0.0)),
        (0, 0, c64(0.5, 0.0), c64(0.2, 0.0)),
    ];
    for (j, k, p, s) in phis {
        let claim = ClaimSpec::new(ClaimKind::Dbko, b).with_orders(j, k).with_freq(p, s);
        for c in zero_value_checks(&claim, 5)? {
            o.check(
                c.passed,
                format!("x^{j} v^{k} e^(i{p}x+i{s}v): {} {:.2e} <= {:.0e}", c.name, c.measured, c.tolerance),
            );
        }
    }
    Ok(o)
}

fn c4() -> Result<Outcome, CliError> {
    let mut o = Outcome::new();
    let model = regime(0.15, 0.3);
    let (steps, paths) = (512, 100_000);
    let claims = [
        (
            "sbko variance swap",
            ClaimSpec::new(ClaimKind::Sbko, BarrierSpec::lower(90f64.ln(), 110f64.ln())).with_orders(0, 1),
        ),
        (
            "dbko variance swap",
            ClaimSpec::new(ClaimKind::Dbko, BarrierSpec::double(90f64.ln(), 110f64.ln(), 100f64.ln()))
                .with_orders(0, 1),
        ),
        (
            "rebate variance swap",
            ClaimSpec::new(ClaimKind::Rebate, BarrierSpec::lower(90f64.ln(), 100f64.ln())).with_orders(0, 1),
        ),
        (
            "knock-in volatility",
            ClaimSpec { r: 0.5, ..ClaimSpec::new(ClaimKind::SbkiFracQv, BarrierSpec::lower(90f64.ln(), 100f64.ln())) },
        ),
        (
            "knock-in Sharpe ratio",
            ClaimSpec {
                r: 0.5,
                eps: 0.001,
                ..ClaimSpec::new(ClaimKind::SbkiRatio, BarrierSpec::lower(90f64.ln(), 100f64.ln()))
            },
        ),
    ];
    for (i, (name, claim)) in claims.iter().enumerate() {
        let seed = 400 + i as u64;
        let law = terminal_law(&model, 1.0, claim.barriers.x0, steps, 100_000, 512, seed)?;
        let r = oracle_check(claim, &model, 1.0, &law, &ClaimNumerics::default(), (25, 50), steps, paths, seed)?;
        o.check(
            r.passed,
            format!(
                "{name}: p50 {:.6} mc {:.6} se {:.1e} |p50-p25| {:.1e} dev {:.1e}",
                r.price[0], r.mc_mean[0], r.mc_std_error, r.bracket, r.deviation
            ),
        );
    }
    Ok(o)
}

fn c5() -> Result<Outcome, CliError> {
    let mut o = Outcome::new();
    let sigma = 0.2;
    let v = sigma * sigma;
    let x0 = 100f64.ln();
    let law = TerminalLaw::deterministic(x0, v);
    let pr = PowerExpParams::new(x0, 0, 0, c64(0.0, 0.0), c64(0.0, 0.0)).with_n(50);
    for (h, side) in [
        (85.0, Side::Lower),
        (90.0, Side::Lower),
        (95.0, Side::Lower),
        (105.0, Side::Upper),
        (110.0, Side::Upper),
        (120.0, Side::Upper),
    ] {
        let got = price_rebate_powerexp(&law, f64::ln(h), side, &pr)?.price.re;
        let want = match side {
            Side::Lower => first_passage_below(x0, f64::ln(h), -v / 2.0, sigma, 1.0),
            Side::Upper => first_passage_above(x0, f64::ln(h), -v / 2.0, sigma, 1.0),
        };
        o.check((got - want).abs() <= 5e-3, format!("{side:?} {h}: {got:.5} vs {want:.5}"));
    }
    Ok(o)
}

fn c6() -> Result<Outcome, CliError> {
    let mut o = Outcome::new();
    let model = regime(0.1, 0.3);
    let cases = [
        HedgeCase { n: 0, m: 0, omega: [1.0, 0.0], s: [0.0, 0.0], branch: BranchName::Minus },
        HedgeCase { n: 0, m: 1, omega: [0.0, 0.0], s: [0.0, 0.0], branch: BranchName::Plus },
        HedgeCase { n: 1, m: 0, omega: [0.5, 0.0], s: [0.2, 0.0], branch: BranchName::Plus },
    ];
    for case in &cases {
        let rep = hedge_case_report(case, &model, 1.0, 0.0, 512, &[32, 128, 512], 1000, 600)?;
        let rms: Vec<f64> = rep.stats.iter().map(|s| s.rms).collect();
        let shown: Vec<String> = rms.iter().map(|r| format!("{r:.2e}")).collect();
        let decreasing = rms.windows(2).all(|w| w[1] < w[0]);
        let ok = decreasing && (0.35..=0.65).contains(&rep.slope);
        o.check(
            ok,
            format!(
                "(n,m,w,s)=({},{},{},{}): rms [{}] slope {:.3}",
                case.n,
                case.m,
                case.omega[0],
                case.s[0],
                shown.join(", "),
                rep.slope
            ),
        );
    }
    let dev = variance_swap_notionals(&model, 1.0, 512, 601)?.iter().map(|z| (z - 2.0).norm()).fold(0.0, f64::max);
    o.check(dev <= 1e-12, format!("variance swap shares*S = 2 at all 512 nodes, max deviation {dev:.1e}"));
    Ok(o)
}

fn grid(a: f64, b: f64, cells: usize) -> Vec<f64> {
    (0..=cells).map(|i| a + (b - a) * i as f64 / cells as f64).collect()
}

fn c7() -> Result<Outcome, CliError> {
    let mut o = Outcome::new();
    type F = fn(f64) -> f64;
    let fs: [(&str, F); 3] = [
        ("log contract", |s| -2.0 * (s / 100.0).ln()),
        ("square root", |s| 10.0 * s.sqrt()),
        ("bump", |s| 10.0 * (-(s - 100.0).powi(2) / 800.0).exp()),
    ];
    for (name, f) in fs {
        let errs: Vec<f64> = [60, 120, 240]
            .iter()
            .map(|&c| {
                Ok(reconstruction_error(&span_payoff(f, 100.0, &grid(50.0, 200.0, c), &[])?, f, 50.0, 200.0, 4801))
            })
            .collect::<Result<_, CliError>>()?;
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            o.check(
                (3.5..=4.5).contains(&ratio),
                format!("{name}: error {:.2e} -> {:.2e}, ratio {ratio:.3}", w[0], w[1]),
            );
        }
    }
    let p = span_payoff(|s: f64| -2.0 * (s / 100.0).ln(), 100.0, &grid(50.0, 200.0, 150), &[])?;
    // kappa carries a put half and a call half
    let mut by_strike = std::collections::BTreeMap::<u64, (f64, f64)>::new();
    for &(k, w) in p.put_weights.iter().chain(&p.call_weights) {
        by_strike.entry(k.to_bits()).or_insert((k, 0.0)).1 += w;
    }
    let interior = by_strike.values().filter(|(k, _)| *k > 50.0 && *k < 200.0);
    let dev = interior.map(|&(k, w)| (w - 2.0 / (k * k)).abs()).fold(0.0, f64::max);
    o.check(dev <= 1e-10, format!("log-contract weights vs 2/K^2 dK, max deviation {dev:.1e}"));
    Ok(o)
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn c8() -> Result<Outcome, CliError> {
    let mut o = Outcome::new();
    for name in ["fig1", "fig2", "fig3", "fig3_right", "fig4", "fig4_right"] {
        let cfg = RunConfig::load(&root().join(format!("figures/{name}.toml")))?;
        let (text, _) = barrier_repl::commands::run(&cfg, None);
        let want = std::fs::read_to_string(root().join(format!("figures/reference/{name}.csv")))?;
        o.check(text? == want, format!("{name}: regenerates figures/reference/{name}.csv byte for byte"));
        let rows = curve_rows(&cfg)?;
        let s0 = cfg.claim.as_ref().unwrap().spot;
        let structure = match name {
            // zero crossing between the barrier and beyond the spot, positive on the knocked-out side
            "fig1" => {
                let flips: Vec<f64> = rows.windows(2).filter(|w| w[0].2.re * w[1].2.re < 0.0).map(|w| w[1].1).collect();
                flips.len() == 1
                    && flips[0] > 90.0
                    && flips[0] < 130.0
                    && rows.iter().filter(|r| r.1 < 90.0).all(|r| r.2.re > 0.0)
            }
            // finite and small inside the corridor next to the spot
            "fig2" => {
                rows.iter().all(|r| r.2.re.is_finite())
                    && rows.iter().any(|r| r.1 > 90.0 && r.1 < 110.0 && r.2.re.abs() < 1e-3)
            }
            // knock-ins: supported below the barrier only
            "fig3" => rows.iter().all(|r| if r.1 > 90.0 { r.2.re == 0.0 } else { r.1 >= 89.0 || r.2.re > 0.0 }),
            "fig3_right" => rows.iter().all(|r| if r.1 > 90.0 { r.2.re == 0.0 } else { r.1 >= 89.0 || r.2.re < 0.0 }),
            // lower rebate: the smoothed curve dies out above the barrier
            "fig4" => rows.iter().filter(|r| r.1 > 130.0).all(|r| r.2.re.abs() < 1e-6),
            _ => rows.iter().all(|r| r.2.re.is_finite()) && rows.len() == 1200,
        };
        o.check(
            structure && rows.iter().all(|r| r.2.im.abs() < 1e-12),
            format!("{name}: structure around the barrier (s0 = {s0})"),
        );
    }
    Ok(o)
}

fn main() {
    type Criterion = fn() -> Result<Outcome, CliError>;
    let criteria: [(&str, Criterion, Duration); 8] = [
        ("1 root and identity suite", c1, Duration::from_secs(60)),
        ("2 put-call symmetry", c2, Duration::from_secs(60)),
        ("3 zero value at the barrier", c3, Duration::from_secs(10)),
        ("4 formula vs oracle", c4, Duration::from_secs(900)),
        ("5 closed-form rebate", c5, Duration::from_secs(60)),
        ("6 hedge convergence", c6, Duration::from_secs(300)),
        ("7 spanning", c7, Duration::from_secs(10)),
        ("8 figure reproduction", c8, Duration::from_secs(600)),
    ];
    let mut failed = 0;
    for (name, f, budget) in criteria {
        let t = Instant::now();
        let res = f();
        let dt = t.elapsed();
        let (ok, lines) = match res {
            Ok(o) => (o.passed && dt <= budget, o.lines),
            Err(e) => (false, vec![format!("FAIL error: {e}")]),
        };
        println!(
            "criterion {name}: {} ({:.1}s, budget {}s)",
            if ok { "PASS" } else { "FAIL" },
            dt.as_secs_f64(),
            budget.as_secs()
        );
        for l in lines {
            println!("    {l}");
        }
        failed += usize::from(!ok);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
