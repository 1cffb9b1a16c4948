use barrier_repl_core::charfun::{charfun_identity_rhs, conditional_charfun, discriminant, root_u, root_v, Branch};
use barrier_repl_core::claim::{ClaimKind, ClaimSpec, Side};
use barrier_repl_core::hedger::{simulate_hedge, HedgeReport, HedgeSpec, HedgeStudy, QEngine};
use barrier_repl_core::payoffs::{self, PayoffFn};
use barrier_repl_core::pricer::{self, ClaimNumerics, PriceOutput, TerminalLaw};
use barrier_repl_core::quad::{GaussLegendre, QuadratureSpec};
use barrier_repl_core::simulator::{simulate_path, uniform_grid, McConfig, McEstimate, Monitoring, VolModel};
use barrier_repl_core::spanning::{reconstruction_error, span_payoff, SpanningPortfolio};
use barrier_repl_core::special::norm_pdf;
use barrier_repl_core::{c64, Complex64, I};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, Format, HedgeCase, RunConfig, SpanPayoff};
use crate::error::CliError;
use crate::parallel;

/// Smoothing levels of sequence mode.
pub const SEQUENCE: [u32; 4] = [12, 25, 50, 100];

/// Seed offset that keeps the law's variance draws apart from the oracle's paths.
const LAW_SEED_OFFSET: u64 = 0x9e37_79b9;

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

/// Terminal law of `X_T` started at `x0`: exact for deterministic vol, a
/// binned mixture of simulated integrated variances otherwise.
pub fn terminal_law(
    model: &VolModel,
    maturity: f64,
    x0: f64,
    steps: usize,
    samples: u64,
    bins: usize,
    seed: u64,
) -> Result<TerminalLaw, CliError> {
    if let Some(v) = model.deterministic_qv(0.0, maturity) {
        return Ok(TerminalLaw::deterministic(x0, v));
    }
    let qv = parallel::qv_samples(model, maturity, steps, samples, seed.wrapping_add(LAW_SEED_OFFSET))?;
    Ok(TerminalLaw::from_qv_samples(x0, &qv, bins))
}

fn law_for(cfg: &RunConfig, model: &VolModel, x0: f64) -> Result<TerminalLaw, CliError> {
    let n = &cfg.numerics;
    terminal_law(model, cfg.maturity(), x0, n.steps, n.law_samples, n.bins, cfg.seed)
}

fn uses_smoothing(kind: ClaimKind) -> bool {
    matches!(kind, ClaimKind::Sbko | ClaimKind::Dbko | ClaimKind::Rebate)
}

fn diagnostics(out: &PriceOutput) -> Value {
    json!({
        "smoothing_n": out.smoothing_n,
        "terms": out.terms.iter().map(|t| json!({
            "omega_i": t.contour.omega_i,
            "half_width": t.contour.half_width,
            "nodes": t.contour.nodes,
            "doublings": t.doublings,
            "edge_ratio": t.edge_ratio,
            "value": pair(t.value),
        })).collect::<Vec<_>>(),
        "truncation": out.truncation.map(pair),
    })
}

/// Formula price at two smoothing levels against the Monte Carlo oracle.
#[derive(Debug, Clone, Serialize)]
pub struct OracleCheck {
    pub price: [f64; 2],
    pub price_coarse: [f64; 2],
    pub bracket: f64,
    pub mc_mean: [f64; 2],
    pub mc_std_error: f64,
    pub n_paths: u64,
    pub deviation: f64,
    pub passed: bool,
}

/// `|p(n_fine) - MC| <= 3 SE + |p(n_fine) - p(n_coarse)|`.
#[allow(clippy::too_many_arguments)]
pub fn oracle_check(
    claim: &ClaimSpec,
    model: &VolModel,
    maturity: f64,
    law: &TerminalLaw,
    num: &ClaimNumerics,
    n_pair: (u32, u32),
    steps: usize,
    n_paths: u64,
    seed: u64,
) -> Result<OracleCheck, CliError> {
    let mut coarse_num = *num;
    coarse_num.smoothing.n = n_pair.0;
    let mut fine_num = *num;
    fine_num.smoothing.n = n_pair.1;
    let coarse = pricer::price_claim(claim, law, &coarse_num)?.price;
    let fine = if uses_smoothing(claim.kind) { pricer::price_claim(claim, law, &fine_num)?.price } else { coarse };
    let mc = parallel::mc_claim(claim, model, maturity, steps, n_paths, seed, Monitoring::BridgeCorrected)?;
    let bracket = (fine - coarse).norm();
    let deviation = (fine - mc.mean).norm();
    Ok(OracleCheck {
        price: pair(fine),
        price_coarse: pair(coarse),
        bracket,
        mc_mean: pair(mc.mean),
        mc_std_error: mc.std_error,
        n_paths,
        deviation,
        passed: deviation <= 3.0 * mc.std_error + bracket,
    })
}

pub fn cmd_price(cfg: &RunConfig) -> Result<Value, CliError> {
    let claim = cfg.claim()?;
    let model = cfg.model()?;
    let law = law_for(cfg, &model, claim.barriers.x0)?;
    let n0 = cfg.numerics.smoothing_n;
    let main = pricer::price_claim(&claim, &law, &cfg.numerics.claim_numerics(n0))?;
    let mut out = json!({
        "command": "price",
        "claim": format!("{:?}", claim.kind),
        "price": pair(main.price),
        "diagnostics": diagnostics(&main),
    });
    if cfg.numerics.sequence && uses_smoothing(claim.kind) {
        let mut seq = Vec::new();
        for n in SEQUENCE {
            let p = pricer::price_claim(&claim, &law, &cfg.numerics.claim_numerics(n))?;
            seq.push(json!({ "n": n, "price": pair(p.price), "truncation": p.truncation.map(pair) }));
        }
        out["sequence"] = Value::Array(seq);
    }
    if cfg.numerics.oracle {
        let mc = parallel::mc_claim(
            &claim,
            &model,
            cfg.maturity(),
            cfg.numerics.steps,
            cfg.numerics.mc_paths,
            cfg.seed,
            cfg.numerics.monitoring.into(),
        )?;
        out["oracle"] = json!({
            "mean": pair(mc.mean),
            "std_error": mc.std_error,
            "n_paths": mc.n_paths,
            "seed": mc.seed,
            // undefined when every path paid the same amount
            "z": (mc.std_error > 0.0).then(|| (main.price - mc.mean).norm() / mc.std_error),
        });
    }
    Ok(out)
}

/// `points` log-spaced prices over `[lo, hi]`, moved off exact barrier values.
pub fn curve_grid(lo: f64, hi: f64, points: usize, barriers: &[f64]) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| {
            let x = a + (b - a) * i as f64 / (points - 1) as f64;
            let s = x.exp();
            if barriers.iter().any(|&h| (s - h).abs() <= 1e-12 * h) {
                s * (1.0 + 1e-9)
            } else {
                s
            }
        })
        .collect()
}

/// Rows `(spot, S, g(log S))` of the pricing payoff curve.
pub fn curve_rows(cfg: &RunConfig) -> Result<Vec<(f64, f64, Complex64)>, CliError> {
    use rayon::prelude::*;
    let cc = cfg.claim.as_ref().ok_or_else(|| CliError::Config("[claim] section is required".into()))?;
    let cv = cfg.curve.as_ref().ok_or_else(|| CliError::Config("[curve] section is required".into()))?;
    let spots = cv.spots.clone().unwrap_or_else(|| vec![cc.spot]);
    let barriers: Vec<f64> = [cc.lower, cc.upper].into_iter().flatten().collect();
    let grid = curve_grid(cv.s_min, cv.s_max, cv.points, &barriers);
    let num = cfg.numerics.claim_numerics(cfg.numerics.smoothing_n);
    let mut rows = Vec::with_capacity(spots.len() * grid.len());
    for &spot in &spots {
        let mut c = cc.clone();
        c.spot = spot;
        let claim = c.to_spec()?;
        // fixed blocks keep the work split independent of the thread count
        let vals: Vec<Result<Vec<Complex64>, CliError>> = grid
            .par_chunks(25)
            .map(|blk| {
                let xs: Vec<f64> = blk.iter().map(|s| s.ln()).collect();
                Ok(pricer::curve_claim(&claim, &xs, &num)?)
            })
            .collect();
        let mut k = 0;
        for blk in vals {
            for g in blk? {
                rows.push((spot, grid[k], g));
                k += 1;
            }
        }
    }
    Ok(rows)
}

pub fn cmd_curve(cfg: &RunConfig, format: Format) -> Result<String, CliError> {
    let rows = curve_rows(cfg)?;
    let multi = cfg.curve.as_ref().and_then(|c| c.spots.as_ref()).is_some_and(|s| s.len() > 1);
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            if multi {
                w.write_record(["s0", "S", "payoff_real", "payoff_imag"])?;
            } else {
                w.write_record(["S", "payoff_real", "payoff_imag"])?;
            }
            for (spot, s, g) in rows {
                let mut rec = Vec::with_capacity(4);
                if multi {
                    rec.push(spot.to_string());
                }
                rec.extend([s.to_string(), g.re.to_string(), g.im.to_string()]);
                w.write_record(&rec)?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        Format::Json => {
            let pts: Vec<Value> =
                rows.iter().map(|(spot, s, g)| json!({ "s0": spot, "S": s, "payoff": pair(*g) })).collect();
            Ok(serde_json::to_string_pretty(&json!({ "command": "curve", "points": pts }))?)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl Check {
    fn new(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), passed: measured <= tolerance, measured, tolerance, detail: None }
    }

    fn with(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }
}

/// Largest relative residual of `u` and `v` over a random sample.
pub fn root_residuals(samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut res, mut sum) = (0.0f64, 0.0f64);
    let mut k = 0;
    while k < samples {
        let w = c64(rng.random_range(-3.0..3.0), rng.random_range(-1.5..1.0));
        let s = c64(rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0));
        if discriminant(w, s).norm() < 1e-6 || (0.25 - 2.0 * I * s).norm() < 1e-6 {
            continue;
        }
        k += 1;
        for b in [Branch::Plus, Branch::Minus] {
            let u = root_u(w, s, b).expect("non-degenerate").value;
            let v = root_v(s, b).expect("non-degenerate").value;
            for i in 0..=10 {
                let q = i as f64 / 10.0;
                let a = conditional_charfun(u, c64(0.0, 0.0), q);
                let e = conditional_charfun(w, s, q);
                res = res.max((a - e).norm() / (1.0 + a.norm().max(e.norm())));
                res = res.max((conditional_charfun(v, s, q) - 1.0).norm());
            }
        }
        let su = root_u(w, s, Branch::Plus).unwrap().value + root_u(w, s, Branch::Minus).unwrap().value;
        let sv = root_v(s, Branch::Plus).unwrap().value + root_v(s, Branch::Minus).unwrap().value;
        sum = sum.max((su + I).norm()).max((sv + I).norm());
    }
    (res, sum)
}

/// `|u(0,0)| + |v(0)|` on the configured branch; zero only for `Plus`.
///
/// Prices are the same on either root, so a misconfigured branch shows up here
/// and not in the oracle comparison.
pub fn branch_normalization(branch: Branch) -> Check {
    let zero = c64(0.0, 0.0);
    let u = root_u(zero, zero, branch).expect("regular point").value;
    let v = root_v(zero, branch).expect("regular point").value;
    Check::new("branch_normalization", u.norm() + v.norm(), 1e-15).with(json!({ "branch": format!("{branch:?}") }))
}

/// `|mean - want| / SE`, with a floor so an exact zero-variance match gives 0.
fn z_score(e: &McEstimate, want: Complex64) -> f64 {
    let d = (e.mean - want).norm();
    if d <= 1e-13 {
        0.0
    } else {
        d / e.std_error
    }
}

/// Identity and martingale checks on terminal values; returns the worst z-scores.
pub fn identity_checks(
    model: &VolModel,
    maturity: f64,
    x0: f64,
    n_paths: u64,
    seed: u64,
) -> Result<Vec<Check>, CliError> {
    let cases = [
        (c64(0.5, 0.0), c64(0.0, 0.0)),
        (c64(1.0, 0.0), c64(0.2, 0.0)),
        (c64(-0.7, 0.1), c64(0.3, 0.1)),
        (c64(0.0, 0.0), c64(0.5, 0.0)),
    ];
    let mut slots = Vec::new();
    for (w, s) in cases {
        for b in [Branch::Plus, Branch::Minus] {
            let (pre, u) = charfun_identity_rhs(w, s, x0, 0.0, b).map_err(|e| CliError::Numerical(e.to_string()))?;
            slots.push((w, s, pre, u));
        }
    }
    let rebate_s = [c64(0.5, 0.0), c64(-0.2, 0.1)];
    let vs: Vec<Complex64> = rebate_s.iter().map(|&s| root_v(s, Branch::Plus).unwrap().value).collect();
    let cfg = McConfig {
        model: model.clone(),
        times: uniform_grid(maturity, 16),
        x0,
        n_paths,
        seed,
        barrier: None,
        mode: Monitoring::GridOnly,
    };
    let n_id = slots.len();
    let est = parallel::mc_expect(&cfg, n_id + rebate_s.len(), |o, out| {
        let (x, q) = (o.x_t(), o.qv_t());
        for (slot, &(w, s, pre, u)) in out.iter_mut().zip(&slots) {
            *slot = (I * w * x + I * s * q).exp() - pre * (I * u * x).exp();
        }
        for (k, (&s, &v)) in rebate_s.iter().zip(&vs).enumerate() {
            out[n_id + k] = (I * v * x + I * s * q).exp();
        }
    })?;
    let id_z = est[..n_id].iter().map(|e| z_score(e, c64(0.0, 0.0))).fold(0.0, f64::max);
    let mg_z = est[n_id..].iter().zip(&vs).map(|(e, &v)| z_score(e, (I * v * x0).exp())).fold(0.0, f64::max);
    Ok(vec![
        Check::new("charfun_identity_max_z", id_z, 3.0).with(json!({ "n_paths": n_paths, "cases": n_id })),
        Check::new("rebate_martingale_max_z", mg_z, 3.0).with(json!({ "n_paths": n_paths })),
    ])
}

/// Paired put-call symmetry check for 9 calls around the spot.
pub fn pcs_check(model: &VolModel, maturity: f64, x0: f64, n_paths: u64, seed: u64) -> Result<Check, CliError> {
    let s0 = x0.exp();
    let strikes: Vec<f64> = (0..9).map(|i| s0 * (0.8 + 0.05 * i as f64)).collect();
    let cfg = McConfig {
        model: model.clone(),
        times: uniform_grid(maturity, 16),
        x0,
        n_paths,
        seed,
        barrier: None,
        mode: Monitoring::GridOnly,
    };
    let est = parallel::mc_expect(&cfg, strikes.len(), |o, out| {
        let x = o.x_t();
        for (slot, &k) in out.iter_mut().zip(&strikes) {
            let g = |y: f64| (y.exp() - k).max(0.0);
            *slot = c64(g(x) - (x - x0).exp() * g(2.0 * x0 - x), 0.0);
        }
    })?;
    let z = est.iter().map(|e| z_score(e, c64(0.0, 0.0))).fold(0.0, f64::max);
    Ok(Check::new("put_call_symmetry_max_z", z, 3.0).with(json!({ "strikes": strikes, "n_paths": n_paths })))
}

/// `int g(x, v) n(x; h - v/2, v) dx` by Gauss-Legendre panels that respect the breakpoints.
pub fn barrier_value(g: &PayoffFn, h: f64, v: f64) -> Complex64 {
    let sd = v.sqrt();
    let mean = h - v / 2.0;
    let gl = GaussLegendre::new(20);
    let nodes = gl.composite(mean - 16.0 * sd, mean + 16.0 * sd, &g.breakpoints, sd / 16.0);
    nodes.iter().fold(c64(0.0, 0.0), |acc, &(x, w)| acc + g.eval(x, v) * (w * norm_pdf(x, mean, v)))
}

/// European payoff `phi(x, v)` of the claim before any barrier is applied.
fn base_payoff(claim: &ClaimSpec) -> PayoffFn {
    payoffs::power_exp(claim.j, claim.k, claim.p, claim.s)
}

/// Image payoff whose expectation prices the claim (no smoothing).
pub fn image_payoff(claim: &ClaimSpec, q: u32) -> Result<PayoffFn, CliError> {
    let b = &claim.barriers;
    Ok(match claim.kind {
        ClaimKind::EuropeanStylePowerExp => base_payoff(claim),
        ClaimKind::Sbko => match b.single() {
            Some((h, Side::Lower)) => payoffs::sbko_image(base_payoff(claim), h),
            Some((h, Side::Upper)) => payoffs::sbko_image_upper(base_payoff(claim), h),
            None => return Err(CliError::Config("sbko needs exactly one barrier".into())),
        },
        ClaimKind::Dbko => payoffs::dbko_image(base_payoff(claim), b.lower.unwrap(), b.upper.unwrap(), q),
        ClaimKind::Rebate => return Err(CliError::Config("rebate claims have no terminal image payoff".into())),
        _ => pricer::knock_in_payoff(claim, QuadratureSpec::default())?,
    })
}

pub fn zero_value_checks(claim: &ClaimSpec, q: u32) -> Result<Vec<Check>, CliError> {
    let b = &claim.barriers;
    let (l, u) = match (b.lower, b.upper) {
        (Some(l), Some(u)) => (l, u),
        (Some(h), None) | (None, Some(h)) => (h, h),
        (None, None) => return Ok(Vec::new()),
    };
    let phi = base_payoff(claim);
    let vs = [0.01, 0.04, 0.16];
    let mut single = 0.0f64;
    let single_imgs = [(payoffs::sbko_image(phi.clone(), l), l), (payoffs::sbko_image_upper(phi.clone(), u), u)];
    for (g, h) in &single_imgs {
        for v in vs {
            single = single.max(barrier_value(g, *h, v).norm());
        }
    }
    let mut out = vec![Check::new("zero_value_single_barrier", single, 1e-8)];
    if b.lower.is_some() && b.upper.is_some() {
        let g = payoffs::dbko_image(phi, l, u, q);
        let mut dbl = 0.0f64;
        for v in vs {
            for h in [l, u] {
                dbl = dbl.max(barrier_value(&g, h, v).norm());
            }
        }
        out.push(Check::new("zero_value_double_barrier", dbl, 1e-5));
    }
    Ok(out)
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<Value, CliError> {
    let claim = cfg.claim()?;
    let model = cfg.model()?;
    let t = cfg.maturity();
    let n = &cfg.numerics;
    let mut checks = Vec::new();
    let (res, sum) = root_residuals(200, cfg.seed);
    checks.push(Check::new("root_residual", res, 1e-12));
    checks.push(Check::new("branch_sum", sum, 1e-14));
    checks.push(branch_normalization(claim.branch));
    checks.extend(identity_checks(&model, t, claim.barriers.x0, n.mc_paths, cfg.seed)?);
    checks.push(pcs_check(&model, t, claim.barriers.x0, n.mc_paths, cfg.seed.wrapping_add(1))?);
    checks.extend(zero_value_checks(&claim, n.q)?);
    let law = law_for(cfg, &model, claim.barriers.x0)?;
    let num = n.claim_numerics(n.smoothing_n);
    let oc = oracle_check(&claim, &model, t, &law, &num, (25, 50), n.steps, n.mc_paths, cfg.seed.wrapping_add(2))?;
    let mut c = Check::new("formula_vs_oracle", oc.deviation, 3.0 * oc.mc_std_error + oc.bracket);
    c.detail = Some(serde_json::to_value(&oc)?);
    checks.push(c);
    let all = checks.iter().all(|c| c.passed);
    Ok(json!({ "command": "verify", "claim": format!("{:?}", claim.kind), "all_passed": all, "checks": checks }))
}

/// Share notional `shares * S` at every rebalance of one variance-swap path.
pub fn variance_swap_notionals(
    model: &VolModel,
    maturity: f64,
    steps: usize,
    seed: u64,
) -> Result<Vec<Complex64>, CliError> {
    let spec = HedgeSpec { omega: c64(0.0, 0.0), s: c64(0.0, 0.0), n: 0, m: 1, branch: Branch::Plus };
    let path = simulate_path(model, &uniform_grid(maturity, steps), 0.0, seed, 0);
    Ok(simulate_hedge(&spec, &QEngine::new(model.clone(), maturity), &path, 1)?.share_notional)
}

#[allow(clippy::too_many_arguments)]
pub fn hedge_case_report(
    case: &HedgeCase,
    model: &VolModel,
    maturity: f64,
    x0: f64,
    steps: usize,
    rebalances: &[usize],
    n_paths: u64,
    seed: u64,
) -> Result<HedgeReport, CliError> {
    let study = HedgeStudy {
        spec: HedgeSpec { omega: case.omega(), s: case.s(), n: case.n, m: case.m, branch: case.branch.into() },
        model: model.clone(),
        x0,
        maturity,
        steps,
        rebalances: rebalances.to_vec(),
        n_paths,
        seed,
    };
    Ok(parallel::hedge_study(&study)?)
}

pub fn cmd_hedge(cfg: &RunConfig) -> Result<Value, CliError> {
    let model = cfg.model()?;
    let h = cfg.hedge.as_ref().ok_or_else(|| CliError::Config("[hedge] section is required".into()))?;
    let mut cases = Vec::new();
    for case in &h.cases {
        let rep = hedge_case_report(case, &model, cfg.maturity(), h.x0, h.steps, &h.rebalances, h.paths, cfg.seed)?;
        cases.push(json!({
            "params": { "n": case.n, "m": case.m, "omega": case.omega, "s": case.s, "branch": case.branch },
            "rebalances": rep.stats.iter().map(|s| s.rebalances).collect::<Vec<_>>(),
            "rms": rep.stats.iter().map(|s| s.rms).collect::<Vec<_>>(),
            "max": rep.stats.iter().map(|s| s.max).collect::<Vec<_>>(),
            "slope": rep.slope,
        }));
    }
    let notional = variance_swap_notionals(&model, cfg.maturity(), h.steps, cfg.seed)?;
    let dev = notional.iter().map(|z| (z - 2.0).norm()).fold(0.0, f64::max);
    Ok(json!({
        "command": "hedge",
        "steps": h.steps,
        "n_paths": h.paths,
        "cases": cases,
        "variance_swap_share_notional_max_deviation": dev,
    }))
}

/// Payoff in price space and its known breaks.
type SpanTarget = (Box<dyn Fn(f64) -> f64 + Sync>, Vec<f64>);

fn span_target(cfg: &RunConfig) -> Result<SpanTarget, CliError> {
    let sp = cfg.span.as_ref().ok_or_else(|| CliError::Config("[span] section is required".into()))?;
    let kappa = sp.kappa;
    Ok(match sp.payoff {
        SpanPayoff::Log => (Box::new(move |s: f64| -2.0 * (s / kappa).ln()), Vec::new()),
        SpanPayoff::Call => {
            let k = sp.strike.expect("validated");
            (Box::new(move |s: f64| (s - k).max(0.0)), vec![k])
        }
        SpanPayoff::Claim => {
            let claim = cfg.claim()?;
            let g = image_payoff(&claim, cfg.numerics.q)?;
            let v = sp.v;
            let breaks = g.breakpoints.iter().map(|x| x.exp()).collect();
            (Box::new(move |s: f64| g.eval(s.ln(), v).re), breaks)
        }
    })
}

pub fn span_portfolio(cfg: &RunConfig) -> Result<(SpanningPortfolio, f64), CliError> {
    let sp = cfg.span.as_ref().ok_or_else(|| CliError::Config("[span] section is required".into()))?;
    let (f, breaks) = span_target(cfg)?;
    let grid: Vec<f64> =
        (0..sp.strikes).map(|i| sp.k_min + (sp.k_max - sp.k_min) * i as f64 / (sp.strikes - 1) as f64).collect();
    let p = span_payoff(&f, sp.kappa, &grid, &breaks)?;
    let err = reconstruction_error(&p, &f, sp.k_min, sp.k_max, 20 * sp.strikes + 1);
    Ok((p, err))
}

pub fn cmd_span(cfg: &RunConfig, format: Format) -> Result<String, CliError> {
    let (p, err) = span_portfolio(cfg)?;
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["instrument_type", "strike", "weight"])?;
            for (kind, k, wt) in p.rows() {
                let k = if k.is_nan() { String::new() } else { k.to_string() };
                w.write_record([kind.as_str().to_string(), k, wt.to_string()])?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        Format::Json => {
            let rows: Vec<Value> = p
                .rows()
                .into_iter()
                .map(|(kind, k, w)| json!({ "instrument_type": kind.as_str(), "strike": (!k.is_nan()).then_some(k), "weight": w }))
                .collect();
            Ok(serde_json::to_string_pretty(&json!({
                "command": "span",
                "kappa": p.kappa,
                "reconstruction_error": err,
                "portfolio": rows,
            }))?)
        }
    }
}

fn value_csv(v: &Value) -> Result<String, CliError> {
    // flat key,value listing for the JSON-shaped reports
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&p, x, out);
                }
            }
            Value::Array(a) => {
                for (i, x) in a.iter().enumerate() {
                    walk(&format!("{prefix}.{i}"), x, out);
                }
            }
            Value::String(s) => out.push((prefix.to_string(), s.clone())),
            x => out.push((prefix.to_string(), x.to_string())),
        }
    }
    let mut rows = Vec::new();
    walk("", v, &mut rows);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["key", "value"])?;
    for (k, x) in rows {
        w.write_record([k, x])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Run the configured command and return the rendered output.
///
/// A failed verification still renders its report; the error comes second.
pub fn run(cfg: &RunConfig, format: Option<Format>) -> (Result<String, CliError>, bool) {
    let default = match cfg.command {
        Command::Curve | Command::Span => Format::Csv,
        _ => Format::Json,
    };
    let format = format.or(cfg.output.format).unwrap_or(default);
    let render = |v: Value| -> Result<String, CliError> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(&v)? + "\n"),
            Format::Csv => value_csv(&v),
        }
    };
    match cfg.command {
        Command::Price => (cmd_price(cfg).and_then(render), true),
        Command::Curve => (cmd_curve(cfg, format), true),
        Command::Span => (cmd_span(cfg, format), true),
        Command::Hedge => (cmd_hedge(cfg).and_then(render), true),
        Command::Verify => match cmd_verify(cfg) {
            Ok(v) => {
                let ok = v["all_passed"].as_bool().unwrap_or(false);
                (render(v), ok)
            }
            Err(e) => (Err(e), false),
        },
    }
}
