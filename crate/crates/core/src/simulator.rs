//! Monte Carlo oracle: volatility paths independent of the price noise, exact
//! conditional-Gaussian log-price steps and bridge-corrected barrier monitoring.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::claim::{BarrierSpec, ClaimKind, ClaimSpec, Side};
use crate::I;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid volatility model: {0}")]
    InvalidModel(&'static str),
    #[error("invalid time grid: {0}")]
    InvalidGrid(&'static str),
    #[error("need at least two paths")]
    TooFewPaths,
}

/// Volatility law, independent of the Brownian motion driving `X`.
#[derive(Debug, Clone, PartialEq)]
pub enum VolModel {
    /// Piecewise-constant `sigma(t)`: `(t_start, sigma)` pairs sorted by time,
    /// first entry at `t = 0`, right-continuous.
    Deterministic { schedule: Vec<(f64, f64)> },
    /// Continuous-time Markov chain on `states` with rate matrix `generator`.
    RegimeSwitching { states: Vec<f64>, generator: Vec<Vec<f64>>, initial: usize },
}

impl VolModel {
    pub fn constant(sigma: f64) -> Self {
        VolModel::Deterministic { schedule: vec![(0.0, sigma)] }
    }

    /// Two regimes with symmetric switching rate.
    pub fn two_state(lo: f64, hi: f64, rate: f64, initial: usize) -> Self {
        VolModel::RegimeSwitching {
            states: vec![lo, hi],
            generator: vec![vec![-rate, rate], vec![rate, -rate]],
            initial,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        match self {
            VolModel::Deterministic { schedule } => {
                if schedule.is_empty() || schedule[0].0 != 0.0 {
                    return Err(SimError::InvalidModel("schedule must start at t = 0"));
                }
                if schedule.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(SimError::InvalidModel("schedule times must increase"));
                }
                if schedule.iter().any(|&(_, s)| !(s >= 0.0) || !s.is_finite()) {
                    return Err(SimError::InvalidModel("sigma must be finite and >= 0"));
                }
                Ok(())
            }
            VolModel::RegimeSwitching { states, generator, initial } => {
                let n = states.len();
                if n == 0 || *initial >= n {
                    return Err(SimError::InvalidModel("initial state out of range"));
                }
                if states.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
                    return Err(SimError::InvalidModel("state sigma must be finite and >= 0"));
                }
                if generator.len() != n || generator.iter().any(|r| r.len() != n) {
                    return Err(SimError::InvalidModel("generator must be square and match states"));
                }
                for (i, row) in generator.iter().enumerate() {
                    if row.iter().enumerate().any(|(j, &q)| i != j && !(q >= 0.0)) {
                        return Err(SimError::InvalidModel("off-diagonal rates must be >= 0"));
                    }
                    let sum: f64 = row.iter().sum();
                    let size: f64 = row.iter().map(|q| q.abs()).sum();
                    if sum.abs() > 1e-12 * size.max(1.0) {
                        return Err(SimError::InvalidModel("generator rows must sum to 0"));
                    }
                }
                Ok(())
            }
        }
    }

    /// Index of the state at `t = 0` (0 for deterministic schedules).
    pub fn initial_state(&self) -> usize {
        match self {
            VolModel::Deterministic { .. } => 0,
            VolModel::RegimeSwitching { initial, .. } => *initial,
        }
    }

    /// `int_a^b sigma^2 dt` for a deterministic schedule.
    pub fn deterministic_qv(&self, a: f64, b: f64) -> Option<f64> {
        let VolModel::Deterministic { schedule } = self else { return None };
        let mut total = 0.0;
        for (i, &(t0, s)) in schedule.iter().enumerate() {
            let t1 = schedule.get(i + 1).map_or(f64::INFINITY, |e| e.0);
            let lo = t0.max(a);
            let hi = t1.min(b);
            if hi > lo {
                total += s * s * (hi - lo);
            }
        }
        Some(total)
    }
}

/// Uniform grid `0, T/m, ..., T`.
pub fn uniform_grid(t: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| t * i as f64 / steps as f64).collect()
}

fn check_grid(times: &[f64]) -> Result<(), SimError> {
    if times.len() < 2 || times[0] != 0.0 {
        return Err(SimError::InvalidGrid("grid must start at 0 and have a step"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SimError::InvalidGrid("grid must be strictly increasing"));
    }
    Ok(())
}

/// Random stream roles; each path owns one stream per role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    Vol = 0,
    Price = 1,
    Bridge = 2,
}

/// Generator keyed by `(seed, path, role)`.
pub fn stream(seed: u64, path: u64, role: StreamRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path.wrapping_mul(4).wrapping_add(role as u64));
    rng
}

/// Volatility path on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VolPath {
    /// `int sigma^2 dt` over each step.
    pub qv_steps: Vec<f64>,
    /// Regime at each node (right limit).
    pub regime: Vec<usize>,
}

/// Exact simulation of per-step integrated variance.
pub fn simulate_vol<R: Rng>(model: &VolModel, times: &[f64], rng: &mut R) -> VolPath {
    let m = times.len() - 1;
    let mut qv_steps = Vec::with_capacity(m);
    let mut regime = Vec::with_capacity(m + 1);
    match model {
        VolModel::Deterministic { .. } => {
            for w in times.windows(2) {
                qv_steps.push(model.deterministic_qv(w[0], w[1]).unwrap());
            }
            regime.resize(m + 1, 0);
        }
        VolModel::RegimeSwitching { states, generator, initial } => {
            let mut state = *initial;
            let mut t = 0.0;
            let mut next = t + holding_time(generator, state, rng);
            regime.push(state);
            for w in times.windows(2) {
                let mut acc = 0.0;
                t = w[0];
                while next <= w[1] {
                    acc += states[state] * states[state] * (next - t);
                    t = next;
                    state = jump_target(generator, state, rng);
                    next = t + holding_time(generator, state, rng);
                }
                acc += states[state] * states[state] * (w[1] - t);
                qv_steps.push(acc);
                regime.push(state);
            }
        }
    }
    VolPath { qv_steps, regime }
}

fn holding_time<R: Rng>(g: &[Vec<f64>], state: usize, rng: &mut R) -> f64 {
    let rate = -g[state][state];
    if rate <= 0.0 {
        return f64::INFINITY;
    }
    let e: f64 = rng.sample(Exp1);
    e / rate
}

fn jump_target<R: Rng>(g: &[Vec<f64>], state: usize, rng: &mut R) -> usize {
    let rate = -g[state][state];
    let mut u: f64 = rng.random::<f64>() * rate;
    let mut last = state;
    for (j, &q) in g[state].iter().enumerate() {
        if j == state || q <= 0.0 {
            continue;
        }
        last = j;
        if u < q {
            return j;
        }
        u -= q;
    }
    last
}

/// Simulated path data.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    /// Cumulative quadratic variation, `qv[0] = 0`.
    pub qv: Vec<f64>,
    pub regime: Vec<usize>,
}

impl PathRecord {
    pub fn x_t(&self) -> f64 {
        *self.x.last().unwrap()
    }

    pub fn qv_t(&self) -> f64 {
        *self.qv.last().unwrap()
    }
}

/// Exact conditional-Gaussian stepping given the vol path.
pub fn simulate_x<R: Rng>(times: &[f64], vol: &VolPath, x0: f64, rng: &mut R) -> PathRecord {
    let m = vol.qv_steps.len();
    let mut x = Vec::with_capacity(m + 1);
    let mut qv = Vec::with_capacity(m + 1);
    x.push(x0);
    qv.push(0.0);
    for &v in &vol.qv_steps {
        let z: f64 = rng.sample(StandardNormal);
        let prev = *x.last().unwrap();
        x.push(prev - 0.5 * v + libm::sqrt(v) * z);
        qv.push(qv.last().unwrap() + v);
    }
    PathRecord { times: times.to_vec(), x, qv, regime: vol.regime.clone() }
}

/// Full path for index `path` under `seed`.
pub fn simulate_path(model: &VolModel, times: &[f64], x0: f64, seed: u64, path: u64) -> PathRecord {
    let vol = simulate_vol(model, times, &mut stream(seed, path, StreamRole::Vol));
    simulate_x(times, &vol, x0, &mut stream(seed, path, StreamRole::Price))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monitoring {
    GridOnly,
    BridgeCorrected,
}

/// State at the first passage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Passage {
    pub side: Side,
    pub t: f64,
    pub qv: f64,
    /// Equal to the barrier level.
    pub x: f64,
    /// Step in which the passage happened.
    pub step: usize,
}

fn step_crossing<R: Rng>(a: f64, b: f64, v: f64, mode: Monitoring, rng: &mut R) -> Option<f64> {
    // a, b: signed distances to the barrier at the step ends, positive on the live side
    if a <= 0.0 {
        return Some(0.0);
    }
    if b <= 0.0 {
        return Some(a / (a - b));
    }
    if mode == Monitoring::GridOnly || v <= 0.0 {
        return None;
    }
    let p = libm::exp(-2.0 * a * b / v);
    if p < 1e-300 {
        return None;
    }
    let u: f64 = rng.random();
    if u < p {
        Some(a / (a + b))
    } else {
        None
    }
}

/// First passage of the path through any barrier in `barrier`.
pub fn detect_barrier<R: Rng>(
    path: &PathRecord,
    barrier: &BarrierSpec,
    mode: Monitoring,
    rng: &mut R,
) -> Option<Passage> {
    let n = path.x.len();
    for i in 0..n - 1 {
        let v = path.qv[i + 1] - path.qv[i];
        let mut best: Option<(f64, Side, f64)> = None;
        if let Some(l) = barrier.lower {
            if let Some(f) = step_crossing(path.x[i] - l, path.x[i + 1] - l, v, mode, rng) {
                best = Some((f, Side::Lower, l));
            }
        }
        if let Some(u) = barrier.upper {
            if let Some(f) = step_crossing(u - path.x[i], u - path.x[i + 1], v, mode, rng) {
                if best.map_or(true, |b| f < b.0) {
                    best = Some((f, Side::Upper, u));
                }
            }
        }
        if let Some((f, side, h)) = best {
            let dt = path.times[i + 1] - path.times[i];
            return Some(Passage { side, t: path.times[i] + f * dt, qv: path.qv[i] + f * v, x: h, step: i });
        }
    }
    None
}

/// What a payoff functional sees for one path.
#[derive(Debug, Clone, Copy)]
pub struct PathOutcome<'a> {
    pub path: &'a PathRecord,
    pub passage: Option<Passage>,
}

impl PathOutcome<'_> {
    pub fn x_t(&self) -> f64 {
        self.path.x_t()
    }

    pub fn qv_t(&self) -> f64 {
        self.path.qv_t()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: Complex64,
    pub std_error: f64,
    pub n_paths: u64,
    pub seed: u64,
}

/// Monte Carlo run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub model: VolModel,
    pub times: Vec<f64>,
    pub x0: f64,
    pub n_paths: u64,
    pub seed: u64,
    pub barrier: Option<BarrierSpec>,
    pub mode: Monitoring,
}

impl McConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.model.validate()?;
        check_grid(&self.times)?;
        if self.n_paths < 2 {
            return Err(SimError::TooFewPaths);
        }
        Ok(())
    }

    pub fn n_chunks(&self) -> u64 {
        self.n_paths.div_ceil(CHUNK)
    }
}

/// Paths per work unit.
pub const CHUNK: u64 = 2048;

/// Per-output sums over a chunk of paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkSums {
    pub sum: Vec<Complex64>,
    pub sum_sq: Vec<f64>,
}

impl ChunkSums {
    fn merge(a: &ChunkSums, b: &ChunkSums) -> ChunkSums {
        ChunkSums {
            sum: a.sum.iter().zip(&b.sum).map(|(x, y)| x + y).collect(),
            sum_sq: a.sum_sq.iter().zip(&b.sum_sq).map(|(x, y)| x + y).collect(),
        }
    }
}

/// Evaluate `f` on paths of chunk `c`, summing in path order.
pub fn run_chunk<F>(cfg: &McConfig, c: u64, n_out: usize, f: &F) -> ChunkSums
where
    F: Fn(&PathOutcome, &mut [Complex64]),
{
    let mut sums = ChunkSums { sum: vec![Complex64::new(0.0, 0.0); n_out], sum_sq: vec![0.0; n_out] };
    let mut out = vec![Complex64::new(0.0, 0.0); n_out];
    let lo = c * CHUNK;
    let hi = (lo + CHUNK).min(cfg.n_paths);
    for p in lo..hi {
        let path = simulate_path(&cfg.model, &cfg.times, cfg.x0, cfg.seed, p);
        let passage = cfg
            .barrier
            .as_ref()
            .and_then(|b| detect_barrier(&path, b, cfg.mode, &mut stream(cfg.seed, p, StreamRole::Bridge)));
        for o in out.iter_mut() {
            *o = Complex64::new(0.0, 0.0);
        }
        f(&PathOutcome { path: &path, passage }, &mut out);
        for ((s, q), y) in sums.sum.iter_mut().zip(sums.sum_sq.iter_mut()).zip(out.iter()) {
            *s += y;
            *q += y.norm_sqr();
        }
    }
    sums
}

/// Pairwise reduction of chunk sums into estimates; the tree shape depends only
/// on the number of chunks.
pub fn reduce_chunks(cfg: &McConfig, mut chunks: Vec<ChunkSums>) -> Vec<McEstimate> {
    while chunks.len() > 1 {
        let mut next = Vec::with_capacity(chunks.len().div_ceil(2));
        for pair in chunks.chunks(2) {
            next.push(if pair.len() == 2 { ChunkSums::merge(&pair[0], &pair[1]) } else { pair[0].clone() });
        }
        chunks = next;
    }
    let total = chunks.pop().expect("at least one chunk");
    let n = cfg.n_paths as f64;
    total
        .sum
        .iter()
        .zip(&total.sum_sq)
        .map(|(s, q)| {
            let mean = s / n;
            let var = ((q - n * mean.norm_sqr()) / (n * (n - 1.0))).max(0.0);
            McEstimate { mean, std_error: libm::sqrt(var), n_paths: cfg.n_paths, seed: cfg.seed }
        })
        .collect()
}

/// Estimates of `E f_i` for the `n_out` outputs of `f`, using common paths.
pub fn mc_expect<F>(cfg: &McConfig, n_out: usize, f: F) -> Result<Vec<McEstimate>, SimError>
where
    F: Fn(&PathOutcome, &mut [Complex64]),
{
    cfg.validate()?;
    let chunks = (0..cfg.n_chunks()).map(|c| run_chunk(cfg, c, n_out, &f)).collect();
    Ok(reduce_chunks(cfg, chunks))
}

/// Pathwise payoff of a claim; rebates are paid at passage without discounting.
pub fn claim_payoff(claim: &ClaimSpec, o: &PathOutcome) -> Complex64 {
    let zero = Complex64::new(0.0, 0.0);
    let (x, q) = (o.x_t(), o.qv_t());
    let powexp = |x: f64, q: f64, j: u32, k: u32, p: Complex64, s: Complex64| {
        (I * p * x + I * s * q).exp() * libm::pow(x, j as f64) * libm::pow(q, k as f64)
    };
    match claim.kind {
        ClaimKind::EuropeanStylePowerExp => powexp(x, q, claim.j, claim.k, claim.p, claim.s),
        ClaimKind::Sbko | ClaimKind::Dbko => match o.passage {
            Some(_) => zero,
            None => powexp(x, q, claim.j, claim.k, claim.p, claim.s),
        },
        ClaimKind::SbkiPowerExp => match o.passage {
            Some(ps) => powexp(x - ps.x, q - ps.qv, claim.j, claim.k, claim.p, claim.s),
            None => zero,
        },
        ClaimKind::SbkiFracQv => match o.passage {
            Some(ps) => Complex64::new(libm::pow((q - ps.qv).max(0.0), claim.r), 0.0),
            None => zero,
        },
        ClaimKind::SbkiRatio => match o.passage {
            Some(ps) => {
                let dx = x - ps.x;
                (I * claim.p * dx).exp() * dx / libm::pow(q - ps.qv + claim.eps, claim.r)
            }
            None => zero,
        },
        ClaimKind::Rebate => match o.passage {
            Some(ps) => (I * claim.s * ps.qv).exp() * libm::pow(ps.qv, claim.k as f64),
            None => zero,
        },
    }
}

/// Monte Carlo price of a claim.
pub fn mc_price(
    claim: &ClaimSpec,
    model: &VolModel,
    n_paths: u64,
    times: &[f64],
    seed: u64,
    mode: Monitoring,
) -> Result<McEstimate, SimError> {
    let cfg = McConfig {
        model: model.clone(),
        times: times.to_vec(),
        x0: claim.barriers.x0,
        n_paths,
        seed,
        barrier: match claim.kind {
            ClaimKind::EuropeanStylePowerExp => None,
            _ => Some(claim.barriers),
        },
        mode,
    };
    let est = mc_expect(&cfg, 1, |o, out| out[0] = claim_payoff(claim, o))?;
    Ok(est[0])
}

/// Samples of total quadratic variation over `[0, T]` (vol streams only).
pub fn qv_samples(model: &VolModel, times: &[f64], n: u64, seed: u64) -> Result<Vec<f64>, SimError> {
    model.validate()?;
    check_grid(times)?;
    Ok((0..n)
        .map(|p| simulate_vol(model, times, &mut stream(seed, p, StreamRole::Vol)).qv_steps.iter().sum())
        .collect())
}
