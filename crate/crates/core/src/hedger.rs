//! Self-financing replication of `X_T^n <X>_T^m e^{i omega X_T + i s <X>_T}`
//! with the claim `Q`, the stock and the bond, under discrete rebalancing.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::charfun::{root_u_dual, Branch, CharfunError};
use crate::dual::DualComplex;
use crate::simulator::{simulate_path, PathRecord, SimError, VolModel};
use crate::I;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HedgeError {
    #[error(transparent)]
    Charfun(#[from] CharfunError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid hedge setup: {0}")]
    Invalid(&'static str),
}

/// Square matrix of dual numbers, row major.
pub type DualMatrix = Vec<Vec<DualComplex>>;

fn mat_mul(a: &DualMatrix, b: &DualMatrix) -> DualMatrix {
    let n = a.len();
    let mut c = vec![vec![DualComplex::default(); n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            for j in 0..n {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

/// `exp(A)` by scaling and squaring with a Taylor core; partials of the entries
/// are carried through the arithmetic.
pub fn expm_dual(a: &DualMatrix) -> DualMatrix {
    let n = a.len();
    let norm = a.iter().map(|r| r.iter().map(|z| z.primal().norm()).sum::<f64>()).fold(0.0, f64::max);
    let mut k = 0u32;
    while norm / libm::pow(2.0, k as f64) > 0.25 && k < 60 {
        k += 1;
    }
    let scale = 1.0 / libm::pow(2.0, k as f64);
    let a: DualMatrix = a.iter().map(|r| r.iter().map(|z| *z * scale).collect()).collect();
    let ident = |i: usize, j: usize| DualComplex::from(if i == j { 1.0 } else { 0.0 });
    let mut result: DualMatrix = (0..n).map(|i| (0..n).map(|j| ident(i, j)).collect()).collect();
    let mut term = result.clone();
    for p in 1..=20 {
        term = mat_mul(&term, &a);
        let inv = 1.0 / p as f64;
        for row in term.iter_mut() {
            for z in row.iter_mut() {
                *z = *z * inv;
            }
        }
        for i in 0..n {
            for j in 0..n {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..k {
        result = mat_mul(&result, &result);
    }
    result
}

/// Conditional transform `Q_t = E_t e^{i u X_T}` of the remaining variance.
#[derive(Debug, Clone, PartialEq)]
pub struct QEngine {
    pub model: VolModel,
    pub maturity: f64,
}

impl QEngine {
    pub fn new(model: VolModel, maturity: f64) -> Self {
        Self { model, maturity }
    }

    /// `E_t exp(c int_t^T sigma^2)` given the current regime.
    pub fn laplace(&self, t: f64, state: usize, c: DualComplex) -> DualComplex {
        let tau = (self.maturity - t).max(0.0);
        match &self.model {
            VolModel::Deterministic { .. } => (c * self.model.deterministic_qv(t, self.maturity).unwrap()).exp(),
            VolModel::RegimeSwitching { states, generator, .. } => {
                let n = states.len();
                let a: DualMatrix = (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| {
                                let mut z = DualComplex::from(generator[i][j] * tau);
                                if i == j {
                                    z += c * (states[i] * states[i] * tau);
                                }
                                z
                            })
                            .collect()
                    })
                    .collect();
                let e = expm_dual(&a);
                e[state].iter().fold(DualComplex::default(), |acc, z| acc + *z)
            }
        }
    }

    /// `Q_t` as a dual number in `(omega, s)`.
    pub fn q_value(&self, t: f64, x_t: f64, state: usize, u: DualComplex) -> DualComplex {
        let c = (u * u + u * I) * (-0.5);
        (u * (I * x_t)).exp() * self.laplace(t, state, c)
    }
}

/// Claim `X_T^n <X>_T^m e^{i omega X_T + i s <X>_T}` and the root used for `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgeSpec {
    pub omega: Complex64,
    pub s: Complex64,
    pub n: usize,
    pub m: usize,
    pub branch: Branch,
}

impl HedgeSpec {
    pub fn validate(&self) -> Result<(), HedgeError> {
        if self.n + self.m > 2 {
            return Err(HedgeError::Invalid("n + m <= 2"));
        }
        Ok(())
    }

    fn u(&self) -> Result<DualComplex, HedgeError> {
        Ok(root_u_dual(DualComplex::var_a(self.omega), DualComplex::var_b(self.s), self.branch)?)
    }

    pub fn target(&self, x: f64, q: f64) -> Complex64 {
        (I * self.omega * x + I * self.s * q).exp() * libm::pow(x, self.n as f64) * libm::pow(q, self.m as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HedgeRun {
    pub terminal_portfolio: Complex64,
    pub target: Complex64,
    pub error: Complex64,
    /// Share notional `shares * S_t` at each rebalance.
    pub share_notional: Vec<Complex64>,
    /// Largest `|Pi_t - (N Q)^{(n,m)}_t|` seen at rebalance dates before the reset.
    pub max_tracking: f64,
}

fn binom(n: usize, k: usize) -> f64 {
    match (n, k) {
        (_, 0) => 1.0,
        (2, 1) => 2.0,
        _ => 1.0,
    }
}

struct Holdings {
    /// `(a, b, units)`: units of the claim paying `(-i d_w)^a (-i d_s)^b e^{i u X_T}`.
    claims: Vec<(usize, usize, Complex64)>,
    shares: Complex64,
}

/// Run the strategy along one path, rebalancing at every `every`-th node.
pub fn simulate_hedge(
    spec: &HedgeSpec,
    engine: &QEngine,
    path: &PathRecord,
    every: usize,
) -> Result<HedgeRun, HedgeError> {
    spec.validate()?;
    if every == 0 {
        return Err(HedgeError::Invalid("rebalance interval must be positive"));
    }
    let u = spec.u()?;
    let (n, m) = (spec.n, spec.m);
    let w = DualComplex::var_a(spec.omega);
    let s = DualComplex::var_b(spec.s);
    let last = path.x.len() - 1;
    let q_at = |i: usize| engine.q_value(path.times[i], path.x[i], path.regime[i], u);
    let n_at = |i: usize| ((w - u) * (I * path.x[i]) + s * (I * path.qv[i])).exp();

    let mut value = Complex64::new(0.0, 0.0);
    let mut hold: Option<Holdings> = None;
    let mut notional = Vec::new();
    let mut max_tracking = 0.0f64;
    let mut q_prev = q_at(0);
    let mut s_prev = libm::exp(path.x[0]);
    for i in 0..=last {
        let q = if i == 0 { q_prev } else { q_at(i) };
        let st = libm::exp(path.x[i]);
        if let Some(h) = &hold {
            for &(a, b, units) in &h.claims {
                value += units * (q.minus_i_partial(a, b) - q_prev.minus_i_partial(a, b));
            }
            value += h.shares * (st - s_prev);
        }
        let nn = n_at(i);
        let fair = (nn * q).minus_i_partial(n, m);
        if i == 0 {
            value = fair;
        }
        if i < last && i % every == 0 {
            max_tracking = max_tracking.max((value - fair).norm());
            let mut claims = Vec::new();
            let mut claim_value = Complex64::new(0.0, 0.0);
            for j in 0..=n {
                for k in 0..=m {
                    let units = nn.minus_i_partial(j, k) * (binom(n, j) * binom(m, k));
                    claims.push((n - j, m - k, units));
                    claim_value += units * q.minus_i_partial(n - j, m - k);
                }
            }
            let leg = ((w - u) * nn * q * I).minus_i_partial(n, m);
            let shares = leg / st;
            notional.push(shares * st);
            // the bond position `value - claim_value - leg` earns nothing at zero rates
            let _ = claim_value;
            hold = Some(Holdings { claims, shares });
        }
        q_prev = q;
        s_prev = st;
    }
    let target = spec.target(path.x[last], path.qv[last]);
    Ok(HedgeRun { terminal_portfolio: value, target, error: value - target, share_notional: notional, max_tracking })
}

/// Error statistics for one rebalance frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgeStats {
    pub rebalances: usize,
    pub rms: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HedgeReport {
    pub stats: Vec<HedgeStats>,
    /// Least-squares slope of `log rms` against `log dt`.
    pub slope: f64,
}

/// Aggregate per-path errors; `errors[f][p]` belongs to frequency `rebalances[f]`.
pub fn hedge_report(rebalances: &[usize], errors: &[Vec<Complex64>]) -> HedgeReport {
    let stats: Vec<HedgeStats> = rebalances
        .iter()
        .zip(errors)
        .map(|(&r, e)| {
            let n = e.len().max(1) as f64;
            let ms = e.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
            HedgeStats { rebalances: r, rms: libm::sqrt(ms), max: e.iter().map(|z| z.norm()).fold(0.0, f64::max) }
        })
        .collect();
    let pts: Vec<(f64, f64)> = stats
        .iter()
        .filter(|s| s.rms > 0.0)
        .map(|s| (libm::log(1.0 / s.rebalances as f64), libm::log(s.rms)))
        .collect();
    let slope = if pts.len() >= 2 {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };
    HedgeReport { stats, slope }
}

/// Setup of a hedge convergence study on a fixed simulation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgeStudy {
    pub spec: HedgeSpec,
    pub model: VolModel,
    pub x0: f64,
    pub maturity: f64,
    pub steps: usize,
    /// Rebalance counts; each must divide `steps`.
    pub rebalances: Vec<usize>,
    pub n_paths: u64,
    pub seed: u64,
}

impl HedgeStudy {
    pub fn validate(&self) -> Result<(), HedgeError> {
        self.spec.validate()?;
        self.model.validate()?;
        if self.rebalances.iter().any(|&r| r == 0 || self.steps % r != 0) {
            return Err(HedgeError::Invalid("rebalance counts must divide the step count"));
        }
        Ok(())
    }

    /// Terminal errors of path `p` for each rebalance count.
    pub fn path_errors(&self, p: u64) -> Result<Vec<Complex64>, HedgeError> {
        let times = crate::simulator::uniform_grid(self.maturity, self.steps);
        let path = simulate_path(&self.model, &times, self.x0, self.seed, p);
        let engine = QEngine::new(self.model.clone(), self.maturity);
        self.rebalances.iter().map(|&r| Ok(simulate_hedge(&self.spec, &engine, &path, self.steps / r)?.error)).collect()
    }

    /// Collect per-path errors (in path order) into a report.
    pub fn report_from(&self, per_path: &[Vec<Complex64>]) -> HedgeReport {
        let errors: Vec<Vec<Complex64>> =
            (0..self.rebalances.len()).map(|f| per_path.iter().map(|e| e[f]).collect()).collect();
        hedge_report(&self.rebalances, &errors)
    }

    pub fn run(&self) -> Result<HedgeReport, HedgeError> {
        self.validate()?;
        let per_path = (0..self.n_paths).map(|p| self.path_errors(p)).collect::<Result<Vec<_>, _>>()?;
        Ok(self.report_from(&per_path))
    }
}
