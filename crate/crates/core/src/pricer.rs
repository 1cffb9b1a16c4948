//! Contour-integral pricing of barrier claims and expectations under a terminal law.
//!
//! Every contour formula is a sum of terms
//! `sign * int d omega_r (-i d_p)^j (-i d_s)^k [K(omega) e^{E(omega) + i u(omega, s) X_T}]`
//! along a horizontal line. The same node table serves both law pricing, where
//! `e^{i u X_T}` is replaced by its expectation, and curve emission at fixed `X_T`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::charfun::{discriminant_zeros, root_u_dual, root_v_dual, Branch, CharfunError};
use crate::claim::{ClaimError, ClaimKind, ClaimSpec, Side};
use crate::dual::DualComplex;
use crate::payoffs::{self, PayoffError, PayoffFn};
use crate::quad::{GaussLegendre, QuadError, QuadratureSpec};
use crate::special::norm_pdf;
use crate::{c64, I};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PricerError {
    #[error("contour omega_i={omega_i} outside admissible strip ({lo}, {hi})")]
    ContourViolation { omega_i: f64, lo: f64, hi: f64 },
    #[error("kernel pole at omega={omega}")]
    KernelPole { omega: Complex64 },
    #[error("invalid contour spec: {0}")]
    InvalidContour(&'static str),
    #[error("invalid terminal law: {0}")]
    InvalidLaw(&'static str),
    #[error("smoothing parameter must be >= 1")]
    InvalidSmoothing,
    #[error("non-finite integrand at omega={omega}")]
    NonFinite { omega: Complex64 },
    #[error("claim kind {0:?} has no curve or price route here")]
    Unsupported(ClaimKind),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Charfun(#[from] CharfunError),
    #[error(transparent)]
    Payoff(#[from] PayoffError),
    #[error(transparent)]
    Claim(#[from] ClaimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadRule {
    Trapezoid,
    GaussLegendrePanels,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSpec {
    pub omega_i: f64,
    /// Integrate `omega_r` over `[-half_width, half_width]`.
    pub half_width: f64,
    /// Nodes per panel for Gauss-Legendre, total nodes for the trapezoid rule.
    pub nodes: usize,
    pub rule: QuadRule,
}

impl ContourSpec {
    pub fn default_for(omega_i: f64, n: u32) -> Self {
        Self { omega_i, half_width: 40.0 * 2.0 * n as f64 / PI, nodes: 32, rule: QuadRule::GaussLegendrePanels }
    }

    fn validate(&self) -> Result<(), PricerError> {
        if !(self.half_width > 0.0) {
            return Err(PricerError::InvalidContour("half_width must be positive"));
        }
        if self.nodes < 16 {
            return Err(PricerError::InvalidContour("need at least 16 nodes"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmoothingSpec {
    pub n: u32,
}

impl Default for SmoothingSpec {
    fn default() -> Self {
        Self { n: 25 }
    }
}

/// Law of `X_T`.
#[derive(Debug, Clone, PartialEq)]
pub enum TerminalLaw {
    /// Components `(weight, v)`: `X_T ~ N(x0 - v/2, v)` with probability `weight`.
    Mixture {
        x0: f64,
        components: Vec<(f64, f64)>,
    },
    Empirical {
        samples: Vec<f64>,
    },
}

impl TerminalLaw {
    pub fn deterministic(x0: f64, v: f64) -> Self {
        TerminalLaw::Mixture { x0, components: vec![(1.0, v)] }
    }

    /// Collapse integrated-variance samples into `bins` equal-count quantile bins.
    pub fn from_qv_samples(x0: f64, samples: &[f64], bins: usize) -> Self {
        let mut s: Vec<f64> = samples.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = s.len();
        let bins = bins.clamp(1, n.max(1));
        let mut components = Vec::with_capacity(bins);
        for b in 0..bins {
            let lo = b * n / bins;
            let hi = (b + 1) * n / bins;
            if hi > lo {
                let mean = s[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
                components.push(((hi - lo) as f64 / n as f64, mean));
            }
        }
        TerminalLaw::Mixture { x0, components }
    }

    pub fn validate(&self) -> Result<(), PricerError> {
        match self {
            TerminalLaw::Mixture { components, .. } => {
                if components.is_empty() {
                    return Err(PricerError::InvalidLaw("empty mixture"));
                }
                if components.iter().any(|&(w, v)| !(w >= 0.0) || !(v >= 0.0)) {
                    return Err(PricerError::InvalidLaw("negative weight or variance"));
                }
                let tot: f64 = components.iter().map(|c| c.0).sum();
                if (tot - 1.0).abs() > 1e-9 {
                    return Err(PricerError::InvalidLaw("weights must sum to 1"));
                }
                Ok(())
            }
            TerminalLaw::Empirical { samples } => {
                if samples.is_empty() {
                    Err(PricerError::InvalidLaw("empty sample"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// `E[e^{E + i u X_T}]` with `E` and `u` carried as dual numbers.
    fn expect_exp(&self, expo: DualComplex, u: DualComplex) -> DualComplex {
        let mut acc = DualComplex::constant(Complex64::new(0.0, 0.0));
        match self {
            TerminalLaw::Mixture { x0, components } => {
                let lin = expo + u * (I * *x0);
                let quad = (u * u + u * I) * (-0.5);
                for &(w, v) in components {
                    acc += (lin + quad * v).exp() * w;
                }
            }
            TerminalLaw::Empirical { samples } => {
                let w = 1.0 / samples.len() as f64;
                for &x in samples {
                    acc += (expo + u * (I * x)).exp() * w;
                }
            }
        }
        acc
    }
}

/// `H_n^(omega) = (-i / 4n) csch(pi omega / 2n)`.
pub fn heaviside_kernel(omega: Complex64, n: u32) -> Result<Complex64, PricerError> {
    Ok(kernel_dual(DualComplex::constant(omega), n)?.primal())
}

fn kernel_dual(z: DualComplex, n: u32) -> Result<DualComplex, PricerError> {
    let nn = n as f64;
    let w = z.primal();
    let k = libm::round(w.im / (2.0 * nn));
    if (w - c64(0.0, 2.0 * nn * k)).norm() < 1e-10 {
        return Err(PricerError::KernelPole { omega: w });
    }
    Ok((z * (PI / (2.0 * nn))).csch() * c64(0.0, -1.0 / (4.0 * nn)))
}

struct NodeTerm {
    kernel: DualComplex,
    /// Part of the kernel from the outermost image terms, for truncation diagnostics.
    kernel_tail: Option<DualComplex>,
    expo: DualComplex,
    u: DualComplex,
}

type NodeFn<'a> = Box<dyn Fn(Complex64) -> Result<NodeTerm, PricerError> + 'a>;

struct Term<'a> {
    sign: f64,
    contour: ContourSpec,
    /// Points on the line where the square-root cut is crossed.
    breaks: Vec<f64>,
    /// Singularities of the integrand in the omega plane.
    sing: Vec<Complex64>,
    /// Range of `c` in the oscillating factor `e^{i omega (x - c)}`.
    offsets: (f64, f64),
    node: NodeFn<'a>,
}

struct Problem<'a> {
    terms: Vec<Term<'a>>,
    j: usize,
    k: usize,
    n: u32,
}

enum Target<'a> {
    Law(&'a TerminalLaw),
    Curve(&'a [f64]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermDiagnostics {
    pub contour: ContourSpec,
    pub value: Complex64,
    pub doublings: u32,
    pub edge_ratio: f64,
}

/// Result of a contour pricing call.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceOutput {
    pub price: Complex64,
    pub terms: Vec<TermDiagnostics>,
    pub smoothing_n: u32,
    /// Contribution of the `|n| = q` image terms (double barrier only).
    pub truncation: Option<Complex64>,
}

/// `omega_r` values where the line `Im omega = omega_i` crosses the cut of
/// `sqrt(1/4 - omega^2 - i omega + 2is)`.
fn cut_crossings(omega_i: f64, s: Complex64) -> Vec<f64> {
    let a = omega_i + 0.5;
    let c = I * s * 2.0;
    if a.abs() < 1e-300 {
        return Vec::new();
    }
    let x = c.im / (2.0 * a);
    if -x * x + a * a + c.re < 0.0 {
        vec![x]
    } else {
        Vec::new()
    }
}

fn check_strip(omega_i: f64, lo: f64, hi: f64, s: Complex64) -> Result<(), PricerError> {
    if !(omega_i > lo && omega_i < hi) {
        return Err(PricerError::ContourViolation { omega_i, lo, hi });
    }
    for z in discriminant_zeros(s) {
        if (z.im - omega_i).abs() < 1e-8 {
            return Err(PricerError::ContourViolation { omega_i, lo, hi });
        }
    }
    Ok(())
}

/// Point of the strip `(lo, hi)`, shrunk by 0.25, nearest the real axis and at
/// least 0.1 away from the discriminant zeros and the line `omega_i = -1/2`.
pub fn default_omega_i(lo: f64, hi: f64, s: Complex64) -> f64 {
    let (a, b) = if hi - lo > 0.5 { (lo + 0.25, hi - 0.25) } else { (lo + (hi - lo) / 4.0, hi - (hi - lo) / 4.0) };
    let mut avoid: Vec<f64> = discriminant_zeros(s).iter().map(|z| z.im).collect();
    avoid.push(-0.5);
    let ok = |w: f64| avoid.iter().all(|&z| (w - z).abs() >= 0.1);
    let t = 0.0f64.clamp(a, b);
    for step in 0..400 {
        for sgn in [1.0, -1.0] {
            let w = t + sgn * 0.05 * step as f64;
            if w >= a && w <= b && ok(w) {
                return w;
            }
        }
    }
    0.5 * (a + b)
}

/// Panel layout along the contour: graded towards singularities near the line
/// and narrow enough to resolve the oscillation `e^{i omega_r c}` for `|c| <= freq`.
struct Layout<'s> {
    n: u32,
    /// Real part of a singularity and its distance from the line.
    sing: &'s [(f64, f64)],
    freq: f64,
}

impl Layout<'_> {
    fn width_at(&self, x: f64) -> f64 {
        let mut w = (2.0 * self.n as f64 / PI).min(4.0);
        if self.freq > 0.0 {
            w = w.min(20.0 / self.freq);
        }
        for &(c, d) in self.sing {
            w = w.min(2.0 * d + 0.5 * (x - c).abs());
        }
        w.max(1e-6)
    }

    fn panels(&self, a: f64, b: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
        let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
        cuts.extend(self.sing.iter().map(|s| s.0).filter(|&x| x > a && x < b));
        cuts.push(a);
        cuts.push(b);
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        cuts.dedup();
        let mut out = Vec::new();
        for seg in cuts.windows(2) {
            let mut x = seg[0];
            while x < seg[1] {
                let mut h = self.width_at(x);
                while h > 1e-6 && self.width_at((x + h).min(seg[1])) < 0.67 * h {
                    h *= 0.5;
                }
                let hi = if x + 1.5 * h >= seg[1] { seg[1] } else { x + h };
                out.push((x, hi));
                x = hi;
            }
        }
        out
    }
}

fn nodes_for(spec: &ContourSpec, w: f64, layout: &Layout, breaks: &[f64], gl: &GaussLegendre) -> Vec<(f64, f64)> {
    match spec.rule {
        QuadRule::GaussLegendrePanels => {
            let mut out = Vec::new();
            for (a, b) in layout.panels(-w, w, breaks) {
                gl.push_panel(a, b, &mut out);
            }
            out
        }
        QuadRule::Trapezoid => {
            let m = spec.nodes.max(2);
            let h = 2.0 * w / (m - 1) as f64;
            (0..m)
                .map(|i| {
                    let wt = if i == 0 || i + 1 == m { 0.5 * h } else { h };
                    (-w + h * i as f64, wt)
                })
                .collect()
        }
    }
}

impl Target<'_> {
    /// Range of `X_T` that carries the mass (law) or is requested (curve).
    fn x_range(&self) -> (f64, f64) {
        match self {
            Target::Law(TerminalLaw::Mixture { x0, components }) => {
                let vmax = components.iter().map(|c| c.1).fold(0.0, f64::max);
                (x0 - vmax / 2.0 - 8.0 * libm::sqrt(vmax), x0 + 8.0 * libm::sqrt(vmax))
            }
            Target::Law(TerminalLaw::Empirical { samples }) => {
                samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
            }
            Target::Curve(xs) => xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x))),
        }
    }
}

/// Values per target point, the truncation tail, and per-term diagnostics.
type ProblemOutput = (Vec<Complex64>, Option<Complex64>, Vec<TermDiagnostics>);

fn run_problem(problem: &Problem, target: &Target) -> Result<ProblemOutput, PricerError> {
    let n_out = match target {
        Target::Law(_) => 1,
        Target::Curve(xs) => xs.len(),
    };
    let mut total = vec![Complex64::new(0.0, 0.0); n_out];
    let mut tail_total: Option<Complex64> = None;
    let mut diags = Vec::new();
    for term in &problem.terms {
        term.contour.validate()?;
        let gl = GaussLegendre::new(term.contour.nodes);
        let (xa, xb) = target.x_range();
        let freq = if xa.is_finite() && xb.is_finite() {
            (xb - term.offsets.0).abs().max((xa - term.offsets.1).abs())
        } else {
            0.0
        };
        let sing: Vec<(f64, f64)> = term.sing.iter().map(|z| (z.re, (z.im - term.contour.omega_i).abs())).collect();
        let layout = Layout { n: problem.n, sing: &sing, freq };
        let mut w = term.contour.half_width;
        let mut doublings = 0;
        loop {
            let nodes = nodes_for(&term.contour, w, &layout, &term.breaks, &gl);
            let mut acc = vec![Complex64::new(0.0, 0.0); n_out];
            let mut tail = Complex64::new(0.0, 0.0);
            let mut has_tail = false;
            let mut peak = 0.0f64;
            let mut edge = 0.0f64;
            let mut vals = vec![Complex64::new(0.0, 0.0); n_out];
            for (idx, &(wr, wt)) in nodes.iter().enumerate() {
                let omega = c64(wr, term.contour.omega_i);
                let nt = (term.node)(omega)?;
                let mut tv = None;
                match target {
                    Target::Law(law) => {
                        let phi = law.expect_exp(nt.expo, nt.u);
                        vals[0] = (nt.kernel * phi).minus_i_partial(problem.j, problem.k);
                        if let Some(kt) = nt.kernel_tail {
                            tv = Some((kt * phi).minus_i_partial(problem.j, problem.k));
                        }
                    }
                    Target::Curve(xs) => {
                        for (v, &x) in vals.iter_mut().zip(xs.iter()) {
                            let e = (nt.expo + nt.u * (I * x)).exp();
                            *v = (nt.kernel * e).minus_i_partial(problem.j, problem.k);
                        }
                    }
                }
                let mut mag = 0.0f64;
                for (a, v) in acc.iter_mut().zip(vals.iter()) {
                    if !(v.re.is_finite() && v.im.is_finite()) {
                        return Err(PricerError::NonFinite { omega });
                    }
                    *a += v * wt;
                    mag = mag.max(v.norm());
                }
                if let Some(t) = tv {
                    tail += t * wt;
                    has_tail = true;
                }
                peak = peak.max(mag);
                if idx == 0 || idx + 1 == nodes.len() {
                    edge = edge.max(mag);
                }
            }
            let ratio = if peak > 0.0 { edge / peak } else { 0.0 };
            if ratio <= 1e-10 || doublings >= 8 {
                for (t, a) in total.iter_mut().zip(acc.iter()) {
                    *t += a * term.sign;
                }
                if has_tail {
                    *tail_total.get_or_insert(Complex64::new(0.0, 0.0)) += tail * term.sign;
                }
                let mut c = term.contour;
                c.half_width = w;
                diags.push(TermDiagnostics { contour: c, value: acc[0] * term.sign, doublings, edge_ratio: ratio });
                break;
            }
            w *= 2.0;
            doublings += 1;
        }
    }
    Ok((total, tail_total, diags))
}

/// Inputs shared by the power-exponential contour formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerExpParams {
    /// `X_0` in the formula.
    pub x0: f64,
    pub j: u32,
    pub k: u32,
    pub p: Complex64,
    pub s: Complex64,
    pub branch: Branch,
    pub smoothing: SmoothingSpec,
    pub contour_g: Option<ContourSpec>,
    pub contour_h: Option<ContourSpec>,
}

impl PowerExpParams {
    pub fn new(x0: f64, j: u32, k: u32, p: Complex64, s: Complex64) -> Self {
        Self {
            x0,
            j,
            k,
            p,
            s,
            branch: Branch::Plus,
            smoothing: SmoothingSpec::default(),
            contour_g: None,
            contour_h: None,
        }
    }

    pub fn with_n(mut self, n: u32) -> Self {
        self.smoothing = SmoothingSpec { n };
        self
    }

    fn check(&self) -> Result<(), PricerError> {
        if self.smoothing.n < 1 {
            return Err(PricerError::InvalidSmoothing);
        }
        if self.j + self.k > 2 {
            return Err(PricerError::Claim(ClaimError::Invalid("derivative orders must satisfy j + k <= 2")));
        }
        Ok(())
    }

    fn pick(&self, user: Option<ContourSpec>, lo: f64, hi: f64) -> Result<ContourSpec, PricerError> {
        let n = self.smoothing.n;
        let c = match user {
            Some(c) => c,
            None => ContourSpec::default_for(default_omega_i(lo, hi, self.s), n),
        };
        check_strip(c.omega_i, lo, hi, self.s)?;
        Ok(c)
    }
}

fn pdual(p: Complex64) -> DualComplex {
    DualComplex::var_a(p)
}

fn sdual(s: Complex64) -> DualComplex {
    DualComplex::var_b(s)
}

fn u_at(omega: Complex64, s: Complex64, branch: Branch) -> Result<DualComplex, PricerError> {
    Ok(root_u_dual(DualComplex::constant(omega), sdual(s), branch)?)
}

fn poles_near(center: Complex64, n: u32, s: Complex64) -> Vec<Complex64> {
    let step = c64(0.0, 2.0 * n as f64);
    let mut v = vec![center - step, center, center + step];
    v.extend_from_slice(&discriminant_zeros(s));
    v
}

fn sbko_problem<'a>(h: f64, side: Side, pr: &PowerExpParams) -> Result<Problem<'a>, PricerError> {
    pr.check()?;
    let n = pr.smoothing.n;
    let nn = n as f64;
    let pi_ = pr.p.im;
    let (g_strip, h_strip) = match side {
        Side::Lower => ((pi_ - 2.0 * nn, pi_), (-1.0 - pi_, 2.0 * nn - 1.0 - pi_)),
        Side::Upper => ((pi_, pi_ + 2.0 * nn), (-2.0 * nn - 1.0 - pi_, -1.0 - pi_)),
    };
    let cg = pr.pick(pr.contour_g, g_strip.0, g_strip.1)?;
    let ch = pr.pick(pr.contour_h, h_strip.0, h_strip.1)?;
    let (x0, p, s, branch) = (pr.x0, pr.p, pr.s, pr.branch);
    let make = |reflected: bool| -> NodeFn<'a> {
        Box::new(move |omega: Complex64| {
            let pd = pdual(p);
            let u = u_at(omega, s, branch)?;
            let om = DualComplex::constant(omega);
            let arg = match (side, reflected) {
                (Side::Lower, false) => om - pd,
                (Side::Lower, true) => -om - pd - I,
                (Side::Upper, false) => pd - om,
                (Side::Upper, true) => om + pd + I,
            };
            let kernel = kernel_dual(arg, n)?;
            let expo = (om - pd) * (-I * h) + (om - u) * (I * x0);
            Ok(NodeTerm { kernel, kernel_tail: None, expo, u })
        })
    };
    Ok(Problem {
        terms: vec![
            Term {
                sign: 1.0,
                contour: cg,
                breaks: cut_crossings(cg.omega_i, s),
                sing: poles_near(p, n, s),
                offsets: (h, h),
                node: make(false),
            },
            Term {
                sign: -1.0,
                contour: ch,
                breaks: cut_crossings(ch.omega_i, s),
                sing: poles_near(-p - I, n, s),
                offsets: (h, h),
                node: make(true),
            },
        ],
        j: pr.j as usize,
        k: pr.k as usize,
        n,
    })
}

fn dbko_problem<'a>(l: f64, up: f64, q: u32, pr: &PowerExpParams) -> Result<Problem<'a>, PricerError> {
    pr.check()?;
    if !(l < up) {
        return Err(PricerError::Claim(ClaimError::BarrierOrder("need L < U")));
    }
    let m = pr.smoothing.n;
    let mm = m as f64;
    let pi_ = pr.p.im;
    let cg = pr.pick(pr.contour_g, pi_ - 2.0 * mm, pi_)?;
    let ch = pr.pick(pr.contour_h, -1.0 - pi_, 2.0 * mm - 1.0 - pi_)?;
    let (x0, p, s, branch) = (pr.x0, pr.p, pr.s, pr.branch);
    let delta = up - l;
    let qi = q as i64;
    let span = 2.0 * q as f64 * delta;
    let g: NodeFn<'a> = Box::new(move |omega: Complex64| {
        let pd = pdual(p);
        let u = u_at(omega, s, branch)?;
        let om = DualComplex::constant(omega);
        let hk = kernel_dual(om - pd, m)?;
        let mut sum = DualComplex::default();
        let mut tail = DualComplex::default();
        for n in -qi..=qi {
            let nd = n as f64 * delta;
            let base = om * (I * 2.0 * nd) - nd;
            let t = (base + (om - pd) * (-I * l)).exp() - (base + (om - pd) * (-I * up)).exp();
            sum += t;
            if n.abs() == qi {
                tail += t;
            }
        }
        let expo = (om - u) * (I * x0);
        Ok(NodeTerm { kernel: hk * sum, kernel_tail: Some(hk * tail), expo, u })
    });
    let h: NodeFn<'a> = Box::new(move |omega: Complex64| {
        let pd = pdual(p);
        let u = u_at(omega, s, branch)?;
        let om = DualComplex::constant(omega);
        let refl = -om - pd - I;
        let hk = kernel_dual(refl, m)?;
        let mut sum = DualComplex::default();
        let mut tail = DualComplex::default();
        for n in -qi..=qi {
            let nd = n as f64 * delta;
            // e^{-n D} e^{(1 - i omega)(2nD + 2L) - L}
            let base = (1.0 - om * I) * (2.0 * nd + 2.0 * l) - nd - l;
            let t = (base + refl * (-I * l)).exp() - (base + refl * (-I * up)).exp();
            sum += t;
            if n.abs() == qi {
                tail += t;
            }
        }
        let expo = (om - u) * (I * x0);
        Ok(NodeTerm { kernel: hk * sum, kernel_tail: Some(hk * tail), expo, u })
    });
    Ok(Problem {
        terms: vec![
            Term {
                sign: 1.0,
                contour: cg,
                breaks: cut_crossings(cg.omega_i, s),
                sing: poles_near(p, m, s),
                offsets: (l - span, up + span),
                node: g,
            },
            Term {
                sign: -1.0,
                contour: ch,
                breaks: cut_crossings(ch.omega_i, s),
                sing: poles_near(-p - I, m, s),
                offsets: (2.0 * l - up - span, l + span),
                node: h,
            },
        ],
        j: pr.j as usize,
        k: pr.k as usize,
        n: m,
    })
}

fn rebate_problem<'a>(h: f64, side: Side, pr: &PowerExpParams) -> Result<Problem<'a>, PricerError> {
    pr.check()?;
    let n = pr.smoothing.n;
    let nn = n as f64;
    let v0 = root_v_dual(sdual(pr.s), pr.branch)?.primal();
    let vi = v0.im;
    let (g_strip, h_strip) = match side {
        Side::Lower => ((vi, vi + 2.0 * nn), (-1.0 - vi, 2.0 * nn - 1.0 - vi)),
        Side::Upper => ((vi - 2.0 * nn, vi), (-2.0 * nn - 1.0 - vi, -1.0 - vi)),
    };
    let cg = pr.pick(pr.contour_g, g_strip.0, g_strip.1)?;
    let ch = pr.pick(pr.contour_h, h_strip.0, h_strip.1)?;
    let (x0, s, branch) = (pr.x0, pr.s, pr.branch);
    let make = |reflected: bool| -> NodeFn<'a> {
        Box::new(move |omega: Complex64| {
            let v = root_v_dual(sdual(s), branch)?;
            let u = u_at(omega, s, branch)?;
            let om = DualComplex::constant(omega);
            let arg = match (side, reflected) {
                (Side::Lower, false) => v - om,
                (Side::Lower, true) => -v - om - I,
                (Side::Upper, false) => om - v,
                (Side::Upper, true) => om + v + I,
            };
            let kernel = kernel_dual(arg, n)?;
            let expo = om * (-I * h) + (om - u) * (I * x0);
            Ok(NodeTerm { kernel, kernel_tail: None, expo, u })
        })
    };
    Ok(Problem {
        terms: vec![
            Term {
                sign: 1.0,
                contour: cg,
                breaks: cut_crossings(cg.omega_i, s),
                sing: poles_near(v0, n, s),
                offsets: (h, h),
                node: make(false),
            },
            Term {
                sign: 1.0,
                contour: ch,
                breaks: cut_crossings(ch.omega_i, s),
                sing: poles_near(-v0 - I, n, s),
                offsets: (h, h),
                node: make(true),
            },
        ],
        j: 0,
        k: pr.k as usize,
        n,
    })
}

fn price_problem(problem: Problem, law: &TerminalLaw) -> Result<PriceOutput, PricerError> {
    law.validate()?;
    let n = problem.n;
    let (v, tail, terms) = run_problem(&problem, &Target::Law(law))?;
    Ok(PriceOutput { price: v[0], terms, smoothing_n: n, truncation: tail })
}

fn curve_problem(problem: Problem, xs: &[f64]) -> Result<Vec<Complex64>, PricerError> {
    Ok(run_problem(&problem, &Target::Curve(xs))?.0)
}

/// `E[g_n(X_T) - h_n(X_T)]` for `1{tau_H > T} X_T^j <X>_T^k e^{i p X_T + i s <X>_T}`.
pub fn price_sbko_powerexp(
    law: &TerminalLaw,
    h: f64,
    side: Side,
    params: &PowerExpParams,
) -> Result<PriceOutput, PricerError> {
    check_side(h, side, params.x0)?;
    price_problem(sbko_problem(h, side, params)?, law)
}

/// The curve `g_n(x) - h_n(x)`.
pub fn curve_sbko_powerexp(
    xs: &[f64],
    h: f64,
    side: Side,
    params: &PowerExpParams,
) -> Result<Vec<Complex64>, PricerError> {
    check_side(h, side, params.x0)?;
    curve_problem(sbko_problem(h, side, params)?, xs)
}

/// Truncated image sum `sum_{|n| <= q} e^{-n D} E[g_{n,m} - h_{n,m}]`; smoothing is `params.smoothing` (`m`).
pub fn price_dbko_powerexp(
    law: &TerminalLaw,
    l: f64,
    u: f64,
    q: u32,
    params: &PowerExpParams,
) -> Result<PriceOutput, PricerError> {
    if !(l < params.x0 && params.x0 < u) {
        return Err(PricerError::Claim(ClaimError::BarrierOrder("need L < x0 < U")));
    }
    price_problem(dbko_problem(l, u, q, params)?, law)
}

pub fn curve_dbko_powerexp(
    xs: &[f64],
    l: f64,
    u: f64,
    q: u32,
    params: &PowerExpParams,
) -> Result<Vec<Complex64>, PricerError> {
    if !(l < params.x0 && params.x0 < u) {
        return Err(PricerError::Claim(ClaimError::BarrierOrder("need L < x0 < U")));
    }
    curve_problem(dbko_problem(l, u, q, params)?, xs)
}

/// `E[g_n(X_T) + h_n(X_T)]` for the rebate `1{tau_H <= T} <X>_tau^k e^{i s <X>_tau}`.
pub fn price_rebate_powerexp(
    law: &TerminalLaw,
    h: f64,
    side: Side,
    params: &PowerExpParams,
) -> Result<PriceOutput, PricerError> {
    check_side(h, side, params.x0)?;
    price_problem(rebate_problem(h, side, params)?, law)
}

pub fn curve_rebate_powerexp(
    xs: &[f64],
    h: f64,
    side: Side,
    params: &PowerExpParams,
) -> Result<Vec<Complex64>, PricerError> {
    check_side(h, side, params.x0)?;
    curve_problem(rebate_problem(h, side, params)?, xs)
}

fn check_side(h: f64, side: Side, x0: f64) -> Result<(), PricerError> {
    let ok = match side {
        Side::Lower => h < x0,
        Side::Upper => h > x0,
    };
    if ok {
        Ok(())
    } else {
        Err(PricerError::Claim(ClaimError::BarrierOrder("barrier on the wrong side of x0")))
    }
}

/// Price of `f(X_T) <X>_T^m e^{i s <X>_T}` from the transform `f_hat` of `f`.
pub fn price_european_style<F>(
    law: &TerminalLaw,
    x0: f64,
    f_hat: F,
    contour: &ContourSpec,
    m: u32,
    s: Complex64,
    branch: Branch,
) -> Result<Complex64, PricerError>
where
    F: Fn(Complex64) -> Complex64,
{
    law.validate()?;
    contour.validate()?;
    if m > 2 {
        return Err(PricerError::Claim(ClaimError::Invalid("m <= 2")));
    }
    let node: NodeFn = Box::new(|omega: Complex64| {
        let u = u_at(omega, s, branch)?;
        let om = DualComplex::constant(omega);
        Ok(NodeTerm { kernel: DualComplex::constant(f_hat(omega)), kernel_tail: None, expo: (om - u) * (I * x0), u })
    });
    let problem = Problem {
        terms: vec![Term {
            sign: 1.0,
            contour: *contour,
            breaks: cut_crossings(contour.omega_i, s),
            sing: discriminant_zeros(s).to_vec(),
            offsets: (0.0, 0.0),
            node,
        }],
        j: 0,
        k: m as usize,
        n: 1,
    };
    Ok(run_problem(&problem, &Target::Law(law))?.0[0])
}

/// `E[payoff(X_T, <X>_T)]` under the terminal law.
pub fn price_payoff_under_law(payoff: &PayoffFn, law: &TerminalLaw) -> Result<Complex64, PricerError> {
    law.validate()?;
    match law {
        TerminalLaw::Empirical { samples } => {
            if payoff.depends_on_v {
                return Err(PricerError::InvalidLaw("empirical law carries no quadratic variation"));
            }
            let w = 1.0 / samples.len() as f64;
            Ok(samples.iter().fold(Complex64::new(0.0, 0.0), |acc, &x| acc + payoff.eval(x, 0.0) * w))
        }
        TerminalLaw::Mixture { x0, components } => {
            let mut total = Complex64::new(0.0, 0.0);
            let mut live: Vec<(f64, f64)> = Vec::new();
            for &(w, v) in components {
                if w == 0.0 {
                    continue;
                }
                if v <= 0.0 {
                    total += payoff.eval(*x0, 0.0) * w;
                } else {
                    live.push((w, v));
                }
            }
            if live.is_empty() {
                return Ok(total);
            }
            let vmin = live.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            let vmax = live.iter().map(|c| c.1).fold(0.0, f64::max);
            let mut lo = x0 - vmax / 2.0 - 12.0 * libm::sqrt(vmax);
            let mut hi = x0 + 12.0 * libm::sqrt(vmax);
            if let Some((a, b)) = payoff.support {
                lo = lo.max(a);
                hi = hi.min(b);
            }
            if !(hi > lo) {
                return Ok(total);
            }
            let width = (libm::sqrt(vmin) / 4.0).max((hi - lo) / 20_000.0);
            let mut breaks = payoff.breakpoints.clone();
            if let Some((a, b)) = payoff.support {
                breaks.push(a);
                breaks.push(b);
            }
            let gl = GaussLegendre::new(16);
            let nodes = gl.composite(lo, hi, &breaks, width);
            if payoff.depends_on_v {
                for &(w, v) in &live {
                    let m = x0 - v / 2.0;
                    let r = 12.0 * libm::sqrt(v);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for &(x, wt) in &nodes {
                        if (x - m).abs() <= r {
                            acc += payoff.eval(x, v) * (wt * norm_pdf(x, m, v));
                        }
                    }
                    total += acc * w;
                }
            } else {
                for &(x, wt) in &nodes {
                    let dens: f64 = live.iter().map(|&(w, v)| w * norm_pdf(x, x0 - v / 2.0, v)).sum();
                    if dens > 0.0 {
                        total += payoff.eval(x, 0.0) * (wt * dens);
                    }
                }
            }
            if !(total.re.is_finite() && total.im.is_finite()) {
                return Err(PricerError::NonFinite { omega: Complex64::new(f64::NAN, f64::NAN) });
            }
            Ok(total)
        }
    }
}

/// European payoff whose expectation prices a knock-in claim.
pub fn knock_in_payoff(claim: &ClaimSpec, quad: QuadratureSpec) -> Result<PayoffFn, PricerError> {
    claim.validate()?;
    let (h, side) =
        claim.barriers.single().ok_or(ClaimError::Missing { kind: claim.kind, what: "exactly one barrier" })?;
    match claim.kind {
        ClaimKind::SbkiPowerExp => {
            Ok(payoffs::ski_payoff(h, side, claim.j as usize, claim.k as usize, claim.p, claim.s, claim.branch)?)
        }
        ClaimKind::SbkiFracQv => Ok(payoffs::frac_ki_payoff_fn(h, side, claim.r, quad)),
        ClaimKind::SbkiRatio => Ok(payoffs::ratio_ki_payoff_fn(h, side, claim.r, claim.eps, claim.p, quad)),
        k => Err(PricerError::Unsupported(k)),
    }
}

/// Numerical settings for claim-level routing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaimNumerics {
    pub smoothing: SmoothingSpec,
    pub q: u32,
    pub contour_g: Option<ContourSpec>,
    pub contour_h: Option<ContourSpec>,
    pub quad: QuadratureSpec,
}

impl Default for ClaimNumerics {
    fn default() -> Self {
        Self {
            smoothing: SmoothingSpec::default(),
            q: 5,
            contour_g: None,
            contour_h: None,
            quad: QuadratureSpec::default(),
        }
    }
}

fn params_for(claim: &ClaimSpec, num: &ClaimNumerics) -> PowerExpParams {
    PowerExpParams {
        x0: claim.barriers.x0,
        j: claim.j,
        k: claim.k,
        p: claim.p,
        s: claim.s,
        branch: claim.branch,
        smoothing: num.smoothing,
        contour_g: num.contour_g,
        contour_h: num.contour_h,
    }
}

/// Price any claim kind under a terminal law.
pub fn price_claim(claim: &ClaimSpec, law: &TerminalLaw, num: &ClaimNumerics) -> Result<PriceOutput, PricerError> {
    claim.validate()?;
    let pr = params_for(claim, num);
    let b = &claim.barriers;
    match claim.kind {
        ClaimKind::Sbko => {
            let (h, side) = b.single().unwrap();
            price_sbko_powerexp(law, h, side, &pr)
        }
        ClaimKind::Dbko => price_dbko_powerexp(law, b.lower.unwrap(), b.upper.unwrap(), num.q, &pr),
        ClaimKind::Rebate => {
            let (h, side) = b.single().unwrap();
            price_rebate_powerexp(law, h, side, &pr)
        }
        ClaimKind::EuropeanStylePowerExp => {
            let f = payoffs::power_exp(claim.j, claim.k, claim.p, claim.s);
            let price = price_payoff_under_law(&f, law)?;
            Ok(PriceOutput { price, terms: Vec::new(), smoothing_n: 0, truncation: None })
        }
        _ => {
            let f = knock_in_payoff(claim, num.quad)?;
            let price = price_payoff_under_law(&f, law)?;
            Ok(PriceOutput { price, terms: Vec::new(), smoothing_n: 0, truncation: None })
        }
    }
}

/// European payoff curve `x -> g(x)` that prices the claim.
pub fn curve_claim(claim: &ClaimSpec, xs: &[f64], num: &ClaimNumerics) -> Result<Vec<Complex64>, PricerError> {
    claim.validate()?;
    let pr = params_for(claim, num);
    let b = &claim.barriers;
    match claim.kind {
        ClaimKind::Sbko => {
            let (h, side) = b.single().unwrap();
            curve_sbko_powerexp(xs, h, side, &pr)
        }
        ClaimKind::Dbko => curve_dbko_powerexp(xs, b.lower.unwrap(), b.upper.unwrap(), num.q, &pr),
        ClaimKind::Rebate => {
            let (h, side) = b.single().unwrap();
            curve_rebate_powerexp(xs, h, side, &pr)
        }
        ClaimKind::EuropeanStylePowerExp => Err(PricerError::Unsupported(claim.kind)),
        _ => {
            let f = knock_in_payoff(claim, num.quad)?;
            Ok(xs.iter().map(|&x| f.eval(x, 0.0)).collect())
        }
    }
}
