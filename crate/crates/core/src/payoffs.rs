//! European image payoffs that replicate barrier claims.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

use crate::charfun::{root_u_dual, root_v_dual, Branch, CharfunError};
use crate::claim::Side;
use crate::dual::DualComplex;
use crate::quad::{integrate, integrate_to_infinity, QuadError, QuadratureSpec};
use crate::special::gamma;
use crate::{c64, I};

pub use crate::claim::BarrierSpec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PayoffError {
    #[error("image term n={n} is not finite at x={x}")]
    NonfiniteTerm { n: i64, x: f64 },
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Charfun(#[from] CharfunError),
    #[error("invalid payoff parameter: {0}")]
    Invalid(&'static str),
}

type EvalFn = Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>;

/// Terminal payoff `phi(x, v)` of log price and quadratic variation.
#[derive(Clone)]
pub struct PayoffFn {
    eval: EvalFn,
    /// Interval outside which the payoff vanishes.
    pub support: Option<(f64, f64)>,
    /// Points in `x` where the payoff or its slope may jump.
    pub breakpoints: Vec<f64>,
    pub depends_on_v: bool,
    pub description: String,
}

impl fmt::Debug for PayoffFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PayoffFn")
            .field("description", &self.description)
            .field("support", &self.support)
            .field("breakpoints", &self.breakpoints)
            .field("depends_on_v", &self.depends_on_v)
            .finish()
    }
}

impl PayoffFn {
    pub fn new<F>(description: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, f64) -> Complex64 + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(f),
            support: None,
            breakpoints: Vec::new(),
            depends_on_v: true,
            description: description.into(),
        }
    }

    /// Payoff of `x` alone.
    pub fn of_x<F>(description: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        let mut p = Self::new(description, move |x, _| f(x));
        p.depends_on_v = false;
        p
    }

    pub fn with_support(mut self, lo: f64, hi: f64) -> Self {
        self.support = Some((lo, hi));
        self
    }

    pub fn with_breakpoints(mut self, b: Vec<f64>) -> Self {
        self.breakpoints = b;
        self
    }

    #[inline]
    pub fn eval(&self, x: f64, v: f64) -> Complex64 {
        if let Some((lo, hi)) = self.support {
            if x < lo || x > hi {
                return Complex64::new(0.0, 0.0);
            }
        }
        (self.eval)(x, v)
    }
}

/// `1{x > L} phi(x, v) - 1{x < L} e^{x-L} phi(2L - x, v)`.
pub fn sbko_image(phi: PayoffFn, l: f64) -> PayoffFn {
    let mut bp: Vec<f64> = phi.breakpoints.iter().flat_map(|&b| [b, 2.0 * l - b]).collect();
    bp.push(l);
    let dep = phi.depends_on_v;
    let desc = alloc::format!("sbko_image(L={l}) of {}", phi.description);
    let mut out = PayoffFn::new(desc, move |x, v| {
        if x > l {
            phi.eval(x, v)
        } else if x < l {
            -phi.eval(2.0 * l - x, v) * libm::exp(x - l)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    out.breakpoints = bp;
    out.depends_on_v = dep;
    out
}

/// `1{x < U} phi(x, v) - 1{x > U} e^{x-U} phi(2U - x, v)`.
pub fn sbko_image_upper(phi: PayoffFn, u: f64) -> PayoffFn {
    let mut bp: Vec<f64> = phi.breakpoints.iter().flat_map(|&b| [b, 2.0 * u - b]).collect();
    bp.push(u);
    let dep = phi.depends_on_v;
    let desc = alloc::format!("sbko_image_upper(U={u}) of {}", phi.description);
    let mut out = PayoffFn::new(desc, move |x, v| {
        if x < u {
            phi.eval(x, v)
        } else if x > u {
            -phi.eval(2.0 * u - x, v) * libm::exp(x - u)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    out.breakpoints = bp;
    out.depends_on_v = dep;
    out
}

fn phi_star(phi: &PayoffFn, l: f64, u: f64, y: f64, v: f64) -> Complex64 {
    if y > l && y < u {
        phi.eval(y, v)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// Individual image terms `e^{-n D}(phi*(2nD + x) - e^{x-L} phi*(2nD + 2L - x))`, `n = -q..=q`.
pub fn dbko_terms(
    phi: &PayoffFn,
    l: f64,
    u: f64,
    q: u32,
    x: f64,
    v: f64,
) -> Result<Vec<(i64, Complex64)>, PayoffError> {
    let delta = u - l;
    let q = q as i64;
    let mut out = Vec::with_capacity((2 * q + 1) as usize);
    for n in -q..=q {
        let sh = 2.0 * n as f64 * delta;
        let a = phi_star(phi, l, u, sh + x, v);
        let b = phi_star(phi, l, u, sh + 2.0 * l - x, v);
        // e^{-nD} and e^{x-L} folded into one exponent
        let t = a * libm::exp(-(n as f64) * delta) - b * libm::exp(x - l - n as f64 * delta);
        if !(t.re.is_finite() && t.im.is_finite()) {
            return Err(PayoffError::NonfiniteTerm { n, x });
        }
        out.push((n, t));
    }
    Ok(out)
}

/// Truncated double barrier image payoff, summing `|n| <= q`.
pub fn dbko_image(phi: PayoffFn, l: f64, u: f64, q: u32) -> PayoffFn {
    let delta = u - l;
    let mut bp = Vec::new();
    let qi = q as i64;
    for k in (-2 * qi - 2)..=(2 * qi + 2) {
        bp.push(l + k as f64 * delta);
    }
    let dep = phi.depends_on_v;
    let desc = alloc::format!("dbko_image(L={l}, U={u}, q={q}) of {}", phi.description);
    let mut out = PayoffFn::new(desc, move |x, v| match dbko_terms(&phi, l, u, q, x, v) {
        Ok(t) => t.iter().fold(Complex64::new(0.0, 0.0), |acc, (_, z)| acc + z),
        Err(_) => Complex64::new(f64::NAN, f64::NAN),
    });
    out.breakpoints = bp;
    out.depends_on_v = dep;
    out
}

fn ski_psi_dual(x: f64, h: f64, u: DualComplex, side: Side) -> DualComplex {
    let d = x - h;
    let (strict, weak) = match side {
        Side::Lower => (x < h, x <= h),
        Side::Upper => (x > h, x >= h),
    };
    let mut out = DualComplex::constant(Complex64::new(0.0, 0.0));
    if strict {
        out += ((1.0 - u * I) * d).exp();
    }
    if weak {
        out += (u * (I * d)).exp();
    }
    out
}

/// Knock-in payoff `psi_H(x; omega, s)`.
pub fn ski_psi(
    x: f64,
    h: f64,
    omega: Complex64,
    s: Complex64,
    side: Side,
    branch: Branch,
) -> Result<Complex64, CharfunError> {
    ski_psi_derivs(0, 0, x, h, omega, s, side, branch)
}

/// `(-i d_omega)^n (-i d_s)^m psi_H(x; omega, s)`, `n + m <= 2`.
#[allow(clippy::too_many_arguments)]
pub fn ski_psi_derivs(
    n: usize,
    m: usize,
    x: f64,
    h: f64,
    omega: Complex64,
    s: Complex64,
    side: Side,
    branch: Branch,
) -> Result<Complex64, CharfunError> {
    let u = root_u_dual(DualComplex::var_a(omega), DualComplex::var_b(s), branch)?;
    Ok(ski_psi_dual(x, h, u, side).minus_i_partial(n, m))
}

/// Knock-in power-exponential image as a payoff of `x`.
pub fn ski_payoff(
    h: f64,
    side: Side,
    n: usize,
    m: usize,
    omega: Complex64,
    s: Complex64,
    branch: Branch,
) -> Result<PayoffFn, CharfunError> {
    let u = root_u_dual(DualComplex::var_a(omega), DualComplex::var_b(s), branch)?;
    let desc = alloc::format!("ski_psi(H={h}, {side:?}, n={n}, m={m}, omega={omega}, s={s})");
    Ok(PayoffFn::of_x(desc, move |x| ski_psi_dual(x, h, u, side).minus_i_partial(n, m))
        .with_breakpoints(alloc::vec![h]))
}

/// Rebate payoff `exp(i v(s)(x - H) + i s qv)`.
pub fn rebate_psi(x: f64, qv: f64, h: f64, s: Complex64, branch: Branch) -> Result<Complex64, CharfunError> {
    rebate_psi_derivs(0, x, qv, h, s, branch)
}

/// `(-i d_s)^k` of the rebate payoff.
pub fn rebate_psi_derivs(
    k: usize,
    x: f64,
    qv: f64,
    h: f64,
    s: Complex64,
    branch: Branch,
) -> Result<Complex64, CharfunError> {
    let sd = DualComplex::var_b(s);
    let v = root_v_dual(sd, branch)?;
    let e = (v * (I * (x - h)) + sd * (I * qv)).exp();
    Ok(e.minus_i_partial(0, k))
}

fn side_factor(x: f64, h: f64, side: Side) -> Option<(f64, f64)> {
    // (distance past the barrier, e^{-+d/2})
    match side {
        Side::Lower if x < h => Some((h - x, libm::exp(-(h - x) / 2.0))),
        Side::Upper if x > h => Some((x - h, libm::exp((x - h) / 2.0))),
        _ => None,
    }
}

fn frac_kernel(d: f64, r: f64, quad: &QuadratureSpec) -> Result<f64, PayoffError> {
    const Z: f64 = 1.0;
    let half = Complex64::new(0.5, 0.0);
    let a = 1.0 / (1.0 - r);
    // cosh(d/2) - cosh(q d), q = sqrt(1/4 - 2z), divided by z
    let diff_over_z = |z: f64| -> Complex64 {
        let q = c64(0.25 - 2.0 * z, 0.0).sqrt();
        let sum = (half + q) * d * 0.5;
        let dif = Complex64::new(d * 2.0 / 2.0, 0.0) / (half + q);
        (sum.sinh() * (dif * z).sinh() * 2.0) / z
    };
    let head = integrate(
        |t| {
            if t <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let z = libm::pow(t, a);
            if z == 0.0 {
                // limit of diff/z as z -> 0
                return c64(2.0 * a * d * libm::sinh(d / 2.0), 0.0);
            }
            diff_over_z(z) * a
        },
        0.0,
        libm::pow(Z, 1.0 - r),
        quad,
    )?
    .re;
    let tail_const = libm::cosh(d / 2.0) * libm::pow(Z, -r) / r;
    let m0 = libm::sqrt(2.0 * Z - 0.25);
    let rot = integrate_to_infinity(
        |t| {
            let m = c64(m0, t);
            let f = ((m * m + 0.25) * 0.5).powf(-r - 1.0) * m;
            f * (I * d * m0 - d * t).exp()
        },
        0.0,
        quad,
    )?;
    let tail_osc = (I * rot).re;
    Ok(r / gamma(1.0 - r) * 2.0 * (head + tail_const - tail_osc))
}

/// Payoff `g(x)` pricing `1{tau_H <= T}(<X>_T - <X>_tau)^r`, `0 < r < 1`.
pub fn frac_ki_payoff(x: f64, h: f64, side: Side, r: f64, quad: &QuadratureSpec) -> Result<f64, PayoffError> {
    if !(r > 0.0 && r < 1.0) {
        return Err(PayoffError::Invalid("fractional power needs 0 < r < 1"));
    }
    match side_factor(x, h, side) {
        None => Ok(0.0),
        Some((d, f)) => Ok(f * frac_kernel(d, r, quad)?),
    }
}

pub fn frac_ki_payoff_fn(h: f64, side: Side, r: f64, quad: QuadratureSpec) -> PayoffFn {
    let desc = alloc::format!("frac_ki(H={h}, {side:?}, r={r})");
    PayoffFn::of_x(desc, move |x| match frac_ki_payoff(x, h, side, r, &quad) {
        Ok(g) => c64(g, 0.0),
        Err(_) => c64(f64::NAN, f64::NAN),
    })
    .with_breakpoints(alloc::vec![h])
}

/// `sinh(d sqrt(y)) / sqrt(y)`, entire in `y`.
fn sinhc(d: f64, y: Complex64) -> Complex64 {
    let t = y * (d * d);
    if t.norm() < 1e-2 {
        // d * sum t^k / (2k+1)!
        let mut term = Complex64::new(1.0, 0.0);
        let mut acc = term;
        for k in 1..10 {
            term = term * t / ((2 * k) * (2 * k + 1)) as f64;
            acc += term;
        }
        acc * d
    } else {
        let q = y.sqrt();
        (q * d).sinh() / q
    }
}

fn ratio_kernel(d: f64, r: f64, eps: f64, p: Complex64, quad: &QuadratureSpec) -> Result<Complex64, PayoffError> {
    let c = Complex64::new(0.25, 0.0) - p * p - I * p;
    let pre = -(Complex64::new(1.0, 0.0) - I * p * 2.0) * d;
    let k = |w: Complex64| pre * sinhc(d, c - w * 2.0);
    let w1 = (c.norm() + 1.0) / 2.0 + 1.0;
    let z1 = libm::pow(w1, r);
    let head_f = |z: f64| {
        if z <= 0.0 {
            return k(Complex64::new(0.0, 0.0)) / r;
        }
        let w = libm::pow(z, 1.0 / r);
        k(c64(w, 0.0)) * (libm::exp(-eps * w) / r)
    };
    let mut head = Complex64::new(0.0, 0.0);
    let mut lo = 0.0;
    // the square root in d_p u vanishes at w = c/2
    if c.im.abs() < 1e-14 && c.re > 0.0 {
        let zs = libm::pow(c.re / 2.0, r);
        if zs < z1 {
            head += integrate(head_f, 0.0, zs, quad)?;
            lo = zs;
        }
    }
    head += integrate(head_f, lo, z1, quad)?;
    let m1 = (c64(2.0 * w1, 0.0) - c).sqrt();
    let tail = integrate_to_infinity(
        |t| {
            let m = m1 + t;
            let w = (m * m + c) * 0.5;
            w.powf(r - 1.0) * (-w * eps).exp() * (m * d).sin() * pre
        },
        0.0,
        quad,
    )?;
    Ok((head + tail) / gamma(r))
}

/// Payoff `g(x)` pricing `1{tau_H <= T} dX e^{i p dX} / (dQ + eps)^r`.
pub fn ratio_ki_payoff(
    x: f64,
    h: f64,
    side: Side,
    r: f64,
    eps: f64,
    p: Complex64,
    quad: &QuadratureSpec,
) -> Result<Complex64, PayoffError> {
    if !(r > 0.0 && eps > 0.0) {
        return Err(PayoffError::Invalid("ratio claim needs r > 0 and eps > 0"));
    }
    match side_factor(x, h, side) {
        None => Ok(Complex64::new(0.0, 0.0)),
        Some((d, f)) => Ok(ratio_kernel(d, r, eps, p, quad)? * f),
    }
}

pub fn ratio_ki_payoff_fn(h: f64, side: Side, r: f64, eps: f64, p: Complex64, quad: QuadratureSpec) -> PayoffFn {
    let desc = alloc::format!("ratio_ki(H={h}, {side:?}, r={r}, eps={eps}, p={p})");
    PayoffFn::of_x(desc, move |x| ratio_ki_payoff(x, h, side, r, eps, p, &quad).unwrap_or(c64(f64::NAN, f64::NAN)))
        .with_breakpoints(alloc::vec![h])
}

/// `x^j v^k e^{i p x + i s v}`.
pub fn power_exp(j: u32, k: u32, p: Complex64, s: Complex64) -> PayoffFn {
    let desc = alloc::format!("x^{j} v^{k} exp(i {p} x + i {s} v)");
    let mut f = PayoffFn::new(desc, move |x, v| {
        (I * p * x + I * s * v).exp() * libm::pow(x, j as f64) * libm::pow(v, k as f64)
    });
    f.depends_on_v = k > 0 || s != Complex64::new(0.0, 0.0);
    f
}
