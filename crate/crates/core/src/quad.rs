//! Quadrature rules: Gauss-Legendre panels and adaptive Gauss-Kronrod.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuadError {
    #[error("quadrature did not reach tolerance (estimate {estimate:e}, error {error:e})")]
    QuadratureFailure { estimate: f64, error: f64 },
    #[error("integrand is not finite at {at}")]
    NonFinite { at: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Bisection depth limit per finite panel.
    pub max_depth: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 1e-12, max_depth: 40 }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let (p, pm) = if n == 1 { (z, 1.0) } else { (p1, p0) };
                dp = n as f64 * (z * p - pm) / (z * z - 1.0);
                let dz = p / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            if n == 1 {
                nodes[0] = 0.0;
                weights[0] = 2.0;
                break;
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Nodes and weights mapped onto `[a, b]`, appended to `out`.
    pub fn push_panel(&self, a: f64, b: f64, out: &mut Vec<(f64, f64)>) {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            out.push((c + h * x, h * w));
        }
    }

    /// Composite rule over `[a, b]` split at `breaks` with panels no wider than `width`.
    pub fn composite(&self, a: f64, b: f64, breaks: &[f64], width: f64) -> Vec<(f64, f64)> {
        let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
        cuts.push(a);
        cuts.push(b);
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        cuts.dedup();
        let mut out = Vec::new();
        for seg in cuts.windows(2) {
            let len = seg[1] - seg[0];
            if len <= 0.0 {
                continue;
            }
            let k = libm::ceil(len / width).max(1.0) as usize;
            for j in 0..k {
                let lo = seg[0] + len * j as f64 / k as f64;
                let hi = if j + 1 == k { seg[1] } else { seg[0] + len * (j + 1) as f64 / k as f64 };
                self.push_panel(lo, hi, &mut out);
            }
        }
        out
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> Result<(Complex64, f64), QuadError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    if !(fc.re.is_finite() && fc.im.is_finite()) {
        return Err(QuadError::NonFinite { at: c });
    }
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        if !(f1.re.is_finite() && f1.im.is_finite() && f2.re.is_finite() && f2.im.is_finite()) {
            return Err(QuadError::NonFinite { at: c - x });
        }
        let s = f1 + f2;
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    Ok((k * h, ((k - g) * h).norm()))
}

/// Adaptive Gauss-Kronrod (7/15) on a finite interval.
pub fn integrate<F: FnMut(f64) -> Complex64>(
    mut f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Complex64, QuadError> {
    integrate_abs(&mut f, a, b, spec, spec.abs_tol)
}

const MAX_SPLITS: usize = 50_000;

fn integrate_abs<F: FnMut(f64) -> Complex64>(
    f: &mut F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
    abs_tol: f64,
) -> Result<Complex64, QuadError> {
    if a == b {
        return Ok(Complex64::new(0.0, 0.0));
    }
    // explicit stack keeps summation order deterministic
    let (whole, err) = gk15(f, a, b)?;
    let mut stack: Vec<(f64, f64, Complex64, f64, u32)> = alloc::vec![(a, b, whole, err, 0)];
    let mut total = Complex64::new(0.0, 0.0);
    let mut scale = whole.norm();
    let mut worst = 0.0f64;
    let mut splits = 0usize;
    while let Some((lo, hi, val, e, depth)) = stack.pop() {
        let tol = (spec.rel_tol * scale).max(abs_tol) * (hi - lo) / (b - a);
        // below roundoff level further splitting cannot help
        let noise = 64.0 * f64::EPSILON * val.norm().max(scale * (hi - lo) / (b - a));
        splits += 1;
        if e <= tol || e <= noise || depth >= spec.max_depth || splits > MAX_SPLITS {
            if e > tol && e > noise {
                worst = worst.max(e);
            }
            total += val;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let (l, el) = gk15(f, lo, mid)?;
        let (r, er) = gk15(f, mid, hi)?;
        scale = scale.max((l + r).norm());
        stack.push((mid, hi, r, er, depth + 1));
        stack.push((lo, mid, l, el, depth + 1));
    }
    if worst > 0.0 && worst > 1e3 * (spec.rel_tol * total.norm()).max(abs_tol) {
        return Err(QuadError::QuadratureFailure { estimate: total.norm(), error: worst });
    }
    Ok(total)
}

/// Integral over `[a, inf)` using doubling panels `[a, a+1], [a+1, a+3], ...`.
pub fn integrate_to_infinity<F: FnMut(f64) -> Complex64>(
    mut f: F,
    a: f64,
    spec: &QuadratureSpec,
) -> Result<Complex64, QuadError> {
    let mut total = Complex64::new(0.0, 0.0);
    let mut lo = a;
    let mut width = 1.0;
    let mut quiet = 0;
    for _ in 0..80 {
        let hi = lo + width;
        let part = integrate_abs(&mut f, lo, hi, spec, spec.abs_tol * 0.1)?;
        total += part;
        if part.norm() <= (spec.rel_tol * total.norm() * 0.1).max(spec.abs_tol * 0.1) {
            quiet += 1;
            if quiet >= 3 {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        width *= 2.0;
    }
    Err(QuadError::QuadratureFailure { estimate: total.norm(), error: f64::INFINITY })
}
