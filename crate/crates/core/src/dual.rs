//! Second-order forward-mode differentiation in two complex variables.
//!
//! A [`DualComplex`] stores the truncated Taylor polynomial
//! `c0 + c1 a + c2 b + c3 a^2 + c4 a b + c5 b^2` of a holomorphic function of two
//! variables `(a, b)` around a base point. Partials up to total order two are
//! exact to rounding.

use core::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;
use num_traits::Zero;

const Z: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualComplex {
    c: [Complex64; 6],
}

impl Default for DualComplex {
    fn default() -> Self {
        Self::constant(Z)
    }
}

impl DualComplex {
    pub const fn constant(v: Complex64) -> Self {
        Self { c: [v, Z, Z, Z, Z, Z] }
    }

    /// The first independent variable evaluated at `v`.
    pub const fn var_a(v: Complex64) -> Self {
        Self { c: [v, ONE, Z, Z, Z, Z] }
    }

    /// The second independent variable evaluated at `v`.
    pub const fn var_b(v: Complex64) -> Self {
        Self { c: [v, Z, ONE, Z, Z, Z] }
    }

    pub fn from_partials(p: [[Complex64; 3]; 3]) -> Self {
        Self { c: [p[0][0], p[1][0], p[0][1], p[2][0] * 0.5, p[1][1], p[0][2] * 0.5] }
    }

    #[inline]
    pub fn primal(&self) -> Complex64 {
        self.c[0]
    }

    /// Mixed partial `d^j/da^j d^k/db^k` at the base point. Zero when `j + k > 2`.
    pub fn partial(&self, j: usize, k: usize) -> Complex64 {
        match (j, k) {
            (0, 0) => self.c[0],
            (1, 0) => self.c[1],
            (0, 1) => self.c[2],
            (2, 0) => self.c[3] * 2.0,
            (1, 1) => self.c[4],
            (0, 2) => self.c[5] * 2.0,
            _ => Z,
        }
    }

    /// `(-i d/da)^j (-i d/db)^k` applied at the base point.
    pub fn minus_i_partial(&self, j: usize, k: usize) -> Complex64 {
        let mut f = Complex64::new(1.0, 0.0);
        for _ in 0..(j + k) {
            f *= Complex64::new(0.0, -1.0);
        }
        f * self.partial(j, k)
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Chain rule for a scalar function with value `f0` and derivatives `f1`, `f2`
    /// at the primal.
    #[inline]
    pub fn compose(&self, f0: Complex64, f1: Complex64, f2: Complex64) -> Self {
        let c = &self.c;
        let h = f2 * 0.5;
        Self {
            c: [
                f0,
                f1 * c[1],
                f1 * c[2],
                f1 * c[3] + h * c[1] * c[1],
                f1 * c[4] + h * 2.0 * c[1] * c[2],
                f1 * c[5] + h * c[2] * c[2],
            ],
        }
    }

    pub fn exp(&self) -> Self {
        let e = self.c[0].exp();
        self.compose(e, e, e)
    }

    pub fn ln(&self) -> Self {
        let x = self.c[0];
        let r = x.inv();
        self.compose(x.ln(), r, -r * r)
    }

    /// Principal square root.
    pub fn sqrt(&self) -> Self {
        let s = self.c[0].sqrt();
        let d1 = (s * 2.0).inv();
        let d2 = -d1 / (self.c[0] * 2.0);
        self.compose(s, d1, d2)
    }

    pub fn recip(&self) -> Self {
        let r = self.c[0].inv();
        self.compose(r, -r * r, r * r * r * 2.0)
    }

    /// Principal power `self^a`.
    pub fn powf(&self, a: f64) -> Self {
        let x = self.c[0];
        let p = x.powf(a);
        let p1 = p * a / x;
        let p2 = p1 * (a - 1.0) / x;
        self.compose(p, p1, p2)
    }

    pub fn sinh(&self) -> Self {
        let (s, c) = (self.c[0].sinh(), self.c[0].cosh());
        self.compose(s, c, s)
    }

    pub fn cosh(&self) -> Self {
        let (s, c) = (self.c[0].sinh(), self.c[0].cosh());
        self.compose(c, s, c)
    }

    /// Hyperbolic cosecant, evaluated without overflow for large `|Re z|`.
    pub fn csch(&self) -> Self {
        let (cs, ct) = csch_coth(self.c[0]);
        self.compose(cs, -cs * ct, cs * (ct * ct + cs * cs))
    }

    pub fn scale(&self, k: Complex64) -> Self {
        let mut out = *self;
        for z in out.c.iter_mut() {
            *z *= k;
        }
        out
    }
}

/// `(csch z, coth z)` computed from `exp(-2|Re z|)` so that neither overflows.
pub fn csch_coth(z: Complex64) -> (Complex64, Complex64) {
    let flip = z.re < 0.0;
    let w = if flip { -z } else { z };
    let e = (-w).exp();
    let e2 = e * e;
    let den = Complex64::new(1.0, 0.0) - e2;
    let cs = e * 2.0 / den;
    let ct = (Complex64::new(1.0, 0.0) + e2) / den;
    if flip {
        (-cs, -ct)
    } else {
        (cs, ct)
    }
}

impl From<Complex64> for DualComplex {
    fn from(v: Complex64) -> Self {
        Self::constant(v)
    }
}

impl From<f64> for DualComplex {
    fn from(v: f64) -> Self {
        Self::constant(Complex64::new(v, 0.0))
    }
}

impl Add for DualComplex {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        for i in 0..6 {
            self.c[i] += o.c[i];
        }
        self
    }
}

impl Sub for DualComplex {
    type Output = Self;
    fn sub(mut self, o: Self) -> Self {
        for i in 0..6 {
            self.c[i] -= o.c[i];
        }
        self
    }
}

impl Neg for DualComplex {
    type Output = Self;
    fn neg(mut self) -> Self {
        for z in self.c.iter_mut() {
            *z = -*z;
        }
        self
    }
}

impl Mul for DualComplex {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b) = (&self.c, &o.c);
        Self {
            c: [
                a[0] * b[0],
                a[0] * b[1] + a[1] * b[0],
                a[0] * b[2] + a[2] * b[0],
                a[0] * b[3] + a[1] * b[1] + a[3] * b[0],
                a[0] * b[4] + a[1] * b[2] + a[2] * b[1] + a[4] * b[0],
                a[0] * b[5] + a[2] * b[2] + a[5] * b[0],
            ],
        }
    }
}

impl Div for DualComplex {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl AddAssign for DualComplex {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl SubAssign for DualComplex {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl MulAssign for DualComplex {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

macro_rules! scalar_ops {
    ($t:ty, $conv:expr) => {
        impl Add<$t> for DualComplex {
            type Output = Self;
            fn add(mut self, o: $t) -> Self {
                self.c[0] += $conv(o);
                self
            }
        }
        impl Add<DualComplex> for $t {
            type Output = DualComplex;
            fn add(self, o: DualComplex) -> DualComplex {
                o + self
            }
        }
        impl Sub<$t> for DualComplex {
            type Output = Self;
            fn sub(mut self, o: $t) -> Self {
                self.c[0] -= $conv(o);
                self
            }
        }
        impl Sub<DualComplex> for $t {
            type Output = DualComplex;
            fn sub(self, o: DualComplex) -> DualComplex {
                -o + self
            }
        }
        impl Mul<$t> for DualComplex {
            type Output = Self;
            fn mul(self, o: $t) -> Self {
                self.scale($conv(o))
            }
        }
        impl Mul<DualComplex> for $t {
            type Output = DualComplex;
            fn mul(self, o: DualComplex) -> DualComplex {
                o.scale($conv(self))
            }
        }
        impl Div<$t> for DualComplex {
            type Output = Self;
            fn div(self, o: $t) -> Self {
                self.scale($conv(o).inv())
            }
        }
    };
}

scalar_ops!(Complex64, |z: Complex64| z);
scalar_ops!(f64, |x: f64| Complex64::new(x, 0.0));

impl Zero for DualComplex {
    fn zero() -> Self {
        Self::constant(Z)
    }
    fn is_zero(&self) -> bool {
        self.c.iter().all(|z| z.is_zero())
    }
}
