//! Roots of the characteristic exponent and the conditional Gaussian identities.
//!
//! Given `(omega, s)` the root `u` satisfies
//! `exp(-(u^2 + iu) v / 2) = exp(i s v - (omega^2 + i omega) v / 2)` for every
//! integrated variance `v`, so a claim on `(X_T, <X>_T)` collapses to a claim on
//! `X_T` alone.

use num_complex::Complex64;

use crate::dual::DualComplex;
use crate::I;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum Branch {
    #[default]
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn other(self) -> Branch {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CharfunError {
    #[error("discriminant 1/4 - omega^2 - i omega + 2is vanishes at omega={omega}, s={s}")]
    DegenerateDiscriminant { omega: Complex64, s: Complex64 },
    #[error("rebate root branch point at s={s} (s = -i/8)")]
    BranchPoint { s: Complex64 },
}

/// Relative tolerance for the discriminant guard.
pub const DISCRIMINANT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrder {
    pub d_omega_omega: Complex64,
    pub d_omega_s: Complex64,
    pub d_s_s: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharRoot {
    pub omega: Complex64,
    pub s: Complex64,
    pub branch: Branch,
    pub value: Complex64,
    pub d_omega: Complex64,
    pub d_s: Complex64,
    pub higher: Option<SecondOrder>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RebateRoot {
    pub s: Complex64,
    pub branch: Branch,
    pub value: Complex64,
    pub d_s: Complex64,
}

/// `1/4 - omega^2 - i omega + 2 i s`.
#[inline]
pub fn discriminant(omega: Complex64, s: Complex64) -> Complex64 {
    Complex64::new(0.25, 0.0) - omega * omega - I * omega + I * s * 2.0
}

fn check_disc(disc: Complex64, omega: Complex64, s: Complex64) -> Result<(), CharfunError> {
    let scale = 0.25 + (omega * omega).norm() + omega.norm() + 2.0 * s.norm();
    if disc.norm() <= DISCRIMINANT_TOL * scale {
        Err(CharfunError::DegenerateDiscriminant { omega, s })
    } else {
        Ok(())
    }
}

/// `u(omega, s)` on dual arguments; derivatives flow through both inputs.
pub fn root_u_dual(omega: DualComplex, s: DualComplex, branch: Branch) -> Result<DualComplex, CharfunError> {
    let disc = 0.25 - omega * omega - omega * I + s * (I * 2.0);
    check_disc(disc.primal(), omega.primal(), s.primal())?;
    let root = disc.sqrt() * branch.sign();
    Ok((root - 0.5) * I)
}

/// Root `u±(omega, s) = i(-1/2 ± sqrt(1/4 - omega^2 - i omega + 2is))` with
/// first and second partials.
pub fn root_u(omega: Complex64, s: Complex64, branch: Branch) -> Result<CharRoot, CharfunError> {
    let d = root_u_dual(DualComplex::var_a(omega), DualComplex::var_b(s), branch)?;
    Ok(CharRoot {
        omega,
        s,
        branch,
        value: d.primal(),
        d_omega: d.partial(1, 0),
        d_s: d.partial(0, 1),
        higher: Some(SecondOrder {
            d_omega_omega: d.partial(2, 0),
            d_omega_s: d.partial(1, 1),
            d_s_s: d.partial(0, 2),
        }),
    })
}

/// `v(s)` on a dual argument.
pub fn root_v_dual(s: DualComplex, branch: Branch) -> Result<DualComplex, CharfunError> {
    let disc = 0.25 - s * (I * 2.0);
    if disc.primal().norm() <= DISCRIMINANT_TOL * (0.25 + 2.0 * s.primal().norm()) {
        return Err(CharfunError::BranchPoint { s: s.primal() });
    }
    let root = disc.sqrt() * branch.sign();
    Ok((root - 0.5) * I)
}

/// Rebate root `v±(s) = i(-1/2 ± sqrt(1/4 - 2is))`, which makes
/// `exp(i v X_t + i s <X>_t)` a martingale.
pub fn root_v(s: Complex64, branch: Branch) -> Result<RebateRoot, CharfunError> {
    let d = root_v_dual(DualComplex::var_b(s), branch)?;
    Ok(RebateRoot { s, branch, value: d.primal(), d_s: d.partial(0, 1) })
}

/// `E[exp(i omega (X_T - X_t) + i s (<X>_T - <X>_t))]` given integrated variance `v`.
pub fn conditional_charfun(omega: Complex64, s: Complex64, v: f64) -> Complex64 {
    (I * s * v - (omega * omega + I * omega) * (v * 0.5)).exp()
}

/// Prefactor and inner frequency of
/// `E e^{i omega X_T + i s <X>_T} = e^{i(omega-u) x0 + i s qv0} E e^{i u X_T}`.
pub fn charfun_identity_rhs(
    omega: Complex64,
    s: Complex64,
    x0: f64,
    qv0: f64,
    branch: Branch,
) -> Result<(Complex64, Complex64), CharfunError> {
    let u = root_u(omega, s, branch)?.value;
    let pre = (I * (omega - u) * x0 + I * s * qv0).exp();
    Ok((pre, u))
}

/// Zeros in `omega` of the discriminant for fixed `s`.
pub fn discriminant_zeros(s: Complex64) -> [Complex64; 2] {
    let r = (I * s * 8.0).sqrt();
    [(-I + r) * 0.5, (-I - r) * 0.5]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;

    #[test]
    fn roots_at_origin() {
        let p = root_u(c64(0.0, 0.0), c64(0.0, 0.0), Branch::Plus).unwrap();
        assert_eq!(p.value, c64(0.0, 0.0));
        assert_eq!(p.d_s, c64(-2.0, 0.0));
        let m = root_u(c64(0.0, 0.0), c64(0.0, 0.0), Branch::Minus).unwrap();
        assert!((m.value - c64(0.0, -1.0)).norm() < 1e-15);
        assert_eq!(root_v(c64(0.0, 0.0), Branch::Plus).unwrap().value, c64(0.0, 0.0));
        assert!((root_v(c64(0.0, 0.0), Branch::Minus).unwrap().value - c64(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn degenerate_points_are_rejected() {
        assert!(matches!(
            root_u(c64(0.0, -0.5), c64(0.0, 0.0), Branch::Plus),
            Err(CharfunError::DegenerateDiscriminant { .. })
        ));
        assert!(matches!(root_v(c64(0.0, -0.125), Branch::Plus), Err(CharfunError::BranchPoint { .. })));
        for z in discriminant_zeros(c64(0.3, -0.2)) {
            assert!(discriminant(z, c64(0.3, -0.2)).norm() < 1e-14);
        }
    }

    #[test]
    fn charfun_values() {
        assert_eq!(conditional_charfun(c64(0.0, 0.0), c64(0.0, 0.0), 0.04), c64(1.0, 0.0));
        let got = conditional_charfun(c64(1.0, 0.0), c64(0.0, 0.0), 0.04);
        let want = (c64(-1.0, -1.0) * 0.02).exp();
        assert!((got - want).norm() < 1e-16);
    }

    #[test]
    fn identity_prefactor() {
        let (pre, u) = charfun_identity_rhs(c64(0.0, 0.0), c64(0.0, 0.0), 4.2, 0.0, Branch::Plus).unwrap();
        assert_eq!((pre, u), (c64(1.0, 0.0), c64(0.0, 0.0)));
        // at s = 0 one root equals omega itself
        let w = c64(0.8, 0.1);
        let (pre, u) = charfun_identity_rhs(w, c64(0.0, 0.0), 4.2, 0.0, Branch::Plus).unwrap();
        assert!((u - w).norm() < 1e-14 && (pre - 1.0).norm() < 1e-13);
    }
}
