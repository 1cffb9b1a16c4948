//! Claim descriptions shared by the pricer, the Monte Carlo oracle and the CLI.

use num_complex::Complex64;

use crate::charfun::Branch;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClaimError {
    #[error("barrier ordering violated: {0}")]
    BarrierOrder(&'static str),
    #[error("claim {kind:?} needs {what}")]
    Missing { kind: ClaimKind, what: &'static str },
    #[error("invalid parameter: {0}")]
    Invalid(&'static str),
}

/// Barrier levels on the log scale together with the initial log price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSpec {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub x0: f64,
}

impl BarrierSpec {
    pub fn lower(l: f64, x0: f64) -> Self {
        Self { lower: Some(l), upper: None, x0 }
    }

    pub fn upper(u: f64, x0: f64) -> Self {
        Self { lower: None, upper: Some(u), x0 }
    }

    pub fn double(l: f64, u: f64, x0: f64) -> Self {
        Self { lower: Some(l), upper: Some(u), x0 }
    }

    pub fn validate(&self) -> Result<(), ClaimError> {
        match (self.lower, self.upper) {
            (Some(l), Some(u)) if !(l < self.x0 && self.x0 < u) => Err(ClaimError::BarrierOrder("need L < x0 < U")),
            (Some(l), None) if !(l < self.x0) => Err(ClaimError::BarrierOrder("need L < x0")),
            (None, Some(u)) if !(u > self.x0) => Err(ClaimError::BarrierOrder("need U > x0")),
            _ => Ok(()),
        }
    }

    /// The single barrier and its side, if exactly one barrier is set.
    pub fn single(&self) -> Option<(f64, Side)> {
        match (self.lower, self.upper) {
            (Some(l), None) => Some((l, Side::Lower)),
            (None, Some(u)) => Some((u, Side::Upper)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClaimKind {
    /// `X_T^j <X>_T^k e^{i p X_T + i s <X>_T}`
    EuropeanStylePowerExp,
    /// Single barrier knock-out of the power-exponential payoff.
    Sbko,
    /// Double barrier knock-out of the power-exponential payoff.
    Dbko,
    /// `1{tau <= T} dX^n dQ^m e^{i omega dX + i s dQ}` with increments from passage.
    SbkiPowerExp,
    /// `1{tau <= T} (<X>_T - <X>_tau)^r`
    SbkiFracQv,
    /// `1{tau <= T} dX e^{i p dX} / (dQ + eps)^r`
    SbkiRatio,
    /// `<X>_tau^k e^{i s <X>_tau}` paid at passage.
    Rebate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaimSpec {
    pub kind: ClaimKind,
    pub barriers: BarrierSpec,
    /// Power of `X` (`j` or `n`).
    pub j: u32,
    /// Power of `<X>` (`k` or `m`).
    pub k: u32,
    /// Frequency on `X` (`p` or `omega`).
    pub p: Complex64,
    pub s: Complex64,
    pub r: f64,
    pub eps: f64,
    pub branch: Branch,
}

impl ClaimSpec {
    pub fn new(kind: ClaimKind, barriers: BarrierSpec) -> Self {
        Self {
            kind,
            barriers,
            j: 0,
            k: 0,
            p: Complex64::new(0.0, 0.0),
            s: Complex64::new(0.0, 0.0),
            r: 0.5,
            eps: 0.0,
            branch: Branch::Plus,
        }
    }

    pub fn with_orders(mut self, j: u32, k: u32) -> Self {
        self.j = j;
        self.k = k;
        self
    }

    pub fn with_freq(mut self, p: Complex64, s: Complex64) -> Self {
        self.p = p;
        self.s = s;
        self
    }

    pub fn validate(&self) -> Result<(), ClaimError> {
        self.barriers.validate()?;
        if self.j + self.k > 2 {
            return Err(ClaimError::Invalid("derivative orders must satisfy j + k <= 2"));
        }
        let b = &self.barriers;
        match self.kind {
            ClaimKind::EuropeanStylePowerExp => Ok(()),
            ClaimKind::Dbko => {
                if b.lower.is_some() && b.upper.is_some() {
                    Ok(())
                } else {
                    Err(ClaimError::Missing { kind: self.kind, what: "both barriers" })
                }
            }
            ClaimKind::Sbko | ClaimKind::SbkiPowerExp => self.need_single(),
            ClaimKind::SbkiFracQv => {
                self.need_single()?;
                if self.r > 0.0 && self.r < 1.0 {
                    Ok(())
                } else {
                    Err(ClaimError::Invalid("fractional power needs 0 < r < 1"))
                }
            }
            ClaimKind::SbkiRatio => {
                self.need_single()?;
                if self.r > 0.0 && self.eps > 0.0 {
                    Ok(())
                } else {
                    Err(ClaimError::Invalid("ratio claim needs r > 0 and eps > 0"))
                }
            }
            ClaimKind::Rebate => {
                self.need_single()?;
                if (self.s - Complex64::new(0.0, -0.125)).norm() < 1e-12 {
                    Err(ClaimError::Invalid("rebate needs s != -i/8"))
                } else {
                    Ok(())
                }
            }
        }
    }

    fn need_single(&self) -> Result<(), ClaimError> {
        if self.barriers.single().is_some() {
            Ok(())
        } else {
            Err(ClaimError::Missing { kind: self.kind, what: "exactly one barrier" })
        }
    }
}
