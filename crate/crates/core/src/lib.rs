//! Pricing and replication of barrier-style claims on the log price `X` and its
//! quadratic variation `<X>` when volatility is independent of the driving
//! Brownian motion.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command line
//! and thread pools live in the `barrier-repl` companion crate.

#![no_std]
// `!(a < b)` is used on purpose so NaN inputs are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// quadrature and special-function tables keep their published digits
#![allow(clippy::excessive_precision)]

extern crate alloc;

pub mod charfun;
pub mod claim;
pub mod dual;
pub mod hedger;
pub mod payoffs;
pub mod pricer;
pub mod quad;
pub mod simulator;
pub mod spanning;
pub mod special;

pub use num_complex::Complex64;

/// Imaginary unit.
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Shorthand for a complex literal.
#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
