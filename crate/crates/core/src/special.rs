//! Gamma function and Gaussian helpers.

use core::f64::consts::PI;

// Lanczos coefficients, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Euler Gamma for real arguments, reflection below 1/2.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        return PI / (libm::sin(PI * x) * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    libm::sqrt(2.0 * PI) * libm::pow(t, x + 0.5) * libm::exp(-t) * a
}

/// Standard normal cdf.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Normal density with mean `m` and variance `v`.
pub fn norm_pdf(x: f64, m: f64, v: f64) -> f64 {
    let d = x - m;
    libm::exp(-0.5 * d * d / v) / libm::sqrt(2.0 * PI * v)
}

/// Probability that `m t + sigma W_t` started at `x0` reaches `level < x0` before `t`.
pub fn first_passage_below(x0: f64, level: f64, mu: f64, sigma: f64, t: f64) -> f64 {
    let b = level - x0;
    let st = sigma * libm::sqrt(t);
    norm_cdf((b - mu * t) / st) + libm::exp(2.0 * mu * b / (sigma * sigma)) * norm_cdf((b + mu * t) / st)
}

/// Probability that `m t + sigma W_t` started at `x0` reaches `level > x0` before `t`.
pub fn first_passage_above(x0: f64, level: f64, mu: f64, sigma: f64, t: f64) -> f64 {
    first_passage_below(-x0, -level, -mu, sigma, t)
}
