//! Gamma function and the sphere constants the radial reduction needs.

use std::f64::consts::PI;

// Lanczos coefficients for g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEF: [f64; 9] = [
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

/// Gamma function for real arguments, using reflection below 1/2.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS_COEF[0];
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let w = x + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * w.powf(x + 0.5) * (-w).exp() * acc
    }
}

/// `ln Gamma(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let w = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * w.ln() - w + acc.ln()
}

/// Euler Beta function for positive arguments.
pub fn beta(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// Surface measure of the unit sphere `S^k` in `R^{k+1}`; `|S^0| = 2`.
pub fn sphere_area(k: u32) -> f64 {
    // |S^k| = 2 pi / (k - 1) |S^{k-2}|, seeded with |S^0| = 2 and |S^1| = 2 pi.
    let mut area = if k % 2 == 0 { 2.0 } else { 2.0 * PI };
    let mut j = if k % 2 == 0 { 2 } else { 3 };
    while j <= k {
        area *= 2.0 * PI / f64::from(j - 1);
        j += 2;
    }
    area
}
