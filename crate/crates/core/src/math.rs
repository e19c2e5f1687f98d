//! Scalar helpers that work without `std`. Everything routes through `libm`
//! so results are identical with and without the `std` feature.

use num_complex::Complex64;

pub const PI: f64 = core::f64::consts::PI;

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn log10(x: f64) -> f64 {
    libm::log10(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn abs(z: Complex64) -> f64 {
    libm::hypot(z.re, z.im)
}

#[inline]
pub fn norm_sqr(z: Complex64) -> f64 {
    z.re * z.re + z.im * z.im
}

#[inline]
pub fn cis(theta: f64) -> Complex64 {
    Complex64::new(cos(theta), sin(theta))
}

/// `sign` with `sign(0) = 0`, the subgradient used at the kinks of |x|.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Power ratio in decibels.
#[inline]
pub fn db(ratio: f64) -> f64 {
    10.0 * log10(ratio)
}
