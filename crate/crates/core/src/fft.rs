//! Real-signal FFT used by the STFT.
//!
//! With `std` this wraps `rustfft`. Without it, a built-in iterative radix-2
//! transform is used, so `fft_size` must then be a power of two.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{bail, Result};

/// Forward and inverse transforms of one fixed size.
pub struct RealFft {
    size: usize,
    #[cfg(feature = "std")]
    forward: std::sync::Arc<dyn rustfft::Fft<f64>>,
    #[cfg(feature = "std")]
    inverse: std::sync::Arc<dyn rustfft::Fft<f64>>,
    #[cfg(not(feature = "std"))]
    radix2: Radix2,
}

impl core::fmt::Debug for RealFft {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("RealFft").field("size", &self.size).finish()
    }
}

impl RealFft {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 || !size.is_multiple_of(2) {
            bail!(InvalidInput, "fft size must be even and at least 2, got {size}");
        }
        #[cfg(feature = "std")]
        {
            let mut planner = rustfft::FftPlanner::new();
            Ok(Self { size, forward: planner.plan_fft_forward(size), inverse: planner.plan_fft_inverse(size) })
        }
        #[cfg(not(feature = "std"))]
        {
            Ok(Self { size, radix2: Radix2::new(size)? })
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn bins(&self) -> usize {
        self.size / 2 + 1
    }

    /// One-sided unnormalized DFT of `frame` (zero-padded to the FFT size).
    pub fn forward(&self, frame: &[f64], out: &mut [Complex64]) {
        debug_assert!(frame.len() <= self.size);
        debug_assert_eq!(out.len(), self.bins());
        let mut buf = vec![Complex64::new(0.0, 0.0); self.size];
        for (b, &x) in buf.iter_mut().zip(frame) {
            b.re = x;
        }
        self.transform(&mut buf, false);
        out.copy_from_slice(&buf[..self.bins()]);
    }

    /// Inverse of [`forward`](Self::forward), including the `1/N` factor.
    /// The imaginary parts of the DC and Nyquist bins are ignored.
    pub fn inverse(&self, spectrum: &[Complex64], out: &mut [f64]) {
        debug_assert_eq!(spectrum.len(), self.bins());
        let n = self.size;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[0] = Complex64::new(spectrum[0].re, 0.0);
        buf[n / 2] = Complex64::new(spectrum[n / 2].re, 0.0);
        for k in 1..n / 2 {
            buf[k] = spectrum[k];
            buf[n - k] = spectrum[k].conj();
        }
        self.transform(&mut buf, true);
        let scale = 1.0 / n as f64;
        for (o, b) in out.iter_mut().zip(&buf) {
            *o = b.re * scale;
        }
    }

    #[cfg(feature = "std")]
    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        if inverse {
            self.inverse.process(buf);
        } else {
            self.forward.process(buf);
        }
    }

    #[cfg(not(feature = "std"))]
    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        self.radix2.process(buf, inverse);
    }
}

/// Iterative decimation-in-time FFT for power-of-two sizes.
#[derive(Debug, Clone)]
pub struct Radix2 {
    twiddles: Vec<Complex64>,
}

impl Radix2 {
    pub fn new(size: usize) -> Result<Self> {
        if !size.is_power_of_two() {
            bail!(InvalidInput, "radix-2 FFT needs a power-of-two size, got {size}");
        }
        let twiddles =
            (0..size / 2).map(|k| crate::math::cis(-2.0 * crate::math::PI * k as f64 / size as f64)).collect();
        Ok(Self { twiddles })
    }

    /// In-place unnormalized transform; `inverse` flips the exponent sign.
    pub fn process(&self, buf: &mut [Complex64], inverse: bool) {
        let n = buf.len();
        debug_assert_eq!(n, self.twiddles.len() * 2);
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..len / 2 {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + len / 2] * w;
                    buf[start + k] = a + b;
                    buf[start + k + len / 2] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[f64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, &v)| crate::math::cis(-2.0 * crate::math::PI * (k * t) as f64 / n as f64) * v)
                    .sum()
            })
            .collect()
    }

    #[test]
    fn radix2_matches_naive_dft() {
        let x: Vec<f64> = (0..16).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Radix2::new(16).unwrap().process(&mut buf, false);
        for (a, b) in buf.iter().zip(naive_dft(&x)) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn real_fft_round_trip() {
        let fft = RealFft::new(32).unwrap();
        let x: Vec<f64> = (0..32).map(|i| crate::math::sin(i as f64 * 0.37) + 0.1 * i as f64).collect();
        let mut spec = vec![Complex64::new(0.0, 0.0); fft.bins()];
        fft.forward(&x, &mut spec);
        let mut back = vec![0.0; 32];
        fft.inverse(&spec, &mut back);
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_odd_size() {
        assert!(RealFft::new(15).is_err());
    }
}
