//! STFT analysis/synthesis and the complex spectrogram containers.
//!
//! Framing zero-pads `win_len - hop` samples on both ends so that every input
//! sample sits under the full set of overlapping windows. Synthesis uses the
//! same sqrt-Hann window and divides by the overlap-added window product, so
//! `istft(stft(x)) == x` up to rounding.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{bail, Error, Result};
use crate::fft::RealFft;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Window {
    #[default]
    SqrtHann,
}

impl Window {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "sqrt-hann" | "sqrt_hann" => Ok(Window::SqrtHann),
            other => bail!(InvalidInput, "unsupported window '{other}'"),
        }
    }

    /// Periodic window of length `len`.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::SqrtHann => {
                (0..len).map(|n| math::sqrt(0.5 - 0.5 * math::cos(2.0 * math::PI * n as f64 / len as f64))).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct StftConfig {
    pub sample_rate: u32,
    pub win_len: usize,
    pub hop: usize,
    pub window: Window,
    pub fft_size: usize,
}

impl Default for StftConfig {
    /// 32 ms windows with an 8 ms hop at 16 kHz.
    fn default() -> Self {
        Self { sample_rate: 16_000, win_len: 512, hop: 128, window: Window::SqrtHann, fft_size: 512 }
    }
}

impl StftConfig {
    pub fn with_sizes(win_len: usize, hop: usize) -> Self {
        Self { win_len, hop, fft_size: win_len, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.win_len == 0 {
            bail!(InvalidInput, "win_len and hop must be positive");
        }
        if !self.win_len.is_multiple_of(self.hop) {
            bail!(InvalidInput, "hop {} does not divide win_len {}", self.hop, self.win_len);
        }
        // sqrt-Hann analysis x synthesis is a Hann window, which only
        // overlap-adds to a constant with at least two windows per sample.
        if self.win_len / self.hop < 2 {
            bail!(InvalidInput, "sqrt-hann needs hop <= win_len / 2");
        }
        if self.fft_size < self.win_len || !self.fft_size.is_multiple_of(2) {
            bail!(InvalidInput, "fft_size {} must be even and >= win_len {}", self.fft_size, self.win_len);
        }
        if self.sample_rate == 0 {
            bail!(InvalidInput, "sample_rate must be positive");
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Zero padding applied to each end of the signal.
    pub fn padding(&self) -> usize {
        self.win_len - self.hop
    }

    pub fn frames_for(&self, len: usize) -> usize {
        (len + self.padding()).div_ceil(self.hop)
    }

    /// Longest signal that `frames` frames fully reconstruct.
    pub fn max_len_for(&self, frames: usize) -> usize {
        (frames * self.hop).saturating_sub(self.padding())
    }

    /// Center frequency of bin `f` in Hz.
    pub fn bin_frequency(&self, f: usize) -> f64 {
        f as f64 * self.sample_rate as f64 / self.fft_size as f64
    }
}

/// One channel of complex STFT coefficients, indexed `[t, f]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    frames: usize,
    bins: usize,
    data: Vec<Complex64>,
}

impl Spectrogram {
    pub fn zeros(frames: usize, bins: usize) -> Self {
        Self { frames, bins, data: vec![Complex64::new(0.0, 0.0); frames * bins] }
    }

    pub fn from_vec(frames: usize, bins: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != frames * bins {
            bail!(ShapeMismatch, "{} values for a {frames}x{bins} spectrogram", data.len());
        }
        Ok(Self { frames, bins, data })
    }

    pub fn from_fn(frames: usize, bins: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(frames * bins);
        for t in 0..frames {
            for k in 0..bins {
                data.push(f(t, k));
            }
        }
        Self { frames, bins, data }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.frames, self.bins)
    }

    #[inline]
    pub fn get(&self, t: usize, f: usize) -> Complex64 {
        self.data[t * self.bins + f]
    }

    #[inline]
    pub fn set(&mut self, t: usize, f: usize, value: Complex64) {
        self.data[t * self.bins + f] = value;
    }

    #[inline]
    pub fn get_mut(&mut self, t: usize, f: usize) -> &mut Complex64 {
        &mut self.data[t * self.bins + f]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }

    /// Values of bin `f` across all frames.
    pub fn bin_series(&self, f: usize) -> Vec<Complex64> {
        (0..self.frames).map(|t| self.get(t, f)).collect()
    }

    pub fn check_same_shape(&self, other: &Spectrogram, what: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!("{what}: {:?} vs {:?}", self.shape(), other.shape())));
        }
        Ok(())
    }

    pub fn add(&self, other: &Spectrogram) -> Result<Spectrogram> {
        self.check_same_shape(other, "add")?;
        Ok(Self {
            frames: self.frames,
            bins: self.bins,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Spectrogram) -> Result<Spectrogram> {
        self.check_same_shape(other, "sub")?;
        Ok(Self {
            frames: self.frames,
            bins: self.bins,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scaled(&self, factor: Complex64) -> Spectrogram {
        Self { frames: self.frames, bins: self.bins, data: self.data.iter().map(|z| z * factor).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `Σ |S(t,f)|`.
    pub fn magnitude_sum(&self) -> f64 {
        self.data.iter().map(|z| math::abs(*z)).sum()
    }

    /// `max |S(t,f)|²`.
    pub fn max_power(&self) -> f64 {
        self.data.iter().map(|z| math::norm_sqr(*z)).fold(0.0, f64::max)
    }

    /// Two-sided energy of a one-sided spectrogram: interior bins count
    /// twice, DC and Nyquist once. By Parseval this is `N · Σ_frames Σ_n
    /// (w·x)²` for an even FFT size `N`.
    pub fn two_sided_energy(&self) -> f64 {
        let mut total = 0.0;
        for t in 0..self.frames {
            for f in 0..self.bins {
                let w = if f == 0 || f + 1 == self.bins { 1.0 } else { 2.0 };
                total += w * math::norm_sqr(self.get(t, f));
            }
        }
        total
    }

    /// Plain `Σ |S(t,f)|²` over the stored one-sided bins.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| math::norm_sqr(*z)).sum()
    }
}

/// Complex STFT tensor indexed `[p, t, f]` with a shared configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelSpectrogram {
    config: StftConfig,
    channels: Vec<Spectrogram>,
}

impl MultichannelSpectrogram {
    pub fn new(config: StftConfig, channels: Vec<Spectrogram>) -> Result<Self> {
        if channels.is_empty() {
            bail!(InvalidInput, "a spectrogram needs at least one channel");
        }
        let shape = channels[0].shape();
        if channels.iter().any(|c| c.shape() != shape) {
            bail!(ShapeMismatch, "channels disagree on (frames, bins)");
        }
        if shape.1 != config.bins() {
            bail!(ShapeMismatch, "{} bins but config implies {}", shape.1, config.bins());
        }
        if channels.iter().any(|c| !c.is_finite()) {
            bail!(Numerical, "spectrogram contains non-finite values");
        }
        Ok(Self { config, channels })
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn frames(&self) -> usize {
        self.channels[0].frames()
    }

    pub fn bins(&self) -> usize {
        self.channels[0].bins()
    }

    pub fn channel(&self, p: usize) -> &Spectrogram {
        &self.channels[p]
    }

    pub fn channels(&self) -> &[Spectrogram] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Spectrogram> {
        self.channels
    }

    /// Sub-array in the given channel order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut picked = Vec::with_capacity(indices.len());
        for &i in indices {
            match self.channels.get(i) {
                Some(c) => picked.push(c.clone()),
                None => bail!(InvalidInput, "channel {i} out of range (P = {})", self.channels.len()),
            }
        }
        Self::new(self.config, picked)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.num_channels() != other.num_channels() {
            bail!(ShapeMismatch, "channel counts {} vs {}", self.num_channels(), other.num_channels());
        }
        let channels = self.channels.iter().zip(&other.channels).map(|(a, b)| a.add(b)).collect::<Result<Vec<_>>>()?;
        Ok(Self { config: self.config, channels })
    }
}

/// Reusable analysis/synthesis state for one configuration.
#[derive(Debug)]
pub struct StftEngine {
    config: StftConfig,
    window: Vec<f64>,
    fft: RealFft,
}

impl StftEngine {
    pub fn new(config: StftConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, window: config.window.coefficients(config.win_len), fft: RealFft::new(config.fft_size)? })
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn analyze(&self, signal: &[f64]) -> Spectrogram {
        let c = &self.config;
        let pad = c.padding();
        let frames = c.frames_for(signal.len());
        let bins = c.bins();
        let mut out = Spectrogram::zeros(frames, bins);
        let mut frame = vec![0.0; c.win_len];
        for t in 0..frames {
            let start = t * c.hop;
            for (n, slot) in frame.iter_mut().enumerate() {
                // position in the unpadded signal
                let idx = (start + n).wrapping_sub(pad);
                let x = if start + n >= pad && idx < signal.len() { signal[idx] } else { 0.0 };
                *slot = x * self.window[n];
            }
            let row = &mut out.as_mut_slice()[t * bins..(t + 1) * bins];
            self.fft.forward(&frame, row);
        }
        out
    }

    pub fn synthesize(&self, spec: &Spectrogram, out_len: usize) -> Result<Vec<f64>> {
        let c = &self.config;
        if spec.bins() != c.bins() {
            bail!(ShapeMismatch, "spectrogram has {} bins, config expects {}", spec.bins(), c.bins());
        }
        let max_len = c.max_len_for(spec.frames());
        if out_len > max_len {
            bail!(InvalidInput, "out_len {out_len} exceeds reconstructable length {max_len}");
        }
        let pad = c.padding();
        let total = (spec.frames().saturating_sub(1)) * c.hop + c.win_len;
        let mut acc = vec![0.0; total];
        let mut env = vec![0.0; total];
        let mut time = vec![0.0; c.fft_size];
        for t in 0..spec.frames() {
            self.fft.inverse(spec.frame(t), &mut time);
            let start = t * c.hop;
            for n in 0..c.win_len {
                acc[start + n] += time[n] * self.window[n];
                env[start + n] += self.window[n] * self.window[n];
            }
        }
        Ok((0..out_len).map(|i| acc[i + pad] / env[i + pad]).collect())
    }
}

/// Multichannel STFT. Every channel must have the same length of at least
/// one hop.
pub fn stft(signal: &[Vec<f64>], config: &StftConfig) -> Result<MultichannelSpectrogram> {
    let engine = StftEngine::new(*config)?;
    if signal.is_empty() {
        bail!(InvalidInput, "no channels");
    }
    let len = signal[0].len();
    if signal.iter().any(|c| c.len() != len) {
        bail!(ShapeMismatch, "ragged channel lengths");
    }
    if len < config.hop {
        bail!(InvalidInput, "signal of {len} samples is shorter than one hop ({})", config.hop);
    }
    if signal.iter().any(|c| c.iter().any(|x| !x.is_finite())) {
        bail!(Numerical, "signal contains non-finite samples");
    }
    let channels = signal.iter().map(|c| engine.analyze(c)).collect();
    MultichannelSpectrogram::new(*config, channels)
}

/// Inverse STFT of every channel, truncated to `out_len` samples.
pub fn istft(spec: &MultichannelSpectrogram, config: &StftConfig, out_len: usize) -> Result<Vec<Vec<f64>>> {
    if spec.config() != config {
        bail!(InvalidInput, "spectrogram was produced with a different STFT configuration");
    }
    let engine = StftEngine::new(*config)?;
    spec.channels().iter().map(|c| engine.synthesize(c, out_len)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> StftConfig {
        StftConfig::with_sizes(16, 4)
    }

    #[test]
    fn frame_count_follows_padding() {
        let c = StftConfig::default();
        assert_eq!(c.padding(), 384);
        assert_eq!(c.frames_for(16000), (16000 + 384usize).div_ceil(128));
        assert!(c.max_len_for(c.frames_for(16000)) >= 16000);
    }

    #[test]
    fn validate_rejects_bad_geometry() {
        assert!(StftConfig::with_sizes(16, 5).validate().is_err());
        assert!(StftConfig::with_sizes(16, 16).validate().is_err());
        let mut c = small();
        c.fft_size = 8;
        assert!(c.validate().is_err());
        assert!(Window::from_name("hamming").is_err());
    }

    #[test]
    fn ragged_channels_rejected() {
        let err = stft(&[vec![0.0; 32], vec![0.0; 31]], &small()).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch(_)));
    }

    #[test]
    fn too_short_rejected() {
        assert!(stft(&[vec![0.0; 3]], &small()).is_err());
    }

    #[test]
    fn zero_in_zero_out() {
        let s = stft(&[vec![0.0; 40]], &small()).unwrap();
        assert!(s.channel(0).as_slice().iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn out_len_bounded() {
        let c = small();
        let s = stft(&[vec![1.0; 40]], &c).unwrap();
        let max = c.max_len_for(s.frames());
        assert!(istft(&s, &c, max).is_ok());
        assert!(istft(&s, &c, max + 1).is_err());
    }

    #[test]
    fn short_round_trip() {
        let c = small();
        let x: Vec<f64> = (0..37).map(|i| math::sin(i as f64 * 1.3) + 0.2).collect();
        let s = stft(std::slice::from_ref(&x), &c).unwrap();
        let y = istft(&s, &c, x.len()).unwrap();
        for (a, b) in x.iter().zip(&y[0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
