//! Toy enhancement model: a two-head affine map, shared within frequency
//! bands, from real/imaginary features of the input mixture channels over a
//! few frames of context to the real/imaginary parts of `X̂_q` and `V̂_q`.
//!
//! Inputs are divided by the RMS of the reference input channel and the
//! outputs multiplied back, so the map is scale-equivariant apart from the
//! bias terms.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::beamform::Enhancer;
use crate::error::{bail, Result};
use crate::math;
use crate::spectral::{MultichannelSpectrogram, Spectrogram};

pub const MAX_PARAMS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ModelShape {
    /// Mixture channels fed to the model: the reference first, then the
    /// remaining microphones in ascending order.
    pub input_channels: usize,
    pub ref_mic: usize,
    pub bins: usize,
    pub bands: usize,
    pub context_past: usize,
    pub context_future: usize,
}

impl ModelShape {
    pub fn context(&self) -> usize {
        self.context_past + 1 + self.context_future
    }

    /// Real features per T-F unit.
    pub fn features(&self) -> usize {
        2 * self.input_channels * self.context()
    }

    pub fn num_params(&self) -> usize {
        self.bands * 4 * (self.features() + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_channels == 0 {
            bail!(InvalidInput, "model needs at least one input channel");
        }
        if self.bands == 0 || self.bands > self.bins {
            bail!(InvalidInput, "bands must be in 1..={}, got {}", self.bins, self.bands);
        }
        if self.num_params() > MAX_PARAMS {
            bail!(InvalidInput, "model has {} parameters, limit is {MAX_PARAMS}", self.num_params());
        }
        Ok(())
    }

    pub fn band_of(&self, f: usize) -> usize {
        f * self.bands / self.bins
    }

    /// Index of weight `feature` (or the bias when `feature == features()`)
    /// for output `out` (0 = real, 1 = imaginary) of head `head` (0 = target,
    /// 1 = noise) in band `band`.
    #[inline]
    pub fn param_index(&self, band: usize, head: usize, out: usize, feature: usize) -> usize {
        ((band * 2 + head) * 2 + out) * (self.features() + 1) + feature
    }

    /// Input channel order for predicting at `reference`.
    pub fn channel_order(&self, reference: usize, available: usize) -> Result<Vec<usize>> {
        if reference >= available {
            bail!(InvalidInput, "reference channel {reference} out of range for {available} channels");
        }
        if self.input_channels > available {
            bail!(InvalidInput, "model takes {} input channels, mixture has {available}", self.input_channels);
        }
        let mut order = vec![reference];
        order.extend((0..available).filter(|&c| c != reference));
        order.truncate(self.input_channels);
        Ok(order)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum InitScheme {
    Zeros,
    /// `X̂_q = Y_q`, `V̂_q = 0`.
    Identity,
    /// Independent normal weights with this standard deviation, zero biases.
    Random {
        std: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimates {
    pub target: Spectrogram,
    pub noise: Spectrogram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    shape: ModelShape,
    params: Vec<f64>,
}

/// Normalized input features for one forward pass.
struct Features {
    order: Vec<usize>,
    scale: f64,
}

impl ToyModel {
    pub fn new(shape: ModelShape, init: InitScheme, seed: u64) -> Result<Self> {
        shape.validate()?;
        let n = shape.num_params();
        let mut params = vec![0.0; n];
        match init {
            InitScheme::Zeros => {}
            InitScheme::Identity => {
                let ctx0 = shape.context_past;
                // features are laid out [channel][context][re, im]
                let re = 2 * ctx0;
                for band in 0..shape.bands {
                    params[shape.param_index(band, 0, 0, re)] = 1.0;
                    params[shape.param_index(band, 0, 1, re + 1)] = 1.0;
                }
            }
            InitScheme::Random { std } => {
                let dist = match Normal::new(0.0, std) {
                    Ok(d) => d,
                    Err(_) => bail!(InvalidInput, "invalid init std {std}"),
                };
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let nf = shape.features();
                for (i, p) in params.iter_mut().enumerate() {
                    if i % (nf + 1) != nf {
                        *p = dist.sample(&mut rng);
                    }
                }
            }
        }
        Ok(Self { shape, params })
    }

    pub fn from_params(shape: ModelShape, params: Vec<f64>) -> Result<Self> {
        shape.validate()?;
        if params.len() != shape.num_params() {
            bail!(ShapeMismatch, "{} parameters for a model of {}", params.len(), shape.num_params());
        }
        if params.iter().any(|p| !p.is_finite()) {
            bail!(Numerical, "non-finite parameter");
        }
        Ok(Self { shape, params })
    }

    pub fn shape(&self) -> &ModelShape {
        &self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        Self::from_params(self.shape, params.to_vec())
    }

    fn prepare(&self, y: &MultichannelSpectrogram, reference: usize) -> Result<Features> {
        if y.bins() != self.shape.bins {
            bail!(ShapeMismatch, "model expects {} bins, mixture has {}", self.shape.bins, y.bins());
        }
        let order = self.shape.channel_order(reference, y.num_channels())?;
        let r = y.channel(order[0]);
        let mean_power = r.energy() / (r.frames() * r.bins()).max(1) as f64;
        let scale = if mean_power > 0.0 { math::sqrt(mean_power) } else { 1.0 };
        Ok(Features { order, scale })
    }

    #[inline]
    fn fill_features(&self, y: &MultichannelSpectrogram, feats: &Features, t: usize, f: usize, out: &mut [f64]) {
        let frames = y.frames() as isize;
        let inv = 1.0 / feats.scale;
        let mut i = 0;
        for &c in &feats.order {
            let ch = y.channel(c);
            for d in -(self.shape.context_past as isize)..=(self.shape.context_future as isize) {
                let s = t as isize + d;
                let z = if s >= 0 && s < frames { ch.get(s as usize, f) } else { Complex64::new(0.0, 0.0) };
                out[i] = z.re * inv;
                out[i + 1] = z.im * inv;
                i += 2;
            }
        }
    }

    /// Estimates at the model's reference microphone.
    pub fn forward(&self, y: &MultichannelSpectrogram) -> Result<Estimates> {
        self.forward_at(y, self.shape.ref_mic)
    }

    /// Estimates with `reference` taking the reference role.
    pub fn forward_at(&self, y: &MultichannelSpectrogram, reference: usize) -> Result<Estimates> {
        let feats = self.prepare(y, reference)?;
        let nf = self.shape.features();
        let mut buf = vec![0.0; nf];
        let (frames, bins) = (y.frames(), y.bins());
        let mut target = Spectrogram::zeros(frames, bins);
        let mut noise = Spectrogram::zeros(frames, bins);
        for t in 0..frames {
            for f in 0..bins {
                self.fill_features(y, &feats, t, f, &mut buf);
                let band = self.shape.band_of(f);
                let mut outs = [0.0; 4];
                for (o, slot) in outs.iter_mut().enumerate() {
                    let base = self.shape.param_index(band, o / 2, o % 2, 0);
                    let w = &self.params[base..base + nf + 1];
                    *slot = w[..nf].iter().zip(&buf).map(|(a, b)| a * b).sum::<f64>() + w[nf];
                }
                target.set(t, f, Complex64::new(outs[0], outs[1]) * feats.scale);
                noise.set(t, f, Complex64::new(outs[2], outs[3]) * feats.scale);
            }
        }
        Ok(Estimates { target, noise })
    }

    /// Parameter gradient given loss gradients with respect to both outputs
    /// (complex convention `∂L/∂Re + i·∂L/∂Im`).
    pub fn backward_at(
        &self,
        y: &MultichannelSpectrogram,
        reference: usize,
        grad_target: &Spectrogram,
        grad_noise: &Spectrogram,
    ) -> Result<Vec<f64>> {
        let feats = self.prepare(y, reference)?;
        let (frames, bins) = (y.frames(), y.bins());
        if grad_target.shape() != (frames, bins) || grad_noise.shape() != (frames, bins) {
            bail!(ShapeMismatch, "gradient shape does not match the mixture");
        }
        let nf = self.shape.features();
        let mut buf = vec![0.0; nf];
        let mut grad = vec![0.0; self.params.len()];
        for t in 0..frames {
            for f in 0..bins {
                let gx = grad_target.get(t, f) * feats.scale;
                let gv = grad_noise.get(t, f) * feats.scale;
                let outs = [gx.re, gx.im, gv.re, gv.im];
                if outs.iter().all(|g| *g == 0.0) {
                    continue;
                }
                self.fill_features(y, &feats, t, f, &mut buf);
                let band = self.shape.band_of(f);
                for (o, g) in outs.iter().enumerate() {
                    if *g == 0.0 {
                        continue;
                    }
                    let base = self.shape.param_index(band, o / 2, o % 2, 0);
                    for (dst, x) in grad[base..base + nf].iter_mut().zip(&buf) {
                        *dst += g * x;
                    }
                    grad[base + nf] += g;
                }
            }
        }
        Ok(grad)
    }

    pub fn backward(
        &self,
        y: &MultichannelSpectrogram,
        grad_target: &Spectrogram,
        grad_noise: &Spectrogram,
    ) -> Result<Vec<f64>> {
        self.backward_at(y, self.shape.ref_mic, grad_target, grad_noise)
    }
}

/// Enhancing channel `p` runs the model with `p` as its reference.
impl Enhancer for ToyModel {
    fn enhance_channel(&self, mixture: &MultichannelSpectrogram, channel: usize) -> Result<(Spectrogram, Spectrogram)> {
        let est = self.forward_at(mixture, channel)?;
        Ok((est.target, est.noise))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::StftConfig;

    fn shape(channels: usize) -> ModelShape {
        ModelShape { input_channels: channels, ref_mic: 1, bins: 3, bands: 2, context_past: 1, context_future: 1 }
    }

    fn mixture() -> MultichannelSpectrogram {
        MultichannelSpectrogram::new(
            StftConfig::with_sizes(4, 2),
            (0..3)
                .map(|m| {
                    Spectrogram::from_fn(5, 3, |t, f| {
                        Complex64::new((t + m) as f64 * 0.3 - 0.5, f as f64 - 1.0 + m as f64)
                    })
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_params_zero_output() {
        let m = ToyModel::new(shape(2), InitScheme::Zeros, 0).unwrap();
        let e = m.forward(&mixture()).unwrap();
        assert!(e.target.as_slice().iter().chain(e.noise.as_slice()).all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn identity_passes_reference_through() {
        let y = mixture();
        let m = ToyModel::new(shape(3), InitScheme::Identity, 0).unwrap();
        let e = m.forward(&y).unwrap();
        for (a, b) in e.target.as_slice().iter().zip(y.channel(1).as_slice()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(e.noise.as_slice().iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn channel_mismatch_rejected() {
        let m = ToyModel::new(shape(4), InitScheme::Zeros, 0).unwrap();
        assert!(m.forward(&mixture()).is_err());
    }

    #[test]
    fn too_many_params_rejected() {
        let mut s = shape(8);
        s.bins = 4096;
        s.bands = 200;
        assert!(ToyModel::new(s, InitScheme::Zeros, 0).is_err());
    }

    #[test]
    fn deterministic_random_init() {
        let a = ToyModel::new(shape(2), InitScheme::Random { std: 0.1 }, 5).unwrap();
        let b = ToyModel::new(shape(2), InitScheme::Random { std: 0.1 }, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.forward(&mixture()).unwrap(), b.forward(&mixture()).unwrap());
    }

    #[test]
    fn backward_matches_linear_response() {
        // L = Σ Re(conj(gx)·X̂) + Re(conj(gv)·V̂) is linear in params, so its
        // gradient is exact; compare with parameter perturbations.
        let y = mixture();
        let m = ToyModel::new(shape(2), InitScheme::Random { std: 0.3 }, 1).unwrap();
        let gx = Spectrogram::from_fn(5, 3, |t, f| Complex64::new(t as f64 - 2.0, f as f64 * 0.5));
        let gv = Spectrogram::from_fn(5, 3, |t, f| Complex64::new(0.1 * f as f64, 1.0 - t as f64));
        let loss = |model: &ToyModel| {
            let e = model.forward(&y).unwrap();
            let mut s = 0.0;
            for (a, g) in e.target.as_slice().iter().zip(gx.as_slice()) {
                s += (g.conj() * a).re;
            }
            for (a, g) in e.noise.as_slice().iter().zip(gv.as_slice()) {
                s += (g.conj() * a).re;
            }
            s
        };
        let grad = m.backward(&y, &gx, &gv).unwrap();
        for i in 0..m.params().len() {
            let mut p = m.params().to_vec();
            p[i] += 1.0;
            let plus = loss(&m.with_params(&p).unwrap());
            p[i] -= 2.0;
            let minus = loss(&m.with_params(&p).unwrap());
            assert!(((plus - minus) / 2.0 - grad[i]).abs() < 1e-9);
        }
    }
}
