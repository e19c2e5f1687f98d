//! Synthetic multichannel scenes with known target and noise images.
//!
//! Two generators share one [`SceneSpec`]:
//!
//! * [`simulate`] convolves dry sources with short per-microphone FIRs in
//!   the time domain, then scales the noise to the requested SNR at the
//!   reference microphone. `Y = X + V` holds sample-exactly.
//! * [`synth_narrowband_scene`] works directly on STFT coefficients: the
//!   reference-channel images are filtered across frames by known
//!   per-frequency complex filters, so the FCP relative-filter model is
//!   exact and the generating filters can be compared against estimates.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{bail, Result};
use crate::fcp::FcpFilter;
use crate::math;
use crate::spectral::{stft, MultichannelSpectrogram, Spectrogram, StftConfig, StftEngine};

pub const MAX_FIR_TAPS: usize = 64;

/// Dry (anechoic, single-channel) source signal.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DrySource {
    /// Explicit samples; must match `num_samples`.
    Samples(Vec<f64>),
    /// Path to a mono WAV file. The IO layer replaces this with `Samples`
    /// via [`SceneSpec::resolve_sources`] before generation.
    Wav { path: String },
    /// Gaussian noise through a one-pole filter `y[n] = x[n] + pole·y[n-1]`.
    Noise {
        #[cfg_attr(feature = "serde", serde(default))]
        pole: f64,
    },
    /// Harmonic complex with a slowly drifting pitch and a syllable-rate
    /// on/off envelope; a crude stand-in for voiced speech.
    ToneComplex {
        f0: f64,
        harmonics: usize,
        #[cfg_attr(feature = "serde", serde(default = "default_syllable_rate"))]
        syllable_rate: f64,
    },
}

#[cfg(feature = "serde")]
fn default_syllable_rate() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SceneSpec {
    pub num_mics: usize,
    pub num_samples: usize,
    /// `target_firs[p]` is the target-to-microphone-p impulse response.
    pub target_firs: Vec<Vec<f64>>,
    /// `noise_firs[i][p]` for noise source `i`.
    #[cfg_attr(feature = "serde", serde(default))]
    pub noise_firs: Vec<Vec<Vec<f64>>>,
    pub target_source: DrySource,
    #[cfg_attr(feature = "serde", serde(default))]
    pub noise_sources: Vec<DrySource>,
    /// Target-to-total-noise SNR at the reference microphone. `None` keeps
    /// the noise at its natural level.
    pub snr_db: Option<f64>,
    pub ref_mic: usize,
    pub seed: u64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub stft: StftConfig,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let p = self.num_mics;
        if !(2..=8).contains(&p) {
            bail!(InvalidInput, "num_mics must be in 2..=8, got {p}");
        }
        if self.num_samples == 0 {
            bail!(InvalidInput, "num_samples must be positive");
        }
        if self.ref_mic >= p {
            bail!(InvalidInput, "ref_mic {} out of range for {p} mics", self.ref_mic);
        }
        check_firs(&self.target_firs, p, "target")?;
        if self.noise_firs.len() != self.noise_sources.len() {
            bail!(
                InvalidInput,
                "{} noise sources but {} noise FIR sets",
                self.noise_sources.len(),
                self.noise_firs.len()
            );
        }
        for firs in &self.noise_firs {
            check_firs(firs, p, "noise")?;
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                bail!(InvalidInput, "snr_db must be finite");
            }
        }
        self.stft.validate()
    }

    /// Replaces every `Wav` source with the samples returned by `load`.
    pub fn resolve_sources(&mut self, mut load: impl FnMut(&str) -> Result<Vec<f64>>) -> Result<()> {
        for src in core::iter::once(&mut self.target_source).chain(self.noise_sources.iter_mut()) {
            if let DrySource::Wav { path } = src {
                *src = DrySource::Samples(load(path)?);
            }
        }
        Ok(())
    }

    fn source_rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    /// Renders dry source `index` (0 = target, `i + 1` = noise `i`).
    fn render(&self, src: &DrySource, index: u64) -> Result<Vec<f64>> {
        let n = self.num_samples;
        let fs = self.stft.sample_rate as f64;
        let mut rng = self.source_rng(index);
        Ok(match src {
            DrySource::Samples(s) => {
                if s.len() != n {
                    bail!(InvalidInput, "source has {} samples, scene expects {n}", s.len());
                }
                s.clone()
            }
            DrySource::Wav { path } => {
                bail!(InvalidInput, "wav source '{path}' was not resolved to samples")
            }
            DrySource::Noise { pole } => {
                if !(pole.abs() < 1.0) {
                    bail!(InvalidInput, "noise pole must lie in (-1, 1)");
                }
                let mut prev = 0.0;
                (0..n)
                    .map(|_| {
                        let x: f64 = StandardNormal.sample(&mut rng);
                        prev = x + pole * prev;
                        prev
                    })
                    .collect()
            }
            DrySource::ToneComplex { f0, harmonics, syllable_rate } => {
                if !(*f0 > 0.0) || *harmonics == 0 {
                    bail!(InvalidInput, "tone complex needs f0 > 0 and at least one harmonic");
                }
                let phases: Vec<f64> = (0..*harmonics).map(|_| rng.random::<f64>() * 2.0 * math::PI).collect();
                let drift_phase = rng.random::<f64>() * 2.0 * math::PI;
                let env_phase = rng.random::<f64>() * 2.0 * math::PI;
                let mut acc = 0.0;
                (0..n)
                    .map(|i| {
                        let time = i as f64 / fs;
                        let f = f0 * (1.0 + 0.05 * math::sin(2.0 * math::PI * 0.7 * time + drift_phase));
                        acc += 2.0 * math::PI * f / fs;
                        let env = math::sin(math::PI * syllable_rate * time + env_phase);
                        let env = env * env;
                        let mut s = 0.0;
                        for (h, ph) in phases.iter().enumerate() {
                            let k = (h + 1) as f64;
                            if k * f < fs / 2.0 {
                                s += math::cos(k * acc + ph) / k;
                            }
                        }
                        env * s
                    })
                    .collect()
            }
        })
    }
}

fn check_firs(firs: &[Vec<f64>], p: usize, what: &str) -> Result<()> {
    if firs.len() != p {
        bail!(InvalidInput, "{what} FIRs given for {} mics, scene has {p}", firs.len());
    }
    for (m, taps) in firs.iter().enumerate() {
        if taps.is_empty() || taps.len() > MAX_FIR_TAPS {
            bail!(InvalidInput, "{what} FIR for mic {m} has {} taps (allowed 1..={MAX_FIR_TAPS})", taps.len());
        }
        if taps.iter().any(|x| !x.is_finite()) {
            bail!(InvalidInput, "{what} FIR for mic {m} has non-finite taps");
        }
    }
    Ok(())
}

/// Linear convolution truncated to the input length.
pub fn convolve_truncated(signal: &[f64], fir: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; signal.len()];
    for (n, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for (k, &h) in fir.iter().enumerate().take(n + 1) {
            s += h * signal[n - k];
        }
        *o = s;
    }
    out
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Ground-truth decomposition of a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneBundle {
    pub mixture: MultichannelSpectrogram,
    pub target: MultichannelSpectrogram,
    pub noise: MultichannelSpectrogram,
    /// Time-domain channels, present for time-domain scenes only.
    pub mixture_samples: Option<Vec<Vec<f64>>>,
    pub target_samples: Option<Vec<Vec<f64>>>,
    pub noise_samples: Option<Vec<Vec<f64>>>,
    pub ref_mic: usize,
    pub num_samples: usize,
}

impl SceneBundle {
    pub fn num_mics(&self) -> usize {
        self.mixture.num_channels()
    }

    pub fn config(&self) -> &StftConfig {
        self.mixture.config()
    }
}

/// Time-domain scene generation.
pub fn simulate(spec: &SceneSpec) -> Result<SceneBundle> {
    spec.validate()?;
    let p = spec.num_mics;
    let q = spec.ref_mic;
    let n = spec.num_samples;

    let dry_target = spec.render(&spec.target_source, 0)?;
    if energy(&dry_target) == 0.0 {
        bail!(Degenerate, "dry target signal is silent");
    }
    let target: Vec<Vec<f64>> = spec.target_firs.iter().map(|fir| convolve_truncated(&dry_target, fir)).collect();

    let mut noise = vec![vec![0.0; n]; p];
    for (i, (src, firs)) in spec.noise_sources.iter().zip(&spec.noise_firs).enumerate() {
        let dry = spec.render(src, i as u64 + 1)?;
        for (m, fir) in firs.iter().enumerate() {
            for (acc, v) in noise[m].iter_mut().zip(convolve_truncated(&dry, fir)) {
                *acc += v;
            }
        }
    }

    if let Some(snr_db) = spec.snr_db {
        let target_energy = energy(&target[q]);
        let noise_energy = energy(&noise[q]);
        if noise_energy == 0.0 {
            bail!(Degenerate, "snr_db {snr_db} requested but the noise at the reference mic is silent");
        }
        if target_energy == 0.0 {
            bail!(Degenerate, "target image at the reference mic is silent");
        }
        let gain = math::sqrt(target_energy / (noise_energy * math::powf(10.0, snr_db / 10.0)));
        for ch in &mut noise {
            for v in ch.iter_mut() {
                *v *= gain;
            }
        }
    }

    let mixture: Vec<Vec<f64>> =
        target.iter().zip(&noise).map(|(x, v)| x.iter().zip(v).map(|(a, b)| a + b).collect()).collect();

    Ok(SceneBundle {
        mixture: stft(&mixture, &spec.stft)?,
        target: stft(&target, &spec.stft)?,
        noise: stft(&noise, &spec.stft)?,
        mixture_samples: Some(mixture),
        target_samples: Some(target),
        noise_samples: Some(noise),
        ref_mic: q,
        num_samples: n,
    })
}

/// Whether target and noise get their own relative filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NarrowbandLayout {
    /// Independent filters for target and noise (spatially distinct sources).
    #[default]
    Distinct,
    /// One filter per microphone applied to both (co-located sources); the
    /// mixture at every mic is then a filtered copy of the reference mixture.
    Shared,
}

/// A narrowband scene plus the filters that generated it.
#[derive(Debug, Clone)]
pub struct NarrowbandScene {
    pub bundle: SceneBundle,
    /// Per microphone, laid out like an FCP filter with `past = taps`,
    /// `future = 0`; the reference mic holds the identity filter.
    pub target_filters: Vec<FcpFilter>,
    /// All noise sources are summed at the reference mic and share one
    /// filter per microphone.
    pub noise_filters: Vec<FcpFilter>,
}

pub fn synth_narrowband_scene(spec: &SceneSpec, taps_per_freq: usize) -> Result<NarrowbandScene> {
    synth_narrowband_scene_with(spec, taps_per_freq, NarrowbandLayout::Distinct)
}

pub fn synth_narrowband_scene_with(
    spec: &SceneSpec,
    taps_per_freq: usize,
    layout: NarrowbandLayout,
) -> Result<NarrowbandScene> {
    if taps_per_freq < 1 {
        bail!(InvalidInput, "taps_per_freq must be at least 1");
    }
    spec.validate()?;
    let engine = StftEngine::new(spec.stft)?;
    let q = spec.ref_mic;

    let dry_target = spec.render(&spec.target_source, 0)?;
    if energy(&dry_target) == 0.0 {
        bail!(Degenerate, "dry target signal is silent");
    }
    let x_ref = engine.analyze(&dry_target);
    let mut v_ref = Spectrogram::zeros(x_ref.frames(), x_ref.bins());
    for (i, src) in spec.noise_sources.iter().enumerate() {
        let s = engine.analyze(&spec.render(src, i as u64 + 1)?);
        v_ref = v_ref.add(&s)?;
    }
    if let Some(snr_db) = spec.snr_db {
        let ve = v_ref.two_sided_energy();
        if ve == 0.0 {
            bail!(Degenerate, "snr_db {snr_db} requested but the noise is silent");
        }
        let gain = math::sqrt(x_ref.two_sided_energy() / (ve * math::powf(10.0, snr_db / 10.0)));
        v_ref = v_ref.scaled(Complex64::new(gain, 0.0));
    }

    let bins = x_ref.bins();
    let mut rng = spec.source_rng(1 << 20);
    let mut target_filters = Vec::with_capacity(spec.num_mics);
    let mut noise_filters = Vec::with_capacity(spec.num_mics);
    for m in 0..spec.num_mics {
        if m == q {
            target_filters.push(FcpFilter::identity(taps_per_freq, 0, bins));
            noise_filters.push(FcpFilter::identity(taps_per_freq, 0, bins));
            continue;
        }
        let h = random_filter(&mut rng, taps_per_freq, bins);
        let r = match layout {
            NarrowbandLayout::Distinct => random_filter(&mut rng, taps_per_freq, bins),
            NarrowbandLayout::Shared => h.clone(),
        };
        target_filters.push(h);
        noise_filters.push(r);
    }

    let target: Vec<Spectrogram> = target_filters.iter().map(|h| filter_past(h, &x_ref)).collect();
    let noise: Vec<Spectrogram> = noise_filters.iter().map(|r| filter_past(r, &v_ref)).collect();
    let mixture: Vec<Spectrogram> = target.iter().zip(&noise).map(|(x, v)| x.add(v)).collect::<Result<_>>()?;

    Ok(NarrowbandScene {
        bundle: SceneBundle {
            mixture: MultichannelSpectrogram::new(spec.stft, mixture)?,
            target: MultichannelSpectrogram::new(spec.stft, target)?,
            noise: MultichannelSpectrogram::new(spec.stft, noise)?,
            mixture_samples: None,
            target_samples: None,
            noise_samples: None,
            ref_mic: q,
            num_samples: spec.num_samples,
        },
        target_filters,
        noise_filters,
    })
}

/// Dominant current-frame tap with random phase plus weaker past taps.
fn random_filter(rng: &mut ChaCha8Rng, taps: usize, bins: usize) -> FcpFilter {
    let coeffs = (0..bins)
        .map(|_| {
            (0..taps)
                .map(|j| {
                    if j + 1 == taps {
                        let mag = 0.5 + rng.random::<f64>();
                        math::cis(rng.random::<f64>() * 2.0 * math::PI) * mag
                    } else {
                        let re: f64 = StandardNormal.sample(rng);
                        let im: f64 = StandardNormal.sample(rng);
                        Complex64::new(re, im) * 0.3
                    }
                })
                .collect()
        })
        .collect();
    FcpFilter::from_coeffs(taps, 0, coeffs).expect("consistent filter layout")
}

/// `out(t,f) = h(f)ᴴ [s(t-k+1,f), …, s(t,f)]` for a past-only filter.
fn filter_past(h: &FcpFilter, s: &Spectrogram) -> Spectrogram {
    let k = h.past();
    Spectrogram::from_fn(s.frames(), s.bins(), |t, f| {
        let coeffs = h.bin(f);
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, c) in coeffs.iter().enumerate() {
            if let Some(src_t) = (t + j + 1).checked_sub(k) {
                acc += c.conj() * s.get(src_t, f);
            }
        }
        acc
    })
}

/// Per-microphone FIRs for a small array: an integer direct-path delay with
/// a random gain, followed by a short exponentially decaying random tail.
pub fn random_array_firs(seed: u64, num_mics: usize, taps: usize, max_delay: usize) -> Vec<Vec<f64>> {
    let taps = taps.clamp(1, MAX_FIR_TAPS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..num_mics)
        .map(|_| {
            let delay = if max_delay == 0 { 0 } else { rng.random_range(0..=max_delay.min(taps - 1)) };
            let mut fir = vec![0.0; taps];
            fir[delay] = 0.8 + 0.4 * rng.random::<f64>();
            for (n, v) in fir.iter_mut().enumerate().skip(delay + 1) {
                let g: f64 = StandardNormal.sample(&mut rng);
                *v = 0.15 * g * math::exp(-((n - delay) as f64) / 6.0);
            }
            fir
        })
        .collect()
}
