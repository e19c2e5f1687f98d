//! Multichannel WAV files as `f64` channels in `[-1, 1]`.

use std::path::Path;

use clap::ValueEnum;
use hound::{SampleFormat as HoundFormat, WavReader, WavSpec, WavWriter};
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SampleFormat {
    #[default]
    Float32,
    Pcm16,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f64>>,
}

impl Audio {
    pub fn new(sample_rate: u32, channels: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = channels.first() else {
            return Err(usage!("audio needs at least one channel"));
        };
        if channels.iter().any(|c| c.len() != first.len()) {
            return Err(usage!("audio channels differ in length"));
        }
        Ok(Self { sample_rate, channels })
    }

    pub fn mono(sample_rate: u32, samples: Vec<f64>) -> Self {
        Self { sample_rate, channels: vec![samples] }
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

const PCM16_SCALE: f64 = 32768.0;

pub fn read(path: &Path) -> Result<Audio> {
    let wav_err = |source| Error::Wav { path: path.to_path_buf(), source };
    let mut reader = WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (HoundFormat::Float, 32) => {
            reader.samples::<f32>().map(|s| s.map(f64::from)).collect::<std::result::Result<_, _>>().map_err(wav_err)?
        }
        (HoundFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / PCM16_SCALE))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        (fmt, bits) => {
            return Err(usage!(
                "{}: unsupported sample format {fmt:?} {bits}-bit (need PCM16 or float32)",
                path.display()
            ))
        }
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n_ch.max(1)); n_ch];
    for frame in interleaved.chunks_exact(n_ch) {
        for (c, v) in channels.iter_mut().zip(frame) {
            c.push(*v);
        }
    }
    Audio::new(spec.sample_rate, channels)
}

pub fn write(path: &Path, audio: &Audio, format: SampleFormat) -> Result<()> {
    let wav_err = |source| Error::Wav { path: path.to_path_buf(), source };
    let (bits, sample_format) = match format {
        SampleFormat::Float32 => (32, HoundFormat::Float),
        SampleFormat::Pcm16 => (16, HoundFormat::Int),
    };
    let spec = WavSpec {
        channels: audio.num_channels() as u16,
        sample_rate: audio.sample_rate,
        bits_per_sample: bits,
        sample_format,
    };
    if format == SampleFormat::Pcm16 {
        if let Some(v) = audio.channels.iter().flatten().find(|v| !(v.abs() <= 1.0)) {
            return Err(usage!("{}: sample {v} exceeds PCM16 full scale; write float32 instead", path.display()));
        }
    }
    let mut writer = WavWriter::create(path, spec).map_err(wav_err)?;
    for n in 0..audio.len() {
        for c in &audio.channels {
            match format {
                SampleFormat::Float32 => writer.write_sample(c[n] as f32),
                SampleFormat::Pcm16 => {
                    writer.write_sample((c[n] * PCM16_SCALE).round().clamp(-32768.0, 32767.0) as i16)
                }
            }
            .map_err(wav_err)?;
        }
    }
    writer.finalize().map_err(wav_err)
}
