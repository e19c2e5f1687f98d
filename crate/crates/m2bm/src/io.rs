//! JSON files and path handling shared by the commands.

use std::fs;
use std::path::{Path, PathBuf};

use m2bm_core::spectral::{stft, MultichannelSpectrogram, Spectrogram, StftConfig, StftEngine};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{usage, Error, Result};
use crate::wav::{self, Audio, SampleFormat};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_path_buf(), source })
}

/// Pretty-printed with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|source| Error::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    fs::write(path, text).map_err(Error::io(path))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))
}

/// Directory that relative paths inside `config` are resolved against.
pub fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage!("missing {what}: {}", path.display()))
    }
}

/// Reads a WAV and checks its rate against the STFT configuration.
pub fn read_audio(path: &Path, cfg: &StftConfig) -> Result<Audio> {
    let audio = wav::read(path)?;
    if audio.sample_rate != cfg.sample_rate {
        return Err(usage!(
            "{}: sample rate {} Hz, expected {} Hz",
            path.display(),
            audio.sample_rate,
            cfg.sample_rate
        ));
    }
    if audio.is_empty() {
        return Err(usage!("{}: no samples", path.display()));
    }
    Ok(audio)
}

pub fn analyze(audio: &Audio, cfg: &StftConfig) -> Result<MultichannelSpectrogram> {
    Ok(stft(&audio.channels, cfg)?)
}

/// Picks the reference channel of an image file; mono files are taken as is.
pub fn reference_channel(audio: Audio, ref_mic: usize, path: &Path) -> Result<Vec<f64>> {
    let n = audio.num_channels();
    let mut channels = audio.channels;
    if n == 1 {
        Ok(channels.remove(0))
    } else if ref_mic < n {
        Ok(channels.swap_remove(ref_mic))
    } else {
        Err(usage!("{}: has {n} channels, no reference channel {ref_mic}", path.display()))
    }
}

pub fn write_spectrogram(
    path: &Path,
    spec: &Spectrogram,
    cfg: &StftConfig,
    len: usize,
    format: SampleFormat,
) -> Result<()> {
    let samples = StftEngine::new(*cfg)?.synthesize(spec, len)?;
    wav::write(path, &Audio::mono(cfg.sample_rate, samples), format)
}

pub fn display(path: &Path) -> String {
    path.display().to_string()
}
