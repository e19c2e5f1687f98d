//! JSON configuration files. Relative paths inside a config resolve against
//! the directory holding it.

use std::path::{Path, PathBuf};

use m2bm_core::bench::BenchRunConfig;
use m2bm_core::fcp::FcpConfig;
use m2bm_core::losses::{FilterMode, LossConfig, LossMode};
use m2bm_core::model::InitScheme;
use m2bm_core::scene::{DrySource, SceneSpec};
use m2bm_core::spectral::StftConfig;
use m2bm_core::trainer::{ModelConfig, SampleTag, TrainConfig, TrainingSample};
use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::io;
use crate::wav::Audio;

/// Scene config for `simulate`: a scene spec whose `wav` sources are
/// loaded relative to the config file.
pub fn load_scene(path: &Path) -> Result<(SceneSpec, Vec<PathBuf>)> {
    let mut spec: SceneSpec = io::read_json(path)?;
    let base = io::base_dir(path);
    let stft = spec.stft;
    let mut sources = Vec::new();
    let mut failure = None;
    spec.resolve_sources(|p| {
        let full = io::resolve(&base, Path::new(p));
        sources.push(full.clone());
        let loaded = io::require_file(&full, "dry source").and_then(|_| io::read_audio(&full, &stft)).and_then(|a| {
            if a.num_channels() == 1 {
                Ok(a.channels.into_iter().next().unwrap_or_default())
            } else {
                Err(usage!("{}: dry sources must be mono, got {} channels", full.display(), a.num_channels()))
            }
        });
        loaded.map_err(|e| {
            let msg = e.to_string();
            failure = Some(e);
            m2bm_core::Error::InvalidInput(msg)
        })
    })
    .map_err(|e| failure.take().unwrap_or(e.into()))?;
    Ok((spec, sources))
}

/// One scene on disk: a multichannel mixture plus optional image and
/// beamformed-mixture files. Image files may be multichannel (the reference
/// channel is used) or mono.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub mixture: PathBuf,
    pub tag: SampleTag,
    #[serde(default)]
    pub target: Option<PathBuf>,
    #[serde(default)]
    pub noise: Option<PathBuf>,
    #[serde(default)]
    pub beamformed: Option<PathBuf>,
}

impl DatasetEntry {
    fn paths(&self) -> impl Iterator<Item = (&'static str, &PathBuf)> {
        [
            ("mixture", Some(&self.mixture)),
            ("target", self.target.as_ref()),
            ("noise", self.noise.as_ref()),
            ("beamformed", self.beamformed.as_ref()),
        ]
        .into_iter()
        .filter_map(|(k, p)| p.map(|p| (k, p)))
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub stft: StftConfig,
    pub ref_mic: usize,
    pub dataset: Vec<DatasetEntry>,
    /// Scored after training; never trained on.
    #[serde(default)]
    pub heldout: Vec<DatasetEntry>,
    /// Fail with a numerical error unless the final training loss is at most
    /// the initial one.
    #[serde(default = "default_true")]
    pub require_decrease: bool,
}

/// Returns an error naming the first missing file, in config order.
pub fn check_paths(base: &Path, group: &str, entries: &[DatasetEntry]) -> Result<()> {
    for (i, e) in entries.iter().enumerate() {
        for (key, p) in e.paths() {
            let full = io::resolve(base, p);
            if !full.is_file() {
                return Err(usage!("missing {group}[{i}].{key}: {}", full.display()));
            }
        }
    }
    Ok(())
}

/// Loads every entry of a training config, checking that each sample has
/// what the training mode needs.
pub fn load_dataset(base: &Path, file: &TrainFile) -> Result<(Vec<TrainingSample>, Vec<TrainingSample>)> {
    check_paths(base, "dataset", &file.dataset)?;
    check_paths(base, "heldout", &file.heldout)?;
    let mode = file.train.mode;
    for (i, e) in file.dataset.iter().enumerate() {
        match mode.loss_mode_for(e.tag) {
            Some(LossMode::M2bm) if e.beamformed.is_none() => {
                return Err(usage!("dataset[{i}] has no beamformed file but mode {} needs one", mode.name()))
            }
            Some(LossMode::Supervised) if e.target.is_none() || e.noise.is_none() => {
                return Err(usage!("dataset[{i}] needs target and noise files for supervised training"))
            }
            _ => {}
        }
    }
    if !file.dataset.iter().any(|e| mode.loss_mode_for(e.tag).is_some()) {
        return Err(usage!("no dataset entry is usable in mode {}", mode.name()));
    }
    let load = |e: &DatasetEntry| load_sample(base, e, &file.stft, file.ref_mic);
    let train = file.dataset.iter().map(load).collect::<Result<Vec<_>>>()?;
    let heldout = file.heldout.iter().map(load).collect::<Result<Vec<_>>>()?;
    if let Some(i) = heldout.iter().position(|s| s.target.is_none()) {
        return Err(usage!("heldout[{i}] needs a target file for scoring"));
    }
    Ok((train, heldout))
}

pub fn load_sample(base: &Path, entry: &DatasetEntry, stft: &StftConfig, ref_mic: usize) -> Result<TrainingSample> {
    let mix_path = io::resolve(base, &entry.mixture);
    let mix = io::read_audio(&mix_path, stft)?;
    if ref_mic >= mix.num_channels() {
        return Err(usage!(
            "{}: {} channels, reference mic {ref_mic} out of range",
            mix_path.display(),
            mix.num_channels()
        ));
    }
    let len = mix.len();
    let mixture = io::analyze(&mix, stft)?;
    let image = |p: &Option<PathBuf>| -> Result<Option<_>> {
        let Some(p) = p else { return Ok(None) };
        let full = io::resolve(base, p);
        let audio = io::read_audio(&full, stft)?;
        if audio.len() != len {
            return Err(usage!("{}: {} samples, mixture has {len}", full.display(), audio.len()));
        }
        let ch = io::reference_channel(audio, ref_mic, &full)?;
        Ok(Some(io::analyze(&Audio::mono(stft.sample_rate, ch), stft)?.channel(0).clone()))
    };
    Ok(TrainingSample {
        mixture,
        ref_mic,
        tag: entry.tag,
        target: image(&entry.target)?,
        noise: image(&entry.noise)?,
        beamformed: image(&entry.beamformed)?,
        num_samples: len,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// Exact per-frequency filters across frames.
    #[default]
    Narrowband,
    /// Time-domain FIR convolution.
    Time,
}

fn default_taps() -> usize {
    2
}

fn default_gradcheck_model() -> ModelConfig {
    ModelConfig { input_channels: 2, init: InitScheme::Random { std: 0.1 }, ..ModelConfig::default() }
}

fn default_gradcheck_fcp() -> FcpConfig {
    FcpConfig::new(3, 1)
}

fn default_modes() -> Vec<LossMode> {
    vec![LossMode::Supervised, LossMode::M2m, LossMode::M2bm]
}

fn default_fd_step() -> f64 {
    1e-7
}

fn default_sweep() -> Vec<f64> {
    vec![1e-3, 1e-4, 1e-5, 1e-6, 1e-7]
}

fn default_tolerance() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckFile {
    pub scene: SceneSpec,
    #[serde(default)]
    pub generator: Generator,
    #[serde(default = "default_taps")]
    pub taps: usize,
    #[serde(default = "default_gradcheck_model")]
    pub model: ModelConfig,
    #[serde(default = "default_gradcheck_fcp")]
    pub fcp: FcpConfig,
    #[serde(default)]
    pub filter_mode: FilterMode,
    #[serde(default = "default_true")]
    pub through_filters: bool,
    #[serde(default = "default_modes")]
    pub modes: Vec<LossMode>,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    /// Extra steps whose errors are reported but not checked.
    #[serde(default = "default_sweep")]
    pub sweep: Vec<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub seed: u64,
}

impl GradcheckFile {
    pub fn loss_config(&self) -> LossConfig {
        LossConfig { fcp: self.fcp, filter_mode: self.filter_mode, through_filters: self.through_filters }
    }

    pub fn validate(&self) -> Result<()> {
        let wav = |s: &DrySource| matches!(s, DrySource::Wav { .. });
        if wav(&self.scene.target_source) || self.scene.noise_sources.iter().any(wav) {
            return Err(usage!("gradcheck scenes use generated sources only"));
        }
        if self.modes.is_empty() {
            return Err(usage!("no loss modes to check"));
        }
        if !(self.tolerance > 0.0) {
            return Err(usage!("tolerance must be positive"));
        }
        Ok(())
    }
}

/// A scored scene: mixture and the reference-mic images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalScene {
    pub mixture: PathBuf,
    pub target: PathBuf,
    pub noise: PathBuf,
}

impl From<&EvalScene> for DatasetEntry {
    fn from(s: &EvalScene) -> Self {
        DatasetEntry {
            mixture: s.mixture.clone(),
            tag: SampleTag::RealLike,
            target: Some(s.target.clone()),
            noise: Some(s.noise.clone()),
            beamformed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvalFile {
    /// Score a checkpoint on scenes from disk.
    Checkpoint {
        checkpoint: PathBuf,
        scenes: Vec<EvalScene>,
        /// Used for the reported mixture-constraint loss.
        #[serde(default)]
        fcp: FcpConfig,
        #[serde(default)]
        filter_mode: FilterMode,
    },
    /// Train and score every mode on the built-in synthetic benchmark.
    Benchmark {
        #[serde(default)]
        benchmark: Box<BenchRunConfig>,
    },
}
