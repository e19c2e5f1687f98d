//! Fixed synthetic benchmark for comparing training modes.
//!
//! The target talker sits at one fixed position in front of the array in
//! every scene while noise sources move around. Simulated scenes use an
//! idealized direct-path response and white noise; real-like scenes add a
//! reverberant tail and colored noise, and the held-out scenes are drawn
//! from the real-like distribution.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fcp::FcpConfig;
use crate::metrics;
use crate::model::{InitScheme, ToyModel};
use crate::scene::{random_array_firs, simulate, DrySource, SceneBundle, SceneSpec};
use crate::spectral::{Spectrogram, StftConfig, StftEngine};
use crate::trainer::{
    evaluate, model_bf_target, oracle_bf_target, train, train_from, ModelConfig, SampleTag, TrainConfig, TrainMode,
    TrainingSample,
};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BenchmarkConfig {
    pub num_mics: usize,
    pub num_samples: usize,
    pub simulated: usize,
    pub real_like: usize,
    pub heldout: usize,
    pub snr_db: f64,
    pub ref_mic: usize,
    pub seed: u64,
    pub stft: StftConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            num_mics: 4,
            num_samples: 4000,
            simulated: 3,
            real_like: 3,
            heldout: 2,
            snr_db: 0.0,
            ref_mic: 0,
            seed: 2024,
            stft: StftConfig::with_sizes(64, 16),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub simulated: Vec<SceneBundle>,
    pub real_like: Vec<SceneBundle>,
    pub heldout: Vec<SceneBundle>,
}

const FIR_TAPS: usize = 12;
const MAX_DELAY: usize = 3;

fn direct_path(firs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    firs.iter()
        .map(|fir| {
            let peak = fir.iter().position(|v| *v != 0.0).unwrap_or(0);
            let mut d = vec![0.0; peak + 1];
            d[peak] = fir[peak];
            d
        })
        .collect()
}

pub fn build_benchmark(cfg: &BenchmarkConfig) -> Result<Benchmark> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let target_firs = random_array_firs(rng.random(), cfg.num_mics, FIR_TAPS, MAX_DELAY);
    let mut scene = |simulated: bool| -> Result<SceneBundle> {
        let f0 = 110.0 + 140.0 * rng.random::<f64>();
        let noise_firs = random_array_firs(rng.random(), cfg.num_mics, FIR_TAPS, MAX_DELAY);
        let spec = SceneSpec {
            num_mics: cfg.num_mics,
            num_samples: cfg.num_samples,
            target_firs: if simulated { direct_path(&target_firs) } else { target_firs.clone() },
            noise_firs: vec![if simulated { direct_path(&noise_firs) } else { noise_firs }],
            target_source: DrySource::ToneComplex { f0, harmonics: 10, syllable_rate: 4.0 },
            noise_sources: vec![DrySource::Noise { pole: if simulated { 0.0 } else { 0.6 } }],
            snr_db: Some(cfg.snr_db),
            ref_mic: cfg.ref_mic,
            seed: rng.random(),
            stft: cfg.stft,
        };
        simulate(&spec)
    };
    let simulated = (0..cfg.simulated).map(|_| scene(true)).collect::<Result<Vec<_>>>()?;
    let real_like = (0..cfg.real_like).map(|_| scene(false)).collect::<Result<Vec<_>>>()?;
    let heldout = (0..cfg.heldout).map(|_| scene(false)).collect::<Result<Vec<_>>>()?;
    Ok(Benchmark { simulated, real_like, heldout })
}

/// Where the beamformed training targets come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BfSource {
    /// A monaural model trained with supervision on the simulated scenes
    /// enhances every microphone of each real-like mixture.
    #[default]
    SupervisedModel,
    /// The true images.
    Oracle,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BenchRunConfig {
    pub bench: BenchmarkConfig,
    pub modes: Vec<TrainMode>,
    pub seeds: Vec<u64>,
    /// Template for every run; mode, seed and batch are set per run, the
    /// batch covering every usable sample.
    pub train: TrainConfig,
    pub bf_source: BfSource,
    /// Configuration of the monaural model behind [`BfSource::SupervisedModel`].
    pub bf_model: TrainConfig,
}

impl Default for BenchRunConfig {
    fn default() -> Self {
        let model = ModelConfig {
            input_channels: 1,
            bands: 33,
            context_past: 1,
            context_future: 0,
            init: InitScheme::Random { std: 0.05 },
        };
        let train = TrainConfig { lr: 0.05, steps: 300, fcp: FcpConfig::new(4, 1), model, ..TrainConfig::default() };
        Self {
            bench: BenchmarkConfig::default(),
            modes: vec![
                TrainMode::Supervised,
                TrainMode::M2m,
                TrainMode::M2bm,
                TrainMode::SuperM2m,
                TrainMode::SuperM2bm,
            ],
            seeds: vec![0, 1, 2],
            train,
            bf_source: BfSource::SupervisedModel,
            bf_model: TrainConfig { mode: TrainMode::Supervised, seed: 99, ..train },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunResult {
    pub mode: TrainMode,
    pub seed: u64,
    pub init_si_sdr_db: f64,
    pub trained_si_sdr_db: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BenchReport {
    /// Held-out SI-SDR of the unprocessed reference mixtures.
    pub input_si_sdr_db: f64,
    /// SI-SDR of each real-like scene's beamformed target.
    pub bf_si_sdr_db: Vec<f64>,
    pub runs: Vec<RunResult>,
}

impl BenchReport {
    /// Mean trained held-out SI-SDR of `mode` over seeds.
    pub fn mean_si_sdr(&self, mode: TrainMode) -> Option<f64> {
        let v: Vec<f64> = self.runs.iter().filter(|r| r.mode == mode).map(|r| r.trained_si_sdr_db).collect();
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    }
}

fn reference_si_sdr(bundle: &SceneBundle, estimate: &Spectrogram) -> Result<f64> {
    let engine = StftEngine::new(*bundle.config())?;
    let reference = engine.synthesize(bundle.target.channel(bundle.ref_mic), bundle.num_samples)?;
    let est = engine.synthesize(estimate, bundle.num_samples)?;
    metrics::si_sdr(&est, &reference)
}

/// Train every configured mode under every seed and score on the held-out
/// scenes.
pub fn run_benchmark(cfg: &BenchRunConfig) -> Result<BenchReport> {
    let bench = build_benchmark(&cfg.bench)?;
    let subset: Vec<usize> = (0..cfg.bench.num_mics).collect();
    let simulated: Vec<TrainingSample> =
        bench.simulated.iter().map(|b| TrainingSample::from_bundle(b, SampleTag::Simulated)).collect();

    let mut report = BenchReport::default();
    let mut real = Vec::with_capacity(bench.real_like.len());
    let bf_model = match cfg.bf_source {
        BfSource::SupervisedModel => {
            let mut mono = cfg.bf_model;
            mono.mode = TrainMode::Supervised;
            mono.model.input_channels = 1;
            mono.batch = simulated.len().max(1);
            Some(train(&mono, &simulated)?.0)
        }
        BfSource::Oracle => None,
    };
    for b in &bench.real_like {
        let sample = TrainingSample::from_bundle(b, SampleTag::RealLike);
        let bf = match &bf_model {
            Some(m) => model_bf_target(&sample, m, &subset)?,
            None => oracle_bf_target(b, &subset)?,
        };
        report.bf_si_sdr_db.push(reference_si_sdr(b, &bf)?);
        real.push(sample.with_beamformed(bf));
    }
    let heldout: Vec<TrainingSample> =
        bench.heldout.iter().map(|b| TrainingSample::from_bundle(b, SampleTag::RealLike)).collect();
    let mut data = simulated;
    data.extend(real);

    for &mode in &cfg.modes {
        for &seed in &cfg.seeds {
            let mut run = cfg.train;
            run.mode = mode;
            run.seed = seed;
            run.batch = data.iter().filter(|s| mode.loss_mode_for(s.tag).is_some()).count().max(1);
            let loss_cfg = run.loss_config();
            let init = ToyModel::new(run.model.shape(data[0].mixture.bins(), cfg.bench.ref_mic), run.model.init, seed)?;
            let before = evaluate(&init, &heldout, &loss_cfg)?;
            let (model, train_report) = train_from(&run, init, &data)?;
            let after = evaluate(&model, &heldout, &loss_cfg)?;
            report.input_si_sdr_db = before.input_si_sdr_db;
            report.runs.push(RunResult {
                mode,
                seed,
                init_si_sdr_db: before.si_sdr_db,
                trained_si_sdr_db: after.si_sdr_db,
                initial_loss: train_report.initial_loss.unwrap_or(f64::NAN),
                final_loss: train_report.final_loss.unwrap_or(f64::NAN),
            });
        }
    }
    Ok(report)
}
