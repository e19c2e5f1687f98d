//! One function per subcommand. Each writes its outputs plus a manifest
//! into an output directory and returns the manifest path.

use std::path::{Path, PathBuf};

use m2bm_core::beamform::{derive_bf_mixture, Enhancer, OracleEnhancer};
use m2bm_core::bench::{run_benchmark, BenchReport};
use m2bm_core::losses::LossConfig;
use m2bm_core::model::ToyModel;
use m2bm_core::scene::{simulate as simulate_scene, synth_narrowband_scene};
use m2bm_core::spectral::{MultichannelSpectrogram, StftConfig};
use m2bm_core::trainer::{
    audit_gradient, evaluate, oracle_bf_target, train as train_model, EvalReport, GradAudit, SampleTag, TrainMode,
    TrainingSample,
};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{self, Checkpoint, Sidecar};
use crate::config::{self, DatasetEntry, EvalFile, Generator, GradcheckFile, TrainFile};
use crate::error::{usage, Error, Result};
use crate::io;
use crate::manifest::ManifestBuilder;
use crate::wav::{self, Audio, SampleFormat};

pub fn simulate(config: &Path, out: &Path, format: SampleFormat) -> Result<PathBuf> {
    let mut manifest = ManifestBuilder::new("simulate");
    manifest.config(config).input(config);
    let (spec, sources) = config::load_scene(config)?;
    manifest.seed(spec.seed);
    for s in &sources {
        manifest.input(s);
    }
    let bundle = simulate_scene(&spec)?;
    io::ensure_dir(out)?;
    let rate = spec.stft.sample_rate;
    let images = [
        ("mixture.wav", &bundle.mixture_samples),
        ("target.wav", &bundle.target_samples),
        ("noise.wav", &bundle.noise_samples),
    ];
    for (name, samples) in images {
        let samples = samples.clone().expect("time-domain scenes keep their samples");
        let path = out.join(name);
        wav::write(&path, &Audio::new(rate, samples)?, format)?;
        manifest.output(&path);
    }
    manifest.finish(out)
}

/// Where the per-channel target and noise estimates come from.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimateSource {
    /// `target.wav` and `noise.wav` next to the mixture, as written by
    /// `simulate`.
    Oracle,
    /// `target.wav` and `noise.wav` in a directory, one channel per mic.
    Directory(PathBuf),
    /// A trained model run on every selected microphone.
    Checkpoint(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformArgs {
    pub mixture: PathBuf,
    pub estimates: EstimateSource,
    pub ref_mic: usize,
    pub mics: Option<Vec<usize>>,
    pub win: Option<usize>,
    pub hop: Option<usize>,
    pub loading: f64,
    pub format: SampleFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamformReport {
    pub mic_subset: Vec<usize>,
    pub ref_mic: usize,
    pub loading: f64,
    pub bins: usize,
    pub fallback_count: usize,
    pub fallback_bins: Vec<usize>,
    pub degenerate_bins: Vec<usize>,
    /// `max_f |w(f)ᴴc(f) − 1|`.
    pub max_residual: f64,
    /// `|w(f)ᴴc(f) − 1|` per frequency bin.
    pub residuals: Vec<f64>,
}

fn stft_from_flags(win: Option<usize>, hop: Option<usize>) -> Result<StftConfig> {
    let mut cfg = StftConfig::default();
    match (win, hop) {
        (None, None) => {}
        (Some(w), Some(h)) => {
            cfg.win_len = w;
            cfg.hop = h;
            cfg.fft_size = w;
        }
        _ => return Err(usage!("--win and --hop must be given together")),
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_images(dir: &Path, cfg: &StftConfig, channels: usize, len: usize) -> Result<[MultichannelSpectrogram; 2]> {
    let load = |name: &str| -> Result<MultichannelSpectrogram> {
        let path = dir.join(name);
        io::require_file(&path, "estimate")?;
        let audio = io::read_audio(&path, cfg)?;
        if audio.num_channels() != channels || audio.len() != len {
            return Err(usage!(
                "{}: {} channels x {} samples, mixture is {channels} x {len}",
                path.display(),
                audio.num_channels(),
                audio.len()
            ));
        }
        io::analyze(&audio, cfg)
    };
    Ok([load("target.wav")?, load("noise.wav")?])
}

pub fn beamform(args: &BeamformArgs, out: &Path) -> Result<PathBuf> {
    let mut manifest = ManifestBuilder::new("beamform");
    manifest.input(&args.mixture);
    io::require_file(&args.mixture, "mixture")?;
    let ckpt = match &args.estimates {
        EstimateSource::Checkpoint(p) => {
            manifest.input(p);
            Some(checkpoint::load(p)?)
        }
        _ => None,
    };
    let cfg = match &ckpt {
        Some(c) => {
            if args.win.is_some_and(|w| w != c.sidecar.stft.win_len)
                || args.hop.is_some_and(|h| h != c.sidecar.stft.hop)
            {
                return Err(usage!("--win/--hop disagree with the checkpoint's STFT"));
            }
            c.sidecar.stft
        }
        None => stft_from_flags(args.win, args.hop)?,
    };
    let audio = io::read_audio(&args.mixture, &cfg)?;
    let (channels, len) = (audio.num_channels(), audio.len());
    let mixture = io::analyze(&audio, &cfg)?;
    let subset = args.mics.clone().unwrap_or_else(|| (0..channels).collect());

    let images;
    let enhancer: &dyn Enhancer = match (&args.estimates, &ckpt) {
        (_, Some(c)) => {
            if channels != c.sidecar.mixture_channels {
                return Err(usage!(
                    "mixture has {channels} channels, checkpoint expects {}",
                    c.sidecar.mixture_channels
                ));
            }
            &c.model
        }
        (EstimateSource::Directory(dir), None) => {
            images = read_images(dir, &cfg, channels, len)?;
            manifest.input(&dir.join("target.wav")).input(&dir.join("noise.wav"));
            &OracleEnhancer { target: &images[0], noise: &images[1] }
        }
        (_, None) => {
            let dir = io::base_dir(&args.mixture);
            images = read_images(&dir, &cfg, channels, len)?;
            manifest.input(&dir.join("target.wav")).input(&dir.join("noise.wav"));
            &OracleEnhancer { target: &images[0], noise: &images[1] }
        }
    };
    let bf = derive_bf_mixture(&mixture, enhancer, &subset, args.ref_mic, args.loading)?;

    io::ensure_dir(out)?;
    let wav_path = out.join("beamformed.wav");
    io::write_spectrogram(&wav_path, &bf.beamformed, &cfg, len, args.format)?;
    let report = BeamformReport {
        mic_subset: bf.mic_subset.clone(),
        ref_mic: args.ref_mic,
        loading: args.loading,
        bins: cfg.bins(),
        fallback_count: bf.fallback_bins.len(),
        fallback_bins: bf.fallback_bins.clone(),
        degenerate_bins: bf.degenerate_bins.clone(),
        max_residual: bf.weights.distortionless_residual(),
        residuals: bf.weights.residuals(),
    };
    let report_path = out.join("beamform.json");
    io::write_json(&report_path, &report)?;
    manifest.output(&wav_path).output(&report_path);
    manifest.finish(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub mode: TrainMode,
    pub steps: usize,
    pub num_params: usize,
    /// Metrics on the training samples that carry ground truth, plus the
    /// loss curve and dispatch counts.
    pub train: EvalReport,
    pub heldout: Option<EvalReport>,
}

pub fn train(config: &Path, out: &Path) -> Result<PathBuf> {
    let mut manifest = ManifestBuilder::new("train");
    manifest.config(config).input(config);
    let file: TrainFile = io::read_json(config)?;
    manifest.seed(file.train.seed);
    let base = io::base_dir(config);
    let (samples, heldout) = config::load_dataset(&base, &file)?;
    for e in file.dataset.iter().chain(&file.heldout) {
        for p in [Some(&e.mixture), e.target.as_ref(), e.noise.as_ref(), e.beamformed.as_ref()].into_iter().flatten() {
            manifest.input(&io::resolve(&base, p));
        }
    }
    let (model, report) = train_model(&file.train, &samples)?;
    let heldout_report =
        if heldout.is_empty() { None } else { Some(evaluate(&model, &heldout, &file.train.loss_config())?) };
    let (initial, last) = (report.initial_loss, report.final_loss);

    io::ensure_dir(out)?;
    let sidecar = Sidecar {
        format: checkpoint::FORMAT.into(),
        shape: *model.shape(),
        stft: file.stft,
        mixture_channels: samples[0].mixture.num_channels(),
        mode: file.train.mode,
        seed: file.train.seed,
        step: file.train.steps,
        num_params: model.params().len(),
        params: "model.bin".into(),
    };
    let num_params = model.params().len();
    for p in checkpoint::save(&out.join("model.bin"), &Checkpoint { model, sidecar })? {
        manifest.output(&p);
    }
    let report_path = out.join("report.json");
    io::write_json(
        &report_path,
        &TrainReport {
            mode: file.train.mode,
            steps: file.train.steps,
            num_params,
            train: report,
            heldout: heldout_report,
        },
    )?;
    manifest.output(&report_path);
    let manifest_path = manifest.finish(out)?;
    if let (true, Some(a), Some(b)) = (file.require_decrease, initial, last) {
        if !(b <= a) {
            return Err(Error::Check(format!("training loss rose from {a} to {b}")));
        }
    }
    Ok(manifest_path)
}

pub fn enhance(
    ckpt_path: &Path,
    mixture_path: &Path,
    out: &Path,
    ref_mic: Option<usize>,
    format: SampleFormat,
) -> Result<PathBuf> {
    let mut manifest = ManifestBuilder::new("enhance");
    manifest.input(ckpt_path).input(mixture_path);
    let ckpt = checkpoint::load(ckpt_path)?;
    manifest.seed(ckpt.sidecar.seed);
    let cfg = ckpt.sidecar.stft;
    io::require_file(mixture_path, "mixture")?;
    let audio = io::read_audio(mixture_path, &cfg)?;
    if audio.num_channels() != ckpt.sidecar.mixture_channels {
        return Err(usage!(
            "{}: {} channels, checkpoint was trained on {}",
            mixture_path.display(),
            audio.num_channels(),
            ckpt.sidecar.mixture_channels
        ));
    }
    let q = ref_mic.unwrap_or(ckpt.sidecar.shape.ref_mic);
    if q >= audio.num_channels() {
        return Err(usage!("reference mic {q} out of range for {} channels", audio.num_channels()));
    }
    let est = ckpt.model.forward_at(&io::analyze(&audio, &cfg)?, q)?;
    io::ensure_dir(out)?;
    let path = out.join("enhanced.wav");
    io::write_spectrogram(&path, &est.target, &cfg, audio.len(), format)?;
    manifest.output(&path);
    manifest.finish(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub fd_step: f64,
    pub rel_error: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub num_params: usize,
    pub tolerance: f64,
    pub fd_step: f64,
    pub results: Vec<GradAudit>,
    /// Errors at the other steps, in the order of `results`.
    pub sweep: Vec<SweepPoint>,
    pub passed: bool,
}

pub fn gradcheck_sample(file: &GradcheckFile) -> Result<TrainingSample> {
    let bundle = match file.generator {
        Generator::Narrowband => synth_narrowband_scene(&file.scene, file.taps)?.bundle,
        Generator::Time => simulate_scene(&file.scene)?,
    };
    let subset: Vec<usize> = (0..bundle.num_mics()).collect();
    let bf = oracle_bf_target(&bundle, &subset)?;
    Ok(TrainingSample::from_bundle(&bundle, SampleTag::RealLike).with_beamformed(bf))
}

pub fn run_gradcheck(file: &GradcheckFile) -> Result<GradcheckReport> {
    file.validate()?;
    let sample = gradcheck_sample(file)?;
    let shape = file.model.shape(sample.mixture.bins(), sample.ref_mic);
    let model = ToyModel::new(shape, file.model.init, file.seed)?;
    let loss_cfg: LossConfig = file.loss_config();
    let audit = |step: f64| {
        file.modes
            .iter()
            .map(|&m| audit_gradient(&model, &sample, m, &loss_cfg, step))
            .collect::<m2bm_core::Result<Vec<_>>>()
    };
    let results = audit(file.fd_step)?;
    let mut sweep = Vec::with_capacity(file.sweep.len());
    for &step in &file.sweep {
        sweep.push(SweepPoint { fd_step: step, rel_error: audit(step)?.iter().map(|a| a.rel_error).collect() });
    }
    let passed = results.iter().all(|a| a.rel_error <= file.tolerance);
    Ok(GradcheckReport {
        num_params: model.params().len(),
        tolerance: file.tolerance,
        fd_step: file.fd_step,
        results,
        sweep,
        passed,
    })
}

pub fn gradcheck(config: &Path, out: &Path) -> Result<PathBuf> {
    let mut manifest = ManifestBuilder::new("gradcheck");
    manifest.config(config).input(config);
    let file: GradcheckFile = io::read_json(config)?;
    manifest.seed(file.seed);
    let report = run_gradcheck(&file)?;
    io::ensure_dir(out)?;
    let path = out.join("gradcheck.json");
    io::write_json(&path, &report)?;
    manifest.output(&path);
    let manifest_path = manifest.finish(out)?;
    if let Some(worst) = report.results.iter().find(|a| !(a.rel_error <= report.tolerance)) {
        return Err(Error::Check(format!(
            "{:?} gradient relative error {:e} exceeds {:e}",
            worst.mode, worst.rel_error, report.tolerance
        )));
    }
    Ok(manifest_path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: TrainMode,
    pub mean_init_si_sdr_db: f64,
    pub mean_trained_si_sdr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub modes: Vec<ModeSummary>,
    /// Mean held-out SI-SDR of SuperM2BM minus SuperM2M, when both ran.
    pub super_m2bm_minus_super_m2m_db: Option<f64>,
    pub report: BenchReport,
}

pub fn summarize(report: BenchReport) -> BenchSummary {
    let mut modes: Vec<TrainMode> = Vec::new();
    for r in &report.runs {
        if !modes.contains(&r.mode) {
            modes.push(r.mode);
        }
    }
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let modes = modes
        .into_iter()
        .map(|m| {
            let runs: Vec<_> = report.runs.iter().filter(|r| r.mode == m).collect();
            ModeSummary {
                mode: m,
                mean_init_si_sdr_db: mean(runs.iter().map(|r| r.init_si_sdr_db).collect()),
                mean_trained_si_sdr_db: mean(runs.iter().map(|r| r.trained_si_sdr_db).collect()),
            }
        })
        .collect();
    let delta = match (report.mean_si_sdr(TrainMode::SuperM2bm), report.mean_si_sdr(TrainMode::SuperM2m)) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    };
    BenchSummary { modes, super_m2bm_minus_super_m2m_db: delta, report }
}

pub fn eval(config: &Path, out: &Path) -> Result<PathBuf> {
    let mut manifest = ManifestBuilder::new("eval");
    manifest.config(config).input(config);
    let file: EvalFile = io::read_json(config)?;
    let base = io::base_dir(config);
    let path = out.join("eval.json");
    match file {
        EvalFile::Checkpoint { checkpoint: ckpt_path, scenes, fcp, filter_mode } => {
            let ckpt_path = io::resolve(&base, &ckpt_path);
            manifest.input(&ckpt_path);
            let ckpt = checkpoint::load(&ckpt_path)?;
            manifest.seed(ckpt.sidecar.seed);
            let entries: Vec<DatasetEntry> = scenes.iter().map(DatasetEntry::from).collect();
            config::check_paths(&base, "scenes", &entries)?;
            let samples = entries
                .iter()
                .map(|e| config::load_sample(&base, e, &ckpt.sidecar.stft, ckpt.sidecar.shape.ref_mic))
                .collect::<Result<Vec<_>>>()?;
            if let Some(s) = samples.iter().find(|s| s.mixture.num_channels() != ckpt.sidecar.mixture_channels) {
                return Err(usage!(
                    "scene has {} channels, checkpoint expects {}",
                    s.mixture.num_channels(),
                    ckpt.sidecar.mixture_channels
                ));
            }
            for e in &entries {
                for p in [&e.mixture, e.target.as_ref().expect("set"), e.noise.as_ref().expect("set")] {
                    manifest.input(&io::resolve(&base, p));
                }
            }
            let loss_cfg = LossConfig { fcp, filter_mode, ..LossConfig::from(fcp) };
            let report = evaluate(&ckpt.model, &samples, &loss_cfg)?;
            io::ensure_dir(out)?;
            io::write_json(&path, &report)?;
        }
        EvalFile::Benchmark { benchmark } => {
            manifest.seed(benchmark.bench.seed);
            let summary = summarize(run_benchmark(&benchmark)?);
            io::ensure_dir(out)?;
            io::write_json(&path, &summary)?;
        }
    }
    manifest.output(&path);
    manifest.finish(out)
}
