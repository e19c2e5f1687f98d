//! Training harness: mode dispatch over tagged samples, gradients (central
//! finite differences or the analytic path), plain gradient descent and
//! oracle evaluation.
//!
//! Samples tagged [`SampleTag::RealLike`] may carry ground truth, but it only
//! ever reaches the metrics, never the mixture-constraint losses.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::beamform::{derive_bf_mixture, Enhancer, OracleEnhancer, DEFAULT_MVDR_LOADING};
use crate::error::{bail, Error, Result};
use crate::fcp::FcpConfig;
use crate::losses::{
    supervised_loss, supervised_loss_grad, total_mc_loss, total_mc_loss_grad, FilterMode, LossBreakdown, LossConfig,
    LossMode,
};
use crate::math;
use crate::metrics;
use crate::model::{Estimates, InitScheme, ModelShape, ToyModel};
use crate::par;
use crate::scene::SceneBundle;
use crate::spectral::{MultichannelSpectrogram, Spectrogram, StftEngine};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TrainMode {
    Supervised,
    M2m,
    M2bm,
    /// Supervised on simulated samples, M2M on real-like ones.
    SuperM2m,
    /// Supervised on simulated samples, M2BM on real-like ones.
    SuperM2bm,
}

impl TrainMode {
    /// Loss applied to a sample with this tag, or `None` if the mode does
    /// not train on such samples.
    pub fn loss_mode_for(self, tag: SampleTag) -> Option<LossMode> {
        match (self, tag) {
            (TrainMode::Supervised, SampleTag::Simulated) => Some(LossMode::Supervised),
            (TrainMode::M2m, SampleTag::RealLike) => Some(LossMode::M2m),
            (TrainMode::M2bm, SampleTag::RealLike) => Some(LossMode::M2bm),
            (TrainMode::SuperM2m, SampleTag::Simulated) | (TrainMode::SuperM2bm, SampleTag::Simulated) => {
                Some(LossMode::Supervised)
            }
            (TrainMode::SuperM2m, SampleTag::RealLike) => Some(LossMode::M2m),
            (TrainMode::SuperM2bm, SampleTag::RealLike) => Some(LossMode::M2bm),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TrainMode::Supervised => "supervised",
            TrainMode::M2m => "m2m",
            TrainMode::M2bm => "m2bm",
            TrainMode::SuperM2m => "super_m2m",
            TrainMode::SuperM2bm => "super_m2bm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SampleTag {
    Simulated,
    RealLike,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GradMethod {
    FiniteDiff,
    #[default]
    Analytic,
}

/// Model architecture; the bin count and reference mic come from the data.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ModelConfig {
    pub input_channels: usize,
    pub bands: usize,
    pub context_past: usize,
    pub context_future: usize,
    pub init: InitScheme,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { input_channels: 1, bands: 4, context_past: 1, context_future: 0, init: InitScheme::Random { std: 0.1 } }
    }
}

impl ModelConfig {
    pub fn shape(&self, bins: usize, ref_mic: usize) -> ModelShape {
        ModelShape {
            input_channels: self.input_channels,
            ref_mic,
            bins,
            bands: self.bands,
            context_past: self.context_past,
            context_future: self.context_future,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub lr: f64,
    pub steps: usize,
    pub batch: usize,
    pub seed: u64,
    pub fcp: FcpConfig,
    pub filter_mode: FilterMode,
    pub through_filters: bool,
    pub grad: GradMethod,
    /// Central-difference step relative to `max(|θ_i|, 1)`.
    pub fd_step: f64,
    /// Simulated and real-like samples per cycle in the co-training modes.
    pub mix_ratio: [usize; 2],
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::Supervised,
            lr: 0.1,
            steps: 100,
            batch: 1,
            seed: 0,
            fcp: FcpConfig::default(),
            filter_mode: FilterMode::Joint,
            through_filters: true,
            grad: GradMethod::Analytic,
            fd_step: 1e-4,
            mix_ratio: [1, 1],
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn loss_config(&self) -> LossConfig {
        LossConfig { fcp: self.fcp, filter_mode: self.filter_mode, through_filters: self.through_filters }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            bail!(InvalidInput, "lr must be positive, got {}", self.lr);
        }
        if self.batch == 0 {
            bail!(InvalidInput, "batch must be at least 1");
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            bail!(InvalidInput, "fd_step must be positive, got {}", self.fd_step);
        }
        if matches!(self.mode, TrainMode::SuperM2m | TrainMode::SuperM2bm) && self.mix_ratio.contains(&0) {
            bail!(InvalidInput, "mix_ratio entries must be positive in co-training modes");
        }
        self.fcp.validate()
    }
}

/// One training or evaluation example at a fixed reference mic.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub mixture: MultichannelSpectrogram,
    pub ref_mic: usize,
    pub tag: SampleTag,
    /// Ground-truth images at the reference mic.
    pub target: Option<Spectrogram>,
    pub noise: Option<Spectrogram>,
    /// Precomputed beamformed mixture.
    pub beamformed: Option<Spectrogram>,
    /// Waveform length, for synthesis in evaluation.
    pub num_samples: usize,
}

impl TrainingSample {
    pub fn from_bundle(bundle: &SceneBundle, tag: SampleTag) -> Self {
        let q = bundle.ref_mic;
        Self {
            mixture: bundle.mixture.clone(),
            ref_mic: q,
            tag,
            target: Some(bundle.target.channel(q).clone()),
            noise: Some(bundle.noise.channel(q).clone()),
            beamformed: None,
            num_samples: bundle.num_samples,
        }
    }

    pub fn with_beamformed(mut self, beamformed: Spectrogram) -> Self {
        self.beamformed = Some(beamformed);
        self
    }
}

/// Beamformed mixture of a bundle using the true images as the enhancer.
pub fn oracle_bf_target(bundle: &SceneBundle, mic_subset: &[usize]) -> Result<Spectrogram> {
    let oracle = OracleEnhancer { target: &bundle.target, noise: &bundle.noise };
    Ok(derive_bf_mixture(&bundle.mixture, &oracle, mic_subset, bundle.ref_mic, DEFAULT_MVDR_LOADING)?.beamformed)
}

/// Beamformed mixture with a trained model as the enhancer.
pub fn model_bf_target(sample: &TrainingSample, enhancer: &dyn Enhancer, mic_subset: &[usize]) -> Result<Spectrogram> {
    Ok(derive_bf_mixture(&sample.mixture, enhancer, mic_subset, sample.ref_mic, DEFAULT_MVDR_LOADING)?.beamformed)
}

fn require<'a>(what: &str, value: &'a Option<Spectrogram>) -> Result<&'a Spectrogram> {
    match value {
        Some(s) => Ok(s),
        None => bail!(InvalidInput, "sample has no {what}"),
    }
}

/// Loss of `mode` on `sample` for the given estimates.
pub fn loss_for_mode(
    mode: LossMode,
    sample: &TrainingSample,
    est: &Estimates,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    let y_q = sample.mixture.channel(sample.ref_mic);
    match mode {
        LossMode::Supervised => supervised_loss(
            require("ground-truth target", &sample.target)?,
            require("ground-truth noise", &sample.noise)?,
            &est.target,
            &est.noise,
            y_q,
        ),
        LossMode::M2m => total_mc_loss(&sample.mixture, sample.ref_mic, None, &est.target, &est.noise, cfg),
        LossMode::M2bm => total_mc_loss(
            &sample.mixture,
            sample.ref_mic,
            Some(require("beamformed mixture", &sample.beamformed)?),
            &est.target,
            &est.noise,
            cfg,
        ),
    }
}

/// Loss of `mode` on `sample` at `model`, with its parameter gradient.
pub fn sample_loss_grad(
    model: &ToyModel,
    mode: LossMode,
    sample: &TrainingSample,
    cfg: &LossConfig,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let est = model.forward_at(&sample.mixture, sample.ref_mic)?;
    let y_q = sample.mixture.channel(sample.ref_mic);
    let lg = match mode {
        LossMode::Supervised => supervised_loss_grad(
            require("ground-truth target", &sample.target)?,
            require("ground-truth noise", &sample.noise)?,
            &est.target,
            &est.noise,
            y_q,
        )?,
        LossMode::M2m => total_mc_loss_grad(&sample.mixture, sample.ref_mic, None, &est.target, &est.noise, cfg)?,
        LossMode::M2bm => total_mc_loss_grad(
            &sample.mixture,
            sample.ref_mic,
            Some(require("beamformed mixture", &sample.beamformed)?),
            &est.target,
            &est.noise,
            cfg,
        )?,
    };
    let grad = model.backward_at(&sample.mixture, sample.ref_mic, &lg.grad_x, &lg.grad_v)?;
    Ok((lg.breakdown, grad))
}

pub fn sample_loss(model: &ToyModel, mode: LossMode, sample: &TrainingSample, cfg: &LossConfig) -> Result<f64> {
    let est = model.forward_at(&sample.mixture, sample.ref_mic)?;
    Ok(loss_for_mode(mode, sample, &est, cfg)?.total)
}

/// Central differences of `loss` at `params`, with step
/// `fd_step·max(|θ_i|, 1)` per coordinate.
pub fn finite_difference<F>(params: &[f64], fd_step: f64, loss: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync + Send,
{
    let parts = par::map_indices(params.len(), |i| -> Result<f64> {
        let mut p = params.to_vec();
        let h = fd_step * params[i].abs().max(1.0);
        p[i] = params[i] + h;
        let plus = loss(&p)?;
        p[i] = params[i] - h;
        let minus = loss(&p)?;
        if !plus.is_finite() || !minus.is_finite() {
            bail!(Numerical, "non-finite loss when perturbing parameter {i}");
        }
        Ok((plus - minus) / (2.0 * h))
    });
    parts.into_iter().collect()
}

/// Mean loss over `(sample, mode)` pairs and its gradient.
pub fn batch_gradient(
    model: &ToyModel,
    batch: &[(&TrainingSample, LossMode)],
    cfg: &LossConfig,
    method: GradMethod,
    fd_step: f64,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        bail!(InvalidInput, "empty batch");
    }
    let n = batch.len() as f64;
    let mean_loss = |m: &ToyModel| -> Result<f64> {
        let mut total = 0.0;
        for (s, mode) in batch {
            total += sample_loss(m, *mode, s, cfg)?;
        }
        Ok(total / n)
    };
    match method {
        GradMethod::Analytic => {
            let mut loss = 0.0;
            let mut grad = vec![0.0; model.params().len()];
            for (s, mode) in batch {
                let (b, g) = sample_loss_grad(model, *mode, s, cfg)?;
                loss += b.total;
                for (a, v) in grad.iter_mut().zip(&g) {
                    *a += v / n;
                }
            }
            Ok((loss / n, grad))
        }
        GradMethod::FiniteDiff => {
            let loss = mean_loss(model)?;
            let shape = *model.shape();
            let grad =
                finite_difference(model.params(), fd_step, |p| mean_loss(&ToyModel::from_params(shape, p.to_vec())?))?;
            Ok((loss, grad))
        }
    }
}

/// Relative error of the analytic gradient against central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GradAudit {
    pub mode: LossMode,
    pub fd_step: f64,
    pub loss: f64,
    pub analytic_norm: f64,
    pub fd_norm: f64,
    /// `‖g_analytic − g_fd‖ / max(‖g_fd‖, tiny)`.
    pub rel_error: f64,
}

pub fn audit_gradient(
    model: &ToyModel,
    sample: &TrainingSample,
    mode: LossMode,
    cfg: &LossConfig,
    fd_step: f64,
) -> Result<GradAudit> {
    let batch = [(sample, mode)];
    let (loss, analytic) = batch_gradient(model, &batch, cfg, GradMethod::Analytic, fd_step)?;
    let (_, fd) = batch_gradient(model, &batch, cfg, GradMethod::FiniteDiff, fd_step)?;
    let norm = |v: &[f64]| math::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    let diff: Vec<f64> = analytic.iter().zip(&fd).map(|(a, b)| a - b).collect();
    let fd_norm = norm(&fd);
    Ok(GradAudit {
        mode,
        fd_step,
        loss,
        analytic_norm: norm(&analytic),
        fd_norm,
        rel_error: norm(&diff) / fd_norm.max(f64::MIN_POSITIVE),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeCounts {
    pub supervised: usize,
    pub m2m: usize,
    pub m2bm: usize,
}

impl ModeCounts {
    fn record(&mut self, mode: LossMode) {
        match mode {
            LossMode::Supervised => self.supervised += 1,
            LossMode::M2m => self.m2m += 1,
            LossMode::M2bm => self.m2bm += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.supervised + self.m2m + self.m2bm
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SceneScore {
    pub si_sdr_db: f64,
    pub snr_db: f64,
    /// SI-SDR of the unprocessed reference mixture.
    pub input_si_sdr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    /// Means over scored scenes.
    pub si_sdr_db: f64,
    pub snr_db: f64,
    pub input_si_sdr_db: f64,
    pub per_scene: Vec<SceneScore>,
    /// Mean M2M loss on multichannel scenes, if any.
    pub mc_loss: Option<f64>,
    /// Mean batch loss before each update; one entry per step.
    pub loss_curve: Vec<f64>,
    /// Mean loss over the training set before and after training.
    pub initial_loss: Option<f64>,
    pub final_loss: Option<f64>,
    pub mode_counts: ModeCounts,
}

/// Oracle metrics and held-out MC loss of `model` on `scenes`.
pub fn evaluate(model: &ToyModel, scenes: &[TrainingSample], cfg: &LossConfig) -> Result<EvalReport> {
    let mut report = EvalReport::default();
    let mut mc = Vec::new();
    for (i, s) in scenes.iter().enumerate() {
        let est = model.forward_at(&s.mixture, s.ref_mic)?;
        if s.mixture.num_channels() > 1 {
            mc.push(total_mc_loss(&s.mixture, s.ref_mic, None, &est.target, &est.noise, cfg)?.total);
        }
        let Some(target) = &s.target else {
            bail!(InvalidInput, "held-out scene {i} has no ground-truth target");
        };
        let engine = StftEngine::new(*s.mixture.config())?;
        let reference = engine.synthesize(target, s.num_samples)?;
        let estimate = engine.synthesize(&est.target, s.num_samples)?;
        let input = engine.synthesize(s.mixture.channel(s.ref_mic), s.num_samples)?;
        report.per_scene.push(SceneScore {
            si_sdr_db: metrics::si_sdr(&estimate, &reference)?,
            snr_db: metrics::snr(&estimate, &reference)?,
            input_si_sdr_db: metrics::si_sdr(&input, &reference)?,
        });
    }
    let n = report.per_scene.len().max(1) as f64;
    report.si_sdr_db = report.per_scene.iter().map(|s| s.si_sdr_db).sum::<f64>() / n;
    report.snr_db = report.per_scene.iter().map(|s| s.snr_db).sum::<f64>() / n;
    report.input_si_sdr_db = report.per_scene.iter().map(|s| s.input_si_sdr_db).sum::<f64>() / n;
    if !mc.is_empty() {
        report.mc_loss = Some(mc.iter().sum::<f64>() / mc.len() as f64);
    }
    Ok(report)
}

/// Order in which samples are drawn: each pool cycles through a fresh seeded
/// permutation, and co-training modes interleave `mix_ratio` draws from the
/// simulated and real-like pools.
struct Schedule {
    pools: Vec<(Vec<usize>, usize)>,
    pattern: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl Schedule {
    fn new(cfg: &TrainConfig, samples: &[TrainingSample]) -> Result<Self> {
        let pool = |tag| -> Vec<usize> { (0..samples.len()).filter(|&i| samples[i].tag == tag).collect() };
        let sim = pool(SampleTag::Simulated);
        let real = pool(SampleTag::RealLike);
        let (pools, pattern) = match cfg.mode {
            TrainMode::Supervised => (vec![sim], vec![0]),
            TrainMode::M2m | TrainMode::M2bm => (vec![real], vec![0]),
            TrainMode::SuperM2m | TrainMode::SuperM2bm => {
                let mut pattern = vec![0; cfg.mix_ratio[0]];
                pattern.extend(core::iter::repeat_n(1, cfg.mix_ratio[1]));
                (vec![sim, real], pattern)
            }
        };
        for (k, p) in pools.iter().enumerate() {
            if p.is_empty() {
                let tag = if cfg.mode == TrainMode::Supervised || (pools.len() == 2 && k == 0) {
                    "simulated"
                } else {
                    "real-like"
                };
                bail!(InvalidInput, "mode {} needs {tag} samples, dataset has none", cfg.mode.name());
            }
        }
        let mut sched = Self {
            pools: pools.into_iter().map(|p| (p, 0)).collect(),
            pattern,
            pos: 0,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        };
        for k in 0..sched.pools.len() {
            sched.pools[k].0.shuffle(&mut sched.rng);
        }
        Ok(sched)
    }

    fn next(&mut self) -> usize {
        let k = self.pattern[self.pos % self.pattern.len()];
        self.pos += 1;
        let (order, cursor) = &mut self.pools[k];
        if *cursor == order.len() {
            order.shuffle(&mut self.rng);
            *cursor = 0;
        }
        let i = order[*cursor];
        *cursor += 1;
        i
    }
}

fn check_dataset(cfg: &TrainConfig, samples: &[TrainingSample]) -> Result<(usize, usize)> {
    let Some(first) = samples.first() else {
        bail!(InvalidInput, "empty dataset");
    };
    let (bins, q) = (first.mixture.bins(), first.ref_mic);
    for (i, s) in samples.iter().enumerate() {
        if s.mixture.bins() != bins || s.ref_mic != q {
            bail!(InvalidInput, "sample {i} differs from sample 0 in bin count or reference mic");
        }
        match cfg.mode.loss_mode_for(s.tag) {
            Some(LossMode::M2bm) if s.beamformed.is_none() => {
                bail!(InvalidInput, "sample {i} is real-like but has no beamformed mixture")
            }
            Some(LossMode::Supervised) if s.target.is_none() || s.noise.is_none() => {
                bail!(InvalidInput, "sample {i} is simulated but lacks ground-truth images")
            }
            _ => {}
        }
    }
    Ok((bins, q))
}

/// Mean loss over every sample the mode trains on.
pub fn dataset_loss(model: &ToyModel, mode: TrainMode, samples: &[TrainingSample], cfg: &LossConfig) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for s in samples {
        if let Some(m) = mode.loss_mode_for(s.tag) {
            total += sample_loss(model, m, s, cfg)?;
            n += 1;
        }
    }
    if n == 0 {
        bail!(InvalidInput, "no samples usable in mode {}", mode.name());
    }
    Ok(total / n as f64)
}

/// Build the configured model and train it on `samples`.
pub fn train(cfg: &TrainConfig, samples: &[TrainingSample]) -> Result<(ToyModel, EvalReport)> {
    let (bins, q) = check_dataset(cfg, samples)?;
    let model = ToyModel::new(cfg.model.shape(bins, q), cfg.model.init, cfg.seed)?;
    train_from(cfg, model, samples)
}

/// Gradient descent from `model`. The report's metrics are computed on the
/// training samples that carry ground truth.
pub fn train_from(
    cfg: &TrainConfig,
    mut model: ToyModel,
    samples: &[TrainingSample],
) -> Result<(ToyModel, EvalReport)> {
    cfg.validate()?;
    check_dataset(cfg, samples)?;
    let loss_cfg = cfg.loss_config();
    let mut schedule = Schedule::new(cfg, samples)?;
    let diverged = |step: usize, reason: String| Error::Diverged { step, reason };

    let numerical = |step: usize| move |e: Error| if e.is_numerical() { diverged(step, format!("{e}")) } else { e };

    let initial = dataset_loss(&model, cfg.mode, samples, &loss_cfg).map_err(numerical(0))?;
    if !initial.is_finite() {
        return Err(diverged(0, String::from("initial loss is not finite")));
    }
    let mut curve = Vec::with_capacity(cfg.steps);
    let mut counts = ModeCounts::default();
    for step in 0..cfg.steps {
        let mut batch = Vec::with_capacity(cfg.batch);
        for _ in 0..cfg.batch {
            let s = &samples[schedule.next()];
            let mode = cfg.mode.loss_mode_for(s.tag).expect("schedule draws only usable samples");
            counts.record(mode);
            batch.push((s, mode));
        }
        let (loss, grad) = batch_gradient(&model, &batch, &loss_cfg, cfg.grad, cfg.fd_step).map_err(numerical(step))?;
        if !loss.is_finite() {
            return Err(diverged(step, format!("loss is {loss}")));
        }
        curve.push(loss);
        let params: Vec<f64> = model.params().iter().zip(&grad).map(|(p, g)| p - cfg.lr * g).collect();
        if params.iter().any(|p| !p.is_finite()) {
            return Err(diverged(step, String::from("non-finite parameters after update")));
        }
        model = model.with_params(&params)?;
    }
    let final_loss = dataset_loss(&model, cfg.mode, samples, &loss_cfg).map_err(numerical(cfg.steps))?;

    let scored: Vec<TrainingSample> = samples.iter().filter(|s| s.target.is_some()).cloned().collect();
    let mut report = if scored.is_empty() {
        EvalReport::default()
    } else {
        evaluate(&model, &scored, &loss_cfg).map_err(numerical(cfg.steps))?
    };
    report.loss_curve = curve;
    report.initial_loss = Some(initial);
    report.final_loss = Some(final_loss);
    report.mode_counts = counts;
    Ok((model, report))
}
