//! Beamformed-mixture derivation: spatial covariances of per-channel
//! estimates, the RTF from the principal eigenvector of the target
//! covariance, a time-invariant MVDR beamformer, and its application to the
//! observed mixture.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{bail, Error, Result};
use crate::linalg::{dot, hermitian_eigen, norm, CMatrix, Cholesky};
use crate::math;
use crate::spectral::{MultichannelSpectrogram, Spectrogram};

/// Relative diagonal loading applied to `Φ_V` before inversion, as a
/// fraction of its mean eigenvalue.
pub const DEFAULT_MVDR_LOADING: f64 = 1e-6;

/// `|r_q|` below this fraction of `‖r‖` leaves the RTF undefined.
pub const RTF_REF_THRESHOLD: f64 = 1e-8;

/// Relative eigengap below which the principal direction is flagged.
pub const EIGENGAP_THRESHOLD: f64 = 1e-10;

/// One `P×P` Hermitian matrix per frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialCovariance {
    mats: Vec<CMatrix>,
}

impl SpatialCovariance {
    pub fn from_matrices(mats: Vec<CMatrix>) -> Result<Self> {
        if let Some(first) = mats.first() {
            if mats.iter().any(|m| m.dim() != first.dim()) {
                bail!(ShapeMismatch, "covariances disagree on dimension");
            }
        }
        Ok(Self { mats })
    }

    pub fn bins(&self) -> usize {
        self.mats.len()
    }

    pub fn dim(&self) -> usize {
        self.mats.first().map_or(0, CMatrix::dim)
    }

    pub fn at(&self, f: usize) -> &CMatrix {
        &self.mats[f]
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.mats
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            mats: self
                .mats
                .iter()
                .map(|m| {
                    let mut m = m.clone();
                    m.scale(factor);
                    m
                })
                .collect(),
        }
    }
}

/// `Φ(f) = Σ_t x(t,f) x(t,f)ᴴ`, unnormalized.
pub fn spatial_covariance(est: &MultichannelSpectrogram) -> Result<SpatialCovariance> {
    let p = est.num_channels();
    if p < 2 {
        bail!(InvalidInput, "spatial covariance needs at least two channels, got {p}");
    }
    let mut mats = vec![CMatrix::zeros(p); est.bins()];
    let mut x = vec![Complex64::new(0.0, 0.0); p];
    for (f, mat) in mats.iter_mut().enumerate() {
        for t in 0..est.frames() {
            for (m, slot) in x.iter_mut().enumerate() {
                *slot = est.channel(m).get(t, f);
            }
            mat.add_outer(&x, 1.0);
        }
    }
    Ok(SpatialCovariance { mats })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalEigen {
    /// Unit norm; phased so that its largest-magnitude entry is real
    /// and positive.
    pub vector: Vec<Complex64>,
    pub value: f64,
    /// The top two eigenvalues are closer than `1e-10·tr Φ`, so the
    /// direction is not well defined.
    pub degenerate: bool,
}

pub fn principal_eigenvector(phi: &CMatrix) -> Result<PrincipalEigen> {
    let scale = 1.0 + phi.frobenius_norm();
    if phi.hermitian_defect() > 1e-10 * scale {
        bail!(InvalidInput, "matrix is not Hermitian (defect {:e})", phi.hermitian_defect());
    }
    let eig = hermitian_eigen(phi)?;
    let n = phi.dim();
    let value = eig.values[n - 1];
    let mut vector = eig.vectors[n - 1].clone();
    let (imax, _) =
        vector
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, z)| if z.norm_sqr() > best.1 { (i, z.norm_sqr()) } else { best });
    let anchor = vector[imax];
    if anchor.norm_sqr() > 0.0 {
        let phase = anchor.conj() / math::abs(anchor);
        for z in &mut vector {
            *z *= phase;
        }
    }
    let trace = phi.trace_re();
    let degenerate = n > 1 && (value - eig.values[n - 2]) < EIGENGAP_THRESHOLD * trace.abs();
    Ok(PrincipalEigen { vector, value, degenerate })
}

/// `c = r / r_q`.
pub fn rtf(r: &[Complex64], q: usize) -> Result<Vec<Complex64>> {
    if q >= r.len() {
        bail!(InvalidInput, "reference index {q} out of range for {} channels", r.len());
    }
    let rq = r[q];
    if math::abs(rq) < RTF_REF_THRESHOLD * norm(r) || rq == Complex64::new(0.0, 0.0) {
        bail!(Degenerate, "reference entry of the principal eigenvector vanishes; RTF undefined");
    }
    let mut c: Vec<Complex64> = r.iter().map(|z| z / rq).collect();
    c[q] = Complex64::new(1.0, 0.0);
    Ok(c)
}

/// MVDR weights at a single frequency:
/// `w = Φ⁻¹c / (cᴴΦ⁻¹c)` with `Φ = Φ_V + δ·(tr Φ_V / P)·Id`.
pub fn mvdr_vector(phi_v: &CMatrix, c: &[Complex64], loading: f64) -> Result<Vec<Complex64>> {
    let p = phi_v.dim();
    if c.len() != p {
        bail!(ShapeMismatch, "RTF of length {} for a {p}x{p} covariance", c.len());
    }
    let trace = phi_v.trace_re();
    if trace == 0.0 {
        bail!(Degenerate, "noise covariance has zero trace");
    }
    if !(loading >= 0.0) {
        bail!(InvalidInput, "loading must be non-negative");
    }
    let mut loaded = phi_v.clone();
    loaded.add_diagonal(loading * trace / p as f64);
    let phi_inv_c = Cholesky::factor(&loaded)?.solve(c);
    let denom = dot(c, &phi_inv_c);
    if !(denom.norm() > 0.0) {
        bail!(Numerical, "cᴴΦ⁻¹c vanishes");
    }
    // cᴴΦ⁻¹c is real for Hermitian Φ; dividing by its conjugate makes wᴴc = 1.
    Ok(phi_inv_c.iter().map(|z| z / denom.conj()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerWeights {
    /// `weights[f]`, one entry per channel.
    pub weights: Vec<Vec<Complex64>>,
    /// The RTF each weight vector was built against.
    pub rtf: Vec<Vec<Complex64>>,
    /// Reference channel, as an index into the beamformed channels.
    pub ref_mic: usize,
}

impl BeamformerWeights {
    /// `max_f |w(f)ᴴc(f) − 1|`.
    pub fn distortionless_residual(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.rtf)
            .map(|(w, c)| math::abs(dot(w, c) - Complex64::new(1.0, 0.0)))
            .fold(0.0, f64::max)
    }

    /// Per-frequency `|w(f)ᴴc(f) − 1|`.
    pub fn residuals(&self) -> Vec<f64> {
        self.weights.iter().zip(&self.rtf).map(|(w, c)| math::abs(dot(w, c) - Complex64::new(1.0, 0.0))).collect()
    }

    /// Passes channel `q` through at every frequency.
    pub fn passthrough(channels: usize, bins: usize, q: usize) -> Self {
        let e: Vec<Complex64> = (0..channels).map(|i| Complex64::new(if i == q { 1.0 } else { 0.0 }, 0.0)).collect();
        Self { weights: vec![e.clone(); bins], rtf: vec![e; bins], ref_mic: q }
    }
}

pub fn mvdr_weights(
    phi_v: &SpatialCovariance,
    rtfs: &[Vec<Complex64>],
    ref_mic: usize,
    loading: f64,
) -> Result<BeamformerWeights> {
    if rtfs.len() != phi_v.bins() {
        bail!(ShapeMismatch, "{} RTFs for {} covariance bins", rtfs.len(), phi_v.bins());
    }
    let weights =
        phi_v.matrices().iter().zip(rtfs).map(|(phi, c)| mvdr_vector(phi, c, loading)).collect::<Result<Vec<_>>>()?;
    Ok(BeamformerWeights { weights, rtf: rtfs.to_vec(), ref_mic })
}

/// `Y_BF(t,f) = w(f)ᴴ Y(t,f)`.
pub fn apply_beamformer(w: &BeamformerWeights, y: &MultichannelSpectrogram) -> Result<Spectrogram> {
    let p = y.num_channels();
    if w.weights.len() != y.bins() {
        bail!(ShapeMismatch, "weights for {} bins, spectrogram has {}", w.weights.len(), y.bins());
    }
    if w.weights.iter().any(|v| v.len() != p) {
        bail!(ShapeMismatch, "weights for a different channel count than the {p}-channel input");
    }
    Ok(Spectrogram::from_fn(y.frames(), y.bins(), |t, f| {
        w.weights[f].iter().enumerate().map(|(m, wm)| wm.conj() * y.channel(m).get(t, f)).sum()
    }))
}

/// Produces target and non-target estimates for one channel of a mixture.
pub trait Enhancer {
    fn enhance_channel(&self, mixture: &MultichannelSpectrogram, channel: usize) -> Result<(Spectrogram, Spectrogram)>;
}

/// Returns the true images; for oracle experiments.
#[derive(Debug, Clone, Copy)]
pub struct OracleEnhancer<'a> {
    pub target: &'a MultichannelSpectrogram,
    pub noise: &'a MultichannelSpectrogram,
}

impl Enhancer for OracleEnhancer<'_> {
    fn enhance_channel(
        &self,
        _mixture: &MultichannelSpectrogram,
        channel: usize,
    ) -> Result<(Spectrogram, Spectrogram)> {
        if channel >= self.target.num_channels() || channel >= self.noise.num_channels() {
            bail!(InvalidInput, "oracle has no channel {channel}");
        }
        Ok((self.target.channel(channel).clone(), self.noise.channel(channel).clone()))
    }
}

/// Output of [`derive_bf_mixture`].
#[derive(Debug, Clone, PartialEq)]
pub struct BfMixture {
    pub beamformed: Spectrogram,
    /// Weights over `mic_subset`, in subset order.
    pub weights: BeamformerWeights,
    pub mic_subset: Vec<usize>,
    /// Frequencies that fell back to reference passthrough because the RTF
    /// or the MVDR solve was undefined there.
    pub fallback_bins: Vec<usize>,
    /// Frequencies whose principal eigenvector was flagged degenerate.
    pub degenerate_bins: Vec<usize>,
}

/// Enhance each subset channel, estimate covariances, RTF and MVDR weights,
/// and beamform the observed mixture.
pub fn derive_bf_mixture(
    mixture: &MultichannelSpectrogram,
    enhancer: &dyn Enhancer,
    mic_subset: &[usize],
    ref_mic: usize,
    loading: f64,
) -> Result<BfMixture> {
    let p = mixture.num_channels();
    if mic_subset.len() < 2 {
        bail!(InvalidInput, "beamforming needs at least two microphones, got {}", mic_subset.len());
    }
    for (i, &m) in mic_subset.iter().enumerate() {
        if m >= p {
            bail!(InvalidInput, "microphone {m} out of range for {p} channels");
        }
        if mic_subset[..i].contains(&m) {
            bail!(InvalidInput, "microphone {m} listed twice");
        }
    }
    let q = match mic_subset.iter().position(|&m| m == ref_mic) {
        Some(q) => q,
        None => bail!(InvalidInput, "reference mic {ref_mic} is not in the beamforming subset"),
    };

    let mut xs = Vec::with_capacity(mic_subset.len());
    let mut vs = Vec::with_capacity(mic_subset.len());
    for &m in mic_subset {
        let (x, v) = enhancer
            .enhance_channel(mixture, m)
            .map_err(|e| Error::InvalidInput(alloc::format!("enhancer failed on channel {m}: {e}")))?;
        xs.push(x);
        vs.push(v);
    }
    let config = *mixture.config();
    let phi_x = spatial_covariance(&MultichannelSpectrogram::new(config, xs)?)?;
    let phi_v = spatial_covariance(&MultichannelSpectrogram::new(config, vs)?)?;

    let n = mic_subset.len();
    let mut passthrough = vec![Complex64::new(0.0, 0.0); n];
    passthrough[q] = Complex64::new(1.0, 0.0);
    let mut weights = Vec::with_capacity(phi_x.bins());
    let mut rtfs = Vec::with_capacity(phi_x.bins());
    let mut fallback_bins = Vec::new();
    let mut degenerate_bins = Vec::new();
    for f in 0..phi_x.bins() {
        let eig = principal_eigenvector(phi_x.at(f))?;
        if eig.degenerate {
            degenerate_bins.push(f);
        }
        let solved = rtf(&eig.vector, q).and_then(|c| Ok((mvdr_vector(phi_v.at(f), &c, loading)?, c)));
        match solved {
            Ok((w, c)) => {
                weights.push(w);
                rtfs.push(c);
            }
            Err(_) => {
                fallback_bins.push(f);
                weights.push(passthrough.clone());
                rtfs.push(passthrough.clone());
            }
        }
    }
    let weights = BeamformerWeights { weights, rtf: rtfs, ref_mic: q };
    let beamformed = apply_beamformer(&weights, &mixture.select(mic_subset)?)?;
    Ok(BfMixture { beamformed, weights, mic_subset: mic_subset.to_vec(), fallback_bins, degenerate_bins })
}

/// Human-readable summary used in reports.
pub fn describe(bf: &BfMixture) -> String {
    alloc::format!(
        "{} mics, {} fallback bins, {} degenerate bins, max |wᴴc−1| = {:e}",
        bf.mic_subset.len(),
        bf.fallback_bins.len(),
        bf.degenerate_bins.len(),
        bf.weights.distortionless_residual()
    )
}
