//! Forward convolutive prediction (FCP).
//!
//! For every frequency `f`, a filter `h(f)` of `I + J` taps maps a window of
//! frames of an estimate `S` to a target spectrogram `Y` by minimizing
//!
//! ```text
//! Σ_t |Y(t,f) − h(f)ᴴ S̄(t,f)|² / λ(t,f),   λ(t,f) = ξ·max|Y|² + |Y(t,f)|²
//! ```
//!
//! with `S̄(t,f) = [S(t−I+1,f), …, S(t+J,f)]`. The closed form comes from the
//! weighted normal equations `A h = b`, `A = Σ S̄S̄ᴴ/λ + ε·(tr A/(I+J))·Id`,
//! `b = Σ S̄·conj(Y)/λ`, solved by Cholesky.
//!
//! [`Projection`] generalizes this to several estimates predicting one target
//! together (their stacks are concatenated), and carries what the backward
//! pass needs to differentiate the prediction with respect to the estimates,
//! including the dependence of the filters themselves on the estimates.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{bail, Result};
use crate::linalg::Cholesky;
use crate::math;
use crate::par;
use crate::spectral::Spectrogram;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct FcpConfig {
    /// `I`: current frame plus `I − 1` past frames.
    pub past_taps: usize,
    /// `J`: future frames.
    pub future_taps: usize,
    /// `ξ`, the floor of the prediction weights relative to the peak power.
    pub weight_floor: f64,
    /// `ε`, diagonal loading relative to the mean diagonal of `A`.
    pub diag_load: f64,
}

impl Default for FcpConfig {
    fn default() -> Self {
        Self { past_taps: 20, future_taps: 1, weight_floor: 1e-2, diag_load: 1e-10 }
    }
}

impl FcpConfig {
    pub fn new(past_taps: usize, future_taps: usize) -> Self {
        Self { past_taps, future_taps, ..Self::default() }
    }

    pub fn taps(&self) -> usize {
        self.past_taps + self.future_taps
    }

    pub fn validate(&self) -> Result<()> {
        if self.past_taps < 1 {
            bail!(InvalidInput, "past_taps must be at least 1");
        }
        if !(self.weight_floor > 0.0) || !self.weight_floor.is_finite() {
            bail!(InvalidInput, "weight_floor must be positive and finite");
        }
        if !(self.diag_load >= 0.0) || !self.diag_load.is_finite() {
            bail!(InvalidInput, "diag_load must be non-negative and finite");
        }
        Ok(())
    }
}

/// Per-frequency complex filter of `past + future` taps. Tap `j` multiplies
/// frame `t − past + 1 + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FcpFilter {
    past: usize,
    future: usize,
    coeffs: Vec<Vec<Complex64>>,
}

impl FcpFilter {
    pub fn from_coeffs(past: usize, future: usize, coeffs: Vec<Vec<Complex64>>) -> Result<Self> {
        if past < 1 {
            bail!(InvalidInput, "filter needs at least one past tap");
        }
        if coeffs.iter().any(|c| c.len() != past + future) {
            bail!(ShapeMismatch, "every bin needs {} coefficients", past + future);
        }
        if coeffs.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            bail!(Numerical, "non-finite filter coefficient");
        }
        Ok(Self { past, future, coeffs })
    }

    pub fn zeros(past: usize, future: usize, bins: usize) -> Self {
        Self { past, future, coeffs: vec![vec![ZERO; past + future]; bins] }
    }

    /// Passes the current frame through unchanged.
    pub fn identity(past: usize, future: usize, bins: usize) -> Self {
        let mut f = Self::zeros(past, future, bins);
        for c in &mut f.coeffs {
            c[past - 1] = Complex64::new(1.0, 0.0);
        }
        f
    }

    pub fn past(&self) -> usize {
        self.past
    }

    pub fn future(&self) -> usize {
        self.future
    }

    pub fn taps(&self) -> usize {
        self.past + self.future
    }

    pub fn bins(&self) -> usize {
        self.coeffs.len()
    }

    pub fn bin(&self, f: usize) -> &[Complex64] {
        &self.coeffs[f]
    }

    pub fn coeffs(&self) -> &[Vec<Complex64>] {
        &self.coeffs
    }

    /// Re-expresses the filter with a wider window; the new taps are zero.
    /// Fails if the target window is narrower.
    pub fn widen(&self, past: usize, future: usize) -> Result<Self> {
        if past < self.past || future < self.future {
            bail!(InvalidInput, "cannot narrow a filter from ({}, {}) to ({past}, {future})", self.past, self.future);
        }
        let shift = past - self.past;
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                let mut out = vec![ZERO; past + future];
                out[shift..shift + c.len()].copy_from_slice(c);
                out
            })
            .collect();
        Ok(Self { past, future, coeffs })
    }

    /// Largest coefficient-wise distance to `other` (same layout required).
    pub fn max_abs_diff(&self, other: &FcpFilter) -> Result<f64> {
        if self.past != other.past || self.future != other.future || self.bins() != other.bins() {
            bail!(ShapeMismatch, "filters have different layouts");
        }
        Ok(self
            .coeffs
            .iter()
            .flatten()
            .zip(other.coeffs.iter().flatten())
            .map(|(a, b)| math::abs(a - b))
            .fold(0.0, f64::max))
    }
}

/// Frame windows `[S(t−I+1,f), …, S(t+J,f)]` for every `(t, f)`, zero
/// outside the spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedFrames {
    past: usize,
    future: usize,
    frames: usize,
    bins: usize,
    data: Vec<Complex64>,
}

impl StackedFrames {
    pub fn depth(&self) -> usize {
        self.past + self.future
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn at(&self, t: usize, f: usize) -> &[Complex64] {
        let k = self.depth();
        let start = (t * self.bins + f) * k;
        &self.data[start..start + k]
    }
}

#[inline]
fn source_frame(t: usize, j: usize, past: usize, frames: usize) -> Option<usize> {
    (t + j + 1).checked_sub(past).filter(|&s| s < frames)
}

pub fn stack(estimate: &Spectrogram, cfg: &FcpConfig) -> Result<StackedFrames> {
    cfg.validate()?;
    if estimate.frames() == 0 {
        bail!(InvalidInput, "estimate has no frames");
    }
    let (frames, bins) = estimate.shape();
    let k = cfg.taps();
    let mut data = Vec::with_capacity(frames * bins * k);
    for t in 0..frames {
        for f in 0..bins {
            for j in 0..k {
                data.push(match source_frame(t, j, cfg.past_taps, frames) {
                    Some(s) => estimate.get(s, f),
                    None => ZERO,
                });
            }
        }
    }
    Ok(StackedFrames { past: cfg.past_taps, future: cfg.future_taps, frames, bins, data })
}

pub fn apply_filter(filter: &FcpFilter, stacked: &StackedFrames) -> Result<Spectrogram> {
    if filter.past != stacked.past || filter.future != stacked.future {
        bail!(
            ShapeMismatch,
            "filter window ({}, {}) vs stack window ({}, {})",
            filter.past,
            filter.future,
            stacked.past,
            stacked.future
        );
    }
    if filter.bins() != stacked.bins {
        bail!(ShapeMismatch, "filter has {} bins, stack has {}", filter.bins(), stacked.bins);
    }
    Ok(Spectrogram::from_fn(stacked.frames, stacked.bins, |t, f| crate::linalg::dot(filter.bin(f), stacked.at(t, f))))
}

/// Prediction weights `λ(t,f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FcpWeights {
    frames: usize,
    bins: usize,
    data: Vec<f64>,
}

impl FcpWeights {
    #[inline]
    pub fn get(&self, t: usize, f: usize) -> f64 {
        self.data[t * self.bins + f]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.frames, self.bins)
    }
}

/// `λ(t,f) = ξ·max_{t,f}|Y|² + |Y(t,f)|²`, the max running over the whole
/// spectrogram.
pub fn fcp_weight(target: &Spectrogram, weight_floor: f64) -> Result<FcpWeights> {
    if !(weight_floor > 0.0) {
        bail!(InvalidInput, "weight floor must be positive");
    }
    let peak = target.max_power();
    if peak == 0.0 {
        bail!(Degenerate, "prediction target is identically zero");
    }
    if !peak.is_finite() {
        bail!(Numerical, "prediction target has non-finite power");
    }
    let floor = weight_floor * peak;
    Ok(FcpWeights {
        frames: target.frames(),
        bins: target.bins(),
        data: target.as_slice().iter().map(|z| floor + math::norm_sqr(*z)).collect(),
    })
}

/// Single-estimate FCP: the filter predicting `target` from `estimate`.
pub fn fcp_solve(target: &Spectrogram, estimate: &Spectrogram, cfg: &FcpConfig) -> Result<FcpFilter> {
    let proj = Projection::solve(target, &[estimate], cfg)?;
    Ok(proj.filters.into_iter().next().expect("one estimate, one filter"))
}

/// Joint FCP: one filter per estimate, fitted together so that the sum of
/// the filtered estimates predicts `target`.
pub fn fcp_solve_joint(target: &Spectrogram, estimates: &[&Spectrogram], cfg: &FcpConfig) -> Result<Vec<FcpFilter>> {
    Ok(Projection::solve(target, estimates, cfg)?.filters)
}

/// Weighted and unweighted prediction errors of a set of filters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FcpObjective {
    pub weighted: f64,
    pub unweighted: f64,
}

pub fn fcp_objective(
    target: &Spectrogram,
    estimates: &[&Spectrogram],
    filters: &[FcpFilter],
    weights: &FcpWeights,
) -> Result<FcpObjective> {
    let pred = predict(estimates, filters)?;
    target.check_same_shape(&pred, "objective")?;
    let mut weighted = 0.0;
    let mut unweighted = 0.0;
    for t in 0..target.frames() {
        for f in 0..target.bins() {
            let e = math::norm_sqr(target.get(t, f) - pred.get(t, f));
            weighted += e / weights.get(t, f);
            unweighted += e;
        }
    }
    Ok(FcpObjective { weighted, unweighted })
}

/// `Σ_e h_e(f)ᴴ S̄_e(t,f)`.
pub fn predict(estimates: &[&Spectrogram], filters: &[FcpFilter]) -> Result<Spectrogram> {
    if estimates.len() != filters.len() || estimates.is_empty() {
        bail!(ShapeMismatch, "{} estimates for {} filters", estimates.len(), filters.len());
    }
    let (frames, bins) = estimates[0].shape();
    for (e, h) in estimates.iter().zip(filters) {
        if e.shape() != (frames, bins) || h.bins() != bins {
            bail!(ShapeMismatch, "estimate/filter shapes disagree");
        }
    }
    Ok(Spectrogram::from_fn(frames, bins, |t, f| {
        let mut acc = ZERO;
        for (e, h) in estimates.iter().zip(filters) {
            for (j, c) in h.bin(f).iter().enumerate() {
                if let Some(s) = source_frame(t, j, h.past, frames) {
                    acc += c.conj() * e.get(s, f);
                }
            }
        }
        acc
    }))
}

/// Per-frequency state kept for differentiation.
#[derive(Debug, Clone)]
struct BinSolve {
    /// `None` when every estimate is silent in this bin (filter is zero).
    factor: Option<Cholesky>,
    /// `ε / (M·K)`, the loading coefficient on `tr A`.
    load_coeff: f64,
}

/// Solved FCP problem for one target and `M` jointly fitted estimates.
#[derive(Debug, Clone)]
pub struct Projection {
    past: usize,
    future: usize,
    frames: usize,
    bins: usize,
    filters: Vec<FcpFilter>,
    weights: FcpWeights,
    solves: Vec<BinSolve>,
}

impl Projection {
    pub fn solve(target: &Spectrogram, estimates: &[&Spectrogram], cfg: &FcpConfig) -> Result<Self> {
        let weights = fcp_weight(target, cfg.weight_floor)?;
        Self::solve_weighted(target, estimates, weights, cfg)
    }

    /// Like [`solve`](Self::solve) with externally supplied weights.
    pub fn solve_weighted(
        target: &Spectrogram,
        estimates: &[&Spectrogram],
        weights: FcpWeights,
        cfg: &FcpConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if estimates.is_empty() {
            bail!(InvalidInput, "FCP needs at least one estimate");
        }
        let (frames, bins) = target.shape();
        if frames == 0 {
            bail!(InvalidInput, "target has no frames");
        }
        for e in estimates {
            target.check_same_shape(e, "FCP target vs estimate")?;
            if !e.is_finite() {
                bail!(Numerical, "estimate contains non-finite values");
            }
        }
        if !target.is_finite() {
            bail!(Numerical, "target contains non-finite values");
        }
        if weights.shape() != (frames, bins) {
            bail!(ShapeMismatch, "weights shape {:?} vs target {:?}", weights.shape(), (frames, bins));
        }

        let k = cfg.taps();
        let m = estimates.len();
        let n = m * k;
        let load_coeff = cfg.diag_load / n as f64;
        let past = cfg.past_taps;

        let per_bin = par::map_indices(bins, |f| -> Result<(Vec<Complex64>, BinSolve)> {
            let mut a = vec![ZERO; n * n];
            let mut b = vec![ZERO; n];
            let mut z = vec![ZERO; n];
            for t in 0..frames {
                gather(estimates, t, f, past, k, frames, &mut z);
                let inv = 1.0 / weights.get(t, f);
                let yc = target.get(t, f).conj() * inv;
                for i in 0..n {
                    if z[i] == ZERO {
                        continue;
                    }
                    b[i] += z[i] * yc;
                    let zi = z[i] * inv;
                    let row = &mut a[i * n..i * n + i + 1];
                    for (aij, zj) in row.iter_mut().zip(&z[..=i]) {
                        *aij += zi * zj.conj();
                    }
                }
            }
            let trace: f64 = (0..n).map(|i| a[i * n + i].re).sum();
            if trace == 0.0 {
                return Ok((vec![ZERO; n], BinSolve { factor: None, load_coeff }));
            }
            let mut mat = crate::linalg::CMatrix::zeros(n);
            for i in 0..n {
                for j in 0..=i {
                    mat[(i, j)] = a[i * n + j];
                    mat[(j, i)] = a[i * n + j].conj();
                }
                mat[(i, i)] = Complex64::new(a[i * n + i].re + load_coeff * trace, 0.0);
            }
            let factor = Cholesky::factor(&mat)?;
            let h = factor.solve(&b);
            Ok((h, BinSolve { factor: Some(factor), load_coeff }))
        });

        let mut coeffs: Vec<Vec<Vec<Complex64>>> = vec![Vec::with_capacity(bins); m];
        let mut solves = Vec::with_capacity(bins);
        for res in per_bin {
            let (h, solve) = res?;
            for (e, chunk) in h.chunks(k).enumerate() {
                coeffs[e].push(chunk.to_vec());
            }
            solves.push(solve);
        }
        let filters =
            coeffs.into_iter().map(|c| FcpFilter::from_coeffs(past, cfg.future_taps, c)).collect::<Result<Vec<_>>>()?;
        Ok(Self { past, future: cfg.future_taps, frames, bins, filters, weights, solves })
    }

    pub fn filters(&self) -> &[FcpFilter] {
        &self.filters
    }

    pub fn weights(&self) -> &FcpWeights {
        &self.weights
    }

    pub fn predict(&self, estimates: &[&Spectrogram]) -> Result<Spectrogram> {
        predict(estimates, &self.filters)
    }

    /// Gradients of a real loss with respect to each estimate, given the
    /// gradient `grad_pred` with respect to the prediction `Ŷ = Σ hᴴS̄`.
    ///
    /// Complex gradients use the convention `∂L/∂Re z + i·∂L/∂Im z`. With
    /// `through_filters` the dependence of `h` on the estimates is included
    /// (implicit differentiation of `A h = b`); without it the filters are
    /// treated as constants.
    pub fn backward(
        &self,
        target: &Spectrogram,
        estimates: &[&Spectrogram],
        prediction: &Spectrogram,
        grad_pred: &Spectrogram,
        through_filters: bool,
    ) -> Result<Vec<Spectrogram>> {
        let (frames, bins) = (self.frames, self.bins);
        if estimates.len() != self.filters.len() {
            bail!(
                ShapeMismatch,
                "backward called with {} estimates, solved with {}",
                estimates.len(),
                self.filters.len()
            );
        }
        grad_pred.check_same_shape(target, "grad vs target")?;
        prediction.check_same_shape(target, "prediction vs target")?;
        let k = self.past + self.future;
        let m = estimates.len();
        let n = m * k;
        let past = self.past;

        // Per bin: gradient w.r.t. the stacked vector z_t, scattered back to
        // source frames. Each bin touches only its own column.
        let columns = par::map_indices(bins, |f| {
            let mut out = vec![vec![ZERO; frames]; m];
            let h: Vec<Complex64> = self.filters.iter().flat_map(|fl| fl.bin(f).iter().copied()).collect();
            let mut z = vec![ZERO; n];
            let mut gz = vec![ZERO; n];

            let mu = match (&self.solves[f].factor, through_filters) {
                (Some(factor), true) => {
                    // ∇_h = Σ_t conj(g_t) z_t, μ = A⁻¹ ∇_h
                    let mut grad_h = vec![ZERO; n];
                    for t in 0..frames {
                        let g = grad_pred.get(t, f);
                        if g == ZERO {
                            continue;
                        }
                        gather(estimates, t, f, past, k, frames, &mut z);
                        for (gh, zi) in grad_h.iter_mut().zip(&z) {
                            *gh += g.conj() * zi;
                        }
                    }
                    Some(factor.solve(&grad_h))
                }
                _ => None,
            };
            let loading = mu.as_ref().map(|mu| 2.0 * crate::linalg::dot(mu, &h).re * self.solves[f].load_coeff);

            for t in 0..frames {
                gather(estimates, t, f, past, k, frames, &mut z);
                let g = grad_pred.get(t, f);
                for (gzi, hi) in gz.iter_mut().zip(&h) {
                    *gzi = g * hi;
                }
                if let (Some(mu), Some(loading)) = (&mu, loading) {
                    let inv = 1.0 / self.weights.get(t, f);
                    let resid = target.get(t, f) - prediction.get(t, f);
                    let mu_z = crate::linalg::dot(mu, &z);
                    for i in 0..n {
                        gz[i] += (mu[i] * resid - mu_z * h[i] - z[i] * loading) * inv;
                    }
                }
                for e in 0..m {
                    for j in 0..k {
                        if let Some(s) = source_frame(t, j, past, frames) {
                            out[e][s] += gz[e * k + j];
                        }
                    }
                }
            }
            out
        });

        let mut grads = vec![Spectrogram::zeros(frames, bins); m];
        for (f, col) in columns.into_iter().enumerate() {
            for (e, series) in col.into_iter().enumerate() {
                for (t, v) in series.into_iter().enumerate() {
                    grads[e].set(t, f, v);
                }
            }
        }
        Ok(grads)
    }
}

/// Fills `z` with the concatenated frame windows of every estimate.
#[inline]
fn gather(estimates: &[&Spectrogram], t: usize, f: usize, past: usize, k: usize, frames: usize, z: &mut [Complex64]) {
    for (e, est) in estimates.iter().enumerate() {
        for j in 0..k {
            z[e * k + j] = match source_frame(t, j, past, frames) {
                Some(s) => est.get(s, f),
                None => ZERO,
            };
        }
    }
}
