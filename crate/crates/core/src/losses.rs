//! Training objectives.
//!
//! * `G(a, b) = |Re a − Re b| + |Im a − Im b| + ||a| − |b||` is the per-bin
//!   distance behind every loss; `F` sums it over a spectrogram and divides
//!   by the reference magnitude sum.
//! * The supervised loss compares the two estimates with the true target and
//!   noise images, both normalized by the mixture magnitude.
//! * Mixture-constraint (MC) losses ask the two estimates, after FCP relative
//!   filtering, to add up to each observed mixture (and, for M2BM, to the
//!   beamformed mixture treated as a virtual microphone).
//!
//! Every loss comes in a value-only form and a `*_grad` form that also
//! returns the gradients with respect to `X̂` and `V̂`, using the complex
//! convention `∂L/∂Re z + i·∂L/∂Im z`. The `|·|` kinks get subgradient 0.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{bail, Error, Result};
use crate::fcp::{FcpConfig, Projection};
use crate::math;
use crate::spectral::{MultichannelSpectrogram, Spectrogram};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LossMode {
    Supervised,
    M2m,
    M2bm,
}

/// How the two relative filters of an MC term are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FilterMode {
    /// `ĥ` and `r̂` fitted together so that `ĥᴴX̄ + r̂ᴴV̄` predicts the
    /// mixture; exact whenever the mixture follows the relative-filter model.
    #[default]
    Joint,
    /// Each filter fitted on its own to predict the full mixture from its
    /// own estimate.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LossConfig {
    pub fcp: FcpConfig,
    pub filter_mode: FilterMode,
    /// Differentiate through the filter solutions (otherwise the filters are
    /// treated as constants in the gradient).
    pub through_filters: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { fcp: FcpConfig::default(), filter_mode: FilterMode::Joint, through_filters: true }
    }
}

impl From<FcpConfig> for LossConfig {
    fn from(fcp: FcpConfig) -> Self {
        Self { fcp, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MicLoss {
    pub mic: usize,
    pub value: f64,
}

/// Per-term loss report.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossBreakdown {
    pub mode: LossMode,
    pub l_sup_x: f64,
    pub l_sup_v: f64,
    pub l_mc_ref: f64,
    pub l_mc_nonref: Vec<MicLoss>,
    pub l_mc_bf: Option<f64>,
    pub total: f64,
}

impl LossBreakdown {
    fn supervised(l_sup_x: f64, l_sup_v: f64) -> Self {
        let mut b = Self {
            mode: LossMode::Supervised,
            l_sup_x,
            l_sup_v,
            l_mc_ref: 0.0,
            l_mc_nonref: Vec::new(),
            l_mc_bf: None,
            total: 0.0,
        };
        b.total = b.combined_total();
        b
    }

    fn mixture_constraint(l_mc_ref: f64, l_mc_nonref: Vec<MicLoss>, l_mc_bf: Option<f64>) -> Self {
        let mut b = Self {
            mode: if l_mc_bf.is_some() { LossMode::M2bm } else { LossMode::M2m },
            l_sup_x: 0.0,
            l_sup_v: 0.0,
            l_mc_ref,
            l_mc_nonref,
            l_mc_bf,
            total: 0.0,
        };
        b.total = b.combined_total();
        b
    }

    /// The mode's combination of the component terms.
    pub fn combined_total(&self) -> f64 {
        match self.mode {
            LossMode::Supervised => self.l_sup_x + self.l_sup_v,
            LossMode::M2m | LossMode::M2bm => {
                let nonref = if self.l_mc_nonref.is_empty() {
                    0.0
                } else {
                    let sum: f64 = self.l_mc_nonref.iter().map(|m| m.value).sum();
                    sum / self.l_mc_nonref.len() as f64
                };
                self.l_mc_ref + nonref + self.l_mc_bf.unwrap_or(0.0)
            }
        }
    }
}

/// Loss value together with its gradients.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub breakdown: LossBreakdown,
    pub grad_x: Spectrogram,
    pub grad_v: Spectrogram,
}

pub fn g_dist(a: Complex64, b: Complex64) -> f64 {
    (a.re - b.re).abs() + (a.im - b.im).abs() + (math::abs(a) - math::abs(b)).abs()
}

/// `∂G(a, b)/∂b` in the complex gradient convention.
fn g_dist_grad_b(a: Complex64, b: Complex64) -> Complex64 {
    let mag_b = math::abs(b);
    let s_mag = math::sign(math::abs(a) - mag_b);
    let (mut gr, mut gi) = (-math::sign(a.re - b.re), -math::sign(a.im - b.im));
    if mag_b > 0.0 {
        gr -= s_mag * b.re / mag_b;
        gi -= s_mag * b.im / mag_b;
    }
    Complex64::new(gr, gi)
}

fn reference_mass(reference: &Spectrogram, what: &str) -> Result<f64> {
    let mass = reference.magnitude_sum();
    if mass == 0.0 {
        return Err(Error::Degenerate(format!("{what} has zero total magnitude")));
    }
    if !mass.is_finite() {
        bail!(Numerical, "{what} has non-finite magnitude");
    }
    Ok(mass)
}

/// `Σ_{t,f} G(ref, est) / Σ_{t,f} |ref|`.
pub fn f_norm(reference: &Spectrogram, estimate: &Spectrogram) -> Result<f64> {
    reference.check_same_shape(estimate, "f_norm")?;
    let mass = reference_mass(reference, "reference")?;
    Ok(distance_sum(reference, estimate) / mass)
}

fn distance_sum(a: &Spectrogram, b: &Spectrogram) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| g_dist(*x, *y)).sum()
}

/// `F` and its gradient with respect to `estimate`.
fn f_norm_grad(reference: &Spectrogram, estimate: &Spectrogram) -> Result<(f64, Spectrogram)> {
    reference.check_same_shape(estimate, "f_norm")?;
    let mass = reference_mass(reference, "reference")?;
    let value = distance_sum(reference, estimate) / mass;
    let (frames, bins) = reference.shape();
    let grad = Spectrogram::from_fn(frames, bins, |t, f| g_dist_grad_b(reference.get(t, f), estimate.get(t, f)) / mass);
    Ok((value, grad))
}

/// Supervised loss at the reference mic. Both terms are normalized by the
/// mixture magnitude sum; the total weights them equally.
pub fn supervised_loss(
    target: &Spectrogram,
    noise: &Spectrogram,
    target_est: &Spectrogram,
    noise_est: &Spectrogram,
    mixture: &Spectrogram,
) -> Result<LossBreakdown> {
    check_shapes(&[target, noise, target_est, noise_est], mixture)?;
    let mass = reference_mass(mixture, "mixture")?;
    Ok(LossBreakdown::supervised(distance_sum(target, target_est) / mass, distance_sum(noise, noise_est) / mass))
}

pub fn supervised_loss_grad(
    target: &Spectrogram,
    noise: &Spectrogram,
    target_est: &Spectrogram,
    noise_est: &Spectrogram,
    mixture: &Spectrogram,
) -> Result<LossGrad> {
    let breakdown = supervised_loss(target, noise, target_est, noise_est, mixture)?;
    let mass = mixture.magnitude_sum();
    let (frames, bins) = mixture.shape();
    let grad_x =
        Spectrogram::from_fn(frames, bins, |t, f| g_dist_grad_b(target.get(t, f), target_est.get(t, f)) / mass);
    let grad_v = Spectrogram::from_fn(frames, bins, |t, f| g_dist_grad_b(noise.get(t, f), noise_est.get(t, f)) / mass);
    Ok(LossGrad { breakdown, grad_x, grad_v })
}

fn check_shapes(items: &[&Spectrogram], reference: &Spectrogram) -> Result<()> {
    for s in items {
        reference.check_same_shape(s, "loss inputs")?;
    }
    Ok(())
}

/// `F(Y_q, X̂_q + V̂_q)`.
pub fn mc_loss_ref(mixture: &Spectrogram, target_est: &Spectrogram, noise_est: &Spectrogram) -> Result<f64> {
    check_shapes(&[target_est, noise_est], mixture)?;
    f_norm(mixture, &target_est.add(noise_est)?)
}

fn mc_loss_ref_grad(
    mixture: &Spectrogram,
    target_est: &Spectrogram,
    noise_est: &Spectrogram,
) -> Result<(f64, Spectrogram)> {
    check_shapes(&[target_est, noise_est], mixture)?;
    f_norm_grad(mixture, &target_est.add(noise_est)?)
}

/// MC loss against an arbitrary prediction target (a non-reference mic or
/// the beamformed mixture): filters are fitted by FCP with weights derived
/// from that target.
fn filtered_mc(
    mixture: &Spectrogram,
    target_est: &Spectrogram,
    noise_est: &Spectrogram,
    cfg: &LossConfig,
    want_grad: bool,
) -> Result<(f64, Option<(Spectrogram, Spectrogram)>)> {
    check_shapes(&[target_est, noise_est], mixture)?;
    match cfg.filter_mode {
        FilterMode::Joint => {
            let ests = [target_est, noise_est];
            let proj = Projection::solve(mixture, &ests, &cfg.fcp)?;
            let pred = proj.predict(&ests)?;
            if !want_grad {
                return Ok((f_norm(mixture, &pred)?, None));
            }
            let (value, g) = f_norm_grad(mixture, &pred)?;
            let mut grads = proj.backward(mixture, &ests, &pred, &g, cfg.through_filters)?;
            let gv = grads.pop().expect("two gradients");
            let gx = grads.pop().expect("two gradients");
            Ok((value, Some((gx, gv))))
        }
        FilterMode::Independent => {
            let px = Projection::solve(mixture, &[target_est], &cfg.fcp)?;
            let pv = Projection::solve(mixture, &[noise_est], &cfg.fcp)?;
            let yx = px.predict(&[target_est])?;
            let yv = pv.predict(&[noise_est])?;
            let pred = yx.add(&yv)?;
            if !want_grad {
                return Ok((f_norm(mixture, &pred)?, None));
            }
            let (value, g) = f_norm_grad(mixture, &pred)?;
            // Each filter's normal equations involve only its own prediction.
            let gx = px.backward(mixture, &[target_est], &yx, &g, cfg.through_filters)?.pop().expect("one");
            let gv = pv.backward(mixture, &[noise_est], &yv, &g, cfg.through_filters)?.pop().expect("one");
            Ok((value, Some((gx, gv))))
        }
    }
}

/// MC loss at a non-reference microphone.
pub fn mc_loss_nonref(
    mixture: &Spectrogram,
    target_est: &Spectrogram,
    noise_est: &Spectrogram,
    cfg: &LossConfig,
) -> Result<f64> {
    Ok(filtered_mc(mixture, target_est, noise_est, cfg, false)?.0)
}

/// MC loss against the beamformed mixture (virtual microphone); same
/// contract as [`mc_loss_nonref`].
pub fn mc_loss_bf(
    beamformed: &Spectrogram,
    target_est: &Spectrogram,
    noise_est: &Spectrogram,
    cfg: &LossConfig,
) -> Result<f64> {
    mc_loss_nonref(beamformed, target_est, noise_est, cfg)
}

/// `L_MC,q + 1/(P−1)·Σ_{p≠q} L_MC,p (+ L_MC,BF)`.
pub fn total_mc_loss(
    mixture: &MultichannelSpectrogram,
    ref_mic: usize,
    beamformed: Option<&Spectrogram>,
    target_est: &Spectrogram,
    noise_est: &Spectrogram,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    Ok(total_mc_impl(mixture, ref_mic, beamformed, target_est, noise_est, cfg, false)?.breakdown)
}

pub fn total_mc_loss_grad(
    mixture: &MultichannelSpectrogram,
    ref_mic: usize,
    beamformed: Option<&Spectrogram>,
    target_est: &Spectrogram,
    noise_est: &Spectrogram,
    cfg: &LossConfig,
) -> Result<LossGrad> {
    total_mc_impl(mixture, ref_mic, beamformed, target_est, noise_est, cfg, true)
}

fn total_mc_impl(
    mixture: &MultichannelSpectrogram,
    ref_mic: usize,
    beamformed: Option<&Spectrogram>,
    target_est: &Spectrogram,
    noise_est: &Spectrogram,
    cfg: &LossConfig,
    want_grad: bool,
) -> Result<LossGrad> {
    let p = mixture.num_channels();
    if ref_mic >= p {
        bail!(InvalidInput, "reference mic {ref_mic} out of range for {p} mics");
    }
    if p < 2 && beamformed.is_none() {
        bail!(InvalidInput, "a single microphone without a beamformed target gives no mixture constraint");
    }
    let y_q = mixture.channel(ref_mic);
    let (frames, bins) = y_q.shape();
    let mut grad_x = Spectrogram::zeros(frames, bins);
    let mut grad_v = Spectrogram::zeros(frames, bins);

    let l_ref = if want_grad {
        let (v, g) = mc_loss_ref_grad(y_q, target_est, noise_est)?;
        // the reference term depends on X̂ + V̂, so both get the same gradient
        accumulate(&mut grad_x, &g, 1.0);
        accumulate(&mut grad_v, &g, 1.0);
        v
    } else {
        mc_loss_ref(y_q, target_est, noise_est)?
    };

    let nonref_weight = if p > 1 { 1.0 / (p - 1) as f64 } else { 0.0 };
    let mut nonref = Vec::with_capacity(p.saturating_sub(1));
    for m in (0..p).filter(|&m| m != ref_mic) {
        let (value, grads) = filtered_mc(mixture.channel(m), target_est, noise_est, cfg, want_grad)?;
        if let Some((gx, gv)) = grads {
            accumulate(&mut grad_x, &gx, nonref_weight);
            accumulate(&mut grad_v, &gv, nonref_weight);
        }
        nonref.push(MicLoss { mic: m, value });
    }

    let l_bf = match beamformed {
        Some(y_bf) => {
            let (value, grads) = filtered_mc(y_bf, target_est, noise_est, cfg, want_grad)?;
            if let Some((gx, gv)) = grads {
                accumulate(&mut grad_x, &gx, 1.0);
                accumulate(&mut grad_v, &gv, 1.0);
            }
            Some(value)
        }
        None => None,
    };

    Ok(LossGrad { breakdown: LossBreakdown::mixture_constraint(l_ref, nonref, l_bf), grad_x, grad_v })
}

fn accumulate(acc: &mut Spectrogram, g: &Spectrogram, weight: f64) {
    for (a, b) in acc.as_mut_slice().iter_mut().zip(g.as_slice()) {
        *a += b * weight;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit(z: Complex64) -> Spectrogram {
        Spectrogram::from_vec(1, 1, vec![z]).unwrap()
    }

    #[test]
    fn g_dist_examples() {
        let a = c(0.7, -1.3);
        assert_eq!(g_dist(a, a), 0.0);
        assert_eq!(g_dist(c(3.0, 4.0), c(0.0, 0.0)), 12.0);
        assert_eq!(g_dist(c(1.0, 0.0), c(-1.0, 0.0)), 2.0);
    }

    #[test]
    fn f_norm_examples() {
        assert_eq!(f_norm(&unit(c(2.0, 0.0)), &unit(c(1.0, 0.0))).unwrap(), 1.0);
        let s = Spectrogram::from_fn(3, 2, |t, f| c(t as f64 - 1.0, f as f64 + 0.5));
        assert_eq!(f_norm(&s, &s).unwrap(), 0.0);
        assert!(f_norm(&unit(c(0.0, 0.0)), &unit(c(1.0, 0.0))).is_err());
    }

    #[test]
    fn mc_ref_single_bin() {
        let v = mc_loss_ref(&unit(c(2.0, 0.0)), &unit(c(1.0, 0.0)), &unit(c(0.5, 0.0))).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let v = mc_loss_ref(&unit(c(2.0, 0.0)), &unit(c(2.0, 0.0)), &unit(c(0.0, 0.0))).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn supervised_decomposes() {
        let x = Spectrogram::from_fn(2, 2, |t, f| c(t as f64 + 1.0, f as f64));
        let v = Spectrogram::from_fn(2, 2, |t, f| c(-(f as f64), t as f64 * 0.5 + 0.1));
        let y = x.add(&v).unwrap();
        let zero = Spectrogram::zeros(2, 2);
        let perfect = supervised_loss(&x, &v, &x, &v, &y).unwrap();
        assert_eq!(perfect.total, 0.0);
        let b = supervised_loss(&x, &v, &x, &zero, &y).unwrap();
        assert_eq!(b.l_sup_x, 0.0);
        let expected: f64 = v.as_slice().iter().map(|z| g_dist(*z, c(0.0, 0.0))).sum::<f64>() / y.magnitude_sum();
        assert!((b.total - expected).abs() < 1e-15);
    }

    #[test]
    fn g_grad_matches_finite_difference() {
        let a = c(0.3, -0.8);
        let b = c(-0.4, 0.25);
        let g = g_dist_grad_b(a, b);
        let h = 1e-7;
        let dre = (g_dist(a, b + c(h, 0.0)) - g_dist(a, b - c(h, 0.0))) / (2.0 * h);
        let dim = (g_dist(a, b + c(0.0, h)) - g_dist(a, b - c(0.0, h))) / (2.0 * h);
        assert!((g.re - dre).abs() < 1e-7 && (g.im - dim).abs() < 1e-7);
    }

    #[test]
    fn single_mic_needs_bf() {
        let y = MultichannelSpectrogram::new(
            crate::spectral::StftConfig::with_sizes(2, 1),
            vec![Spectrogram::from_fn(3, 2, |t, _| c(t as f64 + 1.0, 0.0))],
        )
        .unwrap();
        let z = Spectrogram::zeros(3, 2);
        assert!(total_mc_loss(&y, 0, None, &z, &z, &LossConfig::default()).is_err());
    }

    fn pseudo_random(frames: usize, bins: usize, seed: u64) -> Spectrogram {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        Spectrogram::from_fn(frames, bins, |_, _| c(next(), next()))
    }

    fn check_mc_gradient(mode: FilterMode, through: bool) -> f64 {
        let (frames, bins) = (9, 3);
        let cfg = crate::spectral::StftConfig::with_sizes(4, 2);
        let y =
            MultichannelSpectrogram::new(cfg, (0..3).map(|m| pseudo_random(frames, bins, 10 + m)).collect()).unwrap();
        let bf = pseudo_random(frames, bins, 20);
        let x = pseudo_random(frames, bins, 30);
        let v = pseudo_random(frames, bins, 40);
        let lc = LossConfig { fcp: FcpConfig::new(2, 1), filter_mode: mode, through_filters: through };
        let g = total_mc_loss_grad(&y, 1, Some(&bf), &x, &v, &lc).unwrap();
        let h = 1e-6;
        let mut err: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for idx in 0..frames * bins {
            for (which, grad) in [(0, &g.grad_x), (1, &g.grad_v)] {
                for dir in [c(1.0, 0.0), c(0.0, 1.0)] {
                    let eval = |delta: f64| {
                        let mut xx = x.clone();
                        let mut vv = v.clone();
                        let tgt = if which == 0 { &mut xx } else { &mut vv };
                        tgt.as_mut_slice()[idx] += dir * delta;
                        total_mc_loss(&y, 1, Some(&bf), &xx, &vv, &lc).unwrap().total
                    };
                    let fd = (eval(h) - eval(-h)) / (2.0 * h);
                    let an = grad.as_slice()[idx];
                    let an = if dir.re == 1.0 { an.re } else { an.im };
                    err += (fd - an) * (fd - an);
                    scale += fd * fd;
                }
            }
        }
        libm::sqrt(err / scale)
    }

    #[test]
    fn mc_gradient_matches_finite_difference() {
        assert!(check_mc_gradient(FilterMode::Joint, true) < 1e-5, "{}", check_mc_gradient(FilterMode::Joint, true));
        assert!(check_mc_gradient(FilterMode::Independent, true) < 1e-5);
        // frozen filters are a different (approximate) gradient
        assert!(check_mc_gradient(FilterMode::Joint, false) > 1e-3);
    }
}
