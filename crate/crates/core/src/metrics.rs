//! Waveform-domain quality metrics.

use crate::error::{bail, Result};
use crate::math;

/// Metrics are reported within `±CAP_DB`; a perfect estimate reads `+CAP_DB`.
pub const CAP_DB: f64 = 80.0;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn capped(ratio_db: f64) -> f64 {
    if ratio_db.is_nan() {
        return -CAP_DB;
    }
    ratio_db.clamp(-CAP_DB, CAP_DB)
}

fn check(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    if estimate.len() != reference.len() {
        bail!(ShapeMismatch, "estimate has {} samples, reference {}", estimate.len(), reference.len());
    }
    if estimate.iter().chain(reference).any(|v| !v.is_finite()) {
        bail!(Numerical, "non-finite samples");
    }
    let energy = dot(reference, reference);
    if energy == 0.0 {
        bail!(Degenerate, "reference signal is silent");
    }
    Ok(energy)
}

/// Scale-invariant SDR in dB.
pub fn si_sdr(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    let ref_energy = check(estimate, reference)?;
    let alpha = dot(estimate, reference) / ref_energy;
    let mut target = 0.0;
    let mut distortion = 0.0;
    for (e, r) in estimate.iter().zip(reference) {
        let s = alpha * r;
        target += s * s;
        distortion += (e - s) * (e - s);
    }
    if distortion == 0.0 {
        return Ok(if target > 0.0 { CAP_DB } else { -CAP_DB });
    }
    Ok(capped(math::db(target / distortion)))
}

/// Plain SNR `‖s‖² / ‖ŝ − s‖²` in dB.
pub fn snr(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    let ref_energy = check(estimate, reference)?;
    let err: f64 = estimate.iter().zip(reference).map(|(e, r)| (e - r) * (e - r)).sum();
    if err == 0.0 {
        return Ok(CAP_DB);
    }
    Ok(capped(math::db(ref_energy / err)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_estimate_is_capped() {
        let x = [0.5, -1.0, 0.25, 2.0];
        assert_eq!(si_sdr(&x, &x).unwrap(), CAP_DB);
        assert_eq!(snr(&x, &x).unwrap(), CAP_DB);
    }

    #[test]
    fn scale_invariance() {
        let r = [0.5, -1.0, 0.25, 2.0, 0.1];
        let e = [0.4, -0.7, 0.5, 1.8, -0.2];
        let scaled: alloc::vec::Vec<f64> = e.iter().map(|v| v * -3.7).collect();
        assert!((si_sdr(&e, &r).unwrap() - si_sdr(&scaled, &r).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn silent_reference_rejected() {
        assert!(si_sdr(&[1.0], &[0.0]).is_err());
        assert!(snr(&[1.0, 2.0], &[1.0]).is_err());
    }
}
