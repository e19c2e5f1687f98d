use std::f64::consts::PI;
use std::time::Instant;

use m2bm_core::fft::{Radix2, RealFft};
use m2bm_core::spectral::{istft, stft, StftConfig, StftEngine};
use m2bm_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

#[test]
fn round_trip_one_second() {
    let cfg = StftConfig::default();
    for seed in 0..4 {
        let x = noise(seed, 16000);
        let start = Instant::now();
        let spec = stft(std::slice::from_ref(&x), &cfg).unwrap();
        let y = istft(&spec, &cfg, x.len()).unwrap().remove(0);
        let elapsed = start.elapsed().as_secs_f64();
        assert!(rel_err(&y, &x) <= 1e-6, "seed {seed}: {}", rel_err(&y, &x));
        assert!(elapsed < 1.0);
    }
}

#[test]
fn round_trip_odd_lengths_and_sizes() {
    for (win, hop, len) in [(64, 16, 1001), (32, 8, 37), (512, 256, 3000), (16, 4, 4)] {
        let cfg = StftConfig::with_sizes(win, hop);
        let x = noise(len as u64, len);
        let spec = stft(std::slice::from_ref(&x), &cfg).unwrap();
        assert_eq!(spec.frames(), (len + win - hop).div_ceil(hop));
        let y = istft(&spec, &cfg, len).unwrap().remove(0);
        assert!(rel_err(&y, &x) <= 1e-10, "{win}/{hop}/{len}");
    }
}

#[test]
fn matches_direct_dft_of_windowed_frames() {
    let cfg = StftConfig::with_sizes(32, 8);
    let x = noise(3, 200);
    let spec = StftEngine::new(cfg).unwrap().analyze(&x);
    let n = 32usize;
    let pad = n - 8;
    for t in [0usize, 3, spec.frames() - 1] {
        for k in [0usize, 1, 7, 16] {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..n {
                let pos = (t * 8 + m) as isize - pad as isize;
                let sample = if pos >= 0 && (pos as usize) < x.len() { x[pos as usize] } else { 0.0 };
                let w = (0.5 - 0.5 * (2.0 * PI * m as f64 / n as f64).cos()).sqrt();
                acc += Complex64::from_polar(sample * w, -2.0 * PI * (k * m) as f64 / n as f64);
            }
            assert!((spec.get(t, k) - acc).norm() < 1e-10);
        }
    }
}

#[test]
fn linearity() {
    let cfg = StftConfig::with_sizes(64, 16);
    let e = StftEngine::new(cfg).unwrap();
    let a = noise(1, 500);
    let b = noise(2, 500);
    let (alpha, beta) = (0.7, -2.3);
    let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
    let sa = e.analyze(&a);
    let sb = e.analyze(&b);
    let sm = e.analyze(&mix);
    for i in 0..sm.as_slice().len() {
        let expect = sa.as_slice()[i] * alpha + sb.as_slice()[i] * beta;
        assert!((sm.as_slice()[i] - expect).norm() < 1e-10);
    }
}

#[test]
fn energy_scales_with_overlap() {
    // sqrt-Hann at 75% overlap: squared windows sum to 2 at every sample, so
    // the two-sided STFT energy is 2·N·Σx².
    let cfg = StftConfig::with_sizes(64, 16);
    let x = noise(9, 1000);
    let spec = StftEngine::new(cfg).unwrap().analyze(&x);
    let ex: f64 = x.iter().map(|v| v * v).sum();
    let expect = 2.0 * 64.0 * ex;
    assert!((spec.two_sided_energy() - expect).abs() / expect < 1e-10);
}

#[test]
fn sinusoid_peaks_at_its_bin() {
    let cfg = StftConfig::default();
    let k0 = 40usize;
    let f = cfg.bin_frequency(k0);
    assert!((f - 1250.0).abs() < 1e-9);
    let x: Vec<f64> = (0..8000).map(|n| (2.0 * PI * f * n as f64 / 16000.0).sin()).collect();
    let spec = StftEngine::new(cfg).unwrap().analyze(&x);
    let t = spec.frames() / 2;
    let frame = spec.frame(t);
    let peak = (0..frame.len()).max_by(|&a, &b| frame[a].norm().total_cmp(&frame[b].norm())).unwrap();
    assert_eq!(peak, k0);
}

#[test]
fn single_atom_synthesizes_windowed_cosine() {
    let cfg = StftConfig::with_sizes(32, 8);
    let e = StftEngine::new(cfg).unwrap();
    let frames = 9;
    let mut spec = m2bm_core::spectral::Spectrogram::zeros(frames, cfg.bins());
    spec.set(4, 3, Complex64::new(1.0, 0.0));
    let len = cfg.max_len_for(frames);
    let y = e.synthesize(&spec, len).unwrap();
    // the atom lands in samples [4·hop − pad, 4·hop − pad + win)
    let start = 4 * 8 - (32 - 8);
    for (i, v) in y.iter().enumerate() {
        if i < start || i >= start + 32 {
            assert!(v.abs() < 1e-12, "sample {i} = {v}");
        }
    }
    assert!(y[start + 1..start + 31].iter().any(|v| v.abs() > 1e-3));
}

#[test]
fn radix2_matches_real_fft() {
    for size in [8usize, 64, 512] {
        let r2 = Radix2::new(size).unwrap();
        let rf = RealFft::new(size).unwrap();
        let x = noise(size as u64, size);
        let mut buf: Vec<Complex64> = x.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        r2.process(&mut buf, false);
        let mut out = vec![Complex64::new(0.0, 0.0); rf.bins()];
        rf.forward(&x, &mut out);
        for k in 0..rf.bins() {
            assert!((buf[k] - out[k]).norm() < 1e-9 * size as f64);
        }
        r2.process(&mut buf, true);
        for (a, b) in buf.iter().zip(&x) {
            assert!((a.re / size as f64 - b).abs() < 1e-12);
        }
    }
}

#[test]
fn rejects_bad_configs() {
    assert!(StftConfig::with_sizes(64, 48).validate().is_err());
    assert!(StftConfig::with_sizes(64, 64).validate().is_err());
    let cfg = StftConfig::with_sizes(32, 8);
    let spec = stft(&[noise(0, 100)], &cfg).unwrap();
    assert!(istft(&spec, &cfg, cfg.max_len_for(spec.frames()) + 1).is_err());
}
