use m2bm_core::beamform::{
    apply_beamformer, derive_bf_mixture, mvdr_vector, mvdr_weights, principal_eigenvector, rtf, spatial_covariance,
    OracleEnhancer, SpatialCovariance, DEFAULT_MVDR_LOADING,
};
use m2bm_core::linalg::{dot, CMatrix};
use m2bm_core::scene::{random_array_firs, simulate, DrySource, SceneSpec};
use m2bm_core::spectral::{MultichannelSpectrogram, Spectrogram, StftConfig};
use m2bm_core::Complex64;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn crandn(rng: &mut ChaCha8Rng) -> Complex64 {
    c(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize, ridge: f64) -> CMatrix {
    let mut m = CMatrix::zeros(n);
    for _ in 0..rank {
        let v: Vec<Complex64> = (0..n).map(|_| crandn(rng)).collect();
        m.add_outer(&v, 1.0);
    }
    m.add_diagonal(ridge);
    m
}

fn to_nalgebra(m: &CMatrix) -> DMatrix<Complex64> {
    let n = m.dim();
    DMatrix::from_fn(n, n, |i, j| m[(i, j)])
}

#[test]
fn principal_eigenvector_matches_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [2usize, 3, 4, 6, 8] {
        let phi = random_psd(&mut rng, n, n, 0.01);
        let ours = principal_eigenvector(&phi).unwrap();
        let eig = SymmetricEigen::new(to_nalgebra(&phi));
        let (imax, vmax) =
            eig.eigenvalues.iter().enumerate().fold((0, f64::MIN), |b, (i, v)| if *v > b.1 { (i, *v) } else { b });
        assert!((ours.value - vmax).abs() < 1e-9 * vmax);
        let theirs: Vec<Complex64> = eig.eigenvectors.column(imax).iter().copied().collect();
        assert!((dot(&ours.vector, &theirs).norm() - 1.0).abs() < 1e-9);
        assert!(!ours.degenerate);
    }
}

#[test]
fn distortionless_and_optimal_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..100 {
        let n = 2 + case % 7;
        let phi_v = random_psd(&mut rng, n, n + 1, 0.05);
        let cvec: Vec<Complex64> = (0..n).map(|_| crandn(&mut rng)).collect();
        let w = mvdr_vector(&phi_v, &cvec, 0.0).unwrap();
        assert!((dot(&w, &cvec) - c(1.0, 0.0)).norm() < 1e-8, "case {case}");
        let base = phi_v.quadratic_form(&w);
        let cc = dot(&cvec, &cvec).re;
        for _ in 0..5 {
            let raw: Vec<Complex64> = (0..n).map(|_| crandn(&mut rng)).collect();
            let proj = dot(&cvec, &raw) / cc;
            let mut p: Vec<Complex64> = raw.iter().zip(&cvec).map(|(r, ci)| r - ci * proj).collect();
            let norm = p.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            p.iter_mut().for_each(|z| *z /= norm);
            assert!(dot(&p, &cvec).norm() < 1e-12);
            for eps in [1e-3, -1e-3] {
                let moved: Vec<Complex64> = w.iter().zip(&p).map(|(a, b)| a + b * eps).collect();
                assert!(phi_v.quadratic_form(&moved) >= base - 1e-12 * base.abs(), "case {case}");
            }
        }
    }
}

#[test]
fn identity_noise_gives_matched_filter() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 2..6 {
        let cvec: Vec<Complex64> = (0..n).map(|_| crandn(&mut rng)).collect();
        let cc = dot(&cvec, &cvec).re;
        let w = mvdr_vector(&CMatrix::identity(n), &cvec, DEFAULT_MVDR_LOADING).unwrap();
        for (wi, ci) in w.iter().zip(&cvec) {
            assert!((wi - ci / cc).norm() < 1e-10);
        }
    }
}

#[test]
fn covariance_scale_leaves_weights_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mats: Vec<CMatrix> = (0..5).map(|_| random_psd(&mut rng, 4, 4, 0.1)).collect();
    let phi = SpatialCovariance::from_matrices(mats).unwrap();
    let rtfs: Vec<Vec<Complex64>> = (0..5)
        .map(|_| {
            let mut v: Vec<Complex64> = (0..4).map(|_| crandn(&mut rng)).collect();
            v[0] = c(1.0, 0.0);
            v
        })
        .collect();
    let a = mvdr_weights(&phi, &rtfs, 0, DEFAULT_MVDR_LOADING).unwrap();
    let b = mvdr_weights(&phi.scaled(37.5), &rtfs, 0, DEFAULT_MVDR_LOADING).unwrap();
    for (wa, wb) in a.weights.iter().zip(&b.weights) {
        for (x, y) in wa.iter().zip(wb) {
            assert!((x - y).norm() < 1e-10);
        }
    }
    assert!(a.distortionless_residual() < 1e-8);
}

#[test]
fn eigenvector_phase_does_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let phi_v = random_psd(&mut rng, 4, 4, 0.1);
    let r: Vec<Complex64> = (0..4).map(|_| crandn(&mut rng)).collect();
    let base = mvdr_vector(&phi_v, &rtf(&r, 2).unwrap(), DEFAULT_MVDR_LOADING).unwrap();
    for theta in [0.3, 1.9, -2.7] {
        let rot: Vec<Complex64> = r.iter().map(|z| z * Complex64::from_polar(1.0, theta)).collect();
        let w = mvdr_vector(&phi_v, &rtf(&rot, 2).unwrap(), DEFAULT_MVDR_LOADING).unwrap();
        for (a, b) in w.iter().zip(&base) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}

#[test]
fn rank_one_target_passes_undistorted() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (frames, bins, mics, q) = (40, 6, 4, 1);
    let steer: Vec<Vec<Complex64>> =
        (0..bins).map(|_| (0..mics).map(|m| if m == q { c(1.0, 0.0) } else { crandn(&mut rng) }).collect()).collect();
    let s = Spectrogram::from_fn(frames, bins, |_, _| crandn(&mut rng));
    let channels = (0..mics).map(|m| Spectrogram::from_fn(frames, bins, |t, f| steer[f][m] * s.get(t, f))).collect();
    let cfg = StftConfig::with_sizes(10, 5);
    let x = MultichannelSpectrogram::new(cfg, channels).unwrap();
    let v = MultichannelSpectrogram::new(
        cfg,
        (0..mics).map(|_| Spectrogram::from_fn(frames, bins, |_, _| crandn(&mut rng))).collect(),
    )
    .unwrap();
    let phi_x = spatial_covariance(&x).unwrap();
    let phi_v = spatial_covariance(&v).unwrap();
    let rtfs: Vec<Vec<Complex64>> =
        (0..bins).map(|f| rtf(&principal_eigenvector(phi_x.at(f)).unwrap().vector, q).unwrap()).collect();
    for f in 0..bins {
        for m in 0..mics {
            assert!((rtfs[f][m] - steer[f][m]).norm() < 1e-8);
        }
    }
    let w = mvdr_weights(&phi_v, &rtfs, q, DEFAULT_MVDR_LOADING).unwrap();
    let out = apply_beamformer(&w, &x).unwrap();
    for (a, b) in out.as_slice().iter().zip(x.channel(q).as_slice()) {
        assert!((a - b).norm() < 1e-8);
    }
}

fn four_mic_scene(seed: u64) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise_count = 1 + (seed % 2) as usize;
    SceneSpec {
        num_mics: 4,
        num_samples: 8000,
        target_firs: random_array_firs(rng.random(), 4, 16, 6),
        noise_firs: (0..noise_count).map(|_| random_array_firs(rng.random(), 4, 16, 6)).collect(),
        target_source: DrySource::ToneComplex {
            f0: 100.0 + 150.0 * rng.random::<f64>(),
            harmonics: 15,
            syllable_rate: 4.0,
        },
        noise_sources: (0..noise_count).map(|_| DrySource::Noise { pole: 0.6 * rng.random::<f64>() }).collect(),
        snr_db: Some(0.0),
        ref_mic: 0,
        seed,
        stft: StftConfig::default(),
    }
}

#[test]
fn oracle_beamformer_improves_snr() {
    let subset = [0usize, 1, 2, 3];
    let mut wins = 0;
    for seed in 0..20 {
        let b = simulate(&four_mic_scene(seed)).unwrap();
        let oracle = OracleEnhancer { target: &b.target, noise: &b.noise };
        let bf = derive_bf_mixture(&b.mixture, &oracle, &subset, 0, DEFAULT_MVDR_LOADING).unwrap();
        assert!(bf.weights.distortionless_residual() <= 1e-8);
        let xo = apply_beamformer(&bf.weights, &b.target).unwrap().two_sided_energy();
        let vo = apply_beamformer(&bf.weights, &b.noise).unwrap().two_sided_energy();
        let bf_snr = 10.0 * (xo / vo).log10();
        let best = (0..4)
            .map(|m| 10.0 * (b.target.channel(m).two_sided_energy() / b.noise.channel(m).two_sided_energy()).log10())
            .fold(f64::MIN, f64::max);
        if bf_snr >= best {
            wins += 1;
        }
    }
    assert!(wins >= 19, "{wins}/20");
}

#[test]
fn subset_checks() {
    let b = simulate(&four_mic_scene(0)).unwrap();
    let oracle = OracleEnhancer { target: &b.target, noise: &b.noise };
    assert!(derive_bf_mixture(&b.mixture, &oracle, &[0], 0, DEFAULT_MVDR_LOADING).is_err());
    assert!(derive_bf_mixture(&b.mixture, &oracle, &[1, 2], 0, DEFAULT_MVDR_LOADING).is_err());
    assert!(derive_bf_mixture(&b.mixture, &oracle, &[0, 0], 0, DEFAULT_MVDR_LOADING).is_err());
    let a = derive_bf_mixture(&b.mixture, &oracle, &[0, 2, 3], 0, DEFAULT_MVDR_LOADING).unwrap();
    let again = derive_bf_mixture(&b.mixture, &oracle, &[0, 2, 3], 0, DEFAULT_MVDR_LOADING).unwrap();
    assert_eq!(a, again);
}
