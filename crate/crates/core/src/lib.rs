//! Numerical core for mixture-to-beamformed-mixture (M2BM) speech enhancement.
//!
//! Everything here is allocation-only `no_std` code: STFT analysis and
//! synthesis, synthetic multichannel scenes, forward convolutive prediction
//! (FCP) filter estimation, the supervised and mixture-constraint losses with
//! their gradients, MVDR beamforming, and a small training harness. File
//! formats, WAV IO and the command line live in the `m2bm` crate.
//!
//! The `std` feature (on by default) swaps the built-in radix-2 FFT for
//! `rustfft`; `parallel` spreads finite-difference gradients over rayon.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod beamform;
pub mod bench;
pub mod error;
pub mod fcp;
pub mod fft;
pub mod linalg;
pub mod losses;
pub mod math;
pub mod metrics;
pub mod model;
mod par;
pub mod scene;
pub mod spectral;
pub mod trainer;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub mod prelude {
    pub use crate::beamform::{
        apply_beamformer, derive_bf_mixture, mvdr_weights, principal_eigenvector, rtf, spatial_covariance,
        BeamformerWeights, BfMixture, Enhancer, OracleEnhancer, SpatialCovariance,
    };
    pub use crate::error::{Error, Result};
    pub use crate::fcp::{apply_filter, fcp_solve, fcp_weight, stack, FcpConfig, FcpFilter};
    pub use crate::losses::{
        f_norm, g_dist, mc_loss_bf, mc_loss_nonref, mc_loss_ref, supervised_loss, total_mc_loss, FilterMode,
        LossBreakdown, LossMode,
    };
    pub use crate::model::{InitScheme, ModelShape, ToyModel};
    pub use crate::scene::{simulate, synth_narrowband_scene, DrySource, SceneBundle, SceneSpec};
    pub use crate::spectral::{istft, stft, MultichannelSpectrogram, Spectrogram, StftConfig};
    pub use crate::trainer::{evaluate, train, EvalReport, TrainConfig, TrainMode};
    pub use crate::Complex64;
}
