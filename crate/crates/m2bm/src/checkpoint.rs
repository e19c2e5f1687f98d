//! Model checkpoints: a flat little-endian `f64` vector plus a JSON sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use m2bm_core::model::{ModelShape, ToyModel};
use m2bm_core::spectral::StftConfig;
use m2bm_core::trainer::TrainMode;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::io;

pub const FORMAT: &str = "m2bm-checkpoint-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub format: String,
    pub shape: ModelShape,
    pub stft: StftConfig,
    /// Channel count of the mixtures the model was trained on.
    pub mixture_channels: usize,
    pub mode: TrainMode,
    pub seed: u64,
    pub step: usize,
    pub num_params: usize,
    /// Parameter file name, relative to the sidecar.
    pub params: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ToyModel,
    pub sidecar: Sidecar,
}

pub fn sidecar_path(params: &Path) -> PathBuf {
    params.with_extension("json")
}

pub fn encode(params: &[f64]) -> Vec<u8> {
    params.iter().flat_map(|p| p.to_le_bytes()).collect()
}

pub fn decode(bytes: &[u8]) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(usage!("parameter file length {} is not a multiple of 8", bytes.len()));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect())
}

/// Writes `path` (parameters) and its `.json` sidecar; returns both paths.
pub fn save(path: &Path, ckpt: &Checkpoint) -> Result<[PathBuf; 2]> {
    fs::write(path, encode(ckpt.model.params())).map_err(Error::io(path))?;
    let side = sidecar_path(path);
    io::write_json(&side, &ckpt.sidecar)?;
    Ok([path.to_path_buf(), side])
}

/// Accepts either the parameter file or the sidecar.
pub fn load(path: &Path) -> Result<Checkpoint> {
    let side = if path.extension().is_some_and(|e| e == "json") { path.to_path_buf() } else { sidecar_path(path) };
    io::require_file(&side, "checkpoint sidecar")?;
    let sidecar: Sidecar = io::read_json(&side)?;
    if sidecar.format != FORMAT {
        return Err(usage!("{}: unknown checkpoint format {:?}", side.display(), sidecar.format));
    }
    let params_path = io::resolve(&io::base_dir(&side), Path::new(&sidecar.params));
    io::require_file(&params_path, "checkpoint parameters")?;
    let params = decode(&fs::read(&params_path).map_err(Error::io(&params_path))?)?;
    if params.len() != sidecar.num_params || params.len() != sidecar.shape.num_params() {
        return Err(usage!(
            "{}: {} parameters, sidecar expects {} for its shape",
            params_path.display(),
            params.len(),
            sidecar.shape.num_params()
        ));
    }
    let model = ToyModel::from_params(sidecar.shape, params)?;
    Ok(Checkpoint { model, sidecar })
}
