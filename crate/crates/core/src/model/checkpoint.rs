//! Safetensors checkpoints: every parameter stored as `subnet.path` in
//! 32-bit floats, with a JSON header echoing the configuration.

use std::collections::HashMap;
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use safetensors::SafeTensors;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ModelConfig;
use super::dmf::{DmfModel, Subnet};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "dmfnet-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Metadata stored alongside the tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub model: ModelConfig,
    pub config_hash: String,
    pub seed: u64,
    pub frozen: Vec<Subnet>,
    /// Last completed training stage, if any.
    pub stage: Option<String>,
    pub step: usize,
    /// Free-form echo of the full run configuration.
    pub config_echo: serde_json::Value,
}

/// SHA-256 of the canonical JSON form of the model configuration.
pub fn config_hash(cfg: &ModelConfig) -> Result<String> {
    let json = serde_json::to_vec(cfg)?;
    Ok(format!("{:x}", Sha256::digest(&json)))
}

impl CheckpointHeader {
    pub fn for_model(model: &DmfModel) -> Result<Self> {
        Ok(Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            model: model.config().clone(),
            config_hash: config_hash(model.config())?,
            seed: model.seed(),
            frozen: model.frozen(),
            stage: None,
            step: 0,
            config_echo: serde_json::Value::Null,
        })
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &DmfModel, header: &CheckpointHeader) -> Result<()> {
    let mut tensors: Vec<(String, Tensor)> = Vec::new();
    for s in Subnet::ALL {
        for (name, var) in model.store(s).entries() {
            tensors.push((format!("{s}.{name}"), var.as_tensor().to_dtype(DType::F32)?));
        }
    }
    let mut meta = HashMap::new();
    meta.insert("header".to_string(), serde_json::to_string(header)?);
    safetensors::serialize_to_file(tensors, Some(meta), path.as_ref())?;
    Ok(())
}

fn parse_header(bytes: &[u8]) -> Result<CheckpointHeader> {
    let (_, meta) = SafeTensors::read_metadata(bytes)?;
    let raw = meta
        .metadata()
        .as_ref()
        .and_then(|m| m.get("header"))
        .ok_or_else(|| Error::Checkpoint("missing header metadata".into()))?;
    let header: CheckpointHeader = serde_json::from_str(raw)?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(Error::Checkpoint(format!("unknown format `{}`", header.format)));
    }
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {}",
            header.version
        )));
    }
    Ok(header)
}

pub fn read_checkpoint_header(path: impl AsRef<Path>) -> Result<CheckpointHeader> {
    parse_header(&std::fs::read(path)?)
}

/// Builds a model for `expected` and fills it from `path`. Fails if the
/// checkpoint was written for a different model configuration.
pub fn load_checkpoint(
    path: impl AsRef<Path>,
    expected: &ModelConfig,
    dtype: DType,
) -> Result<(DmfModel, CheckpointHeader)> {
    let bytes = std::fs::read(path)?;
    let header = parse_header(&bytes)?;
    let want = config_hash(expected)?;
    if header.config_hash != want {
        return Err(Error::Checkpoint(format!(
            "config hash mismatch: checkpoint {}, expected {want}",
            header.config_hash
        )));
    }
    let mut model = DmfModel::new(expected, header.seed, dtype)?;
    let mut tensors = candle_core::safetensors::load_buffer(&bytes, &Device::Cpu)?;
    for s in Subnet::ALL {
        model
            .store(s)
            .load_with(|name| tensors.remove(&format!("{s}.{name}")))?;
    }
    if let Some(extra) = tensors.keys().next() {
        return Err(Error::Checkpoint(format!("unexpected tensor `{extra}`")));
    }
    model.freeze(&header.frozen);
    Ok((model, header))
}

/// Loads a checkpoint using the model configuration stored inside it.
pub fn load_checkpoint_self_described(path: impl AsRef<Path>, dtype: DType) -> Result<(DmfModel, CheckpointHeader)> {
    let header = read_checkpoint_header(&path)?;
    load_checkpoint(path, &header.model, dtype)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_restores_weights_and_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.safetensors");
        let cfg = ModelConfig::tiny();
        let mut model = DmfModel::new(&cfg, 7, DType::F32).unwrap();
        model.freeze(&[Subnet::Dn]);
        let header = CheckpointHeader::for_model(&model).unwrap();
        save_checkpoint(&path, &model, &header).unwrap();
        let (loaded, h) = load_checkpoint(&path, &cfg, DType::F32).unwrap();
        assert_eq!(h, header);
        assert!(loaded.is_frozen(Subnet::Dn));
        for s in Subnet::ALL {
            assert_eq!(loaded.fingerprint(s).unwrap(), model.fingerprint(s).unwrap());
        }
    }

    #[test]
    fn refuses_other_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.safetensors");
        let model = DmfModel::new(&ModelConfig::tiny(), 1, DType::F32).unwrap();
        save_checkpoint(&path, &model, &CheckpointHeader::for_model(&model).unwrap()).unwrap();
        let mut other = ModelConfig::tiny();
        other.filter_taps = 3;
        let err = load_checkpoint(&path, &other, DType::F32).unwrap_err();
        assert!(err.to_string().contains("hash mismatch"), "{err}");
        assert!(load_checkpoint_self_described(&path, DType::F32).is_ok());
    }
}
