//! Binary checkpoint: `VSCNNCKP` magic, little-endian `u64` header length,
//! JSON header, then every parameter block as little-endian `f64` in header
//! order. Writes go to a temporary file that is renamed into place.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vscnn_core::channels::ChannelArch;
use vscnn_core::encoder::IMAGE_CHANNELS;
use vscnn_core::nn::Parameters;
use vscnn_core::train::{ModelConfig, ModelState, Stage};
use vscnn_core::view_groups::{FusionSign, FusionWeights, PredictorArch};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"VSCNNCKP";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub version: u32,
    pub stage: String,
    pub seed: u64,
    pub config_hash: String,
    pub fusion_weight_sign: String,
    pub pinned_alpha: Option<[f64; 4]>,
    pub frames: usize,
    pub classes: usize,
    pub input_channels: usize,
    pub predictor_layers: Vec<(usize, usize)>,
    pub channel_widths: Vec<usize>,
    pub blocks: Vec<BlockInfo>,
}

impl Header {
    fn model_config(&self) -> ModelConfig {
        ModelConfig {
            frames: self.frames,
            classes: self.classes,
            input_channels: self.input_channels,
            predictor: PredictorArch { layers: self.predictor_layers.clone() },
            channel: ChannelArch { widths: self.channel_widths.clone() },
        }
    }
}

pub fn encode(model: &ModelState, seed: u64, config_hash: &str) -> Vec<u8> {
    let blocks = model.blocks();
    let c = &model.config;
    let header = Header {
        version: VERSION,
        stage: model.stage.as_str().into(),
        seed,
        config_hash: config_hash.into(),
        fusion_weight_sign: model.fusion_sign.as_str().into(),
        pinned_alpha: model.pinned_alpha.map(|a| a.0),
        frames: c.frames,
        classes: c.classes,
        input_channels: c.input_channels,
        predictor_layers: c.predictor.layers.clone(),
        channel_widths: c.channel.widths.clone(),
        blocks: blocks.iter().map(|b| BlockInfo { name: b.name.clone(), shape: b.shape.clone() }).collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + json.len() + 8 * model.parameter_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for b in &blocks {
        for v in b.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<(ModelState, Header)> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::data("not a checkpoint file"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let json = bytes.get(16..16 + len).ok_or_else(|| Error::data("truncated checkpoint header"))?;
    let header: Header = serde_json::from_slice(json).map_err(|e| Error::data(format!("checkpoint header: {e}")))?;
    if header.version != VERSION {
        return Err(Error::data(format!("unsupported checkpoint version {}", header.version)));
    }
    if header.input_channels != IMAGE_CHANNELS {
        return Err(Error::data("checkpoint input channel count mismatch"));
    }
    let sign: FusionSign = header.fusion_weight_sign.parse()?;
    let mut model = ModelState::init(&header.model_config(), sign, 0);
    let expected: Vec<BlockInfo> =
        model.blocks().iter().map(|b| BlockInfo { name: b.name.clone(), shape: b.shape.clone() }).collect();
    if expected != header.blocks {
        return Err(Error::data("checkpoint blocks do not match the declared architecture"));
    }
    let mut data = &bytes[16 + len..];
    if data.len() != 8 * model.parameter_count() {
        return Err(Error::data(format!("checkpoint holds {} bytes of parameters, expected {}", data.len(), 8 * model.parameter_count())));
    }
    for block in model.blocks_mut() {
        for v in block.iter_mut() {
            *v = f64::from_le_bytes(data[..8].try_into().unwrap());
            data = &data[8..];
        }
    }
    model.stage = Stage::parse(&header.stage)?;
    model.pinned_alpha = header.pinned_alpha.map(FusionWeights);
    Ok((model, header))
}

/// Atomically writes `bytes` to `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn save(path: &Path, model: &ModelState, seed: u64, config_hash: &str) -> Result<()> {
    write_atomic(path, &encode(model, seed, config_hash))
}

pub fn load(path: &Path) -> Result<(ModelState, Header)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}
