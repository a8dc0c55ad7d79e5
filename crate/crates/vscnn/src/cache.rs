//! Encoded-sample cache: `samples.bin` holds every `6 × 25 × T` image as
//! little-endian `f64`, `index.json` lists the samples in the same order.

use std::path::Path;

use serde::{Deserialize, Serialize};
use vscnn_core::encoder::{encode_sample, SkeletonImage, IMAGE_CHANNELS};
use vscnn_core::nn::FeatureMap;
use vscnn_core::skeleton::{SkeletonSequence, ViewDescriptor, Viewpoint, JOINT_COUNT};

use crate::error::{Error, Result};

pub const DATA_FILE: &str = "samples.bin";
pub const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub subject_id: u32,
    pub action_id: usize,
    /// Fixed viewpoint index, absent for varying views.
    pub view: Option<u8>,
    /// Sampled per-frame angles of varying views.
    pub angles: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheIndex {
    pub channels: usize,
    pub joints: usize,
    pub frames: usize,
    pub entries: Vec<CacheEntry>,
}

/// Encodes every sequence and writes the cache into `dir`.
pub fn write_cache(dir: &Path, data: &[SkeletonSequence], frames: usize) -> Result<CacheIndex> {
    crate::manifest::create_dir(dir)?;
    let mut bytes = Vec::new();
    let mut entries = Vec::with_capacity(data.len());
    for seq in data {
        let img = encode_sample(seq, frames)?;
        bytes.extend(img.pixels.data.iter().flat_map(|v| v.to_le_bytes()));
        let (view, angles) = match img.view {
            Some(ViewDescriptor::Fixed(v)) => (Some(v.index() as u8), None),
            Some(ViewDescriptor::Varying(a)) => (None, Some(a)),
            None => (None, None),
        };
        entries.push(CacheEntry { subject_id: img.subject_id, action_id: img.label, view, angles });
    }
    let index = CacheIndex { channels: IMAGE_CHANNELS, joints: JOINT_COUNT, frames, entries };
    crate::checkpoint::write_atomic(&dir.join(DATA_FILE), &bytes)?;
    let json = serde_json::to_vec_pretty(&index).map_err(|e| Error::data(e.to_string()))?;
    crate::checkpoint::write_atomic(&dir.join(INDEX_FILE), &json)?;
    Ok(index)
}

pub fn read_cache(dir: &Path) -> Result<Vec<SkeletonImage>> {
    let index_path = dir.join(INDEX_FILE);
    let text = std::fs::read(&index_path).map_err(|e| Error::io(&index_path, e))?;
    let index: CacheIndex =
        serde_json::from_slice(&text).map_err(|e| Error::data(format!("{}: {e}", index_path.display())))?;
    let data_path = dir.join(DATA_FILE);
    let bytes = std::fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let per = index.channels * index.joints * index.frames;
    if bytes.len() != 8 * per * index.entries.len() {
        return Err(Error::data(format!("{}: size does not match the index", data_path.display())));
    }
    let mut out = Vec::with_capacity(index.entries.len());
    for (e, chunk) in index.entries.iter().zip(bytes.chunks_exact(8 * per)) {
        let data = chunk.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        let view = match (e.view, &e.angles) {
            (Some(v), _) => Some(ViewDescriptor::Fixed(Viewpoint::new(v as usize)?)),
            (None, Some(a)) => Some(ViewDescriptor::Varying(a.clone())),
            (None, None) => None,
        };
        out.push(SkeletonImage {
            pixels: FeatureMap::new(index.channels, index.joints, index.frames, data)?,
            label: e.action_id,
            view,
            subject_id: e.subject_id,
        });
    }
    Ok(out)
}
