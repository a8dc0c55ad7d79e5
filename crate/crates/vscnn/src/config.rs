//! TOML experiment configuration.
//!
//! ```toml
//! fusion_weight_sign = "literal"   # or "corrected"
//!
//! [model]
//! frames = 40
//! classes = 40
//! predictor_layers = [[16, 1], [32, 1], [32, 2]]   # (kernels, stride)
//! channel_widths = [32, 64, 128, 256]
//!
//! [train]
//! learning_rate = 0.01
//! momentum = 0.9
//! batch_size = 32
//! seed = 0
//! epochs = { predictor = 30, channels = 50, end_to_end = 20 }
//! ```
//!
//! Every key is optional.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vscnn_core::channels::ChannelArch;
use vscnn_core::encoder::IMAGE_CHANNELS;
use vscnn_core::eval::EvalConfig;
use vscnn_core::train::{ModelConfig, StepEpochs, TrainConfig};
use vscnn_core::view_groups::{FusionSign, PredictorArch};

use crate::error::{config_error, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub fusion_weight_sign: String,
    pub model: ModelSection,
    pub train: TrainSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub frames: usize,
    pub classes: usize,
    pub predictor_layers: Vec<(usize, usize)>,
    pub channel_widths: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub epochs: EpochSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpochSection {
    pub predictor: usize,
    pub channels: usize,
    pub end_to_end: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            fusion_weight_sign: FusionSign::default().as_str().into(),
            model: ModelSection::default(),
            train: TrainSection::default(),
        }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        Self {
            frames: m.frames,
            classes: m.classes,
            predictor_layers: m.predictor.layers,
            channel_widths: m.channel.widths,
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            momentum: t.momentum,
            batch_size: t.batch_size,
            seed: t.seed,
            epochs: EpochSection::default(),
        }
    }
}

impl Default for EpochSection {
    fn default() -> Self {
        let e = StepEpochs::default();
        Self { predictor: e.predictor, channels: e.channels, end_to_end: e.end_to_end }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.eval_config()?;
        Ok(cfg)
    }

    pub fn fusion_sign(&self) -> Result<FusionSign> {
        self.fusion_weight_sign.parse().map_err(config_error)
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let m = &self.model;
        if m.frames == 0 || m.classes < 2 || m.classes > vscnn_core::skeleton::ACTION_COUNT {
            return Err(Error::invalid("model needs frames ≥ 1 and 2..=40 classes"));
        }
        if m.predictor_layers.is_empty() || m.predictor_layers.iter().any(|&(w, s)| w == 0 || s == 0) {
            return Err(Error::invalid("predictor layers need positive widths and strides"));
        }
        if m.channel_widths.is_empty() || m.channel_widths.contains(&0) {
            return Err(Error::invalid("channel widths must be positive"));
        }
        Ok(ModelConfig {
            frames: m.frames,
            classes: m.classes,
            input_channels: IMAGE_CHANNELS,
            predictor: PredictorArch { layers: m.predictor_layers.clone() },
            channel: ChannelArch { widths: m.channel_widths.clone() },
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        let cfg = TrainConfig {
            learning_rate: t.learning_rate,
            momentum: t.momentum,
            batch_size: t.batch_size,
            epochs: StepEpochs {
                predictor: t.epochs.predictor,
                channels: t.epochs.channels,
                end_to_end: t.epochs.end_to_end,
            },
            seed: t.seed,
            fusion_sign: self.fusion_sign()?,
            single_channel_mode: false,
        };
        cfg.validate().map_err(config_error)?;
        Ok(cfg)
    }

    pub fn eval_config(&self) -> Result<EvalConfig> {
        Ok(EvalConfig { model: self.model_config()?, train: self.train_config()? })
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = Config::parse("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.fusion_sign().unwrap(), FusionSign::Literal);
        let e = c.eval_config().unwrap();
        assert_eq!(e.model, ModelConfig::default());
        assert_eq!(e.train, TrainConfig::default());
    }

    #[test]
    fn partial_override() {
        let c = Config::parse(
            "fusion_weight_sign = \"corrected\"\n[model]\nclasses = 5\n[train]\nepochs = { channels = 3 }\n",
        )
        .unwrap();
        assert_eq!(c.fusion_sign().unwrap(), FusionSign::Corrected);
        assert_eq!(c.model.classes, 5);
        assert_eq!(c.train.epochs.channels, 3);
        assert_eq!(c.train.epochs.predictor, 30);
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            "fusion_weight_sign = \"both\"",
            "[train]\nlearning_rate = 0.0",
            "[train]\nepochs = { predictor = 0 }",
            "[model]\nclasses = 41",
            "[model]\nunknown = 1",
        ] {
            assert!(matches!(Config::parse(text), Err(Error::InvalidArgument(_))), "{text}");
        }
    }

    #[test]
    fn round_trip_and_hash() {
        let mut c = Config::default();
        c.train.seed = 9;
        let back = Config::parse(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_ne!(Config::default().hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
    }
}
