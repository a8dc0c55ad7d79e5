//! Subcommand implementations behind the `vscnn` binary.

use std::path::{Path, PathBuf};

use log::{info, warn};
use vscnn_core::encoder::{encode_sample, SkeletonImage};
use vscnn_core::eval::{predict_all, run_protocol, Direction, ProtocolKind, ProtocolSpec, SubjectSplit};
use vscnn_core::skeleton::{clip_sequence, Setting, SkeletonSequence, ViewDescriptor, Viewpoint};
use vscnn_core::synth::{generate_dataset, SynthSpec};
use vscnn_core::train::{
    train_channels, train_end_to_end, train_predictor, train_single_channel, train_three_steps, ModelState,
    TrainingLog,
};

use crate::config::Config;
use crate::error::{config_error, Error, Result};
use crate::manifest::{self, create_dir, entry_for, write_manifest, write_sequence_csv};
use crate::metrics::{write_confusion_csv, write_json, EvalMetrics, TrainMetrics};
use crate::{cache, checkpoint, native, render};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// File stem of a synthetic capture.
fn capture_name(seq: &SkeletonSequence, copy: usize) -> String {
    let view = match &seq.view {
        ViewDescriptor::Fixed(v) => v.to_string(),
        ViewDescriptor::Varying(_) => "orbit".into(),
    };
    let suffix = if copy > 0 { format!("_copy{copy}") } else { String::new() };
    format!("a{:02}_s{:03}_{view}{suffix}.csv", seq.action_id, seq.subject_id)
}

/// Generates a synthetic dataset into `out` and returns the manifest path.
pub fn synth(spec: &SynthSpec, out: &Path) -> Result<PathBuf> {
    spec.validate().map_err(config_error)?;
    let dir = out.join("skeletons");
    create_dir(&dir)?;
    let mut entries = Vec::new();
    let mut copies = std::collections::HashMap::new();
    for item in generate_dataset(spec)? {
        let seq = &item.sequence;
        let copy = if item.front_copy {
            let n = copies.entry((seq.action_id, seq.subject_id)).or_insert(0);
            *n += 1;
            *n
        } else {
            0
        };
        let rel = format!("skeletons/{}", capture_name(seq, copy));
        write_sequence_csv(&out.join(&rel), seq)?;
        entries.push(entry_for(seq, &rel));
    }
    let path = out.join(MANIFEST_FILE);
    write_manifest(&path, &entries)?;
    info!("wrote {} captures to {}", entries.len(), out.display());
    Ok(path)
}

pub fn encode(manifest: &Path, out: &Path, frames: usize) -> Result<usize> {
    if frames == 0 {
        return Err(Error::invalid("frame count must be positive"));
    }
    let data = manifest::load_dataset(manifest)?;
    let index = cache::write_cache(out, &data, frames)?;
    info!("encoded {} samples into {}", index.entries.len(), out.display());
    Ok(index.entries.len())
}

/// Training samples: fixed-view captures as they are, varying-view
/// captures clipped into `sections` pieces.
pub fn training_images(data: &[SkeletonSequence], frames: usize, sections: usize) -> Result<Vec<SkeletonImage>> {
    let mut out = Vec::new();
    for seq in data {
        if seq.view.is_fixed() {
            out.push(encode_sample(seq, frames)?);
        } else if seq.len() >= sections {
            for clip in clip_sequence(seq, sections)? {
                out.push(encode_sample(&clip, frames)?);
            }
        } else {
            warn!("skipping a {}-frame varying capture shorter than {sections} sections", seq.len());
        }
    }
    if out.is_empty() {
        return Err(Error::data("manifest holds no usable training samples"));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainStage {
    Predictor,
    Channels,
    EndToEnd,
    All,
    SingleChannel,
}

impl std::str::FromStr for TrainStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "predictor" => TrainStage::Predictor,
            "channels" => TrainStage::Channels,
            "e2e" => TrainStage::EndToEnd,
            "all" => TrainStage::All,
            "single-channel" => TrainStage::SingleChannel,
            other => return Err(Error::invalid(format!("unknown stage {other:?}"))),
        })
    }
}

pub struct TrainRequest<'a> {
    pub manifest: &'a Path,
    pub config: &'a Config,
    pub out: &'a Path,
    pub metrics: &'a Path,
    pub stage: TrainStage,
    pub resume: Option<&'a Path>,
    pub sections: usize,
}

pub fn train(req: &TrainRequest<'_>) -> Result<TrainMetrics> {
    let eval = req.config.eval_config()?;
    let (model_cfg, mut cfg) = (eval.model, eval.train);
    let data = manifest::load_dataset(req.manifest)?;
    let images = training_images(&data, model_cfg.frames, req.sections)?;
    info!("training stage {:?} on {} samples", req.stage, images.len());
    let start = |resume: Option<&Path>| -> Result<ModelState> {
        match resume {
            Some(p) => {
                let (m, _) = checkpoint::load(p)?;
                if m.config != model_cfg {
                    return Err(Error::invalid("resumed checkpoint architecture differs from the config"));
                }
                Ok(m)
            }
            None => Ok(ModelState::init(&model_cfg, cfg.fusion_sign, cfg.seed)),
        }
    };
    let mut log = TrainingLog::default();
    let model = match req.stage {
        TrainStage::All if req.resume.is_none() => {
            let (m, l) = train_three_steps(&images, &model_cfg, &cfg)?;
            log = l;
            m
        }
        TrainStage::SingleChannel => {
            if req.resume.is_some() {
                return Err(Error::invalid("single-channel training starts from initialization"));
            }
            cfg.single_channel_mode = true;
            let (m, l) = train_single_channel(&images, &model_cfg, &cfg)?;
            log = l;
            m
        }
        stage => {
            let mut m = start(req.resume)?;
            if matches!(stage, TrainStage::Predictor | TrainStage::All) {
                train_predictor(&mut m, &images, &cfg, &mut log)?;
            }
            if matches!(stage, TrainStage::Channels | TrainStage::All) {
                train_channels(&mut m, &images, &cfg, &mut log)?;
            }
            if matches!(stage, TrainStage::EndToEnd | TrainStage::All) {
                train_end_to_end(&mut m, &images, &cfg, &mut log)?;
            }
            m
        }
    };
    for w in &log.warnings {
        warn!("{w}");
    }
    let preds = predict_all(&model, &images)?;
    let hits = preds.iter().zip(&images).filter(|(p, x)| **p == x.label).count();
    let hash = req.config.hash();
    if let Some(dir) = req.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    checkpoint::save(req.out, &model, cfg.seed, &hash)?;
    let metrics = TrainMetrics {
        stage: model.stage.as_str().into(),
        seed: cfg.seed,
        config_hash: hash,
        samples: images.len(),
        train_accuracy: hits as f64 / images.len() as f64,
        epochs: TrainMetrics::epochs_from(&log),
        warnings: log.warnings,
    };
    write_json(req.metrics, &metrics)?;
    info!("saved {} (train accuracy {:.4})", req.out.display(), metrics.train_accuracy);
    Ok(metrics)
}

pub struct EvaluateRequest<'a> {
    pub protocol: ProtocolKind,
    pub manifest: &'a Path,
    pub config: &'a Config,
    pub out: &'a Path,
    pub sections: usize,
    pub direction: Direction,
    pub split: Option<SubjectSplit>,
}

pub fn evaluate(req: &EvaluateRequest<'_>) -> Result<EvalMetrics> {
    if req.sections == 0 {
        return Err(Error::invalid("section count must be positive"));
    }
    let cfg = req.config.eval_config()?;
    let data = manifest::load_dataset(req.manifest)?;
    let spec =
        ProtocolSpec { kind: req.protocol, n_sections: req.sections, direction: req.direction, split: req.split };
    info!("running {} on {} captures", req.protocol, data.len());
    let report = run_protocol(&data, &cfg, &spec)?;
    for w in &report.warnings {
        warn!("{w}");
    }
    let metrics = EvalMetrics::from_report(&report, &req.config.hash());
    create_dir(req.out)?;
    write_json(&req.out.join("metrics.json"), &metrics)?;
    render_outputs(&metrics, req.out)?;
    info!("{}: overall accuracy {:.4}", req.protocol, metrics.overall_accuracy);
    Ok(metrics)
}

/// Writes `confusion.csv`, `confusion.png`, `accuracy.png` and, for
/// cross-view I, `view_matrix.png`.
pub fn render_outputs(metrics: &EvalMetrics, out: &Path) -> Result<()> {
    create_dir(out)?;
    let m = metrics.confusion_matrix()?;
    write_confusion_csv(&out.join("confusion.csv"), &m)?;
    render::save_png(&render::confusion_heatmap(&m, 12), &out.join("confusion.png"))?;
    let curve: Vec<f64> = metrics.breakdown.iter().map(|b| b.accuracy).collect();
    render::save_png(&render::accuracy_plot(&curve, 480, 320), &out.join("accuracy.png"))?;
    if let Some(vm) = &metrics.view_matrix {
        render::save_png(&render::matrix_heatmap(vm, 40), &out.join("view_matrix.png"))?;
    }
    Ok(())
}

pub fn report(metrics_path: &Path, out: &Path) -> Result<EvalMetrics> {
    let metrics = crate::metrics::read_eval_metrics(metrics_path)?;
    render_outputs(&metrics, out)?;
    Ok(metrics)
}

pub struct ImportRequest<'a> {
    pub input: &'a Path,
    pub subject_id: u32,
    pub action_id: usize,
    pub view: Option<usize>,
    pub angles: Option<&'a Path>,
    pub setting: Setting,
    pub out: &'a Path,
}

/// Converts one native export into the CSV schema and appends it to
/// `out/manifest.jsonl`.
pub fn import(req: &ImportRequest<'_>) -> Result<PathBuf> {
    let view = match (req.view, req.angles) {
        (Some(i), None) => ViewDescriptor::Fixed(Viewpoint::new(i).map_err(config_error)?),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let angles = text
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| Error::data(format!("{}: bad angle {t:?}", path.display()))))
                .collect::<Result<Vec<_>>>()?;
            ViewDescriptor::Varying(angles)
        }
        _ => return Err(Error::invalid("give exactly one of a viewpoint index or an angle file")),
    };
    let seq = native::read_skeleton_file(req.input, req.subject_id, req.action_id, view, req.setting)?;
    let dir = req.out.join("skeletons");
    create_dir(&dir)?;
    let stem = req.input.file_stem().and_then(|s| s.to_str()).unwrap_or("capture");
    let rel = format!("skeletons/{stem}.csv");
    write_sequence_csv(&req.out.join(&rel), &seq)?;
    let manifest_path = req.out.join(MANIFEST_FILE);
    let mut entries =
        if manifest_path.exists() { manifest::read_manifest(&manifest_path)? } else { Vec::new() };
    entries.retain(|e| e.path != rel);
    entries.push(entry_for(&seq, &rel));
    write_manifest(&manifest_path, &entries)?;
    Ok(manifest_path)
}
