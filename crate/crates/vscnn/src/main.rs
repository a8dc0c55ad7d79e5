use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vscnn::commands::{self, EvaluateRequest, ImportRequest, TrainRequest, TrainStage};
use vscnn::config::Config;
use vscnn::Error;
use vscnn_core::eval::{Direction, ProtocolKind, SubjectSplit};
use vscnn_core::skeleton::Setting;
use vscnn_core::synth::SynthSpec;

#[derive(Parser)]
#[command(name = "vscnn", version, about = "View-guided skeleton CNN for arbitrary-view action recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-view dataset.
    Synth {
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        subjects: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Gaussian joint noise in meters.
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
        /// Peak joint dropout probability.
        #[arg(long, default_value_t = 0.3)]
        occlusion: f64,
        #[arg(long, default_value_t = 200)]
        frames_fixed: usize,
        #[arg(long, default_value_t = 2000)]
        frames_orbit: usize,
        /// Also write the simultaneous front-view copy of every side capture.
        #[arg(long)]
        front_copies: bool,
    },
    /// Encode every manifest entry into a binary sample cache.
    Encode {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40)]
        frames: usize,
    },
    /// Train a model and write a checkpoint.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// predictor | channels | e2e | all | single-channel
        #[arg(long, default_value = "all")]
        stage: TrainStage,
        /// Continue from an existing checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Training metrics path (default: metrics.json beside the checkpoint).
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Sections per varying-view capture.
        #[arg(long, default_value_t = 10)]
        sections: usize,
    },
    /// Run an evaluation protocol.
    Evaluate {
        /// cross-subject | cross-view-1 | cross-view-2 | arbitrary-1 | arbitrary-2
        #[arg(long)]
        protocol: ProtocolKind,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        sections: usize,
        #[arg(long, default_value = "a")]
        direction: Direction,
        /// released | first-half (default: first-half for synthetic data)
        #[arg(long)]
        split: Option<String>,
    },
    /// Re-render tables and images from an evaluation metrics.json.
    Report {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a Kinect `.skeleton` export and add it to a manifest.
    Import {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        subject: u32,
        #[arg(long)]
        action: usize,
        /// Fixed viewpoint index 0-7.
        #[arg(long)]
        view: Option<usize>,
        /// Whitespace-separated per-frame angles for a varying view.
        #[arg(long)]
        angles: Option<PathBuf>,
        #[arg(long, default_value = "A")]
        setting: Setting,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&PathBuf>) -> vscnn::Result<Config> {
    path.map_or_else(|| Ok(Config::default()), |p| Config::load(p))
}

fn run(cli: Cli) -> vscnn::Result<()> {
    match cli.command {
        Command::Synth { classes, subjects, out, seed, noise, occlusion, frames_fixed, frames_orbit, front_copies } => {
            let spec = SynthSpec {
                n_classes: classes,
                subjects_per_class: subjects,
                frames_fixed,
                frames_orbit,
                noise_std: noise,
                occlusion_rate: occlusion,
                seed,
                synchronous_front: front_copies,
                ..SynthSpec::default()
            };
            let manifest = commands::synth(&spec, &out)?;
            println!("{}", manifest.display());
        }
        Command::Encode { manifest, out, frames } => {
            let n = commands::encode(&manifest, &out, frames)?;
            println!("encoded {n} samples");
        }
        Command::Train { manifest, config, out, stage, resume, metrics, sections } => {
            let config = load_config(config.as_ref())?;
            let metrics = metrics.unwrap_or_else(|| out.with_file_name("metrics.json"));
            let m = commands::train(&TrainRequest {
                manifest: &manifest,
                config: &config,
                out: &out,
                metrics: &metrics,
                stage,
                resume: resume.as_deref(),
                sections,
            })?;
            println!("stage {} train accuracy {:.4}", m.stage, m.train_accuracy);
        }
        Command::Evaluate { protocol, manifest, config, out, sections, direction, split } => {
            let config = load_config(config.as_ref())?;
            let split = match split.as_deref() {
                None => None,
                Some("released") => Some(SubjectSplit::Released),
                Some("first-half") => Some(SubjectSplit::FirstHalf),
                Some(other) => return Err(Error::InvalidArgument(format!("unknown split {other:?}"))),
            };
            let m = commands::evaluate(&EvaluateRequest {
                protocol,
                manifest: &manifest,
                config: &config,
                out: &out,
                sections,
                direction,
                split,
            })?;
            println!("{} overall accuracy {:.4} (mean {:.4})", m.protocol, m.overall_accuracy, m.mean_accuracy);
            for b in &m.breakdown {
                println!("  {:>10} {:.4} ({}/{})", b.label, b.accuracy, b.correct, b.total);
            }
        }
        Command::Report { metrics, out } => {
            let m = commands::report(&metrics, &out)?;
            println!("rendered {} report into {}", m.protocol, out.display());
        }
        Command::Import { input, subject, action, view, angles, setting, out } => {
            let manifest = commands::import(&ImportRequest {
                input: &input,
                subject_id: subject,
                action_id: action,
                view,
                angles: angles.as_deref(),
                setting,
                out: &out,
            })?;
            println!("{}", manifest.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
