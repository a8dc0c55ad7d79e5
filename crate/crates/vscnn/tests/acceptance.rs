//! Acceptance criteria. Each criterion prints one `PASS`/`FAIL` line; the
//! process exits non-zero if any fails.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vscnn_core::channels::ChannelArch;
use vscnn_core::encoder::{encode_sample, SkeletonImage};
use vscnn_core::eval::{
    group_accuracy, run_arbitrary, run_cross_subject, section_angle_range, split_cross_subject, EvalConfig,
    SubjectSplit, Variant, CROSS_SUBJECT_TRAIN_IDS,
};
use vscnn_core::nn::{FeatureMap, Parameters};
use vscnn_core::skeleton::{
    clip_sequence, Setting, SkeletonFrame, SkeletonSequence, ViewDescriptor, Viewpoint, JOINT_COUNT,
};
use vscnn_core::synth::{generate_action, generate_dataset, rotate_vertical, world_to_camera, CameraPath, CameraPose, SynthSpec};
use vscnn_core::train::{
    channel_loss_and_grad, end_to_end_loss_and_grad, predictor_loss_and_grad, train_predictor, train_single_channel,
    ModelConfig, ModelState, StepEpochs, TrainConfig, TrainingLog,
};
use vscnn_core::view_groups::{
    fusion_weights, group_membership, FusionSign, FusionWeights, GroupScore, PredictorArch, ViewGroup,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- 1

fn fusion_formula() -> Outcome {
    let start = Instant::now();
    let uniform = fusion_weights(&GroupScore([0.0; 4]), FusionSign::Literal);
    for a in uniform.0 {
        ensure((a - 0.25).abs() <= 1e-9, format!("z = 0 gives {:?}", uniform.0))?;
    }
    let e = (-1.0f64).exp();
    let expected = [e / (e + 3.0), 1.0 / (e + 3.0), 1.0 / (e + 3.0), 1.0 / (e + 3.0)];
    let got = fusion_weights(&GroupScore([1.0, 0.0, 0.0, 0.0]), FusionSign::Literal);
    for (g, x) in got.0.iter().zip(expected) {
        ensure((g - x).abs() <= 1e-4, format!("z = e1 gives {:?}, expected {expected:?}", got.0))?;
    }
    for (g, x) in got.0.iter().zip([0.1092, 0.2969, 0.2969, 0.2969]) {
        ensure((g - x).abs() <= 1e-4, format!("z = e1 gives {:?}", got.0))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("alpha(e1) = ({:.4}, {:.4}, {:.4}, {:.4})", got.0[0], got.0[1], got.0[2], got.0[3]))
}

// ---------------------------------------------------------------- 2

fn mini_config() -> ModelConfig {
    ModelConfig {
        frames: 4,
        classes: 2,
        input_channels: 6,
        predictor: PredictorArch { layers: vec![(3, 1), (4, 2)] },
        channel: ChannelArch { widths: vec![3, 4] },
    }
}

fn mini_image(rng: &mut ChaCha8Rng) -> SkeletonImage {
    SkeletonImage {
        pixels: FeatureMap::new(6, 4, 4, (0..96).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap(),
        label: rng.random_range(0..2),
        view: Some(ViewDescriptor::Fixed(Viewpoint::new(rng.random_range(0..8)).unwrap())),
        subject_id: 1,
    }
}

fn random_model(sign: FusionSign, draw: u64, rng: &mut ChaCha8Rng) -> ModelState {
    let mut model = ModelState::init(&mini_config(), sign, draw);
    for b in model.blocks_mut() {
        b.iter_mut().for_each(|v| *v += rng.random_range(-0.1..0.1));
    }
    model
}

fn flat<P: Parameters>(p: &P) -> Vec<f64> {
    p.blocks().iter().flat_map(|b| b.data.iter().copied()).collect()
}

fn set_param<P: Parameters>(p: &mut P, mut index: usize, value: f64) {
    for b in p.blocks_mut() {
        if index < b.len() {
            b[index] = value;
            return;
        }
        index -= b.len();
    }
}

/// Norm-wise relative error between analytic and central-difference gradients.
fn gradient_error<P: Parameters + Clone>(params: &P, analytic: &P, loss: impl Fn(&P) -> f64) -> f64 {
    const H: f64 = 1e-6;
    let a = flat(analytic);
    let mut probe = params.clone();
    let (mut diff, mut na, mut nn) = (0.0f64, 0.0f64, 0.0f64);
    for (i, v) in flat(params).into_iter().enumerate() {
        set_param(&mut probe, i, v + H);
        let up = loss(&probe);
        set_param(&mut probe, i, v - H);
        let down = loss(&probe);
        set_param(&mut probe, i, v);
        let n = (up - down) / (2.0 * H);
        diff += (a[i] - n).powi(2);
        na += a[i] * a[i];
        nn += n * n;
    }
    diff.sqrt() / na.sqrt().max(nn.sqrt()).max(1e-12)
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let draws = 100u64;
    let mut worst = [0.0f64; 3];
    for draw in 0..draws {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + draw);
        let sign = if draw % 2 == 0 { FusionSign::Literal } else { FusionSign::Corrected };
        let model = random_model(sign, draw, &mut rng);
        let x = mini_image(&mut rng);

        let mut g = model.predictor.clone();
        g.fill(0.0);
        predictor_loss_and_grad(&model.predictor, &x, &mut g).map_err(err)?;
        let e = gradient_error(&model.predictor, &g, |p| {
            let mut s = p.clone();
            predictor_loss_and_grad(p, &x, &mut s).unwrap()
        });
        worst[0] = worst[0].max(e);

        let c = (draw % 4) as usize;
        let mut g = model.channels[c].clone();
        g.fill(0.0);
        channel_loss_and_grad(&model.channels[c], &x, &mut g).map_err(err)?;
        let e = gradient_error(&model.channels[c], &g, |p| {
            let mut s = p.clone();
            channel_loss_and_grad(p, &x, &mut s).unwrap()
        });
        worst[1] = worst[1].max(e);

        let mut g = model.zeroed();
        end_to_end_loss_and_grad(&model, &x, &mut g).map_err(err)?;
        let e = gradient_error(&model, &g, |m| {
            let mut s = m.zeroed();
            end_to_end_loss_and_grad(m, &x, &mut s).unwrap()
        });
        worst[2] = worst[2].max(e);
    }
    let elapsed = start.elapsed();
    let detail = format!(
        "{draws} draws, max rel. error group {:.1e} / channel {:.1e} / end-to-end {:.1e}, {:.1}s",
        worst[0],
        worst[1],
        worst[2],
        elapsed.as_secs_f64()
    );
    ensure(worst.iter().all(|&e| e <= 1e-3), detail.clone())?;
    ensure(elapsed < Duration::from_secs(60), detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- 3

fn gating() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..4 {
        let mut model = ModelState::init(&mini_config(), FusionSign::Literal, 30 + i as u64);
        let mut alpha = [0.0; 4];
        for (k, a) in alpha.iter_mut().enumerate() {
            if k != i {
                *a = rng.random_range(0.1..1.0);
            }
        }
        let total: f64 = alpha.iter().sum();
        model.pinned_alpha = Some(FusionWeights(alpha.map(|a| a / total)));
        let mut g = model.zeroed();
        end_to_end_loss_and_grad(&model, &mini_image(&mut rng), &mut g).map_err(err)?;
        ensure(flat(&g.channels[i]).iter().all(|&v| v == 0.0), format!("channel {} gets gradient with alpha = 0", i + 1))?;
        ensure(
            (0..4).filter(|&k| k != i).all(|k| flat(&g.channels[k]).iter().any(|&v| v != 0.0)),
            "a weighted channel received no gradient",
        )?;
    }

    let data: Vec<SkeletonImage> = (0..10).map(|_| mini_image(&mut rng)).collect();
    let cfg = TrainConfig {
        batch_size: 1,
        epochs: StepEpochs { predictor: 1, channels: 1, end_to_end: 1 },
        single_channel_mode: true,
        seed: 8,
        ..TrainConfig::default()
    };
    let initial = ModelState::init(&mini_config(), cfg.fusion_sign, cfg.seed);
    let (trained, log) = train_single_channel(&data, &mini_config(), &cfg).map_err(err)?;
    ensure(log.epochs.len() == 1 && data.len() / cfg.batch_size == 10, "expected 10 optimizer steps")?;
    for k in 1..4 {
        let before: Vec<u64> = flat(&initial.channels[k]).iter().map(|v| v.to_bits()).collect();
        let after: Vec<u64> = flat(&trained.channels[k]).iter().map(|v| v.to_bits()).collect();
        ensure(before == after, format!("channel {} changed in single-channel mode", k + 1))?;
    }
    ensure(flat(&initial.channels[0]) != flat(&trained.channels[0]), "channel 1 did not train")?;
    Ok("zero weight gives exact zero gradient; channels 2-4 bit-identical after 10 steps".into())
}

// ---------------------------------------------------------------- 4

fn partition() -> Outcome {
    let groups: Vec<BTreeSet<usize>> =
        ViewGroup::all().map(|g| g.viewpoints().iter().map(|v| v.index()).collect()).collect();
    ensure(groups.len() == 4, "expected four groups")?;
    ensure(groups.iter().all(|g| g.len() == 3), format!("group sizes {groups:?}"))?;
    let union: BTreeSet<usize> = groups.iter().flatten().copied().collect();
    ensure(union == (0..8).collect(), format!("groups cover {union:?}"))?;
    let mut shared = BTreeSet::new();
    for i in 0..4 {
        let common: Vec<usize> = groups[i].intersection(&groups[(i + 1) % 4]).copied().collect();
        ensure(common.len() == 1, format!("groups {} and {} share {common:?}", i + 1, (i + 1) % 4 + 1))?;
        shared.insert(common[0]);
    }
    ensure(shared == BTreeSet::from([0, 2, 4, 6]), format!("shared viewpoints {shared:?}"))?;
    for k in 0..8 {
        let angle = 45.0 * k as f64;
        let expected = if k % 2 == 0 { 2 } else { 1 };
        let n = group_membership(angle).len();
        ensure(n == expected, format!("{angle} deg belongs to {n} groups"))?;
    }
    Ok("4 groups x 3 views, shared FV/V2/V4/V6, membership 2 at right angles and 1 at odd multiples of 45 deg".into())
}

// ---------------------------------------------------------------- 5

/// The training-subject list as printed, ranges included.
const TRAINING_SUBJECTS_TEXT: &str = "1, 2, 6, 12, 13, 16, 21, 24, 28-31, 33, 35, 39, 41, 42, 45, 47, 50, 52, 54, 55, \
     57, 59, 61, 63, 64, 67, 69-71, 73, 77, 81, 84, 86-88, 90, 91, 93, 96, 99, 102-104, 107, 108, 112, 113";

fn expand_ids(text: &str) -> Vec<u32> {
    text.split(',')
        .flat_map(|part| {
            let part = part.trim();
            match part.split_once('-') {
                Some((a, b)) => (a.parse::<u32>().unwrap()..=b.parse().unwrap()).collect::<Vec<_>>(),
                None => vec![part.parse().unwrap()],
            }
        })
        .collect()
}

fn protocol_fidelity() -> Outcome {
    let ids = expand_ids(TRAINING_SUBJECTS_TEXT);
    ensure(ids.len() == 51, format!("oracle list has {} ids", ids.len()))?;
    ensure(CROSS_SUBJECT_TRAIN_IDS.to_vec() == ids, "training-subject list differs")?;

    let template = generate_action(0, 1, 2).map_err(err)?;
    let population: Vec<SkeletonSequence> =
        (1..=118).map(|s| SkeletonSequence { subject_id: s, ..template.clone() }).collect();
    let (train, _) = split_cross_subject(&population, SubjectSplit::Released).map_err(err)?;
    let train_ids: Vec<u32> = train.iter().map(|&i| population[i].subject_id).collect();
    ensure(train_ids == ids, "released split selects different subjects")?;

    let (lo, hi) = section_angle_range(4, 10).map_err(err)?;
    ensure((lo - 108.0).abs() < 1e-9 && (hi - 144.0).abs() < 1e-9, format!("section 4 = [{lo}, {hi})"))?;
    let (lo7, hi7) = section_angle_range(7, 10).map_err(err)?;
    let (lo8, hi8) = section_angle_range(8, 10).map_err(err)?;
    ensure(
        (lo7 - 216.0).abs() < 1e-9 && (hi7 - lo8).abs() < 1e-9 && (hi8 - 288.0).abs() < 1e-9,
        format!("sections 7-8 = [{lo7}, {hi7}) + [{lo8}, {hi8})"),
    )?;

    for len in [10, 37, 1999, 2000] {
        let seq = generate_action(2, 9, len).map_err(err)?;
        for k in [1, 3, 10] {
            let joined: Vec<SkeletonFrame> = clip_sequence(&seq, k).map_err(err)?.into_iter().flat_map(|c| c.frames).collect();
            ensure(joined == seq.frames, format!("clipping {len} frames into {k} is not the identity"))?;
        }
    }
    Ok("51 training ids, section 4 = [108, 144), sections 7-8 = [216, 288), clip identity".into())
}

// ---------------------------------------------------------------- 6

fn synthetic_config() -> EvalConfig {
    EvalConfig {
        model: ModelConfig {
            classes: 5,
            frames: 40,
            predictor: PredictorArch { layers: vec![(8, 1), (16, 2), (16, 2)] },
            channel: ChannelArch { widths: vec![16, 32, 64, 64] },
            ..ModelConfig::default()
        },
        train: TrainConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 16,
            epochs: StepEpochs { predictor: 40, channels: 60, end_to_end: 30 },
            seed: 1,
            fusion_sign: FusionSign::Corrected,
            single_channel_mode: false,
        },
    }
}

fn synthetic_end_to_end() -> Outcome {
    let start = Instant::now();
    let spec = SynthSpec { n_classes: 5, subjects_per_class: 8, noise_std: 0.01, occlusion_rate: 0.3, seed: 7, ..SynthSpec::default() };
    let data: Vec<SkeletonSequence> = generate_dataset(&spec).map_err(err)?.into_iter().map(|i| i.sequence).collect();
    let cfg = synthetic_config();

    let (train, test) = split_cross_subject(&data, SubjectSplit::FirstHalf).map_err(err)?;
    let fixed = |idx: &[usize]| -> Result<Vec<SkeletonImage>, String> {
        idx.iter().filter(|&&i| data[i].view.is_fixed()).map(|&i| encode_sample(&data[i], 40).map_err(err)).collect()
    };
    let (train_x, test_x) = (fixed(&train)?, fixed(&test)?);
    let mut model = ModelState::init(&cfg.model, cfg.train.fusion_sign, cfg.train.seed);
    train_predictor(&mut model, &train_x, &cfg.train, &mut TrainingLog::default()).map_err(err)?;
    let group_acc = group_accuracy(&model, &test_x, true).map_err(err)?;

    let cross_subject = run_cross_subject(&data, &cfg, SubjectSplit::FirstHalf).map_err(err)?;
    let arbitrary = run_arbitrary(&data, &cfg, Variant::I, 10).map_err(err)?;
    let curve: Vec<f64> = arbitrary.breakdown.iter().map(|b| b.accuracy()).collect();
    let elapsed = start.elapsed();

    let min_of = |r: std::ops::RangeInclusive<usize>| r.map(|s| curve[s - 1]).fold(f64::INFINITY, f64::min);
    let rim = [1, 2, 9, 10].iter().map(|&s| curve[s - 1]).sum::<f64>() / 4.0;
    let (low_a, low_b) = (min_of(3..=5), min_of(7..=9));
    let shown: Vec<String> = curve.iter().map(|a| format!("{a:.3}")).collect();
    let detail = format!(
        "(a) group acc {group_acc:.3}; (b) cross-subject {:.3}; (c) sections [{}], min 3-5 {low_a:.3}, min 7-9 {low_b:.3}, rim mean {rim:.3}; {:.0}s",
        cross_subject.overall_accuracy,
        shown.join(" "),
        elapsed.as_secs_f64()
    );
    ensure(curve.len() == 10, detail.clone())?;
    ensure(group_acc >= 0.95, detail.clone())?;
    ensure(cross_subject.overall_accuracy >= 0.90, detail.clone())?;
    ensure(low_a < rim && low_b < rim, detail.clone())?;
    ensure(elapsed <= Duration::from_secs(15 * 60), detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- 7

const DETERMINISM_CONFIG: &str = r#"
fusion_weight_sign = "literal"

[model]
frames = 16
classes = 3
predictor_layers = [[4, 1], [6, 2]]
channel_widths = [6, 8]

[train]
learning_rate = 0.01
momentum = 0.9
batch_size = 8
seed = 21

[train.epochs]
predictor = 3
channels = 3
end_to_end = 3
"#;

fn vscnn(args: &[&str], extra: &[&Path]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_vscnn"))
        .args(args)
        .args(extra)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(err)?;
    ensure(out.status.success(), format!("vscnn {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let d = dir.path();
    let data = d.join("data");
    vscnn(&["synth", "--classes", "3", "--subjects", "2", "--frames-fixed", "40", "--frames-orbit", "200", "--seed", "5", "--out"], &[&data])?;
    let config = d.join("config.toml");
    std::fs::write(&config, DETERMINISM_CONFIG).map_err(err)?;
    let manifest = data.join("manifest.jsonl");
    let mut outputs = Vec::new();
    for run in ["first", "second"] {
        let ckpt = d.join(run).join("model.ckpt");
        let out = Command::new(env!("CARGO_BIN_EXE_vscnn"))
            .args(["train", "--stage", "all"])
            .arg("--manifest")
            .arg(&manifest)
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&ckpt)
            .env("RUST_LOG", "warn")
            .output()
            .map_err(err)?;
        ensure(out.status.success(), String::from_utf8_lossy(&out.stderr).into_owned())?;
        let bytes = std::fs::read(&ckpt).map_err(err)?;
        let metrics = std::fs::read(d.join(run).join("metrics.json")).map_err(err)?;
        outputs.push((bytes, metrics));
    }
    ensure(outputs[0].0 == outputs[1].0, "checkpoints differ")?;
    ensure(outputs[0].1 == outputs[1].1, "metrics.json differs")?;
    Ok(format!("checkpoint ({} bytes) and metrics.json identical across runs", outputs[0].0.len()))
}

// ---------------------------------------------------------------- 8

fn geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let camera = |seq: &SkeletonSequence, angle: f64| -> Result<Vec<[f64; 3]>, String> {
        Ok(world_to_camera(seq, &CameraPath::Fixed(CameraPose::at_angle(angle))).map_err(err)?.frames[0].joints.clone())
    };
    let dist = |a: [f64; 3], b: [f64; 3]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
    let (mut worst_dist, mut worst_compose) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let joints: Vec<[f64; 3]> =
            (0..JOINT_COUNT).map(|_| std::array::from_fn(|_| rng.random_range(-1.5..1.5))).collect();
        let mut seq = SkeletonSequence {
            frames: vec![SkeletonFrame::new(joints.clone())],
            subject_id: 1,
            action_id: 0,
            view: ViewDescriptor::Fixed(Viewpoint::new(0).unwrap()),
            setting: Setting::Synthetic,
        };
        let (a, b) = (rng.random_range(0.0..360.0), rng.random_range(0.0..360.0));
        let cam = camera(&seq, a)?;
        for i in 0..JOINT_COUNT {
            for j in i + 1..JOINT_COUNT {
                worst_dist = worst_dist.max((dist(joints[i], joints[j]) - dist(cam[i], cam[j])).abs());
            }
        }
        let direct = camera(&seq, a + b)?;
        for p in &mut seq.frames[0].joints {
            *p = rotate_vertical(*p, b);
        }
        let composed = camera(&seq, a)?;
        for (p, q) in direct.iter().zip(&composed) {
            worst_compose = worst_compose.max(dist(*p, *q));
        }
    }
    let detail = format!("1000 frames, max distance drift {worst_dist:.1e}, max composition error {worst_compose:.1e}");
    ensure(worst_dist <= 1e-9 && worst_compose <= 1e-9, detail.clone())?;
    Ok(detail)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("fusion weight formula", fusion_formula),
        ("gradient suite", gradient_suite),
        ("gating", gating),
        ("view-group partition", partition),
        ("protocol fidelity", protocol_fidelity),
        ("synthetic end-to-end", synthetic_end_to_end),
        ("determinism", determinism),
        ("camera geometry", geometry),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        match std::panic::catch_unwind(run) {
            Ok(Ok(detail)) => println!("PASS criterion {} ({name}): {detail}", n + 1),
            Ok(Err(detail)) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {detail}", n + 1);
            }
            Err(_) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): panicked", n + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
