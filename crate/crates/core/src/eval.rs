//! Evaluation protocols, section bookkeeping and confusion matrices.
//!
//! Protocols take the full list of captures, split it into disjoint train
//! and test sets, train a model and score it. Sample identity is the index
//! into the input slice (plus the section number for clipped orbits).

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::encoder::{encode_sample, SkeletonImage};
use crate::error::{invalid, Error, Result};
use crate::nn::argmax;
use crate::skeleton::{clip_sequence, Setting, SkeletonSequence, Viewpoint, VIEWPOINT_COUNT};
use crate::train::{
    full_forward, infer, train_single_channel, train_three_steps, ModelConfig, ModelState, TrainConfig,
    TrainingLog,
};
use crate::view_groups::group_membership;

/// Subjects used for training in the cross-subject protocol on the
/// released dataset.
pub const CROSS_SUBJECT_TRAIN_IDS: [u32; 51] = [
    1, 2, 6, 12, 13, 16, 21, 24, 28, 29, 30, 31, 33, 35, 39, 41, 42, 45, 47, 50, 52, 54, 55, 57, 59, 61, 63, 64, 67,
    69, 70, 71, 73, 77, 81, 84, 86, 87, 88, 90, 91, 93, 96, 99, 102, 103, 104, 107, 108, 112, 113,
];

pub const DEFAULT_SECTIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolKind {
    CrossSubject,
    CrossView1,
    CrossView2,
    Arbitrary1,
    Arbitrary2,
}

impl ProtocolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::CrossSubject => "cross-subject",
            ProtocolKind::CrossView1 => "cross-view-1",
            ProtocolKind::CrossView2 => "cross-view-2",
            ProtocolKind::Arbitrary1 => "arbitrary-1",
            ProtocolKind::Arbitrary2 => "arbitrary-2",
        }
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "cross-subject" => ProtocolKind::CrossSubject,
            "cross-view-1" => ProtocolKind::CrossView1,
            "cross-view-2" => ProtocolKind::CrossView2,
            "arbitrary-1" => ProtocolKind::Arbitrary1,
            "arbitrary-2" => ProtocolKind::Arbitrary2,
            other => return Err(invalid(format!("unknown protocol {other:?}"))),
        })
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Cross-view II split direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    /// Train on FV, V2, V4, V6; test on V1, V3, V5, V7.
    #[default]
    A,
    /// Train on V1, V3, V5, V7; test on FV, V2, V4, V6.
    B,
}

impl Direction {
    pub fn train_views(self) -> [Viewpoint; 4] {
        let first = match self {
            Direction::A => 0,
            Direction::B => 1,
        };
        [0, 2, 4, 6].map(|k| Viewpoint::new(k + first).unwrap())
    }

    pub fn test_views(self) -> [Viewpoint; 4] {
        match self {
            Direction::A => Direction::B.train_views(),
            Direction::B => Direction::A.train_views(),
        }
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(Direction::A),
            "b" | "B" => Ok(Direction::B),
            other => Err(invalid(format!("unknown direction {other:?}"))),
        }
    }
}

/// How subjects are divided into training and test sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubjectSplit {
    /// The fixed 51-subject training list.
    Released,
    /// First half of the sorted subject ids trains.
    FirstHalf,
}

impl SubjectSplit {
    /// Synthetic data uses the first-half split, recorded captures the
    /// released list.
    pub fn for_data(data: &[SkeletonSequence]) -> Self {
        if !data.is_empty() && data.iter().all(|s| s.setting == Setting::Synthetic) {
            SubjectSplit::FirstHalf
        } else {
            SubjectSplit::Released
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    pub n_sections: usize,
    pub direction: Direction,
    pub split: Option<SubjectSplit>,
}

impl ProtocolSpec {
    pub fn new(kind: ProtocolKind) -> Self {
        Self { kind, n_sections: DEFAULT_SECTIONS, direction: Direction::A, split: None }
    }

    pub fn validate(&self) -> Result<()> {
        if matches!(self.kind, ProtocolKind::Arbitrary1 | ProtocolKind::Arbitrary2) && self.n_sections == 0 {
            return Err(invalid("section count must be positive"));
        }
        Ok(())
    }
}

/// Model and optimizer settings shared by every training run of a protocol.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

/// `M[true][pred]` counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub classes: usize,
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self { classes, counts: alloc::vec![0; classes * classes] }
    }

    pub fn add(&mut self, truth: usize, pred: usize) -> Result<()> {
        if truth >= self.classes || pred >= self.classes {
            return Err(invalid(format!("label pair ({truth}, {pred}) outside {} classes", self.classes)));
        }
        self.counts[truth * self.classes + pred] += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(invalid("confusion matrices differ in size"));
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.chunks(self.classes.max(1)).map(|r| r.iter().sum()).collect()
    }

    /// `trace / total`; 0 when empty.
    pub fn accuracy(&self) -> f64 {
        ratio(self.trace(), self.total())
    }
}

fn ratio(hit: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

pub fn confusion_matrix(predictions: &[usize], labels: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(invalid(format!("{} predictions for {} labels", predictions.len(), labels.len())));
    }
    let mut m = ConfusionMatrix::new(classes);
    for (&p, &t) in predictions.iter().zip(labels) {
        m.add(t, p)?;
    }
    Ok(m)
}

/// `[lo, hi)` in degrees covered by the 1-based section `index` of `n`.
pub fn section_angle_range(index: usize, n_sections: usize) -> Result<(f64, f64)> {
    if index == 0 || index > n_sections {
        return Err(invalid(format!("section {index} not in 1..={n_sections}")));
    }
    let w = 360.0 / n_sections as f64;
    Ok(((index - 1) as f64 * w, index as f64 * w))
}

/// Accuracy broken down along one axis (viewpoints or sections).
#[derive(Debug, Clone, PartialEq)]
pub struct Breakdown {
    pub label: String,
    pub correct: u64,
    pub total: u64,
}

impl Breakdown {
    pub fn accuracy(&self) -> f64 {
        ratio(self.correct, self.total)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub protocol: ProtocolKind,
    pub overall_accuracy: f64,
    pub breakdown: Vec<Breakdown>,
    /// Mean of the breakdown accuracies.
    pub mean_accuracy: f64,
    pub confusion: ConfusionMatrix,
    /// Cross-view I: `view_matrix[train][test]`, rows and columns FV, V1..V7.
    pub view_matrix: Option<[[f64; VIEWPOINT_COUNT]; VIEWPOINT_COUNT]>,
    pub mean_with_diagonal: Option<f64>,
    pub mean_without_diagonal: Option<f64>,
    pub train_samples: usize,
    pub test_samples: usize,
    pub warnings: Vec<String>,
}

impl EvalReport {
    fn new(protocol: ProtocolKind, confusion: ConfusionMatrix, breakdown: Vec<Breakdown>) -> Self {
        let mean_accuracy = if breakdown.is_empty() {
            0.0
        } else {
            breakdown.iter().map(Breakdown::accuracy).sum::<f64>() / breakdown.len() as f64
        };
        Self {
            protocol,
            overall_accuracy: confusion.accuracy(),
            breakdown,
            mean_accuracy,
            confusion,
            view_matrix: None,
            mean_with_diagonal: None,
            mean_without_diagonal: None,
            train_samples: 0,
            test_samples: 0,
            warnings: Vec::new(),
        }
    }
}

/// Splits capture indices by subject. Errors when either side is empty.
pub fn split_cross_subject(data: &[SkeletonSequence], mode: SubjectSplit) -> Result<(Vec<usize>, Vec<usize>)> {
    let train_ids = training_subjects(data, mode);
    let (train, test): (Vec<usize>, Vec<usize>) =
        (0..data.len()).partition(|&i| train_ids.contains(&data[i].subject_id));
    if train.is_empty() || test.is_empty() {
        return Err(invalid(format!("subject split leaves {} train / {} test captures", train.len(), test.len())));
    }
    Ok((train, test))
}

/// Training-side subject ids under `mode`.
pub fn training_subjects(data: &[SkeletonSequence], mode: SubjectSplit) -> BTreeSet<u32> {
    match mode {
        SubjectSplit::Released => CROSS_SUBJECT_TRAIN_IDS.iter().copied().collect(),
        SubjectSplit::FirstHalf => {
            let ids: BTreeSet<u32> = data.iter().map(|s| s.subject_id).collect();
            ids.iter().copied().take(ids.len() / 2).collect()
        }
    }
}

fn assert_disjoint<T: Ord + Copy>(train: &[T], test: &[T]) -> Result<()> {
    let seen: BTreeSet<T> = train.iter().copied().collect();
    if test.iter().any(|k| seen.contains(k)) {
        return Err(invalid("train and test sets overlap"));
    }
    Ok(())
}

fn fixed_view(seq: &SkeletonSequence) -> Option<Viewpoint> {
    seq.view.fixed()
}

fn encode_all(data: &[SkeletonSequence], idx: &[usize], frames: usize) -> Result<Vec<SkeletonImage>> {
    idx.iter().map(|&i| encode_sample(&data[i], frames)).collect()
}

/// Predicted action of every image.
pub fn predict_all(model: &ModelState, images: &[SkeletonImage]) -> Result<Vec<usize>> {
    images.iter().map(|x| Ok(infer(x, model)?.action)).collect()
}

/// Fraction of images whose top-scoring group contains their true view.
/// With `non_overlap_only`, only images at odd viewpoints count.
pub fn group_accuracy(model: &ModelState, images: &[SkeletonImage], non_overlap_only: bool) -> Result<f64> {
    let (mut hit, mut total) = (0u64, 0u64);
    for x in images {
        let Some(view) = x.view.as_ref() else { continue };
        let angle = view.routing_angle();
        let members = group_membership(angle);
        if non_overlap_only && members.len() != 1 {
            continue;
        }
        let z = full_forward(model, x)?.z;
        total += 1;
        hit += u64::from(members.iter().any(|g| g.index() == argmax(&z.0)));
    }
    Ok(ratio(hit, total))
}

fn views_present(data: &[SkeletonSequence]) -> Result<()> {
    let seen: BTreeSet<usize> = data.iter().filter_map(fixed_view).map(Viewpoint::index).collect();
    if let Some(v) = (0..VIEWPOINT_COUNT).find(|v| !seen.contains(v)) {
        return Err(invalid(format!("no captures from viewpoint {}", Viewpoint::new(v)?)));
    }
    Ok(())
}

/// Scores `images` and tallies accuracy per key.
fn score(
    model: &ModelState,
    images: &[SkeletonImage],
    keys: &[usize],
    labels: Vec<String>,
    confusion: &mut ConfusionMatrix,
) -> Result<Vec<Breakdown>> {
    let mut out: Vec<Breakdown> = labels.into_iter().map(|label| Breakdown { label, correct: 0, total: 0 }).collect();
    let preds = predict_all(model, images)?;
    for ((x, &p), &k) in images.iter().zip(&preds).zip(keys) {
        confusion.add(x.label, p)?;
        out[k].total += 1;
        out[k].correct += u64::from(p == x.label);
    }
    Ok(out)
}

fn view_labels() -> Vec<String> {
    Viewpoint::all().map(|v| v.to_string()).collect()
}

fn fixed_indices(data: &[SkeletonSequence], idx: &[usize], views: &[Viewpoint]) -> Vec<usize> {
    idx.iter().copied().filter(|&i| fixed_view(&data[i]).is_some_and(|v| views.contains(&v))).collect()
}

fn train_full(images: &[SkeletonImage], cfg: &EvalConfig) -> Result<(ModelState, TrainingLog)> {
    train_three_steps(images, &cfg.model, &cfg.train)
}

/// Cross-subject: fixed-view captures of the training subjects train the
/// full model; accuracy is reported per test viewpoint.
pub fn run_cross_subject(data: &[SkeletonSequence], cfg: &EvalConfig, split: SubjectSplit) -> Result<EvalReport> {
    let (train, test) = split_cross_subject(data, split)?;
    let all: Vec<Viewpoint> = Viewpoint::all().collect();
    let train = fixed_indices(data, &train, &all);
    let test = fixed_indices(data, &test, &all);
    assert_disjoint(&train, &test)?;
    if train.is_empty() || test.is_empty() {
        return Err(invalid("cross-subject split has no fixed-view captures on one side"));
    }
    let (model, log) = train_full(&encode_all(data, &train, cfg.model.frames)?, cfg)?;
    let images = encode_all(data, &test, cfg.model.frames)?;
    let keys: Vec<usize> = test.iter().map(|&i| fixed_view(&data[i]).unwrap().index()).collect();
    let mut confusion = ConfusionMatrix::new(cfg.model.classes);
    let breakdown = score(&model, &images, &keys, view_labels(), &mut confusion)?;
    let breakdown = breakdown.into_iter().filter(|b| b.total > 0).collect();
    let mut report = EvalReport::new(ProtocolKind::CrossSubject, confusion, breakdown);
    report.train_samples = train.len();
    report.test_samples = test.len();
    report.warnings = log.warnings;
    Ok(report)
}

/// Cross-view I: one single-channel model per training viewpoint, scored
/// on every viewpoint. Cells train on the training subjects and test on the
/// held-out subjects, so the diagonal is a same-view cross-subject score.
pub fn run_cross_view_1(data: &[SkeletonSequence], cfg: &EvalConfig, split: SubjectSplit) -> Result<EvalReport> {
    views_present(data)?;
    let (train_subj, test_subj) = split_cross_subject(data, split)?;
    let mut single = cfg.train.clone();
    single.single_channel_mode = true;
    let mut matrix = [[0.0; VIEWPOINT_COUNT]; VIEWPOINT_COUNT];
    let mut confusion = ConfusionMatrix::new(cfg.model.classes);
    let mut rows = Vec::with_capacity(VIEWPOINT_COUNT);
    let mut warnings = Vec::new();
    let (mut n_train, mut n_test) = (0, 0);
    let test_all: Vec<usize> = fixed_indices(data, &test_subj, &Viewpoint::all().collect::<Vec<_>>());
    let test_images = encode_all(data, &test_all, cfg.model.frames)?;
    let keys: Vec<usize> = test_all.iter().map(|&i| fixed_view(&data[i]).unwrap().index()).collect();
    for v in Viewpoint::all() {
        let train = fixed_indices(data, &train_subj, &[v]);
        assert_disjoint(&train, &test_all)?;
        if train.is_empty() {
            return Err(invalid(format!("no training captures from viewpoint {v}")));
        }
        let (model, log) = train_single_channel(&encode_all(data, &train, cfg.model.frames)?, &cfg.model, &single)?;
        warnings.extend(log.warnings.into_iter().map(|w| format!("{v}: {w}")));
        let cells = score(&model, &test_images, &keys, view_labels(), &mut confusion)?;
        for (w, cell) in cells.iter().enumerate() {
            matrix[v.index()][w] = cell.accuracy();
        }
        let (correct, total) = cells.iter().fold((0, 0), |(c, t), b| (c + b.correct, t + b.total));
        rows.push(Breakdown { label: format!("train {v}"), correct, total });
        n_train += train.len();
        n_test += test_all.len();
    }
    let n = VIEWPOINT_COUNT as f64;
    let all: f64 = matrix.iter().flatten().sum();
    let diag: f64 = (0..VIEWPOINT_COUNT).map(|i| matrix[i][i]).sum();
    let mut report = EvalReport::new(ProtocolKind::CrossView1, confusion, rows);
    report.view_matrix = Some(matrix);
    report.mean_with_diagonal = Some(all / (n * n));
    report.mean_without_diagonal = Some((all - diag) / (n * (n - 1.0)));
    report.train_samples = n_train;
    report.test_samples = n_test;
    report.warnings = warnings;
    Ok(report)
}

/// Cross-view II: the full model trains on one alternating half of the
/// viewpoints and is scored per held-out viewpoint.
pub fn run_cross_view_2(data: &[SkeletonSequence], cfg: &EvalConfig, direction: Direction) -> Result<EvalReport> {
    views_present(data)?;
    let all: Vec<usize> = (0..data.len()).collect();
    let train = fixed_indices(data, &all, &direction.train_views());
    let test_views = direction.test_views();
    let test = fixed_indices(data, &all, &test_views);
    assert_disjoint(&train, &test)?;
    let (model, log) = train_full(&encode_all(data, &train, cfg.model.frames)?, cfg)?;
    let images = encode_all(data, &test, cfg.model.frames)?;
    let keys: Vec<usize> = test
        .iter()
        .map(|&i| test_views.iter().position(|v| Some(*v) == fixed_view(&data[i])).unwrap())
        .collect();
    let mut confusion = ConfusionMatrix::new(cfg.model.classes);
    let labels = test_views.iter().map(|v| v.to_string()).collect();
    let breakdown = score(&model, &images, &keys, labels, &mut confusion)?;
    let mut report = EvalReport::new(ProtocolKind::CrossView2, confusion, breakdown);
    report.train_samples = train.len();
    report.test_samples = test.len();
    report.warnings = log.warnings;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    I,
    II,
}

/// Clipped orbit sections as `(capture index, 0-based section, sequence)`.
/// Orbits shorter than `n_sections` are skipped with a warning.
pub fn orbit_sections(
    data: &[SkeletonSequence],
    idx: &[usize],
    n_sections: usize,
    warnings: &mut Vec<String>,
) -> Result<Vec<(usize, usize, SkeletonSequence)>> {
    let mut out = Vec::new();
    for &i in idx {
        let seq = &data[i];
        if seq.view.is_fixed() {
            continue;
        }
        if seq.len() < n_sections {
            warnings.push(format!("capture {i}: {} frames cannot form {n_sections} sections", seq.len()));
            continue;
        }
        for (k, clip) in clip_sequence(seq, n_sections)?.into_iter().enumerate() {
            out.push((i, k, clip));
        }
    }
    Ok(out)
}

/// Scores a trained model on orbit sections; the breakdown has one entry
/// per section index.
pub fn evaluate_sections(
    model: &ModelState,
    sections: &[(usize, usize, SkeletonSequence)],
    n_sections: usize,
    frames: usize,
    confusion: &mut ConfusionMatrix,
) -> Result<Vec<Breakdown>> {
    let images: Vec<SkeletonImage> =
        sections.iter().map(|(_, _, s)| encode_sample(s, frames)).collect::<Result<_>>()?;
    let keys: Vec<usize> = sections.iter().map(|(_, k, _)| *k).collect();
    let labels = (1..=n_sections).map(|k| format!("S{k}")).collect();
    score(model, &images, &keys, labels, confusion)
}

/// Arbitrary-view protocols. Variant I trains on every fixed-view capture
/// and tests on all orbit sections; variant II splits orbit sections by
/// subject halves (sorted ids, first half trains).
pub fn run_arbitrary(data: &[SkeletonSequence], cfg: &EvalConfig, variant: Variant, n_sections: usize) -> Result<EvalReport> {
    if n_sections == 0 {
        return Err(invalid("section count must be positive"));
    }
    let mut warnings = Vec::new();
    let all: Vec<usize> = (0..data.len()).collect();
    let (train_images, test, n_train) = match variant {
        Variant::I => {
            let train = fixed_indices(data, &all, &Viewpoint::all().collect::<Vec<_>>());
            let test = orbit_sections(data, &all, n_sections, &mut warnings)?;
            let test_idx: Vec<usize> = test.iter().map(|t| t.0).collect();
            assert_disjoint(&train, &test_idx)?;
            (encode_all(data, &train, cfg.model.frames)?, test, train.len())
        }
        Variant::II => {
            let orbits: Vec<usize> = all.iter().copied().filter(|&i| !data[i].view.is_fixed()).collect();
            let subset: Vec<SkeletonSequence> = orbits.iter().map(|&i| data[i].clone()).collect();
            let keep = training_subjects(&subset, SubjectSplit::FirstHalf);
            let (tr, te): (Vec<usize>, Vec<usize>) =
                orbits.iter().partition(|&&i| keep.contains(&data[i].subject_id));
            let train = orbit_sections(data, &tr, n_sections, &mut warnings)?;
            let test = orbit_sections(data, &te, n_sections, &mut warnings)?;
            let key = |t: &(usize, usize, SkeletonSequence)| (t.0, t.1);
            assert_disjoint(&train.iter().map(key).collect::<Vec<_>>(), &test.iter().map(key).collect::<Vec<_>>())?;
            let images: Vec<SkeletonImage> =
                train.iter().map(|(_, _, s)| encode_sample(s, cfg.model.frames)).collect::<Result<_>>()?;
            let n = images.len();
            (images, test, n)
        }
    };
    if train_images.is_empty() || test.is_empty() {
        return Err(invalid("arbitrary-view protocol needs both fixed/orbit training data and orbit test data"));
    }
    let (model, log) = train_full(&train_images, cfg)?;
    warnings.extend(log.warnings);
    let mut confusion = ConfusionMatrix::new(cfg.model.classes);
    let breakdown = evaluate_sections(&model, &test, n_sections, cfg.model.frames, &mut confusion)?;
    let kind = match variant {
        Variant::I => ProtocolKind::Arbitrary1,
        Variant::II => ProtocolKind::Arbitrary2,
    };
    let mut report = EvalReport::new(kind, confusion, breakdown);
    report.train_samples = n_train;
    report.test_samples = test.len();
    report.warnings = warnings;
    Ok(report)
}

/// Dispatches a protocol.
pub fn run_protocol(data: &[SkeletonSequence], cfg: &EvalConfig, spec: &ProtocolSpec) -> Result<EvalReport> {
    spec.validate()?;
    let split = spec.split.unwrap_or_else(|| SubjectSplit::for_data(data));
    match spec.kind {
        ProtocolKind::CrossSubject => run_cross_subject(data, cfg, split),
        ProtocolKind::CrossView1 => run_cross_view_1(data, cfg, split),
        ProtocolKind::CrossView2 => run_cross_view_2(data, cfg, spec.direction),
        ProtocolKind::Arbitrary1 => run_arbitrary(data, cfg, Variant::I, spec.n_sections),
        ProtocolKind::Arbitrary2 => run_arbitrary(data, cfg, Variant::II, spec.n_sections),
    }
}
