//! JSON-lines dataset manifest and per-sequence CSV files.
//!
//! Each manifest line is `{subject_id, action_id, view, setting, path}` where
//! `view` is a fixed viewpoint index (0-7) or the string `"varying"`, and
//! `path` is relative to the manifest's directory.
//!
//! Sequence files hold one row per frame: `j0x,j0y,j0z,…,j24z`, then
//! `v0…v24` validity flags (0/1), then `angle_deg` for varying views.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vscnn_core::skeleton::{
    Setting, SkeletonFrame, SkeletonSequence, ViewDescriptor, Viewpoint, ACTION_COUNT, JOINT_COUNT,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawView", into = "RawView")]
pub enum ManifestView {
    Fixed(u8),
    Varying,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawView {
    Index(u64),
    Name(String),
}

impl TryFrom<RawView> for ManifestView {
    type Error = String;

    fn try_from(raw: RawView) -> Result<Self, String> {
        match raw {
            RawView::Index(i) if i < 8 => Ok(ManifestView::Fixed(i as u8)),
            RawView::Index(i) => Err(format!("viewpoint {i} not in 0..=7")),
            RawView::Name(s) if s == "varying" => Ok(ManifestView::Varying),
            RawView::Name(s) => Err(format!("view must be an index or \"varying\", got {s:?}")),
        }
    }
}

impl From<ManifestView> for RawView {
    fn from(v: ManifestView) -> Self {
        match v {
            ManifestView::Fixed(i) => RawView::Index(i as u64),
            ManifestView::Varying => RawView::Name("varying".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject_id: u32,
    pub action_id: usize,
    pub view: ManifestView,
    pub setting: String,
    pub path: String,
}

impl ManifestEntry {
    fn setting(&self) -> Result<Setting> {
        self.setting.parse().map_err(|e: vscnn_core::Error| Error::data(e.to_string()))
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(&line)
            .map_err(|e| Error::data(format!("{}:{}: {e}", path.display(), n + 1)))?;
        if entry.action_id >= ACTION_COUNT {
            return Err(Error::data(format!("{}:{}: action {} out of range", path.display(), n + 1, entry.action_id)));
        }
        out.push(entry);
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for e in entries {
        let line = serde_json::to_string(e).map_err(|e| Error::data(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn header(varying: bool) -> Vec<String> {
    let mut h: Vec<String> = (0..JOINT_COUNT).flat_map(|j| ["x", "y", "z"].map(|a| format!("j{j}{a}"))).collect();
    h.extend((0..JOINT_COUNT).map(|j| format!("v{j}")));
    if varying {
        h.push("angle_deg".into());
    }
    h
}

/// Writes frames (and per-frame angles for varying views) to `path`.
pub fn write_sequence_csv(path: &Path, seq: &SkeletonSequence) -> Result<()> {
    let angles = match &seq.view {
        ViewDescriptor::Varying(a) => Some(a),
        ViewDescriptor::Fixed(_) => None,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    let csv_err = |e: csv::Error| Error::data(format!("{}: {e}", path.display()));
    w.write_record(header(angles.is_some())).map_err(csv_err)?;
    for (t, f) in seq.frames.iter().enumerate() {
        let mut row: Vec<String> = f.joints.iter().flat_map(|p| p.map(|v| v.to_string())).collect();
        row.extend(f.valid.iter().map(|&v| if v { "1" } else { "0" }.to_string()));
        if let Some(a) = angles {
            row.push(a[t].to_string());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Frames and, when present, the `angle_deg` column.
pub fn read_sequence_csv(path: &Path) -> Result<(Vec<SkeletonFrame>, Option<Vec<f64>>)> {
    let bad = |msg: String| Error::data(format!("{}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let cols = r.headers().map_err(|e| bad(e.to_string()))?.len();
    let varying = match cols {
        c if c == 4 * JOINT_COUNT => false,
        c if c == 4 * JOINT_COUNT + 1 => true,
        c => return Err(bad(format!("expected {} or {} columns, found {c}", 4 * JOINT_COUNT, 4 * JOINT_COUNT + 1))),
    };
    let mut frames = Vec::new();
    let mut angles = Vec::new();
    for (t, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            rec[i].trim().parse::<f64>().map_err(|_| bad(format!("row {}: column {} is not a number", t + 1, i + 1)))
        };
        let mut joints = Vec::with_capacity(JOINT_COUNT);
        for j in 0..JOINT_COUNT {
            joints.push([num(3 * j)?, num(3 * j + 1)?, num(3 * j + 2)?]);
        }
        let mut valid = Vec::with_capacity(JOINT_COUNT);
        for j in 0..JOINT_COUNT {
            valid.push(num(3 * JOINT_COUNT + j)? != 0.0);
        }
        if varying {
            angles.push(num(4 * JOINT_COUNT)?);
        }
        frames.push(SkeletonFrame { joints, valid });
    }
    if frames.is_empty() {
        return Err(bad("no frames".into()));
    }
    Ok((frames, varying.then_some(angles)))
}

/// Loads the sequence an entry points at; relative paths resolve against
/// `base`.
pub fn load_sequence(entry: &ManifestEntry, base: &Path) -> Result<SkeletonSequence> {
    let path = base.join(&entry.path);
    let (frames, angles) = read_sequence_csv(&path)?;
    let view = match (entry.view, angles) {
        (ManifestView::Fixed(i), _) => ViewDescriptor::Fixed(Viewpoint::new(i as usize)?),
        (ManifestView::Varying, Some(a)) => ViewDescriptor::Varying(a),
        (ManifestView::Varying, None) => {
            return Err(Error::data(format!("{}: varying view without angle_deg column", path.display())))
        }
    };
    Ok(SkeletonSequence {
        frames,
        subject_id: entry.subject_id,
        action_id: entry.action_id,
        view,
        setting: entry.setting()?,
    })
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Every sequence listed in a manifest, in manifest order.
pub fn load_dataset(manifest: &Path) -> Result<Vec<SkeletonSequence>> {
    let base = manifest_dir(manifest);
    read_manifest(manifest)?.iter().map(|e| load_sequence(e, &base)).collect()
}

/// Manifest entry describing `seq` stored at `path`.
pub fn entry_for(seq: &SkeletonSequence, path: &str) -> ManifestEntry {
    ManifestEntry {
        subject_id: seq.subject_id,
        action_id: seq.action_id,
        view: match &seq.view {
            ViewDescriptor::Fixed(v) => ManifestView::Fixed(v.index() as u8),
            ViewDescriptor::Varying(_) => ManifestView::Varying,
        },
        setting: seq.setting.as_str().to_string(),
        path: path.to_string(),
    }
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn view_field_forms() {
        let e: ManifestEntry =
            serde_json::from_str(r#"{"subject_id":3,"action_id":7,"view":"varying","setting":"A","path":"a.csv"}"#)
                .unwrap();
        assert_eq!(e.view, ManifestView::Varying);
        let e: ManifestEntry =
            serde_json::from_str(r#"{"subject_id":3,"action_id":7,"view":5,"setting":"B","path":"a.csv"}"#).unwrap();
        assert_eq!(e.view, ManifestView::Fixed(5));
        assert!(serde_json::to_string(&e).unwrap().contains(r#""view":5"#));
        for bad in [r#""view":8"#, r#""view":"side""#] {
            let line = format!(r#"{{"subject_id":1,"action_id":0,{bad},"setting":"A","path":"x"}}"#);
            assert!(serde_json::from_str::<ManifestEntry>(&line).is_err());
        }
    }

    #[test]
    fn header_layout() {
        let h = header(true);
        assert_eq!(h.len(), 101);
        assert_eq!(&h[..3], ["j0x", "j0y", "j0z"]);
        assert_eq!(h[74], "j24z");
        assert_eq!(h[75], "v0");
        assert_eq!(h[100], "angle_deg");
    }
}
