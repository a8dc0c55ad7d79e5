//! Reader for Kinect v2 `.skeleton` text exports.
//!
//! Layout: frame count; per frame a body count; per body one info line, a
//! joint count and one line per joint holding
//! `x y z depthX depthY colorX colorY qw qx qy qz trackingState`.
//! The first body of each frame is kept. Joints with tracking state 0 and
//! frames without a body are marked missing.

use std::path::Path;

use vscnn_core::skeleton::{Joint, Setting, SkeletonFrame, SkeletonSequence, ViewDescriptor, JOINT_COUNT};

use crate::error::{Error, Result};

struct Tokens<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Tokens<'a> {
    fn line(&mut self) -> Result<(usize, Vec<&'a str>)> {
        loop {
            let (n, l) = self.lines.next().ok_or_else(|| Error::data("unexpected end of file"))?;
            let parts: Vec<&str> = l.split_whitespace().collect();
            if !parts.is_empty() {
                return Ok((n + 1, parts));
            }
        }
    }

    fn count(&mut self) -> Result<usize> {
        let (n, parts) = self.line()?;
        parts[0].parse().map_err(|_| Error::data(format!("line {n}: expected a count, found {:?}", parts[0])))
    }
}

/// Parses the text of a `.skeleton` export.
pub fn parse_skeleton_text(text: &str) -> Result<Vec<SkeletonFrame>> {
    let mut tok = Tokens { lines: text.lines().enumerate() };
    let frame_count = tok.count()?;
    let mut frames = Vec::with_capacity(frame_count);
    for _ in 0..frame_count {
        let bodies = tok.count()?;
        let mut frame = SkeletonFrame { joints: vec![[0.0; 3]; JOINT_COUNT], valid: vec![false; JOINT_COUNT] };
        for b in 0..bodies {
            tok.line()?;
            let joints = tok.count()?;
            if joints != JOINT_COUNT {
                return Err(Error::data(format!("body with {joints} joints, expected {JOINT_COUNT}")));
            }
            for j in 0..JOINT_COUNT {
                let (n, parts) = tok.line()?;
                if parts.len() < 12 {
                    return Err(Error::data(format!("line {n}: expected 12 joint fields, found {}", parts.len())));
                }
                let num = |i: usize| -> Result<f64> {
                    parts[i].parse().map_err(|_| Error::data(format!("line {n}: bad number {:?}", parts[i])))
                };
                if b == 0 {
                    let p: Joint = [num(0)?, num(1)?, num(2)?];
                    frame.joints[j] = p;
                    frame.valid[j] = num(11)? != 0.0 && p.iter().all(|v| v.is_finite());
                }
            }
        }
        frames.push(frame);
    }
    if frames.is_empty() {
        return Err(Error::data("export has no frames"));
    }
    Ok(frames)
}

/// Reads an export and attaches the labels supplied by the caller.
pub fn read_skeleton_file(
    path: &Path,
    subject_id: u32,
    action_id: usize,
    view: ViewDescriptor,
    setting: Setting,
) -> Result<SkeletonSequence> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let frames = parse_skeleton_text(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    if let ViewDescriptor::Varying(a) = &view {
        if a.len() != frames.len() {
            return Err(Error::data(format!("{} angles for {} frames", a.len(), frames.len())));
        }
    }
    Ok(SkeletonSequence { frames, subject_id, action_id, view, setting })
}
