//! Skeleton sequence → image-like sample.
//!
//! Rows are joints (Kinect order), columns are frames. Channels 0..3 hold
//! the normalized x, y, z position; channels 3..6 hold the inter-frame
//! difference mapped from `[-1, 1]` to `[0, 1]`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::nn::FeatureMap;
use crate::skeleton::{
    interpolate_missing, normalize_sequence, sample_frames, SkeletonSequence, ViewDescriptor, JOINT_COUNT,
};

/// Default number of sampled frames per sample.
pub const DEFAULT_FRAMES: usize = 40;
/// Position channels followed by motion channels.
pub const IMAGE_CHANNELS: usize = 6;

/// Encoded sample fed to the predictor and the channels.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonImage {
    /// `6 × 25 × T`
    pub pixels: FeatureMap,
    pub label: usize,
    pub view: Option<ViewDescriptor>,
    pub subject_id: u32,
}

impl SkeletonImage {
    pub fn frames(&self) -> usize {
        self.pixels.width
    }
}

fn check_input(seq: &SkeletonSequence, frames: usize) -> Result<()> {
    if seq.len() != frames {
        return Err(invalid(format!("expected {frames} frames, got {}", seq.len())));
    }
    for (t, f) in seq.frames.iter().enumerate() {
        if f.joints.len() != JOINT_COUNT || f.valid.iter().any(|v| !v) {
            return Err(invalid(format!("frame {t} is incomplete")));
        }
    }
    Ok(())
}

/// Pixel `(c, j, t)` = normalized coordinate `c` of joint `j` at frame `t`.
pub fn encode_position(seq: &SkeletonSequence, frames: usize) -> Result<FeatureMap> {
    check_input(seq, frames)?;
    let mut map = FeatureMap::zeros(3, JOINT_COUNT, frames);
    for (t, f) in seq.frames.iter().enumerate() {
        for (j, p) in f.joints.iter().enumerate() {
            for c in 0..3 {
                map.data[(c * JOINT_COUNT + j) * frames + t] = p[c];
            }
        }
    }
    Ok(map)
}

/// Inter-frame difference, `(d + 1) / 2`; the first column is 0.5.
pub fn encode_motion(seq: &SkeletonSequence, frames: usize) -> Result<FeatureMap> {
    check_input(seq, frames)?;
    let mut map = FeatureMap::zeros(3, JOINT_COUNT, frames);
    for t in 0..frames {
        for j in 0..JOINT_COUNT {
            for c in 0..3 {
                let d = if t == 0 {
                    0.0
                } else {
                    seq.frames[t].joints[j][c] - seq.frames[t - 1].joints[j][c]
                };
                map.data[(c * JOINT_COUNT + j) * frames + t] = ((d + 1.0) / 2.0).clamp(0.0, 1.0);
            }
        }
    }
    Ok(map)
}

/// Repair → sample `frames` frames → normalize → stack position and motion.
pub fn encode_sample(seq: &SkeletonSequence, frames: usize) -> Result<SkeletonImage> {
    if seq.frames.iter().any(|f| f.joints.len() != JOINT_COUNT || f.valid.len() != JOINT_COUNT) {
        return Err(invalid("sequence frames must carry 25 joints"));
    }
    let repaired = interpolate_missing(seq);
    let sampled = sample_frames(&repaired, frames)?;
    let normalized = normalize_sequence(&sampled);
    let pos = encode_position(&normalized, frames)?;
    let motion = encode_motion(&normalized, frames)?;
    let mut data = Vec::with_capacity(IMAGE_CHANNELS * JOINT_COUNT * frames);
    data.extend_from_slice(&pos.data);
    data.extend_from_slice(&motion.data);
    Ok(SkeletonImage {
        pixels: FeatureMap::new(IMAGE_CHANNELS, JOINT_COUNT, frames, data)?,
        label: seq.action_id,
        view: Some(normalized.view),
        subject_id: seq.subject_id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::{Setting, SkeletonFrame, Viewpoint};
    use alloc::vec;

    fn seq(frames: Vec<SkeletonFrame>) -> SkeletonSequence {
        SkeletonSequence {
            frames,
            subject_id: 3,
            action_id: 7,
            view: ViewDescriptor::Fixed(Viewpoint::FRONT),
            setting: Setting::Synthetic,
        }
    }

    #[test]
    fn position_places_coordinates() {
        let mut frames = vec![SkeletonFrame::new(vec![[0.5; 3]; JOINT_COUNT]); 4];
        frames[0].joints[5] = [0.1, 0.5, 0.9];
        let m = encode_position(&seq(frames), 4).unwrap();
        assert_eq!(m.at(0, 5, 0), 0.1);
        assert_eq!(m.at(1, 5, 0), 0.5);
        assert_eq!(m.at(2, 5, 0), 0.9);
        assert!(encode_position(&seq(vec![SkeletonFrame::zeros(); 3]), 4).is_err());
    }

    #[test]
    fn frame_swap_swaps_columns() {
        let frames: Vec<_> = (0..3)
            .map(|t| SkeletonFrame::new(vec![[0.1 * t as f64, 0.2, 0.3]; JOINT_COUNT]))
            .collect();
        let mut swapped = frames.clone();
        swapped.swap(0, 2);
        let a = encode_position(&seq(frames), 3).unwrap();
        let b = encode_position(&seq(swapped), 3).unwrap();
        for c in 0..3 {
            for j in 0..JOINT_COUNT {
                assert_eq!(a.at(c, j, 0), b.at(c, j, 2));
                assert_eq!(a.at(c, j, 1), b.at(c, j, 1));
            }
        }
    }

    #[test]
    fn motion_midpoint_and_step() {
        let still = seq(vec![SkeletonFrame::new(vec![[0.3; 3]; JOINT_COUNT]); 5]);
        assert!(encode_motion(&still, 5).unwrap().data.iter().all(|&v| v == 0.5));
        let mut frames = vec![SkeletonFrame::new(vec![[0.0; 3]; JOINT_COUNT]); 2];
        frames[1].joints[0] = [0.2, 0.0, 0.0];
        let m = encode_motion(&seq(frames), 2).unwrap();
        assert!((m.at(0, 0, 1) - 0.6).abs() < 1e-12);
        assert_eq!(m.at(0, 0, 0), 0.5);
    }

    #[test]
    fn sample_shape_and_metadata() {
        let frames: Vec<_> = (0..200)
            .map(|t| {
                SkeletonFrame::new(
                    (0..JOINT_COUNT).map(|j| [libm::sin(t as f64 * 0.1 + j as f64), j as f64 * 0.05, 2.0]).collect(),
                )
            })
            .collect();
        let img = encode_sample(&seq(frames), 40).unwrap();
        assert_eq!((img.pixels.channels, img.pixels.height, img.pixels.width), (6, 25, 40));
        assert!(img.pixels.data.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(img.label, 7);
        assert_eq!(img.subject_id, 3);
    }
}
