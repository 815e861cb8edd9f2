use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One frame of a pose track: K keypoints with d coordinates each,
/// keypoint-major (x1, y1[, z1], x2, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseFrame {
    pub frame_index: usize,
    pub keypoints: Vec<f64>,
    pub k: usize,
    pub d: usize,
}

impl PoseFrame {
    pub fn new(frame_index: usize, k: usize, d: usize, keypoints: Vec<f64>) -> Result<Self> {
        if k < 2 {
            return Err(Error::Dimension(format!("pose needs K >= 2 keypoints, got {k}")));
        }
        if d != 2 && d != 3 {
            return Err(Error::Dimension(format!("pose dimensionality must be 2 or 3, got {d}")));
        }
        if keypoints.len() != k * d {
            return Err(Error::Dimension(format!(
                "frame {frame_index}: expected {} coordinates, got {}",
                k * d,
                keypoints.len()
            )));
        }
        if !keypoints.iter().all(|v| v.is_finite()) {
            return Err(Error::Dimension(format!("frame {frame_index}: non-finite coordinate")));
        }
        Ok(PoseFrame { frame_index, keypoints, k, d })
    }

    #[inline]
    pub fn coord(&self, keypoint: usize, axis: usize) -> f64 {
        self.keypoints[keypoint * self.d + axis]
    }
}

/// An ordered pose track for one video, with optional per-frame anomaly
/// labels (test data only).
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    pub video_id: String,
    pub frames: Vec<PoseFrame>,
    pub labels: Option<Vec<u8>>,
}

impl PoseSequence {
    pub fn new(video_id: String, frames: Vec<PoseFrame>, labels: Option<Vec<u8>>) -> Result<Self> {
        if let Some((first, rest)) = frames.split_first() {
            let (k, d) = (first.k, first.d);
            for (n, f) in rest.iter().enumerate() {
                if f.k != k || f.d != d {
                    return Err(Error::Dimension(format!(
                        "frame {} has K={} d={}, sequence started with K={k} d={d}",
                        f.frame_index, f.k, f.d
                    )));
                }
                if f.frame_index != first.frame_index + n + 1 {
                    return Err(Error::Usage(format!(
                        "frame indices must increase by 1; got {} after {}",
                        f.frame_index,
                        first.frame_index + n
                    )));
                }
            }
        }
        if let Some(l) = &labels {
            if l.len() != frames.len() {
                return Err(Error::Dimension(format!(
                    "{} labels for {} frames",
                    l.len(),
                    frames.len()
                )));
            }
            if !l.iter().all(|v| *v <= 1) {
                return Err(Error::Usage("labels must be 0 or 1".into()));
            }
        }
        Ok(PoseSequence { video_id, frames, labels })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn k(&self) -> usize {
        self.frames.first().map_or(0, |f| f.k)
    }

    pub fn d(&self) -> usize {
        self.frames.first().map_or(0, |f| f.d)
    }
}

/// Axis-aligned bounding box of a frame's keypoints.
fn bbox(frame: &PoseFrame) -> (Vec<f64>, Vec<f64>) {
    let d = frame.d;
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for j in 0..frame.k {
        for a in 0..d {
            let v = frame.coord(j, a);
            lo[a] = lo[a].min(v);
            hi[a] = hi[a].max(v);
        }
    }
    (lo, hi)
}

/// Translates the keypoints so the bounding-box center sits at the origin and
/// scales them so the bounding-box diagonal has length 1. Removes camera
/// translation and zoom so poses are comparable across videos.
pub fn normalize_pose(frame: &PoseFrame) -> Result<PoseFrame> {
    let (lo, hi) = bbox(frame);
    let diag: f64 = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt();
    if diag < 1e-12 {
        return Err(Error::DegeneratePose { frame_index: frame.frame_index });
    }
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut out = frame.clone();
    for (c, v) in out.keypoints.iter_mut().enumerate() {
        *v = (frame.keypoints[c] - center[c % frame.d]) / diag;
    }
    Ok(out)
}

/// Normalizes every frame of a sequence.
pub fn normalize_frames(frames: &[PoseFrame]) -> Result<Vec<PoseFrame>> {
    frames.iter().map(normalize_pose).collect()
}
