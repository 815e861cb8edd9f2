use crate::error::{Error, Result};

use super::pose::{normalize_pose, PoseFrame, PoseSequence};

/// Why windows are being cut; decides the tail policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Only full windows, stride T, tail dropped: training wants clean
    /// statistics.
    Train,
    /// The final partial window is padded by repeating the last frame so
    /// every frame belongs to exactly one window and gets a score.
    Score,
}

/// T consecutive normalized pose frames from one video.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub video_id: String,
    pub start: usize,
    pub frames: Vec<PoseFrame>,
}

impl Window {
    pub fn t(&self) -> usize {
        self.frames.len()
    }

    pub fn k(&self) -> usize {
        self.frames.first().map_or(0, |f| f.k)
    }

    pub fn d(&self) -> usize {
        self.frames.first().map_or(0, |f| f.d)
    }

    /// The frame at window offset `i`, flattened keypoint-major.
    pub fn flat(&self, i: usize) -> &[f64] {
        &self.frames[i].keypoints
    }
}

/// Cuts a sequence into non-overlapping windows of `t` normalized frames.
pub fn window_sequence(seq: &PoseSequence, t: usize, purpose: Purpose) -> Result<Vec<Window>> {
    if t < 2 {
        return Err(Error::Usage(format!("window length must be >= 2, got {t}")));
    }
    let n = seq.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let normalized: Vec<PoseFrame> = seq
        .frames
        .iter()
        .map(normalize_pose)
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        if start + t <= n {
            out.push(Window {
                video_id: seq.video_id.clone(),
                start,
                frames: normalized[start..start + t].to_vec(),
            });
        } else if purpose == Purpose::Score {
            let mut frames = normalized[start..n].to_vec();
            let last = frames.last().expect("non-empty tail").clone();
            while frames.len() < t {
                frames.push(last.clone());
            }
            out.push(Window { video_id: seq.video_id.clone(), start, frames });
        }
        start += t;
    }
    Ok(out)
}

/// Reassembles per-window scores back into one per-frame array of length `n`,
/// dropping scores that belong to tail padding.
pub fn reassemble_scores(windows: &[Window], per_window: &[Vec<f64>], n: usize) -> Result<Vec<f64>> {
    if windows.len() != per_window.len() {
        return Err(Error::Dimension(format!(
            "{} windows but {} score arrays",
            windows.len(),
            per_window.len()
        )));
    }
    let mut out = vec![f64::NAN; n];
    for (w, scores) in windows.iter().zip(per_window) {
        if scores.len() != w.t() {
            return Err(Error::Dimension(format!(
                "window of {} frames got {} scores",
                w.t(),
                scores.len()
            )));
        }
        for (off, &s) in scores.iter().enumerate() {
            let idx = w.start + off;
            if idx < n {
                out[idx] = s;
            }
        }
    }
    if out.iter().any(|v| v.is_nan()) {
        return Err(Error::Usage("windows do not cover every frame".into()));
    }
    Ok(out)
}
