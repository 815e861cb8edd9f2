//! Line-delimited pose files.
//!
//! A file starts with one header record and then holds one frame per line:
//!
//! ```text
//! K=2,d=2,video_id=clip_a,labels=0
//! 0,12.5,3.25,14.0,9.5
//! 1,12.6,3.2,14.1,9.5
//! ```
//!
//! Each frame line is `frame_index` followed by K*d comma-separated decimal
//! coordinates, keypoint-major (x1,y1[,z1],x2,...). When the header says
//! `labels=1` every line carries a trailing 0/1 anomaly label (test data
//! only). Decimal values accept scientific notation. Line numbers in parse
//! errors count data records; the header is not counted.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::pose::{PoseFrame, PoseSequence};

fn header_err(msg: impl Into<String>) -> Error {
    Error::Parse { line: 0, msg: format!("header: {}", msg.into()) }
}

fn parse_header(line: &str) -> Result<(usize, usize, String, bool)> {
    let mut k = None;
    let mut d = None;
    let mut video_id = None;
    let mut labels = None;
    for field in line.split(',') {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| header_err(format!("expected key=value, got '{field}'")))?;
        match key.trim() {
            "K" => k = Some(value.parse::<usize>().map_err(|_| header_err("bad K"))?),
            "d" => d = Some(value.parse::<usize>().map_err(|_| header_err("bad d"))?),
            "video_id" => video_id = Some(value.to_string()),
            "labels" => {
                labels = Some(match value {
                    "0" => false,
                    "1" => true,
                    _ => return Err(header_err("labels must be 0 or 1")),
                })
            }
            other => return Err(header_err(format!("unknown key '{other}'"))),
        }
    }
    match (k, d, video_id, labels) {
        (Some(k), Some(d), Some(v), Some(l)) => Ok((k, d, v, l)),
        _ => Err(header_err("missing one of K, d, video_id, labels")),
    }
}

/// Loads a pose sequence, validating shape consistency and frame ordering.
pub fn load_pose_sequence(path: &Path) -> Result<PoseSequence> {
    let text = fs::read_to_string(path)?;
    parse_pose_sequence(&text)
}

/// Parses the documented format from an in-memory string.
pub fn parse_pose_sequence(text: &str) -> Result<PoseSequence> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| header_err("empty file"))?;
    let (k, d, video_id, has_labels) = parse_header(header)?;
    if k < 2 {
        return Err(header_err(format!("K must be >= 2, got {k}")));
    }
    if d != 2 && d != 3 {
        return Err(header_err(format!("d must be 2 or 3, got {d}")));
    }

    let expected_fields = 1 + k * d + usize::from(has_labels);
    let mut frames = Vec::new();
    let mut labels = if has_labels { Some(Vec::new()) } else { None };

    for (n, line) in lines.enumerate() {
        let record = n + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected_fields {
            return Err(Error::Parse {
                line: record,
                msg: format!(
                    "expected {expected_fields} fields for K={k} d={d} labels={}, got {}",
                    u8::from(has_labels),
                    fields.len()
                ),
            });
        }
        let idx: usize = fields[0].trim().parse().map_err(|_| Error::Parse {
            line: record,
            msg: format!("bad frame index '{}'", fields[0]),
        })?;
        if let Some(prev) = frames.last() {
            let prev: &PoseFrame = prev;
            if idx != prev.frame_index + 1 {
                return Err(Error::Parse {
                    line: record,
                    msg: format!(
                        "frame index {idx} after {}; indices must increase by 1",
                        prev.frame_index
                    ),
                });
            }
        }
        let mut coords = Vec::with_capacity(k * d);
        for f in &fields[1..1 + k * d] {
            let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                line: record,
                msg: format!("bad coordinate '{f}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: record,
                    msg: format!("non-finite coordinate '{f}'"),
                });
            }
            coords.push(v);
        }
        if let Some(l) = &mut labels {
            let lab = fields[expected_fields - 1].trim();
            match lab {
                "0" => l.push(0),
                "1" => l.push(1),
                _ => {
                    return Err(Error::Parse {
                        line: record,
                        msg: format!("label must be 0 or 1, got '{lab}'"),
                    })
                }
            }
        }
        let frame = PoseFrame::new(idx, k, d, coords).map_err(|e| Error::Parse {
            line: record,
            msg: e.to_string(),
        })?;
        frames.push(frame);
    }

    PoseSequence::new(video_id, frames, labels)
}

/// Renders a sequence in the documented format.
pub fn render_pose_sequence(seq: &PoseSequence) -> Result<String> {
    if seq.video_id.contains(',') || seq.video_id.contains('\n') {
        return Err(Error::Usage(format!("video_id '{}' cannot contain ',' or newline", seq.video_id)));
    }
    let has_labels = seq.labels.is_some();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "K={},d={},video_id={},labels={}",
        seq.k(),
        seq.d(),
        seq.video_id,
        u8::from(has_labels)
    );
    for (n, frame) in seq.frames.iter().enumerate() {
        let _ = write!(out, "{}", frame.frame_index);
        for v in &frame.keypoints {
            let _ = write!(out, ",{v}");
        }
        if let Some(labels) = &seq.labels {
            let _ = write!(out, ",{}", labels[n]);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Writes a sequence to disk in the documented format.
pub fn write_pose_sequence(seq: &PoseSequence, path: &Path) -> Result<()> {
    fs::write(path, render_pose_sequence(seq)?)?;
    Ok(())
}
