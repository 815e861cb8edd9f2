//! End-to-end orchestration: train the three streams on normal sequences,
//! score test sequences, and move per-frame score tables in and out of CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::PoseSequence;
use crate::error::{Error, Result};
use crate::fusion::{fit_train_stats, FusionWeights, ScoredVideo, TrainStats};
use crate::pp::{self, PpHyper, PpModel};
use crate::pr::{self, PrHyper, PrModel};
use crate::rd::{self, make_repetition_corpus, RdCorpusConfig, RdHyper, RdModel};
use crate::{data, eval};

/// Per-frame scores of one stream for one video. Construction checks the
/// stream contracts: one finite nonnegative score per frame, and repetition
/// probabilities at most 1.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamScores {
    pub video_id: String,
    pub scores: Vec<f64>,
}

impl StreamScores {
    pub fn new(
        video_id: &str,
        scores: Vec<f64>,
        frame_count: usize,
        probability: bool,
    ) -> Result<Self> {
        if scores.len() != frame_count {
            return Err(Error::Dimension(format!(
                "video {video_id}: {} scores for {frame_count} frames",
                scores.len()
            )));
        }
        if !scores.iter().all(|s| s.is_finite() && *s >= 0.0) {
            return Err(Error::Usage(format!(
                "video {video_id}: scores must be finite and nonnegative"
            )));
        }
        if probability && !scores.iter().all(|s| *s <= 1.0) {
            return Err(Error::Usage(format!(
                "video {video_id}: repetition scores must not exceed 1"
            )));
        }
        Ok(StreamScores { video_id: video_id.to_string(), scores })
    }
}

/// Which streams a run trains or fuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamSelection {
    pub pr: bool,
    pub pp: bool,
    pub rd: bool,
}

impl StreamSelection {
    pub fn all() -> Self {
        StreamSelection { pr: true, pp: true, rd: true }
    }

    /// The 7 non-empty subsets, in a fixed order.
    pub fn non_empty_subsets() -> Vec<StreamSelection> {
        let mut out = Vec::new();
        for pr in [true, false] {
            for pp in [true, false] {
                for rd in [true, false] {
                    let s = StreamSelection { pr, pp, rd };
                    if pr || pp || rd {
                        out.push(s);
                    }
                }
            }
        }
        out
    }

    pub fn name(&self) -> String {
        let mut parts = Vec::new();
        if self.pr {
            parts.push("pr");
        }
        if self.pp {
            parts.push("pp");
        }
        if self.rd {
            parts.push("rd");
        }
        parts.join("+")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut s = StreamSelection { pr: false, pp: false, rd: false };
        for part in text.split([',', '+']) {
            match part.trim() {
                "pr" => s.pr = true,
                "pp" => s.pp = true,
                "rd" => s.rd = true,
                other => {
                    return Err(Error::Usage(format!(
                        "unknown stream '{other}' (expected pr, pp, rd)"
                    )))
                }
            }
        }
        if !(s.pr || s.pp || s.rd) {
            return Err(Error::Usage("no streams selected".into()));
        }
        Ok(s)
    }

    /// Unit weight for every included stream, zero for the rest.
    pub fn weights(&self) -> FusionWeights {
        FusionWeights {
            alpha: f64::from(self.pr),
            beta: f64::from(self.pp),
            gamma: f64::from(self.rd),
        }
    }
}

/// Everything training needs beyond the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineHyper {
    pub t: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub pr_epochs: usize,
    pub pp_epochs: usize,
    pub rd_epochs: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub embed_dim: usize,
    pub kl_weight: f64,
    pub rd_corpus: RdCorpusConfig,
    pub seed: u64,
}

impl Default for PipelineHyper {
    fn default() -> Self {
        PipelineHyper {
            t: 64,
            lr: 0.004,
            batch_size: 60,
            pr_epochs: 15,
            pp_epochs: 15,
            rd_epochs: 30,
            hidden_dim: 64,
            latent_dim: 16,
            embed_dim: 32,
            kl_weight: 0.0,
            rd_corpus: RdCorpusConfig::default(),
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedStreams {
    pub pr: Option<PrModel>,
    pub pp: Option<PpModel>,
    pub rd: Option<RdModel>,
    /// Present when both pose-trajectory streams were trained.
    pub stats: Option<TrainStats>,
    pub pr_curve: Option<Vec<f64>>,
    pub pp_curve: Option<Vec<f64>>,
    pub rd_curve: Option<Vec<f64>>,
}

/// Training data must be unlabeled: labels at training time would break the
/// unsupervised contract.
pub fn check_unlabeled(train: &[PoseSequence]) -> Result<()> {
    for seq in train {
        if seq.labels.is_some() {
            return Err(Error::Contract(format!(
                "training sequence '{}' carries anomaly labels; training data must be unlabeled",
                seq.video_id
            )));
        }
    }
    Ok(())
}

/// Trains the selected streams on normal sequences and fits the fusion
/// normalizers from the training-set scores.
pub fn train_streams(
    train: &[PoseSequence],
    hyper: &PipelineHyper,
    select: StreamSelection,
) -> Result<TrainedStreams> {
    check_unlabeled(train)?;
    if train.is_empty() {
        return Err(Error::Usage("no training sequences".into()));
    }

    let mut out = TrainedStreams {
        pr: None,
        pp: None,
        rd: None,
        stats: None,
        pr_curve: None,
        pp_curve: None,
        rd_curve: None,
    };

    if select.pr {
        let mut windows = Vec::new();
        for seq in train {
            windows.extend(data::window_sequence(seq, hyper.t, data::Purpose::Train)?);
        }
        let h = PrHyper {
            lr: hyper.lr,
            batch_size: hyper.batch_size,
            epochs: hyper.pr_epochs,
            hidden_dim: hyper.hidden_dim,
            seed: hyper.seed,
        };
        let (model, curve) = pr::train_pr(&windows, &h)?;
        out.pr = Some(model);
        out.pr_curve = Some(curve);
    }

    if select.pp {
        let mut windows = Vec::new();
        for seq in train {
            windows.extend(data::window_sequence(seq, hyper.t + 1, data::Purpose::Train)?);
        }
        let h = PpHyper {
            lr: hyper.lr,
            batch_size: hyper.batch_size,
            epochs: hyper.pp_epochs,
            hidden_dim: hyper.hidden_dim,
            latent_dim: hyper.latent_dim,
            kl_weight: hyper.kl_weight,
            seed: hyper.seed,
        };
        let (model, curve) = pp::train_pp(&windows, &h)?;
        out.pp = Some(model);
        out.pp_curve = Some(curve);
    }

    if select.rd {
        let corpus = make_repetition_corpus(train, &hyper.rd_corpus, hyper.t)?;
        let h = RdHyper {
            lr: hyper.lr,
            batch_size: hyper.batch_size,
            epochs: hyper.rd_epochs,
            embed_dim: hyper.embed_dim,
            seed: hyper.seed,
        };
        let (model, curve) = rd::train_rd(&corpus, &h)?;
        out.rd = Some(model);
        out.rd_curve = Some(curve);
    }

    if let (Some(pr_model), Some(pp_model)) = (&out.pr, &out.pp) {
        let stats = compute_train_stats(pr_model, pp_model, train)?;
        out.stats = Some(stats);
    }

    Ok(out)
}

/// Fusion normalizers: mean and standard deviation of the two streams'
/// scores over every training frame, computed with the same scoring path
/// test data goes through.
pub fn compute_train_stats(
    pr_model: &PrModel,
    pp_model: &PpModel,
    train: &[PoseSequence],
) -> Result<TrainStats> {
    let per_video: Vec<(Vec<f64>, Vec<f64>)> = train
        .par_iter()
        .map(|seq| {
            Ok((
                pr::score_sequence(pr_model, seq)?,
                pp::score_sequence(pp_model, seq)?,
            ))
        })
        .collect::<Result<_>>()?;
    let mut pr_scores = Vec::new();
    let mut pp_scores = Vec::new();
    for (a, b) in per_video {
        pr_scores.extend(a);
        pp_scores.extend(b);
    }
    fit_train_stats(&pr_scores, &pp_scores)
}

/// Raw per-stream scores for every frame of every sequence.
pub fn score_videos(
    pr_model: &PrModel,
    pp_model: &PpModel,
    rd_model: &RdModel,
    seqs: &[PoseSequence],
) -> Result<Vec<ScoredVideo>> {
    seqs.par_iter()
        .map(|seq| {
            let n = seq.len();
            let pr =
                StreamScores::new(&seq.video_id, pr::score_sequence(pr_model, seq)?, n, false)?;
            let pp =
                StreamScores::new(&seq.video_id, pp::score_sequence(pp_model, seq)?, n, false)?;
            let rd =
                StreamScores::new(&seq.video_id, rd::score_sequence(rd_model, seq)?, n, true)?;
            Ok(ScoredVideo {
                video_id: seq.video_id.clone(),
                pr: pr.scores,
                pp: pp.scores,
                rd: rd.scores,
                labels: seq.labels.clone(),
            })
        })
        .collect()
}

/// One row of the per-frame score CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub video_id: String,
    pub frame_index: usize,
    pub s_pr: f64,
    pub s_pp: f64,
    pub s_rd: f64,
    pub s_fused: f64,
    pub label: Option<u8>,
}

pub const SCORE_CSV_HEADER: &str = "video_id,frame_index,s_pr,s_pp,s_rd,s_fused,label";

/// Builds CSV rows for scored videos, preserving original frame indices.
pub fn score_rows(
    seqs: &[PoseSequence],
    scored: &[ScoredVideo],
    fused: &[Vec<f64>],
) -> Result<Vec<ScoreRow>> {
    if seqs.len() != scored.len() || seqs.len() != fused.len() {
        return Err(Error::Dimension(format!(
            "{} sequences, {} scored videos, {} fused arrays",
            seqs.len(),
            scored.len(),
            fused.len()
        )));
    }
    let mut rows = Vec::new();
    for ((seq, sv), fv) in seqs.iter().zip(scored).zip(fused) {
        if sv.len() != seq.len() || fv.len() != seq.len() {
            return Err(Error::Dimension(format!(
                "video {}: {} frames scored for {} frames",
                seq.video_id,
                sv.len(),
                seq.len()
            )));
        }
        for (i, frame) in seq.frames.iter().enumerate() {
            rows.push(ScoreRow {
                video_id: seq.video_id.clone(),
                frame_index: frame.frame_index,
                s_pr: sv.pr[i],
                s_pp: sv.pp[i],
                s_rd: sv.rd[i],
                s_fused: fv[i],
                label: seq.labels.as_ref().map(|l| l[i]),
            });
        }
    }
    Ok(rows)
}

pub fn render_score_csv(rows: &[ScoreRow]) -> String {
    let mut out = String::from(SCORE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let label = r.label.map(|l| l.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{label}",
            r.video_id, r.frame_index, r.s_pr, r.s_pp, r.s_rd, r.s_fused
        );
    }
    out
}

pub fn parse_score_csv(text: &str) -> Result<Vec<ScoreRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SCORE_CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 0,
                msg: format!("score CSV must start with '{SCORE_CSV_HEADER}'"),
            })
        }
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let record = n + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse {
                line: record,
                msg: format!("expected 7 fields, got {}", fields.len()),
            });
        }
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                line: record,
                msg: format!("bad {what} '{s}'"),
            })
        };
        let label = match fields[6] {
            "" => None,
            "0" => Some(0),
            "1" => Some(1),
            other => {
                return Err(Error::Parse {
                    line: record,
                    msg: format!("label must be empty, 0 or 1, got '{other}'"),
                })
            }
        };
        rows.push(ScoreRow {
            video_id: fields[0].to_string(),
            frame_index: fields[1].parse().map_err(|_| Error::Parse {
                line: record,
                msg: format!("bad frame index '{}'", fields[1]),
            })?,
            s_pr: parse_f(fields[2], "s_pr")?,
            s_pp: parse_f(fields[3], "s_pp")?,
            s_rd: parse_f(fields[4], "s_rd")?,
            s_fused: parse_f(fields[5], "s_fused")?,
            label,
        });
    }
    Ok(rows)
}

/// Groups CSV rows back into per-video raw stream scores, preserving row
/// order within and across videos.
pub fn rows_to_scored_videos(rows: &[ScoreRow]) -> Vec<ScoredVideo> {
    let mut out: Vec<ScoredVideo> = Vec::new();
    for r in rows {
        if out.last().map(|v: &ScoredVideo| v.video_id != r.video_id).unwrap_or(true) {
            out.push(ScoredVideo {
                video_id: r.video_id.clone(),
                pr: Vec::new(),
                pp: Vec::new(),
                rd: Vec::new(),
                labels: r.label.map(|_| Vec::new()),
            });
        }
        let v = out.last_mut().expect("pushed above");
        v.pr.push(r.s_pr);
        v.pp.push(r.s_pp);
        v.rd.push(r.s_rd);
        if let (Some(labels), Some(l)) = (v.labels.as_mut(), r.label) {
            labels.push(l);
        }
    }
    out
}

/// Groups CSV rows into fused scores plus labels for evaluation. Every row
/// must carry a label.
pub fn rows_to_fused_videos(rows: &[ScoreRow]) -> Result<Vec<eval::FusedVideo>> {
    let mut out: Vec<eval::FusedVideo> = Vec::new();
    for r in rows {
        let label = r.label.ok_or_else(|| {
            Error::MissingData(format!(
                "row {}:{} has no label; evaluation needs labeled test data",
                r.video_id, r.frame_index
            ))
        })?;
        if out.last().map(|v: &eval::FusedVideo| v.video_id != r.video_id).unwrap_or(true) {
            out.push(eval::FusedVideo {
                video_id: r.video_id.clone(),
                scores: Vec::new(),
                labels: Vec::new(),
            });
        }
        let v = out.last_mut().expect("pushed above");
        v.scores.push(r.s_fused);
        v.labels.push(label);
    }
    Ok(out)
}

pub fn render_loss_csv(curve: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (i, loss) in curve.iter().enumerate() {
        let _ = writeln!(out, "{},{loss}", i + 1);
    }
    out
}

/// Writes through a temp file in the same directory, then renames, so a
/// crash never leaves a half-written file and reruns overwrite atomically.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = parent.join(format!(
        ".{}.tmp",
        path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
