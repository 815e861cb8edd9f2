//! Frame-level AUROC evaluation, micro- and macro-averaged.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fusion::FusionWeights;

/// Fused per-frame scores of one video together with its binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedVideo {
    pub video_id: String,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

/// Probability that a random positive frame outranks a random negative one,
/// ties credited one half (rank-sum formulation).
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if labels.iter().any(|l| *l > 1) {
        return Err(Error::Usage("labels must be 0 or 1".into()));
    }
    let n_pos = labels.iter().filter(|l| **l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "AUROC needs both classes; got {n_pos} positives and {n_neg} negatives"
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Usage("scores must be finite".into()));
    }

    // Midrank assignment: sort, then average ranks over tie groups.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|a, b| scores[*a].partial_cmp(&scores[*b]).expect("finite scores"));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share the midrank.
        let midrank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// AUROC over the concatenation of all test frames.
pub fn auroc_micro(videos: &[FusedVideo]) -> Result<f64> {
    if videos.is_empty() {
        return Err(Error::Usage("no videos to evaluate".into()));
    }
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for v in videos {
        if v.scores.len() != v.labels.len() {
            return Err(Error::Dimension(format!(
                "video {}: {} scores for {} labels",
                v.video_id,
                v.scores.len(),
                v.labels.len()
            )));
        }
        scores.extend_from_slice(&v.scores);
        labels.extend_from_slice(&v.labels);
    }
    auroc(&scores, &labels)
}

/// Macro outcome: the mean of per-video AUROC over videos holding both
/// classes, plus the per-video table and the skipped single-class videos.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroOutcome {
    pub value: f64,
    pub per_video: Vec<(String, f64)>,
    pub skipped: Vec<String>,
}

/// Mean of per-video AUROC. Videos with a single label class carry no
/// ranking information and are skipped (and reported).
pub fn auroc_macro(videos: &[FusedVideo]) -> Result<MacroOutcome> {
    if videos.is_empty() {
        return Err(Error::Usage("no videos to evaluate".into()));
    }
    let mut per_video = Vec::new();
    let mut skipped = Vec::new();
    for v in videos {
        match auroc(&v.scores, &v.labels) {
            Ok(a) => per_video.push((v.video_id.clone(), a)),
            Err(Error::UndefinedMetric(_)) => skipped.push(v.video_id.clone()),
            Err(e) => return Err(e),
        }
    }
    if per_video.is_empty() {
        return Err(Error::UndefinedMetric(
            "every video has single-class labels".into(),
        ));
    }
    let value = per_video.iter().map(|(_, a)| a).sum::<f64>() / per_video.len() as f64;
    Ok(MacroOutcome { value, per_video, skipped })
}

/// Evaluation summary rendered into the report file.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub micro: f64,
    pub macro_: f64,
    pub per_video: Vec<(String, f64)>,
    pub skipped: Vec<String>,
    pub weights: FusionWeights,
    pub t: usize,
    pub seed: u64,
}

impl EvalReport {
    pub fn build(videos: &[FusedVideo], weights: FusionWeights, t: usize, seed: u64) -> Result<Self> {
        let micro = auroc_micro(videos)?;
        let mac = auroc_macro(videos)?;
        Ok(EvalReport {
            micro,
            macro_: mac.value,
            per_video: mac.per_video,
            skipped: mac.skipped,
            weights,
            t,
            seed,
        })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "evaluation report");
        let _ = writeln!(out, "=================");
        let _ = writeln!(out, "micro auroc: {}", self.micro);
        let _ = writeln!(out, "macro auroc: {}", self.macro_);
        let _ = writeln!(
            out,
            "weights: alpha={} beta={} gamma={}",
            self.weights.alpha, self.weights.beta, self.weights.gamma
        );
        let _ = writeln!(out, "window: t={}", self.t);
        let _ = writeln!(out, "seed: {}", self.seed);
        let _ = writeln!(out);
        let _ = writeln!(out, "per-video auroc:");
        for (id, a) in &self.per_video {
            let _ = writeln!(out, "  {id}  {a}");
        }
        if self.skipped.is_empty() {
            let _ = writeln!(out, "skipped single-class videos: (none)");
        } else {
            let _ = writeln!(out, "skipped single-class videos: {}", self.skipped.join(", "));
        }
        out
    }
}
