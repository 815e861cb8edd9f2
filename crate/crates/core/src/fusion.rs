//! Score fusion: z-normalize the reconstruction and prediction scores with
//! training statistics, then take a weighted sum with the raw repetition
//! probability. The repetition term is already a probability and is not
//! z-normalized.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval;

/// Floor substituted for a degenerate training standard deviation.
pub const SIGMA_FLOOR: f64 = 1e-8;

/// Training-set score statistics used as z-normalizers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub mu_pr: f64,
    pub sigma_pr: f64,
    pub mu_pp: f64,
    pub sigma_pp: f64,
}

/// Weights of the three anomaly scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for FusionWeights {
    fn default() -> Self {
        FusionWeights { alpha: 1.0, beta: 1.0, gamma: 1.0 }
    }
}

impl FusionWeights {
    pub fn validate(&self) -> Result<()> {
        let ws = [self.alpha, self.beta, self.gamma];
        if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config("fusion weights must be finite and nonnegative".into()));
        }
        if ws.iter().all(|w| *w == 0.0) {
            return Err(Error::Config("at least one fusion weight must be positive".into()));
        }
        Ok(())
    }
}

fn mean_and_sigma(scores: &[f64]) -> (f64, f64) {
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    let sigma = var.sqrt();
    (mean, if sigma < SIGMA_FLOOR { SIGMA_FLOOR } else { sigma })
}

/// Population mean and standard deviation of the training scores of the two
/// pose-trajectory streams. A standard deviation below the floor is replaced
/// by it, since fusion divides by sigma.
pub fn fit_train_stats(pr_scores: &[f64], pp_scores: &[f64]) -> Result<TrainStats> {
    if pr_scores.is_empty() || pp_scores.is_empty() {
        return Err(Error::Usage("training score arrays must be nonempty".into()));
    }
    let (mu_pr, sigma_pr) = mean_and_sigma(pr_scores);
    let (mu_pp, sigma_pp) = mean_and_sigma(pp_scores);
    Ok(TrainStats { mu_pr, sigma_pr, mu_pp, sigma_pp })
}

/// Per-frame weighted fusion. A stream with weight zero is never read, so a
/// disabled stream may hold any values.
pub fn fuse(
    pr: &[f64],
    pp: &[f64],
    rd: &[f64],
    w: &FusionWeights,
    stats: &TrainStats,
) -> Result<Vec<f64>> {
    w.validate()?;
    let n = pr.len();
    if pp.len() != n || rd.len() != n {
        return Err(Error::Dimension(format!(
            "score arrays differ in length: pr={n}, pp={}, rd={}",
            pp.len(),
            rd.len()
        )));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut s = 0.0;
        if w.alpha != 0.0 {
            s += w.alpha * (pr[i] - stats.mu_pr) / stats.sigma_pr;
        }
        if w.beta != 0.0 {
            s += w.beta * (pp[i] - stats.mu_pp) / stats.sigma_pp;
        }
        if w.gamma != 0.0 {
            s += w.gamma * rd[i];
        }
        out.push(s);
    }
    Ok(out)
}

/// Raw per-frame stream scores of one video, plus its labels when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredVideo {
    pub video_id: String,
    pub pr: Vec<f64>,
    pub pp: Vec<f64>,
    pub rd: Vec<f64>,
    pub labels: Option<Vec<u8>>,
}

impl ScoredVideo {
    pub fn len(&self) -> usize {
        self.pr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pr.is_empty()
    }
}

/// Fuses every video and pairs the result with its labels.
pub fn fuse_videos(
    videos: &[ScoredVideo],
    w: &FusionWeights,
    stats: &TrainStats,
) -> Result<Vec<eval::FusedVideo>> {
    videos
        .iter()
        .map(|v| {
            let labels = v.labels.clone().ok_or_else(|| {
                Error::MissingData(format!("video {} has no labels", v.video_id))
            })?;
            Ok(eval::FusedVideo {
                video_id: v.video_id.clone(),
                scores: fuse(&v.pr, &v.pp, &v.rd, w, stats)?,
                labels,
            })
        })
        .collect()
}

/// One evaluated grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub weights: FusionWeights,
    pub micro: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub best: FusionWeights,
    pub best_micro: f64,
    pub table: Vec<GridCell>,
}

/// Exhaustive grid over the three weights in [lo, hi] at the given step,
/// maximizing micro AUROC on the validation videos. The all-zero point is
/// skipped. Ties break toward the lexicographically smallest
/// (alpha, beta, gamma), so the result is deterministic.
pub fn grid_search_weights(
    videos: &[ScoredVideo],
    stats: &TrainStats,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<GridSearchResult> {
    if !step.is_finite() || step <= 0.0 {
        return Err(Error::Config(format!("grid step must be positive, got {step}")));
    }
    if !lo.is_finite() || !hi.is_finite() || lo > hi {
        return Err(Error::Config(format!("grid range [{lo}, {hi}] is empty")));
    }
    let steps = ((hi - lo) / step).round() as usize;
    let values: Vec<f64> = (0..=steps).map(|i| lo + i as f64 * step).collect();

    let mut grid = Vec::with_capacity(values.len().pow(3));
    for &a in &values {
        for &b in &values {
            for &g in &values {
                if a == 0.0 && b == 0.0 && g == 0.0 {
                    continue;
                }
                grid.push(FusionWeights { alpha: a, beta: b, gamma: g });
            }
        }
    }
    if grid.is_empty() {
        return Err(Error::Config("weight grid contains no valid point".into()));
    }

    let table: Vec<GridCell> = grid
        .par_iter()
        .map(|w| {
            let fused = fuse_videos(videos, w, stats)?;
            let micro = eval::auroc_micro(&fused)?;
            Ok(GridCell { weights: *w, micro })
        })
        .collect::<Result<_>>()?;

    let mut best = table[0];
    for cell in &table[1..] {
        if cell.micro > best.micro {
            best = *cell;
        }
    }
    Ok(GridSearchResult { best: best.weights, best_micro: best.micro, table })
}
