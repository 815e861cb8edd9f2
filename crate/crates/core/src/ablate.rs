//! Ablation harness: micro/macro AUROC over the full grid of window lengths,
//! pose dimensionalities and stream subsets.
//!
//! One synthetic dataset is generated per dimensionality (same base seed), so
//! the 2D and 3D rows describe the same underlying motion. Every (T, d) pair
//! trains its own models; the seven stream subsets then reuse those scores.
//! Cell values are bit-identical to an independent single-configuration run
//! because [`run_cell`] goes through exactly the same seeded code path.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{synth_dataset, SynthConfig};
use crate::error::Result;
use crate::eval;
use crate::fusion::{fuse_videos, ScoredVideo, TrainStats};
use crate::pipeline::{score_videos, train_streams, PipelineHyper, StreamSelection};
use crate::seeds;

/// Window lengths of the ablation grid.
pub const T_VALUES: [usize; 4] = [4, 8, 16, 64];
/// Pose dimensionalities of the ablation grid.
pub const D_VALUES: [usize; 2] = [2, 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    /// Base dataset; its `dims` field is overridden per grid column.
    pub synth: SynthConfig,
    /// Base hyperparameters; `t` is overridden per grid row.
    pub hyper: PipelineHyper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMetrics {
    pub micro: f64,
    pub macro_: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationCell {
    pub t: usize,
    pub d: usize,
    pub streams: String,
    pub outcome: std::result::Result<CellMetrics, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub cells: Vec<AblationCell>,
}

/// Dataset for one dimensionality column, derived from the base seed.
fn column_synth(cfg: &AblationConfig, d: usize) -> SynthConfig {
    let mut synth = cfg.synth.clone();
    synth.dims = d;
    synth.seed = seeds::derive_indexed(cfg.synth.seed, "ablate-data", d as u64);
    synth
}

/// Hyperparameters for one (T, d) group, derived from the base seed.
fn group_hyper(cfg: &AblationConfig, t: usize, d: usize) -> PipelineHyper {
    let mut hyper = cfg.hyper.clone();
    hyper.t = t;
    hyper.seed = seeds::derive_indexed(cfg.hyper.seed, "ablate-train", (t * 10 + d) as u64);
    hyper.rd_corpus.seed = hyper.seed;
    hyper
}

/// Trains and scores one (T, d) group from scratch.
fn group_scores(cfg: &AblationConfig, t: usize, d: usize) -> Result<(Vec<ScoredVideo>, TrainStats)> {
    let synth = column_synth(cfg, d);
    synth.validate(cfg.hyper.t)?;
    let (train, test) = synth_dataset(&synth)?;
    let hyper = group_hyper(cfg, t, d);
    let trained = train_streams(&train, &hyper, StreamSelection::all())?;
    let (pr, pp, rd) = (
        trained.pr.expect("all streams trained"),
        trained.pp.expect("all streams trained"),
        trained.rd.expect("all streams trained"),
    );
    let stats = trained.stats.expect("stats follow pr and pp");
    let scored = score_videos(&pr, &pp, &rd, &test)?;
    Ok((scored, stats))
}

fn eval_subset(
    scored: &[ScoredVideo],
    stats: &TrainStats,
    subset: StreamSelection,
) -> Result<CellMetrics> {
    let fused = fuse_videos(scored, &subset.weights(), stats)?;
    let micro = eval::auroc_micro(&fused)?;
    let macro_ = eval::auroc_macro(&fused)?.value;
    Ok(CellMetrics { micro, macro_ })
}

/// One grid cell computed independently of the suite's caching; the oracle
/// for bit-identity checks.
pub fn run_cell(
    cfg: &AblationConfig,
    t: usize,
    d: usize,
    subset: StreamSelection,
) -> Result<CellMetrics> {
    let (scored, stats) = group_scores(cfg, t, d)?;
    eval_subset(&scored, &stats, subset)
}

/// Runs the whole grid. Models are trained once per (T, d) group and shared
/// by that group's subset cells. A failed cell is reported in place and the
/// remaining cells still run.
pub fn ablation_suite(cfg: &AblationConfig) -> AblationReport {
    type Group = std::result::Result<(Vec<ScoredVideo>, TrainStats), String>;
    let mut groups: HashMap<(usize, usize), Group> = HashMap::new();
    let mut cells = Vec::new();
    for t in T_VALUES {
        for d in D_VALUES {
            let group = groups
                .entry((t, d))
                .or_insert_with(|| group_scores(cfg, t, d).map_err(|e| e.to_string()));
            for subset in StreamSelection::non_empty_subsets() {
                let outcome = match group {
                    Ok((scored, stats)) => {
                        eval_subset(scored, stats, subset).map_err(|e| e.to_string())
                    }
                    Err(e) => Err(e.clone()),
                };
                cells.push(AblationCell { t, d, streams: subset.name(), outcome });
            }
        }
    }
    AblationReport { cells }
}

pub fn render_ablation_csv(report: &AblationReport) -> String {
    let mut out = String::from("t,d,streams,micro_auroc,macro_auroc,status\n");
    for c in &report.cells {
        match &c.outcome {
            Ok(m) => {
                let _ = writeln!(out, "{},{},{},{},{},ok", c.t, c.d, c.streams, m.micro, m.macro_);
            }
            Err(e) => {
                let msg = e.replace(',', ";").replace('\n', " ");
                let _ = writeln!(out, "{},{},{},,,error: {msg}", c.t, c.d, c.streams);
            }
        }
    }
    out
}
