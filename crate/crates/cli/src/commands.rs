//! The pipeline commands. Each one reads the run directory, writes its
//! outputs atomically, and re-echoes the resolved config so the run is
//! self-describing. Reruns with the same config and seed overwrite every
//! output with identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use sbd_core::ablate::{ablation_suite, render_ablation_csv, AblationConfig};
use sbd_core::checkpoint;
use sbd_core::data::{load_pose_sequence, render_pose_sequence, PoseSequence};
use sbd_core::eval::EvalReport;
use sbd_core::fusion::{fuse, grid_search_weights};
use sbd_core::pipeline::{
    self, parse_score_csv, render_loss_csv, render_score_csv, rows_to_fused_videos,
    rows_to_scored_videos, score_rows, score_videos, train_streams, write_atomic,
    StreamSelection,
};
use sbd_core::{Error, Result};

use crate::config::RunConfig;

fn write_snapshot(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir)?;
    write_atomic(&cfg.out_dir.join("config.toml"), cfg.snapshot()?.as_bytes())
}

/// Loads every `.csv` pose file in a directory, sorted by file name.
fn load_dir(dir: &Path) -> Result<Vec<PoseSequence>> {
    if !dir.is_dir() {
        return Err(Error::MissingData(format!("data directory {} does not exist", dir.display())));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::MissingData(format!("no .csv pose files in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            load_pose_sequence(p).map_err(|e| match e {
                Error::Parse { line, msg } => Error::Parse {
                    line,
                    msg: format!("{}: {msg}", p.display()),
                },
                other => other,
            })
        })
        .collect()
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let (train, test) = sbd_core::data::synth_dataset(&cfg.synth)?;
    let train_dir = cfg.train_dir();
    let test_dir = cfg.test_dir();
    fs::create_dir_all(&train_dir)?;
    fs::create_dir_all(&test_dir)?;
    for seq in &train {
        let path = train_dir.join(format!("{}.csv", seq.video_id));
        write_atomic(&path, render_pose_sequence(seq)?.as_bytes())?;
    }
    for seq in &test {
        let path = test_dir.join(format!("{}.csv", seq.video_id));
        write_atomic(&path, render_pose_sequence(seq)?.as_bytes())?;
    }
    write_snapshot(cfg)?;
    let anomalous: usize = test
        .iter()
        .map(|s| s.labels.as_ref().map_or(0, |l| l.iter().filter(|x| **x == 1).count()))
        .sum();
    let test_frames: usize = test.iter().map(|s| s.len()).sum();
    println!(
        "synth: {} train videos ({} frames), {} test videos ({} frames, {} anomalous) -> {}",
        train.len(),
        train.iter().map(|s| s.len()).sum::<usize>(),
        test.len(),
        test_frames,
        anomalous,
        cfg.out_dir.display()
    );
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig, streams: &str) -> Result<()> {
    cfg.validate()?;
    let select = StreamSelection::parse(streams)?;
    let train = load_dir(&cfg.train_dir())?;
    pipeline::check_unlabeled(&train)?;

    let trained = train_streams(&train, &cfg.hyper(), select)?;
    let ckpt = cfg.checkpoints_dir();
    fs::create_dir_all(&ckpt)?;

    if let Some(model) = &trained.pr {
        checkpoint::save_pr(model, &ckpt.join("pr.json"))?;
        let curve = trained.pr_curve.as_ref().expect("curve accompanies model");
        write_atomic(&ckpt.join("loss_pr.csv"), render_loss_csv(curve).as_bytes())?;
        println!("train pr: {} epochs, final loss {}", curve.len(), curve.last().unwrap());
    }
    if let Some(model) = &trained.pp {
        checkpoint::save_pp(model, &ckpt.join("pp.json"))?;
        let curve = trained.pp_curve.as_ref().expect("curve accompanies model");
        write_atomic(&ckpt.join("loss_pp.csv"), render_loss_csv(curve).as_bytes())?;
        println!("train pp: {} epochs, final loss {}", curve.len(), curve.last().unwrap());
    }
    if let Some(model) = &trained.rd {
        checkpoint::save_rd(model, &ckpt.join("rd.json"))?;
        let curve = trained.rd_curve.as_ref().expect("curve accompanies model");
        write_atomic(&ckpt.join("loss_rd.csv"), render_loss_csv(curve).as_bytes())?;
        println!("train rd: {} epochs, final loss {}", curve.len(), curve.last().unwrap());
    }
    if let Some(stats) = &trained.stats {
        checkpoint::save_stats(stats, &ckpt.join("train_stats.json"))?;
    }
    write_snapshot(cfg)?;
    Ok(())
}

/// Checks one structural field across checkpoints and data, naming the field
/// on mismatch.
fn expect_match(field: &str, model: usize, data: usize, what: &str) -> Result<()> {
    if model != data {
        return Err(Error::Incompatible(format!(
            "{what}: checkpoint has {field}={model}, data/config has {field}={data}"
        )));
    }
    Ok(())
}

pub fn cmd_score(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let ckpt = cfg.checkpoints_dir();
    let pr = checkpoint::load_pr(&ckpt.join("pr.json"))?;
    let pp = checkpoint::load_pp(&ckpt.join("pp.json"))?;
    let rd = checkpoint::load_rd(&ckpt.join("rd.json"))?;
    let stats = checkpoint::load_stats(&ckpt.join("train_stats.json"))?;
    let test = load_dir(&cfg.test_dir())?;

    let (k, d) = (test[0].k(), test[0].d());
    for (name, mk, md, mt) in
        [("pr", pr.k, pr.d, pr.t), ("pp", pp.k, pp.d, pp.t), ("rd", rd.k, rd.d, rd.t)]
    {
        expect_match("K", mk, k, name)?;
        expect_match("d", md, d, name)?;
        expect_match("T", mt, cfg.t, name)?;
    }

    let scored = score_videos(&pr, &pp, &rd, &test)?;
    let fused: Vec<Vec<f64>> = scored
        .iter()
        .map(|v| fuse(&v.pr, &v.pp, &v.rd, &cfg.fusion, &stats))
        .collect::<Result<_>>()?;
    let rows = score_rows(&test, &scored, &fused)?;

    fs::create_dir_all(cfg.scores_dir())?;
    write_atomic(&cfg.scores_dir().join("scores.csv"), render_score_csv(&rows).as_bytes())?;
    write_snapshot(cfg)?;
    println!("score: {} rows over {} videos -> scores/scores.csv", rows.len(), test.len());
    Ok(())
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let text = fs::read_to_string(cfg.scores_dir().join("scores.csv"))?;
    let rows = parse_score_csv(&text)?;
    let videos = rows_to_fused_videos(&rows)?;
    let report = EvalReport::build(&videos, cfg.fusion, cfg.t, cfg.seed)?;
    fs::create_dir_all(cfg.reports_dir())?;
    write_atomic(&cfg.reports_dir().join("eval.txt"), report.render().as_bytes())?;
    write_snapshot(cfg)?;
    println!("eval: micro auroc {} macro auroc {}", report.micro, report.macro_);
    Ok(())
}

pub fn cmd_gridsearch(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let text = fs::read_to_string(cfg.scores_dir().join("scores.csv"))?;
    let rows = parse_score_csv(&text)?;
    let videos = rows_to_scored_videos(&rows);
    if videos.iter().any(|v| v.labels.is_none()) {
        return Err(Error::MissingData(
            "grid search needs labeled validation scores".into(),
        ));
    }
    let stats = checkpoint::load_stats(&cfg.checkpoints_dir().join("train_stats.json"))?;
    let result = grid_search_weights(
        &videos,
        &stats,
        cfg.gridsearch.lo,
        cfg.gridsearch.hi,
        cfg.gridsearch.step,
    )?;

    let mut csv = String::from("alpha,beta,gamma,micro_auroc\n");
    for cell in &result.table {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            cell.weights.alpha, cell.weights.beta, cell.weights.gamma, cell.micro
        ));
    }
    fs::create_dir_all(cfg.reports_dir())?;
    write_atomic(&cfg.reports_dir().join("gridsearch.csv"), csv.as_bytes())?;
    let best = format!(
        "alpha={} beta={} gamma={} micro_auroc={}\n",
        result.best.alpha, result.best.beta, result.best.gamma, result.best_micro
    );
    write_atomic(&cfg.reports_dir().join("gridsearch_best.txt"), best.as_bytes())?;
    write_snapshot(cfg)?;
    print!("gridsearch best: {best}");
    Ok(())
}

pub fn cmd_ablate(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let ablation = AblationConfig { synth: cfg.synth.clone(), hyper: cfg.hyper() };
    let report = ablation_suite(&ablation);
    fs::create_dir_all(cfg.reports_dir())?;
    write_atomic(
        &cfg.reports_dir().join("ablation.csv"),
        render_ablation_csv(&report).as_bytes(),
    )?;
    write_snapshot(cfg)?;
    let failed = report.cells.iter().filter(|c| c.outcome.is_err()).count();
    println!(
        "ablate: {} cells ({} failed) -> reports/ablation.csv",
        report.cells.len(),
        failed
    );
    Ok(())
}
