//! End-to-end checks of the `sbd` binary: exit codes, file outputs, and the
//! contracts each command documents.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_sbd")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn fresh_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sbd_cli_{tag}_{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

/// A configuration small enough for test turnaround; quality is irrelevant.
fn small_config(dir: &Path) -> PathBuf {
    let out = dir.join("run");
    let text = format!(
        r#"
seed = 11
out_dir = "{}"
t = 16

[synth]
train_videos = 3
test_videos = 2
frames_per_video = 96
keypoints = 5
dims = 2
period_lo = 4
period_hi = 8
anomaly_fraction = 0.25
noise_amplitude = 0.004

[train]
lr = 0.004
batch_size = 16
pr_epochs = 2
pp_epochs = 2
rd_epochs = 3
hidden_dim = 8
latent_dim = 3
embed_dim = 6

[rd_corpus]
loop_lo = 4
loop_hi = 8

[gridsearch]
lo = 0.0
hi = 1.0
step = 0.5
"#,
        out.display()
    );
    let path = dir.join("cfg.toml");
    fs::write(&path, text).unwrap();
    path
}

fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                files.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn full_pipeline_files_exit_codes_and_determinism() {
    let dir = fresh_dir("pipeline");
    let cfg = small_config(&dir);
    let cfg = cfg.to_str().unwrap();
    let run_dir = dir.join("run");

    // synth: expected counts on disk.
    let out = run(&["synth", "--config", cfg]);
    assert!(out.status.success(), "synth: {}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_dir(run_dir.join("data/train")).unwrap().count(), 3);
    assert_eq!(fs::read_dir(run_dir.join("data/test")).unwrap().count(), 2);

    // synth is deterministic byte for byte.
    let first = read_tree(&run_dir.join("data"));
    let out = run(&["synth", "--config", cfg]);
    assert!(out.status.success());
    assert_eq!(first, read_tree(&run_dir.join("data")));

    // train: checkpoints, stats and loss curves; losses decrease.
    let out = run(&["train", "--config", cfg]);
    assert!(out.status.success(), "train: {}", String::from_utf8_lossy(&out.stderr));
    for name in ["pr.json", "pp.json", "rd.json", "train_stats.json"] {
        assert!(run_dir.join("checkpoints").join(name).is_file(), "missing {name}");
    }
    for name in ["loss_pr.csv", "loss_pp.csv", "loss_rd.csv"] {
        let text = fs::read_to_string(run_dir.join("checkpoints").join(name)).unwrap();
        let losses: Vec<f64> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert!(
            losses.last().unwrap() < &losses[0],
            "{name}: loss did not decrease ({losses:?})"
        );
    }

    // score: one row per test frame, fused column recomputable from the raw
    // columns and the stored stats.
    let out = run(&["score", "--config", cfg]);
    assert!(out.status.success(), "score: {}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(run_dir.join("scores/scores.csv")).unwrap();
    let rows = sbd_core::pipeline::parse_score_csv(&csv).unwrap();
    assert_eq!(rows.len(), 2 * 96);
    let stats =
        sbd_core::checkpoint::load_stats(&run_dir.join("checkpoints/train_stats.json")).unwrap();
    for r in &rows {
        let expect = 1.0 * (r.s_pr - stats.mu_pr) / stats.sigma_pr
            + 1.0 * (r.s_pp - stats.mu_pp) / stats.sigma_pp
            + 1.0 * r.s_rd;
        assert!((r.s_fused - expect).abs() < 1e-12);
        assert!(r.label.is_some());
    }

    // score rerun: byte-identical CSV.
    let out = run(&["score", "--config", cfg]);
    assert!(out.status.success());
    assert_eq!(csv, fs::read_to_string(run_dir.join("scores/scores.csv")).unwrap());

    // eval: report exists, macro equals the mean of its per-video table.
    let out = run(&["eval", "--config", cfg]);
    assert!(out.status.success(), "eval: {}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(run_dir.join("reports/eval.txt")).unwrap();
    let macro_line: f64 = report
        .lines()
        .find(|l| l.starts_with("macro auroc: "))
        .unwrap()
        .trim_start_matches("macro auroc: ")
        .parse()
        .unwrap();
    let per_video: Vec<f64> = report
        .lines()
        .skip_while(|l| !l.starts_with("per-video"))
        .skip(1)
        .take_while(|l| l.starts_with("  "))
        .map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(!per_video.is_empty());
    let mean = per_video.iter().sum::<f64>() / per_video.len() as f64;
    assert!((macro_line - mean).abs() < 1e-12);

    // gridsearch: table plus deterministic best.
    let out = run(&["gridsearch", "--config", cfg]);
    assert!(out.status.success(), "gridsearch: {}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(run_dir.join("reports/gridsearch.csv")).unwrap();
    assert_eq!(table.lines().count() - 1, 3 * 3 * 3 - 1); // {0,0.5,1}^3 minus origin
    let best = fs::read_to_string(run_dir.join("reports/gridsearch_best.txt")).unwrap();
    let out = run(&["gridsearch", "--config", cfg]);
    assert!(out.status.success());
    assert_eq!(best, fs::read_to_string(run_dir.join("reports/gridsearch_best.txt")).unwrap());

    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn labeled_training_data_exits_with_contract_code() {
    let dir = fresh_dir("contract");
    let cfg = small_config(&dir);
    let cfg = cfg.to_str().unwrap();
    assert!(run(&["synth", "--config", cfg]).status.success());

    // Plant a label column into one training file.
    let train_dir = dir.join("run/data/train");
    let victim = fs::read_dir(&train_dir).unwrap().next().unwrap().unwrap().path();
    let text = fs::read_to_string(&victim).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[0] = lines[0].replace("labels=0", "labels=1");
    for line in lines.iter_mut().skip(1) {
        line.push_str(",0");
    }
    fs::write(&victim, lines.join("\n") + "\n").unwrap();

    let out = run(&["train", "--config", cfg]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("contract"));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn checkpoint_data_mismatch_exits_with_compatibility_code() {
    let dir = fresh_dir("mismatch");
    let cfg_path = small_config(&dir);
    let cfg = cfg_path.to_str().unwrap();
    assert!(run(&["synth", "--config", cfg]).status.success());
    assert!(run(&["train", "--config", cfg]).status.success());

    // Same run directory, different window length: checkpoints trained at
    // T=16 must be rejected, naming the field.
    let text = fs::read_to_string(&cfg_path).unwrap().replace("t = 16", "t = 8");
    fs::write(&cfg_path, text).unwrap();
    let out = run(&["score", "--config", cfg]);
    assert_eq!(out.status.code(), Some(5), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("T="));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn eval_without_labels_exits_with_missing_data_code() {
    let dir = fresh_dir("nolabels");
    let cfg = small_config(&dir);
    let cfg = cfg.to_str().unwrap();
    let scores_dir = dir.join("run/scores");
    fs::create_dir_all(&scores_dir).unwrap();
    fs::write(
        scores_dir.join("scores.csv"),
        format!("{}\nv0,0,1.0,2.0,0.5,3.5,\n", sbd_core::pipeline::SCORE_CSV_HEADER),
    )
    .unwrap();
    let out = run(&["eval", "--config", cfg]);
    assert_eq!(out.status.code(), Some(6), "{}", String::from_utf8_lossy(&out.stderr));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn eval_reports_perfect_separation_as_micro_one() {
    let dir = fresh_dir("perfect");
    let cfg = small_config(&dir);
    let cfg = cfg.to_str().unwrap();
    let scores_dir = dir.join("run/scores");
    fs::create_dir_all(&scores_dir).unwrap();
    // Hand-built 4-frame CSV with perfect separation on the fused column.
    fs::write(
        scores_dir.join("scores.csv"),
        format!(
            "{}\nv0,0,0,0,0,0.9,1\nv0,1,0,0,0,0.8,1\nv0,2,0,0,0,0.2,0\nv0,3,0,0,0,0.1,0\n",
            sbd_core::pipeline::SCORE_CSV_HEADER
        ),
    )
    .unwrap();
    let out = run(&["eval", "--config", cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(dir.join("run/reports/eval.txt")).unwrap();
    assert!(report.contains("micro auroc: 1"), "report:\n{report}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn invalid_anomaly_fraction_is_rejected_as_usage() {
    let dir = fresh_dir("badcfg");
    let cfg_path = small_config(&dir);
    let text = fs::read_to_string(&cfg_path)
        .unwrap()
        .replace("anomaly_fraction = 0.25", "anomaly_fraction = 0.9999");
    fs::write(&cfg_path, text).unwrap();
    let out = run(&["synth", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = fresh_dir("seedflag");
    let cfg = small_config(&dir);
    let cfg = cfg.to_str().unwrap();
    assert!(run(&["synth", "--config", cfg]).status.success());
    let base = read_tree(&dir.join("run/data"));
    assert!(run(&["synth", "--config", cfg, "--seed", "999"]).status.success());
    let reseeded = read_tree(&dir.join("run/data"));
    assert_ne!(base, reseeded);
    // Config snapshot records the override.
    let snap = fs::read_to_string(dir.join("run/config.toml")).unwrap();
    assert!(snap.contains("seed = 999"));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn end_to_end_pipeline_reproduces_committed_report() {
    // Golden file generated by this exact flow on x86-64 Linux; guards the
    // whole seeded pipeline (generator, training, scoring, fusion, report
    // rendering) against silent numeric drift.
    let dir = fresh_dir("golden");
    let cfg = small_config(&dir);
    let cfg = cfg.to_str().unwrap();
    for cmd in ["synth", "train", "score", "eval"] {
        let out = run(&[cmd, "--config", cfg]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let got = fs::read_to_string(dir.join("run/reports/eval.txt")).unwrap();
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/eval.txt");
    let want = fs::read_to_string(&golden_path).expect("committed golden report");
    assert_eq!(got, want, "report drifted from the committed golden file");
    let _ = fs::remove_dir_all(&dir);
}
