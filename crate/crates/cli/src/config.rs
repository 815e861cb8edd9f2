//! Run configuration: one TOML file with per-command sections, overridable
//! by the global `--seed` and `--out` flags (flags win). The top-level seed
//! governs every stage, so a run is reproducible from the config alone.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sbd_core::data::SynthConfig;
use sbd_core::fusion::FusionWeights;
use sbd_core::pipeline::PipelineHyper;
use sbd_core::rd::RdCorpusConfig;
use sbd_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub lr: f64,
    pub batch_size: usize,
    pub pr_epochs: usize,
    pub pp_epochs: usize,
    pub rd_epochs: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub embed_dim: usize,
    pub kl_weight: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            lr: 0.004,
            batch_size: 60,
            pr_epochs: 15,
            pp_epochs: 15,
            rd_epochs: 30,
            hidden_dim: 64,
            latent_dim: 16,
            embed_dim: 32,
            kl_weight: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSection {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { lo: 0.0, hi: 3.0, step: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSection {
    /// Override for the train data directory; defaults to `<out>/data/train`.
    pub train_dir: Option<PathBuf>,
    /// Override for the test data directory; defaults to `<out>/data/test`.
    pub test_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Window length T, in frames.
    pub t: usize,
    pub synth: SynthConfig,
    pub train: TrainSection,
    pub rd_corpus: RdCorpusConfig,
    pub fusion: FusionWeights,
    pub gridsearch: GridSection,
    pub data: DataSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            out_dir: PathBuf::from("run"),
            t: 64,
            synth: SynthConfig::default(),
            train: TrainSection::default(),
            rd_corpus: RdCorpusConfig::default(),
            fusion: FusionWeights::default(),
            gridsearch: GridSection::default(),
            data: DataSection::default(),
        }
    }
}

impl RunConfig {
    /// Loads a config file (or the defaults when `path` is None) and applies
    /// flag overrides. The run seed is propagated into every seeded stage.
    pub fn load(
        path: Option<&Path>,
        seed_override: Option<u64>,
        out_override: Option<PathBuf>,
    ) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = fs::read_to_string(p)?;
                toml::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(seed) = seed_override {
            cfg.seed = seed;
        }
        if let Some(out) = out_override {
            cfg.out_dir = out;
        }
        cfg.synth.seed = cfg.seed;
        cfg.rd_corpus.seed = cfg.seed;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t < 2 {
            return Err(Error::Config(format!("t must be >= 2, got {}", self.t)));
        }
        self.synth.validate(self.t)?;
        self.fusion.validate()?;
        if !self.gridsearch.step.is_finite() || self.gridsearch.step <= 0.0 {
            return Err(Error::Config("gridsearch step must be positive".into()));
        }
        if self.train.lr <= 0.0 || self.train.batch_size == 0 {
            return Err(Error::Config("learning rate and batch size must be positive".into()));
        }
        Ok(())
    }

    pub fn hyper(&self) -> PipelineHyper {
        PipelineHyper {
            t: self.t,
            lr: self.train.lr,
            batch_size: self.train.batch_size,
            pr_epochs: self.train.pr_epochs,
            pp_epochs: self.train.pp_epochs,
            rd_epochs: self.train.rd_epochs,
            hidden_dim: self.train.hidden_dim,
            latent_dim: self.train.latent_dim,
            embed_dim: self.train.embed_dim,
            kl_weight: self.train.kl_weight,
            rd_corpus: self.rd_corpus,
            seed: self.seed,
        }
    }

    pub fn train_dir(&self) -> PathBuf {
        self.data
            .train_dir
            .clone()
            .unwrap_or_else(|| self.out_dir.join("data").join("train"))
    }

    pub fn test_dir(&self) -> PathBuf {
        self.data
            .test_dir
            .clone()
            .unwrap_or_else(|| self.out_dir.join("data").join("test"))
    }

    pub fn checkpoints_dir(&self) -> PathBuf {
        self.out_dir.join("checkpoints")
    }

    pub fn scores_dir(&self) -> PathBuf {
        self.out_dir.join("scores")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.out_dir.join("reports")
    }

    /// Serializes the fully resolved config, written into the run directory
    /// so every result is self-describing.
    pub fn snapshot(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.train.lr, 0.004);
        assert_eq!(cfg.train.batch_size, 60);
        assert_eq!(cfg.t, 64);
        assert_eq!(cfg.fusion, FusionWeights { alpha: 1.0, beta: 1.0, gamma: 1.0 });
        assert_eq!(cfg.gridsearch.step, 0.1);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn partial_toml_fills_defaults_and_seed_propagates() {
        let text = "seed = 42\nt = 16\n[synth]\nperiod_lo = 4\nperiod_hi = 8\n";
        let cfg: RunConfig = toml::from_str(text).unwrap();
        let mut cfg = cfg;
        cfg.synth.seed = cfg.seed;
        cfg.rd_corpus.seed = cfg.seed;
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.t, 16);
        assert_eq!(cfg.synth.period_hi, 8);
        assert_eq!(cfg.synth.train_videos, SynthConfig::default().train_videos);
        assert_eq!(cfg.synth.seed, 42);
        assert_eq!(cfg.rd_corpus.seed, 42);
    }

    #[test]
    fn snapshot_round_trips() {
        let cfg = RunConfig::default();
        let text = cfg.snapshot().unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn bad_values_fail_validation() {
        let mut cfg = RunConfig::default();
        cfg.synth.anomaly_fraction = 0.9999;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.gridsearch.step = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig { t: 1, ..RunConfig::default() };
        assert!(cfg.validate().is_err());
        cfg.t = 64;
        assert!(cfg.validate().is_ok());
    }
}
