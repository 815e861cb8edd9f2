//! Versioned JSON checkpoint containers.
//!
//! JSON keeps the files self-describing, and 64-bit floats round-trip
//! bit-exactly through serde_json's shortest-representation printing, so a
//! saved model reloads to identical parameters.

use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::TrainStats;
use crate::pp::PpModel;
use crate::pr::PrModel;
use crate::rd::RdModel;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Container<M> {
    version: u32,
    stream: String,
    model: M,
}

fn save<M: Serialize>(model: &M, stream: &str, path: &Path) -> Result<()> {
    let container =
        Container { version: CHECKPOINT_VERSION, stream: stream.to_string(), model };
    let json = serde_json::to_string(&container)?;
    crate::pipeline::write_atomic(path, json.as_bytes())
}

fn load<M: DeserializeOwned>(stream: &str, path: &Path) -> Result<M> {
    let text = fs::read_to_string(path)?;
    let container: Container<M> = serde_json::from_str(&text)?;
    if container.version != CHECKPOINT_VERSION {
        return Err(Error::Incompatible(format!(
            "checkpoint {} has version {}, this build reads {CHECKPOINT_VERSION}",
            path.display(),
            container.version
        )));
    }
    if container.stream != stream {
        return Err(Error::Incompatible(format!(
            "checkpoint {} holds stream '{}', expected '{stream}'",
            path.display(),
            container.stream
        )));
    }
    Ok(container.model)
}

pub fn save_pr(model: &PrModel, path: &Path) -> Result<()> {
    save(model, "pr", path)
}

pub fn load_pr(path: &Path) -> Result<PrModel> {
    load("pr", path)
}

pub fn save_pp(model: &PpModel, path: &Path) -> Result<()> {
    save(model, "pp", path)
}

pub fn load_pp(path: &Path) -> Result<PpModel> {
    load("pp", path)
}

pub fn save_rd(model: &RdModel, path: &Path) -> Result<()> {
    save(model, "rd", path)
}

pub fn load_rd(path: &Path) -> Result<RdModel> {
    load("rd", path)
}

pub fn save_stats(stats: &TrainStats, path: &Path) -> Result<()> {
    save(stats, "train-stats", path)
}

pub fn load_stats(path: &Path) -> Result<TrainStats> {
    load("train-stats", path)
}
