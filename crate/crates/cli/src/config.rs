//! Loading run files and writing their resolved sidecars.
//!
//! A run file is a JSON object holding the fields of one command's
//! configuration plus optional `command` and `seed` keys. The sidecar a run
//! writes has the same shape with every default filled in, so it can be
//! passed back through `--config`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

pub const SIDECAR: &str = "run.json";

/// Input paths inside a configuration, made absolute against the run
/// file's directory.
pub trait ResolvePaths {
    fn resolve_paths(&mut self, _base: &Path) {}
}

pub fn resolve(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

/// Command-line values shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
}

impl Invocation {
    /// The configuration and the effective seed (flag, then file, then 0).
    pub fn load<T: DeserializeOwned + ResolvePaths>(&self, command: &str) -> Result<(u64, T)> {
        let (mut object, base) = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
                let value: Value =
                    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
                let Value::Object(object) = value else { bail!("config {} must be a JSON object", path.display()) };
                let base = path
                    .canonicalize()
                    .ok()
                    .and_then(|p| p.parent().map(Path::to_path_buf))
                    .unwrap_or_else(|| PathBuf::from("."));
                (object, base)
            }
            None => (Map::new(), std::env::current_dir()?),
        };
        if let Some(found) = object.remove("command") {
            if found.as_str() != Some(command) {
                bail!("config is for command {found}, not {command:?}");
            }
        }
        let file_seed = match object.remove("seed") {
            None | Some(Value::Null) => None,
            Some(v) => Some(v.as_u64().context("seed must be a non-negative integer")?),
        };
        let mut config: T = serde_json::from_value(Value::Object(object)).context("invalid config")?;
        config.resolve_paths(&base);
        Ok((self.seed.or(file_seed).unwrap_or(0), config))
    }
}

/// The resolved configuration with `command` and `seed`.
pub fn sidecar<T: Serialize>(command: &str, seed: u64, config: &T) -> Result<Value> {
    let Value::Object(mut object) = serde_json::to_value(config)? else { bail!("config must serialize to an object") };
    object.insert("command".into(), Value::from(command));
    object.insert("seed".into(), Value::from(seed));
    Ok(Value::Object(object))
}
