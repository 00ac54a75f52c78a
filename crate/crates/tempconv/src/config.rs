//! Configuration documents: a TOML file with the model sections (`stem`,
//! `extractor`, `tcn`, `classifier`) and optional `train` and `data`
//! sections, plus dotted `path=value` overrides applied in order.

use std::path::Path;

use serde::de::DeserializeOwned;
use tempconv_core::blocks::BlockKind;
use tempconv_core::model::{ConfigError, ModelConfig};
use tempconv_core::train::{ToyDatasetSpec, TrainConfig};
use toml::{Table, Value};

#[derive(Debug, thiserror::Error)]
pub enum ConfigLoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("override `{0}`: {1}")]
    Override(String, String),
    #[error("{0}")]
    Invalid(#[from] ConfigError),
}

/// Everything a config file can describe.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Document {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: ToyDatasetSpec,
}

/// Parses an override value as a TOML value, falling back to a plain string
/// so that `tcn.block_kind=starv` needs no quoting.
fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Applies one `a.b.c=value` override, creating intermediate tables.
pub fn apply_override(root: &mut Table, spec: &str) -> Result<(), ConfigLoadError> {
    let err = |m: &str| ConfigLoadError::Override(spec.to_string(), m.to_string());
    let (path, raw) = spec.split_once('=').ok_or_else(|| err("expected `path=value`"))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(err("empty path segment"));
    }
    let (last, parents) = keys.split_last().expect("split yields at least one segment");
    let mut table = root;
    for (i, k) in parents.iter().enumerate() {
        let slot = table.entry(k.to_string()).or_insert_with(|| Value::Table(Table::new()));
        table = match slot {
            Value::Table(t) => t,
            _ => return Err(err(&format!("`{}` is not a table", keys[..=i].join(".")))),
        };
    }
    table.insert(last.to_string(), parse_value(raw));
    Ok(())
}

fn section<T: DeserializeOwned + Default>(root: &mut Table, key: &str) -> Result<T, ConfigLoadError> {
    match root.remove(key) {
        None => Ok(T::default()),
        Some(v) => v
            .try_into()
            .map_err(|e: toml::de::Error| ConfigLoadError::Parse(format!("[{key}]: {}", e.message()))),
    }
}

/// Parses document text, applies overrides in order (last wins) and
/// validates the model section.
pub fn parse(text: &str, overrides: &[String]) -> Result<Document, ConfigLoadError> {
    let mut root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigLoadError::Parse(e.to_string()))?;
    for o in overrides {
        apply_override(&mut root, o)?;
    }
    let train = section(&mut root, "train")?;
    let data = section(&mut root, "data")?;
    let model: ModelConfig = Value::Table(root)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigLoadError::Parse(e.message().to_string()))?;
    model.validate()?;
    Ok(Document { model, train, data })
}

/// The small model, recipe and dataset used by `train-toy` and `gen-data`.
pub const TOY: &str = r#"[stem]
out_channels = 16

[extractor]
widths = [16, 32]
blocks_per_stage = 1
expansion = 2
out_dim = 32

[tcn]
block_kind = "starv"
stages = 2
channels = 32

[classifier]
num_classes = 10

[train]
epochs = 30

[train.augment]
crop = 8

[data]
num_classes = 10
frames = 12
frame_size = 10
train = 200
val = 50
test = 50
"#;

/// Built-in documents addressable by name: `baseline` (the default full
/// model), `toy`, and `tcn-<kind>` for a TCN-only model of each block kind.
pub fn preset(name: &str) -> Option<String> {
    match name {
        "baseline" | "default" => Some(String::new()),
        "toy" => Some(TOY.to_string()),
        _ => {
            let kind: BlockKind = name.strip_prefix("tcn-")?.parse().ok()?;
            let mut text = format!("extractor = \"none\"\n\n[tcn]\nblock_kind = \"{kind}\"\n");
            if kind.is_experimental() {
                text.push_str("experimental = true\n");
            }
            Some(text)
        }
    }
}

/// Reads `source` (a file path, or a preset name when no such file exists)
/// and applies overrides; `None` starts from `fallback`.
pub fn load(source: Option<&Path>, fallback: &str, overrides: &[String]) -> Result<Document, ConfigLoadError> {
    let text = match source {
        Some(p) if p.exists() => std::fs::read_to_string(p).map_err(|source| ConfigLoadError::Io {
            path: p.display().to_string(),
            source,
        })?,
        Some(p) => p.to_str().and_then(preset).ok_or_else(|| ConfigLoadError::Io {
            path: p.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or preset"),
        })?,
        None => preset(fallback).unwrap_or_default(),
    };
    parse(&text, overrides)
}
