//! Expected-value fixtures: rows naming a config file (relative to the
//! fixture) and the parameter/MAC counts it should produce.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use tempconv_core::complexity::{analyze, verify, ComplexityReport, ExpectedFixture, InputShape, Verdict};
use tempconv_core::model::build_model;

use crate::config::{self, ConfigLoadError};

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("cannot read fixture {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("fixture {path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("row `{id}`: {source}")]
    Config { id: String, source: ConfigLoadError },
    #[error("row `{id}`: {message}")]
    Model { id: String, message: String },
    #[error("{0}")]
    Verify(#[from] tempconv_core::complexity::VerifyError),
}

pub fn load(path: &Path) -> Result<ExpectedFixture, FixtureError> {
    let text = std::fs::read_to_string(path).map_err(|source| FixtureError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| FixtureError::Json {
        path: path.display().to_string(),
        source,
    })
}

/// Builds every row's model and reports its complexity at `input`.
pub fn reports(
    fixture: &ExpectedFixture,
    base: &Path,
    input: InputShape,
) -> Result<BTreeMap<String, ComplexityReport>, FixtureError> {
    let mut out = BTreeMap::new();
    for row in &fixture.rows {
        let cfg_path: PathBuf = base.join(&row.config);
        let doc = config::load(Some(&cfg_path), "", &[]).map_err(|source| FixtureError::Config {
            id: row.id.clone(),
            source,
        })?;
        let model_err = |e: tempconv_core::model::ModelError| FixtureError::Model {
            id: row.id.clone(),
            message: e.to_string(),
        };
        let graph = build_model::<f32>(&doc.model, 0).map_err(model_err)?;
        out.insert(row.id.clone(), analyze(&graph, input).map_err(model_err)?);
    }
    Ok(out)
}

/// Loads a fixture and checks every row.
pub fn check(path: &Path) -> Result<Vec<Verdict>, FixtureError> {
    let fixture = load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let reports = reports(&fixture, base, InputShape::default())?;
    Ok(verify(&reports, &fixture)?)
}
