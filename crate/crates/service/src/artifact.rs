//! On-disk model artifacts: a versioned, human-readable JSON document that
//! carries everything needed to reproduce a trained model's predictions.

use std::fs;
use std::path::Path;

use krk_core::data::{Encoder, EncodingScheme, SplitSpec};
use krk_core::eval::MetricsReport;
use krk_core::label::{ClassLabel, NUM_CLASSES};
use krk_core::models::{ModelKind, ModelParams, TrainedModel};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("artifact schema version {found} is not supported (this build reads version {supported})")]
    SchemaVersion { found: u64, supported: u32 },
    #[error("corrupt artifact: {0}")]
    CorruptPayload(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How a model was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub algorithm: ModelKind,
    /// Fully resolved algorithm configuration.
    pub config: serde_json::Value,
    pub encoding: EncodingScheme,
    pub split: SplitSpec,
    /// `oracle:generate` or the path the records were read from.
    pub dataset: String,
    pub dataset_sha256: String,
    pub train_rows: usize,
    pub test_rows: usize,
    pub train_seconds: f64,
    pub metrics: Option<MetricsReport>,
    pub tool_version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifactFile {
    pub schema_version: u32,
    pub kind: ModelKind,
    pub fingerprint: String,
    pub class_order: Vec<ClassLabel>,
    pub encoder: Encoder,
    pub payload: ModelParams,
    pub manifest: Option<TrainingManifest>,
}

impl ModelArtifactFile {
    pub fn new(model: &TrainedModel, manifest: Option<TrainingManifest>) -> Self {
        ModelArtifactFile {
            schema_version: SCHEMA_VERSION,
            kind: model.kind(),
            fingerprint: model.fingerprint(),
            class_order: model.class_order.clone(),
            encoder: model.encoder.clone(),
            payload: model.params.clone(),
            manifest,
        }
    }

    /// Checks the header against the payload and rebuilds the model.
    pub fn into_model(self) -> Result<(TrainedModel, Option<TrainingManifest>), ArtifactError> {
        let corrupt = |m: String| Err(ArtifactError::CorruptPayload(m));
        if self.payload.kind() != self.kind {
            return corrupt(format!(
                "header says {} but payload holds {}",
                self.kind,
                self.payload.kind()
            ));
        }
        if self.encoder.fingerprint() != self.fingerprint {
            return corrupt(format!(
                "fingerprint {} does not match encoder {}",
                self.fingerprint,
                self.encoder.fingerprint()
            ));
        }
        if self.class_order.len() != NUM_CLASSES {
            return corrupt(format!("class_order has {} entries", self.class_order.len()));
        }
        let classifier = self.payload.classifier();
        if classifier.input_width() != self.encoder.width() || classifier.n_classes() != NUM_CLASSES {
            return corrupt(format!(
                "payload shape {}x{} does not fit encoder width {}",
                classifier.input_width(),
                classifier.n_classes(),
                self.encoder.width()
            ));
        }
        let model = TrainedModel {
            params: self.payload,
            class_order: self.class_order,
            encoder: self.encoder,
        };
        Ok((model, self.manifest))
    }
}

pub fn to_json(model: &TrainedModel, manifest: Option<TrainingManifest>) -> String {
    serde_json::to_string_pretty(&ModelArtifactFile::new(model, manifest)).expect("artifact serializes")
}

/// Parses an artifact, reporting a version mismatch before anything else.
pub fn from_json(text: &str) -> Result<(TrainedModel, Option<TrainingManifest>), ArtifactError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ArtifactError::CorruptPayload(e.to_string()))?;
    let found = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| ArtifactError::CorruptPayload("missing schema_version".into()))?;
    if found != SCHEMA_VERSION as u64 {
        return Err(ArtifactError::SchemaVersion {
            found,
            supported: SCHEMA_VERSION,
        });
    }
    let file: ModelArtifactFile =
        serde_json::from_value(value).map_err(|e| ArtifactError::CorruptPayload(e.to_string()))?;
    file.into_model()
}

pub fn save_model(path: &Path, model: &TrainedModel, manifest: Option<TrainingManifest>) -> Result<(), ArtifactError> {
    fs::write(path, to_json(model, manifest))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(TrainedModel, Option<TrainingManifest>), ArtifactError> {
    from_json(&fs::read_to_string(path)?)
}
