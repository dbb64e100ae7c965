//! Model persistence and the HTTP/JSON API: oracle lookups, dataset
//! browsing and predictions from any loaded model, each prediction reported
//! beside the oracle's true class.

pub mod api;
pub mod artifact;

pub use api::{load_model_dir, router, serve, AppState, ModelEntry, ModelSnapshot};
pub use artifact::{load_model, save_model, ArtifactError, ModelArtifactFile, TrainingManifest, SCHEMA_VERSION};
