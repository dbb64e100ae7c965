//! Experiment configuration and its resolution against the algorithm
//! registry.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use krk_core::data::{EncodingScheme, SplitSpec};
use krk_core::models::{ModelKind, Registry};
use krk_core::netscript::{self, LayerKind, LayerSize, NetScriptError};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub const ORACLE_SOURCE: &str = "oracle:generate";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown model kind `{0}`")]
    UnknownModel(String),
    #[error("{model} has no parameter `{param}`")]
    UnknownParameter { model: ModelKind, param: String },
    #[error("model config must be a JSON object")]
    NotAnObject,
    #[error("dataset file {0} does not exist")]
    MissingDataset(PathBuf),
    #[error("a topology script only applies to neural-network, not {0}")]
    ScriptOnWrongModel(ModelKind),
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("axis `{param}`: {message}")]
    Axis { param: String, message: String },
    #[error(transparent)]
    NetScript(#[from] NetScriptError),
}

/// Where records come from.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum DatasetSource {
    /// Solve the endgame and export its canonical records.
    #[default]
    Oracle,
    File(PathBuf),
}

impl From<String> for DatasetSource {
    fn from(s: String) -> Self {
        if s == ORACLE_SOURCE {
            DatasetSource::Oracle
        } else {
            DatasetSource::File(PathBuf::from(s))
        }
    }
}

impl From<DatasetSource> for String {
    fn from(d: DatasetSource) -> Self {
        d.to_string()
    }
}

impl FromStr for DatasetSource {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(DatasetSource::from(s.to_string()))
    }
}

impl fmt::Display for DatasetSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetSource::Oracle => f.write_str(ORACLE_SOURCE),
            DatasetSource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

/// An algorithm name plus a (possibly partial) configuration. Deserializes
/// from a bare name too.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "ModelSpecRepr")]
pub struct ModelSpec {
    pub kind: String,
    #[serde(default = "empty_object")]
    pub config: Value,
    /// Topology script file for neural-network; overrides `config.netscript`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub netscript: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ModelSpecRepr {
    Name(String),
    Full {
        kind: String,
        #[serde(default = "empty_object")]
        config: Value,
        #[serde(default)]
        netscript: Option<PathBuf>,
    },
}

impl From<ModelSpecRepr> for ModelSpec {
    fn from(r: ModelSpecRepr) -> Self {
        match r {
            ModelSpecRepr::Name(kind) => ModelSpec::new(&kind),
            ModelSpecRepr::Full {
                kind,
                config,
                netscript,
            } => ModelSpec {
                kind,
                config,
                netscript,
            },
        }
    }
}

fn empty_object() -> Value {
    Value::Object(Map::new())
}

impl ModelSpec {
    pub fn new(kind: &str) -> Self {
        ModelSpec {
            kind: kind.to_string(),
            config: empty_object(),
            netscript: None,
        }
    }

    pub fn with(mut self, key: &str, value: Value) -> Self {
        self.set(key, value);
        self
    }

    /// Sets one configuration field, turning a null config into an object.
    pub fn set(&mut self, key: &str, value: Value) {
        if self.config.is_null() {
            self.config = empty_object();
        }
        if let Value::Object(map) = &mut self.config {
            map.insert(key.to_string(), value);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub dataset: DatasetSource,
    /// Falls back to the algorithm's default encoding.
    #[serde(default)]
    pub encoding: Option<EncodingScheme>,
    #[serde(default)]
    pub split: SplitSpec,
    pub model: ModelSpec,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Cap network width and iterations for desk-scale runs.
    #[serde(default)]
    pub fast: bool,
}

impl ExperimentConfig {
    pub fn new(model: ModelSpec) -> Self {
        ExperimentConfig {
            dataset: DatasetSource::Oracle,
            encoding: None,
            split: SplitSpec::default(),
            model,
            output_dir: None,
            fast: false,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        read_json(path)
    }

    /// Checks every reference and fills in defaults, so that nothing can fail
    /// for configuration reasons once a run has started.
    pub fn resolve(&self, registry: &Registry) -> Result<ResolvedConfig, ConfigError> {
        let algorithm = registry
            .get(&self.model.kind)
            .map_err(|_| ConfigError::UnknownModel(self.model.kind.clone()))?;
        let kind = algorithm.kind();
        let mut config = algorithm.default_config();
        let defaults = config.as_object_mut().ok_or(ConfigError::NotAnObject)?;
        match &self.model.config {
            Value::Object(overrides) => {
                for (k, v) in overrides {
                    if !defaults.contains_key(k) {
                        return Err(ConfigError::UnknownParameter {
                            model: kind,
                            param: k.clone(),
                        });
                    }
                    defaults.insert(k.clone(), v.clone());
                }
            }
            Value::Null => {}
            _ => return Err(ConfigError::NotAnObject),
        }
        if let Some(path) = &self.model.netscript {
            if kind != ModelKind::NeuralNetwork {
                return Err(ConfigError::ScriptOnWrongModel(kind));
            }
            let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
                path: path.clone(),
                source,
            })?;
            defaults.insert("netscript".into(), Value::String(text));
        }
        if let Some(Value::String(text)) = defaults.get("netscript") {
            netscript::parse(text)?;
        }
        if self.fast && kind == ModelKind::NeuralNetwork {
            FastCaps::default().apply(defaults)?;
        }
        if let DatasetSource::File(path) = &self.dataset {
            if !path.is_file() {
                return Err(ConfigError::MissingDataset(path.clone()));
            }
        }
        Ok(ResolvedConfig {
            kind,
            config,
            encoding: self.encoding.unwrap_or_else(|| algorithm.default_encoding()),
            split: self.split,
            dataset: self.dataset.clone(),
            output_dir: self.output_dir.clone(),
        })
    }
}

/// A configuration with defaults filled in and every reference checked.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedConfig {
    pub kind: ModelKind,
    /// Complete algorithm configuration, fast caps already applied.
    pub config: Value,
    pub encoding: EncodingScheme,
    pub split: SplitSpec,
    pub dataset: DatasetSource,
    pub output_dir: Option<PathBuf>,
}

impl ResolvedConfig {
    pub fn seed(&self) -> u64 {
        self.config.get("seed").and_then(Value::as_u64).unwrap_or(0)
    }
}

/// Limits applied to neural-network runs in desk-scale mode.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct FastCaps {
    pub max_width: usize,
    pub max_iterations: usize,
}

impl Default for FastCaps {
    fn default() -> Self {
        FastCaps {
            max_width: 200,
            max_iterations: 100,
        }
    }
}

impl FastCaps {
    /// Clamps `iterations`, every entry of `hidden_layers` and every fixed
    /// hidden layer size in `netscript`.
    pub fn apply(&self, config: &mut Map<String, Value>) -> Result<(), ConfigError> {
        if let Some(n) = config.get("iterations").and_then(Value::as_u64) {
            config.insert("iterations".into(), (n.min(self.max_iterations as u64)).into());
        }
        if let Some(Value::Array(widths)) = config.get_mut("hidden_layers") {
            for w in widths.iter_mut() {
                if let Some(n) = w.as_u64() {
                    *w = n.min(self.max_width as u64).into();
                }
            }
        }
        if let Some(Value::String(text)) = config.get("netscript") {
            let mut ast = netscript::parse(text)?;
            for layer in &mut ast.layers {
                if let (LayerKind::Hidden, LayerSize::Fixed(n)) = (layer.kind, layer.size) {
                    layer.size = LayerSize::Fixed(n.min(self.max_width));
                }
            }
            config.insert("netscript".into(), Value::String(ast.to_string()));
        }
        Ok(())
    }
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.to_path_buf(),
        source,
    })
}
