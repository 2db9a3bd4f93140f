//! Configuration documents for the command-line tools. Files ending in
//! `.toml` are read as TOML, everything else as JSON. Missing keys take
//! their defaults.

use std::fmt;
use std::path::Path;

use gridfree_cnn::{NetworkConfig, TrainingSpec};
use gridfree_core::estimate::Method;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::evaluate::EvalConfig;

/// A configuration document that could not be read or has a bad field.
#[derive(Debug)]
pub struct ConfigError {
    /// Dotted path of the offending field, empty for whole-document errors.
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() || self.field == "." {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config field `{}`: {}", self.field, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn whole(message: impl fmt::Display) -> ConfigError {
    ConfigError {
        field: String::new(),
        message: message.to_string(),
    }
}

/// Parses a document and warns about keys the target type does not read.
pub fn parse_config<T: DeserializeOwned + Serialize>(text: &str, toml_syntax: bool) -> Result<T, ConfigError> {
    let value: serde_json::Value = if toml_syntax {
        toml::from_str(text).map_err(whole)?
    } else {
        serde_json::from_str(text).map_err(whole)?
    };
    let parsed: T = serde_path_to_error::deserialize(value.clone()).map_err(|e| ConfigError {
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    if let Ok(echo) = serde_json::to_value(&parsed) {
        for key in unknown_keys(&value, &echo, "") {
            log::warn!("config key `{key}` is not recognized and was ignored");
        }
    }
    Ok(parsed)
}

// Keys of `input` with no counterpart in the re-serialized value. Comparing
// against the echo rather than the type sees through flattened fields.
fn unknown_keys(input: &serde_json::Value, echo: &serde_json::Value, prefix: &str) -> Vec<String> {
    let (Some(input), Some(echo)) = (input.as_object(), echo.as_object()) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (k, v) in input {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match echo.get(k) {
            Some(e) => out.extend(unknown_keys(v, e, &path)),
            None => out.push(path),
        }
    }
    out
}

/// Reads `path`, or returns the defaults when no path is given.
pub fn load_config<T: DeserializeOwned + Serialize + Default>(path: Option<&Path>) -> Result<T, ConfigError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| whole(format!("{}: {e}", path.display())))?;
    let toml_syntax = path.extension().is_some_and(|e| e == "toml");
    parse_config(&text, toml_syntax)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub network: NetworkConfig,
    pub training: TrainingSpec,
    /// Share of the dataset held out for validation, taken from the end.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            network: NetworkConfig::default(),
            training: TrainingSpec::default(),
            validation_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    #[serde(flatten)]
    pub eval: EvalConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            eval: EvalConfig::default(),
        }
    }
}
