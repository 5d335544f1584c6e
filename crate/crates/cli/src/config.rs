//! JSON run configuration. Keys mirror the long flag names with underscores;
//! a flag given on the command line wins over the file.

use std::path::{Path, PathBuf};

use jamiton_core::ModelSpec;
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Default)]
pub struct Config {
    map: Map<String, Value>,
    /// Directory of the config file; relative paths inside it resolve here.
    base: Option<PathBuf>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let Value::Object(map) = value else {
            return Err(CliError::Validation(format!("{}: expected a JSON object", path.display())));
        };
        Ok(Self {
            map,
            base: path.parent().map(Path::to_path_buf),
        })
    }

    fn bad(key: &str, want: &str) -> CliError {
        CliError::Validation(format!("config key '{key}' must be {want}"))
    }

    pub fn f64(&self, flag: Option<f64>, key: &str, default: f64) -> Result<f64, CliError> {
        match (flag, self.map.get(key)) {
            (Some(v), _) => Ok(v),
            (None, Some(v)) => v.as_f64().ok_or_else(|| Self::bad(key, "a number")),
            (None, None) => Ok(default),
        }
    }

    pub fn opt_f64(&self, flag: Option<f64>, key: &str) -> Result<Option<f64>, CliError> {
        match (flag, self.map.get(key)) {
            (Some(v), _) => Ok(Some(v)),
            (None, Some(v)) => v.as_f64().map(Some).ok_or_else(|| Self::bad(key, "a number")),
            (None, None) => Ok(None),
        }
    }

    pub fn usize(&self, flag: Option<usize>, key: &str, default: usize) -> Result<usize, CliError> {
        match (flag, self.map.get(key)) {
            (Some(v), _) => Ok(v),
            (None, Some(v)) => v
                .as_u64()
                .map(|x| x as usize)
                .ok_or_else(|| Self::bad(key, "a non-negative integer")),
            (None, None) => Ok(default),
        }
    }

    pub fn string(&self, flag: Option<String>, key: &str) -> Result<Option<String>, CliError> {
        match (flag, self.map.get(key)) {
            (Some(v), _) => Ok(Some(v)),
            (None, Some(v)) => v.as_str().map(|s| Some(s.to_string())).ok_or_else(|| Self::bad(key, "a string")),
            (None, None) => Ok(None),
        }
    }

    pub fn path(&self, flag: Option<PathBuf>, key: &str) -> Result<Option<PathBuf>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        Ok(self.string(None, key)?.map(|s| match &self.base {
            Some(base) if Path::new(&s).is_relative() => base.join(s),
            _ => PathBuf::from(s),
        }))
    }

    /// Model from `--model` or `--preset` (flag, then config); `pw1` when
    /// neither is given.
    pub fn model(&self, model: Option<PathBuf>, preset: Option<String>) -> Result<(ModelSpec, String), CliError> {
        let model = if preset.is_some() { None } else { self.path(model, "model")? };
        if let Some(path) = model {
            let spec = ModelSpec::from_path(&path).map_err(|e| CliError::Validation(e.to_string()))?;
            return Ok((spec, path.display().to_string()));
        }
        let name = self.string(preset, "preset")?.unwrap_or_else(|| "pw1".into());
        let spec = ModelSpec::preset(&name).map_err(|e| CliError::Validation(e.to_string()))?;
        Ok((spec, format!("preset:{name}")))
    }
}
