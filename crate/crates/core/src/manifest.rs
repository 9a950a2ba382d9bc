//! `key = value` manifest files written next to every persisted artifact.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

pub const FORMAT_VERSION: &str = "1";
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManifestError {
    #[error("manifest line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("manifest is missing key '{0}'")]
    Missing(String),
    #[error("manifest key '{key}': {message}")]
    Value { key: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    /// New manifest for an artifact of `kind`, stamped with format and engine versions.
    pub fn new(kind: &str) -> Self {
        let mut m = Self::default();
        m.set("kind", kind);
        m.set("format_version", FORMAT_VERSION);
        m.set("engine_version", ENGINE_VERSION);
        m
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        self
    }

    pub fn set_list(&mut self, key: &str, values: &[f64]) -> &mut Self {
        let joined = values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        self.set(key, joined)
    }

    pub fn get(&self, key: &str) -> Result<&str, ManifestError> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| ManifestError::Missing(key.to_string()))
    }

    pub fn get_f64(&self, key: &str) -> Result<f64, ManifestError> {
        let v = self.get(key)?;
        v.parse().map_err(|_| ManifestError::Value { key: key.into(), message: format!("'{v}' is not a number") })
    }

    pub fn get_list(&self, key: &str) -> Result<Vec<f64>, ManifestError> {
        self.get(key)?
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| ManifestError::Value { key: key.into(), message: format!("'{t}' is not a number") })
            })
            .collect()
    }

    /// Checks `kind` and `format_version`.
    pub fn expect_kind(&self, kind: &str) -> Result<(), ManifestError> {
        let k = self.get("kind")?;
        if k != kind {
            return Err(ManifestError::Value { key: "kind".into(), message: format!("expected '{kind}', found '{k}'") });
        }
        let v = self.get("format_version")?;
        if v != FORMAT_VERSION {
            return Err(ManifestError::Value {
                key: "format_version".into(),
                message: format!("unsupported version '{v}'"),
            });
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        let mut m = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ManifestError::Parse { line: i + 1, message: "expected 'key = value'".into() })?;
            m.set(k.trim(), v.trim());
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<(), ManifestError> {
        std::fs::write(path, self.to_text()).map_err(|e| ManifestError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, ManifestError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ManifestError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}
