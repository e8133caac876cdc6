//! Result files. Every file carries the tool version and a SHA-256 of the
//! run configuration; floats are written with 12 significant digits.

use crate::error::{CliError, CliResult};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `x` with 12 significant digits in scientific notation.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// `x` rounded to 12 significant digits as a JSON number; `null` when not
/// finite.
pub fn jnum(x: f64) -> Value {
    if x.is_finite() {
        json!(num(x).parse::<f64>().unwrap())
    } else {
        Value::Null
    }
}

pub fn jnums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| jnum(x)).collect())
}

/// Hex SHA-256 of the compact JSON form of `config`. Object keys are
/// sorted, so the hash does not depend on construction order.
pub fn config_hash(config: &Value) -> String {
    hex::encode(Sha256::digest(config.to_string().as_bytes()))
}

/// Writes result files into one directory for one configuration.
#[derive(Debug, Clone)]
pub struct Emitter {
    dir: PathBuf,
    config: Value,
    hash: String,
}

impl Emitter {
    pub fn new(dir: &Path, config: Value) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.display().to_string(), message: e.to_string() })?;
        let hash = config_hash(&config);
        Ok(Self { dir: dir.to_path_buf(), config, hash })
    }

    /// Renders only; the `csv` and `json` writers go to the current
    /// directory.
    pub fn new_virtual(config: Value) -> Self {
        let hash = config_hash(&config);
        Self { dir: PathBuf::from("."), config, hash }
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn render_csv(&self, header: &[&str], rows: &[Vec<String>]) -> String {
        let mut out = format!("# hklab {VERSION} config_sha256={}\n{}\n", self.hash, header.join(","));
        for r in rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    /// `body` plus `hklab_version`, `config_sha256` and the configuration.
    pub fn render_json(&self, mut body: Value) -> String {
        if let Value::Object(m) = &mut body {
            m.insert("hklab_version".into(), json!(VERSION));
            m.insert("config_sha256".into(), json!(self.hash));
            m.insert("config".into(), self.config.clone());
        }
        let mut s = serde_json::to_string_pretty(&body).expect("json values always serialize");
        s.push('\n');
        s
    }

    fn write(&self, name: &str, text: &str) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Ok(path)
    }

    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<PathBuf> {
        self.write(name, &self.render_csv(header, rows))
    }

    pub fn json(&self, name: &str, body: Value) -> CliResult<PathBuf> {
        self.write(name, &self.render_json(body))
    }
}
