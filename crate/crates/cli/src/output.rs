use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

/// Everything needed to re-run a command and check its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// Arguments as given, in the command's own schema.
    pub parameters: Value,
    /// Values chosen at run time, such as an automatic domain width.
    pub resolved: Value,
    pub seed: Option<u64>,
    /// SHA-256 of every input file, keyed by path as given.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every output file, keyed by file name.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Full round-trip precision (17 significant digits).
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Collects the files of one run and writes its manifest.
pub struct Output {
    dir: PathBuf,
    outputs: BTreeMap<String, String>,
    inputs: BTreeMap<String, String>,
    pub resolved: BTreeMap<String, Value>,
    pub seed: Option<u64>,
}

impl Output {
    pub fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            outputs: BTreeMap::new(),
            inputs: BTreeMap::new(),
            resolved: BTreeMap::new(),
            seed: None,
        })
    }

    /// Reads an input file and records its digest.
    pub fn read_input(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = read_bytes(path)?;
        self.inputs
            .insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }

    pub fn resolve(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("resolved values serialize");
        self.resolved.insert(key.to_string(), value);
    }

    pub fn has_outputs(&self) -> bool {
        !self.outputs.is_empty()
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Numeric CSV; every value is written with `num`.
    pub fn write_csv(&mut self, name: &str, header: &[String], rows: &[Vec<f64>]) -> CliResult<PathBuf> {
        let text_rows: Vec<Vec<String>> = rows
            .iter()
            .map(|r| r.iter().map(|&v| num(v)).collect())
            .collect();
        self.write_text_csv(name, header, &text_rows)
    }

    pub fn write_text_csv(
        &mut self,
        name: &str,
        header: &[String],
        rows: &[Vec<String>],
    ) -> CliResult<PathBuf> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let csv_err = |e: csv::Error| CliError::Write {
            path: self.dir.join(name),
            source: std::io::Error::other(e),
        };
        writer.write_record(header).map_err(csv_err)?;
        for row in rows {
            writer.write_record(row).map_err(csv_err)?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| csv_err(csv::Error::from(e.into_error())))?;
        self.write(name, &bytes)
    }

    pub fn finish(self, subcommand: &str, parameters: Value) -> CliResult<PathBuf> {
        let manifest = Manifest {
            tool: "deconv".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            parameters,
            resolved: Value::Object(self.resolved.into_iter().collect()),
            seed: self.seed,
            inputs: self.inputs,
            outputs: self.outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        let path = self.dir.join(MANIFEST);
        fs::write(&path, text).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }
}
