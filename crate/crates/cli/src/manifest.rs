//! Output directory handling and the `manifest.json` written for every run.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use yearsense::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

impl FileEntry {
    pub fn of(path: &Path) -> Result<Self> {
        let mut file = fs::File::open(path)?;
        let mut hasher = Sha256::new();
        let mut buf = vec![0u8; 1 << 16];
        let mut bytes = 0u64;
        loop {
            let n = file.read(&mut buf)?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
            bytes += n as u64;
        }
        Ok(Self {
            path: path.display().to_string(),
            bytes,
            sha256: hex::encode(hasher.finalize()),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub config_digest: String,
    pub started: String,
    pub finished: String,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    pub notes: BTreeMap<String, String>,
}

/// SHA-256 of the compact JSON form (object keys sorted).
pub fn digest_json(v: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(v.to_string().as_bytes()))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// One run: tracks inputs and outputs and refuses to write over an input.
pub struct RunDir {
    dir: PathBuf,
    command: String,
    started: String,
    config: serde_json::Value,
    config_digest: Option<String>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    notes: BTreeMap<String, String>,
}

impl RunDir {
    pub fn create(dir: &Path, command: &str, config: serde_json::Value) -> Result<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            started: now(),
            config,
            config_digest: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            notes: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Replaces the default digest (of the resolved config) with a
    /// command-specific one.
    pub fn set_config_digest(&mut self, digest: String) {
        self.config_digest = Some(digest);
    }

    pub fn note(&mut self, key: &str, value: impl Into<String>) {
        self.notes.insert(key.to_string(), value.into());
    }

    pub fn input(&mut self, path: &Path) {
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
    }

    /// Path for a named output, registered for the manifest.
    pub fn output(&mut self, name: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Ok(target) = path.canonicalize() {
            for input in &self.inputs {
                if input.canonicalize().is_ok_and(|c| c == target) {
                    return Err(Error::Config(format!(
                        "output {} would overwrite an input; choose another --out",
                        path.display()
                    )));
                }
            }
        }
        if !self.outputs.contains(&path) {
            self.outputs.push(path.clone());
        }
        Ok(path)
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.output(name)?;
        fs::write(&path, contents)?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
        text.push('\n');
        self.write(name, text)
    }

    /// Writes rows as CSV under `name`.
    pub fn write_csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let path = self.output(name)?;
        let mut w = csv::Writer::from_path(&path).map_err(yearsense::Error::from)?;
        w.write_record(header).map_err(yearsense::Error::from)?;
        for row in rows {
            w.write_record(row).map_err(yearsense::Error::from)?;
        }
        w.flush()?;
        Ok(path)
    }

    /// Writes `manifest.json` and returns it.
    pub fn finish(self) -> Result<Manifest> {
        let hash_all = |paths: &[PathBuf]| -> Result<Vec<FileEntry>> {
            paths.iter().filter(|p| p.is_file()).map(|p| FileEntry::of(p)).collect()
        };
        let manifest = Manifest {
            tool: "yearsense",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command.clone(),
            argv: std::env::args().collect(),
            config_digest: self.config_digest.clone().unwrap_or_else(|| digest_json(&self.config)),
            config: self.config.clone(),
            started: self.started.clone(),
            finished: now(),
            inputs: hash_all(&self.inputs)?,
            outputs: hash_all(&self.outputs)?,
            notes: self.notes.clone(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Data(e.to_string()))?;
        text.push('\n');
        fs::write(self.dir.join(MANIFEST_NAME), text)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_digests() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.csv");
        fs::write(&input, "abc").unwrap();
        let mut run = RunDir::create(&dir.path().join("out"), "test", serde_json::json!({"b": 1, "a": 2})).unwrap();
        run.input(&input);
        run.write("x.txt", "hello").unwrap();
        let m = run.finish().unwrap();
        assert_eq!(
            m.inputs[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(m.outputs.len(), 1);
        assert_eq!(m.outputs[0].bytes, 5);
        assert_eq!(m.config_digest, digest_json(&serde_json::json!({"a": 2, "b": 1})));
        assert!(dir.path().join("out").join(MANIFEST_NAME).is_file());
    }

    #[test]
    fn refuses_to_overwrite_input() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("similarity.csv");
        fs::write(&input, "abc").unwrap();
        let mut run = RunDir::create(dir.path(), "test", serde_json::Value::Null).unwrap();
        run.input(&input);
        assert!(run.write("similarity.csv", "x").is_err());
        assert_eq!(fs::read_to_string(&input).unwrap(), "abc");
    }
}
