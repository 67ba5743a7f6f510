//! Append-only JSONL response cache keyed by `sha256(model, prompt, temperature)`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use yearsense::Result;

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    key: String,
    response: String,
}

pub fn cache_key(model: &str, prompt: &str, temperature: f64) -> String {
    let mut h = Sha256::new();
    h.update(model.as_bytes());
    h.update([0u8]);
    h.update(prompt.as_bytes());
    h.update([0u8]);
    h.update(temperature.to_string().as_bytes());
    hex::encode(h.finalize())
}

pub struct ResponseCache {
    path: PathBuf,
    map: Mutex<HashMap<String, String>>,
    file: Mutex<File>,
}

impl ResponseCache {
    /// Opens or creates the cache file. Unreadable lines (e.g. a torn final
    /// write) are skipped.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut map = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(&path)?).lines() {
                if let Ok(e) = serde_json::from_str::<Entry>(&line?) {
                    map.insert(e.key, e.response);
                }
            }
        }
        let file = crate::open_append_terminated(&path)?;
        Ok(Self {
            path,
            map: Mutex::new(map),
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.map.lock().expect("cache lock").get(key).cloned()
    }

    pub fn put(&self, key: &str, response: &str) -> Result<()> {
        let mut line = serde_json::to_string(&Entry {
            key: key.to_string(),
            response: response.to_string(),
        })
        .expect("entry serializes");
        line.push('\n');
        {
            let mut f = self.file.lock().expect("cache lock");
            f.write_all(line.as_bytes())?;
        }
        self.map
            .lock()
            .expect("cache lock")
            .insert(key.to_string(), response.to_string());
        Ok(())
    }
}
