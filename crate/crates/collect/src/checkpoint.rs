//! Resumable collection log: a JSON header line with the config digest,
//! then one JSON record per finished pair.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use yearsense::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "yearsense-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    digest: String,
}

/// Outcome of one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub index: usize,
    pub pair: (i32, i32),
    /// Last reply text, if any reply arrived.
    pub raw: Option<String>,
    /// `None` marks the cell Missing.
    pub rating: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// Judge calls made; 0 for a cache hit.
    pub attempts: u32,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

pub struct Checkpoint {
    path: PathBuf,
    file: File,
    digest: String,
    completed: BTreeMap<usize, Option<f64>>,
}

impl Checkpoint {
    /// Opens an existing checkpoint (refusing a digest mismatch) or starts a
    /// new one. A torn final record is ignored and will be redone.
    pub fn open(path: impl AsRef<Path>, digest: &str) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut completed = BTreeMap::new();
        let fresh = !path.exists() || std::fs::metadata(&path)?.len() == 0;
        if !fresh {
            let mut lines = BufReader::new(File::open(&path)?).lines();
            let first = lines.next().transpose()?.unwrap_or_default();
            let header: Header = serde_json::from_str(&first)
                .map_err(|e| Error::Data(format!("{}: unreadable checkpoint header: {e}", path.display())))?;
            if header.format != CHECKPOINT_FORMAT || header.version != CHECKPOINT_VERSION {
                return Err(Error::Data(format!(
                    "{}: not a version {CHECKPOINT_VERSION} checkpoint",
                    path.display()
                )));
            }
            if header.digest != digest {
                return Err(Error::Config(format!(
                    "{} was written for a different configuration (digest {}, expected {digest}); refusing to resume",
                    path.display(),
                    header.digest
                )));
            }
            for line in lines {
                if let Ok(r) = serde_json::from_str::<ResponseRecord>(&line?) {
                    completed.insert(r.index, r.rating);
                }
            }
        }
        let mut file = crate::open_append_terminated(&path)?;
        if fresh {
            let header = Header {
                format: CHECKPOINT_FORMAT.into(),
                version: CHECKPOINT_VERSION,
                digest: digest.to_string(),
            };
            writeln!(file, "{}", serde_json::to_string(&header).expect("header serializes"))?;
            file.flush()?;
        }
        Ok(Self {
            path,
            file,
            digest: digest.to_string(),
            completed,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    /// Pair index to rating (`None` = Missing) for every finished pair.
    pub fn completed(&self) -> &BTreeMap<usize, Option<f64>> {
        &self.completed
    }

    pub fn append(&mut self, record: &ResponseRecord) -> Result<()> {
        let line = serde_json::to_string(record).expect("record serializes");
        writeln!(self.file, "{line}")?;
        self.completed.insert(record.index, record.rating);
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.file.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(index: usize, rating: Option<f64>) -> ResponseRecord {
        ResponseRecord {
            index,
            pair: (2000, 2000 + index as i32),
            raw: rating.map(|r| r.to_string()),
            rating,
            failure: None,
            attempts: 1,
            timestamp: 0,
        }
    }

    #[test]
    fn resume_and_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ck.jsonl");
        {
            let mut c = Checkpoint::open(&p, "abc").unwrap();
            c.append(&rec(0, Some(0.5))).unwrap();
            c.append(&rec(3, None)).unwrap();
        }
        // torn tail
        std::fs::OpenOptions::new()
            .append(true)
            .open(&p)
            .unwrap()
            .write_all(b"{\"index\":9,\"pa")
            .unwrap();
        let mut c = Checkpoint::open(&p, "abc").unwrap();
        assert_eq!(c.completed().len(), 2);
        assert_eq!(c.completed()[&3], None);
        c.append(&rec(9, Some(1.0))).unwrap();
        drop(c);
        let c = Checkpoint::open(&p, "abc").unwrap();
        assert_eq!(c.completed()[&9], Some(1.0));
        assert!(matches!(Checkpoint::open(&p, "other"), Err(Error::Config(_))));
    }
}
