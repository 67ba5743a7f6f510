//! Behavioral data collection: pairwise year-similarity judgments from a
//! chat endpoint and year embeddings from an embedding endpoint.

pub mod cache;
pub mod checkpoint;
pub mod config;
pub mod embed;
pub mod judge;
pub mod prompt;
pub mod run;

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

pub use cache::{cache_key, ResponseCache};
pub use checkpoint::{Checkpoint, ResponseRecord};
pub use config::ExperimentConfig;
pub use embed::{embed_collect, EmbedOptions, EmbeddingProvider, HttpEmbedder};
pub use judge::{HttpJudge, Judge, JudgeError, JudgeRequest, API_KEY_ENV};
pub use prompt::{build_prompt, parse_rating, DEFAULT_TEMPLATE};
pub use run::{collect_matrix, CollectOptions, CollectOutcome, CollectStats};

/// Opens a line-oriented file for appending, first terminating a torn last
/// line so new records start cleanly.
pub(crate) fn open_append_terminated(path: &Path) -> std::io::Result<File> {
    let mut file = OpenOptions::new().create(true).read(true).append(true).open(path)?;
    let len = file.metadata()?.len();
    if len > 0 {
        file.seek(SeekFrom::Start(len - 1))?;
        let mut last = [0u8; 1];
        file.read_exact(&mut last)?;
        if last[0] != b'\n' {
            file.write_all(b"\n")?;
        }
    }
    Ok(file)
}
