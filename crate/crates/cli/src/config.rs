//! Optional TOML config file. Every key mirrors a long flag (dashes become
//! underscores); a flag given on the command line wins over the file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use yearsense::{Error, Result};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub condition: Option<String>,
    pub range: Option<String>,
    pub pairs: Option<String>,
    pub template: Option<String>,
    pub stimulus_template: Option<String>,
    pub window: Option<usize>,
    pub reference: Option<i32>,
    pub criteria: Option<String>,
    pub topk: Option<usize>,
    pub layers: Option<String>,
    pub metric: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub max_in_flight: Option<usize>,
    pub retries: Option<u32>,
    pub cache: Option<PathBuf>,
    pub hook: Option<String>,
    pub palette: Option<String>,
    pub downsample: Option<usize>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
    }
}

/// Flag, then config file, then default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Like [`pick`] for values the file stores as strings.
pub fn pick_parsed<T>(flag: Option<T>, file: Option<&String>, default: T) -> Result<T>
where
    T: FromStr<Err = Error>,
{
    if let Some(v) = flag {
        return Ok(v);
    }
    match file {
        Some(s) => s.parse(),
        None => Ok(default),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use yearsense::YearRange;

    #[test]
    fn flags_win_over_file() {
        let cfg: FileConfig = toml::from_str("range = \"1900:1910\"\nwindow = 7\n").unwrap();
        assert_eq!(pick(Some(3), cfg.window, 5), 3);
        assert_eq!(pick(None, cfg.window, 5), 7);
        assert_eq!(pick(None, None, 5), 5);
        let r: YearRange = pick_parsed(None, cfg.range.as_ref(), YearRange::default()).unwrap();
        assert_eq!((r.start(), r.end()), (1900, 1910));
        let flag = YearRange::new(2000, 2001).unwrap();
        assert_eq!(pick_parsed(Some(flag), cfg.range.as_ref(), YearRange::default()).unwrap(), flag);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<FileConfig>("windw = 3").is_err());
    }
}
