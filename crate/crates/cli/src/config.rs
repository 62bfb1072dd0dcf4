//! Flat `key = value` pipeline configuration.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use nbwrangle_harvest::HarvestConfig;
use thiserror::Error;

pub const KEYS: [&str; 11] = [
    "min_usability_score",
    "max_dataset_bytes",
    "target_notebook_count",
    "max_upvotes_exclusive",
    "max_pages",
    "page_size",
    "min_distinct_datasets",
    "out_dir",
    "ledger_path",
    "fixture_dir",
    "rate_per_minute",
];

pub const DEFAULT_OUT_DIR: &str = "out";
pub const LEDGER_FILE: &str = "ledger.jsonl";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("`{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub harvest: HarvestConfig,
    pub out_dir: PathBuf,
    /// `None` means `<out_dir>/ledger.jsonl`.
    pub ledger_path: Option<PathBuf>,
    /// Set for mock mode; unset means the live API.
    pub fixture_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            harvest: HarvestConfig::default(),
            out_dir: PathBuf::from(DEFAULT_OUT_DIR),
            ledger_path: None,
            fixture_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn ledger_path(&self) -> PathBuf {
        self.ledger_path
            .clone()
            .unwrap_or_else(|| self.out_dir.join(LEDGER_FILE))
    }

    /// Where harvested notebooks and dataset metadata are stored.
    pub fn store_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn traces_dir(&self) -> PathBuf {
        self.out_dir.join("traces")
    }
}

fn parse_count(key: &str, value: &str, min: u64) -> Result<u64, ConfigError> {
    let n: i128 = value
        .parse()
        .map_err(|_| invalid(key, format!("`{value}` is not an integer")))?;
    if n < 0 {
        return Err(invalid(key, "must not be negative"));
    }
    if n < i128::from(min) {
        return Err(invalid(key, format!("must be at least {min}")));
    }
    u64::try_from(n).map_err(|_| invalid(key, "too large"))
}

fn parse_u32(key: &str, value: &str, min: u64) -> Result<u32, ConfigError> {
    u32::try_from(parse_count(key, value, min)?).map_err(|_| invalid(key, "too large"))
}

fn parse_path(key: &str, value: &str, base: &Path) -> Result<PathBuf, ConfigError> {
    if value.is_empty() {
        return Err(invalid(key, "path is empty"));
    }
    let path = PathBuf::from(value);
    Ok(if path.is_relative() { base.join(path) } else { path })
}

/// Parses configuration text. Blank lines and `#` comments are ignored;
/// relative paths resolve against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<PipelineConfig, ConfigError> {
    let mut config = PipelineConfig::default();
    let mut out_dir_set = false;
    let mut seen = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: line.to_string(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(invalid(key, "unknown key"));
        }
        if !seen.insert(key.to_string()) {
            return Err(invalid(key, "given more than once"));
        }
        let h = &mut config.harvest;
        match key {
            "min_usability_score" => {
                let v: f64 = value
                    .parse()
                    .map_err(|_| invalid(key, format!("`{value}` is not a number")))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(invalid(key, "must lie in [0, 1]"));
                }
                h.min_usability_score = v;
            }
            "max_dataset_bytes" => h.max_dataset_bytes = parse_count(key, value, 1)?,
            "target_notebook_count" => h.target_notebook_count = parse_count(key, value, 1)?,
            "max_upvotes_exclusive" => h.max_upvotes_exclusive = parse_count(key, value, 1)?,
            "max_pages" => h.max_pages = parse_u32(key, value, 1)?,
            "page_size" => h.page_size = parse_u32(key, value, 1)?,
            "min_distinct_datasets" => h.min_distinct_datasets = parse_count(key, value, 1)?,
            "rate_per_minute" => h.rate_per_minute = parse_u32(key, value, 0)?,
            "out_dir" => {
                config.out_dir = parse_path(key, value, base)?;
                out_dir_set = true;
            }
            "ledger_path" => config.ledger_path = Some(parse_path(key, value, base)?),
            "fixture_dir" => config.fixture_dir = Some(parse_path(key, value, base)?),
            _ => unreachable!("key list checked above"),
        }
    }
    if !out_dir_set {
        config.out_dir = base.join(DEFAULT_OUT_DIR);
    }
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<PipelineConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    parse_config(&text, base)
}

/// Renders every effective setting; loading the result gives back `config`.
pub fn dump_config(config: &PipelineConfig) -> String {
    let h = &config.harvest;
    let mut out = String::new();
    let mut put = |key: &str, value: String| {
        out.push_str(key);
        out.push_str(" = ");
        out.push_str(&value);
        out.push('\n');
    };
    put("min_usability_score", h.min_usability_score.to_string());
    put("max_dataset_bytes", h.max_dataset_bytes.to_string());
    put("target_notebook_count", h.target_notebook_count.to_string());
    put("max_upvotes_exclusive", h.max_upvotes_exclusive.to_string());
    put("max_pages", h.max_pages.to_string());
    put("page_size", h.page_size.to_string());
    put("min_distinct_datasets", h.min_distinct_datasets.to_string());
    put("out_dir", config.out_dir.display().to_string());
    put("ledger_path", config.ledger_path().display().to_string());
    if let Some(dir) = &config.fixture_dir {
        put("fixture_dir", dir.display().to_string());
    }
    put("rate_per_minute", h.rate_per_minute.to_string());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<PipelineConfig, ConfigError> {
        parse_config(text, Path::new("/cfg"))
    }

    #[test]
    fn missing_keys_take_defaults() {
        let c = parse("target_notebook_count = 100\nout_dir = ./out\n").unwrap();
        assert_eq!(c.harvest.max_upvotes_exclusive, 10);
        assert_eq!(c.harvest.max_pages, 20);
        assert_eq!(c.harvest.page_size, 100);
        assert_eq!(c.harvest.target_notebook_count, 100);
        assert_eq!(c.out_dir, Path::new("/cfg/./out"));
        assert_eq!(c.ledger_path(), Path::new("/cfg/./out/ledger.jsonl"));
        assert_eq!(c.fixture_dir, None);
    }

    #[test]
    fn negative_page_cap_is_rejected() {
        let err = parse("max_pages = -1").unwrap_err();
        assert!(matches!(&err, ConfigError::Invalid { key, .. } if key == "max_pages"), "{err}");
    }

    #[test]
    fn target_must_be_positive() {
        assert!(parse("target_notebook_count = 0").is_err());
    }

    #[test]
    fn unknown_and_repeated_keys_are_rejected() {
        assert!(matches!(parse("max_page = 3"), Err(ConfigError::Invalid { .. })));
        assert!(parse("page_size = 3\npage_size = 4").is_err());
        assert!(matches!(parse("page_size 3"), Err(ConfigError::Syntax { line: 1, .. })));
    }

    #[test]
    fn usability_must_be_a_fraction() {
        assert!(parse("min_usability_score = 1.5").is_err());
        assert!(parse("min_usability_score = x").is_err());
        assert_eq!(parse("min_usability_score = 0.25").unwrap().harvest.min_usability_score, 0.25);
    }

    #[test]
    fn comments_and_absolute_paths() {
        let c = parse("# mock\n\nfixture_dir = /data/catalog\nrate_per_minute = 0\n").unwrap();
        assert_eq!(c.fixture_dir.as_deref(), Some(Path::new("/data/catalog")));
        assert_eq!(c.harvest.rate_per_minute, 0);
    }

    #[test]
    fn dump_then_load_is_a_fixpoint() {
        let text = "min_usability_score = 0.65\nmax_dataset_bytes = 5000\ntarget_notebook_count = 7\n\
                    max_upvotes_exclusive = 3\nmax_pages = 4\npage_size = 10\nmin_distinct_datasets = 2\n\
                    out_dir = o\nfixture_dir = f\nrate_per_minute = 30\n";
        let first = parse(text).unwrap();
        let second = parse(&dump_config(&first)).unwrap();
        let third = parse(&dump_config(&second)).unwrap();
        assert_eq!(first.harvest, second.harvest);
        assert_eq!(first.ledger_path(), second.ledger_path());
        assert_eq!(second, third);
        assert_eq!(dump_config(&second), dump_config(&third));
    }
}
