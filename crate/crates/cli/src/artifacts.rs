//! Artifact writing. Every file carries the tool version, the config hash and
//! the root seed: JSON files in a leading `meta` object, CSV files in a
//! `#`-prefixed first line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

pub const TOOL: &str = "ivts";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
}

#[derive(Serialize)]
struct Wrapped<'a, T: Serialize> {
    meta: &'a Meta,
    #[serde(flatten)]
    body: &'a T,
}

pub struct Artifacts {
    root: PathBuf,
    meta: Meta,
}

/// Keeps `[A-Za-z0-9_-]` and replaces everything else, so location ids map
/// to portable file names.
pub fn file_stem(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() {
        "_".into()
    } else {
        s
    }
}

/// Shortest round-trip decimal form; NaN becomes an empty field.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

impl Artifacts {
    pub fn new(root: &Path, meta: Meta) -> anyhow::Result<Self> {
        fs::create_dir_all(root)
            .with_context(|| format!("creating output directory {}", root.display()))?;
        let probe = root.join(".ivts-write-test");
        fs::write(&probe, b"")
            .with_context(|| format!("output directory {} is not writable", root.display()))?;
        fs::remove_file(&probe).ok();
        Ok(Self {
            root: root.to_path_buf(),
            meta,
        })
    }

    pub fn meta(&self) -> &Meta {
        &self.meta
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// `# ivts <version> command=... config_sha256=... seed=...`
    pub fn comment_line(&self) -> String {
        format!(
            "# {} {} command={} config_sha256={} seed={}",
            self.meta.tool,
            self.meta.version,
            self.meta.command,
            self.meta.config_sha256,
            self.meta.seed
        )
    }

    fn target(&self, rel: &str) -> anyhow::Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(path)
    }

    /// Writes `{"meta": ..., <fields of body>}`; `body` must serialize as a map.
    pub fn write_json<T: Serialize>(&self, rel: &str, body: &T) -> anyhow::Result<PathBuf> {
        let path = self.target(rel)?;
        let mut text = serde_json::to_string_pretty(&Wrapped {
            meta: &self.meta,
            body,
        })?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn write_csv<I>(&self, rel: &str, header: &[String], rows: I) -> anyhow::Result<PathBuf>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.target(rel)?;
        let mut buf = Vec::new();
        writeln!(buf, "{}", self.comment_line())?;
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header)?;
            for row in rows {
                w.write_record(&row)?;
            }
            w.flush()?;
        }
        fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// Writes raw bytes (used for data files that other commands read back).
    pub fn write_raw(&self, rel: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
        let path = self.target(rel)?;
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_are_portable() {
        assert_eq!(file_stem("ES/0001 Madrid"), "ES_0001_Madrid");
        assert_eq!(file_stem(""), "_");
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, -1e-300, 12345.678, 1.0 / 3.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(f64::NAN), "");
    }
}
