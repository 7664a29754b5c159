//! Report files. Every file carries the tool version and the resolved
//! scenario; CSV files put them in leading `#` lines ahead of the header.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::json;

use crate::config::{Format, ScenarioConfig};

pub const TOOL: &str = "semilab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct Sink {
    dir: PathBuf,
    format: Format,
    preamble: String,
    config_json: serde_json::Value,
    written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: &Path, format: Format, cfg: &ScenarioConfig) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let config_json = serde_json::to_value(cfg)?;
        let preamble = format!("# {TOOL} {VERSION}\n# config: {}\n", serde_json::to_string(&config_json)?);
        Ok(Sink {
            dir: dir.to_path_buf(),
            format,
            preamble,
            config_json,
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn path(&self, stem: &str, ext: &str) -> PathBuf {
        self.dir.join(format!("{stem}.{ext}"))
    }

    /// Writes `<stem>.csv` from a body produced by `body` (header included).
    pub fn csv(&mut self, stem: &str, body: impl FnOnce(&mut Vec<u8>) -> anyhow::Result<()>) -> anyhow::Result<()> {
        if self.format == Format::Json {
            return Ok(());
        }
        let mut buf = self.preamble.clone().into_bytes();
        body(&mut buf)?;
        let p = self.path(stem, "csv");
        fs::write(&p, buf).with_context(|| format!("writing {}", p.display()))?;
        self.written.push(p);
        Ok(())
    }

    /// Writes `<stem>.json` as `{tool, version, config, <key>: report}`.
    pub fn json<T: Serialize>(&mut self, stem: &str, key: &str, report: &T) -> anyhow::Result<()> {
        if self.format == Format::Csv {
            return Ok(());
        }
        let mut doc = json!({ "tool": TOOL, "version": VERSION, "config": self.config_json });
        doc[key] = serde_json::to_value(report)?;
        let p = self.path(stem, "json");
        fs::write(&p, serde_json::to_string_pretty(&doc)? + "\n").with_context(|| format!("writing {}", p.display()))?;
        self.written.push(p);
        Ok(())
    }
}

/// The CSV body of a file written by [`Sink::csv`], without the preamble.
pub fn csv_body(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}

/// A CSV writer over a byte buffer.
pub fn writer(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::Writer::from_writer(buf)
}
