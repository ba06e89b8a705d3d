//! Run directory: CSV tables, the manifest and timing records.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::Value;

pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), num)
}

/// CSV table whose first line records the config hash.
pub struct Table {
    name: String,
    text: String,
    columns: usize,
}

impl Table {
    pub fn new(name: &str, hash: &str, columns: &[&str]) -> Self {
        let mut text = format!("# config_hash={hash}\n");
        text.push_str(&columns.join(","));
        text.push('\n');
        Self { name: name.into(), text, columns: columns.len() }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "row width of {}", self.name);
        let _ = writeln!(self.text, "{}", cells.join(","));
    }
}

pub struct RunDir {
    root: PathBuf,
    hash: String,
    files: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path, hash: &str) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.into(), hash: hash.into(), files: Vec::new() })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn table(&self, name: &str, columns: &[&str]) -> Table {
        Table::new(name, &self.hash, columns)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_table(&mut self, t: Table) -> Result<()> {
        self.write_text(&t.name.clone(), &t.text)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
        self.files.push(name.into());
        Ok(())
    }

    /// Records a file written by other code.
    pub fn register(&mut self, name: &str) {
        self.files.push(name.into());
    }

    /// Writes `manifest.json`, which depends only on the config and results.
    pub fn finish(mut self, manifest: Value) -> Result<Vec<String>> {
        let mut m = manifest;
        self.files.sort();
        m["outputs"] = serde_json::to_value(&self.files)?;
        let text = serde_json::to_string_pretty(&m)? + "\n";
        let p = self.path("manifest.json");
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
        Ok(self.files)
    }
}
