use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::Result;

use super::config::ExperimentConfig;

/// One output CSV: a file name, column names and already-formatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.to_string(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// CSV text preceded by a `#` comment naming the experiment, seed, replicate
    /// count, configuration hash and library version.
    pub fn to_csv(&self, config: &ExperimentConfig) -> Result<String> {
        let mut out = format!(
            "# experiment={} seed={} replicates={} config={} cfn-core={}\n",
            config.id(),
            config.seed,
            config.replicates,
            config.hash(),
            env!("CARGO_PKG_VERSION")
        )
        .into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.header)?;
            for row in &self.rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        Ok(String::from_utf8(out).expect("CSV of UTF-8 cells"))
    }

    pub fn write(&self, dir: &Path, config: &ExperimentConfig) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.csv", self.name));
        let mut f = fs::File::create(&path)?;
        f.write_all(self.to_csv(config)?.as_bytes())?;
        Ok(path)
    }
}

/// Shortest round-trip decimal form, so equal values always print identically.
pub(crate) fn num(v: f64) -> String {
    format!("{v}")
}
