//! Run artifacts: tidy CSV tables, checkpoints, in-run assertions and the
//! JSON manifest that ties them together.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Long-format table: key columns followed by `metric,value`.
pub struct Table {
    name: String,
    keys: Vec<&'static str>,
    rows: Vec<(Vec<String>, String, f64)>,
}

impl Table {
    pub fn new(name: &str, keys: &[&'static str]) -> Self {
        Table {
            name: name.to_string(),
            keys: keys.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, keys: &[&dyn ToString], metric: &str, value: f64) {
        debug_assert_eq!(keys.len(), self.keys.len());
        self.rows.push((keys.iter().map(|k| k.to_string()).collect(), metric.to_string(), value));
    }

    fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = self.keys.clone();
        header.extend(["metric", "value"]);
        w.write_record(&header)?;
        for (keys, metric, value) in &self.rows {
            let mut rec = keys.clone();
            rec.push(metric.clone());
            rec.push(value.to_string());
            w.write_record(&rec)?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
struct FileEntry {
    name: String,
    bytes: u64,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    experiment: &'a str,
    config: &'a C,
    files: Vec<FileEntry>,
    /// SHA-256 over the files in order, each framed as `blob <len>\0<bytes>`.
    content_hash: String,
    assertions: &'a [Assertion],
    all_passed: bool,
}

/// Everything a command produces, written out by [`RunOutput::finish`].
pub struct RunOutput {
    experiment: String,
    out_dir: PathBuf,
    tables: Vec<Table>,
    extra_files: Vec<PathBuf>,
    assertions: Vec<Assertion>,
}

impl RunOutput {
    pub fn new(experiment: &str, out_dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        Ok(RunOutput {
            experiment: experiment.to_string(),
            out_dir: out_dir.to_path_buf(),
            tables: Vec::new(),
            extra_files: Vec::new(),
            assertions: Vec::new(),
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn add_table(&mut self, table: Table) {
        self.tables.push(table);
    }

    /// Registers a file the command wrote itself (a checkpoint, say) so its
    /// hash lands in the manifest.
    pub fn add_file(&mut self, path: PathBuf) {
        self.extra_files.push(path);
    }

    pub fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        let a = Assertion {
            name: name.into(),
            pass,
            detail: detail.into(),
        };
        if a.pass {
            log::info!("PASS {}: {}", a.name, a.detail);
        } else {
            log::warn!("FAIL {}: {}", a.name, a.detail);
        }
        self.assertions.push(a);
    }

    /// Writes every table and the manifest; returns whether all assertions
    /// passed.
    pub fn finish<C: Serialize>(self, config: &C) -> Result<bool> {
        let mut files = Vec::new();
        let mut content = Sha256::new();
        let mut record = |name: String, bytes: &[u8]| {
            content.update(format!("blob {}\0", bytes.len()));
            content.update(bytes);
            files.push(FileEntry {
                name,
                bytes: bytes.len() as u64,
                sha256: hex::encode(Sha256::digest(bytes)),
            });
        };
        for t in &self.tables {
            let bytes = t.to_bytes()?;
            let name = format!("{}.csv", t.name);
            let path = self.out_dir.join(&name);
            std::fs::write(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
            record(name, &bytes);
        }
        for path in &self.extra_files {
            let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            let name = path
                .strip_prefix(&self.out_dir)
                .unwrap_or(path)
                .to_string_lossy()
                .into_owned();
            record(name, &bytes);
        }
        let all_passed = self.assertions.iter().all(|a| a.pass);
        let manifest = Manifest {
            experiment: &self.experiment,
            config,
            files,
            content_hash: hex::encode(content.finalize()),
            assertions: &self.assertions,
            all_passed,
        };
        let path = self.out_dir.join(format!("{}.manifest.json", self.experiment));
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(all_passed)
    }
}
