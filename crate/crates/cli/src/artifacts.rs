//! Artifact files exchanged between pipeline stages. The files are the only
//! inter-stage contract, so every stage can be rerun in isolation.

use serde::de::DeserializeOwned;
use serde::Serialize;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use tmtree::corpus::DocTermCounts;
use tmtree::{Error, Result};

pub struct Artifacts {
    dir: PathBuf,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Artifacts> {
        std::fs::create_dir_all(dir)?;
        Ok(Artifacts { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name);
        let mut file = std::fs::File::create(&path)?;
        serde_json::to_writer(&mut file, value)?;
        file.write_all(b"\n")?;
        Ok(path)
    }

    pub fn read_json<T: DeserializeOwned>(&self, name: &str, produced_by: &str) -> Result<T> {
        let path = self.path(name);
        let text = std::fs::read_to_string(&path).map_err(|_| {
            Error::Data(format!(
                "missing artifact {}: run `{produced_by}` first",
                path.display()
            ))
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write_counts(&self, name: &str, counts: &[DocTermCounts]) -> Result<PathBuf> {
        let path = self.path(name);
        let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
        for c in counts {
            serde_json::to_writer(&mut file, c)?;
            file.write_all(b"\n")?;
        }
        file.flush()?;
        Ok(path)
    }

    pub fn read_counts(&self, name: &str, produced_by: &str) -> Result<Vec<DocTermCounts>> {
        let path = self.path(name);
        let file = std::fs::File::open(&path).map_err(|_| {
            Error::Data(format!(
                "missing artifact {}: run `{produced_by}` first",
                path.display()
            ))
        })?;
        let mut out = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line?;
            if !line.trim().is_empty() {
                out.push(serde_json::from_str(&line)?);
            }
        }
        Ok(out)
    }

    pub fn csv_writer(&self, name: &str) -> Result<csv::Writer<std::fs::File>> {
        let path = self.path(name);
        Ok(csv::Writer::from_path(&path)?)
    }

    pub fn csv_reader(&self, name: &str, produced_by: &str) -> Result<csv::Reader<std::fs::File>> {
        let path = self.path(name);
        if !path.exists() {
            return Err(Error::Data(format!(
                "missing artifact {}: run `{produced_by}` first",
                path.display()
            )));
        }
        Ok(csv::Reader::from_path(&path)?)
    }
}

pub const VOCAB: &str = "vocab.json";
pub const COUNTS: &str = "counts.jsonl";
pub const MODEL: &str = "model.json";
pub const ASSIGNMENTS: &str = "assignments.csv";
pub const TOPIC_TERMS: &str = "topic_terms.csv";
pub const TREE: &str = "tree.json";
pub const SEGMENTS: &str = "segments.csv";
pub const STABILITY: &str = "stability.csv";
pub const SUMMARY: &str = "summary.json";
pub const ACF: &str = "acf.csv";
pub const DIAGNOSTICS: &str = "diagnostics.csv";
pub const REPORT: &str = "report.md";
