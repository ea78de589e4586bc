//! Report ingestion and text preprocessing.
//!
//! Turns report tables (CSV or JSONL) into typed [`Report`] records and the
//! free-text summaries into a shared [`Vocabulary`] with sparse
//! [`DocTermCounts`]. The text pipeline is tokenize -> stop-word filter ->
//! stem; all of it is deterministic, so identical inputs produce
//! byte-identical artifacts.

mod porter;

pub use porter::stem;

use crate::error::{Error, Result};
use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

/// Logical column names expected in the input table.
pub const COLUMNS: [&str; 11] = [
    "id",
    "date",
    "region",
    "attack_on",
    "dcolor",
    "complex_attack",
    "kia_civilian",
    "kia_host",
    "kia_friend",
    "kia_enemy",
    "summary",
];

/// The categorical report columns that serve as split candidates.
pub const CATEGORICAL_COLUMNS: [&str; 4] = ["region", "attack_on", "dcolor", "complex_attack"];

/// One incident record. The target `y` is precomputed as the sum of the four
/// fatality counts; absent categorical values carry the explicit "NA" level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub id: String,
    pub date: NaiveDateTime,
    pub region: String,
    pub attack_on: String,
    pub dcolor: String,
    pub complex_attack: String,
    pub kia_civilian: u32,
    pub kia_host: u32,
    pub kia_friend: u32,
    pub kia_enemy: u32,
    pub summary: String,
    pub y: u64,
}

impl Report {
    fn finish(mut self) -> Report {
        self.y = self.kia_civilian as u64
            + self.kia_host as u64
            + self.kia_friend as u64
            + self.kia_enemy as u64;
        self
    }
}

/// Stop-word set used by [`remove_stopwords`].
#[derive(Debug, Clone)]
pub struct StopList {
    words: HashSet<String>,
}

impl StopList {
    /// The English stop list shipped with the crate (the Snowball list used
    /// by the common text-mining toolchains).
    pub fn default_english() -> StopList {
        Self::from_lines(include_str!("../../data/stopwords_en.txt"))
    }

    pub fn from_lines(text: &str) -> StopList {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|w| !w.is_empty())
            .map(str::to_string)
            .collect();
        StopList { words }
    }

    pub fn from_path(path: &Path) -> Result<StopList> {
        Ok(Self::from_lines(&std::fs::read_to_string(path)?))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Split text into lowercased maximal runs of alphabetic characters.
/// Digits act as separators, so purely numeric runs never form tokens;
/// tokens shorter than two characters are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphabetic() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            if current.chars().count() >= 2 {
                tokens.push(std::mem::take(&mut current));
            } else {
                current.clear();
            }
        }
    }
    if current.chars().count() >= 2 {
        tokens.push(current);
    }
    tokens
}

/// Order-preserving stop-word filter.
pub fn remove_stopwords(tokens: Vec<String>, stoplist: &StopList) -> Vec<String> {
    tokens.into_iter().filter(|t| !stoplist.contains(t)).collect()
}

/// Full text pipeline for one summary: tokenize, drop stop words, stem.
pub fn preprocess_text(text: &str, stoplist: &StopList) -> Vec<String> {
    remove_stopwords(tokenize(text), stoplist)
        .iter()
        .map(|t| stem(t))
        .collect()
}

/// Ordered term list shared by every document of a corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "VocabularyJson", into = "VocabularyJson")]
pub struct Vocabulary {
    terms: Vec<String>,
    min_count: usize,
    index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyJson {
    terms: Vec<String>,
    min_count: usize,
}

impl From<VocabularyJson> for Vocabulary {
    fn from(v: VocabularyJson) -> Vocabulary {
        Vocabulary::from_terms(v.terms, v.min_count)
    }
}

impl From<Vocabulary> for VocabularyJson {
    fn from(v: Vocabulary) -> VocabularyJson {
        VocabularyJson { terms: v.terms, min_count: v.min_count }
    }
}

impl Vocabulary {
    fn from_terms(terms: Vec<String>, min_count: usize) -> Vocabulary {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { terms, min_count, index }
    }

    pub fn size(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, idx: u32) -> &str {
        &self.terms[idx as usize]
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn position(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }
}

/// Collect the terms occurring at least `min_count` times across all
/// processed documents, sorted lexicographically.
pub fn build_vocabulary(docs: &[Vec<String>], min_count: usize) -> Result<Vocabulary> {
    if min_count < 1 {
        return Err(Error::Config("min_count must be >= 1".into()));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in docs {
        for term in doc {
            *counts.entry(term.as_str()).or_insert(0) += 1;
        }
    }
    let terms: Vec<String> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(t, _)| t.to_string())
        .collect();
    if terms.is_empty() {
        return Err(Error::Data(format!(
            "empty vocabulary: no term reaches min_count = {min_count}"
        )));
    }
    Ok(Vocabulary::from_terms(terms, min_count))
}

/// Sparse bag-of-words counts of one document over a [`Vocabulary`].
/// Term indices are strictly increasing and `total` is the number of
/// retained (in-vocabulary) tokens; `total == 0` marks an empty document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocTermCounts {
    pub doc_id: String,
    pub entries: Vec<(u32, u32)>,
    pub total: u32,
}

impl DocTermCounts {
    pub fn is_empty(&self) -> bool {
        self.total == 0
    }
}

/// Aggregate a processed token list into counts; out-of-vocabulary tokens
/// are dropped.
pub fn to_counts(doc_id: &str, tokens: &[String], vocab: &Vocabulary) -> DocTermCounts {
    let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
    for token in tokens {
        if let Some(idx) = vocab.position(token) {
            *counts.entry(idx).or_insert(0) += 1;
        }
    }
    let entries: Vec<(u32, u32)> = counts.into_iter().collect();
    let total = entries.iter().map(|&(_, c)| c).sum();
    DocTermCounts { doc_id: doc_id.to_string(), entries, total }
}

/// Input file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
    Jsonl,
}

/// Optional mapping from logical column names to the file's actual headers.
pub type ColumnMap = HashMap<String, String>;

pub fn load_reports(path: &Path, format: InputFormat, column_map: &ColumnMap) -> Result<Vec<Report>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    match format {
        InputFormat::Csv => load_reports_csv(file, column_map),
        InputFormat::Jsonl => load_reports_jsonl(file, column_map),
    }
}

fn parse_date(s: &str, row: usize) -> Result<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S") {
        return Ok(dt);
    }
    if let Ok(dt) = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S") {
        return Ok(dt);
    }
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(s) {
        return Ok(dt.naive_utc());
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight"));
    }
    Err(Error::Data(format!("row {row}: unparseable date {s:?}")))
}

fn parse_count(s: &str, column: &str, row: usize) -> Result<u32> {
    let s = s.trim();
    let v: i64 = s
        .parse()
        .map_err(|_| Error::Data(format!("row {row}: column {column}: invalid count {s:?}")))?;
    if v < 0 {
        return Err(Error::Data(format!("row {row}: column {column}: negative count {v}")));
    }
    u32::try_from(v).map_err(|_| Error::Data(format!("row {row}: column {column}: count {v} too large")))
}

fn categorical_level(s: &str) -> String {
    let t = s.trim();
    if t.is_empty() {
        "NA".to_string()
    } else {
        t.to_string()
    }
}

fn check_unique_ids(reports: &[Report]) -> Result<()> {
    let mut seen = HashSet::with_capacity(reports.len());
    for r in reports {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::Data(format!("duplicate report id {:?}", r.id)));
        }
    }
    Ok(())
}

/// Parse reports from CSV with a header row.
pub fn load_reports_csv<R: Read>(reader: R, column_map: &ColumnMap) -> Result<Vec<Report>> {
    let mut csv_reader = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    let mut positions: HashMap<&str, usize> = HashMap::new();
    for logical in COLUMNS {
        let actual = column_map.get(logical).map(String::as_str).unwrap_or(logical);
        let pos = headers
            .iter()
            .position(|h| h == actual)
            .ok_or_else(|| Error::Data(format!("missing column {actual:?} (for {logical})")))?;
        positions.insert(logical, pos);
    }
    let field = |rec: &csv::StringRecord, name: &str| -> String {
        rec.get(positions[name]).unwrap_or("").to_string()
    };

    let mut reports = Vec::new();
    for (i, record) in csv_reader.records().enumerate() {
        let row = i + 2; // 1-based, after the header line
        let rec = record.map_err(|e| Error::Data(format!("row {row}: malformed record: {e}")))?;
        let id = field(&rec, "id").trim().to_string();
        if id.is_empty() {
            return Err(Error::Data(format!("row {row}: empty id")));
        }
        let report = Report {
            id,
            date: parse_date(&field(&rec, "date"), row)?,
            region: categorical_level(&field(&rec, "region")),
            attack_on: categorical_level(&field(&rec, "attack_on")),
            dcolor: categorical_level(&field(&rec, "dcolor")),
            complex_attack: categorical_level(&field(&rec, "complex_attack")),
            kia_civilian: parse_count(&field(&rec, "kia_civilian"), "kia_civilian", row)?,
            kia_host: parse_count(&field(&rec, "kia_host"), "kia_host", row)?,
            kia_friend: parse_count(&field(&rec, "kia_friend"), "kia_friend", row)?,
            kia_enemy: parse_count(&field(&rec, "kia_enemy"), "kia_enemy", row)?,
            summary: field(&rec, "summary"),
            y: 0,
        }
        .finish();
        reports.push(report);
    }
    check_unique_ids(&reports)?;
    Ok(reports)
}

/// Parse reports from JSON lines. Counts, id, date and summary are required;
/// missing categorical fields become the "NA" level.
pub fn load_reports_jsonl<R: Read>(reader: R, column_map: &ColumnMap) -> Result<Vec<Report>> {
    let buf = BufReader::new(reader);
    let key = |logical: &str| -> String {
        column_map.get(logical).cloned().unwrap_or_else(|| logical.to_string())
    };
    let mut reports = Vec::new();
    for (i, line) in buf.lines().enumerate() {
        let row = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| Error::Data(format!("row {row}: invalid json: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Data(format!("row {row}: expected a json object")))?;
        let get_str = |logical: &str| -> Option<String> {
            obj.get(&key(logical)).map(|v| match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            })
        };
        let required = |logical: &str| -> Result<String> {
            get_str(logical).ok_or_else(|| Error::Data(format!("row {row}: missing field {logical:?}")))
        };
        let count = |logical: &str| -> Result<u32> {
            let raw = required(logical)?;
            parse_count(&raw, logical, row)
        };
        let id = required("id")?.trim().to_string();
        if id.is_empty() {
            return Err(Error::Data(format!("row {row}: empty id")));
        }
        let report = Report {
            id,
            date: parse_date(&required("date")?, row)?,
            region: categorical_level(&get_str("region").unwrap_or_default()),
            attack_on: categorical_level(&get_str("attack_on").unwrap_or_default()),
            dcolor: categorical_level(&get_str("dcolor").unwrap_or_default()),
            complex_attack: categorical_level(&get_str("complex_attack").unwrap_or_default()),
            kia_civilian: count("kia_civilian")?,
            kia_host: count("kia_host")?,
            kia_friend: count("kia_friend")?,
            kia_enemy: count("kia_enemy")?,
            summary: required("summary")?,
            y: 0,
        }
        .finish();
        reports.push(report);
    }
    check_unique_ids(&reports)?;
    Ok(reports)
}

/// Observed level set of a categorical column, in first-appearance order.
pub fn observed_levels<'a>(values: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut levels = Vec::new();
    for v in values {
        if seen.insert(v) {
            levels.push(v.to_string());
        }
    }
    levels
}
