use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One submission in the canonical JSONL interchange format.
///
/// Optional numeric fields are omitted from the JSON when absent; string
/// fields default to empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionRecord {
    pub id: String,
    pub created_utc: i64,
    #[serde(default)]
    pub country: String,
    #[serde(default)]
    pub city: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
    #[serde(default)]
    pub tzid: String,
    #[serde(default)]
    pub title_text: String,
    #[serde(default)]
    pub self_text: String,
    #[serde(default)]
    pub nsfw: bool,
    #[serde(default)]
    pub is_ad: bool,
    #[serde(default)]
    pub author_name: String,
    #[serde(default)]
    pub subreddit: String,
    #[serde(default)]
    pub url_domain: String,
    #[serde(default)]
    pub lang_tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentiment_compound: Option<f64>,
}

impl SubmissionRecord {
    /// Minimal record with the required fields set and everything else empty.
    pub fn new(id: impl Into<String>, created_utc: i64) -> Self {
        Self {
            id: id.into(),
            created_utc,
            country: String::new(),
            city: String::new(),
            lat: None,
            lon: None,
            tzid: String::new(),
            title_text: String::new(),
            self_text: String::new(),
            nsfw: false,
            is_ad: false,
            author_name: String::new(),
            subreddit: String::new(),
            url_domain: String::new(),
            lang_tag: String::new(),
            sentiment_compound: None,
        }
    }

    /// Title and self text joined by a single newline.
    pub fn text(&self) -> String {
        format!("{}\n{}", self.title_text, self.self_text)
    }

    pub fn coordinates(&self) -> Option<(f64, f64)> {
        Some((self.lat?, self.lon?))
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.created_utc <= 0 {
            return Err(format!("created_utc {} is not positive", self.created_utc));
        }
        match (self.lat, self.lon) {
            (Some(lat), Some(lon)) => {
                if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
                    return Err(format!("coordinates ({lat}, {lon}) out of range"));
                }
            }
            (Some(_), None) => return Err("lat present without lon".into()),
            (None, Some(_)) => return Err("lon present without lat".into()),
            (None, None) => {}
        }
        if let Some(s) = self.sentiment_compound {
            if !(-1.0..=1.0).contains(&s) {
                return Err(format!("sentiment_compound {s} outside [-1, 1]"));
            }
        }
        Ok(())
    }
}

/// Records in file order with unique ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordSet {
    records: Vec<SubmissionRecord>,
    /// Lines that could not be parsed or violated a record invariant.
    pub skipped_lines: usize,
}

impl RecordSet {
    pub fn from_records(records: Vec<SubmissionRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        Ok(Self {
            records,
            skipped_lines: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[SubmissionRecord] {
        &self.records
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SubmissionRecord> {
        self.records.iter()
    }

    pub fn ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.id.clone()).collect()
    }

    pub fn into_records(self) -> Vec<SubmissionRecord> {
        self.records
    }

    /// Keeps the records for which `keep` returns true, preserving order.
    pub fn retain(&mut self, mut keep: impl FnMut(&SubmissionRecord) -> bool) {
        self.records.retain(|r| keep(r));
    }
}

impl<'a> IntoIterator for &'a RecordSet {
    type Item = &'a SubmissionRecord;
    type IntoIter = std::slice::Iter<'a, SubmissionRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

pub fn parse_records(path: impl AsRef<Path>) -> Result<RecordSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_records_from_reader(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses JSONL, skipping (and counting) malformed or invalid lines.
/// Blank lines are ignored.
pub fn parse_records_from_reader(reader: impl BufRead) -> Result<RecordSet> {
    let mut records = Vec::new();
    let mut skipped = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<records>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<SubmissionRecord>(&line) {
            Ok(rec) => match rec.validate() {
                Ok(()) => records.push(rec),
                Err(why) => {
                    log::warn!("records line {}: {why}; skipped", lineno + 1);
                    skipped += 1;
                }
            },
            Err(e) => {
                log::warn!("records line {}: {e}; skipped", lineno + 1);
                skipped += 1;
            }
        }
    }
    let mut set = RecordSet::from_records(records)?;
    set.skipped_lines = skipped;
    Ok(set)
}

pub fn write_records<'a>(
    path: impl AsRef<Path>,
    records: impl IntoIterator<Item = &'a SubmissionRecord>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
