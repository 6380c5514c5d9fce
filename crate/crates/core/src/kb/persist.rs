//! CSV persistence: `fluents.csv` holds history rows in stack order,
//! `relationships.csv` the attribute registry.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::*;

pub const FLUENTS_FILE: &str = "fluents.csv";
pub const RELATIONSHIPS_FILE: &str = "relationships.csv";

#[derive(Serialize, Deserialize)]
struct FluentRow {
    fluent: String,
    condition_bucket: Option<i64>,
    value: f64,
    status: String,
    stamp: u64,
}

#[derive(Serialize, Deserialize)]
struct RelationshipRow {
    attribute: usize,
    kind: String,
    master: Option<usize>,
}

fn to_csv<T: Serialize>(header: &[&str], rows: impl Iterator<Item = T>) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub(super) fn fluents_csv(kb: &KnowledgeBase) -> String {
    let rows = kb.entries.values().flat_map(|e| {
        e.history.iter().map(move |r| FluentRow {
            fluent: e.fluent.to_string(),
            condition_bucket: e.condition,
            value: r.value,
            status: r.status.to_string(),
            stamp: r.stamp,
        })
    });
    to_csv(&["fluent", "condition_bucket", "value", "status", "stamp"], rows)
}

pub(super) fn relationships_csv(kb: &KnowledgeBase) -> String {
    let rows = kb.relationships.values().map(|r| RelationshipRow {
        attribute: r.attribute.get(),
        kind: r.kind.as_str().to_string(),
        master: r.master.map(AttrIndex::get),
    });
    to_csv(&["attribute", "kind", "master"], rows)
}

fn malformed(file: &str, line: u64, message: impl Into<String>) -> KbError {
    KbError::Malformed { file: file.to_string(), line, message: message.into() }
}

fn read_rows<T: for<'de> Deserialize<'de>>(file: &str, text: &str) -> Result<Vec<(u64, T)>, KbError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in r.deserialize::<T>() {
        match rec {
            Ok(row) => out.push(row),
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                return Err(malformed(file, line, e.to_string()));
            }
        }
    }
    // deserialize() does not expose positions on success; rows start after the header
    Ok(out.into_iter().enumerate().map(|(i, row)| (i as u64 + 2, row)).collect())
}

impl KnowledgeBase {
    /// Writes the fluent history as CSV text (the `fluents.csv` format).
    pub fn fluents_csv(&self) -> String {
        fluents_csv(self)
    }

    pub fn relationships_csv(&self) -> String {
        relationships_csv(self)
    }

    /// Writes `fluents.csv` and `relationships.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), KbError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(FLUENTS_FILE), fluents_csv(self))?;
        fs::write(dir.join(RELATIONSHIPS_FILE), relationships_csv(self))?;
        Ok(())
    }

    pub fn load(dir: &Path, attribute_count: usize) -> Result<Self, KbError> {
        let fluents = fs::read_to_string(dir.join(FLUENTS_FILE))?;
        let relationships = fs::read_to_string(dir.join(RELATIONSHIPS_FILE))?;
        Self::from_csv(&fluents, &relationships, attribute_count)
    }

    pub fn from_csv(fluents: &str, relationships: &str, attribute_count: usize) -> Result<Self, KbError> {
        let mut kb = KnowledgeBase::new(attribute_count);
        for (line, row) in read_rows::<FluentRow>(FLUENTS_FILE, fluents)? {
            let fluent: GroundFluent = row.fluent.parse().map_err(|e| malformed(FLUENTS_FILE, line, format!("{e}")))?;
            let status: RefinementStatus = row.status.parse().map_err(|e: String| malformed(FLUENTS_FILE, line, e))?;
            if !row.value.is_finite() {
                return Err(malformed(FLUENTS_FILE, line, "non-finite value"));
            }
            let record = HistoryRecord { value: row.value, status, stamp: row.stamp };
            let entry = kb.entries.entry((fluent.clone(), row.condition_bucket)).or_insert_with(|| KbEntry {
                fluent,
                condition: row.condition_bucket,
                history: Vec::new(),
            });
            if !entry.history.is_empty() && entry.is_temporary() {
                return Err(malformed(FLUENTS_FILE, line, "record above a temporary layer"));
            }
            if entry.history.is_empty() && status != RefinementStatus::Confirmed {
                return Err(malformed(FLUENTS_FILE, line, "history must start with a confirmed record"));
            }
            if status == RefinementStatus::Rejected {
                return Err(malformed(FLUENTS_FILE, line, "rejected records are never stored"));
            }
            entry.history.push(record);
        }
        for (line, row) in read_rows::<RelationshipRow>(RELATIONSHIPS_FILE, relationships)? {
            let kind: RelationKind = row.kind.parse().map_err(|e: String| malformed(RELATIONSHIPS_FILE, line, e))?;
            let idx = |i: usize| {
                AttrIndex::new(i).ok_or_else(|| malformed(RELATIONSHIPS_FILE, line, "attribute indices start at 1"))
            };
            let r = Relationship { attribute: idx(row.attribute)?, kind, master: row.master.map(idx).transpose()? };
            kb.register_relationship(r).map_err(|e| malformed(RELATIONSHIPS_FILE, line, e.to_string()))?;
        }
        Ok(kb)
    }
}
