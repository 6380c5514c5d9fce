//! Execution experience: the training data of successful executions (the
//! normality model) and failed-execution records.
//!
//! All value comparisons go through the attribute's quantization grid, so a
//! stored 23.4 cm and a query of 23.0 cm are the same value at 1 cm
//! resolution.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::schema::{AttrIndex, Attribute, AttributeSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Success,
    Failure,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Failure => "failure",
        }
    }
}

/// One execution described over the action's attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeVector {
    pub values: Vec<f64>,
    pub outcome: Outcome,
    pub episode: u64,
}

impl AttributeVector {
    pub fn new(values: Vec<f64>, outcome: Outcome, episode: u64) -> Self {
        AttributeVector { values, outcome, episode }
    }

    pub fn get(&self, index: AttrIndex) -> f64 {
        self.values[index.slot()]
    }
}

/// A failed execution, attributed to the action that failed.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureRecord {
    vector: AttributeVector,
    action: String,
}

impl FailureRecord {
    pub fn new(vector: AttributeVector, action: impl Into<String>) -> Result<Self, StoreError> {
        if vector.outcome != Outcome::Failure {
            return Err(StoreError::WrongOutcome { expected: Outcome::Failure });
        }
        Ok(FailureRecord { vector, action: action.into() })
    }

    pub fn vector(&self) -> &AttributeVector {
        &self.vector
    }

    pub fn action(&self) -> &str {
        &self.action
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("vector has {found} values, schema has {expected} attributes")]
    Arity { expected: usize, found: usize },
    #[error("vector outcome must be {}", expected.as_str())]
    WrongOutcome { expected: Outcome },
    #[error("non-finite value for attribute {0}")]
    NonFinite(AttrIndex),
    #[error("attribute index {0} is outside the schema")]
    IndexOutOfRange(usize),
    #[error("no training data for attribute {0}")]
    EmptyColumn(AttrIndex),
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Restricts a query to rows whose master attribute falls in `bucket`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MasterBucket {
    pub master: AttrIndex,
    pub bucket: i64,
}

/// Successful execution vectors, append-only.
#[derive(Debug, Clone)]
pub struct TrainingData {
    schema: AttributeSchema,
    rows: Vec<AttributeVector>,
    // per attribute: bucket -> row count, kept in step with `rows`
    columns: Vec<BTreeMap<i64, usize>>,
}

impl PartialEq for TrainingData {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema && self.rows == other.rows
    }
}

impl TrainingData {
    pub fn new(schema: AttributeSchema) -> Self {
        let columns = vec![BTreeMap::new(); schema.len()];
        TrainingData { schema, rows: Vec::new(), columns }
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[AttributeVector] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub(crate) fn attribute(&self, index: AttrIndex) -> Result<&Attribute, StoreError> {
        self.schema.get(index).ok_or(StoreError::IndexOutOfRange(index.get()))
    }

    pub fn check_vector(&self, v: &AttributeVector) -> Result<(), StoreError> {
        if v.values.len() != self.schema.len() {
            return Err(StoreError::Arity { expected: self.schema.len(), found: v.values.len() });
        }
        if let Some(i) = v.values.iter().position(|x| !x.is_finite()) {
            return Err(StoreError::NonFinite(AttrIndex::new(i + 1).expect("1-based")));
        }
        Ok(())
    }

    pub fn add_success(&mut self, v: AttributeVector) -> Result<(), StoreError> {
        if v.outcome != Outcome::Success {
            return Err(StoreError::WrongOutcome { expected: Outcome::Success });
        }
        self.check_vector(&v)?;
        for (a, col) in self.schema.iter().zip(self.columns.iter_mut()) {
            *col.entry(a.bucket(v.values[a.index.slot()])).or_default() += 1;
        }
        self.rows.push(v);
        Ok(())
    }

    /// Whether some stored row has the same quantized value for `attr`.
    pub fn contains_value(&self, attr: AttrIndex, value: f64) -> Result<bool, StoreError> {
        let a = self.attribute(attr)?;
        Ok(self.columns[attr.slot()].contains_key(&a.bucket(value)))
    }

    fn row_in(&self, row: &AttributeVector, within: Option<MasterBucket>) -> bool {
        within.is_none_or(|mb| {
            let m = self.schema.get(mb.master).expect("validated master");
            m.bucket(row.get(mb.master)) == mb.bucket
        })
    }

    /// Quantized buckets of `attr`, one per row, optionally restricted to a master bucket.
    pub fn column_buckets(&self, attr: AttrIndex, within: Option<MasterBucket>) -> Result<Vec<i64>, StoreError> {
        let a = self.attribute(attr)?;
        if let Some(mb) = within {
            self.attribute(mb.master)?;
        }
        Ok(self.rows.iter().filter(|r| self.row_in(r, within)).map(|r| a.bucket(r.get(attr))).collect())
    }

    /// Smallest and largest quantized bucket of the column.
    pub fn bucket_range(
        &self,
        attr: AttrIndex,
        within: Option<MasterBucket>,
    ) -> Result<Option<(i64, i64)>, StoreError> {
        if within.is_none() {
            self.attribute(attr)?;
            let col = &self.columns[attr.slot()];
            return Ok(col.keys().next().zip(col.keys().next_back()).map(|(a, b)| (*a, *b)));
        }
        let b = self.column_buckets(attr, within)?;
        Ok(b.iter().min().copied().zip(b.iter().max().copied()))
    }

    /// Closest stored value (on the quantization grid) to `value`.
    ///
    /// Equidistant candidates are resolved toward the column median, i.e. the
    /// interior of the success region.
    pub fn nearest_neighbor(&self, attr: AttrIndex, value: f64) -> Result<f64, StoreError> {
        self.nearest_neighbor_within(attr, value, None)
    }

    pub fn nearest_neighbor_within(
        &self,
        attr: AttrIndex,
        value: f64,
        within: Option<MasterBucket>,
    ) -> Result<f64, StoreError> {
        let a = self.attribute(attr)?;
        let mut buckets = self.column_buckets(attr, within)?;
        if buckets.is_empty() {
            return Err(StoreError::EmptyColumn(attr));
        }
        buckets.sort_unstable();
        let n = buckets.len();
        let median =
            if n % 2 == 1 { buckets[n / 2] as f64 } else { (buckets[n / 2 - 1] as f64 + buckets[n / 2] as f64) / 2.0 };
        let q = a.bucket(value);
        // nearest below-or-equal and nearest above
        let below = buckets.iter().rev().find(|b| **b <= q).copied();
        let above = buckets.iter().find(|b| **b > q).copied();
        let pick = match (below, above) {
            (Some(lo), Some(hi)) => {
                let (dl, dh) = (q - lo, hi - q);
                if dl < dh || (dl == dh && median <= q as f64) {
                    lo
                } else {
                    hi
                }
            }
            (Some(lo), None) => lo,
            (None, Some(hi)) => hi,
            (None, None) => unreachable!("column is nonempty"),
        };
        Ok(a.bucket_value(pick))
    }

    /// Whether a single row matches every queried attribute after quantization.
    ///
    /// With `bucket_by`, that attribute must be among `attrs`; its value is
    /// matched by bucket and the rest are searched inside that bucket.
    pub fn contains_joint(
        &self,
        attrs: &[AttrIndex],
        values: &[f64],
        bucket_by: Option<AttrIndex>,
    ) -> Result<bool, StoreError> {
        if attrs.len() != values.len() {
            return Err(StoreError::Arity { expected: attrs.len(), found: values.len() });
        }
        let resolved: Vec<(&Attribute, i64)> = attrs
            .iter()
            .zip(values)
            .map(|(i, v)| self.attribute(*i).map(|a| (a, a.bucket(*v))))
            .collect::<Result<_, _>>()?;
        if let Some(m) = bucket_by {
            if !attrs.contains(&m) {
                return Err(StoreError::IndexOutOfRange(m.get()));
            }
        }
        Ok(self.rows.iter().any(|r| resolved.iter().all(|(a, b)| a.bucket(r.get(a.index)) == *b)))
    }

    /// CSV text with header `episode,<attribute names...>,outcome`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["episode".to_string()];
        header.extend(self.schema.iter().map(|a| a.name.clone()));
        header.push("outcome".into());
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.episode.to_string()];
            rec.extend(r.values.iter().map(f64::to_string));
            rec.push(r.outcome.as_str().into());
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn from_csv(text: &str, schema: AttributeSchema) -> Result<Self, StoreError> {
        let mut td = TrainingData::new(schema);
        let width = td.schema.len() + 2;
        let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| StoreError::Malformed { line: 1, message: e.to_string() })?.clone();
        let expected: Vec<String> = std::iter::once("episode".to_string())
            .chain(td.schema.iter().map(|a| a.name.clone()))
            .chain(std::iter::once("outcome".to_string()))
            .collect();
        if header.iter().collect::<Vec<_>>() != expected.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(StoreError::Malformed { line: 1, message: format!("expected header {}", expected.join(",")) });
        }
        for rec in r.records() {
            let rec = rec.map_err(|e| StoreError::Malformed {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let bad = |m: String| StoreError::Malformed { line, message: m };
            if rec.len() != width {
                return Err(bad(format!("expected {width} columns, found {}", rec.len())));
            }
            let episode: u64 = rec[0].parse().map_err(|_| bad(format!("bad episode '{}'", &rec[0])))?;
            let values = (1..width - 1)
                .map(|i| rec[i].parse::<f64>().map_err(|_| bad(format!("bad number '{}'", &rec[i]))))
                .collect::<Result<Vec<_>, _>>()?;
            if &rec[width - 1] != "success" {
                return Err(bad("training data rows must be successes".into()));
            }
            td.add_success(AttributeVector::new(values, Outcome::Success, episode)).map_err(|e| bad(e.to_string()))?;
        }
        Ok(td)
    }

    pub fn load(path: &Path, schema: AttributeSchema) -> Result<Self, StoreError> {
        Self::from_csv(&fs::read_to_string(path)?, schema)
    }
}
