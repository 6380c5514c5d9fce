//! Refinable numeric knowledge.
//!
//! Each fluent keeps a history stack whose bottom is the engineered
//! (confirmed) value. A refinement pushes at most one temporary layer on
//! top; the layer is either confirmed by a later matching success, which
//! moves the revert floor up, or reverted.
//!
//! Entries may be conditioned on a master-attribute bucket, e.g. an angle
//! bound that only applies when the sensed distance falls in bucket 20.
//! Lookups for a bucket without its own entry fall back to the global entry.

mod persist;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::pddl::GroundFluent;
use crate::schema::AttrIndex;

pub use persist::{FLUENTS_FILE, RELATIONSHIPS_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RefinementStatus {
    Confirmed,
    Temporary,
    Rejected,
}

impl RefinementStatus {
    /// Allowed lifecycle moves: confirmed → temporary → {confirmed, rejected};
    /// a rejected layer is dropped, returning to confirmed.
    pub fn can_become(self, next: RefinementStatus) -> bool {
        use RefinementStatus::*;
        matches!(
            (self, next),
            (Confirmed, Temporary)
                | (Temporary, Temporary)
                | (Temporary, Confirmed)
                | (Temporary, Rejected)
                | (Rejected, Confirmed)
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RefinementStatus::Confirmed => "confirmed",
            RefinementStatus::Temporary => "temporary",
            RefinementStatus::Rejected => "rejected",
        }
    }
}

impl fmt::Display for RefinementStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RefinementStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "confirmed" => Ok(RefinementStatus::Confirmed),
            "temporary" => Ok(RefinementStatus::Temporary),
            "rejected" => Ok(RefinementStatus::Rejected),
            other => Err(format!("unknown status '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRecord {
    pub value: f64,
    pub status: RefinementStatus,
    /// Episode in which the record was written.
    pub stamp: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KbEntry {
    fluent: GroundFluent,
    condition: Option<i64>,
    history: Vec<HistoryRecord>,
}

impl KbEntry {
    fn new(fluent: GroundFluent, condition: Option<i64>, value: f64, stamp: u64) -> Self {
        KbEntry {
            fluent,
            condition,
            history: vec![HistoryRecord { value, status: RefinementStatus::Confirmed, stamp }],
        }
    }

    pub fn fluent(&self) -> &GroundFluent {
        &self.fluent
    }

    pub fn condition(&self) -> Option<i64> {
        self.condition
    }

    pub fn history(&self) -> &[HistoryRecord] {
        &self.history
    }

    pub fn top(&self) -> &HistoryRecord {
        self.history.last().expect("history is never empty")
    }

    pub fn effective(&self) -> f64 {
        self.top().value
    }

    pub fn status(&self) -> RefinementStatus {
        self.top().status
    }

    pub fn is_temporary(&self) -> bool {
        self.status() == RefinementStatus::Temporary
    }

    pub fn last_confirmed(&self) -> f64 {
        self.history
            .iter()
            .rev()
            .find(|r| r.status == RefinementStatus::Confirmed)
            .expect("bottom of history is confirmed")
            .value
    }

    fn check(&self) -> bool {
        let n = self.history.len();
        n >= 1
            && self.history[0].status == RefinementStatus::Confirmed
            && self.history[..n - 1].iter().all(|r| r.status == RefinementStatus::Confirmed)
            && self.history.iter().all(|r| r.status != RefinementStatus::Rejected)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelationKind {
    Independent,
    Slave,
    Correlated,
}

impl RelationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::Independent => "independent",
            RelationKind::Slave => "slave",
            RelationKind::Correlated => "correlated",
        }
    }
}

impl FromStr for RelationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "independent" => Ok(RelationKind::Independent),
            "slave" => Ok(RelationKind::Slave),
            "correlated" => Ok(RelationKind::Correlated),
            other => Err(format!("unknown relationship kind '{other}'")),
        }
    }
}

/// How an attribute depends on another one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Relationship {
    pub attribute: AttrIndex,
    pub kind: RelationKind,
    pub master: Option<AttrIndex>,
}

impl Relationship {
    pub fn independent(attribute: AttrIndex) -> Self {
        Relationship { attribute, kind: RelationKind::Independent, master: None }
    }

    pub fn slave_of(attribute: AttrIndex, master: AttrIndex) -> Self {
        Relationship { attribute, kind: RelationKind::Slave, master: Some(master) }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error("unknown fluent {0}")]
    UnknownFluent(String),
    #[error("attribute index {0} is outside the schema")]
    AttributeOutOfRange(usize),
    #[error("invalid relationship for attribute {attribute}: {reason}")]
    InvalidRelationship { attribute: usize, reason: String },
    #[error("relationship for attribute {0} would create a cycle")]
    Cycle(usize),
    #[error("{file}:{line}: {message}")]
    Malformed { file: String, line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type EntryKey = (GroundFluent, Option<i64>);

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    entries: BTreeMap<EntryKey, KbEntry>,
    relationships: BTreeMap<AttrIndex, Relationship>,
    attribute_count: usize,
}

impl KnowledgeBase {
    /// An empty store for actions with `attribute_count` attributes.
    pub fn new(attribute_count: usize) -> Self {
        KnowledgeBase { entries: BTreeMap::new(), relationships: BTreeMap::new(), attribute_count }
    }

    pub fn attribute_count(&self) -> usize {
        self.attribute_count
    }

    /// Loads an engineered value, discarding any history of that entry.
    pub fn set_initial(&mut self, fluent: GroundFluent, value: f64) {
        let key = (fluent.clone(), None);
        self.entries.insert(key, KbEntry::new(fluent, None, value, 0));
    }

    pub fn contains(&self, fluent: &GroundFluent) -> bool {
        self.entries.contains_key(&(fluent.clone(), None))
    }

    pub fn entry(&self, fluent: &GroundFluent, condition: Option<i64>) -> Option<&KbEntry> {
        self.entries.get(&(fluent.clone(), condition))
    }

    pub fn entries(&self) -> impl Iterator<Item = &KbEntry> {
        self.entries.values()
    }

    /// Entries whose top layer is temporary.
    pub fn temporaries(&self) -> impl Iterator<Item = &KbEntry> {
        self.entries.values().filter(|e| e.is_temporary())
    }

    fn resolve(&self, fluent: &GroundFluent, condition: Option<i64>) -> Result<&KbEntry, KbError> {
        condition
            .and_then(|c| self.entries.get(&(fluent.clone(), Some(c))))
            .or_else(|| self.entries.get(&(fluent.clone(), None)))
            .ok_or_else(|| KbError::UnknownFluent(fluent.to_string()))
    }

    /// Top-of-history value; a bucket lookup falls back to the global entry.
    pub fn get_effective_value(&self, fluent: &GroundFluent, condition: Option<i64>) -> Result<f64, KbError> {
        self.resolve(fluent, condition).map(KbEntry::effective)
    }

    pub fn status(&self, fluent: &GroundFluent, condition: Option<i64>) -> Result<RefinementStatus, KbError> {
        self.resolve(fluent, condition).map(KbEntry::status)
    }

    pub fn last_confirmed(&self, fluent: &GroundFluent, condition: Option<i64>) -> Result<f64, KbError> {
        self.resolve(fluent, condition).map(KbEntry::last_confirmed)
    }

    /// Places `value` as the single temporary layer of the entry.
    ///
    /// A bucketed entry that does not exist yet is created on top of the
    /// global entry's last confirmed value.
    pub fn apply_temporary(
        &mut self,
        fluent: &GroundFluent,
        value: f64,
        condition: Option<i64>,
        stamp: u64,
    ) -> Result<(), KbError> {
        let global =
            self.entries.get(&(fluent.clone(), None)).ok_or_else(|| KbError::UnknownFluent(fluent.to_string()))?;
        let base = global.last_confirmed();
        let entry = self
            .entries
            .entry((fluent.clone(), condition))
            .or_insert_with(|| KbEntry::new(fluent.clone(), condition, base, stamp));
        if entry.is_temporary() {
            entry.history.pop();
        }
        entry.history.push(HistoryRecord { value, status: RefinementStatus::Temporary, stamp });
        Ok(())
    }

    /// Promotes a temporary top to confirmed. Returns `false` (and logs a
    /// warning) when there is nothing temporary to confirm.
    pub fn confirm_top(&mut self, fluent: &GroundFluent, condition: Option<i64>) -> Result<bool, KbError> {
        let entry = self
            .entries
            .get_mut(&(fluent.clone(), condition))
            .ok_or_else(|| KbError::UnknownFluent(fluent.to_string()))?;
        if !entry.is_temporary() {
            log::warn!("confirm requested for {fluent} ({condition:?}) with nothing temporary");
            return Ok(false);
        }
        entry.history.last_mut().expect("nonempty").status = RefinementStatus::Confirmed;
        Ok(true)
    }

    /// Drops any temporary layer. Returns whether anything changed.
    pub fn revert_to_confirmed(&mut self, fluent: &GroundFluent, condition: Option<i64>) -> bool {
        match self.entries.get_mut(&(fluent.clone(), condition)) {
            Some(e) if e.is_temporary() => {
                e.history.pop();
                true
            }
            _ => false,
        }
    }

    /// Reverts every temporary layer in the store.
    pub fn revert_all(&mut self) -> Vec<(GroundFluent, Option<i64>)> {
        let keys: Vec<EntryKey> =
            self.entries.iter().filter(|(_, e)| e.is_temporary()).map(|(k, _)| k.clone()).collect();
        for (f, c) in &keys {
            self.revert_to_confirmed(f, *c);
        }
        keys
    }

    pub fn register_relationship(&mut self, r: Relationship) -> Result<(), KbError> {
        for idx in std::iter::once(r.attribute).chain(r.master) {
            if idx.get() > self.attribute_count {
                return Err(KbError::AttributeOutOfRange(idx.get()));
            }
        }
        let invalid =
            |reason: &str| KbError::InvalidRelationship { attribute: r.attribute.get(), reason: reason.into() };
        match (r.kind, r.master) {
            (RelationKind::Slave, None) => return Err(invalid("a slave needs a master")),
            (RelationKind::Independent, Some(_)) => return Err(invalid("an independent attribute has no master")),
            _ => {}
        }
        // follow the master chain; reaching the new attribute closes a cycle
        let mut cursor = r.master;
        let mut steps = 0;
        while let Some(m) = cursor {
            if m == r.attribute || steps > self.attribute_count {
                return Err(KbError::Cycle(r.attribute.get()));
            }
            cursor = self.relationships.get(&m).and_then(|x| x.master);
            steps += 1;
        }
        self.relationships.insert(r.attribute, r);
        Ok(())
    }

    pub fn relationship(&self, attribute: AttrIndex) -> Option<&Relationship> {
        self.relationships.get(&attribute)
    }

    pub fn relationships(&self) -> impl Iterator<Item = &Relationship> {
        self.relationships.values()
    }

    pub fn master_of(&self, attribute: AttrIndex) -> Option<AttrIndex> {
        self.relationships.get(&attribute).and_then(|r| r.master)
    }

    pub fn is_master(&self, attribute: AttrIndex) -> bool {
        self.relationships.values().any(|r| r.master == Some(attribute))
    }

    /// Store-wide invariant: every history is nonempty, confirmed at the
    /// bottom, and has at most one temporary layer on top.
    pub fn check_invariants(&self) -> bool {
        self.entries.values().all(KbEntry::check)
    }

    /// Short digest of the full store contents (history included).
    pub fn snapshot_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(persist::fluents_csv(self).as_bytes());
        h.update(persist::relationships_csv(self).as_bytes());
        hex::encode(&h.finalize()[..8])
    }
}

#[cfg(test)]
mod tests;
