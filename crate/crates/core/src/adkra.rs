//! Anomaly detection and knowledge refinement.
//!
//! A failed execution is compared against the training data column by column
//! (point anomalies) and, failing that, pairwise along registered master/slave
//! relationships (collective anomalies). One anomaly is chosen as the outlier,
//! moved one learning step toward its nearest successful neighbour, and the
//! result is written to the knowledge base as a temporary bound. A later
//! success at that bound confirms it.

use std::fmt;

use crate::kb::{KbError, KnowledgeBase};
use crate::pddl::GroundFluent;
use crate::schema::{AttrIndex, BoundSide};
use crate::store::{AttributeVector, FailureRecord, MasterBucket, Outcome, StoreError, TrainingData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnomalyKind {
    Point,
    Collective,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Anomaly {
    pub index: AttrIndex,
    pub attribute: String,
    pub value: f64,
    pub kind: AnomalyKind,
    /// For collective anomalies: the master bucket the combination was checked in.
    pub within: Option<MasterBucket>,
}

impl fmt::Display for Anomaly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.within) {
            (AnomalyKind::Point, _) | (_, None) => write!(f, "{}={}", self.attribute, self.value),
            (AnomalyKind::Collective, Some(mb)) => {
                write!(f, "{}={}@{}[{}]", self.attribute, self.value, mb.master, mb.bucket)
            }
        }
    }
}

/// Why an anomaly was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectionRule {
    Single,
    Master,
    LowestIndependent,
    LowestIndex,
    CollectiveSlave,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outlier {
    pub anomaly: Anomaly,
    pub rule: SelectionRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnedValue {
    pub index: AttrIndex,
    pub attribute: String,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RefinementKind {
    AppliedTemporary,
    RejectedReverted,
    NoOp,
}

impl RefinementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RefinementKind::AppliedTemporary => "applied_temporary",
            RefinementKind::RejectedReverted => "rejected_reverted",
            RefinementKind::NoOp => "no_op",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementOutcome {
    pub kind: RefinementKind,
    pub target: Option<GroundFluent>,
    pub condition: Option<i64>,
    /// Value written (applied) or proposed (rejected / no-op).
    pub value: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum AdkraError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Kb(#[from] KbError),
}

/// Every attribute of the failure whose quantized value no successful row shares.
pub fn detect_point_anomalies(fd: &FailureRecord, td: &TrainingData) -> Result<Vec<Anomaly>, StoreError> {
    td.check_vector(fd.vector())?;
    let mut out = Vec::new();
    for a in td.schema().iter() {
        let v = fd.vector().get(a.index);
        if !td.contains_value(a.index, v)? {
            out.push(Anomaly {
                index: a.index,
                attribute: a.name.clone(),
                value: v,
                kind: AnomalyKind::Point,
                within: None,
            });
        }
    }
    Ok(out)
}

/// Combinations that are individually normal but never succeeded together.
///
/// For every attribute with a master, if both values occur in their columns
/// but no row in the master's bucket carries the slave's value, the slave is
/// reported.
pub fn detect_collective_anomalies(
    fd: &FailureRecord,
    td: &TrainingData,
    kb: &KnowledgeBase,
) -> Result<Vec<Anomaly>, StoreError> {
    td.check_vector(fd.vector())?;
    let v = fd.vector();
    let mut out = Vec::new();
    for rel in kb.relationships() {
        let Some(master) = rel.master else { continue };
        let slave = rel.attribute;
        let (vm, vs) = (v.get(master), v.get(slave));
        if !td.contains_value(master, vm)? || !td.contains_value(slave, vs)? {
            continue;
        }
        if td.contains_joint(&[master, slave], &[vm, vs], Some(master))? {
            continue;
        }
        let m = td.attribute(master)?;
        out.push(Anomaly {
            index: slave,
            attribute: td.attribute(slave)?.name.clone(),
            value: vs,
            kind: AnomalyKind::Collective,
            within: Some(MasterBucket { master, bucket: m.bucket(vm) }),
        });
    }
    out.sort_by_key(|a| a.index);
    Ok(out)
}

/// Picks one anomaly to repair.
///
/// A lone anomaly is taken as is. Among several point anomalies a master
/// attribute wins, then the lowest-index attribute without a master, then the
/// lowest index. Collective anomalies already name the slave.
pub fn select_outlier(anoms: &[Anomaly], kb: &KnowledgeBase) -> Option<Outlier> {
    let pick = |a: &Anomaly, rule| Some(Outlier { anomaly: a.clone(), rule });
    let lowest = |it: &mut dyn Iterator<Item = &Anomaly>| it.min_by_key(|a| a.index).cloned();
    match anoms {
        [] => None,
        [only] if only.kind == AnomalyKind::Collective => pick(only, SelectionRule::CollectiveSlave),
        [only] => pick(only, SelectionRule::Single),
        _ if anoms.iter().all(|a| a.kind == AnomalyKind::Collective) => {
            lowest(&mut anoms.iter()).map(|anomaly| Outlier { anomaly, rule: SelectionRule::CollectiveSlave })
        }
        _ => {
            let points = || anoms.iter().filter(|a| a.kind == AnomalyKind::Point);
            if let Some(a) = lowest(&mut points().filter(|a| kb.is_master(a.index))) {
                return Some(Outlier { anomaly: a, rule: SelectionRule::Master });
            }
            if let Some(a) = lowest(&mut points().filter(|a| kb.master_of(a.index).is_none())) {
                return Some(Outlier { anomaly: a, rule: SelectionRule::LowestIndependent });
            }
            lowest(&mut points()).map(|anomaly| Outlier { anomaly, rule: SelectionRule::LowestIndex })
        }
    }
}

/// One learning step of size `eta` from the outlier toward `nn`.
/// `None` when the outlier already equals its neighbour.
pub fn learn_value(out: &Outlier, nn: f64, eta: f64) -> Option<LearnedValue> {
    let v = out.anomaly.value;
    let value = if v > nn {
        v - eta
    } else if v < nn {
        v + eta
    } else {
        return None;
    };
    Some(LearnedValue { index: out.anomaly.index, attribute: out.anomaly.attribute.clone(), value })
}

/// Writes the learned value into the knowledge base as a temporary bound.
///
/// The bound side follows the learning direction: a value learned downward
/// from the outlier tightens the upper bound, upward the lower bound. The
/// written value is rounded outward onto the quantization grid. A value
/// strictly inside the successful range of its column (within the master
/// bucket for collective outliers) means the outlier cannot be the cause:
/// every pending temporary bound is then reverted to its last confirmed value.
pub fn refine(
    lv: &LearnedValue,
    out: &Outlier,
    kb: &mut KnowledgeBase,
    td: &TrainingData,
    stamp: u64,
) -> Result<RefinementOutcome, AdkraError> {
    let attr = td.attribute(lv.index)?;
    let side = if lv.value < out.anomaly.value { BoundSide::Upper } else { BoundSide::Lower };
    let value = match side {
        BoundSide::Upper => attr.snap_up(lv.value),
        BoundSide::Lower => attr.snap_down(lv.value),
    };
    let condition = out.anomaly.within.map(|mb| mb.bucket);
    let noop = |target: Option<GroundFluent>, note: String| {
        log::debug!("refinement skipped: {note}");
        RefinementOutcome { kind: RefinementKind::NoOp, target, condition, value: Some(value), note: Some(note) }
    };
    let Some(fluent) = attr.fluent(side).cloned() else {
        return Ok(noop(None, format!("{} has no {side:?} bound fluent", attr.name)));
    };

    if let Some((lo, hi)) = td.bucket_range(lv.index, out.anomaly.within)? {
        let b = attr.bucket(value);
        if lo < b && b < hi {
            let reverted = kb.revert_all();
            return Ok(RefinementOutcome {
                kind: RefinementKind::RejectedReverted,
                target: Some(fluent),
                condition,
                value: Some(value),
                note: (!reverted.is_empty()).then(|| format!("reverted {} temporary bound(s)", reverted.len())),
            });
        }
    }

    let current = kb.get_effective_value(&fluent, condition)?;
    let tightens = match side {
        BoundSide::Upper => value < current,
        BoundSide::Lower => value > current,
    };
    if !tightens {
        return Ok(noop(Some(fluent), format!("{value} does not tighten the current bound {current}")));
    }
    kb.apply_temporary(&fluent, value, condition, stamp)?;
    Ok(RefinementOutcome {
        kind: RefinementKind::AppliedTemporary,
        target: Some(fluent),
        condition,
        value: Some(value),
        note: None,
    })
}

/// Everything the reasoner did for one execution.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub outcome: Outcome,
    pub anomalies: Vec<Anomaly>,
    pub outlier: Option<Outlier>,
    pub nn: Option<f64>,
    pub lv: Option<LearnedValue>,
    pub refinement: Option<RefinementOutcome>,
    /// Temporary entries confirmed by this success.
    pub confirmed: Vec<(GroundFluent, Option<i64>)>,
}

impl StepReport {
    fn empty(outcome: Outcome) -> Self {
        StepReport {
            outcome,
            anomalies: Vec::new(),
            outlier: None,
            nn: None,
            lv: None,
            refinement: None,
            confirmed: Vec::new(),
        }
    }

    /// `confirmed` / `none` for successes; `undetected`, `no_change`, or the
    /// refinement kind for failures.
    pub fn label(&self) -> &'static str {
        match self.outcome {
            Outcome::Success if self.confirmed.is_empty() => "none",
            Outcome::Success => "confirmed",
            Outcome::Failure => match (&self.outlier, &self.lv, &self.refinement) {
                (None, _, _) => "undetected",
                (_, None, _) => "no_change",
                (_, _, Some(r)) => r.kind.as_str(),
                (_, _, None) => "no_op",
            },
        }
    }

    /// The failure was attributed to an attribute and the knowledge base changed.
    pub fn attributed(&self) -> Option<AttrIndex> {
        match self.refinement.as_ref()?.kind {
            RefinementKind::NoOp => None,
            _ => self.outlier.as_ref().map(|o| o.anomaly.index),
        }
    }
}

/// One pass of the reasoning loop for an observed execution.
///
/// Success: the vector joins the training data, and every temporary bound
/// whose attribute value the success reproduces (same grid bucket, and same
/// master bucket for conditional bounds) is confirmed.
///
/// Failure: point anomalies, else collective ones; select an outlier, find its
/// nearest neighbour, learn, refine.
pub fn process_feedback(
    observed: &AttributeVector,
    action: &str,
    kb: &mut KnowledgeBase,
    td: &mut TrainingData,
) -> Result<StepReport, AdkraError> {
    let mut report = StepReport::empty(observed.outcome);
    match observed.outcome {
        Outcome::Success => {
            td.add_success(observed.clone())?;
            let pending: Vec<(GroundFluent, Option<i64>, f64)> =
                kb.temporaries().map(|e| (e.fluent().clone(), e.condition(), e.effective())).collect();
            for (fluent, condition, top) in pending {
                let Some((attr, _)) = td.schema().bound_by(&fluent) else { continue };
                if let Some(b) = condition {
                    let Some(m) = kb.master_of(attr.index) else { continue };
                    if td.attribute(m)?.bucket(observed.get(m)) != b {
                        continue;
                    }
                }
                if attr.bucket(observed.get(attr.index)) == attr.bucket(top) && kb.confirm_top(&fluent, condition)? {
                    report.confirmed.push((fluent, condition));
                }
            }
        }
        Outcome::Failure => {
            let fd = FailureRecord::new(observed.clone(), action)?;
            let mut anomalies = detect_point_anomalies(&fd, td)?;
            if anomalies.is_empty() {
                anomalies = detect_collective_anomalies(&fd, td, kb)?;
            }
            report.anomalies = anomalies;
            let Some(out) = select_outlier(&report.anomalies, kb) else { return Ok(report) };
            report.outlier = Some(out.clone());
            let nn = match td.nearest_neighbor_within(out.anomaly.index, out.anomaly.value, out.anomaly.within) {
                Ok(nn) => nn,
                Err(StoreError::EmptyColumn(_)) => return Ok(report),
                Err(e) => return Err(e.into()),
            };
            report.nn = Some(nn);
            let eta = td.attribute(out.anomaly.index)?.eta;
            let Some(lv) = learn_value(&out, nn, eta) else { return Ok(report) };
            report.refinement = Some(refine(&lv, &out, kb, td, observed.episode)?);
            report.lv = Some(lv);
        }
    }
    Ok(report)
}
