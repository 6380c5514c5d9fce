//! Deterministic stand-in for the gripping world.
//!
//! Scenarios are drawn from the knowledge base's *current* permitted ranges,
//! so every generated problem is plannable, but execution is judged against
//! a hidden ground-truth envelope the reasoner never sees.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::case_study::{ANGLE, DISTANCE};
use crate::kb::{KbError, KnowledgeBase};
use crate::planner::Plan;
use crate::schema::{AttrIndex, AttributeSchema};
use crate::store::{AttributeVector, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Distance,
    Angle,
    Collective,
    Group,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] =
        [ExperimentKind::Distance, ExperimentKind::Angle, ExperimentKind::Collective, ExperimentKind::Group];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Distance => "distance",
            ExperimentKind::Angle => "angle",
            ExperimentKind::Collective => "collective",
            ExperimentKind::Group => "group",
        }
    }

    /// The faulty engineered values each experiment starts from.
    pub fn default_faults(self) -> Vec<(&'static str, f64)> {
        match self {
            ExperimentKind::Distance => vec![("maxdis(grp)", 27.0)],
            ExperimentKind::Angle => vec![("minhwangle(nao)", -29.0)],
            // the fault is the missing distance/angle coupling, not a bound
            ExperimentKind::Collective => vec![],
            ExperimentKind::Group => vec![("maxdis(grp)", 25.0), ("minhwangle(nao)", -27.0)],
        }
    }

    /// Only the collective experiment exercises the distance/angle coupling.
    pub fn default_envelope(self) -> GroundTruthEnvelope {
        match self {
            ExperimentKind::Collective => GroundTruthEnvelope::coupled(),
            _ => GroundTruthEnvelope::marginal(),
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown experiment kind '{s}' (distance|angle|collective|group)"))
    }
}

/// Hidden success region of the grip action.
///
/// A grip succeeds iff `lo < distance < hi` and `bound(distance) < angle <= 0`,
/// where `bound` interpolates the anchor table linearly (extrapolating the
/// end segments) and is clamped to the angle range.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthEnvelope {
    pub distance_range: (f64, f64),
    pub angle_range: (f64, f64),
    /// (distance, angle bound) pairs sorted by distance.
    pub anchors: Vec<(f64, f64)>,
}

impl GroundTruthEnvelope {
    /// Angle bound narrowing with distance: -25 deg at 15 cm, -12 deg at 20 cm.
    pub fn coupled() -> Self {
        GroundTruthEnvelope {
            distance_range: (15.0, 23.0),
            angle_range: (-25.0, 0.0),
            anchors: vec![(15.0, -25.0), (20.0, -12.0)],
        }
    }

    /// Independent ranges: the angle bound is -25 deg at every distance.
    pub fn marginal() -> Self {
        GroundTruthEnvelope { distance_range: (15.0, 23.0), angle_range: (-25.0, 0.0), anchors: vec![(15.0, -25.0)] }
    }

    pub fn true_angle_bound(&self, d: f64) -> f64 {
        let (lo, hi) = self.angle_range;
        let raw = match self.anchors.as_slice() {
            [] => lo,
            [(_, a)] => *a,
            pts => {
                let seg = pts.windows(2).position(|w| d <= w[1].0).unwrap_or(pts.len() - 2);
                let (d0, a0) = pts[seg];
                let (d1, a1) = pts[seg + 1];
                a0 + (a1 - a0) * (d - d0) / (d1 - d0)
            }
        };
        raw.clamp(lo, hi)
    }

    /// Attributes whose ground-truth test fails; empty means success.
    ///
    /// A joint violation with both marginals in range is charged to the angle,
    /// the slave attribute.
    pub fn judge(&self, distance: f64, angle: f64) -> Vec<AttrIndex> {
        let mut cause = Vec::new();
        let (dlo, dhi) = self.distance_range;
        let distance_ok = dlo < distance && distance < dhi;
        if !distance_ok {
            cause.push(DISTANCE);
        }
        let (alo, ahi) = self.angle_range;
        let angle_ok = alo < angle && angle <= ahi && (!distance_ok || self.true_angle_bound(distance) < angle);
        if !angle_ok {
            cause.push(ANGLE);
        }
        cause
    }
}

/// One randomized gripping problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: u64,
    pub kind: ExperimentKind,
    /// Planar waypoint positions in cm.
    pub waypoints: BTreeMap<String, (f64, f64)>,
    pub robot_start: String,
    pub cup_waypoint: String,
    pub approach_waypoint: String,
    pub true_distance: f64,
    pub true_angle: f64,
    pub seed: u64,
    pub rng_stream: u64,
}

impl Scenario {
    /// Standard layout: cup at `wp1`, approach point `wp2` at the drawn
    /// distance, robot starting at `wp0` far from the table.
    pub fn new(id: u64, kind: ExperimentKind, distance: f64, angle: f64, seed: u64, rng_stream: u64) -> Self {
        let waypoints = BTreeMap::from([
            ("wp0".to_string(), (0.0, 60.0)),
            ("wp1".to_string(), (0.0, 0.0)),
            ("wp2".to_string(), (distance, 0.0)),
        ]);
        Scenario {
            id,
            kind,
            waypoints,
            robot_start: "wp0".into(),
            cup_waypoint: "wp1".into(),
            approach_waypoint: "wp2".into(),
            true_distance: distance,
            true_angle: angle,
            seed,
            rng_stream,
        }
    }

    pub fn distance_between(&self, a: &str, b: &str) -> Option<f64> {
        let (x0, y0) = self.waypoints.get(a)?;
        let (x1, y1) = self.waypoints.get(b)?;
        Some((x1 - x0).hypot(y1 - y0))
    }

    /// Ground-truth attribute values aligned with the grip schema.
    pub fn attribute_values(&self) -> Vec<f64> {
        vec![self.true_distance, self.true_angle]
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error("empty permitted range for {0}")]
    EmptyRange(String),
    #[error("scenario file line {line}: {message}")]
    Malformed { line: u64, message: String },
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Draws a scenario from the knowledge base's current permitted ranges.
///
/// * distance: distance uniform over `[mindis, maxdis)`, angle fixed at -10 deg
/// * angle: distance fixed at 18 cm, angle uniform over `[minhwangle, maxhwangle)`
/// * collective: an integer distance point strictly inside the distance range,
///   then an angle uniform over that point's (possibly bucketed) angle range
/// * group: distance uniform over the distance range, angle fixed at -20 deg
pub fn generate_scenario<R: Rng>(
    kind: ExperimentKind,
    rng: &mut R,
    kb: &KnowledgeBase,
    schema: &AttributeSchema,
    id: u64,
    seed: u64,
    rng_stream: u64,
) -> Result<Scenario, SimError> {
    let range = |attr: AttrIndex, condition: Option<i64>| -> Result<(f64, f64), SimError> {
        let a = schema.get(attr).expect("grip schema attribute");
        let lo = kb.get_effective_value(a.lower_fluent.as_ref().expect("lower bound"), condition)?;
        let hi = kb.get_effective_value(a.upper_fluent.as_ref().expect("upper bound"), condition)?;
        Ok((lo, hi))
    };
    let (dlo, dhi) = range(DISTANCE, None)?;
    let (distance, angle) = match kind {
        ExperimentKind::Distance => (uniform(rng, dlo, dhi), -10.0),
        ExperimentKind::Angle => {
            let (alo, ahi) = range(ANGLE, None)?;
            (18.0, uniform(rng, alo, ahi))
        }
        ExperimentKind::Group => (uniform(rng, dlo, dhi), -20.0),
        ExperimentKind::Collective => {
            let first = dlo.floor() as i64 + 1;
            let last = dhi.ceil() as i64 - 1;
            if last < first {
                return Err(SimError::EmptyRange("distance".into()));
            }
            let d = rng.gen_range(first..=last);
            let bucket = schema.get(DISTANCE).expect("distance").bucket(d as f64);
            let (alo, ahi) = range(ANGLE, Some(bucket))?;
            (d as f64, uniform(rng, alo, ahi))
        }
    };
    Ok(Scenario::new(id, kind, distance, angle, seed, rng_stream))
}

/// Per-attribute zero-mean Gaussian sensing noise.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseModel {
    pub sigma_distance: f64,
    pub sigma_angle: f64,
}

/// Observed value: `true_value` plus N(0, sigma). `sigma == 0` is the identity
/// and consumes no randomness.
pub fn sense<R: Rng>(true_value: f64, sigma: f64, rng: &mut R) -> f64 {
    if sigma <= 0.0 {
        return true_value;
    }
    let n = Normal::new(0.0, sigma).expect("finite positive sigma");
    true_value + n.sample(rng)
}

/// What the robot measures before planning: approach distance to the cup
/// and head yaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub distance: f64,
    pub angle: f64,
}

impl Observation {
    pub fn values(&self) -> Vec<f64> {
        vec![self.distance, self.angle]
    }
}

pub fn observe<R: Rng>(sc: &Scenario, noise: &NoiseModel, rng: &mut R) -> Observation {
    Observation {
        distance: sense(sc.true_distance, noise.sigma_distance, rng),
        angle: sense(sc.true_angle, noise.sigma_angle, rng),
    }
}

impl Scenario {
    /// The scenario as the robot believes it to be: the approach waypoint at
    /// the measured distance and the measured head yaw. Planning input.
    pub fn perceived(&self, obs: &Observation) -> Scenario {
        let mut p = Scenario::new(self.id, self.kind, obs.distance, obs.angle, self.seed, self.rng_stream);
        p.robot_start = self.robot_start.clone();
        p
    }
}

/// Verdict of one plan execution.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionFeedback {
    pub outcome: Outcome,
    pub observed: AttributeVector,
    /// Attributes whose ground-truth test failed. Scoring only.
    pub true_cause: Vec<AttrIndex>,
}

/// Executes `plan` in the true scenario. Only the grip step consults the
/// envelope; moves always succeed. The feedback carries the measurements the
/// plan was made from. Returns `None` for a plan with no grip.
pub fn execute_plan(
    plan: &Plan,
    sc: &Scenario,
    envelope: &GroundTruthEnvelope,
    obs: &Observation,
    episode: u64,
) -> Option<ExecutionFeedback> {
    let grip = plan.steps.iter().find(|s| s.schema == "grip")?;
    let (from, cup) = (&grip.bindings[2], &grip.bindings[3]);
    let distance = sc.distance_between(from, cup).unwrap_or(f64::INFINITY);
    let true_cause = envelope.judge(distance, sc.true_angle);
    let outcome = if true_cause.is_empty() { Outcome::Success } else { Outcome::Failure };
    Some(ExecutionFeedback { outcome, observed: AttributeVector::new(obs.values(), outcome, episode), true_cause })
}

#[derive(Serialize, Deserialize)]
struct ScenarioRow {
    scenario_id: u64,
    seed: u64,
    rng_stream: u64,
    kind: ExperimentKind,
    true_distance: f64,
    true_angle: f64,
    robot_start: String,
}

/// `scenario_id,seed,rng_stream,kind,true_distance,true_angle,robot_start`.
pub fn scenarios_to_csv<'a>(scenarios: impl IntoIterator<Item = &'a Scenario>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut wrote = false;
    for s in scenarios {
        w.serialize(ScenarioRow {
            scenario_id: s.id,
            seed: s.seed,
            rng_stream: s.rng_stream,
            kind: s.kind,
            true_distance: s.true_distance,
            true_angle: s.true_angle,
            robot_start: s.robot_start.clone(),
        })
        .expect("in-memory write");
        wrote = true;
    }
    if !wrote {
        w.write_record(["scenario_id", "seed", "rng_stream", "kind", "true_distance", "true_angle", "robot_start"])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn scenarios_from_csv(text: &str) -> Result<Vec<Scenario>, SimError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<ScenarioRow>().enumerate() {
        let row = row.map_err(|e| SimError::Malformed {
            line: e.position().map(|p| p.line()).unwrap_or(i as u64 + 2),
            message: e.to_string(),
        })?;
        let mut sc =
            Scenario::new(row.scenario_id, row.kind, row.true_distance, row.true_angle, row.seed, row.rng_stream);
        if !sc.waypoints.contains_key(&row.robot_start) {
            return Err(SimError::Malformed {
                line: i as u64 + 2,
                message: format!("unknown waypoint '{}'", row.robot_start),
            });
        }
        sc.robot_start = row.robot_start;
        out.push(sc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
