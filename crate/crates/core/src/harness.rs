//! End-to-end experiment driver: inject faults, plan and execute randomized
//! grip problems, feed outcomes to the reasoner, re-run with the refined
//! knowledge, and score the reasoner's attributions.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adkra::{self, AdkraError, StepReport};
use crate::case_study;
use crate::kb::{KbError, KnowledgeBase};
use crate::pddl::{instantiate_problem, DomainModel, GroundFluent, InstantiateError};
use crate::planner::{find_plan, validate_plan, PlanError, PlannerConfig};
use crate::schema::{AttrIndex, AttributeSchema, SchemaError};
use crate::sim::{
    execute_plan, generate_scenario, observe, scenarios_to_csv, ExperimentKind, GroundTruthEnvelope, NoiseModel,
    Scenario, SimError,
};
use crate::store::{AttributeVector, Outcome, StoreError, TrainingData};

const SCENARIO_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const PRESEED_STREAM: u64 = 3;

/// How the training data is populated before scored episodes start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdSeedPolicy {
    /// Start with no successful executions.
    Empty,
    /// Run unscored, reasoner-free episodes until this many successes are stored.
    Warmup(usize),
    /// Insert this many noise-free successes drawn directly from ground truth.
    Preseed(usize),
}

impl Default for TdSeedPolicy {
    fn default() -> Self {
        TdSeedPolicy::Warmup(30)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub episodes_per_phase: usize,
    pub adkra_enabled: bool,
    /// Faulty values replacing the engineered ones.
    pub faults: Vec<(GroundFluent, f64)>,
    pub seed: u64,
    pub eta_distance: f64,
    pub eta_angle: f64,
    pub noise: NoiseModel,
    pub td_seed: TdSeedPolicy,
    pub envelope: GroundTruthEnvelope,
    pub planner: PlannerConfig,
    /// Episodes per failure-curve window.
    pub window: usize,
    /// Upper bound on warm-up or preseed draws.
    pub seeding_attempts: usize,
}

impl ExperimentConfig {
    /// Defaults for `kind`: 100 episodes per phase, reasoner on, the kind's
    /// standard faults and envelope, seed 7, unit learning rates, no noise.
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            kind,
            episodes_per_phase: 100,
            adkra_enabled: true,
            faults: kind.default_faults().into_iter().map(|(f, v)| (f.parse().expect("valid fluent"), v)).collect(),
            seed: 7,
            eta_distance: 1.0,
            eta_angle: 1.0,
            noise: NoiseModel::default(),
            td_seed: TdSeedPolicy::default(),
            envelope: kind.default_envelope(),
            planner: PlannerConfig::default(),
            window: 10,
            seeding_attempts: 10_000,
        }
    }

    /// Seed of the phase-2 scenario stream.
    pub fn phase2_seed(&self) -> u64 {
        self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x2545_F491_4F6C_DD1D)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.episodes_per_phase == 0 {
            return bad("episodes must be at least 1".into());
        }
        if self.window == 0 {
            return bad("window must be at least 1".into());
        }
        if !(self.noise.sigma_distance >= 0.0 && self.noise.sigma_angle >= 0.0) {
            return bad("noise sigmas must be non-negative".into());
        }
        let kb = case_study::engineered_kb();
        for (f, v) in &self.faults {
            if !kb.contains(f) {
                return bad(format!("fault targets unknown fluent {f}"));
            }
            if !v.is_finite() {
                return bad(format!("fault value for {f} is not finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Instantiate(#[from] InstantiateError),
    #[error(transparent)]
    Adkra(#[from] AdkraError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} line {line}: {message}")]
    Malformed { path: String, line: u64, message: String },
}

impl HarnessError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.display().to_string(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "warmup")]
    Warmup,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeOutcome {
    Success,
    Failure,
    NoPlan,
}

/// Everything that happened in one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub phase: Phase,
    pub outcome: EpisodeOutcome,
    pub true_cause: Vec<AttrIndex>,
    pub scenario: Scenario,
    pub observed: Option<AttributeVector>,
    /// Present when the reasoner processed the episode.
    pub step: Option<StepReport>,
    pub kb_hash: String,
}

impl EpisodeRecord {
    pub fn refinement_label(&self) -> &'static str {
        match &self.step {
            Some(s) => s.label(),
            None => "skipped",
        }
    }
}

/// One row of `episodes.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub episode: u64,
    pub phase: Phase,
    pub outcome: EpisodeOutcome,
    /// Attribute names joined by `;`.
    pub true_cause: String,
    /// `name=value` items joined by `;`.
    pub anomalies: String,
    pub outlier_attr: String,
    pub nn: Option<f64>,
    pub lv: Option<f64>,
    pub refinement_outcome: String,
    pub kb_snapshot_hash: String,
}

const EPISODE_HEADER: [&str; 10] = [
    "episode",
    "phase",
    "outcome",
    "true_cause",
    "anomalies",
    "outlier_attr",
    "nn",
    "lv",
    "refinement_outcome",
    "kb_snapshot_hash",
];

impl EpisodeRow {
    pub fn from_record(r: &EpisodeRecord, schema: &AttributeSchema) -> Self {
        let name = |i: AttrIndex| schema.get(i).map(|a| a.name.clone()).unwrap_or_else(|| i.to_string());
        let step = r.step.as_ref();
        EpisodeRow {
            episode: r.episode,
            phase: r.phase,
            outcome: r.outcome,
            true_cause: r.true_cause.iter().map(|i| name(*i)).collect::<Vec<_>>().join(";"),
            anomalies: step
                .map(|s| s.anomalies.iter().map(ToString::to_string).collect::<Vec<_>>().join(";"))
                .unwrap_or_default(),
            outlier_attr: step
                .and_then(|s| s.outlier.as_ref())
                .map(|o| o.anomaly.attribute.clone())
                .unwrap_or_default(),
            nn: step.and_then(|s| s.nn),
            lv: step.and_then(|s| s.lv.as_ref()).map(|lv| lv.value),
            refinement_outcome: r.refinement_label().to_string(),
            kb_snapshot_hash: r.kb_hash.clone(),
        }
    }

    fn causes(&self) -> impl Iterator<Item = &str> {
        self.true_cause.split(';').filter(|s| !s.is_empty())
    }

    /// Failure events the reasoner processed; warm-up and reasoner-free rows
    /// are not scored.
    pub fn is_scored(&self) -> bool {
        self.phase != Phase::Warmup && self.outcome == EpisodeOutcome::Failure && self.refinement_outcome != "skipped"
    }
}

pub fn episodes_to_csv(rows: &[EpisodeRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(EPISODE_HEADER).expect("in-memory write");
    }
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn episodes_from_csv(text: &str, path: &str) -> Result<Vec<EpisodeRow>, HarnessError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| HarnessError::Malformed {
                path: path.to_string(),
                line: e.position().map(|p| p.line()).unwrap_or(i as u64 + 2),
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub obs: usize,
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    fn ratio(num: usize, den: usize) -> Option<f64> {
        (den > 0).then(|| num as f64 / den as f64)
    }

    pub fn tpr(&self) -> Option<f64> {
        Self::ratio(self.tp, self.tp + self.fn_)
    }

    pub fn fnr(&self) -> Option<f64> {
        Self::ratio(self.fn_, self.tp + self.fn_)
    }

    pub fn precision(&self) -> Option<f64> {
        Self::ratio(self.tp, self.tp + self.fp)
    }

    pub fn accuracy(&self) -> Option<f64> {
        Self::ratio(self.tp + self.tn, self.obs)
    }

    /// TP over all observations, the convention of the published table.
    pub fn paper_accuracy(&self) -> Option<f64> {
        Self::ratio(self.tp, self.obs)
    }
}

/// Scores every processed failure.
///
/// A failure left unattributed (nothing detected, or no learning step) is a
/// false negative when the ground truth names a cause and a true negative
/// otherwise. An attribution is a true positive when the selected attribute is
/// among the true causes, else a false positive.
pub fn compute_metrics(rows: &[EpisodeRow]) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for r in rows.iter().filter(|r| r.is_scored()) {
        c.obs += 1;
        let attributed = !r.outlier_attr.is_empty() && r.lv.is_some();
        match (attributed, r.causes().next().is_some()) {
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
            (true, _) if r.causes().any(|x| x == r.outlier_attr) => c.tp += 1,
            (true, _) => c.fp += 1,
        }
    }
    c
}

fn pct(x: Option<f64>) -> String {
    x.map(|v| format!("{:.1}%", v * 100.0)).unwrap_or_else(|| "undefined".into())
}

/// Counts and rates as written to `metrics.txt`.
pub fn render_metrics(rows: &[EpisodeRow]) -> String {
    let c = compute_metrics(rows);
    let failures = |p: Phase| rows.iter().filter(|r| r.phase == p && r.outcome == EpisodeOutcome::Failure).count();
    let ran = |p: Phase| rows.iter().any(|r| r.phase == p);
    let mut s = String::new();
    let _ = writeln!(s, "phase1_failures {}", failures(Phase::One));
    if ran(Phase::Two) {
        let _ = writeln!(s, "phase2_failures {}", failures(Phase::Two));
    }
    let _ = writeln!(s, "no_plan {}", rows.iter().filter(|r| r.outcome == EpisodeOutcome::NoPlan).count());
    let _ = writeln!(s, "Obs TP FN FP TN Preci. Accu. FNR TPR Accu.(TP/Obs)");
    let _ = writeln!(
        s,
        "{} {} {} {} {} {} {} {} {} {}",
        c.obs,
        c.tp,
        c.fn_,
        c.fp,
        c.tn,
        pct(c.precision()),
        pct(c.accuracy()),
        pct(c.fnr()),
        pct(c.tpr()),
        pct(c.paper_accuracy())
    );
    s
}

/// Failure rate of each consecutive window of phase-1 episodes that produced
/// a plan; `None` for a window where nothing was executed.
pub fn windowed_failure_rate(records: &[EpisodeRecord], window: usize) -> Vec<Option<f64>> {
    let phase1: Vec<&EpisodeRecord> = records.iter().filter(|r| r.phase == Phase::One).collect();
    phase1
        .chunks(window)
        .map(|w| {
            let executed = w.iter().filter(|r| r.outcome != EpisodeOutcome::NoPlan).count();
            let failed = w.iter().filter(|r| r.outcome == EpisodeOutcome::Failure).count();
            ConfusionCounts::ratio(failed, executed)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub schema: AttributeSchema,
    pub episodes: Vec<EpisodeRecord>,
    pub phase1_failures: usize,
    /// Present only when the reasoner was enabled.
    pub phase2_failures: Option<usize>,
    pub kb_before: KnowledgeBase,
    pub kb_after: KnowledgeBase,
    pub td_final: TrainingData,
    pub metrics: ConfusionCounts,
    pub failure_curve: Vec<Option<f64>>,
    /// Failure curve of a reasoner-free run on the same seed, if attached.
    pub baseline_curve: Option<Vec<Option<f64>>>,
}

impl ExperimentReport {
    pub fn rows(&self) -> Vec<EpisodeRow> {
        self.episodes.iter().map(|r| EpisodeRow::from_record(r, &self.schema)).collect()
    }

    pub fn attach_baseline(&mut self, baseline: &ExperimentReport) {
        self.baseline_curve = Some(baseline.failure_curve.clone());
    }
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    domain: DomainModel,
    schema: AttributeSchema,
    kb: KnowledgeBase,
    td: TrainingData,
    noise_rng: ChaCha8Rng,
    records: Vec<EpisodeRecord>,
    next_episode: u64,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl Runner<'_> {
    fn episode(
        &mut self,
        phase: Phase,
        scenario_rng: &mut ChaCha8Rng,
        seed: u64,
        reason: bool,
    ) -> Result<EpisodeOutcome, HarnessError> {
        let id = self.next_episode;
        self.next_episode += 1;
        let sc = generate_scenario(self.cfg.kind, scenario_rng, &self.kb, &self.schema, id, seed, SCENARIO_STREAM)?;
        let obs = observe(&sc, &self.cfg.noise, &mut self.noise_rng);
        let problem = instantiate_problem(&self.kb, &self.schema, &sc.perceived(&obs))?;
        let mut record = EpisodeRecord {
            episode: id,
            phase,
            outcome: EpisodeOutcome::NoPlan,
            true_cause: Vec::new(),
            scenario: sc,
            observed: None,
            step: None,
            kb_hash: String::new(),
        };
        match find_plan(&self.domain, &problem, self.cfg.planner) {
            Err(PlanError::NoPlanFound { .. }) => {
                log::info!(
                    "episode {id}: no plan for scenario d={} a={}",
                    record.scenario.true_distance,
                    record.scenario.true_angle
                );
            }
            Err(PlanError::Eval(e)) => return Err(HarnessError::Invariant(format!("episode {id}: {e}"))),
            Ok(plan) => {
                let v = validate_plan(&self.domain, &problem, &plan);
                if !v.is_valid() {
                    return Err(HarnessError::Invariant(format!("episode {id}: planner returned invalid plan: {v:?}")));
                }
                let fb = execute_plan(&plan, &record.scenario, &self.cfg.envelope, &obs, id)
                    .ok_or_else(|| HarnessError::Invariant(format!("episode {id}: plan has no grip step")))?;
                if fb.outcome == Outcome::Success && !fb.true_cause.is_empty() {
                    return Err(HarnessError::Invariant(format!("episode {id}: success with a failure cause")));
                }
                record.outcome = match fb.outcome {
                    Outcome::Success => EpisodeOutcome::Success,
                    Outcome::Failure => EpisodeOutcome::Failure,
                };
                if reason {
                    let step = adkra::process_feedback(&fb.observed, "grip", &mut self.kb, &mut self.td)?;
                    if !self.kb.check_invariants() {
                        return Err(HarnessError::Invariant(format!("episode {id}: knowledge base history corrupted")));
                    }
                    record.step = Some(step);
                } else if fb.outcome == Outcome::Success {
                    self.td.add_success(fb.observed.clone())?;
                }
                record.true_cause = fb.true_cause;
                record.observed = Some(fb.observed);
            }
        }
        record.kb_hash = self.kb.snapshot_hash();
        let outcome = record.outcome;
        self.records.push(record);
        Ok(outcome)
    }

    fn seed_training_data(&mut self) -> Result<(), HarnessError> {
        match self.cfg.td_seed {
            TdSeedPolicy::Empty => {}
            TdSeedPolicy::Warmup(k) => {
                let mut rng = stream_rng(self.cfg.seed, PRESEED_STREAM);
                let mut attempts = 0;
                while self.td.len() < k {
                    if attempts == self.cfg.seeding_attempts {
                        return Err(HarnessError::Config(format!(
                            "warm-up stored only {} of {k} successes",
                            self.td.len()
                        )));
                    }
                    attempts += 1;
                    self.episode(Phase::Warmup, &mut rng, self.cfg.seed, false)?;
                }
            }
            TdSeedPolicy::Preseed(k) => {
                let mut rng = stream_rng(self.cfg.seed, PRESEED_STREAM);
                let mut attempts = 0;
                while self.td.len() < k {
                    if attempts == self.cfg.seeding_attempts {
                        return Err(HarnessError::Config(format!(
                            "preseed found only {} of {k} successes",
                            self.td.len()
                        )));
                    }
                    attempts += 1;
                    let sc = generate_scenario(
                        self.cfg.kind,
                        &mut rng,
                        &self.kb,
                        &self.schema,
                        0,
                        self.cfg.seed,
                        PRESEED_STREAM,
                    )?;
                    if self.cfg.envelope.judge(sc.true_distance, sc.true_angle).is_empty() {
                        self.td.add_success(AttributeVector::new(sc.attribute_values(), Outcome::Success, 0))?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Runs one experiment.
///
/// Phase 1 plays `episodes_per_phase` episodes against the faulty knowledge
/// base. With the reasoner enabled, phase 2 plays the same number of freshly
/// drawn episodes (from [`ExperimentConfig::phase2_seed`]) against the
/// knowledge as it stands, with the reasoner still active.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    cfg.validate()?;
    let mut schema = case_study::grip_schema();
    schema.set_eta("distance", cfg.eta_distance)?;
    schema.set_eta("angle", cfg.eta_angle)?;
    let mut kb = case_study::engineered_kb();
    for (f, v) in &cfg.faults {
        kb.set_initial(f.clone(), *v);
    }
    let kb_before = kb.clone();
    let mut runner = Runner {
        cfg,
        domain: case_study::domain(),
        td: TrainingData::new(schema.clone()),
        schema,
        kb,
        noise_rng: stream_rng(cfg.seed, NOISE_STREAM),
        records: Vec::new(),
        next_episode: 0,
    };
    runner.seed_training_data()?;

    let mut rng = stream_rng(cfg.seed, SCENARIO_STREAM);
    let mut phase1_failures = 0;
    for _ in 0..cfg.episodes_per_phase {
        if runner.episode(Phase::One, &mut rng, cfg.seed, cfg.adkra_enabled)? == EpisodeOutcome::Failure {
            phase1_failures += 1;
        }
    }
    let phase2_failures = if cfg.adkra_enabled {
        let seed = cfg.phase2_seed();
        let mut rng = stream_rng(seed, SCENARIO_STREAM);
        let mut n = 0;
        for _ in 0..cfg.episodes_per_phase {
            if runner.episode(Phase::Two, &mut rng, seed, true)? == EpisodeOutcome::Failure {
                n += 1;
            }
        }
        Some(n)
    } else {
        None
    };

    let rows: Vec<EpisodeRow> = runner.records.iter().map(|r| EpisodeRow::from_record(r, &runner.schema)).collect();
    Ok(ExperimentReport {
        config: cfg.clone(),
        metrics: compute_metrics(&rows),
        failure_curve: windowed_failure_rate(&runner.records, cfg.window),
        schema: runner.schema,
        episodes: runner.records,
        phase1_failures,
        phase2_failures,
        kb_before,
        kb_after: runner.kb,
        td_final: runner.td,
        baseline_curve: None,
    })
}

/// Runs `cfg` and, when the reasoner is enabled, a reasoner-free run on the
/// same seed whose failure curve is attached for comparison.
pub fn run_with_baseline(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    let mut report = run_experiment(cfg)?;
    if cfg.adkra_enabled {
        let baseline = run_experiment(&ExperimentConfig { adkra_enabled: false, ..cfg.clone() })?;
        report.attach_baseline(&baseline);
    }
    Ok(report)
}

fn fmt_rate(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.3}")).unwrap_or_default()
}

/// `window,first_episode,with_adkra,without_adkra`.
pub fn failure_curve_csv(r: &ExperimentReport) -> String {
    let (with, without) = if r.config.adkra_enabled {
        (Some(&r.failure_curve), r.baseline_curve.as_ref())
    } else {
        (None, Some(&r.failure_curve))
    };
    let n = with.map_or(0, |c| c.len()).max(without.map_or(0, |c| c.len()));
    let mut s = String::from("window,first_episode,with_adkra,without_adkra\n");
    for i in 0..n {
        let at = |c: Option<&Vec<Option<f64>>>| fmt_rate(c.and_then(|c| c.get(i).copied().flatten()));
        let _ = writeln!(s, "{i},{},{},{}", i * r.config.window, at(with), at(without));
    }
    s
}

/// Writes `episodes.csv`, `failure_curve.csv`, `metrics.txt`, `kb_final.csv`,
/// `relationships.csv`, `training_data.csv` and `scenarios.csv` into `dir`.
pub fn emit_report(r: &ExperimentReport, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let rows = r.rows();
    let files = [
        ("episodes.csv", episodes_to_csv(&rows)),
        ("failure_curve.csv", failure_curve_csv(r)),
        (
            "metrics.txt",
            format!(
                "kind {}\nseed {}\nphase2_seed {}\n{}",
                r.config.kind,
                r.config.seed,
                r.config.phase2_seed(),
                render_metrics(&rows)
            ),
        ),
        ("kb_final.csv", r.kb_after.fluents_csv()),
        ("relationships.csv", r.kb_after.relationships_csv()),
        ("training_data.csv", r.td_final.to_csv()),
        ("scenarios.csv", scenarios_to_csv(r.episodes.iter().map(|e| &e.scenario))),
    ];
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    }
    Ok(())
}

/// Reads `episodes.csv` from a run directory.
pub fn load_episodes(dir: &Path) -> Result<Vec<EpisodeRow>, HarnessError> {
    let path = dir.join("episodes.csv");
    let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
    episodes_from_csv(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests;
