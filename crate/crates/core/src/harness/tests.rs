use super::*;

fn row(outcome: EpisodeOutcome, cause: &str, outlier: &str, lv: Option<f64>, label: &str) -> EpisodeRow {
    EpisodeRow {
        episode: 0,
        phase: Phase::One,
        outcome,
        true_cause: cause.into(),
        anomalies: String::new(),
        outlier_attr: outlier.into(),
        nn: lv,
        lv,
        refinement_outcome: label.into(),
        kb_snapshot_hash: String::new(),
    }
}

fn table(tp: usize, fn_: usize, fp: usize, tn: usize) -> Vec<EpisodeRow> {
    let f = EpisodeOutcome::Failure;
    let mut rows = Vec::new();
    rows.extend((0..tp).map(|_| row(f, "distance", "distance", Some(23.0), "applied_temporary")));
    rows.extend((0..fn_).map(|_| row(f, "distance", "", None, "undetected")));
    rows.extend((0..fp).map(|_| row(f, "angle", "distance", Some(23.0), "rejected_reverted")));
    rows.extend((0..tn).map(|_| row(f, "", "", None, "undetected")));
    rows
}

#[test]
fn rates_from_counts() {
    let c = compute_metrics(&table(61, 4, 2, 0));
    assert_eq!(c, ConfusionCounts { obs: 67, tp: 61, fn_: 4, fp: 2, tn: 0 });
    assert_eq!(format!("{:.1}", c.precision().unwrap() * 100.0), "96.8");
    assert_eq!(format!("{:.1}", c.tpr().unwrap() * 100.0), "93.8");
    assert_eq!(format!("{:.1}", c.fnr().unwrap() * 100.0), "6.2");
    assert_eq!(format!("{:.1}", c.paper_accuracy().unwrap() * 100.0), "91.0");
}

#[test]
fn undefined_rates_are_none() {
    let c = compute_metrics(&[]);
    assert_eq!(c, ConfusionCounts::default());
    assert!(c.tpr().is_none() && c.fnr().is_none() && c.precision().is_none() && c.accuracy().is_none());
    let text = render_metrics(&[]);
    assert!(
        text.contains("Obs TP FN FP TN Preci. Accu. FNR TPR Accu.(TP/Obs)\n0 0 0 0 0 undefined undefined"),
        "{text}"
    );
    assert!(!text.contains("phase2_failures"));
}

#[test]
fn only_processed_failures_are_scored() {
    let mut warm = row(EpisodeOutcome::Failure, "distance", "", None, "skipped");
    warm.phase = Phase::Warmup;
    let rows = vec![
        warm,
        row(EpisodeOutcome::Failure, "distance", "", None, "skipped"),
        row(EpisodeOutcome::Success, "", "", None, "confirmed"),
        row(EpisodeOutcome::NoPlan, "", "", None, "skipped"),
        row(EpisodeOutcome::Failure, "distance", "distance", None, "no_change"),
        row(EpisodeOutcome::Failure, "distance;angle", "angle", Some(-24.0), "applied_temporary"),
    ];
    let c = compute_metrics(&rows);
    assert_eq!(c, ConfusionCounts { obs: 2, tp: 1, fn_: 1, fp: 0, tn: 0 });
    let text = render_metrics(&rows);
    assert!(text.starts_with("phase1_failures 3\nno_plan 1\n"), "{text}");
}

#[test]
fn empty_outputs_still_have_headers() {
    assert_eq!(episodes_to_csv(&[]), format!("{}\n", EPISODE_HEADER.join(",")));
    assert!(episodes_from_csv(&episodes_to_csv(&[]), "x").unwrap().is_empty());
}

#[test]
fn episode_rows_round_trip() {
    let mut rows = table(2, 1, 1, 1);
    rows[0].phase = Phase::Two;
    rows[0].anomalies = "distance=24;angle=-10".into();
    let text = episodes_to_csv(&rows);
    assert!(text.starts_with(
        "episode,phase,outcome,true_cause,anomalies,outlier_attr,nn,lv,refinement_outcome,kb_snapshot_hash\n"
    ));
    assert_eq!(episodes_from_csv(&text, "x").unwrap(), rows);
    assert!(matches!(
        episodes_from_csv("episode,phase\nx,1\n", "bad.csv"),
        Err(HarnessError::Malformed { line: 2, .. })
    ));
}

#[test]
fn config_validation() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Distance);
    assert!(cfg.validate().is_ok());
    cfg.episodes_per_phase = 0;
    assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));
    let mut cfg = ExperimentConfig::new(ExperimentKind::Distance);
    cfg.faults.push(("reach(grp)".parse().unwrap(), 1.0));
    assert!(matches!(run_experiment(&cfg), Err(HarnessError::Config(_))));
    let mut cfg = ExperimentConfig::new(ExperimentKind::Distance);
    cfg.noise.sigma_angle = -1.0;
    assert!(cfg.validate().is_err());
    cfg.noise.sigma_angle = 0.0;
    cfg.eta_angle = 0.0;
    assert!(matches!(run_experiment(&cfg), Err(HarnessError::Schema(_))));
}

fn small(kind: ExperimentKind) -> ExperimentConfig {
    ExperimentConfig { episodes_per_phase: 30, ..ExperimentConfig::new(kind) }
}

#[test]
fn same_seed_same_run() {
    let a = run_experiment(&small(ExperimentKind::Distance)).unwrap();
    let b = run_experiment(&small(ExperimentKind::Distance)).unwrap();
    assert_eq!(a.rows(), b.rows());
    assert_eq!(a.kb_after, b.kb_after);
    let c = run_experiment(&ExperimentConfig { seed: 8, ..small(ExperimentKind::Distance) }).unwrap();
    assert_ne!(a.rows(), c.rows());
}

#[test]
fn warmup_episodes_are_logged_but_not_scored() {
    let r = run_experiment(&small(ExperimentKind::Distance)).unwrap();
    let warm: Vec<_> = r.episodes.iter().filter(|e| e.phase == Phase::Warmup).collect();
    assert!(!warm.is_empty());
    assert!(warm.iter().all(|e| e.step.is_none() && e.refinement_label() == "skipped"));
    assert!(r.td_final.len() >= 30);
    let phase1 = r.episodes.iter().filter(|e| e.phase == Phase::One).count();
    let phase2 = r.episodes.iter().filter(|e| e.phase == Phase::Two).count();
    assert_eq!((phase1, phase2), (30, 30));
    let episodes: Vec<u64> = r.episodes.iter().map(|e| e.episode).collect();
    assert!(episodes.windows(2).all(|w| w[1] == w[0] + 1));
}

#[test]
fn seeding_policies() {
    let empty =
        run_experiment(&ExperimentConfig { td_seed: TdSeedPolicy::Empty, ..small(ExperimentKind::Distance) }).unwrap();
    assert!(empty.episodes.iter().all(|e| e.phase != Phase::Warmup));
    let pre =
        run_experiment(&ExperimentConfig { td_seed: TdSeedPolicy::Preseed(20), ..small(ExperimentKind::Distance) })
            .unwrap();
    assert!(pre.episodes.iter().all(|e| e.phase != Phase::Warmup));
    assert!(pre.td_final.len() >= 20);
}

#[test]
fn reasoner_free_run_has_no_phase_two() {
    let r = run_experiment(&ExperimentConfig { adkra_enabled: false, ..small(ExperimentKind::Distance) }).unwrap();
    assert_eq!(r.phase2_failures, None);
    assert_eq!(r.kb_after, r.kb_before);
    assert_eq!(r.metrics.obs, 0);
    assert!(r.episodes.iter().all(|e| e.step.is_none()));
}

#[test]
fn failures_feed_the_reasoner_and_the_curve() {
    let r = run_with_baseline(&small(ExperimentKind::Distance)).unwrap();
    assert_eq!(r.failure_curve.len(), 3);
    assert_eq!(r.baseline_curve.as_ref().map(Vec::len), Some(3));
    let scored = r.rows().iter().filter(|x| x.is_scored()).count();
    assert_eq!(scored, r.metrics.obs);
    assert_eq!(
        r.episodes.iter().filter(|e| e.phase == Phase::One && e.outcome == EpisodeOutcome::Failure).count(),
        r.phase1_failures
    );
    let csv = failure_curve_csv(&r);
    assert!(csv.starts_with("window,first_episode,with_adkra,without_adkra\n0,0,"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn windowed_rates_skip_unexecuted_windows() {
    let sc = Scenario::new(0, ExperimentKind::Distance, 20.0, -10.0, 0, 1);
    let rec = |outcome| EpisodeRecord {
        episode: 0,
        phase: Phase::One,
        outcome,
        true_cause: Vec::new(),
        scenario: sc.clone(),
        observed: None,
        step: None,
        kb_hash: String::new(),
    };
    let records = vec![
        rec(EpisodeOutcome::Failure),
        rec(EpisodeOutcome::Success),
        rec(EpisodeOutcome::NoPlan),
        rec(EpisodeOutcome::NoPlan),
        rec(EpisodeOutcome::Success),
    ];
    assert_eq!(windowed_failure_rate(&records, 2), [Some(0.5), None, Some(0.0)]);
}

#[test]
fn report_files_are_written_and_reloaded() {
    let r = run_experiment(&small(ExperimentKind::Angle)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&r, dir.path()).unwrap();
    for f in [
        "episodes.csv",
        "failure_curve.csv",
        "metrics.txt",
        "kb_final.csv",
        "relationships.csv",
        "training_data.csv",
        "scenarios.csv",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert_eq!(load_episodes(dir.path()).unwrap(), r.rows());
    let metrics = std::fs::read_to_string(dir.path().join("metrics.txt")).unwrap();
    assert!(metrics.starts_with("kind angle\nseed 7\n"));
    assert!(matches!(load_episodes(&dir.path().join("missing")), Err(HarnessError::Io { .. })));
}

#[test]
fn phase_two_seed_differs_from_phase_one() {
    let cfg = ExperimentConfig::new(ExperimentKind::Distance);
    assert_ne!(cfg.phase2_seed(), cfg.seed);
    assert_eq!(cfg.phase2_seed(), ExperimentConfig::new(ExperimentKind::Angle).phase2_seed());
}
