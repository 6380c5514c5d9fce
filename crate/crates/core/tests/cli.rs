use std::path::Path;
use std::process::{Command, Output};

fn kbrefine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kbrefine")).args(args).current_dir(env!("CARGO_MANIFEST_DIR")).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const DOMAIN: &str = "data/nao_domain.pddl";
const FAULTY: &str = "tests/fixtures/grip_faulty.pddl";

#[test]
fn parse_prints_canonical_forms() {
    let o = kbrefine(&["parse", DOMAIN, FAULTY]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("(define (domain nao)\n"));
    assert!(text.contains("(define (problem grip-faulty)"));
    assert!(text.contains("(= (maxdis grp) 27)"));
}

#[test]
fn plan_prints_the_timed_listing() {
    let o = kbrefine(&["plan", "--domain", DOMAIN, "--problem", FAULTY]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        stdout(&o),
        "; Cost : 2\n; Time 0.00\n0.000: (goto nao wp0 wp2) [0.001]\n0.001: (grip nao redcup wp2 wp1 grp) [0.001]\n"
    );
    let compact = kbrefine(&["plan", "--domain", DOMAIN, "--problem", "tests/fixtures/grip_refined.pddl", "--compact"]);
    assert_eq!(stdout(&compact), "(goto nao wp0 wp4)\n(grip nao redcup wp4 wp1 grp)\n");
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&kbrefine(&[])), 1);
    assert_eq!(code(&kbrefine(&["fly"])), 1);
    assert_eq!(code(&kbrefine(&["run", "--kind", "sideways", "--out", "x"])), 1);
    assert_eq!(code(&kbrefine(&["plan", "--domain", DOMAIN])), 1);
    assert_eq!(code(&kbrefine(&["--help"])), 0);
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.pddl");
    std::fs::write(&broken, "(define (domain d) (:requirements :durative-actions))").unwrap();
    let o = kbrefine(&["parse", broken.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("durative"));
    assert_eq!(code(&kbrefine(&["parse", "no/such/file.pddl"])), 2);
    assert_eq!(code(&kbrefine(&["plan", "--domain", DOMAIN, "--problem", FAULTY, "--max-depth", "1"])), 2);
    let out = dir.path().join("run");
    let out = out.to_str().unwrap();
    assert_eq!(code(&kbrefine(&["run", "--kind", "distance", "--fault", "reach=3", "--out", out])), 2);
    assert_eq!(code(&kbrefine(&["run", "--kind", "distance", "--fault", "maxdis", "--out", out])), 2);
    assert_eq!(code(&kbrefine(&["run", "--kind", "distance", "--episodes", "0", "--out", out])), 2);
    assert_eq!(code(&kbrefine(&["metrics", "--in", dir.path().join("nothing").to_str().unwrap()])), 2);
}

#[test]
fn run_then_metrics_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = kbrefine(&["run", "--kind", "group", "--episodes", "40", "--seed", "3", "--out", out]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    for f in ["episodes.csv", "failure_curve.csv", "metrics.txt", "kb_final.csv"] {
        assert!(Path::new(out).join(f).exists(), "{f}");
    }
    let metrics = kbrefine(&["metrics", "--in", out]);
    assert_eq!(code(&metrics), 0);
    let table = stdout(&metrics);
    assert!(table.contains("Obs TP FN FP TN Preci. Accu. FNR TPR Accu.(TP/Obs)"));
    assert!(stdout(&run).contains(&table), "run summary embeds the same table");
}

#[test]
fn ground_fluent_faults_and_preseeding() {
    let dir = tempfile::tempdir().unwrap();
    let o = kbrefine(&[
        "run",
        "--kind",
        "distance",
        "--episodes",
        "20",
        "--fault",
        "maxdis(grp)=26",
        "--preseed-td",
        "10",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let episodes = std::fs::read_to_string(dir.path().join("episodes.csv")).unwrap();
    assert!(!episodes.contains(",warmup,"));
}
