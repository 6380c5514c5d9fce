use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kbrefine::case_study;
use kbrefine::harness::{self, ExperimentConfig, HarnessError, TdSeedPolicy};
use kbrefine::pddl::{parse_domain, parse_problem, print_domain, print_problem, GroundFluent};
use kbrefine::planner::{find_plan, format_plan, format_plan_compact, validate_plan, PlanError, PlannerConfig};
use kbrefine::sim::{ExperimentKind, NoiseModel};

#[derive(Parser)]
#[command(name = "kbrefine", version, about = "Plan, execute, and refine numeric planning knowledge from experience")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate PDDL files and print them in canonical form.
    Parse { domain: PathBuf, problem: Option<PathBuf> },
    /// Find a shortest plan and print it.
    Plan {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value_t = 10)]
        max_depth: usize,
        /// One action per line, without timing.
        #[arg(long)]
        compact: bool,
    },
    /// Run a simulated experiment and write its report files.
    Run(RunArgs),
    /// Recompute confusion metrics from a run directory.
    Metrics {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    kind: ExperimentKind,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    no_adkra: bool,
    #[arg(long, default_value_t = 1.0)]
    eta_distance: f64,
    #[arg(long, default_value_t = 1.0)]
    eta_angle: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_sigma_distance: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_sigma_angle: f64,
    /// `fluent=value`; a bare fluent name such as `maxdis` is resolved
    /// against the knowledge base. Replaces the kind's default faults.
    #[arg(long = "fault", value_name = "FLUENT=VALUE")]
    faults: Vec<String>,
    /// Seed the training data with K ground-truth successes instead of a warm-up.
    #[arg(long, value_name = "K")]
    preseed_td: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Input(String),
    Internal(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Invariant(_) | HarnessError::Adkra(_) | HarnessError::Kb(_) | HarnessError::Store(_) => {
                Failure::Internal(e.to_string())
            }
            _ => Failure::Input(e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn input<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Input(format!("{}: {e}", path.display()))
}

fn parse_cmd(domain: &Path, problem: Option<&Path>) -> Result<(), Failure> {
    let d = parse_domain(&read(domain)?).map_err(input(domain))?;
    let printed = print_domain(&d);
    if parse_domain(&printed).ok().as_ref() != Some(&d) {
        return Err(Failure::Internal("canonical domain does not reparse to the same model".into()));
    }
    print!("{printed}");
    if let Some(problem) = problem {
        let p = parse_problem(&read(problem)?, &d).map_err(input(problem))?;
        let printed = print_problem(&p);
        if parse_problem(&printed, &d).ok().as_ref() != Some(&p) {
            return Err(Failure::Internal("canonical problem does not reparse to the same model".into()));
        }
        println!();
        print!("{printed}");
    }
    Ok(())
}

fn plan_cmd(domain: &Path, problem: &Path, max_depth: usize, compact: bool) -> Result<(), Failure> {
    let d = parse_domain(&read(domain)?).map_err(input(domain))?;
    let p = parse_problem(&read(problem)?, &d).map_err(input(problem))?;
    let plan = match find_plan(&d, &p, PlannerConfig { max_depth }) {
        Ok(plan) => plan,
        Err(e @ PlanError::NoPlanFound { .. }) => return Err(Failure::Input(e.to_string())),
        Err(e) => return Err(Failure::Input(format!("{}: {e}", problem.display()))),
    };
    let v = validate_plan(&d, &p, &plan);
    if !v.is_valid() {
        return Err(Failure::Internal(format!("planner produced an invalid plan: {v:?}")));
    }
    print!("{}", if compact { format_plan_compact(&plan) } else { format_plan(&plan) });
    Ok(())
}

/// Resolves `name=value`, where `name` is a ground fluent or a bare fluent
/// name matching exactly one knowledge-base entry.
fn parse_fault(spec: &str) -> Result<(GroundFluent, f64), Failure> {
    let bad = |m: String| Failure::Input(format!("--fault {spec}: {m}"));
    let (name, value) = spec.split_once('=').ok_or_else(|| bad("expected FLUENT=VALUE".into()))?;
    let value: f64 = value.trim().parse().map_err(|_| bad(format!("'{value}' is not a number")))?;
    let name = name.trim();
    if name.contains('(') {
        return name.parse().map(|f| (f, value)).map_err(|e| bad(format!("{e}")));
    }
    let kb = case_study::engineered_kb();
    let key = kbrefine::pddl::function_key(name);
    let mut matches = kb.entries().map(|e| e.fluent()).filter(|f| f.name() == key);
    match (matches.next(), matches.next()) {
        (Some(f), None) => Ok((f.clone(), value)),
        (None, _) => Err(bad(format!("no knowledge-base fluent named '{name}'"))),
        (Some(_), Some(_)) => Err(bad(format!("'{name}' is ambiguous; give its arguments"))),
    }
}

fn run_cmd(args: RunArgs) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::new(args.kind);
    cfg.episodes_per_phase = args.episodes;
    cfg.seed = args.seed;
    cfg.adkra_enabled = !args.no_adkra;
    cfg.eta_distance = args.eta_distance;
    cfg.eta_angle = args.eta_angle;
    cfg.noise = NoiseModel { sigma_distance: args.noise_sigma_distance, sigma_angle: args.noise_sigma_angle };
    if !args.faults.is_empty() {
        cfg.faults = args.faults.iter().map(|s| parse_fault(s)).collect::<Result<_, _>>()?;
    }
    if let Some(k) = args.preseed_td {
        cfg.td_seed = TdSeedPolicy::Preseed(k);
    }
    let report = harness::run_with_baseline(&cfg)?;
    harness::emit_report(&report, &args.out)?;

    println!("kind {} seed {} episodes/phase {}", cfg.kind, cfg.seed, cfg.episodes_per_phase);
    println!("phase 1 failures: {}", report.phase1_failures);
    if let Some(n) = report.phase2_failures {
        println!("phase 2 failures: {n}");
    }
    for e in report.kb_after.entries() {
        let before = report.kb_before.entry(e.fluent(), e.condition()).map(|b| b.effective());
        if before != Some(e.effective()) {
            let at = e.condition().map(|b| format!("[{b}]")).unwrap_or_default();
            let before = before.map(|b| b.to_string()).unwrap_or_else(|| "-".into());
            println!("{}{at}: {before} -> {} ({})", e.fluent(), e.effective(), e.status().as_str());
        }
    }
    print!("{}", harness::render_metrics(&report.rows()));
    println!("report written to {}", args.out.display());
    Ok(())
}

fn metrics_cmd(dir: &Path) -> Result<(), Failure> {
    let rows = harness::load_episodes(dir)?;
    print!("{}", harness::render_metrics(&rows));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Parse { domain, problem } => parse_cmd(&domain, problem.as_deref()),
        Command::Plan { domain, problem, max_depth, compact } => plan_cmd(&domain, &problem, max_depth, compact),
        Command::Run(args) => run_cmd(args),
        Command::Metrics { input } => metrics_cmd(&input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(3)
        }
    }
}
