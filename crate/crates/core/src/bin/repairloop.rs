use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info, warn};

use repairloop::agent::{find_logs, report_from_log, Session, SessionConfig, SessionReport, Verdict};
use repairloop::bench::{
    compute_metrics, emit_report, import_codeflaws, load_dataset, load_tests, render_table, BugCase, ReportFormat,
};
use repairloop::harness::{Harness, SourceUnit};
use repairloop::provider::{HttpProvider, Provider, ProviderConfig, Script, ScriptedProvider};
use repairloop::spectrum::{localize, Formula, DEFAULT_FALLBACK_K, DEFAULT_THRESHOLD};
use repairloop::{Error, Scenario};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_PROVIDER: u8 = 3;

#[derive(Parser)]
#[command(name = "repairloop", version, about = "Repair single-file C programs with a language model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank suspicious lines of a program from its test spectrum.
    Localize(LocalizeArgs),
    /// Run a repair session on one program.
    Repair(RepairArgs),
    /// Run repair sessions over a dataset and write aggregate metrics.
    Bench(BenchArgs),
    /// Recompute metrics from existing run logs.
    Report(ReportArgs),
    /// Convert a Codeflaws checkout into a manifest dataset.
    ImportCodeflaws {
        /// Codeflaws root holding `<contest>-<problem>-bug-<a>-<b>` directories.
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        to: PathBuf,
    },
}

#[derive(Args)]
struct ProgramArgs {
    /// C source file.
    #[arg(long)]
    source: PathBuf,
    /// Directory of `<n>.in` / `<n>.out` pairs.
    #[arg(long)]
    tests: PathBuf,
}

#[derive(Args)]
struct LocalizeOpts {
    #[arg(long, default_value = "ochiai")]
    formula: Formula,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Lines kept when none exceeds the threshold.
    #[arg(long, default_value_t = DEFAULT_FALLBACK_K)]
    fallback_k: usize,
    /// Per-test timeout in seconds.
    #[arg(long, default_value_t = 120.0)]
    timeout: f64,
}

#[derive(Args)]
struct LocalizeArgs {
    #[command(flatten)]
    program: ProgramArgs,
    #[command(flatten)]
    opts: LocalizeOpts,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProviderKind {
    Http,
    Scripted,
}

#[derive(Args)]
struct SessionOpts {
    #[command(flatten)]
    localize: LocalizeOpts,
    #[arg(long, default_value_t = repairloop::agent::DEFAULT_MAX_ITERATIONS)]
    max_iterations: u32,
    /// Previous attempts shown in full before older ones are collapsed.
    #[arg(long, default_value_t = repairloop::prompt::DEFAULT_HISTORY_CAP)]
    history_cap: usize,
    #[arg(long, value_enum, default_value = "http")]
    provider: ProviderKind,
    /// JSON response script for the scripted provider.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Model id; overrides REPAIRLOOP_MODEL. Labels scripted runs.
    #[arg(long)]
    model: Option<String>,
    /// Directory of custom system prompt templates (scenario1.txt .. scenario5.txt).
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Where JSONL run logs are written.
    #[arg(long, default_value = "runs")]
    runs: PathBuf,
    #[arg(long)]
    no_log: bool,
}

#[derive(Args)]
struct RepairArgs {
    #[command(flatten)]
    program: ProgramArgs,
    #[arg(long, default_value = "5")]
    scenario: Scenario,
    /// Bug id used in logs; defaults to the source file stem.
    #[arg(long)]
    bug_id: Option<String>,
    /// Write the best patch here.
    #[arg(long)]
    patch_out: Option<PathBuf>,
    /// Print the full session report as JSON.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    session: SessionOpts,
}

#[derive(Args)]
struct BenchArgs {
    /// Dataset root containing manifest.tsv.
    #[arg(long)]
    dataset: PathBuf,
    /// Comma-separated scenarios, by number or name.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    scenarios: Vec<Scenario>,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    /// Report directory.
    #[arg(long, default_value = "reports")]
    out: PathBuf,
    #[command(flatten)]
    session: SessionOpts,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory of run logs.
    #[arg(long, default_value = "runs")]
    runs: PathBuf,
    #[arg(long, default_value = "reports")]
    out: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::ProviderConfig(_) => EXIT_PROVIDER,
            Error::Dataset(_) | Error::InvalidInput(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Localize(args) => cmd_localize(args),
        Command::Repair(args) => cmd_repair(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Report(args) => cmd_report(args),
        Command::ImportCodeflaws { from, to } => import_codeflaws(&from, &to).map_err(Failure::from).map(|n| {
            println!("imported {n} cases into {}", to.display());
            0
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_program(args: &ProgramArgs, bug_id: Option<String>) -> Result<BugCase, Failure> {
    let buggy_source = fs::read_to_string(&args.source).map_err(|e| Failure::from(Error::io(&args.source, e)))?;
    let tests = load_tests(&args.tests)?;
    if tests.is_empty() {
        return Err(usage(format!("no `<n>.in` tests in {}", args.tests.display())));
    }
    let bug_id = bug_id.unwrap_or_else(|| {
        args.source.file_stem().map_or_else(|| "program".to_string(), |s| s.to_string_lossy().into_owned())
    });
    Ok(BugCase { bug_id, buggy_source, tests, reference_fix: None })
}

fn cmd_localize(args: LocalizeArgs) -> Result<u8, Failure> {
    let bug = load_program(&args.program, None)?;
    let source = SourceUnit::new(bug.buggy_source, args.program.source.display().to_string())?;
    if !args.opts.timeout.is_finite() || args.opts.timeout <= 0.0 {
        return Err(usage("--timeout must be positive"));
    }
    let harness = Harness::with_timeout(Duration::from_secs_f64(args.opts.timeout));
    let work = tempfile::tempdir().map_err(|e| Failure::from(Error::io(std::env::temp_dir(), e)))?;
    let eval = harness.evaluate(&source, &bug.tests, work.path())?;
    if !eval.compile.success {
        eprint!("{}", eval.compile.log);
        eprintln!("error: compilation failed");
        return Ok(EXIT_USAGE);
    }
    for w in &eval.coverage_warnings {
        warn!("{w}");
    }
    let ranking =
        localize(&eval.coverage, &eval.verdicts(), args.opts.formula, args.opts.threshold, args.opts.fallback_k)?;
    print!("{}", ranking.serialize());
    Ok(0)
}

fn build_provider(opts: &SessionOpts) -> Result<Box<dyn Provider>, Failure> {
    match opts.provider {
        ProviderKind::Http => {
            let mut cfg = ProviderConfig::from_env();
            if let Some(model) = &opts.model {
                cfg.model_id = model.clone();
            }
            Ok(Box::new(HttpProvider::from_config(&cfg)?))
        }
        ProviderKind::Scripted => {
            let path = opts.script.as_ref().ok_or_else(|| Failure {
                code: EXIT_PROVIDER,
                message: "--provider scripted needs --script FILE".into(),
            })?;
            let script = Script::load(path).map_err(|e| Failure { code: EXIT_PROVIDER, message: e.to_string() })?;
            let label = opts.model.clone().unwrap_or_else(|| "scripted".into());
            Ok(Box::new(ScriptedProvider::from_script(script)?.with_label(label)))
        }
    }
}

fn session_config(opts: &SessionOpts, scenario: Scenario) -> Result<SessionConfig, Failure> {
    let cfg = SessionConfig {
        scenario,
        max_iterations: opts.max_iterations,
        formula: opts.localize.formula,
        threshold: opts.localize.threshold,
        fallback_k: opts.localize.fallback_k,
        test_timeout: opts.localize.timeout,
        history_cap: opts.history_cap,
        runs_dir: (!opts.no_log).then(|| opts.runs.clone()),
        templates_dir: opts.templates.clone(),
        ..SessionConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_repair(args: RepairArgs) -> Result<u8, Failure> {
    let bug = load_program(&args.program, args.bug_id.clone())?;
    let cfg = session_config(&args.session, args.scenario)?;
    let provider = build_provider(&args.session)?;
    let mut session = Session::new(&cfg, provider.as_ref())?;
    let report = session.run(&bug)?;
    if let Some(path) = session.log_path() {
        info!("run log: {}", path.display());
    }

    if let Some(out) = &args.patch_out {
        match best_patch(&report) {
            Some(code) => fs::write(out, code).map_err(|e| Failure::from(Error::io(out, e)))?,
            None => warn!("no patch to write"),
        }
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    } else {
        print_summary(&report, bug.tests.len());
    }
    Ok(if report.verdict == Verdict::CompleteFix { 0 } else { EXIT_FAILURE })
}

fn best_patch(report: &SessionReport) -> Option<&str> {
    let best = report.best_iteration?;
    report.attempts.iter().find(|a| a.iteration == best)?.patch.as_ref().map(|p| p.code.as_str())
}

fn print_summary(report: &SessionReport, total: usize) {
    println!("bug: {}", report.bug_id);
    println!("scenario: {} ({})", report.scenario.number(), report.scenario.name());
    println!("model: {}", report.model);
    println!("verdict: {}", report.verdict);
    println!("iterations: {}", report.iterations_used);
    println!("failing: {}/{total} -> {}/{total}", report.initial_failing.len(), report.final_failing.len());
    if !report.regressions.is_empty() {
        println!("regressions: {}", report.regressions.iter().cloned().collect::<Vec<_>>().join(", "));
    }
    println!("time: {:.2} s (provider {:.2} s)", report.wall_time, report.provider_latency);
    if let Some(e) = &report.error {
        println!("note: {e}");
    }
}

fn cmd_bench(args: BenchArgs) -> Result<u8, Failure> {
    if args.scenarios.is_empty() {
        return Err(usage("--scenarios must name at least one scenario"));
    }
    if args.parallelism == 0 {
        return Err(usage("--parallelism must be at least 1"));
    }
    let index = load_dataset(&args.dataset).map_err(|e| usage(e.to_string()))?;
    if index.is_empty() {
        warn!("dataset {} has no usable cases", args.dataset.display());
        println!("no cases to run");
        return Ok(0);
    }
    let provider = build_provider(&args.session)?;

    let mut scenarios = args.scenarios.clone();
    scenarios.sort_by_key(|s| s.number());
    scenarios.dedup();
    let mut reports = Vec::new();
    for scenario in scenarios {
        let cfg = session_config(&args.session, scenario)?;
        info!("scenario {}: {} cases", scenario.number(), index.len());
        reports.extend(repairloop::bench::run_benchmark(&index, &cfg, provider.as_ref(), args.parallelism));
    }
    for r in reports.iter().filter(|r| r.error.is_some()) {
        warn!("{} (scenario {}): {}", r.bug_id, r.scenario.number(), r.error.as_deref().unwrap_or_default());
    }
    write_metrics(&reports, &args.out)
}

fn write_metrics(reports: &[SessionReport], out: &Path) -> Result<u8, Failure> {
    let metrics = compute_metrics(reports)?;
    let written = emit_report(&metrics, out, &[ReportFormat::Json, ReportFormat::Table])?;
    print!("{}", render_table(&metrics));
    for path in written {
        info!("wrote {}", path.display());
    }
    Ok(0)
}

fn cmd_report(args: ReportArgs) -> Result<u8, Failure> {
    let logs = if args.runs.is_dir() { find_logs(&args.runs)? } else { Vec::new() };
    if logs.is_empty() {
        return Err(usage(format!("no run logs under {}", args.runs.display())));
    }
    let mut reports = Vec::with_capacity(logs.len());
    for path in &logs {
        match report_from_log(path) {
            Ok(r) => reports.push(r),
            Err(e) => {
                error!("{e}");
                return Err(Failure {
                    code: EXIT_FAILURE,
                    message: format!("corrupt run log {}: {e}", path.display()),
                });
            }
        }
    }
    write_metrics(&reports, &args.out)
}
