//! Command-line interface: `generate`, `bench`, `verify`, `test`, `stats`,
//! `transform`.
//!
//! Settings merge as flags > environment > `verigen.toml` > built-in
//! defaults. Exit codes follow one contract everywhere: 0 success/solved,
//! 1 unsolved/failed, 2 environment error, 64 usage error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::bench::{
    discover_problems, render_sweep_table, render_table, rows_to_csv, run_bench, run_sweep,
};
use crate::bundle::{bundle_stats, load_bundle, validate_bundle, WhitespaceTokenizer};
use crate::engine::{
    build_provider, run_session, write_outputs, EngineError, ProviderConfig, SessionConfig,
    SessionStatus,
};
use crate::harness::{run_tests, HarnessError, TestConfig};
use crate::llm::SamplingParams;
use crate::prompt::{PromptConfig, PromptTemplates, SpecMode};
use crate::transform::transform_main;
use crate::verify::{verify_candidate, Verdict, VerifyConfig, VerifyError};
use crate::workspace::Workspace;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ENV: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "verigen",
    version,
    about = "Generate formally verified C functions from paired specifications"
)]
struct Cli {
    /// Config file (default: ./verigen.toml, then $HOME/verigen.toml)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the full pipeline on one problem bundle
    Generate(GenerateArgs),
    /// Run sessions for every bundle in a directory and tabulate results
    Bench(BenchArgs),
    /// Verify a C file against a bundle's formal spec
    Verify(FileArgs),
    /// Run a bundle's unit tests against a C file
    Test(FileArgs),
    /// Print size metrics of a bundle
    Stats(StatsArgs),
    /// Rewrite a stdin/stdout main into a void function plus signature
    Transform(TransformArgs),
}

#[derive(Debug, Clone, Args, Default)]
struct PipelineOpts {
    /// Specification mode: both|nl|formal (bench also accepts `sweep`)
    #[arg(long)]
    spec_mode: Option<String>,
    /// Candidates per model invocation
    #[arg(long)]
    candidates: Option<usize>,
    /// Maximum improvement iterations
    #[arg(long)]
    iterations: Option<usize>,
    /// Sampling temperature in [0,1]
    #[arg(long)]
    temperature: Option<f64>,
    /// Model name passed to the provider
    #[arg(long)]
    model: Option<String>,
    /// Candidate source: mock|http
    #[arg(long)]
    provider: Option<String>,
    /// Directory of scripted replies for the mock provider
    #[arg(long)]
    mock_dir: Option<PathBuf>,
    /// Selection seed for reproducible runs
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated prover list for WP
    #[arg(long)]
    solvers: Option<String>,
    /// Per-goal prover timeout in seconds
    #[arg(long)]
    wp_timeout: Option<u64>,
    /// Wall-clock cap per verification run in seconds
    #[arg(long)]
    candidate_timeout: Option<u64>,
    /// C compiler binary
    #[arg(long)]
    cc: Option<String>,
    /// Frama-C binary
    #[arg(long)]
    frama_c: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Drop the one-shot example from prompts
    #[arg(long)]
    zero_shot: bool,
    /// Directory of prompt template overrides
    #[arg(long)]
    prompts_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Problem bundle directory
    #[arg(long)]
    problem: PathBuf,
    #[command(flatten)]
    opts: PipelineOpts,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Directory containing one bundle subdirectory per problem
    #[arg(long)]
    problems_dir: PathBuf,
    /// Parallel sessions (default: min(problems, cpu/2))
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    opts: PipelineOpts,
}

#[derive(Debug, Args)]
struct FileArgs {
    /// Problem bundle directory
    #[arg(long)]
    problem: PathBuf,
    /// C source file to check
    #[arg(long)]
    file: PathBuf,
    #[command(flatten)]
    opts: PipelineOpts,
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// Problem bundle directory
    #[arg(long)]
    problem: PathBuf,
}

#[derive(Debug, Args)]
struct TransformArgs {
    /// C source file containing a single stdin/stdout `main`
    input: PathBuf,
    /// Name for the generated function
    #[arg(long)]
    name: String,
    /// Output directory for `function.c` and `signature.h`
    #[arg(short, long)]
    out: PathBuf,
}

/// Optional keys of `verigen.toml`. Flags override these; these override
/// built-in defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    spec_mode: Option<String>,
    candidates: Option<usize>,
    iterations: Option<usize>,
    temperature: Option<f64>,
    model: Option<String>,
    provider: Option<String>,
    mock_dir: Option<PathBuf>,
    seed: Option<u64>,
    solvers: Option<Vec<String>>,
    wp_timeout: Option<u64>,
    candidate_timeout: Option<u64>,
    cc: Option<String>,
    frama_c: Option<String>,
    out: Option<PathBuf>,
    zero_shot: Option<bool>,
    prompts_dir: Option<PathBuf>,
}

fn load_file_config(explicit: Option<&Path>) -> Result<FileConfig, String> {
    let path = match explicit {
        Some(p) => {
            if !p.is_file() {
                return Err(format!("config file `{}` not found", p.display()));
            }
            Some(p.to_path_buf())
        }
        None => [
            Some(PathBuf::from("verigen.toml")),
            std::env::var_os("HOME").map(|h| PathBuf::from(h).join("verigen.toml")),
        ]
        .into_iter()
        .flatten()
        .find(|p| p.is_file()),
    };
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(&p)
                .map_err(|e| format!("reading `{}`: {e}", p.display()))?;
            toml::from_str(&text).map_err(|e| format!("parsing `{}`: {e}", p.display()))
        }
        None => Ok(FileConfig::default()),
    }
}

struct Effective {
    session: SessionConfig,
    /// Deferred so commands that never sample don't demand provider flags.
    provider: Result<ProviderConfig, String>,
    spec_mode_raw: String,
    out: PathBuf,
    templates: PromptTemplates,
}

fn effective_config(opts: &PipelineOpts, file: &FileConfig) -> Result<Effective, String> {
    let spec_mode_raw = opts
        .spec_mode
        .clone()
        .or_else(|| file.spec_mode.clone())
        .unwrap_or_else(|| "both".to_string());

    let mut prompt = PromptConfig::default();
    if spec_mode_raw != "sweep" {
        prompt.spec_mode = spec_mode_raw.parse::<SpecMode>()?;
    }
    if opts.zero_shot || file.zero_shot == Some(true) {
        prompt.one_shot = false;
    }

    let provider_name = opts
        .provider
        .clone()
        .or_else(|| file.provider.clone())
        .unwrap_or_else(|| "mock".to_string());
    let provider = match provider_name.as_str() {
        "mock" => opts
            .mock_dir
            .clone()
            .or_else(|| file.mock_dir.clone())
            .map(|dir| ProviderConfig::Mock { dir })
            .ok_or_else(|| "--mock-dir is required with --provider mock".to_string()),
        "http" => Ok(ProviderConfig::Http {
            base_url: std::env::var(crate::llm::API_BASE_ENV).ok(),
        }),
        other => Err(format!("unknown provider `{other}` (mock|http)")),
    };

    let defaults = SamplingParams::default();
    let sampling = SamplingParams {
        n: opts.candidates.or(file.candidates).unwrap_or(defaults.n),
        temperature: opts
            .temperature
            .or(file.temperature)
            .unwrap_or(defaults.temperature),
        model: opts
            .model
            .clone()
            .or_else(|| file.model.clone())
            .unwrap_or(defaults.model),
        max_tokens: defaults.max_tokens,
    };
    sampling.validate().map_err(|e| e.to_string())?;

    let mut verify = VerifyConfig::default();
    if let Some(list) = opts
        .solvers
        .clone()
        .map(|s| s.split(',').map(|x| x.trim().to_string()).collect::<Vec<_>>())
        .or_else(|| file.solvers.clone())
    {
        verify.solvers = list;
    }
    if let Some(t) = opts.wp_timeout.or(file.wp_timeout) {
        verify.wp_timeout_secs = t;
    }
    if let Some(t) = opts.candidate_timeout.or(file.candidate_timeout) {
        verify.candidate_timeout_secs = t;
    }
    if let Some(f) = opts.frama_c.clone().or_else(|| file.frama_c.clone()) {
        verify.frama_c = f;
    }

    let mut compile = crate::compile::CompileConfig::default();
    let mut tests = TestConfig::default();
    if let Some(cc) = opts.cc.clone().or_else(|| file.cc.clone()) {
        compile.cc = cc.clone();
        tests.cc = cc;
    }

    let templates = match opts.prompts_dir.clone().or_else(|| file.prompts_dir.clone()) {
        Some(dir) => PromptTemplates::load_dir(&dir)
            .map_err(|e| format!("loading prompt templates from `{}`: {e}", dir.display()))?,
        None => PromptTemplates::default(),
    };

    let session = SessionConfig {
        sampling,
        prompt,
        max_iterations: opts.iterations.or(file.iterations).unwrap_or(10),
        compile,
        verify,
        tests,
        rng_seed: opts.seed.or(file.seed).unwrap_or(0),
        provider: provider.clone().unwrap_or(ProviderConfig::Http { base_url: None }),
        diagnostics_cap: crate::verify::DEFAULT_DIAGNOSTICS_CAP,
    };
    let out = opts
        .out
        .clone()
        .or_else(|| file.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(Effective {
        session,
        provider,
        spec_mode_raw,
        out,
        templates,
    })
}

/// Parse arguments and run; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let file_cfg = match load_file_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_ENV;
        }
    };
    match &cli.command {
        Command::Generate(args) => cmd_generate(args, &file_cfg),
        Command::Bench(args) => cmd_bench(args, &file_cfg),
        Command::Verify(args) => cmd_verify(args, &file_cfg),
        Command::Test(args) => cmd_test(args, &file_cfg),
        Command::Stats(args) => cmd_stats(args),
        Command::Transform(args) => cmd_transform(args),
    }
}

fn usage_error(msg: &str) -> i32 {
    eprintln!("usage error: {msg}");
    EXIT_USAGE
}

fn env_error(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    EXIT_ENV
}

fn cmd_generate(args: &GenerateArgs, file_cfg: &FileConfig) -> i32 {
    let eff = match effective_config(&args.opts, file_cfg) {
        Ok(e) => e,
        Err(msg) => return usage_error(&msg),
    };
    if eff.spec_mode_raw == "sweep" {
        return usage_error("--spec-mode sweep is only valid for `bench`");
    }
    if let Err(msg) = &eff.provider {
        return usage_error(msg);
    }
    let bundle = match load_bundle(&args.problem) {
        Ok(b) => b,
        Err(e) => return env_error(format!("loading bundle: {e}")),
    };
    let provider = match build_provider(&eff.session.provider) {
        Ok(p) => p,
        Err(e) => return env_error(e),
    };
    let out_dir = if args.opts.out.is_some() || file_cfg.out.is_some() {
        eff.out.clone()
    } else {
        eff.out.join(&bundle.id)
    };
    match run_session(&bundle, &eff.session, provider.as_ref(), &eff.templates) {
        Ok((outcome, log)) => {
            let summary = match write_outputs(&outcome, &log, &out_dir) {
                Ok(s) => s,
                Err(e) => return env_error(format!("writing outputs: {e}")),
            };
            match summary.status {
                SessionStatus::Solved => {
                    println!(
                        "solved `{}` after {} improvement iteration(s): {}",
                        bundle.id,
                        summary.iterations_used,
                        out_dir.join("solution.c").display()
                    );
                    EXIT_OK
                }
                SessionStatus::Unsolved => {
                    match &summary.failure_reason {
                        Some(reason) => println!("unsolved `{}`: {reason}", bundle.id),
                        None => println!(
                            "unsolved `{}` after {} iteration(s); last candidate: {}",
                            bundle.id,
                            summary.iterations_used,
                            out_dir.join("last_candidate.c").display()
                        ),
                    }
                    EXIT_FAIL
                }
            }
        }
        Err(EngineError::InvalidBundle(violations)) => {
            env_error(format!("invalid bundle: {}", violations.join("; ")))
        }
        Err(e) => env_error(e),
    }
}

fn cmd_bench(args: &BenchArgs, file_cfg: &FileConfig) -> i32 {
    let eff = match effective_config(&args.opts, file_cfg) {
        Ok(e) => e,
        Err(msg) => return usage_error(&msg),
    };
    if let Err(msg) = &eff.provider {
        return usage_error(msg);
    }
    let problems = match discover_problems(&args.problems_dir) {
        Ok(p) => p,
        Err(e) => return env_error(format!("scanning `{}`: {e}", args.problems_dir.display())),
    };
    if problems.is_empty() {
        return env_error(format!(
            "no problems found in `{}`",
            args.problems_dir.display()
        ));
    }
    let default_jobs = std::thread::available_parallelism()
        .map(|c| (c.get() / 2).max(1))
        .unwrap_or(1)
        .min(problems.len());
    let jobs = args.jobs.unwrap_or(default_jobs);

    if let Err(e) = std::fs::create_dir_all(&eff.out) {
        return env_error(format!("creating `{}`: {e}", eff.out.display()));
    }
    let (rows, sweep) = if eff.spec_mode_raw == "sweep" {
        let (rows, sweep) = run_sweep(&problems, &eff.session, &eff.templates, Some(&eff.out), jobs);
        (rows, Some(sweep))
    } else {
        (
            run_bench(&problems, &eff.session, &eff.templates, Some(&eff.out), jobs),
            None,
        )
    };

    print!("{}", render_table(&rows));
    let csv_path = eff.out.join("bench.csv");
    if let Err(e) = std::fs::write(&csv_path, rows_to_csv(&rows)) {
        return env_error(format!("writing `{}`: {e}", csv_path.display()));
    }
    println!("wrote {}", csv_path.display());
    if let Some(sweep) = sweep {
        println!();
        print!("{}", render_sweep_table(&sweep));
        let sweep_csv = eff.out.join("sweep.csv");
        let mut csv = String::from("spec_mode,solved_initial,solved_after_improvement,total_time_s\n");
        for row in &sweep {
            csv.push_str(&format!(
                "{},{},{},{:.3}\n",
                row.spec_mode,
                row.solved_initial,
                row.solved_after_improvement,
                row.total_time_ms as f64 / 1000.0
            ));
        }
        if let Err(e) = std::fs::write(&sweep_csv, csv) {
            return env_error(format!("writing `{}`: {e}", sweep_csv.display()));
        }
        println!("wrote {}", sweep_csv.display());
    }
    EXIT_OK
}

fn cmd_verify(args: &FileArgs, file_cfg: &FileConfig) -> i32 {
    let eff = match effective_config(&args.opts, file_cfg) {
        Ok(e) => e,
        Err(msg) => return usage_error(&msg),
    };
    let bundle = match load_bundle(&args.problem) {
        Ok(b) => b,
        Err(e) => return env_error(format!("loading bundle: {e}")),
    };
    let src = match std::fs::read_to_string(&args.file) {
        Ok(s) => s,
        Err(e) => return env_error(format!("reading `{}`: {e}", args.file.display())),
    };
    let ws = match Workspace::new() {
        Ok(w) => w,
        Err(e) => return env_error(e),
    };
    match verify_candidate(&src, &bundle, &ws, &eff.session.verify) {
        Ok(report) => {
            println!(
                "verdict: {:?} ({} / {} goals proved, {} ms)",
                report.verdict, report.goals_proved, report.goals_total, report.duration_ms
            );
            for goal in &report.unproved_goals {
                println!("  unproved {}: {}", goal.name, goal.status);
            }
            if report.verdict == Verdict::Verified {
                EXIT_OK
            } else {
                if report.verdict == Verdict::VerifierError {
                    eprintln!("verifier output:\n{}", report.raw_output);
                }
                EXIT_FAIL
            }
        }
        Err(e @ VerifyError::VerifierMissing(_)) => env_error(e),
        Err(e) => env_error(e),
    }
}

fn cmd_test(args: &FileArgs, file_cfg: &FileConfig) -> i32 {
    let eff = match effective_config(&args.opts, file_cfg) {
        Ok(e) => e,
        Err(msg) => return usage_error(&msg),
    };
    let bundle = match load_bundle(&args.problem) {
        Ok(b) => b,
        Err(e) => return env_error(format!("loading bundle: {e}")),
    };
    let src = match std::fs::read_to_string(&args.file) {
        Ok(s) => s,
        Err(e) => return env_error(format!("reading `{}`: {e}", args.file.display())),
    };
    let ws = match Workspace::new() {
        Ok(w) => w,
        Err(e) => return env_error(e),
    };
    match run_tests(&src, &bundle, &ws, &eff.session.tests) {
        Ok(report) => {
            for result in &report.results {
                let actual = result
                    .actual
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(" ");
                println!(
                    "test {:>3}: {}  [{}]",
                    result.case_index + 1,
                    if result.passed { "pass" } else { "FAIL" },
                    actual
                );
            }
            println!("pass rate: {:.3} ({} tests)", report.pass_rate, report.ran);
            if report.ran > 0 && report.pass_rate == 1.0 {
                EXIT_OK
            } else {
                EXIT_FAIL
            }
        }
        Err(e @ HarnessError::CompilerMissing(_)) => env_error(e),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAIL
        }
    }
}

fn cmd_stats(args: &StatsArgs) -> i32 {
    let bundle = match load_bundle(&args.problem) {
        Ok(b) => b,
        Err(e) => return env_error(format!("loading bundle: {e}")),
    };
    let stats = bundle_stats(&bundle, &WhitespaceTokenizer);
    println!("problem = {}", bundle.id);
    println!("nl_tokens = {} ({})", stats.nl_tokens, stats.tokenizer_name);
    println!("formal_loc = {}", stats.formal_loc);
    println!("formal_clauses = {}", stats.formal_clauses);
    match stats.truth_loc {
        Some(loc) => println!("truth_loc = {loc}"),
        None => println!("truth_loc = -"),
    }
    println!("n_tests = {}", stats.n_tests);
    let report = validate_bundle(&bundle, false);
    if !report.is_ok() {
        for violation in &report.violations {
            println!("violation: {violation}");
        }
    }
    EXIT_OK
}

fn cmd_transform(args: &TransformArgs) -> i32 {
    let src = match std::fs::read_to_string(&args.input) {
        Ok(s) => s,
        Err(e) => return env_error(format!("reading `{}`: {e}", args.input.display())),
    };
    match transform_main(&src, &args.name) {
        Ok(result) => {
            if let Err(e) = std::fs::create_dir_all(&args.out) {
                return env_error(format!("creating `{}`: {e}", args.out.display()));
            }
            let function = args.out.join("function.c");
            let header = args.out.join("signature.h");
            if let Err(e) = std::fs::write(&function, &result.function_source) {
                return env_error(format!("writing `{}`: {e}", function.display()));
            }
            if let Err(e) = std::fs::write(&header, format!("{};\n", result.signature.c_decl())) {
                return env_error(format!("writing `{}`: {e}", header.display()));
            }
            for entry in &result.mapping {
                println!(
                    "{:?} {} <- {}",
                    entry.direction, entry.param_name, entry.io_call
                );
            }
            println!("wrote {} and {}", function.display(), header.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAIL
        }
    }
}
