//! Session orchestration: initial generation, gate checks, improvement
//! rounds, outputs.
//!
//! A session samples one batch of candidates with the initialization prompt,
//! runs each through compile → verify → tests in sample order and stops at
//! the first verified candidate. While none verifies, up to `max_iterations`
//! improvement rounds repair the best-ranked candidate with gate feedback.
//! Everything that happened is recorded in an ordered, replayable session
//! log; with the mock provider and a fixed seed two runs produce identical
//! logs modulo timestamps and durations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::bundle::{count_loc, validate_bundle, ProblemBundle};
use crate::compile::{compile_candidate, compiler_version, CompileConfig, CompileError};
use crate::harness::{run_tests, HarnessError, TestConfig, TestReport};
use crate::llm::{
    sample_candidates, extract_code, HttpProvider, LlmError, MockProvider, Provider, RetryPolicy,
    SamplingParams,
};
use crate::pool::{Candidate, Pool};
use crate::prompt::{
    build_improvement_prompt, build_initialization_prompt, Prompt, PromptConfig, PromptTemplates,
};
use crate::verify::{
    render_feedback, verifier_version, verify_candidate, FailedGate, VerifyConfig, VerifyError,
    DEFAULT_DIAGNOSTICS_CAP,
};
use crate::workspace::Workspace;

/// Where candidates come from. The serializable description lives in the
/// config (and the session log header); [`build_provider`] turns it into a
/// live client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderConfig {
    Mock { dir: PathBuf },
    Http { base_url: Option<String> },
}

pub fn build_provider(cfg: &ProviderConfig) -> Result<Box<dyn Provider>, EngineError> {
    match cfg {
        ProviderConfig::Mock { dir } => Ok(Box::new(MockProvider::new(dir).map_err(|e| {
            EngineError::Environment(format!("mock script dir `{}`: {e}", dir.display()))
        })?)),
        ProviderConfig::Http { base_url } => {
            let provider = match base_url {
                Some(base) => {
                    let key = std::env::var(crate::llm::API_KEY_ENV).unwrap_or_default();
                    HttpProvider::new(base.clone(), key)
                }
                None => HttpProvider::from_env(),
            }
            .map_err(|e| EngineError::Environment(e.to_string()))?;
            Ok(Box::new(provider))
        }
    }
}

/// Full configuration of one session. Written into the session log header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub sampling: SamplingParams,
    pub prompt: PromptConfig,
    /// Improvement rounds after the initial batch; 0 disables the loop.
    pub max_iterations: usize,
    pub compile: CompileConfig,
    pub verify: VerifyConfig,
    pub tests: TestConfig,
    pub rng_seed: u64,
    pub provider: ProviderConfig,
    /// Byte cap on diagnostics entering improvement prompts.
    pub diagnostics_cap: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            sampling: SamplingParams::default(),
            prompt: PromptConfig::default(),
            max_iterations: 10,
            compile: CompileConfig::default(),
            verify: VerifyConfig::default(),
            tests: TestConfig::default(),
            rng_seed: 0,
            provider: ProviderConfig::Mock {
                dir: PathBuf::from("mock"),
            },
            diagnostics_cap: DEFAULT_DIAGNOSTICS_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Solved,
    Unsolved,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionTotals {
    pub candidates_generated: usize,
    pub wall_time_ms: u64,
    pub verify_time_ms: u64,
}

/// Result of one session. `solution` is the verified candidate when solved,
/// or the last selected candidate when not.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub status: SessionStatus,
    pub solution: Option<Candidate>,
    pub iterations_used: usize,
    pub totals: SessionTotals,
    pub failure_reason: Option<String>,
}

/// Ordered record of every prompt, response, gate result and decision.
#[derive(Debug, Clone, Default)]
pub struct SessionLog {
    events: Vec<Value>,
}

impl SessionLog {
    pub fn new() -> SessionLog {
        SessionLog::default()
    }

    fn push(&mut self, event: &str, mut data: Value) {
        let ts_ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        if let Value::Object(map) = &mut data {
            map.insert("seq".to_string(), json!(self.events.len()));
            map.insert("ts_ms".to_string(), json!(ts_ms));
            map.insert("event".to_string(), json!(event));
        }
        self.events.push(data);
    }

    pub fn events(&self) -> &[Value] {
        &self.events
    }

    /// One event object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for event in &self.events {
            out.push_str(&event.to_string());
            out.push('\n');
        }
        out
    }
}

/// Remove every `*_ms` field recursively. Two logs of the same seeded mock
/// session are byte-identical after this.
pub fn strip_timing_fields(value: &mut Value) {
    match value {
        Value::Object(map) => {
            map.retain(|k, _| !k.ends_with("_ms"));
            for v in map.values_mut() {
                strip_timing_fields(v);
            }
        }
        Value::Array(items) => {
            for v in items {
                strip_timing_fields(v);
            }
        }
        _ => {}
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("environment error: {0}")]
    Environment(String),
    #[error("invalid bundle: {}", .0.join("; "))]
    InvalidBundle(Vec<String>),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

enum BatchEnd {
    Solved(Candidate),
    Exhausted,
    ProviderFailed(String),
}

struct SessionRunner<'a> {
    bundle: &'a ProblemBundle,
    cfg: &'a SessionConfig,
    provider: &'a dyn Provider,
    retry: RetryPolicy,
    pool: Pool,
    log: SessionLog,
    verify_time_ms: u64,
    candidates_generated: usize,
}

impl<'a> SessionRunner<'a> {
    fn check_candidate(
        &mut self,
        iteration: usize,
        sample_index: usize,
        source: String,
    ) -> Result<Candidate, EngineError> {
        let ws = Workspace::new().map_err(|e| EngineError::Environment(e.to_string()))?;
        let id = format!("it{iteration}-s{sample_index}");

        let compile = compile_candidate(&source, self.bundle, &ws, &self.cfg.compile)
            .map_err(|e| match e {
                CompileError::CompilerMissing(name) => {
                    EngineError::Environment(format!("C compiler `{name}` not found"))
                }
                other => EngineError::Environment(other.to_string()),
            })?;
        self.log.push(
            "compile_result",
            json!({ "candidate_id": id, "report": compile }),
        );

        let verify = if compile.ok {
            let report = verify_candidate(&source, self.bundle, &ws, &self.cfg.verify).map_err(
                |e| match e {
                    VerifyError::VerifierMissing(name) => {
                        EngineError::Environment(format!("verifier `{name}` not found"))
                    }
                    other => EngineError::Environment(other.to_string()),
                },
            )?;
            self.verify_time_ms += report.duration_ms;
            self.log.push(
                "verify_result",
                json!({ "candidate_id": id, "report": report }),
            );
            Some(report)
        } else {
            None
        };

        let tests = if compile.ok {
            match run_tests(&source, self.bundle, &ws, &self.cfg.tests) {
                Ok(report) => report,
                Err(HarnessError::CompilerMissing(name)) => {
                    return Err(EngineError::Environment(format!(
                        "C compiler `{name}` not found"
                    )))
                }
                // a candidate the harness cannot drive ranks at zero
                Err(_) => TestReport::zero(),
            }
        } else {
            TestReport::zero()
        };
        self.log.push(
            "test_result",
            json!({ "candidate_id": id, "report": tests }),
        );

        Ok(Candidate {
            id,
            iteration,
            sample_index,
            source,
            compile: Some(compile),
            verify,
            tests: Some(tests),
        })
    }

    /// Sample one batch and gate its candidates in sample order, stopping at
    /// the first verified one.
    fn run_batch(&mut self, iteration: usize, prompt: &Prompt) -> Result<BatchEnd, EngineError> {
        let kind = if iteration == 0 {
            "initialization"
        } else {
            "improvement"
        };
        self.log.push(
            "prompt_built",
            json!({
                "iteration": iteration,
                "kind": kind,
                "prompt": prompt,
                "rendered": prompt.render_text(),
            }),
        );

        let responses =
            match sample_candidates(prompt, &self.cfg.sampling, self.provider, &self.retry) {
                Ok(r) => r,
                Err(e @ (LlmError::InvalidParams(_) | LlmError::AuthFailure(_))) => {
                    // configuration-level failures abort instead of burning
                    // the remaining iterations
                    return Err(EngineError::Environment(e.to_string()));
                }
                Err(e) => return Ok(BatchEnd::ProviderFailed(e.to_string())),
            };
        self.log.push(
            "responses_received",
            json!({
                "iteration": iteration,
                "count": responses.len(),
                "responses": responses,
            }),
        );

        for (sample_index, response) in responses.iter().enumerate() {
            let source = extract_code(response).unwrap_or_default();
            let candidate = self.check_candidate(iteration, sample_index, source)?;
            let verified = candidate.is_verified();
            self.pool
                .push(candidate.clone())
                .map_err(|e| EngineError::Environment(e.to_string()))?;
            self.candidates_generated += 1;
            if verified {
                return Ok(BatchEnd::Solved(candidate));
            }
        }
        Ok(BatchEnd::Exhausted)
    }

    /// Select the repair target and log the draw.
    fn select(&mut self, after_iteration: usize, purpose: &str) -> Option<Candidate> {
        let max = self.pool.max_pass_rate()?;
        let tied = self
            .pool
            .candidates()
            .iter()
            .filter(|c| c.pass_rate() == max)
            .count();
        let selected = self.pool.select_best().ok()?.clone();
        self.log.push(
            "selection",
            json!({
                "after_iteration": after_iteration,
                "purpose": purpose,
                "candidate_id": selected.id,
                "pass_rate": selected.pass_rate(),
                "tied": tied,
            }),
        );
        Some(selected)
    }
}

/// Run one full session over `bundle`.
pub fn run_session(
    bundle: &ProblemBundle,
    cfg: &SessionConfig,
    provider: &dyn Provider,
    templates: &PromptTemplates,
) -> Result<(SessionOutcome, SessionLog), EngineError> {
    let start = Instant::now();

    let validation = validate_bundle(bundle, cfg.max_iterations > 0);
    if !validation.is_ok() {
        return Err(EngineError::InvalidBundle(validation.violations));
    }
    cfg.sampling
        .validate()
        .map_err(|e| EngineError::Environment(e.to_string()))?;

    // both tools must be present before any sampling happens
    let cc_version = compiler_version(&cfg.compile.cc).ok_or_else(|| {
        EngineError::Environment(format!("C compiler `{}` not usable", cfg.compile.cc))
    })?;
    let frama_c_version = verifier_version(&cfg.verify.frama_c).ok_or_else(|| {
        EngineError::Environment(format!("verifier `{}` not usable", cfg.verify.frama_c))
    })?;

    let mut runner = SessionRunner {
        bundle,
        cfg,
        provider,
        retry: RetryPolicy::default(),
        pool: Pool::new(cfg.rng_seed),
        log: SessionLog::new(),
        verify_time_ms: 0,
        candidates_generated: 0,
    };
    runner.log.push(
        "config",
        json!({
            "bundle_id": bundle.id,
            "provider": provider.name(),
            "config": cfg,
            "cc_version": cc_version,
            "frama_c_version": frama_c_version,
        }),
    );

    let mut solved: Option<Candidate> = None;
    let mut iterations_used = 0;
    let mut failure_reason: Option<String> = None;

    let init_prompt = build_initialization_prompt(bundle, &cfg.prompt, templates);
    match runner.run_batch(0, &init_prompt)? {
        BatchEnd::Solved(c) => solved = Some(c),
        BatchEnd::ProviderFailed(reason) => failure_reason = Some(reason),
        BatchEnd::Exhausted => {
            for k in 1..=cfg.max_iterations {
                let selected = runner
                    .select(k - 1, "improvement")
                    .expect("pool holds the previous batches");
                let gate = match (&selected.compile, &selected.verify) {
                    (Some(c), _) if !c.ok => FailedGate::Compile(c),
                    (_, Some(v)) => FailedGate::Verify(v),
                    _ => unreachable!("gated candidates carry a compile report"),
                };
                let feedback = render_feedback(
                    gate,
                    cfg.prompt.spec_mode,
                    &selected.source,
                    cfg.diagnostics_cap,
                )
                .expect("selected candidate failed a gate");
                let prompt = build_improvement_prompt(bundle, &cfg.prompt, templates, feedback);
                iterations_used = k;
                match runner.run_batch(k, &prompt)? {
                    BatchEnd::Solved(c) => {
                        solved = Some(c);
                        break;
                    }
                    BatchEnd::ProviderFailed(reason) => {
                        failure_reason = Some(reason);
                        break;
                    }
                    BatchEnd::Exhausted => {}
                }
            }
        }
    }

    let (status, solution) = match solved {
        Some(candidate) => (SessionStatus::Solved, Some(candidate)),
        None => {
            // emit the best candidate seen, drawn with the same policy
            let last = runner.select(iterations_used, "final");
            (SessionStatus::Unsolved, last)
        }
    };

    let totals = SessionTotals {
        candidates_generated: runner.candidates_generated,
        wall_time_ms: start.elapsed().as_millis() as u64,
        verify_time_ms: runner.verify_time_ms,
    };
    let outcome = SessionOutcome {
        status,
        solution,
        iterations_used,
        totals,
        failure_reason,
    };
    runner.log.push(
        "outcome",
        json!({
            "status": outcome.status,
            "iterations_used": outcome.iterations_used,
            "solution_id": outcome.solution.as_ref().map(|c| c.id.clone()),
            "totals": outcome.totals,
            "failure_reason": outcome.failure_reason,
        }),
    );

    Ok((outcome, runner.log))
}

/// The effectiveness metrics of one session, also written as
/// `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub status: SessionStatus,
    pub iterations_used: usize,
    pub candidates_generated: usize,
    /// Non-blank, non-comment lines of the emitted solution.
    pub solution_loc: Option<usize>,
    /// Time to verify the emitted solution.
    pub verify_time_ms: Option<u64>,
    /// Wall time of the whole session: sampling, gates and tests.
    pub total_time_ms: u64,
    pub failure_reason: Option<String>,
}

/// Write `solution.c` (or `last_candidate.c`), `session.jsonl` and
/// `summary.json` into `dir`.
pub fn write_outputs(
    outcome: &SessionOutcome,
    log: &SessionLog,
    dir: &Path,
) -> std::io::Result<Summary> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("session.jsonl"), log.to_jsonl())?;

    if let Some(solution) = &outcome.solution {
        let name = match outcome.status {
            SessionStatus::Solved => "solution.c",
            SessionStatus::Unsolved => "last_candidate.c",
        };
        let mut source = solution.source.clone();
        if !source.ends_with('\n') {
            source.push('\n');
        }
        std::fs::write(dir.join(name), source)?;
    }

    let summary = Summary {
        status: outcome.status,
        iterations_used: outcome.iterations_used,
        candidates_generated: outcome.totals.candidates_generated,
        solution_loc: outcome.solution.as_ref().map(|c| count_loc(&c.source)),
        verify_time_ms: outcome
            .solution
            .as_ref()
            .and_then(|c| c.verify.as_ref())
            .map(|v| v.duration_ms),
        total_time_ms: outcome.totals.wall_time_ms,
        failure_reason: outcome.failure_reason.clone(),
    };
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::TestCase;
    use crate::scalar::ScalarValue;

    pub(crate) fn stub_verifier() -> String {
        format!("{}/fixtures/bin/fake-frama-c", env!("CARGO_MANIFEST_DIR"))
    }

    fn bundle() -> ProblemBundle {
        ProblemBundle {
            id: "add_positive".into(),
            nl_spec: "Sum `x` and `y` into `result`.".into(),
            formal_spec: "/*@\n    requires \\valid(result);\n    assigns *result;\n    ensures *result == x + y;\n*/".into(),
            signature: "void add_positive(int x, int y, int* result);".into(),
            tests: vec![
                TestCase {
                    inputs: vec![ScalarValue::Int(2), ScalarValue::Int(3)],
                    expected: vec![ScalarValue::Int(5)],
                },
                TestCase {
                    inputs: vec![ScalarValue::Int(1), ScalarValue::Int(1)],
                    expected: vec![ScalarValue::Int(2)],
                },
            ],
            ground_truth: None,
        }
    }

    const CORRECT: &str = "```c\nvoid add_positive(int x, int y, int* result)\n{\n    *result = x + y; /* fixture: verifies */\n}\n```\n";
    const WRONG_SUB: &str = "```c\nvoid add_positive(int x, int y, int* result)\n{\n    *result = x - y;\n}\n```\n";
    const WRONG_ZERO: &str = "```c\nvoid add_positive(int x, int y, int* result)\n{\n    *result = 0;\n}\n```\n";
    const BROKEN: &str = "```c\nint x = ;\n```\n";

    fn write_script(dir: &Path, replies: &[&str]) {
        for (i, text) in replies.iter().enumerate() {
            std::fs::write(dir.join(format!("{i:03}.txt")), text).unwrap();
        }
    }

    fn config(mock_dir: &Path, n: usize, iterations: usize) -> SessionConfig {
        SessionConfig {
            sampling: SamplingParams {
                n,
                ..SamplingParams::default()
            },
            max_iterations: iterations,
            verify: VerifyConfig {
                frama_c: stub_verifier(),
                ..VerifyConfig::default()
            },
            rng_seed: 11,
            provider: ProviderConfig::Mock {
                dir: mock_dir.to_path_buf(),
            },
            ..SessionConfig::default()
        }
    }

    fn run(cfg: &SessionConfig) -> (SessionOutcome, SessionLog) {
        let provider = build_provider(&cfg.provider).unwrap();
        run_session(&bundle(), cfg, provider.as_ref(), &PromptTemplates::default()).unwrap()
    }

    #[test]
    fn solves_in_initial_batch() {
        let dir = tempfile::tempdir().unwrap();
        write_script(dir.path(), &[WRONG_SUB, CORRECT]);
        let cfg = config(dir.path(), 2, 10);
        let (outcome, _) = run(&cfg);
        assert_eq!(outcome.status, SessionStatus::Solved);
        assert_eq!(outcome.iterations_used, 0);
        assert_eq!(outcome.totals.candidates_generated, 2);
        let solution = outcome.solution.unwrap();
        assert!(solution.is_verified());
        assert_eq!(solution.id, "it0-s1");
    }

    #[test]
    fn batch_short_circuits_at_first_verified() {
        let dir = tempfile::tempdir().unwrap();
        // the third reply would exhaust the script if it were consumed
        write_script(dir.path(), &[CORRECT, WRONG_SUB]);
        let cfg = config(dir.path(), 2, 0);
        let (outcome, log) = run(&cfg);
        assert_eq!(outcome.status, SessionStatus::Solved);
        // both responses are sampled but only the first candidate is gated
        assert_eq!(outcome.totals.candidates_generated, 1);
        let compiles = log
            .events()
            .iter()
            .filter(|e| e["event"] == "compile_result")
            .count();
        assert_eq!(compiles, 1);
    }

    #[test]
    fn solves_after_one_improvement_round() {
        let dir = tempfile::tempdir().unwrap();
        write_script(dir.path(), &[WRONG_SUB, WRONG_ZERO, CORRECT, WRONG_SUB]);
        let cfg = config(dir.path(), 2, 10);
        let (outcome, log) = run(&cfg);
        assert_eq!(outcome.status, SessionStatus::Solved);
        assert_eq!(outcome.iterations_used, 1);
        assert_eq!(outcome.totals.candidates_generated, 3);
        // exactly one improvement prompt went out, carrying one candidate
        let improvements: Vec<_> = log
            .events()
            .iter()
            .filter(|e| e["event"] == "prompt_built" && e["kind"] == "improvement")
            .collect();
        assert_eq!(improvements.len(), 1);
        let rendered = improvements[0]["rendered"].as_str().unwrap();
        assert_eq!(
            rendered.matches("previously generated candidate").count(),
            1
        );
    }

    #[test]
    fn exhausts_iterations_and_emits_last_selection() {
        let dir = tempfile::tempdir().unwrap();
        write_script(
            dir.path(),
            &[WRONG_SUB, BROKEN, WRONG_ZERO, WRONG_SUB, BROKEN, WRONG_ZERO],
        );
        let cfg = config(dir.path(), 2, 2);
        let (outcome, log) = run(&cfg);
        assert_eq!(outcome.status, SessionStatus::Unsolved);
        assert_eq!(outcome.iterations_used, 2);
        assert_eq!(outcome.totals.candidates_generated, 6);
        assert!(outcome.solution.is_some());
        assert!(outcome.failure_reason.is_none());
        let selections = log
            .events()
            .iter()
            .filter(|e| e["event"] == "selection")
            .count();
        assert_eq!(selections, 3); // 2 improvement draws + 1 final draw
        let prompts = log
            .events()
            .iter()
            .filter(|e| e["event"] == "prompt_built")
            .count();
        assert_eq!(prompts, 3); // initialization + 2 improvement rounds
    }

    #[test]
    fn provider_failure_marks_unsolved_with_reason() {
        let dir = tempfile::tempdir().unwrap();
        write_script(dir.path(), &[WRONG_SUB]); // one reply, n = 2
        let cfg = config(dir.path(), 2, 10);
        let (outcome, _) = run(&cfg);
        assert_eq!(outcome.status, SessionStatus::Unsolved);
        assert!(outcome.failure_reason.unwrap().contains("exhausted"));
        assert!(outcome.solution.is_none());
        assert_eq!(outcome.totals.candidates_generated, 0);
    }

    #[test]
    fn missing_verifier_aborts_before_sampling() {
        let dir = tempfile::tempdir().unwrap();
        write_script(dir.path(), &[CORRECT, CORRECT]);
        let mut cfg = config(dir.path(), 2, 10);
        cfg.verify.frama_c = "definitely-not-frama-c".into();
        let provider = MockProvider::new(dir.path()).unwrap();
        let err = run_session(&bundle(), &cfg, &provider, &PromptTemplates::default()).unwrap_err();
        assert!(matches!(err, EngineError::Environment(_)));
        assert_eq!(provider.remaining(), 2, "no sampling may happen");
    }

    #[test]
    fn invalid_bundle_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_script(dir.path(), &[CORRECT]);
        let cfg = config(dir.path(), 1, 10);
        let mut b = bundle();
        b.tests.clear(); // loop enabled but no tests
        let provider = build_provider(&cfg.provider).unwrap();
        let err =
            run_session(&b, &cfg, provider.as_ref(), &PromptTemplates::default()).unwrap_err();
        assert!(matches!(err, EngineError::InvalidBundle(_)));
    }

    #[test]
    fn seeded_mock_sessions_replay_identically() {
        let dir = tempfile::tempdir().unwrap();
        write_script(
            dir.path(),
            &[WRONG_SUB, WRONG_ZERO, BROKEN, WRONG_SUB, WRONG_ZERO, BROKEN],
        );
        let cfg = config(dir.path(), 2, 2);
        let render = || {
            let (_, log) = run(&cfg);
            let mut lines = Vec::new();
            for event in log.events() {
                let mut event = event.clone();
                strip_timing_fields(&mut event);
                lines.push(event.to_string());
            }
            lines.join("\n")
        };
        assert_eq!(render(), render());
    }

    #[test]
    fn outputs_for_solved_session() {
        let script_dir = tempfile::tempdir().unwrap();
        write_script(script_dir.path(), &[CORRECT]);
        let cfg = config(script_dir.path(), 1, 0);
        let (outcome, log) = run(&cfg);
        let out_dir = tempfile::tempdir().unwrap();
        let summary = write_outputs(&outcome, &log, out_dir.path()).unwrap();
        assert_eq!(summary.status, SessionStatus::Solved);
        assert_eq!(summary.solution_loc, Some(4));
        assert!(out_dir.path().join("solution.c").is_file());
        assert!(!out_dir.path().join("last_candidate.c").exists());
        assert!(out_dir.path().join("session.jsonl").is_file());
        let solution = std::fs::read_to_string(out_dir.path().join("solution.c")).unwrap();
        assert!(solution.contains("*result = x + y;"));
        assert!(!solution.contains("```"));
    }

    #[test]
    fn outputs_for_unsolved_session() {
        let script_dir = tempfile::tempdir().unwrap();
        write_script(script_dir.path(), &[WRONG_SUB]);
        let cfg = config(script_dir.path(), 1, 0);
        let (outcome, log) = run(&cfg);
        let out_dir = tempfile::tempdir().unwrap();
        let summary = write_outputs(&outcome, &log, out_dir.path()).unwrap();
        assert_eq!(summary.status, SessionStatus::Unsolved);
        assert!(out_dir.path().join("last_candidate.c").is_file());
        assert!(!out_dir.path().join("solution.c").exists());
    }

    #[test]
    fn zero_iterations_config_runs_single_batch() {
        let dir = tempfile::tempdir().unwrap();
        write_script(dir.path(), &[WRONG_SUB, WRONG_ZERO]);
        let cfg = config(dir.path(), 2, 0);
        let (outcome, log) = run(&cfg);
        assert_eq!(outcome.status, SessionStatus::Unsolved);
        assert_eq!(outcome.iterations_used, 0);
        assert_eq!(outcome.totals.candidates_generated, 2);
        let prompts = log
            .events()
            .iter()
            .filter(|e| e["event"] == "prompt_built")
            .count();
        assert_eq!(prompts, 1);
    }
}
