//! Gate 2: deductive verification.
//!
//! The candidate is annotated with the bundle's formal spec and handed to
//! Frama-C with the WP and RTE plugins. The console report is parsed into
//! per-goal outcomes and an overall verdict. Parsing is fail-closed: a
//! verdict of `Verified` requires a successfully parsed `Proved goals: X / Y`
//! summary with `Y >= 1` and `X == Y`. Crashes, timeouts, empty output and
//! unknown formats can never count as success.

use std::sync::OnceLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::ProblemBundle;
use crate::compile::CompileReport;
use crate::prompt::{FailStage, FeedbackBlock, SpecMode};
use crate::workspace::{run_tool, ExecError, Semaphore, Workspace};

/// Verifier runs across all threads share one gate so parallel sessions do
/// not oversubscribe the solvers.
fn solver_gate() -> &'static Semaphore {
    static GATE: OnceLock<Semaphore> = OnceLock::new();
    GATE.get_or_init(|| {
        let permits = std::thread::available_parallelism()
            .map(|c| c.get())
            .unwrap_or(1);
        Semaphore::new(permits)
    })
}

/// Fixed improvement feedback used when only the natural-language spec is in
/// the prompt and verification fails.
pub const NL_ONLY_VERIFY_FEEDBACK: &str =
    "The code does not verify. Improve the code so that it meets the specification.";
/// Fixed improvement feedback used when only the natural-language spec is in
/// the prompt and compilation fails.
pub const NL_ONLY_COMPILE_FEEDBACK: &str =
    "The code does not compile. Improve the code so that it meets the specification.";

/// Byte cap applied to diagnostics before they enter a prompt.
pub const DEFAULT_DIAGNOSTICS_CAP: usize = 8 * 1024;

/// Verifier invocation settings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// Verifier binary, resolved on PATH.
    pub frama_c: String,
    pub solvers: Vec<String>,
    /// Per-goal prover timeout handed to WP.
    pub wp_timeout_secs: u64,
    /// Wall-clock cap for one whole verification run.
    pub candidate_timeout_secs: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            frama_c: "frama-c".to_string(),
            solvers: vec!["alt-ergo".to_string(), "z3".to_string(), "cvc4".to_string()],
            wp_timeout_secs: 10,
            candidate_timeout_secs: 120,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Verified,
    Unproved,
    VerifierError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalStatus {
    Valid,
    Unknown,
    Timeout,
    Failed,
}

impl GoalStatus {
    fn from_keyword(kw: &str) -> Option<GoalStatus> {
        match kw {
            "Valid" => Some(GoalStatus::Valid),
            "Unknown" => Some(GoalStatus::Unknown),
            "Timeout" => Some(GoalStatus::Timeout),
            "Failed" => Some(GoalStatus::Failed),
            _ => None,
        }
    }
}

impl std::fmt::Display for GoalStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GoalStatus::Valid => write!(f, "Valid"),
            GoalStatus::Unknown => write!(f, "Unknown"),
            GoalStatus::Timeout => write!(f, "Timeout"),
            GoalStatus::Failed => write!(f, "Failed"),
        }
    }
}

/// One proof obligation's outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalOutcome {
    pub name: String,
    pub status: GoalStatus,
    pub prover: Option<String>,
}

/// Structured outcome of one WP+RTE run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub verdict: Verdict,
    pub goals_total: usize,
    pub goals_proved: usize,
    pub unproved_goals: Vec<GoalOutcome>,
    pub raw_output: String,
    pub duration_ms: u64,
}

impl VerifyReport {
    /// Build a report from raw verifier output. `completed` is false when
    /// the run was killed by the wall-clock cap; such runs can never verify.
    pub fn from_output(raw_output: String, duration: Duration, completed: bool) -> VerifyReport {
        let parsed = parse_verifier_output(&raw_output);
        let verdict = if !completed || parsed.goals_total == 0 {
            Verdict::VerifierError
        } else if parsed.goals_proved == parsed.goals_total {
            Verdict::Verified
        } else {
            Verdict::Unproved
        };
        VerifyReport {
            verdict,
            goals_total: parsed.goals_total,
            goals_proved: parsed.goals_proved,
            unproved_goals: parsed.unproved_goals,
            raw_output,
            duration_ms: duration.as_millis() as u64,
        }
    }
}

/// Totals and per-goal outcomes extracted from a console report.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedGoals {
    pub goals_total: usize,
    pub goals_proved: usize,
    pub unproved_goals: Vec<GoalOutcome>,
}

fn summary_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"Proved goals:\s*(\d+)\s*/\s*(\d+)").unwrap())
}

fn bracket_goal_re() -> &'static Regex {
    // e.g. `[wp] [Timeout] typed_f_assert_rte_signed_overflow (Alt-Ergo) (10s)`
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?m)^\s*\[wp\]\s*\[(Valid|Unknown|Timeout|Failed)\]\s+(\S+)(.*)$").unwrap()
    })
}

fn colon_goal_re() -> &'static Regex {
    // e.g. `Goal typed_f_ensures : Unknown (Alt-Ergo) (51ms)`
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?m)^.*\bGoal\s+(\S+)\s*:\s*(Valid|Unknown|Timeout|Failed)\b(.*)$").unwrap()
    })
}

fn prover_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\(([A-Za-z][A-Za-z0-9_.\-]*)\)").unwrap())
}

fn extract_prover(tail: &str) -> Option<String> {
    for cap in prover_re().captures_iter(tail) {
        let word = &cap[1];
        if matches!(word, "Cached" | "Trivial" | "Unsuccess" | "Failure") {
            continue;
        }
        return Some(word.to_string());
    }
    None
}

/// Parse a Frama-C console report. Total function: arbitrary input yields a
/// result, and an unrecognized format yields zero totals, which the caller
/// maps to `VerifierError`.
pub fn parse_verifier_output(text: &str) -> ParsedGoals {
    let (goals_proved, goals_total) = match summary_re().captures(text) {
        Some(cap) => {
            let proved = cap[1].parse::<usize>().unwrap_or(0);
            let total = cap[2].parse::<usize>().unwrap_or(0);
            (proved.min(total), total)
        }
        None => (0, 0),
    };

    let mut unproved_goals = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for cap in bracket_goal_re().captures_iter(text) {
        let status = GoalStatus::from_keyword(&cap[1]).unwrap();
        if status == GoalStatus::Valid {
            continue;
        }
        let name = cap[2].to_string();
        if seen.insert(name.clone()) {
            unproved_goals.push(GoalOutcome {
                name,
                status,
                prover: extract_prover(&cap[3]),
            });
        }
    }
    for cap in colon_goal_re().captures_iter(text) {
        let status = GoalStatus::from_keyword(&cap[2]).unwrap();
        if status == GoalStatus::Valid {
            continue;
        }
        let name = cap[1].to_string();
        if seen.insert(name.clone()) {
            unproved_goals.push(GoalOutcome {
                name,
                status,
                prover: extract_prover(&cap[3]),
            });
        }
    }

    ParsedGoals {
        goals_total,
        goals_proved,
        unproved_goals,
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("verifier `{0}` not found on PATH")]
    VerifierMissing(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("workspace error: {0}")]
    Workspace(String),
}

/// Place the formal spec block immediately above the candidate's definition
/// of `fn_name`. When no definition can be located the spec is attached to a
/// fresh declaration instead, so the contract still binds to the function.
pub fn annotate_candidate(src: &str, bundle: &ProblemBundle) -> String {
    let spec = bundle.formal_spec.trim_end();
    let fn_name = bundle
        .parsed_signature()
        .map(|s| s.name)
        .unwrap_or_default();
    if !fn_name.is_empty() {
        if let Some(offset) = find_definition(src, &fn_name) {
            let line_start = src[..offset].rfind('\n').map(|p| p + 1).unwrap_or(0);
            let mut out = String::with_capacity(src.len() + spec.len() + 1);
            out.push_str(&src[..line_start]);
            out.push_str(spec);
            out.push('\n');
            out.push_str(&src[line_start..]);
            return out;
        }
    }
    let decl = bundle.signature.trim().trim_end_matches(';');
    format!("{spec}\n{decl};\n\n{src}")
}

/// Byte offset of the first *definition* of `fn_name` (name followed by a
/// parameter list followed by `{`), skipping prototypes and calls.
fn find_definition(src: &str, fn_name: &str) -> Option<usize> {
    let bytes = src.as_bytes();
    let mut start = 0;
    while let Some(pos) = src[start..].find(fn_name) {
        let abs = start + pos;
        start = abs + 1;
        let before_ok = abs == 0 || {
            let c = bytes[abs - 1] as char;
            !(c.is_ascii_alphanumeric() || c == '_')
        };
        let after = abs + fn_name.len();
        if !before_ok || after >= src.len() {
            continue;
        }
        let mut i = after;
        while i < bytes.len() && (bytes[i] as char).is_whitespace() {
            i += 1;
        }
        if i >= bytes.len() || bytes[i] != b'(' {
            continue;
        }
        // skip the balanced parameter list
        let mut depth = 0usize;
        while i < bytes.len() {
            match bytes[i] {
                b'(' => depth += 1,
                b')' => {
                    depth -= 1;
                    if depth == 0 {
                        i += 1;
                        break;
                    }
                }
                _ => {}
            }
            i += 1;
        }
        while i < bytes.len() && (bytes[i] as char).is_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'{' {
            return Some(abs);
        }
    }
    None
}

/// Run Frama-C WP+RTE on the candidate annotated with the bundle's formal
/// spec. The raw console output is always retained in the report.
pub fn verify_candidate(
    src: &str,
    bundle: &ProblemBundle,
    ws: &Workspace,
    cfg: &VerifyConfig,
) -> Result<VerifyReport, VerifyError> {
    ws.write_file("annotated.c", &annotate_candidate(src, bundle))?;

    let args = vec![
        "-wp".to_string(),
        "-wp-rte".to_string(),
        "-wp-prover".to_string(),
        cfg.solvers.join(","),
        "-wp-timeout".to_string(),
        cfg.wp_timeout_secs.to_string(),
        "annotated.c".to_string(),
    ];
    let _permit = solver_gate().acquire();
    let out = run_tool(
        &cfg.frama_c,
        &args,
        ws.path(),
        Duration::from_secs(cfg.candidate_timeout_secs),
    )
    .map_err(|e| match e {
        ExecError::ToolMissing(name) => VerifyError::VerifierMissing(name),
        other => VerifyError::Workspace(other.to_string()),
    })?;

    let mut raw = out.stdout;
    if !out.stderr.trim().is_empty() {
        raw.push_str(&out.stderr);
    }
    if out.timed_out {
        raw.push_str("\n[verifier killed: wall-clock cap reached]");
    }
    Ok(VerifyReport::from_output(raw, out.duration, !out.timed_out))
}

/// First line of `frama-c -version`, for the session log header.
pub fn verifier_version(frama_c: &str) -> Option<String> {
    let ws = Workspace::new().ok()?;
    let out = run_tool(
        frama_c,
        &["-version".to_string()],
        ws.path(),
        Duration::from_secs(10),
    )
    .ok()?;
    out.stdout.lines().next().map(|l| l.trim().to_string())
}

/// The gate whose failure is being fed back to the model.
#[derive(Debug, Clone, Copy)]
pub enum FailedGate<'a> {
    Compile(&'a CompileReport),
    Verify(&'a VerifyReport),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeedbackError {
    #[error("cannot render feedback for a successful report")]
    InvalidState,
}

fn truncate_bytes(text: &str, cap: usize) -> String {
    if text.len() <= cap {
        return text.to_string();
    }
    let mut end = cap;
    while end > 0 && !text.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}\n[... truncated]", &text[..end])
}

/// Turn a failing gate report into the feedback block of an improvement
/// prompt. In NL-only mode the diagnostics are a fixed non-technical
/// message; otherwise every unproved goal is named and a bounded excerpt of
/// the raw output is attached.
pub fn render_feedback(
    gate: FailedGate<'_>,
    mode: SpecMode,
    candidate_source: &str,
    diagnostics_cap: usize,
) -> Result<FeedbackBlock, FeedbackError> {
    match gate {
        FailedGate::Compile(report) => {
            if report.ok {
                return Err(FeedbackError::InvalidState);
            }
            let diagnostics = if mode == SpecMode::NlOnly {
                NL_ONLY_COMPILE_FEEDBACK.to_string()
            } else if report.diagnostics.trim().is_empty() {
                "compilation failed with no diagnostics".to_string()
            } else {
                truncate_bytes(&report.diagnostics, diagnostics_cap)
            };
            Ok(FeedbackBlock {
                candidate_source: candidate_source.to_string(),
                diagnostics,
                stage: FailStage::CompileFailed,
            })
        }
        FailedGate::Verify(report) => {
            if report.verdict == Verdict::Verified {
                return Err(FeedbackError::InvalidState);
            }
            let diagnostics = if mode == SpecMode::NlOnly {
                NL_ONLY_VERIFY_FEEDBACK.to_string()
            } else {
                let mut d = String::new();
                for goal in &report.unproved_goals {
                    match &goal.prover {
                        Some(p) => d.push_str(&format!(
                            "unproved goal {}: {} ({})\n",
                            goal.name, goal.status, p
                        )),
                        None => {
                            d.push_str(&format!("unproved goal {}: {}\n", goal.name, goal.status))
                        }
                    }
                }
                if report.verdict == Verdict::VerifierError {
                    d.push_str("the verifier did not produce a usable goal summary\n");
                }
                d.push_str("verifier output (excerpt):\n");
                d.push_str(&truncate_bytes(&report.raw_output, diagnostics_cap));
                d
            };
            Ok(FeedbackBlock {
                candidate_source: candidate_source.to_string(),
                diagnostics,
                stage: FailStage::VerifyFailed,
            })
        }
    }
}
