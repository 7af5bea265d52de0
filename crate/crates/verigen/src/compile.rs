//! Gate 1: syntactic validity.
//!
//! A candidate is compiled (no linking) against the bundle signature with
//! `cc -std=c11 -Wall`. Undeclared helpers are promoted to errors so that a
//! candidate that cannot possibly link is rejected here. The full compiler
//! stderr is captured; truncation to prompt-sized excerpts happens later, in
//! feedback rendering.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::ProblemBundle;
use crate::workspace::{run_tool, ExecError, Workspace};

/// Compiler invocation settings for the gate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileConfig {
    /// Compiler binary, resolved on PATH.
    pub cc: String,
    pub timeout_secs: u64,
}

impl Default for CompileConfig {
    fn default() -> Self {
        CompileConfig {
            cc: "cc".to_string(),
            timeout_secs: 30,
        }
    }
}

/// Outcome of the compile gate. `ok` is true only when an object file was
/// actually produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileReport {
    pub ok: bool,
    pub diagnostics: String,
    pub duration_ms: u64,
}

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("C compiler `{0}` not found on PATH")]
    CompilerMissing(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("workspace error: {0}")]
    Workspace(String),
}

fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Prepend the bundle signature's declaration unless the source already
/// carries it, pinning the candidate to the expected prototype.
pub fn prepare_candidate_source(src: &str, bundle: &ProblemBundle) -> String {
    let decl = bundle.signature.trim().trim_end_matches(';').trim_end();
    let decl_stmt = format!("{decl};");
    if normalize_ws(src).contains(&normalize_ws(&decl_stmt)) {
        return src.to_string();
    }
    format!("{decl_stmt}\n\n{src}")
}

/// Gate flags: syntax and type checking only, no linking.
pub const GATE_FLAGS: &[&str] = &[
    "-std=c11",
    "-Wall",
    "-Werror=implicit-function-declaration",
    "-Werror=implicit-int",
    "-c",
];

/// Compile `src` in the scratch workspace `ws` and report the outcome.
/// Nothing outside `ws` is touched.
pub fn compile_candidate(
    src: &str,
    bundle: &ProblemBundle,
    ws: &Workspace,
    cfg: &CompileConfig,
) -> Result<CompileReport, CompileError> {
    ws.write_file("candidate.c", &prepare_candidate_source(src, bundle))?;

    let mut args: Vec<String> = GATE_FLAGS.iter().map(|s| s.to_string()).collect();
    args.extend(["candidate.c".to_string(), "-o".to_string(), "candidate.o".to_string()]);

    let out = run_tool(
        &cfg.cc,
        &args,
        ws.path(),
        Duration::from_secs(cfg.timeout_secs),
    )
    .map_err(|e| match e {
        ExecError::ToolMissing(name) => CompileError::CompilerMissing(name),
        other => CompileError::Workspace(other.to_string()),
    })?;

    let ok = out.success() && ws.path().join("candidate.o").is_file();
    let mut diagnostics = out.stderr;
    if !out.stdout.trim().is_empty() {
        diagnostics.push_str(&out.stdout);
    }
    if out.timed_out {
        diagnostics.push_str("\n[compiler timed out]");
    }

    Ok(CompileReport {
        ok,
        diagnostics,
        duration_ms: out.duration.as_millis() as u64,
    })
}

/// First line of `cc --version`, for the session log header.
pub fn compiler_version(cc: &str) -> Option<String> {
    let ws = Workspace::new().ok()?;
    let out = run_tool(
        cc,
        &["--version".to_string()],
        ws.path(),
        Duration::from_secs(10),
    )
    .ok()?;
    out.stdout.lines().next().map(|l| l.trim().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::ProblemBundle;

    fn bundle() -> ProblemBundle {
        ProblemBundle {
            id: "add_positive".into(),
            nl_spec: "sum of `x` and `y` into `result`".into(),
            formal_spec: "/*@ requires \\valid(result); assigns *result; ensures *result == x + y; */".into(),
            signature: "void add_positive(int x, int y, int* result);".into(),
            tests: vec![],
            ground_truth: None,
        }
    }

    const TRUTH: &str = "void add_positive(int x, int y, int* result)\n{\n    *result = x + y;\n}\n";

    #[test]
    fn ground_truth_compiles() {
        let ws = Workspace::new().unwrap();
        let report = compile_candidate(TRUTH, &bundle(), &ws, &CompileConfig::default()).unwrap();
        assert!(report.ok, "diagnostics: {}", report.diagnostics);
        assert!(ws.path().join("candidate.o").is_file());
    }

    #[test]
    fn syntax_error_fails_with_diagnostics() {
        let ws = Workspace::new().unwrap();
        let report =
            compile_candidate("int x = ;", &bundle(), &ws, &CompileConfig::default()).unwrap();
        assert!(!report.ok);
        assert!(report.diagnostics.contains("error"));
        assert!(report.diagnostics.contains("candidate.c"));
    }

    #[test]
    fn undeclared_helper_fails() {
        let ws = Workspace::new().unwrap();
        let src = "void add_positive(int x, int y, int* result)\n{\n    *result = helper(x, y);\n}\n";
        let report = compile_candidate(src, &bundle(), &ws, &CompileConfig::default()).unwrap();
        assert!(!report.ok);
        assert!(report.diagnostics.contains("implicit declaration"));
    }

    #[test]
    fn declaration_prepended_once() {
        let with_decl = format!("void add_positive(int x, int y, int* result);\n{TRUTH}");
        let prepared = prepare_candidate_source(&with_decl, &bundle());
        assert_eq!(prepared, with_decl);
        let prepared = prepare_candidate_source(TRUTH, &bundle());
        assert!(prepared.starts_with("void add_positive(int x, int y, int* result);"));
        assert_eq!(
            prepared.matches("void add_positive").count(),
            2, // declaration + definition
        );
    }

    #[test]
    fn conflicting_definition_is_rejected() {
        // prototype pinning catches a candidate that drifts from the signature
        let ws = Workspace::new().unwrap();
        let src = "void add_positive(long x, long y, long* result)\n{\n    *result = x + y;\n}\n";
        let report = compile_candidate(src, &bundle(), &ws, &CompileConfig::default()).unwrap();
        assert!(!report.ok);
    }

    #[test]
    fn missing_compiler_is_an_environment_error() {
        let ws = Workspace::new().unwrap();
        let cfg = CompileConfig {
            cc: "no-such-cc-binary".into(),
            ..CompileConfig::default()
        };
        let err = compile_candidate(TRUTH, &bundle(), &ws, &cfg).unwrap_err();
        assert!(matches!(err, CompileError::CompilerMissing(_)));
    }

    #[test]
    fn diagnostics_use_relative_paths() {
        let ws = Workspace::new().unwrap();
        let report =
            compile_candidate("int x = ;", &bundle(), &ws, &CompileConfig::default()).unwrap();
        // session logs must stay byte-stable across runs, so no temp dirs
        assert!(!report.diagnostics.contains(ws.path().to_str().unwrap()));
    }
}
