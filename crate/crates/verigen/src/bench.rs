//! Batch benchmark runs over a directory of problem bundles.
//!
//! Problems run in parallel sessions; per-problem failures are recorded as
//! rows, never aborting the batch. The row columns mirror the per-problem
//! effectiveness metrics: solved, improvement iterations, solution size,
//! solution verify time and total time.

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::bundle::load_bundle;
use crate::engine::{
    build_provider, run_session, write_outputs, ProviderConfig, SessionConfig, SessionStatus,
};
use crate::prompt::{PromptTemplates, SpecMode};

/// One problem's outcome in the benchmark table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub problem: String,
    pub spec_mode: SpecMode,
    pub solved: bool,
    /// Improvement iterations used by the solving session, when solved.
    pub iterations: Option<usize>,
    pub solution_loc: Option<usize>,
    pub verify_time_ms: Option<u64>,
    pub total_time_ms: u64,
    pub error: Option<String>,
}

/// Aggregate of one spec-mode sweep arm: how many problems the initial batch
/// solved and how many the improvement rounds brought the total to.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub spec_mode: SpecMode,
    pub solved_initial: usize,
    pub solved_after_improvement: usize,
    pub total_time_ms: u64,
}

/// Scan a directory for problem bundles (subdirectories holding
/// `spec.acsl`), sorted by name.
pub fn discover_problems(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut problems = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() && path.join("spec.acsl").is_file() {
            problems.push(path);
        }
    }
    problems.sort();
    Ok(problems)
}

/// For mock scripts, each problem replays `<mock-dir>/<problem-id>` when
/// that subdirectory exists, the shared directory otherwise.
fn provider_for_problem(base: &ProviderConfig, problem_id: &str) -> ProviderConfig {
    match base {
        ProviderConfig::Mock { dir } => {
            let per_problem = dir.join(problem_id);
            if per_problem.is_dir() {
                ProviderConfig::Mock { dir: per_problem }
            } else {
                base.clone()
            }
        }
        other => other.clone(),
    }
}

fn run_one(
    problem_dir: &Path,
    cfg: &SessionConfig,
    templates: &PromptTemplates,
    out_dir: Option<&Path>,
) -> BenchRow {
    let problem = problem_dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| problem_dir.display().to_string());
    let fail = |error: String| BenchRow {
        problem: problem.clone(),
        spec_mode: cfg.prompt.spec_mode,
        solved: false,
        iterations: None,
        solution_loc: None,
        verify_time_ms: None,
        total_time_ms: 0,
        error: Some(error),
    };

    let bundle = match load_bundle(problem_dir) {
        Ok(b) => b,
        Err(e) => return fail(e.to_string()),
    };
    let mut cfg = cfg.clone();
    cfg.provider = provider_for_problem(&cfg.provider, &bundle.id);
    let provider = match build_provider(&cfg.provider) {
        Ok(p) => p,
        Err(e) => return fail(e.to_string()),
    };
    let (outcome, log) = match run_session(&bundle, &cfg, provider.as_ref(), templates) {
        Ok(r) => r,
        Err(e) => return fail(e.to_string()),
    };
    if let Some(root) = out_dir {
        if let Err(e) = write_outputs(&outcome, &log, &root.join(&bundle.id)) {
            return fail(format!("writing outputs: {e}"));
        }
    }

    // solution metrics only count for solved rows; an unsolved session's
    // last candidate is not a solution
    let solved = outcome.status == SessionStatus::Solved;
    let solution = outcome.solution.as_ref().filter(|_| solved);
    BenchRow {
        problem,
        spec_mode: cfg.prompt.spec_mode,
        solved,
        iterations: solved.then_some(outcome.iterations_used),
        solution_loc: solution.map(|c| crate::bundle::count_loc(&c.source)),
        verify_time_ms: solution.and_then(|c| c.verify.as_ref()).map(|v| v.duration_ms),
        total_time_ms: outcome.totals.wall_time_ms,
        error: outcome.failure_reason,
    }
}

/// Run sessions for every problem, `jobs` at a time, and return rows in
/// problem order.
pub fn run_bench(
    problems: &[PathBuf],
    cfg: &SessionConfig,
    templates: &PromptTemplates,
    out_dir: Option<&Path>,
    jobs: usize,
) -> Vec<BenchRow> {
    let jobs = jobs.max(1);
    let next = Mutex::new(0usize);
    let rows: Mutex<Vec<Option<BenchRow>>> = Mutex::new(vec![None; problems.len()]);

    std::thread::scope(|scope| {
        for _ in 0..jobs.min(problems.len().max(1)) {
            scope.spawn(|| loop {
                let index = {
                    let mut n = next.lock().unwrap();
                    if *n >= problems.len() {
                        break;
                    }
                    let i = *n;
                    *n += 1;
                    i
                };
                let row = run_one(&problems[index], cfg, templates, out_dir);
                rows.lock().unwrap()[index] = Some(row);
            });
        }
    });

    rows.into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every problem produced a row"))
        .collect()
}

/// Run the benchmark once per specification mode.
pub fn run_sweep(
    problems: &[PathBuf],
    cfg: &SessionConfig,
    templates: &PromptTemplates,
    out_dir: Option<&Path>,
    jobs: usize,
) -> (Vec<BenchRow>, Vec<SweepRow>) {
    let mut all_rows = Vec::new();
    let mut sweep = Vec::new();
    for mode in [SpecMode::Both, SpecMode::NlOnly, SpecMode::FormalOnly] {
        let mut mode_cfg = cfg.clone();
        mode_cfg.prompt.spec_mode = mode;
        let mode_out = out_dir.map(|d| d.join(mode.to_string()));
        let rows = run_bench(problems, &mode_cfg, templates, mode_out.as_deref(), jobs);
        let solved_initial = rows
            .iter()
            .filter(|r| r.solved && r.iterations == Some(0))
            .count();
        let solved_after = rows.iter().filter(|r| r.solved).count();
        let total_time_ms = rows.iter().map(|r| r.total_time_ms).sum();
        sweep.push(SweepRow {
            spec_mode: mode,
            solved_initial,
            solved_after_improvement: solved_after,
            total_time_ms,
        });
        all_rows.extend(rows);
    }
    (all_rows, sweep)
}

fn seconds(ms: u64) -> String {
    format!("{:.3}", ms as f64 / 1000.0)
}

/// CSV form of the benchmark rows.
pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(
        "problem,spec_mode,solved,iterations,solution_loc,verify_time_s,total_time_s,error\n",
    );
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.problem,
            row.spec_mode,
            row.solved,
            row.iterations.map(|v| v.to_string()).unwrap_or_default(),
            row.solution_loc.map(|v| v.to_string()).unwrap_or_default(),
            row.verify_time_ms.map(seconds).unwrap_or_default(),
            seconds(row.total_time_ms),
            row.error
                .as_deref()
                .map(|e| e.replace([',', '\n'], ";"))
                .unwrap_or_default(),
        ));
    }
    out
}

/// Fixed-width console table of the benchmark rows.
pub fn render_table(rows: &[BenchRow]) -> String {
    let mut out = format!(
        "{:<24} {:<6} {:>7} {:>6} {:>6} {:>10} {:>10}\n",
        "problem", "mode", "solved", "iter", "loc", "verify_s", "total_s"
    );
    for row in rows {
        out.push_str(&format!(
            "{:<24} {:<6} {:>7} {:>6} {:>6} {:>10} {:>10}{}\n",
            row.problem,
            row.spec_mode.to_string(),
            if row.solved { "yes" } else { "no" },
            row.iterations.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
            row.solution_loc
                .map(|v| v.to_string())
                .unwrap_or_else(|| "-".into()),
            row.verify_time_ms
                .map(seconds)
                .unwrap_or_else(|| "-".into()),
            seconds(row.total_time_ms),
            row.error
                .as_deref()
                .map(|e| format!("  ({e})"))
                .unwrap_or_default(),
        ));
    }
    out
}

/// Console comparison of the sweep arms.
pub fn render_sweep_table(rows: &[SweepRow]) -> String {
    let mut out = format!(
        "{:<8} {:>8} {:>12} {:>10}\n",
        "mode", "initial", "improvement", "total_s"
    );
    for row in rows {
        out.push_str(&format!(
            "{:<8} {:>8} {:>12} {:>10}\n",
            row.spec_mode.to_string(),
            row.solved_initial,
            row.solved_after_improvement,
            seconds(row.total_time_ms),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_expected_header_and_rows() {
        let rows = vec![BenchRow {
            problem: "p1".into(),
            spec_mode: SpecMode::Both,
            solved: true,
            iterations: Some(1),
            solution_loc: Some(4),
            verify_time_ms: Some(2200),
            total_time_ms: 11_000,
            error: None,
        }];
        let csv = rows_to_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "problem,spec_mode,solved,iterations,solution_loc,verify_time_s,total_time_s,error"
        );
        assert_eq!(lines.next().unwrap(), "p1,both,true,1,4,2.200,11.000,");
    }

    #[test]
    fn discover_skips_non_bundle_dirs() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("b")).unwrap();
        std::fs::create_dir(dir.path().join("a")).unwrap();
        std::fs::write(dir.path().join("a/spec.acsl"), "x").unwrap();
        std::fs::create_dir(dir.path().join("not_a_bundle")).unwrap();
        let found = discover_problems(dir.path()).unwrap();
        assert_eq!(found.len(), 1);
        assert!(found[0].ends_with("a"));
    }
}
