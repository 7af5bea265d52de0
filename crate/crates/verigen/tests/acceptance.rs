//! Acceptance suite: one test per shipping criterion, each printing a
//! PASS line (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Mock-driven criteria pin the verifier to the bundled stand-in so results
//! are identical on machines with and without Frama-C; the ground-truth
//! criterion uses the real Frama-C when present and reports a skip of the
//! live leg otherwise.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use verigen::bundle::{load_bundle, ProblemBundle, TestCase};
use verigen::engine::{
    build_provider, run_session, strip_timing_fields, write_outputs, ProviderConfig,
    SessionConfig, SessionStatus,
};
use verigen::harness::{run_tests, TestConfig, TestReport};
use verigen::llm::SamplingParams;
use verigen::pool::{Candidate, Pool};
use verigen::prompt::{
    build_improvement_prompt, build_initialization_prompt, PromptConfig, PromptTemplates, SpecMode,
};
use verigen::scalar::parse_scalars;
use verigen::transform::transform_main;
use verigen::verify::{
    parse_verifier_output, render_feedback, verifier_version, FailedGate, GoalStatus, Verdict,
    VerifyConfig, VerifyReport, NL_ONLY_VERIFY_FEEDBACK,
};
use verigen::workspace::{run_tool, Workspace};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn stub_verifier() -> String {
    fixtures().join("bin/fake-frama-c").to_string_lossy().into_owned()
}

fn verigen_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_verigen"))
}

fn session_config(mock: &Path, n: usize, iterations: usize, seed: u64) -> SessionConfig {
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
        rng_seed: seed,
        provider: ProviderConfig::Mock {
            dir: mock.to_path_buf(),
        },
        ..SessionConfig::default()
    }
}

fn run_mock_session(mock: &str, n: usize, iterations: usize, seed: u64) -> verigen::engine::SessionOutcome {
    let bundle = load_bundle(&fixtures().join("add_positive")).unwrap();
    let cfg = session_config(&fixtures().join(mock), n, iterations, seed);
    let provider = build_provider(&cfg.provider).unwrap();
    let (outcome, _) =
        run_session(&bundle, &cfg, provider.as_ref(), &PromptTemplates::default()).unwrap();
    outcome
}

/// Re-verify an emitted solution through the CLI gate; used by every
/// criterion that produces a solution file.
fn assert_solution_reverifies(problem: &Path, solution: &Path) {
    let status = verigen_bin()
        .args([
            "verify",
            "--problem",
            problem.to_str().unwrap(),
            "--file",
            solution.to_str().unwrap(),
            "--frama-c",
            &stub_verifier(),
        ])
        .status()
        .unwrap();
    assert!(
        status.success(),
        "emitted solution {} failed re-verification",
        solution.display()
    );
}

// -------------------------------------------------------------------------
// 1. Ground-truth verification: add_positive truth verifies, the mutated
//    body does not. Runs against the real Frama-C when installed.
// -------------------------------------------------------------------------
#[test]
fn criterion_01_ground_truth_verification() {
    let problem = fixtures().join("add_positive");
    let truth = problem.join("truth.c");
    let mutant_dir = tempfile::tempdir().unwrap();
    let mutant = mutant_dir.path().join("mutant.c");
    std::fs::write(
        &mutant,
        "void add_positive(int x, int y, int* result)\n{\n    *result = x - y;\n}\n",
    )
    .unwrap();

    let run_leg = |frama_c: &str| {
        let start = Instant::now();
        let ok = verigen_bin()
            .args([
                "verify",
                "--problem",
                problem.to_str().unwrap(),
                "--file",
                truth.to_str().unwrap(),
                "--frama-c",
                frama_c,
            ])
            .status()
            .unwrap();
        let elapsed = start.elapsed();
        assert!(ok.success(), "ground truth must verify (via {frama_c})");
        assert!(
            elapsed < Duration::from_secs(30),
            "verification took {elapsed:?}, budget is 30 s"
        );
        let bad = verigen_bin()
            .args([
                "verify",
                "--problem",
                problem.to_str().unwrap(),
                "--file",
                mutant.to_str().unwrap(),
                "--frama-c",
                frama_c,
            ])
            .status()
            .unwrap();
        assert_eq!(bad.code(), Some(1), "x - y mutant must not verify");
    };

    match verifier_version("frama-c") {
        Some(version) => {
            run_leg("frama-c");
            println!("ACCEPTANCE 1 ground-truth verification: PASS (real {version})");
        }
        None => {
            run_leg(&stub_verifier());
            println!(
                "ACCEPTANCE 1 ground-truth verification: PASS via bundled stand-in \
                 (frama-c not installed on this machine; real-verifier leg skipped)"
            );
        }
    }
}

// -------------------------------------------------------------------------
// 2. Deterministic end-to-end replay: same mock script and seed give
//    byte-identical session logs after stripping timing fields.
// -------------------------------------------------------------------------
#[test]
fn criterion_02_deterministic_replay() {
    let problem = fixtures().join("add_positive");
    let mock = fixtures().join("mock_iter1");

    let run_once = |out: &Path| {
        let status = verigen_bin()
            .args([
                "generate",
                "--problem",
                problem.to_str().unwrap(),
                "--provider",
                "mock",
                "--mock-dir",
                mock.to_str().unwrap(),
                "--seed",
                "7",
                "--frama-c",
                &stub_verifier(),
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    };

    let normalized = |out: &Path| -> String {
        let text = std::fs::read_to_string(out.join("session.jsonl")).unwrap();
        text.lines()
            .map(|line| {
                let mut event: serde_json::Value = serde_json::from_str(line).unwrap();
                strip_timing_fields(&mut event);
                event.to_string()
            })
            .collect::<Vec<_>>()
            .join("\n")
    };

    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run_once(dir_a.path());
    run_once(dir_b.path());
    let a = normalized(dir_a.path());
    let b = normalized(dir_b.path());
    assert!(!a.is_empty());
    assert_eq!(a, b, "session logs must replay byte-identically");
    assert_solution_reverifies(&problem, &dir_a.path().join("solution.c"));
    println!("ACCEPTANCE 2 deterministic replay: PASS");
}

// -------------------------------------------------------------------------
// 3. Iteration accounting: solve at iteration 0, 1 and 3, and an unsolved
//    run of 10 iterations generating exactly 110 candidates.
// -------------------------------------------------------------------------
#[test]
fn criterion_03_iteration_accounting() {
    let solved0 = run_mock_session("mock_gt", 10, 10, 1);
    assert_eq!(solved0.status, SessionStatus::Solved);
    assert_eq!(solved0.iterations_used, 0);
    assert_eq!(solved0.totals.candidates_generated, 3); // stops at sample 2

    let solved1 = run_mock_session("mock_iter1", 10, 10, 1);
    assert_eq!(solved1.status, SessionStatus::Solved);
    assert_eq!(solved1.iterations_used, 1);
    assert_eq!(solved1.totals.candidates_generated, 11);

    let solved3 = run_mock_session("mock_iter3", 10, 10, 1);
    assert_eq!(solved3.status, SessionStatus::Solved);
    assert_eq!(solved3.iterations_used, 3);
    assert_eq!(solved3.totals.candidates_generated, 31);

    let unsolved = run_mock_session("mock_allwrong", 10, 10, 1);
    assert_eq!(unsolved.status, SessionStatus::Unsolved);
    assert_eq!(unsolved.iterations_used, 10);
    assert_eq!(
        unsolved.totals.candidates_generated, 110,
        "10 candidates x 11 invocations"
    );
    assert!(unsolved.solution.is_some(), "last candidate is emitted");
    println!("ACCEPTANCE 3 iteration accounting: PASS");
}

// -------------------------------------------------------------------------
// 4. Selection policy: always a maximal-rate candidate; uniform among a
//    10-way tie within 3 sigma over 10 000 seeded draws.
// -------------------------------------------------------------------------
fn rated_candidate(id: String, passed: usize, ran: usize) -> Candidate {
    Candidate {
        id,
        iteration: 0,
        sample_index: 0,
        source: String::new(),
        compile: None,
        verify: None,
        tests: Some(TestReport {
            results: vec![],
            pass_rate: if ran > 0 {
                passed as f64 / ran as f64
            } else {
                0.0
            },
            ran,
        }),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn criterion_04a_select_best_returns_maximal_rate(
        passed_counts in prop::collection::vec(0usize..=20, 1..40),
        seed in any::<u64>(),
    ) {
        let mut pool = Pool::new(seed);
        let mut max_rate: f64 = 0.0;
        for (i, passed) in passed_counts.iter().enumerate() {
            pool.push(rated_candidate(format!("c{i}"), *passed, 20)).unwrap();
            max_rate = max_rate.max(*passed as f64 / 20.0);
        }
        let picked = pool.select_best().unwrap();
        prop_assert_eq!(picked.pass_rate(), max_rate);
    }
}

#[test]
fn criterion_04b_tie_break_is_uniform_within_3_sigma() {
    let mut pool = Pool::new(20250810);
    for i in 0..10 {
        pool.push(rated_candidate(format!("c{i}"), 10, 20)).unwrap();
    }
    let mut counts = std::collections::HashMap::new();
    for _ in 0..10_000 {
        let id = pool.select_best().unwrap().id.clone();
        *counts.entry(id).or_insert(0usize) += 1;
    }
    // binomial sigma = sqrt(n p (1-p)) = 30, so 3 sigma = 90
    for i in 0..10 {
        let freq = counts.get(&format!("c{i}")).copied().unwrap_or(0);
        assert!(
            (freq as i64 - 1000).abs() <= 90,
            "candidate c{i} drawn {freq} times; outside 1000 +/- 90"
        );
    }
    println!("ACCEPTANCE 4 selection policy: PASS");
}

// -------------------------------------------------------------------------
// 5. Prompt conformance snapshots against golden files.
// -------------------------------------------------------------------------
fn assert_matches_golden(name: &str, actual: &str) {
    let path = fixtures().join("golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("missing golden file {}: {e}", path.display()));
    assert_eq!(actual, expected, "snapshot drifted from {}", path.display());
}

#[test]
fn criterion_05_prompt_conformance_snapshots() {
    let bundle = load_bundle(&fixtures().join("add_positive")).unwrap();
    let templates = PromptTemplates::default();
    let cfg = PromptConfig::default();

    let init = build_initialization_prompt(&bundle, &cfg, &templates);
    assert!(init.shot.is_some(), "part B present with one_shot");
    assert!(init.feedback.is_none(), "no feedback in initialization");
    assert_matches_golden("init_prompt_both_oneshot.txt", &init.render_text());

    // improvement prompt, technical feedback from a partial verifier run
    let transcript = std::fs::read_to_string(
        fixtures().join("verifier_transcripts/partial_timeout.txt"),
    )
    .unwrap();
    let report = VerifyReport::from_output(transcript, Duration::from_millis(7), true);
    let candidate = "void add_positive(int x, int y, int* result)\n{\n    *result = x - y;\n}";
    let feedback =
        render_feedback(FailedGate::Verify(&report), SpecMode::Both, candidate, 8192).unwrap();
    let improve = build_improvement_prompt(&bundle, &cfg, &templates, feedback);
    let rendered = improve.render_text();
    // exactly one candidate program is embedded: the one-shot block plus one
    assert_eq!(rendered.matches("```c").count(), 2);
    assert_matches_golden("improve_prompt_both_oneshot.txt", &rendered);

    // NL-only improvement feedback is exactly the fixed message
    let nl_cfg = PromptConfig {
        spec_mode: SpecMode::NlOnly,
        ..PromptConfig::default()
    };
    let nl_feedback =
        render_feedback(FailedGate::Verify(&report), SpecMode::NlOnly, candidate, 8192).unwrap();
    assert_eq!(nl_feedback.diagnostics, NL_ONLY_VERIFY_FEEDBACK);
    let nl_improve = build_improvement_prompt(&bundle, &nl_cfg, &templates, nl_feedback);
    let nl_rendered = nl_improve.render_text();
    assert!(!nl_rendered.contains("typed_add_positive"), "no goal detail in NL-only mode");
    assert_matches_golden("improve_prompt_nl_only.txt", &nl_rendered);
    println!("ACCEPTANCE 5 prompt conformance: PASS");
}

// -------------------------------------------------------------------------
// 6. Verifier-output parser: transcript fixtures parse to the expected
//    triples; fuzzing never aborts and never verifies.
// -------------------------------------------------------------------------
#[test]
fn criterion_06_parser_fixtures_and_fuzz() {
    let read = |name: &str| -> String {
        let bytes = std::fs::read(fixtures().join("verifier_transcripts").join(name)).unwrap();
        String::from_utf8_lossy(&bytes).into_owned()
    };
    let table: &[(&str, usize, usize, usize)] = &[
        ("all_proved.txt", 12, 12, 0),
        ("partial_timeout.txt", 12, 11, 1),
        ("partial_unknown_oldstyle.txt", 5, 4, 1),
        ("partial_failed.txt", 4, 3, 1),
        ("crash.txt", 0, 0, 0),
        ("empty.txt", 0, 0, 0),
        ("garbage.txt", 0, 0, 0),
        ("zero_goals.txt", 0, 0, 0),
    ];
    for (name, total, proved, unproved) in table {
        let parsed = parse_verifier_output(&read(name));
        assert_eq!(parsed.goals_total, *total, "{name}: goals_total");
        assert_eq!(parsed.goals_proved, *proved, "{name}: goals_proved");
        assert_eq!(parsed.unproved_goals.len(), *unproved, "{name}: unproved");
    }
    // the timeout fixture names the goal and its status
    let parsed = parse_verifier_output(&read("partial_timeout.txt"));
    assert_eq!(
        parsed.unproved_goals[0].name,
        "typed_add_positive_assert_rte_signed_overflow"
    );
    assert_eq!(parsed.unproved_goals[0].status, GoalStatus::Timeout);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
    for _ in 0..10_000 {
        let len = rng.random_range(0..400);
        let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        let text = String::from_utf8_lossy(&bytes).into_owned();
        let _ = parse_verifier_output(&text); // must not abort
        let report = VerifyReport::from_output(text, Duration::from_millis(1), true);
        assert_ne!(report.verdict, Verdict::Verified, "fuzz input verified");
    }
    println!("ACCEPTANCE 6 parser fixtures and fuzz: PASS");
}

// -------------------------------------------------------------------------
// 7. Transformer oracle equivalence: the transformed function agrees with
//    the original program's stdout on every test input, integer-exact, and
//    contains no stdio tokens.
// -------------------------------------------------------------------------
fn original_outputs(ws: &Workspace, original: &Path, input: &str) -> Vec<verigen::scalar::ScalarValue> {
    std::fs::copy(original, ws.path().join("original.c")).unwrap();
    std::fs::write(ws.path().join("input.txt"), input).unwrap();
    let build = run_tool(
        "cc",
        &["-std=c11".into(), "original.c".into(), "-o".into(), "orig".into()],
        ws.path(),
        Duration::from_secs(30),
    )
    .unwrap();
    assert!(build.success(), "original must compile: {}", build.stderr);
    let run = run_tool(
        "sh",
        &["-c".into(), "./orig < input.txt".into()],
        ws.path(),
        Duration::from_secs(10),
    )
    .unwrap();
    assert!(run.success(), "original must run cleanly");
    parse_scalars(&run.stdout).unwrap()
}

#[test]
fn criterion_07_transform_oracle_equivalence() {
    let cases = [
        ("fig5", "calculateMinimumBrainsForStrategy"),
        ("sum2", "sum_two"),
        ("max3", "max_of_three"),
        ("ceil_div", "ceil_div"),
    ];
    for (dir_name, fn_name) in cases {
        let dir = fixtures().join("transform").join(dir_name);
        let source = std::fs::read_to_string(dir.join("original.c")).unwrap();
        let result = transform_main(&source, fn_name).unwrap();

        for banned in ["scanf", "printf", "stdio.h"] {
            assert!(
                !result.function_source.contains(banned),
                "{dir_name}: `{banned}` left in transformed source"
            );
        }

        let mut inputs: Vec<PathBuf> = std::fs::read_dir(dir.join("tests"))
            .unwrap()
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "in"))
            .collect();
        inputs.sort();
        assert!(!inputs.is_empty());

        let mut tests = Vec::new();
        for input_path in &inputs {
            let input = std::fs::read_to_string(input_path).unwrap();
            let ws = Workspace::new().unwrap();
            let expected = original_outputs(&ws, &dir.join("original.c"), &input);
            tests.push(TestCase {
                inputs: parse_scalars(&input).unwrap(),
                expected,
            });
        }

        let bundle = ProblemBundle {
            id: dir_name.to_string(),
            nl_spec: String::new(),
            formal_spec: String::new(),
            signature: format!("{};", result.signature.c_decl()),
            tests,
            ground_truth: None,
        };
        let ws = Workspace::new().unwrap();
        let report = run_tests(
            &result.function_source,
            &bundle,
            &ws,
            &TestConfig::default(),
        )
        .unwrap();
        assert_eq!(
            report.pass_rate, 1.0,
            "{dir_name}: transformed function diverges from the original\n{:#?}\n{}",
            report.results, result.function_source
        );
    }
    println!("ACCEPTANCE 7 transformer equivalence: PASS");
}

// -------------------------------------------------------------------------
// 8. Stats: Fig.-1-shaped bundle reports 4 clauses; the median-sized
//    fixture reports formal_loc 25 and n_tests 34 exactly.
// -------------------------------------------------------------------------
#[test]
fn criterion_08_stats() {
    let out = verigen_bin()
        .args([
            "stats",
            "--problem",
            fixtures().join("add_positive").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("formal_clauses = 4"), "stdout:\n{text}");

    let out = verigen_bin()
        .args([
            "stats",
            "--problem",
            fixtures().join("table_one_median").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("formal_loc = 25"), "stdout:\n{text}");
    assert!(text.contains("n_tests = 34"), "stdout:\n{text}");
    println!("ACCEPTANCE 8 stats: PASS");
}

// -------------------------------------------------------------------------
// 9. Fail-closed: every solution emitted by a solved session re-verifies
//    independently; unsolved sessions emit no solution.c.
// -------------------------------------------------------------------------
#[test]
fn criterion_09_fail_closed_reverification() {
    let problem = fixtures().join("add_positive");
    let bundle = load_bundle(&problem).unwrap();

    let mut emitted = Vec::new();
    for (mock, n, iterations) in [("mock_gt", 10, 10), ("mock_iter1", 10, 10), ("mock_iter3", 10, 3)]
    {
        let cfg = session_config(&fixtures().join(mock), n, iterations, 5);
        let provider = build_provider(&cfg.provider).unwrap();
        let (outcome, log) =
            run_session(&bundle, &cfg, provider.as_ref(), &PromptTemplates::default()).unwrap();
        assert_eq!(outcome.status, SessionStatus::Solved);
        let out = tempfile::tempdir().unwrap();
        write_outputs(&outcome, &log, out.path()).unwrap();
        let solution = out.path().join("solution.c");
        assert!(solution.is_file());
        emitted.push((out, solution));
    }
    for (_dir, solution) in &emitted {
        assert_solution_reverifies(&problem, solution);
    }

    // an unsolved session never writes solution.c
    let cfg = session_config(&fixtures().join("mock_allwrong"), 10, 1, 5);
    let provider = build_provider(&cfg.provider).unwrap();
    let (outcome, log) =
        run_session(&bundle, &cfg, provider.as_ref(), &PromptTemplates::default()).unwrap();
    assert_eq!(outcome.status, SessionStatus::Unsolved);
    let out = tempfile::tempdir().unwrap();
    write_outputs(&outcome, &log, out.path()).unwrap();
    assert!(!out.path().join("solution.c").exists());
    assert!(out.path().join("last_candidate.c").is_file());
    println!("ACCEPTANCE 9 fail-closed re-verification: PASS");
}

// -------------------------------------------------------------------------
// 10. Optional live smoke test, excluded from CI: runs only when
//     VERIGEN_LIVE_SMOKE=1 and LLM_API_KEY are set.
// -------------------------------------------------------------------------
#[test]
fn criterion_10_live_smoke() {
    if std::env::var_os("VERIGEN_LIVE_SMOKE").is_none()
        || std::env::var_os("LLM_API_KEY").is_none()
    {
        println!("ACCEPTANCE 10 live smoke: SKIP (set VERIGEN_LIVE_SMOKE=1 and LLM_API_KEY to run)");
        return;
    }
    let problem = fixtures().join("add_positive");
    let out = tempfile::tempdir().unwrap();
    let frama_c = if verifier_version("frama-c").is_some() {
        "frama-c".to_string()
    } else {
        stub_verifier()
    };
    let status = verigen_bin()
        .args([
            "generate",
            "--problem",
            problem.to_str().unwrap(),
            "--provider",
            "http",
            "--candidates",
            "2",
            "--iterations",
            "1",
            "--frama-c",
            &frama_c,
            "--out",
            out.path().to_str().unwrap(),
        ])
        .status()
        .unwrap();
    // no content assertions; the run must complete and log well-formed events
    assert!(status.code() == Some(0) || status.code() == Some(1));
    let log = std::fs::read_to_string(out.path().join("session.jsonl")).unwrap();
    for line in log.lines() {
        let event: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(event.get("event").is_some());
    }
    println!("ACCEPTANCE 10 live smoke: PASS");
}
