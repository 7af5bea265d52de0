//! Unit-test execution and pass-rate ranking.
//!
//! For each test case a small `main` is generated that feeds the inputs to
//! the candidate, prints every output value on its own line and exits.
//! Printed values are parsed back and compared as values, not bytes:
//! integers exactly, floats within a configured epsilon. Each test runs in
//! isolation with a wall-clock limit, so a crashing or diverging candidate
//! still yields a complete report.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{ProblemBundle, TestCase};
use crate::compile::prepare_candidate_source;
use crate::scalar::{parse_scalars, ScalarValue};
use crate::signature::{BaseType, Signature};
use crate::workspace::{run_tool, ExecError, Workspace};

/// Settings for building and running test binaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub cc: String,
    pub per_test_timeout_ms: u64,
    pub compile_timeout_secs: u64,
    /// Tolerance for float outputs: relative above magnitude 1, absolute
    /// below.
    pub float_epsilon: f64,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            cc: "cc".to_string(),
            per_test_timeout_ms: 2000,
            compile_timeout_secs: 30,
            float_epsilon: 1e-9,
        }
    }
}

/// Outcome of one test case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_index: usize,
    pub passed: bool,
    pub actual: Vec<ScalarValue>,
}

/// Per-test results plus the aggregate pass rate used for ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub results: Vec<CaseResult>,
    pub pass_rate: f64,
    pub ran: usize,
}

impl TestReport {
    /// The report assigned to candidates that never reached the tests
    /// (compile failures, harness build failures): zero rate, nothing ran.
    pub fn zero() -> TestReport {
        TestReport {
            results: Vec::new(),
            pass_rate: 0.0,
            ran: 0,
        }
    }

    fn from_results(results: Vec<CaseResult>) -> TestReport {
        let ran = results.len();
        let passed = results.iter().filter(|r| r.passed).count();
        let pass_rate = if ran > 0 {
            passed as f64 / ran as f64
        } else {
            0.0
        };
        TestReport {
            results,
            pass_rate,
            ran,
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unsupported type for parameter `{0}`")]
    UnsupportedType(String),
    #[error("test arity does not match signature: {0}")]
    ArityMismatch(String),
    #[error("harness build failed: {0}")]
    HarnessBuildError(String),
    #[error("C compiler `{0}` not found on PATH")]
    CompilerMissing(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn c_literal(value: &ScalarValue, ty: BaseType) -> Result<String, HarnessError> {
    match (value, ty.is_float()) {
        (ScalarValue::Int(v), false) => {
            if *v < 0 && matches!(ty, BaseType::UnsignedInt | BaseType::UnsignedLong | BaseType::UnsignedLongLong) {
                return Err(HarnessError::UnsupportedType(format!(
                    "negative literal {v} for unsigned parameter"
                )));
            }
            if *v == i64::MIN {
                // -9223372036854775808 is not a valid C literal
                return Ok("(-9223372036854775807LL - 1LL)".to_string());
            }
            Ok(format!("{v}{}", ty.literal_suffix()))
        }
        (ScalarValue::Int(v), true) => Ok(match ty {
            BaseType::Float => format!("{v}.0f"),
            _ => format!("{v}.0"),
        }),
        (ScalarValue::Float(v), true) => Ok(match ty {
            BaseType::Float => format!("{v}f"),
            _ => format!("{v}"),
        }),
        (ScalarValue::Float(v), false) => Err(HarnessError::UnsupportedType(format!(
            "float literal {v} for integer parameter"
        ))),
    }
}

/// Generate the `main` that drives one test case: inputs become initialized
/// locals, each pointer parameter gets zeroed output storage, and every
/// output prints on its own line with round-trip precision.
pub fn generate_harness(sig: &Signature, tc: &TestCase) -> Result<String, HarnessError> {
    let inputs: Vec<_> = sig.inputs().collect();
    let outputs: Vec<_> = sig.outputs().collect();
    if tc.inputs.len() != inputs.len() || tc.expected.len() != outputs.len() {
        return Err(HarnessError::ArityMismatch(format!(
            "{} inputs / {} expected for {} value / {} pointer parameters",
            tc.inputs.len(),
            tc.expected.len(),
            inputs.len(),
            outputs.len()
        )));
    }

    let mut src = String::new();
    src.push_str("#include <stdio.h>\n\n");
    src.push_str(&format!("{};\n\n", sig.c_decl()));
    src.push_str("int main(void)\n{\n");
    for (param, value) in inputs.iter().zip(&tc.inputs) {
        src.push_str(&format!(
            "    {} {} = {};\n",
            param.base_type.c_name(),
            param.name,
            c_literal(value, param.base_type)?
        ));
    }
    for param in &outputs {
        src.push_str(&format!(
            "    {} {} = {};\n",
            param.base_type.c_name(),
            param.name,
            if param.base_type.is_float() { "0.0" } else { "0" }
        ));
    }
    let call_args: Vec<String> = sig
        .params
        .iter()
        .map(|p| {
            if p.is_pointer {
                format!("&{}", p.name)
            } else {
                p.name.clone()
            }
        })
        .collect();
    src.push_str(&format!("    {}({});\n", sig.name, call_args.join(", ")));
    for param in &outputs {
        src.push_str(&format!(
            "    printf(\"{}\\n\", {});\n",
            param.base_type.printf_format(),
            param.name
        ));
    }
    src.push_str("    return 0;\n}\n");
    Ok(src)
}

fn map_exec_err(e: ExecError, cc: &str) -> HarnessError {
    match e {
        ExecError::ToolMissing(name) if name == cc => HarnessError::CompilerMissing(name),
        other => HarnessError::HarnessBuildError(other.to_string()),
    }
}

/// Compile the candidate once, then build and run one binary per test case.
/// Per-test build failures, crashes and timeouts are recorded as failed
/// cases; they never abort the report.
pub fn run_tests(
    src: &str,
    bundle: &ProblemBundle,
    ws: &Workspace,
    cfg: &TestConfig,
) -> Result<TestReport, HarnessError> {
    let sig = bundle
        .parsed_signature()
        .map_err(|e| HarnessError::HarnessBuildError(e.to_string()))?;

    ws.write_file("candidate.c", &prepare_candidate_source(src, bundle))?;
    let compile_timeout = Duration::from_secs(cfg.compile_timeout_secs);
    let out = run_tool(
        &cfg.cc,
        &[
            "-std=c11".into(),
            "-O1".into(),
            "-c".into(),
            "candidate.c".into(),
            "-o".into(),
            "candidate.o".into(),
        ],
        ws.path(),
        compile_timeout,
    )
    .map_err(|e| map_exec_err(e, &cfg.cc))?;
    if !out.success() {
        return Err(HarnessError::HarnessBuildError(format!(
            "candidate object build failed: {}",
            out.stderr.lines().next().unwrap_or("")
        )));
    }

    let mut results = Vec::with_capacity(bundle.tests.len());
    for (index, tc) in bundle.tests.iter().enumerate() {
        let harness_name = format!("harness_{index}.c");
        let bin_name = format!("test_{index}");
        ws.write_file(&harness_name, &generate_harness(&sig, tc)?)?;

        let build = run_tool(
            &cfg.cc,
            &[
                "-std=c11".into(),
                harness_name,
                "candidate.o".into(),
                "-o".into(),
                bin_name.clone(),
                "-lm".into(),
            ],
            ws.path(),
            compile_timeout,
        )
        .map_err(|e| map_exec_err(e, &cfg.cc))?;
        if !build.success() {
            // e.g. the candidate defines the wrong function: every link fails
            results.push(CaseResult {
                case_index: index,
                passed: false,
                actual: Vec::new(),
            });
            continue;
        }

        let run = run_tool(
            &format!("./{bin_name}"),
            &[],
            ws.path(),
            Duration::from_millis(cfg.per_test_timeout_ms),
        )
        .map_err(|e| HarnessError::HarnessBuildError(e.to_string()))?;

        let actual = if run.success() {
            parse_scalars(&run.stdout).unwrap_or_default()
        } else {
            Vec::new()
        };
        let passed = run.success()
            && actual.len() == tc.expected.len()
            && tc
                .expected
                .iter()
                .zip(&actual)
                .all(|(e, a)| e.matches(a, cfg.float_epsilon));
        results.push(CaseResult {
            case_index: index,
            passed,
            actual,
        });
    }

    Ok(TestReport::from_results(results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::parse_signature;

    fn add_positive_bundle(tests: Vec<TestCase>) -> ProblemBundle {
        ProblemBundle {
            id: "add_positive".into(),
            nl_spec: "`x` `y` `result`".into(),
            formal_spec: "/*@ ensures \\true; assigns *result; */".into(),
            signature: "void add_positive(int x, int y, int* result);".into(),
            tests,
            ground_truth: None,
        }
    }

    fn int_tests() -> Vec<TestCase> {
        [(2, 3, 5), (1, 1, 2), (4, 0, 4), (5, 2, 7)]
            .into_iter()
            .map(|(x, y, r)| TestCase {
                inputs: vec![ScalarValue::Int(x), ScalarValue::Int(y)],
                expected: vec![ScalarValue::Int(r)],
            })
            .collect()
    }

    #[test]
    fn harness_shape_for_add_positive() {
        let sig = parse_signature("void add_positive(int x, int y, int* result);").unwrap();
        let tc = TestCase {
            inputs: vec![ScalarValue::Int(2), ScalarValue::Int(3)],
            expected: vec![ScalarValue::Int(5)],
        };
        let src = generate_harness(&sig, &tc).unwrap();
        assert!(src.contains("int x = 2;"));
        assert!(src.contains("int y = 3;"));
        assert!(src.contains("add_positive(x, y, &result);"));
        assert!(src.contains("printf(\"%d\\n\", result);"));
    }

    #[test]
    fn harness_uses_long_long_storage() {
        let sig = parse_signature("void f(long long N, long long *out);").unwrap();
        let tc = TestCase {
            inputs: vec![ScalarValue::Int(7)],
            expected: vec![ScalarValue::Int(4)],
        };
        let src = generate_harness(&sig, &tc).unwrap();
        assert!(src.contains("long long N = 7LL;"));
        assert!(src.contains("long long out = 0;"));
        assert!(src.contains("printf(\"%lld\\n\", out);"));
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let sig = parse_signature("void f(int a, int *out);").unwrap();
        let tc = TestCase {
            inputs: vec![ScalarValue::Int(1), ScalarValue::Int(2)],
            expected: vec![ScalarValue::Int(0)],
        };
        assert!(matches!(
            generate_harness(&sig, &tc),
            Err(HarnessError::ArityMismatch(_))
        ));
    }

    #[test]
    fn correct_candidate_passes_all_tests() {
        let bundle = add_positive_bundle(int_tests());
        let ws = Workspace::new().unwrap();
        let report = run_tests(
            "void add_positive(int x, int y, int* result)\n{\n    *result = x + y;\n}\n",
            &bundle,
            &ws,
            &TestConfig::default(),
        )
        .unwrap();
        assert_eq!(report.ran, 4);
        assert_eq!(report.pass_rate, 1.0);
    }

    #[test]
    fn constant_zero_candidate_fails_all_tests() {
        let bundle = add_positive_bundle(int_tests());
        let ws = Workspace::new().unwrap();
        let report = run_tests(
            "void add_positive(int x, int y, int* result)\n{\n    *result = 0;\n}\n",
            &bundle,
            &ws,
            &TestConfig::default(),
        )
        .unwrap();
        assert_eq!(report.pass_rate, 0.0);
        assert_eq!(report.results.iter().filter(|r| r.passed).count(), 0);
    }

    #[test]
    fn subtract_candidate_passes_only_y_zero() {
        // hand enumeration over int_tests(): x-y matches x+y only when y == 0
        let bundle = add_positive_bundle(int_tests());
        let ws = Workspace::new().unwrap();
        let report = run_tests(
            "void add_positive(int x, int y, int* result)\n{\n    *result = x - y;\n}\n",
            &bundle,
            &ws,
            &TestConfig::default(),
        )
        .unwrap();
        assert_eq!(report.pass_rate, 0.25);
        assert!(report.results[2].passed);
        assert_eq!(report.results[2].actual, vec![ScalarValue::Int(4)]);
    }

    #[test]
    fn crash_and_divergence_still_yield_complete_report() {
        let bundle = ProblemBundle {
            id: "crashy".into(),
            nl_spec: "`a` `out`".into(),
            formal_spec: "/*@ ensures \\true; assigns *out; */".into(),
            signature: "void crashy(int a, int *out);".into(),
            tests: vec![
                TestCase {
                    inputs: vec![ScalarValue::Int(0)],
                    expected: vec![ScalarValue::Int(0)],
                },
                TestCase {
                    inputs: vec![ScalarValue::Int(1)],
                    expected: vec![ScalarValue::Int(1)],
                },
                TestCase {
                    inputs: vec![ScalarValue::Int(2)],
                    expected: vec![ScalarValue::Int(2)],
                },
            ],
            ground_truth: None,
        };
        // a = 0: correct; a = 1: segfault; a = 2: diverge until the timeout
        let src = "void crashy(int a, int *out)\n{\n    if (a == 1) { *(volatile int *)0 = 1; }\n    while (a == 2) { }\n    *out = a;\n}\n";
        let ws = Workspace::new().unwrap();
        let cfg = TestConfig {
            per_test_timeout_ms: 300,
            ..TestConfig::default()
        };
        let report = run_tests(src, &bundle, &ws, &cfg).unwrap();
        assert_eq!(report.ran, 3);
        assert!(report.results[0].passed);
        assert!(!report.results[1].passed);
        assert!(!report.results[2].passed);
        assert!((report.pass_rate - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn float_output_round_trips_exactly() {
        let bundle = ProblemBundle {
            id: "third".into(),
            nl_spec: "`a` `out`".into(),
            formal_spec: "/*@ ensures \\true; assigns *out; */".into(),
            signature: "void third(double a, double *out);".into(),
            tests: vec![TestCase {
                inputs: vec![ScalarValue::Float(1.0)],
                expected: vec![ScalarValue::Float(1.0 / 3.0)],
            }],
            ground_truth: None,
        };
        let ws = Workspace::new().unwrap();
        let report = run_tests(
            "void third(double a, double *out)\n{\n    *out = a / 3.0;\n}\n",
            &bundle,
            &ws,
            &TestConfig::default(),
        )
        .unwrap();
        assert!(report.results[0].passed);
        // %.17g printing re-parses to the identical f64
        assert_eq!(report.results[0].actual, vec![ScalarValue::Float(1.0 / 3.0)]);
    }

    #[test]
    fn wrong_function_name_fails_links_but_reports() {
        let bundle = add_positive_bundle(int_tests());
        let ws = Workspace::new().unwrap();
        let report = run_tests(
            "void other_name(int x, int y, int* result)\n{\n    *result = x + y;\n}\n",
            &bundle,
            &ws,
            &TestConfig::default(),
        )
        .unwrap();
        assert_eq!(report.ran, 4);
        assert_eq!(report.pass_rate, 0.0);
    }

    #[test]
    fn empty_test_list_has_zero_rate() {
        let bundle = add_positive_bundle(vec![]);
        let ws = Workspace::new().unwrap();
        let report = run_tests(
            "void add_positive(int x, int y, int* result)\n{\n    *result = x + y;\n}\n",
            &bundle,
            &ws,
            &TestConfig::default(),
        )
        .unwrap();
        assert_eq!(report.ran, 0);
        assert_eq!(report.pass_rate, 0.0);
    }

    #[test]
    fn i64_min_literal_compiles() {
        let sig = parse_signature("void f(long long a, long long *out);").unwrap();
        let tc = TestCase {
            inputs: vec![ScalarValue::Int(i64::MIN)],
            expected: vec![ScalarValue::Int(i64::MIN)],
        };
        let src = generate_harness(&sig, &tc).unwrap();
        assert!(src.contains("(-9223372036854775807LL - 1LL)"));
    }
}
