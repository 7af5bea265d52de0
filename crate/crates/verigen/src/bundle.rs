//! Problem bundles: the unit of input to the pipeline.
//!
//! A bundle directory holds the four inputs for one synthesis task —
//! `spec.acsl` (formal spec), `spec.md` (natural-language spec),
//! `signature.h` (one void function declaration) and `tests/<k>.in` /
//! `tests/<k>.out` pairs — plus an optional `truth.c` reference solution.
//! Bundles are immutable after load and safe to share across threads.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::ScalarValue;
use crate::signature::{parse_signature, Signature, SignatureParseError};

/// One unit test: input literals for the non-pointer parameters and expected
/// literals for the pointer parameters, both in signature order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub inputs: Vec<ScalarValue>,
    pub expected: Vec<ScalarValue>,
}

/// The four inputs plus metadata for one synthesis task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemBundle {
    pub id: String,
    pub nl_spec: String,
    pub formal_spec: String,
    /// Raw text of the single C declaration.
    pub signature: String,
    pub tests: Vec<TestCase>,
    pub ground_truth: Option<String>,
}

impl ProblemBundle {
    pub fn parsed_signature(&self) -> Result<Signature, SignatureParseError> {
        parse_signature(&self.signature)
    }
}

/// Size metrics for a bundle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleStats {
    pub nl_tokens: usize,
    pub formal_loc: usize,
    pub formal_clauses: usize,
    pub truth_loc: Option<usize>,
    pub n_tests: usize,
    pub tokenizer_name: String,
}

/// Counts tokens of a natural-language text. The tokenizer name is recorded
/// in [`BundleStats`] so counts from different tokenizers are never silently
/// compared.
pub trait Tokenizer {
    fn name(&self) -> &str;
    fn count(&self, text: &str) -> usize;
}

/// Default deterministic tokenizer: whitespace-separated words.
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn name(&self) -> &str {
        "whitespace"
    }

    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("missing file: {0}")]
    MissingFile(String),
    #[error("malformed test {file} line {line}: bad scalar literal `{token}`")]
    MalformedTest {
        file: String,
        line: usize,
        token: String,
    },
    #[error(transparent)]
    Signature(#[from] SignatureParseError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn read_required(dir: &Path, name: &str) -> Result<String, BundleError> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(BundleError::MissingFile(name.to_string()));
    }
    Ok(std::fs::read_to_string(path)?)
}

fn parse_test_file(path: &Path, rel_name: &str) -> Result<Vec<ScalarValue>, BundleError> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        for token in line.split_whitespace() {
            match ScalarValue::parse(token) {
                Ok(v) => values.push(v),
                Err(_) => {
                    return Err(BundleError::MalformedTest {
                        file: rel_name.to_string(),
                        line: lineno + 1,
                        token: token.to_string(),
                    })
                }
            }
        }
    }
    Ok(values)
}

/// Load a bundle from a directory laid out as described in the module docs.
/// A missing `tests/` directory yields an empty test list; that is only
/// valid when the improvement loop is disabled, which [`validate_bundle`]
/// checks.
pub fn load_bundle(dir: &Path) -> Result<ProblemBundle, BundleError> {
    let formal_spec = read_required(dir, "spec.acsl")?;
    let nl_spec = read_required(dir, "spec.md")?;
    let signature = read_required(dir, "signature.h")?;
    parse_signature(&signature)?;

    let mut tests = Vec::new();
    let tests_dir = dir.join("tests");
    if tests_dir.is_dir() {
        let mut indices: Vec<u64> = Vec::new();
        for entry in std::fs::read_dir(&tests_dir)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(stem) = name.strip_suffix(".in") {
                if let Ok(k) = stem.parse::<u64>() {
                    indices.push(k);
                }
            }
        }
        indices.sort_unstable();
        for k in indices {
            let in_name = format!("tests/{k}.in");
            let out_name = format!("tests/{k}.out");
            let out_path = dir.join(&out_name);
            if !out_path.is_file() {
                return Err(BundleError::MissingFile(out_name));
            }
            let inputs = parse_test_file(&dir.join(&in_name), &in_name)?;
            let expected = parse_test_file(&out_path, &out_name)?;
            tests.push(TestCase { inputs, expected });
        }
    }

    let truth_path = dir.join("truth.c");
    let ground_truth = if truth_path.is_file() {
        Some(std::fs::read_to_string(truth_path)?)
    } else {
        None
    };

    let id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "bundle".to_string());

    Ok(ProblemBundle {
        id,
        nl_spec,
        formal_spec,
        signature,
        tests,
        ground_truth,
    })
}

/// Write a bundle back out as a directory. `load_bundle(write_bundle(b))`
/// is identity on all fields.
pub fn write_bundle(bundle: &ProblemBundle, dir: &Path) -> Result<(), BundleError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("spec.acsl"), &bundle.formal_spec)?;
    std::fs::write(dir.join("spec.md"), &bundle.nl_spec)?;
    std::fs::write(dir.join("signature.h"), &bundle.signature)?;
    if !bundle.tests.is_empty() {
        let tests_dir = dir.join("tests");
        std::fs::create_dir_all(&tests_dir)?;
        for (i, tc) in bundle.tests.iter().enumerate() {
            let render = |vals: &[ScalarValue]| {
                vals.iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            std::fs::write(tests_dir.join(format!("{}.in", i + 1)), render(&tc.inputs))?;
            std::fs::write(
                tests_dir.join(format!("{}.out", i + 1)),
                render(&tc.expected),
            )?;
        }
    }
    if let Some(truth) = &bundle.ground_truth {
        std::fs::write(dir.join("truth.c"), truth)?;
    }
    Ok(())
}

/// Result of checking a bundle's invariants. Violations are data, not
/// errors: an empty report means the bundle is usable by the pipeline.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn contains_word(haystack: &str, word: &str) -> bool {
    let is_word_char = |c: char| c.is_alphanumeric() || c == '_';
    let mut start = 0;
    while let Some(pos) = haystack[start..].find(word) {
        let abs = start + pos;
        let before_ok = abs == 0
            || !haystack[..abs]
                .chars()
                .next_back()
                .is_some_and(is_word_char);
        let after = abs + word.len();
        let after_ok = after == haystack.len()
            || !haystack[after..].chars().next().is_some_and(is_word_char);
        if before_ok && after_ok {
            return true;
        }
        start = abs + 1;
    }
    false
}

/// Check every [`ProblemBundle`] invariant and report all violations.
/// `require_tests` reflects whether the improvement loop is enabled.
pub fn validate_bundle(bundle: &ProblemBundle, require_tests: bool) -> ValidationReport {
    let mut violations = Vec::new();

    let signature = match bundle.parsed_signature() {
        Ok(sig) => Some(sig),
        Err(e) => {
            let detail = if e.reason.contains("non-void") {
                "non-void return".to_string()
            } else {
                e.reason.clone()
            };
            violations.push(format!("signature: {detail}"));
            None
        }
    };

    if count_clause_keywords(&bundle.formal_spec, &["ensures"]) == 0 {
        violations.push("formal spec has no `ensures` clause".to_string());
    }
    if count_clause_keywords(&bundle.formal_spec, &["requires", "assigns"]) == 0 {
        violations.push("formal spec has no `requires` or `assigns` clause".to_string());
    }

    if require_tests && bundle.tests.is_empty() {
        violations.push("tests are empty but the improvement loop is enabled".to_string());
    }

    if let Some(sig) = &signature {
        let n_inputs = sig.inputs().count();
        let n_outputs = sig.outputs().count();
        if !bundle.tests.is_empty() && n_outputs == 0 {
            violations.push("signature has no pointer parameter to carry outputs".to_string());
        }
        for (i, tc) in bundle.tests.iter().enumerate() {
            if tc.inputs.len() != n_inputs {
                violations.push(format!(
                    "test {}: {} inputs for {} non-pointer parameters (arity)",
                    i + 1,
                    tc.inputs.len(),
                    n_inputs
                ));
            }
            if tc.expected.len() != n_outputs {
                violations.push(format!(
                    "test {}: {} expected values for {} pointer parameters (arity)",
                    i + 1,
                    tc.expected.len(),
                    n_outputs
                ));
            }
        }
        for param in &sig.params {
            if !contains_word(&bundle.formal_spec, &param.name)
                && !contains_word(&bundle.nl_spec, &param.name)
            {
                violations.push(format!(
                    "parameter `{}` appears in neither the formal nor the NL spec",
                    param.name
                ));
            }
        }
    }

    ValidationReport { violations }
}

const CLAUSE_KEYWORDS: &[&str] = &[
    "requires",
    "ensures",
    "assigns",
    "assumes",
    "decreases",
    "behavior",
];

fn count_clause_keywords(text: &str, keywords: &[&str]) -> usize {
    let mut count = 0;
    for kw in keywords {
        let mut start = 0;
        while let Some(pos) = text[start..].find(kw) {
            let abs = start + pos;
            let is_word_char = |c: char| c.is_alphanumeric() || c == '_';
            let before_ok = abs == 0
                || !text[..abs]
                    .chars()
                    .next_back()
                    .is_some_and(is_word_char);
            let after = abs + kw.len();
            let after_ok =
                after == text.len() || !text[after..].chars().next().is_some_and(is_word_char);
            if before_ok && after_ok {
                count += 1;
            }
            start = abs + kw.len();
        }
    }
    count
}

/// Count ACSL clause keywords: `requires`, `ensures`, `assigns`, `assumes`,
/// `decreases`, `behavior`, `complete behaviors`, `disjoint behaviors`.
pub fn count_clauses(formal_spec: &str) -> usize {
    let mut count = count_clause_keywords(formal_spec, CLAUSE_KEYWORDS);
    for phrase in ["complete behaviors", "disjoint behaviors"] {
        let mut start = 0;
        while let Some(pos) = formal_spec[start..].find(phrase) {
            count += 1;
            start += pos + phrase.len();
        }
    }
    count
}

/// Lines of C code: non-blank lines after stripping `//` and `/* */`
/// comments.
pub fn count_loc(src: &str) -> usize {
    let mut out = String::with_capacity(src.len());
    let mut chars = src.chars().peekable();
    let mut in_block = false;
    let mut in_line = false;
    while let Some(c) = chars.next() {
        if in_block {
            if c == '*' && chars.peek() == Some(&'/') {
                chars.next();
                in_block = false;
            } else if c == '\n' {
                out.push('\n');
            }
            continue;
        }
        if in_line {
            if c == '\n' {
                in_line = false;
                out.push('\n');
            }
            continue;
        }
        if c == '/' {
            match chars.peek() {
                Some('*') => {
                    chars.next();
                    in_block = true;
                    continue;
                }
                Some('/') => {
                    chars.next();
                    in_line = true;
                    continue;
                }
                _ => {}
            }
        }
        out.push(c);
    }
    out.lines().filter(|l| !l.trim().is_empty()).count()
}

/// Compute size metrics. Pure: identical inputs give identical outputs.
pub fn bundle_stats(bundle: &ProblemBundle, tokenizer: &dyn Tokenizer) -> BundleStats {
    BundleStats {
        nl_tokens: tokenizer.count(&bundle.nl_spec),
        formal_loc: bundle.formal_spec.lines().count(),
        formal_clauses: count_clauses(&bundle.formal_spec),
        truth_loc: bundle.ground_truth.as_deref().map(count_loc),
        n_tests: bundle.tests.len(),
        tokenizer_name: tokenizer.name().to_string(),
    }
}
