//! Prompt assembly.
//!
//! Both prompt kinds share the same five-part layout: a system message (A),
//! an optional fixed one-shot example (B), the problem-specific task block
//! with specifications and signature (C), optional feedback on one earlier
//! candidate (D, improvement prompts only) and a call to action (E). The
//! static parts never vary between problems; only the task and feedback
//! blocks carry problem-specific content. Assembly is pure: no clock, no
//! randomness.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bundle::ProblemBundle;

/// Which specification texts enter the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecMode {
    Both,
    NlOnly,
    FormalOnly,
}

impl SpecMode {
    pub fn includes_nl(&self) -> bool {
        matches!(self, SpecMode::Both | SpecMode::NlOnly)
    }

    pub fn includes_formal(&self) -> bool {
        matches!(self, SpecMode::Both | SpecMode::FormalOnly)
    }
}

impl std::str::FromStr for SpecMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "both" => Ok(SpecMode::Both),
            "nl" | "nl_only" => Ok(SpecMode::NlOnly),
            "formal" | "formal_only" => Ok(SpecMode::FormalOnly),
            other => Err(format!("unknown spec mode `{other}` (both|nl|formal)")),
        }
    }
}

impl std::fmt::Display for SpecMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpecMode::Both => write!(f, "both"),
            SpecMode::NlOnly => write!(f, "nl"),
            SpecMode::FormalOnly => write!(f, "formal"),
        }
    }
}

/// Configuration of prompt assembly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub spec_mode: SpecMode,
    pub one_shot: bool,
    /// Extra constraint bullets appended to the task instructions.
    pub extra_constraints: Vec<String>,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            spec_mode: SpecMode::Both,
            one_shot: true,
            extra_constraints: vec!["Do not use loops.".to_string()],
        }
    }
}

/// Which gate the embedded candidate failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailStage {
    CompileFailed,
    VerifyFailed,
}

/// Feedback on exactly one incorrect candidate program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackBlock {
    pub candidate_source: String,
    pub diagnostics: String,
    pub stage: FailStage,
}

/// An assembled prompt. `feedback` is absent in initialization prompts and
/// present, with exactly one candidate, in improvement prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub system: String,
    pub shot: Option<String>,
    pub task: String,
    pub feedback: Option<FeedbackBlock>,
    pub call_to_action: String,
}

/// One chat message on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl Prompt {
    fn feedback_text(fb: &FeedbackBlock) -> String {
        let lead = match fb.stage {
            FailStage::CompileFailed => "The candidate program fails to compile. Compiler diagnostics:",
            FailStage::VerifyFailed => "The candidate program is not correct. Verifier feedback:",
        };
        format!(
            "Here is a previously generated candidate program that is not correct:\n```c\n{}\n```\n\n{}\n{}",
            fb.candidate_source.trim_end(),
            lead,
            fb.diagnostics.trim_end()
        )
    }

    /// Full prompt text in part order A, B, C, D, E with absent parts
    /// skipped. This is what snapshots and the session log record.
    pub fn render_text(&self) -> String {
        let mut parts: Vec<String> = vec![self.system.trim_end().to_string()];
        if let Some(shot) = &self.shot {
            parts.push(shot.trim_end().to_string());
        }
        parts.push(self.task.trim_end().to_string());
        if let Some(fb) = &self.feedback {
            parts.push(Self::feedback_text(fb));
        }
        parts.push(self.call_to_action.trim_end().to_string());
        parts.join("\n\n") + "\n"
    }

    /// Chat-completion form: the system part as the system message and the
    /// remaining parts, in order, as a single user message.
    pub fn to_messages(&self) -> Vec<ChatMessage> {
        let mut user_parts: Vec<String> = Vec::new();
        if let Some(shot) = &self.shot {
            user_parts.push(shot.trim_end().to_string());
        }
        user_parts.push(self.task.trim_end().to_string());
        if let Some(fb) = &self.feedback {
            user_parts.push(Self::feedback_text(fb));
        }
        user_parts.push(self.call_to_action.trim_end().to_string());
        vec![
            ChatMessage {
                role: "system".to_string(),
                content: self.system.trim_end().to_string(),
            },
            ChatMessage {
                role: "user".to_string(),
                content: user_parts.join("\n\n"),
            },
        ]
    }
}

/// The static prompt texts. The defaults are compiled in from `prompts/`;
/// a directory with the same file names can override them at run time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub system: String,
    pub one_shot: String,
    pub instructions: String,
    pub call_to_action: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            system: include_str!("../prompts/system.txt").to_string(),
            one_shot: include_str!("../prompts/one_shot.txt").to_string(),
            instructions: include_str!("../prompts/instructions.txt").to_string(),
            call_to_action: include_str!("../prompts/call_to_action.txt").to_string(),
        }
    }
}

impl PromptTemplates {
    /// Load `system.txt`, `one_shot.txt`, `instructions.txt` and
    /// `call_to_action.txt` from a directory.
    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        Ok(PromptTemplates {
            system: std::fs::read_to_string(dir.join("system.txt"))?,
            one_shot: std::fs::read_to_string(dir.join("one_shot.txt"))?,
            instructions: std::fs::read_to_string(dir.join("instructions.txt"))?,
            call_to_action: std::fs::read_to_string(dir.join("call_to_action.txt"))?,
        })
    }

    fn render_instructions(&self, extra_constraints: &[String]) -> String {
        const KEY: &str = "{{constraints}}";
        if extra_constraints.is_empty() {
            self.instructions
                .lines()
                .filter(|l| !l.contains(KEY))
                .collect::<Vec<_>>()
                .join("\n")
        } else {
            let bullets = extra_constraints
                .iter()
                .map(|c| format!("- {c}"))
                .collect::<Vec<_>>()
                .join("\n");
            self.instructions.replace(KEY, &bullets)
        }
    }
}

fn render_task(bundle: &ProblemBundle, cfg: &PromptConfig, templates: &PromptTemplates) -> String {
    let mut task = String::new();
    if cfg.spec_mode.includes_nl() {
        task.push_str("Natural language specification:\n");
        task.push_str(bundle.nl_spec.trim_end());
        task.push_str("\n\n");
    }
    if cfg.spec_mode.includes_formal() {
        task.push_str("Formal specification (ACSL):\n");
        task.push_str(bundle.formal_spec.trim_end());
        task.push_str("\n\n");
    }
    task.push_str("Function signature:\n");
    task.push_str(bundle.signature.trim_end());
    task.push_str("\n\n");
    task.push_str(templates.render_instructions(&cfg.extra_constraints).trim_end());
    task
}

/// Assemble the prompt for the initial code generation step: parts A, C, E,
/// plus B when `cfg.one_shot` is set. Never carries feedback.
pub fn build_initialization_prompt(
    bundle: &ProblemBundle,
    cfg: &PromptConfig,
    templates: &PromptTemplates,
) -> Prompt {
    Prompt {
        system: templates.system.clone(),
        shot: cfg.one_shot.then(|| templates.one_shot.clone()),
        task: render_task(bundle, cfg, templates),
        feedback: None,
        call_to_action: templates.call_to_action.clone(),
    }
}

/// Assemble an improvement prompt: the initialization prompt plus part D
/// carrying exactly one incorrect candidate and its diagnostics.
pub fn build_improvement_prompt(
    bundle: &ProblemBundle,
    cfg: &PromptConfig,
    templates: &PromptTemplates,
    feedback: FeedbackBlock,
) -> Prompt {
    debug_assert!(!feedback.diagnostics.is_empty());
    let mut prompt = build_initialization_prompt(bundle, cfg, templates);
    prompt.feedback = Some(feedback);
    prompt
}
