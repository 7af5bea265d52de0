//! Scripted provider: replays a directory of reply files.
//!
//! Files are consumed in lexicographic name order, `n` per call. Together
//! with a fixed selection seed this makes whole sessions byte-reproducible.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use super::{LlmError, Provider, RawResponse, SamplingParams};
use crate::prompt::Prompt;

pub struct MockProvider {
    files: Vec<PathBuf>,
    cursor: Mutex<usize>,
}

impl MockProvider {
    /// Index the reply files of `dir`. Only regular files are scripted;
    /// order is by file name.
    pub fn new(dir: &Path) -> std::io::Result<Self> {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        Ok(MockProvider {
            files,
            cursor: Mutex::new(0),
        })
    }

    pub fn remaining(&self) -> usize {
        self.files.len() - *self.cursor.lock().unwrap()
    }
}

impl Provider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn sample(&self, _prompt: &Prompt, params: &SamplingParams) -> Result<Vec<RawResponse>, LlmError> {
        let start = Instant::now();
        let mut cursor = self.cursor.lock().unwrap();
        let available = self.files.len() - *cursor;
        if available < params.n {
            return Err(LlmError::ScriptExhausted {
                needed: params.n,
                available,
            });
        }
        let mut responses = Vec::with_capacity(params.n);
        for path in &self.files[*cursor..*cursor + params.n] {
            let text = std::fs::read_to_string(path)
                .map_err(|e| LlmError::Protocol(format!("unreadable script file: {e}")))?;
            responses.push(RawResponse {
                text,
                provider: "mock".to_string(),
                latency_ms: start.elapsed().as_millis() as u64,
                usage: None,
            });
        }
        *cursor += params.n;
        Ok(responses)
    }
}
