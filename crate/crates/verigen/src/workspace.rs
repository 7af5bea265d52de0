//! Scratch workspaces and bounded subprocess execution.
//!
//! Every candidate is compiled, verified and tested inside its own scratch
//! directory. Commands always run with the workspace as their working
//! directory and are passed relative file names, so diagnostics never embed
//! absolute temp paths and session logs stay byte-reproducible.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

/// A single-owner scratch directory.
#[derive(Debug)]
pub struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new() -> std::io::Result<Self> {
        Ok(Workspace {
            dir: tempfile::TempDir::with_prefix("verigen-")?,
        })
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn write_file(&self, name: &str, contents: &str) -> std::io::Result<PathBuf> {
        let path = self.dir.path().join(name);
        std::fs::write(&path, contents)?;
        Ok(path)
    }
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("tool `{0}` not found on PATH")]
    ToolMissing(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("output reader thread panicked")]
    ReaderThread,
}

/// Captured outcome of one subprocess run.
#[derive(Debug)]
pub struct ExecOutput {
    /// Exit code, `None` if killed by a signal or by the timeout.
    pub code: Option<i32>,
    pub stdout: String,
    pub stderr: String,
    pub duration: Duration,
    pub timed_out: bool,
}

impl ExecOutput {
    pub fn success(&self) -> bool {
        !self.timed_out && self.code == Some(0)
    }
}

/// Run `program args..` with `cwd` as working directory, capturing output.
/// The child is killed once `timeout` elapses; a timeout is data, not an
/// error, so gate code can record it.
pub fn run_tool(
    program: &str,
    args: &[String],
    cwd: &Path,
    timeout: Duration,
) -> Result<ExecOutput, ExecError> {
    let mut cmd = Command::new(program);
    cmd.args(args)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());

    let mut child = cmd.spawn().map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            ExecError::ToolMissing(program.to_string())
        } else {
            ExecError::Io(e)
        }
    })?;

    let stdout = child.stdout.take().expect("stdout piped");
    let stderr = child.stderr.take().expect("stderr piped");
    let out_handle = thread::spawn(move || read_all(stdout));
    let err_handle = thread::spawn(move || read_all(stderr));

    let start = Instant::now();
    let (code, timed_out) = wait_with_timeout(&mut child, timeout)?;
    let duration = start.elapsed();

    let stdout = out_handle.join().map_err(|_| ExecError::ReaderThread)??;
    let stderr = err_handle.join().map_err(|_| ExecError::ReaderThread)??;

    Ok(ExecOutput {
        code,
        stdout: String::from_utf8_lossy(&stdout).into_owned(),
        stderr: String::from_utf8_lossy(&stderr).into_owned(),
        duration,
        timed_out,
    })
}

fn read_all<R: Read>(mut reader: R) -> std::io::Result<Vec<u8>> {
    let mut buf = Vec::new();
    reader.read_to_end(&mut buf)?;
    Ok(buf)
}

fn wait_with_timeout(
    child: &mut Child,
    timeout: Duration,
) -> Result<(Option<i32>, bool), ExecError> {
    let start = Instant::now();
    loop {
        if let Some(status) = child.try_wait()? {
            return Ok((status.code(), false));
        }
        if start.elapsed() >= timeout {
            child.kill().ok();
            let _ = child.wait();
            return Ok((None, true));
        }
        thread::sleep(Duration::from_millis(5));
    }
}

/// Counting semaphore used to bound concurrent verifier runs.
pub struct Semaphore {
    state: std::sync::Mutex<usize>,
    cv: std::sync::Condvar,
}

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Semaphore {
            state: std::sync::Mutex::new(permits.max(1)),
            cv: std::sync::Condvar::new(),
        }
    }

    pub fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut n = self.state.lock().unwrap();
        while *n == 0 {
            n = self.cv.wait(n).unwrap();
        }
        *n -= 1;
        SemaphoreGuard { sem: self }
    }
}

pub struct SemaphoreGuard<'a> {
    sem: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut n = self.sem.state.lock().unwrap();
        *n += 1;
        self.sem.cv.notify_one();
    }
}
