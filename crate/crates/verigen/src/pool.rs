//! Candidate pool and selection policy.
//!
//! Every candidate of a session is kept with its gate results. The candidate
//! to repair next is drawn uniformly at random among those tied for the
//! highest unit-test pass rate. The draw is seeded from the session seed and
//! the number of prior draws, so a recorded session replays identically.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compile::CompileReport;
use crate::harness::TestReport;
use crate::verify::{Verdict, VerifyReport};

/// One generated C function with its provenance and gate results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    /// 0 = initial generation, k = k-th improvement round.
    pub iteration: usize,
    pub sample_index: usize,
    pub source: String,
    pub compile: Option<CompileReport>,
    pub verify: Option<VerifyReport>,
    pub tests: Option<TestReport>,
}

impl Candidate {
    pub fn pass_rate(&self) -> f64 {
        self.tests.as_ref().map(|t| t.pass_rate).unwrap_or(0.0)
    }

    pub fn compiled_ok(&self) -> bool {
        self.compile.as_ref().is_some_and(|c| c.ok)
    }

    pub fn is_verified(&self) -> bool {
        self.verify
            .as_ref()
            .is_some_and(|v| v.verdict == Verdict::Verified)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PoolError {
    #[error("pool is empty")]
    EmptyPool,
    #[error("duplicate candidate id `{0}`")]
    DuplicateId(String),
    #[error("candidate `{0}` has a verify report but no successful compile")]
    VerifyWithoutCompile(String),
}

/// Ordered store of all candidates of one session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Pool {
    candidates: Vec<Candidate>,
    rng_seed: u64,
    draws: u64,
}

impl Pool {
    pub fn new(rng_seed: u64) -> Pool {
        Pool {
            candidates: Vec::new(),
            rng_seed,
            draws: 0,
        }
    }

    pub fn push(&mut self, candidate: Candidate) -> Result<(), PoolError> {
        if self.candidates.iter().any(|c| c.id == candidate.id) {
            return Err(PoolError::DuplicateId(candidate.id));
        }
        if candidate.verify.is_some() && !candidate.compiled_ok() {
            return Err(PoolError::VerifyWithoutCompile(candidate.id));
        }
        self.candidates.push(candidate);
        Ok(())
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Highest pass rate in the pool.
    pub fn max_pass_rate(&self) -> Option<f64> {
        self.candidates
            .iter()
            .map(|c| c.pass_rate())
            .fold(None, |acc, r| match acc {
                None => Some(r),
                Some(m) => Some(if r > m { r } else { m }),
            })
    }

    /// Draw uniformly among the candidates whose pass rate equals the pool
    /// maximum. Consumes one draw from the seeded stream.
    pub fn select_best(&mut self) -> Result<&Candidate, PoolError> {
        let max = self.max_pass_rate().ok_or(PoolError::EmptyPool)?;
        let tied: Vec<usize> = self
            .candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| c.pass_rate() == max)
            .map(|(i, _)| i)
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.rng_seed, self.draws));
        self.draws += 1;
        let pick = tied[rng.random_range(0..tied.len())];
        Ok(&self.candidates[pick])
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }
}

/// Mix the session seed with the draw counter into one stream seed.
fn splitmix64(seed: u64, draw: u64) -> u64 {
    let mut z = seed
        .wrapping_add(draw.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
