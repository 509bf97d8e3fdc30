//! Tuning parameters for a sort invocation.

use std::num::NonZeroUsize;

use thiserror::Error;

/// Environment variable overriding the default worker thread count.
pub const THREADS_ENV: &str = "IPS4O_THREADS";

/// Target size of one block in bytes.
const BLOCK_BYTES_LOG2: u32 = 11;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("k_max not a power of two (got {0})")]
    BucketsNotPowerOfTwo(usize),
    #[error("k_max must be at least 2 (got {0})")]
    TooFewBuckets(usize),
    #[error("block_elems must be ≥1")]
    ZeroBlockSize,
    #[error("n0 must be ≥1")]
    ZeroBaseCase,
    #[error("threads must be ≥1")]
    ZeroThreads,
    #[error("beta must be positive and finite (got {0})")]
    BadBeta(f64),
    #[error("element_bytes must be ≥1")]
    ZeroElementBytes,
    #[error("strict_in_place requires threads = 1 (got {0})")]
    StrictNeedsOneThread(usize),
}

/// All knobs of the sorter.
///
/// The oversampling factor is not stored: it is a function of the
/// subproblem size, see [`SortConfig::alpha_of`].
#[derive(Debug, Clone, PartialEq)]
pub struct SortConfig {
    /// Maximum number of buckets per partition step (without equality buckets).
    pub k_max: usize,
    /// Subproblems with at least `beta * n / threads` elements are partitioned in parallel.
    pub beta: f64,
    /// Base case size.
    pub n0: usize,
    /// Elements per block.
    pub block_elems: usize,
    pub threads: usize,
    /// Use the constant-space sequential driver instead of recursion.
    pub strict_in_place: bool,
    /// Stored width of one element.
    pub element_bytes: usize,
    /// Seed of the sampling generator. Output does not depend on it, layouts do.
    pub seed: u64,
}

impl SortConfig {
    /// Oversampling factor for a subproblem of `n` elements: `max(1, round(0.2 * log2 n))`.
    pub fn alpha_of(&self, n: usize) -> usize {
        alpha_of(n)
    }

    /// Subproblems of at most this many elements are insertion sorted.
    pub fn base_case_threshold(&self) -> usize {
        2 * self.n0
    }

    /// Maximum bucket count including equality buckets.
    pub fn max_total_buckets(&self) -> usize {
        2 * self.k_max
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        validate(self)
    }

    /// Returns a copy with a different thread count.
    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn with_strict_in_place(mut self, strict: bool) -> Self {
        self.strict_in_place = strict;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

pub fn alpha_of(n: usize) -> usize {
    if n < 2 {
        return 1;
    }
    let a = (0.2 * (n as f64).log2()).round() as usize;
    a.max(1)
}

/// `max(1, 2^floor(11 - log2 s))`, i.e. blocks of about 2 KiB.
pub fn default_block_elems(element_bytes: usize) -> usize {
    let s = element_bytes.max(1);
    // floor(11 - log2 s) == 11 - ceil(log2 s)
    let ceil_log = usize::BITS - (s - 1).leading_zeros();
    let ceil_log = if s == 1 { 0 } else { ceil_log };
    if ceil_log >= BLOCK_BYTES_LOG2 {
        1
    } else {
        1 << (BLOCK_BYTES_LOG2 - ceil_log)
    }
}

/// Default configuration for sorting `n` elements of `element_bytes` bytes each.
///
/// `n` is accepted for symmetry with [`SortConfig::alpha_of`]; none of the
/// stored fields depend on it.
pub fn default_config(_n: usize, element_bytes: usize, threads: usize) -> SortConfig {
    SortConfig {
        k_max: 256,
        beta: 1.0,
        n0: 16,
        block_elems: default_block_elems(element_bytes),
        threads: threads.max(1),
        strict_in_place: false,
        element_bytes: element_bytes.max(1),
        seed: 0x9e37_79b9_7f4a_7c15,
    }
}

/// Thread count from `IPS4O_THREADS`, falling back to the hardware parallelism.
pub fn default_threads() -> usize {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        if let Ok(t) = v.trim().parse::<usize>() {
            if t >= 1 {
                return t;
            }
        }
    }
    std::thread::available_parallelism()
        .map(NonZeroUsize::get)
        .unwrap_or(1)
}

pub fn validate(cfg: &SortConfig) -> Result<(), ConfigError> {
    if cfg.k_max < 2 {
        return Err(ConfigError::TooFewBuckets(cfg.k_max));
    }
    if !cfg.k_max.is_power_of_two() {
        return Err(ConfigError::BucketsNotPowerOfTwo(cfg.k_max));
    }
    if cfg.block_elems == 0 {
        return Err(ConfigError::ZeroBlockSize);
    }
    if cfg.n0 == 0 {
        return Err(ConfigError::ZeroBaseCase);
    }
    if cfg.threads == 0 {
        return Err(ConfigError::ZeroThreads);
    }
    if !(cfg.beta > 0.0 && cfg.beta.is_finite()) {
        return Err(ConfigError::BadBeta(cfg.beta));
    }
    if cfg.element_bytes == 0 {
        return Err(ConfigError::ZeroElementBytes);
    }
    if cfg.strict_in_place && cfg.threads != 1 {
        return Err(ConfigError::StrictNeedsOneThread(cfg.threads));
    }
    Ok(())
}
