//! Instrumentation counters.
//!
//! Every worker thread owns one [`Counters`] value; they are merged when the
//! sort returns. `element_copies` counts element writes into the input array
//! only: copies into thread-local buffers stay in cache and are not part of
//! the memory traffic this counter approximates.

use std::cell::Cell;
use std::ops::AddAssign;
use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    /// Element writes into the input array.
    pub element_copies: u64,
    /// Comparator invocations.
    pub comparisons: u64,
    /// Whole blocks moved by the block permutation phase (including the
    /// empty-block movement that precedes it).
    pub block_moves: u64,
    /// Peak auxiliary memory in bytes.
    pub peak_aux_bytes: u64,
    /// Number of partition steps executed.
    pub partition_steps: u64,
    /// Deepest partition-step nesting (root step = 1).
    pub max_recursion_depth: u64,
    /// Partition steps whose array writes exceeded `3 * n + k * b * t`.
    pub copy_bound_violations: u64,
    /// Block moves of the very first partition step.
    pub first_step_block_moves: u64,
    /// Times a writer found an empty destination while other threads were
    /// reading from the same bucket.
    pub reader_waits: u64,
}

impl Counters {
    /// Merge another thread's counters. Peaks are combined by the caller,
    /// depths by maximum.
    pub fn merge(&mut self, other: &Counters) {
        self.element_copies += other.element_copies;
        self.comparisons += other.comparisons;
        self.block_moves += other.block_moves;
        self.partition_steps += other.partition_steps;
        self.max_recursion_depth = self.max_recursion_depth.max(other.max_recursion_depth);
        self.copy_bound_violations += other.copy_bound_violations;
        self.reader_waits += other.reader_waits;
    }
}

impl AddAssign<&Counters> for Counters {
    fn add_assign(&mut self, rhs: &Counters) {
        self.merge(rhs);
    }
}

/// Tracks current and peak auxiliary memory of one sort, shared by all workers.
#[derive(Debug, Default)]
pub(crate) struct AuxTracker {
    current: AtomicU64,
    peak: AtomicU64,
}

impl AuxTracker {
    pub(crate) fn alloc(&self, bytes: usize) {
        let c = self.current.fetch_add(bytes as u64, Ordering::Relaxed) + bytes as u64;
        self.peak.fetch_max(c, Ordering::Relaxed);
    }

    pub(crate) fn free(&self, bytes: usize) {
        self.current.fetch_sub(bytes as u64, Ordering::Relaxed);
    }

    pub(crate) fn peak(&self) -> u64 {
        self.peak.load(Ordering::Relaxed)
    }
}

/// Comparator wrapper counting its invocations.
pub(crate) struct CountingLess<'a, F> {
    less: &'a F,
    count: Cell<u64>,
}

impl<'a, F> CountingLess<'a, F> {
    pub(crate) fn new(less: &'a F) -> Self {
        CountingLess {
            less,
            count: Cell::new(0),
        }
    }

    #[inline(always)]
    pub(crate) fn less<T>(&self, a: &T, b: &T) -> bool
    where
        F: Fn(&T, &T) -> bool,
    {
        self.count.set(self.count.get() + 1);
        (self.less)(a, b)
    }

    pub(crate) fn take(&self) -> u64 {
        self.count.replace(0)
    }
}
