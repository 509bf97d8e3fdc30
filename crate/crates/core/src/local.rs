//! Local classification: each thread scans its stripe, collects elements in
//! per-bucket buffer blocks and writes full buffers back to the front of
//! the stripe.
//!
//! Afterwards a stripe consists of full, bucket-homogeneous blocks followed
//! by empty space; the remaining elements stay in the buffers.

use crate::classifier::{Classifier, BATCH};

/// One buffer block per bucket, owned by one thread.
#[derive(Debug, Clone)]
pub struct BufferSet<T> {
    data: Vec<T>,
    fill: Vec<usize>,
    block: usize,
}

impl<T: Copy> BufferSet<T> {
    /// `filler` initializes the storage; it is never observed.
    pub fn new(max_buckets: usize, block: usize, filler: T) -> Self {
        BufferSet {
            data: vec![filler; max_buckets * block],
            fill: vec![0; max_buckets],
            block,
        }
    }

    pub fn block_elems(&self) -> usize {
        self.block
    }

    pub fn max_buckets(&self) -> usize {
        self.fill.len()
    }

    /// Empties the first `buckets` buffers.
    pub fn reset(&mut self, buckets: usize) {
        assert!(buckets <= self.fill.len());
        self.fill[..buckets].iter_mut().for_each(|f| *f = 0);
    }

    pub fn fill(&self, bucket: usize) -> usize {
        self.fill[bucket]
    }

    #[inline(always)]
    pub fn is_full(&self, bucket: usize) -> bool {
        self.fill[bucket] == self.block
    }

    /// Elements currently held for `bucket`.
    pub fn contents(&self, bucket: usize) -> &[T] {
        let s = bucket * self.block;
        &self.data[s..s + self.fill[bucket]]
    }

    #[inline(always)]
    fn push(&mut self, bucket: usize, x: T) {
        let f = self.fill[bucket];
        debug_assert!(f < self.block);
        self.data[bucket * self.block + f] = x;
        self.fill[bucket] = f + 1;
    }

    pub fn heap_bytes(&self) -> usize {
        self.data.capacity() * std::mem::size_of::<T>() + self.fill.capacity() * std::mem::size_of::<usize>()
    }
}

/// Result of scanning one stripe. Positions are relative to the stripe start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stripe {
    /// Elements in the stripe.
    pub len: usize,
    /// End of the flushed full blocks.
    pub write: usize,
    /// Element writes into the stripe.
    pub copies: u64,
}

/// Writes the full buffer of `bucket` to `stripe[write..write + b]`.
///
/// `scanned` is the number of elements consumed so far; flushing never
/// reaches into unscanned data.
#[inline]
pub fn flush_buffer<T: Copy>(stripe: &mut [T], write: &mut usize, scanned: usize, bucket: usize, buffers: &mut BufferSet<T>) {
    let b = buffers.block;
    assert!(buffers.is_full(bucket), "flushing a buffer that is not full");
    assert!(*write + b <= scanned, "flush would overwrite unscanned elements");
    let s = bucket * b;
    stripe[*write..*write + b].copy_from_slice(&buffers.data[s..s + b]);
    *write += b;
    buffers.fill[bucket] = 0;
}

/// Classifies every element of `stripe` into `buffers`, flushing full
/// buffers to the stripe front. `counts` receives per-bucket element counts.
///
/// `buffers` must be empty for all buckets of `classifier`.
pub fn classify_stripe<T: Copy, F: Fn(&T, &T) -> bool>(
    stripe: &mut [T],
    classifier: &Classifier<T>,
    buffers: &mut BufferSet<T>,
    counts: &mut [usize],
    less: &F,
) -> Stripe {
    let nb = classifier.num_buckets();
    debug_assert!((0..nb).all(|i| buffers.fill(i) == 0));
    counts[..nb].iter_mut().for_each(|c| *c = 0);
    let b = buffers.block;
    let n = stripe.len();
    let mut write = 0usize;
    let mut copies = 0u64;
    let mut idx = [0usize; BATCH];
    let mut i = 0;
    while i < n {
        let m = BATCH.min(n - i);
        classifier.classify_batch_into(&stripe[i..i + m], &mut idx[..m], less);
        for (j, &bucket) in idx[..m].iter().enumerate() {
            // read before a flush can touch earlier positions; flushes stay below i + j
            let x = stripe[i + j];
            if buffers.is_full(bucket) {
                flush_buffer(stripe, &mut write, i + j, bucket, buffers);
                copies += b as u64;
            }
            buffers.push(bucket, x);
            counts[bucket] += 1;
        }
        i += m;
    }
    Stripe { len: n, write, copies }
}
