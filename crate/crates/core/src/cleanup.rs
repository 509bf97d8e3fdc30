//! Cleanup: after the block permutation, every bucket may have partial data
//! at both of its ends and elements left in the thread buffers. Cleanup
//! moves them into the exact bucket range.

use crate::local::BufferSet;
use crate::permute::Delimiters;
use crate::raw::RawSlice;

/// Contiguous range of buckets cleaned up by thread `tid`; the first
/// threads get `ceil(K / t)` buckets each.
pub fn assign_buckets(num_buckets: usize, t: usize, tid: usize) -> (usize, usize) {
    let per = num_buckets.div_ceil(t);
    let lo = (tid * per).min(num_buckets);
    (lo, (lo + per).min(num_buckets))
}

/// Everything cleanup needs to know about one finished permutation.
/// Positions are relative to `begin`.
pub(crate) struct CleanupView<'v, 'a, T> {
    pub data: RawSlice<'a, T>,
    pub begin: usize,
    pub b: usize,
    pub delims: &'v Delimiters,
    /// Write cursor of every bucket, in blocks.
    pub write_blocks: &'v [usize],
    pub overflow: &'v [T],
    pub overflow_bucket: Option<usize>,
    pub residuals: &'v [&'v BufferSet<T>],
    /// Copy of `[boundary, boundary + head.len())` taken before any thread
    /// started writing.
    pub head: &'v [T],
    /// Start of the next thread's buckets; positions from here on are read from `head`.
    pub boundary: usize,
}

impl<T: Copy> CleanupView<'_, '_, T> {
    /// End of the blocks bucket `j` received during permutation.
    pub fn written_end(&self, j: usize) -> usize {
        let w = self.write_blocks[j] * self.b;
        if self.overflow_bucket == Some(j) {
            w - self.b
        } else {
            w
        }
    }

    /// Moves the stray elements of bucket `j` into `[e_j, e_{j+1})`. Returns
    /// the number of element writes.
    pub fn bucket(&self, j: usize) -> u64 {
        let d = &self.delims;
        let (ej, ej1, dj) = (d.exact[j], d.exact[j + 1], d.block[j]);
        let w = self.written_end(j).max(dj);
        let misplaced = ej1.max(dj)..w;
        let head_dst = ej..dj.min(ej1);
        let tail_dst = w.min(ej1)..ej1;

        let from_array = misplaced.clone().map(|p| {
            if p >= self.boundary {
                self.head[p - self.boundary]
            } else {
                // SAFETY: below the boundary only this thread touches the array,
                // and misplaced positions are never destinations
                unsafe { self.data.get(self.begin + p) }
            }
        });
        let from_buffers = self.residuals.iter().flat_map(|r| r.contents(j).iter().copied());
        let from_overflow = (self.overflow_bucket == Some(j))
            .then_some(self.overflow)
            .into_iter()
            .flatten()
            .copied();
        let mut sources = from_array.chain(from_buffers).chain(from_overflow);

        let mut writes = 0;
        for p in head_dst.chain(tail_dst) {
            let x = sources.next().expect("cleanup: fewer elements than destination slots");
            // SAFETY: destinations lie in [e_j, e_{j+1}), owned by this thread
            unsafe { self.data.set(self.begin + p, x) };
            writes += 1;
        }
        assert!(sources.next().is_none(), "cleanup: more elements than destination slots");
        writes
    }
}

/// Swaps the maximum of `v` to `v[0]` and the minimum to `v[1]`, so that
/// the bucket can later be found by searching for its first element and
/// recognized as constant by comparing the first two. Returns element writes.
pub(crate) fn mark_bucket<T: Copy, F: Fn(&T, &T) -> bool>(v: &mut [T], less: &F) -> u64 {
    if v.len() < 2 {
        return 0;
    }
    let (mut hi, mut lo) = (0, 0);
    for i in 1..v.len() {
        if less(&v[hi], &v[i]) {
            hi = i;
        }
        if less(&v[i], &v[lo]) {
            lo = i;
        }
    }
    let mut writes = 0;
    if hi != 0 {
        v.swap(0, hi);
        writes += 2;
        if lo == 0 {
            lo = hi;
        }
    }
    if lo != 1 {
        v.swap(1, lo);
        writes += 2;
    }
    writes
}
