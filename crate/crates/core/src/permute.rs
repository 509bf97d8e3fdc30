//! Block permutation: moves the full blocks produced by local
//! classification into their buckets.
//!
//! Every bucket `i` owns the block-aligned range `[d_i, d_{i+1})` and a
//! pair of block cursors `(w_i, r_i)`. Blocks before `w_i` are final,
//! blocks in `[w_i, r_i]` still have to be looked at, blocks after
//! `max(w_i, r_i + 1)` are empty. Threads take blocks from the read end of
//! their primary bucket and swap them into place at the write end of the
//! destination bucket until every bucket is drained.

use std::sync::atomic::{AtomicU32, AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::classifier::Classifier;
use crate::raw::RawSlice;

/// Bucket boundaries of one partition step, relative to the step start.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Delimiters {
    /// Element-exact bucket starts, `K + 1` entries.
    pub exact: Vec<usize>,
    /// Bucket starts rounded up to the next block, `K + 1` entries.
    pub block: Vec<usize>,
}

impl Delimiters {
    pub fn num_buckets(&self) -> usize {
        self.exact.len().saturating_sub(1)
    }
}

/// Prefix sums over the per-bucket totals, offset by `lo`, with block
/// delimiters rounded up to multiples of `b` on the grid starting at `lo`.
pub fn compute_delimiters(totals: &[usize], lo: usize, b: usize) -> Delimiters {
    let mut d = Delimiters::default();
    compute_delimiters_into(totals, lo, b, &mut d);
    d
}

pub(crate) fn compute_delimiters_into(totals: &[usize], lo: usize, b: usize, d: &mut Delimiters) {
    d.exact.clear();
    d.block.clear();
    let mut sum = 0usize;
    for &c in totals.iter().chain(std::iter::once(&0)) {
        d.exact.push(lo + sum);
        d.block.push(lo + sum.div_ceil(b) * b);
        sum += c;
    }
}

/// Stripe of one thread after local classification, positions relative to the step start.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StripeSpan {
    pub begin: usize,
    /// End of the full blocks.
    pub write: usize,
    pub end: usize,
}

/// Splits `n` elements into `t` stripes of whole blocks; earlier stripes get
/// the extra blocks and the last stripe also owns the partial tail block.
pub fn stripe_bounds(n: usize, b: usize, t: usize, s: usize) -> (usize, usize) {
    let full = n / b;
    let per = full / t;
    let extra = full % t;
    let begin = b * (s * per + s.min(extra));
    let end = if s + 1 == t { n } else { begin + b * (per + usize::from(s < extra)) };
    (begin, end)
}

const HALF: u32 = 32;

/// Write and read cursor of one bucket, in blocks, updated as one word.
#[derive(Debug, Default)]
#[repr(align(64))]
pub struct BucketPointer {
    word: AtomicU64,
    readers: AtomicU32,
}

#[inline(always)]
fn pack(w: i32, r: i32) -> u64 {
    ((w as u32 as u64) << HALF) | (r as u32 as u64)
}

#[inline(always)]
fn unpack(x: u64) -> (i32, i32) {
    ((x >> HALF) as u32 as i32, x as u32 as i32)
}

impl BucketPointer {
    pub fn set(&self, w: i32, r: i32) {
        self.word.store(pack(w, r), Ordering::SeqCst);
        self.readers.store(0, Ordering::SeqCst);
    }

    /// Consistent snapshot of `(w, r)`.
    pub fn load(&self) -> (i32, i32) {
        unpack(self.word.load(Ordering::SeqCst))
    }

    /// Claims the block at `r` and decrements `r`, registering the caller as
    /// a reader. Returns `None` (and unregisters) if no unprocessed block is
    /// left. A successful claim must be followed by [`stop_read`](Self::stop_read).
    pub fn start_read(&self) -> Option<i32> {
        self.readers.fetch_add(1, Ordering::SeqCst);
        let mut cur = self.word.load(Ordering::SeqCst);
        loop {
            let (w, r) = unpack(cur);
            if r < w {
                self.readers.fetch_sub(1, Ordering::SeqCst);
                return None;
            }
            match self
                .word
                .compare_exchange_weak(cur, pack(w, r - 1), Ordering::SeqCst, Ordering::SeqCst)
            {
                Ok(_) => return Some(r),
                Err(x) => cur = x,
            }
        }
    }

    pub fn stop_read(&self) {
        self.readers.fetch_sub(1, Ordering::SeqCst);
    }

    /// Advances `w`, returning the previous `(w, r)`.
    pub fn advance_write(&self) -> (i32, i32) {
        unpack(self.word.fetch_add(1 << HALF, Ordering::SeqCst))
    }

    pub fn is_being_read(&self) -> bool {
        self.readers.load(Ordering::SeqCst) != 0
    }
}

/// Shared state of the permutation phase of one step.
pub(crate) struct PermuteCtx<'s, 'a, T, C> {
    pub data: RawSlice<'a, T>,
    /// Absolute start of the step.
    pub begin: usize,
    pub n: usize,
    pub b: usize,
    pub classifier: &'s Classifier<T>,
    pub pointers: &'s [BucketPointer],
    pub overflow: &'s Mutex<Vec<T>>,
    pub overflow_bucket: &'s AtomicUsize,
    pub less: &'s C,
}

/// Outcome of one [`PermuteWorker::step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermuteStep {
    /// A block was read from the primary bucket into a swap buffer.
    Acquired,
    /// The held block was written over an unprocessed block, which is now held.
    Swapped,
    /// The held block was written to an empty slot.
    Placed,
    /// The primary bucket is drained; moved on to the next one.
    Advanced,
    Done,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct PermuteStats {
    pub block_moves: u64,
    pub copies: u64,
    pub reader_waits: u64,
}

/// Per-thread state machine of the permutation loop.
#[derive(Debug, Clone)]
pub(crate) struct PermuteWorker {
    primary: usize,
    remaining: usize,
    /// Index of the occupied swap buffer and its destination bucket.
    held: Option<(usize, usize)>,
    pub stats: PermuteStats,
}

impl PermuteWorker {
    /// Thread `tid` of `t` starts at bucket `ceil(tid * K / t)`.
    pub fn new(tid: usize, t: usize, num_buckets: usize) -> Self {
        PermuteWorker {
            primary: (tid * num_buckets).div_ceil(t) % num_buckets,
            remaining: num_buckets,
            held: None,
            stats: PermuteStats::default(),
        }
    }

    /// Runs until every bucket is drained.
    pub fn run<T: Copy, C: Fn(&T, &T) -> bool>(&mut self, ctx: &PermuteCtx<'_, '_, T, C>, swap: &mut [Vec<T>; 2]) {
        while self.step(ctx, swap) != PermuteStep::Done {}
    }

    pub fn step<T: Copy, C: Fn(&T, &T) -> bool>(&mut self, ctx: &PermuteCtx<'_, '_, T, C>, swap: &mut [Vec<T>; 2]) -> PermuteStep {
        match self.held {
            None => self.acquire(ctx, swap),
            Some((s, dest)) => self.place(ctx, swap, s, dest),
        }
    }

    fn acquire<T: Copy, C: Fn(&T, &T) -> bool>(&mut self, ctx: &PermuteCtx<'_, '_, T, C>, swap: &mut [Vec<T>; 2]) -> PermuteStep {
        if self.remaining == 0 {
            return PermuteStep::Done;
        }
        let bp = &ctx.pointers[self.primary];
        match bp.start_read() {
            Some(r) => {
                let pos = ctx.begin + r as usize * ctx.b;
                // SAFETY: block r was claimed exclusively; writers wait for readers
                unsafe { ctx.data.read_into(pos, &mut swap[0]) };
                bp.stop_read();
                let dest = ctx.classifier.classify(&swap[0][0], ctx.less);
                self.held = Some((0, dest));
                PermuteStep::Acquired
            }
            None => {
                self.primary = (self.primary + 1) % ctx.pointers.len();
                self.remaining -= 1;
                if self.remaining == 0 {
                    PermuteStep::Done
                } else {
                    PermuteStep::Advanced
                }
            }
        }
    }

    fn place<T: Copy, C: Fn(&T, &T) -> bool>(
        &mut self,
        ctx: &PermuteCtx<'_, '_, T, C>,
        swap: &mut [Vec<T>; 2],
        s: usize,
        dest: usize,
    ) -> PermuteStep {
        let bp = &ctx.pointers[dest];
        let b = ctx.b;
        loop {
            let (w, r) = bp.advance_write();
            let pos = ctx.begin + w as usize * b;
            if w > r {
                // empty slot
                if (w as usize + 1) * b > ctx.n {
                    ctx.overflow.lock().unwrap().copy_from_slice(&swap[s]);
                    ctx.overflow_bucket.store(dest, Ordering::SeqCst);
                } else {
                    if bp.is_being_read() {
                        self.stats.reader_waits += 1;
                        while bp.is_being_read() {
                            std::hint::spin_loop();
                            std::thread::yield_now();
                        }
                    }
                    // SAFETY: slot w is empty and nobody reads from this bucket
                    unsafe { ctx.data.write_from(pos, &swap[s]) };
                    self.stats.copies += b as u64;
                }
                self.stats.block_moves += 1;
                self.held = None;
                return PermuteStep::Placed;
            }
            // SAFETY: slot w in [w, r] is owned by this thread after advancing w
            let first = unsafe { ctx.data.get(pos) };
            let new_dest = ctx.classifier.classify(&first, ctx.less);
            if new_dest == dest {
                // already in place
                continue;
            }
            let (a, bb) = swap.split_at_mut(1);
            let (cur, other) = if s == 0 { (&mut a[0], &mut bb[0]) } else { (&mut bb[0], &mut a[0]) };
            unsafe {
                ctx.data.read_into(pos, other);
                ctx.data.write_from(pos, cur);
            }
            self.stats.copies += b as u64;
            self.stats.block_moves += 1;
            self.held = Some((1 - s, new_dest));
            return PermuteStep::Swapped;
        }
    }
}

/// Number of full blocks located in each bucket's block range.
pub(crate) fn full_blocks_per_bucket(stripes: &[StripeSpan], d: &Delimiters, out: &mut Vec<usize>, b: usize) {
    out.clear();
    let nb = d.num_buckets();
    // stripes and buckets are both sorted: sweep
    let mut s = 0;
    for i in 0..nb {
        let (lo, hi) = (d.block[i], d.block[i + 1]);
        while s < stripes.len() && stripes[s].end <= lo {
            s += 1;
        }
        let mut full = 0;
        let mut j = s;
        while j < stripes.len() && stripes[j].begin < hi {
            let a = lo.max(stripes[j].begin);
            let z = hi.min(stripes[j].write);
            if z > a {
                full += z - a;
            }
            j += 1;
        }
        debug_assert_eq!(full % b, 0);
        out.push(full / b);
    }
}

fn overlap(a: (usize, usize), b: (usize, usize)) -> usize {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    hi.saturating_sub(lo)
}

/// Makes every bucket look like `full* empty*` by moving the last full
/// blocks of buckets that cross stripe boundaries into their first empty
/// blocks. Thread `tid` fills the empty blocks inside its own stripe; for a
/// bucket spanning several stripes it skips the source blocks claimed by
/// the preceding stripes.
///
/// Positions are relative to `begin`. Returns the number of blocks moved.
pub(crate) fn fill_empty_blocks<T: Copy>(
    data: RawSlice<'_, T>,
    begin: usize,
    tid: usize,
    stripes: &[StripeSpan],
    d: &Delimiters,
    full: &[usize],
    b: usize,
) -> u64 {
    let own = stripes[tid];
    let mut moved = 0;
    if own.write >= own.end {
        return 0;
    }
    for i in 0..d.num_buckets() {
        let (lo, hi) = (d.block[i], d.block[i + 1]);
        if hi <= own.write {
            continue;
        }
        if lo >= own.end {
            break;
        }
        let target_end = lo + full[i] * b;
        let mine = (lo.max(own.write), target_end.min(own.end));
        if mine.1 <= mine.0 {
            continue;
        }
        let mut skip: usize = stripes[..tid]
            .iter()
            .map(|s| overlap((lo, target_end), (s.write, s.end)))
            .sum::<usize>()
            / b;
        // full blocks beyond the target zone, right to left
        let mut slot = mine.0;
        'outer: for s in stripes.iter().rev() {
            let src_lo = target_end.max(s.begin);
            let src_hi = hi.min(s.write);
            if src_hi <= src_lo {
                continue;
            }
            let mut src = src_hi;
            while src > src_lo {
                src -= b;
                if skip > 0 {
                    skip -= 1;
                    continue;
                }
                if slot >= mine.1 {
                    break 'outer;
                }
                // SAFETY: `src` is a full block nobody writes in this phase,
                // `slot` an empty block only this thread writes
                unsafe { data.copy_within(begin + src, begin + slot, b) };
                moved += 1;
                slot += b;
            }
        }
        debug_assert_eq!(slot, mine.1, "not enough full blocks to fill bucket {i}");
    }
    moved
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::Splitters;

    #[test]
    fn delimiter_example() {
        let d = compute_delimiters(&[5, 7, 4], 0, 4);
        assert_eq!(d.exact, vec![0, 5, 12, 16]);
        assert_eq!(d.block, vec![0, 8, 12, 16]);
        let d = compute_delimiters(&[0, 10, 0], 3, 4);
        assert_eq!(d.exact, vec![3, 3, 13, 13]);
        assert_eq!(d.block, vec![3, 3, 15, 15]);
        // n = 10 not a multiple of b = 4: last delimiter beyond the end
        let d = compute_delimiters(&[3, 7], 0, 4);
        assert_eq!(*d.block.last().unwrap(), 12);
    }

    #[test]
    fn stripes_cover_input() {
        for n in [0, 1, 7, 64, 100, 1001] {
            for b in [1, 3, 8] {
                for t in 1..6 {
                    let mut prev = 0;
                    for s in 0..t {
                        let (lo, hi) = stripe_bounds(n, b, t, s);
                        assert_eq!(lo, prev);
                        assert_eq!(lo % b, 0);
                        assert!(hi >= lo);
                        prev = hi;
                    }
                    assert_eq!(prev, n);
                    // sizes differ by at most one block, earlier stripes larger
                    let sizes: Vec<usize> = (0..t)
                        .map(|s| {
                            let (lo, hi) = stripe_bounds(n, b, t, s);
                            (hi - lo) / b
                        })
                        .collect();
                    let body = &sizes[..t - 1];
                    assert!(body.windows(2).all(|w| w[0] >= w[1] && w[0] - w[1] <= 1));
                }
            }
        }
    }

    #[test]
    fn pointer_word_roundtrip() {
        let p = BucketPointer::default();
        p.set(5, -1);
        assert_eq!(p.load(), (5, -1));
        assert_eq!(p.start_read(), None);
        assert!(!p.is_being_read());
        p.set(2, 4);
        assert_eq!(p.start_read(), Some(4));
        assert!(p.is_being_read());
        p.stop_read();
        assert_eq!(p.advance_write(), (2, 3));
        assert_eq!(p.load(), (3, 3));
        assert_eq!(p.start_read(), Some(3));
        p.stop_read();
        assert_eq!(p.start_read(), None);
        assert_eq!(p.advance_write(), (3, 2));
    }

    fn lt(a: &i32, b: &i32) -> bool {
        a < b
    }

    /// Runs one worker over `v` (already in blocks) and returns its stats.
    fn permute_single(v: &mut [i32], b: usize, spl: &[i32], totals: &[usize], full_end: usize) -> (PermuteStats, Vec<PermuteStep>) {
        let c = Classifier::new(&Splitters::from_distinct(spl, false));
        let d = compute_delimiters(totals, 0, b);
        let stripes = [StripeSpan { begin: 0, write: full_end, end: v.len() }];
        let mut full = Vec::new();
        full_blocks_per_bucket(&stripes, &d, &mut full, b);
        let pointers: Vec<BucketPointer> = (0..c.num_buckets()).map(|_| BucketPointer::default()).collect();
        for i in 0..c.num_buckets() {
            let w = (d.block[i] / b) as i32;
            pointers[i].set(w, w + full[i] as i32 - 1);
        }
        let overflow = Mutex::new(vec![0; b]);
        let ob = AtomicUsize::new(usize::MAX);
        let n = v.len();
        let ctx = PermuteCtx {
            data: RawSlice::new(v),
            begin: 0,
            n,
            b,
            classifier: &c,
            pointers: &pointers,
            overflow: &overflow,
            overflow_bucket: &ob,
            less: &lt,
        };
        let mut worker = PermuteWorker::new(0, 1, c.num_buckets());
        let mut swap = [vec![0; b], vec![0; b]];
        let mut steps = Vec::new();
        loop {
            let s = worker.step(&ctx, &mut swap);
            steps.push(s);
            if s == PermuteStep::Done {
                break;
            }
        }
        (worker.stats, steps)
    }

    #[test]
    fn two_blocks_swap() {
        // block 0 belongs to bucket 1, block 1 to bucket 0
        let mut v = vec![20, 21, 10, 11];
        let (stats, _) = permute_single(&mut v, 2, &[15], &[2, 2], 4);
        assert_eq!(v, vec![10, 11, 20, 21]);
        assert_eq!(stats.block_moves, 2);
    }

    #[test]
    fn correct_blocks_are_skipped() {
        let mut v = vec![10, 11, 20, 21];
        let (stats, _) = permute_single(&mut v, 2, &[15], &[2, 2], 4);
        assert_eq!(v, vec![10, 11, 20, 21]);
        // block 1 is read from bucket 1 and written back into its slot;
        // block 0 is skipped in place
        assert!(stats.block_moves <= 2);
    }

    #[test]
    fn blocks_in_place_are_skipped_by_writer() {
        // one bucket, three full blocks
        let mut v = vec![1, 2, 3, 4, 5, 6];
        let (_, steps) = permute_single(&mut v, 2, &[100], &[6, 0], 6);
        // the last block is read, the writer skips the two blocks already in
        // place and puts it back into the slot it came from
        let acquired = steps.iter().filter(|s| **s == PermuteStep::Acquired).count();
        assert_eq!(acquired, 1);
        assert_eq!(*steps.last().unwrap(), PermuteStep::Done);
        assert_eq!(v, vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn empty_block_movement_across_stripes() {
        // bucket 0 spans blocks 0..4, stripes [0,3) and [3,5) blocks;
        // pattern F F E | F E -> F F F E E
        let b = 1;
        let mut v = vec![1, 2, 99, 3, 99];
        let stripes = [
            StripeSpan { begin: 0, write: 2, end: 3 },
            StripeSpan { begin: 3, write: 4, end: 5 },
        ];
        let d = compute_delimiters(&[5], 0, b);
        let mut full = Vec::new();
        full_blocks_per_bucket(&stripes, &d, &mut full, b);
        assert_eq!(full, vec![3]);
        let raw = RawSlice::new(&mut v);
        let m0 = fill_empty_blocks(raw, 0, 0, &stripes, &d, &full, b);
        let m1 = fill_empty_blocks(raw, 0, 1, &stripes, &d, &full, b);
        assert_eq!(m0 + m1, 1);
        assert_eq!(&v[..3], &[1, 2, 3]);
    }

    #[test]
    fn multi_stripe_bucket_skips_claimed_blocks() {
        // one bucket over three stripes: F E | F E | F F
        let b = 1;
        let mut v = vec![1, 0, 2, 0, 3, 4];
        let stripes = [
            StripeSpan { begin: 0, write: 1, end: 2 },
            StripeSpan { begin: 2, write: 3, end: 4 },
            StripeSpan { begin: 4, write: 6, end: 6 },
        ];
        let d = compute_delimiters(&[6], 0, b);
        let mut full = Vec::new();
        full_blocks_per_bucket(&stripes, &d, &mut full, b);
        assert_eq!(full, vec![4]);
        let raw = RawSlice::new(&mut v);
        // run threads in reverse to show they do not depend on each other
        let moved: u64 = (0..3).rev().map(|tid| fill_empty_blocks(raw, 0, tid, &stripes, &d, &full, b)).sum();
        assert_eq!(moved, 2);
        let mut head = v[..4].to_vec();
        head.sort();
        assert_eq!(head, vec![1, 2, 3, 4]);
        assert_eq!(v[1], 4);
        assert_eq!(v[3], 3);
    }

    #[test]
    fn bucket_inside_one_stripe_untouched() {
        let b = 2;
        let mut v = vec![1, 1, 5, 5, 0, 0];
        let stripes = [StripeSpan { begin: 0, write: 4, end: 6 }];
        let d = compute_delimiters(&[2, 4], 0, b);
        let mut full = Vec::new();
        full_blocks_per_bucket(&stripes, &d, &mut full, b);
        let raw = RawSlice::new(&mut v);
        assert_eq!(fill_empty_blocks(raw, 0, 0, &stripes, &d, &full, b), 0);
    }
}
