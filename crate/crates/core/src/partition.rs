//! One partition step, executed by a team of `t` threads in lockstep.
//!
//! Phases, separated by barriers when `t > 1`:
//! sampling (thread 0), local classification, delimiter computation
//! (thread 0), empty-block movement, block permutation, saving the
//! neighbour's head, cleanup.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Barrier, Mutex, RwLock, RwLockReadGuard};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::base_case::sort_small;
use crate::classifier::{draw_sample, select_splitters, Classifier, Splitters};
use crate::cleanup::{assign_buckets, mark_bucket, CleanupView};
use crate::config::alpha_of;
use crate::counters::{Counters, CountingLess};
use crate::local::{classify_stripe, BufferSet};
use crate::permute::{
    compute_delimiters_into, fill_empty_blocks, full_blocks_per_bucket, stripe_bounds, BucketPointer, Delimiters,
    PermuteCtx, PermuteWorker, StripeSpan,
};
use crate::raw::RawSlice;

/// Layout of the current step, written by thread 0.
#[derive(Debug, Default)]
pub(crate) struct Plan {
    pub begin: usize,
    pub n: usize,
    pub num_buckets: usize,
    pub equality: bool,
    pub last_level: bool,
    /// Relative to `begin`.
    pub delims: Delimiters,
    totals: Vec<usize>,
    full: Vec<usize>,
    stripes: Vec<StripeSpan>,
}

impl Plan {
    pub fn is_equality_bucket(&self, j: usize) -> bool {
        self.equality && j % 2 == 1
    }
}

/// State shared by the threads of a team, reused across steps.
pub(crate) struct Team<T> {
    t: usize,
    b: usize,
    barrier: Barrier,
    classifier: RwLock<Classifier<T>>,
    plan: RwLock<Plan>,
    buffers: Vec<RwLock<BufferSet<T>>>,
    counts: Vec<Mutex<Vec<usize>>>,
    stripes: Vec<Mutex<StripeSpan>>,
    pointers: Vec<BucketPointer>,
    overflow: Mutex<Vec<T>>,
    overflow_bucket: AtomicUsize,
    step_copies: AtomicU64,
    step_moves: AtomicU64,
}

impl<T: Copy + Send + Sync> Team<T> {
    /// `k_max` splitter buckets, i.e. up to `2 * k_max` buckets per step.
    pub fn new(t: usize, k_max: usize, b: usize, filler: T) -> Self {
        let total = 2 * k_max;
        let mut classifier = Classifier::new(&Splitters::from_distinct(&[filler], false));
        classifier.reserve(k_max);
        let plan = Plan {
            delims: Delimiters {
                exact: Vec::with_capacity(total + 1),
                block: Vec::with_capacity(total + 1),
            },
            totals: Vec::with_capacity(total),
            full: Vec::with_capacity(total),
            stripes: Vec::with_capacity(t),
            ..Plan::default()
        };
        Team {
            t,
            b,
            barrier: Barrier::new(t),
            classifier: RwLock::new(classifier),
            plan: RwLock::new(plan),
            buffers: (0..t).map(|_| RwLock::new(BufferSet::new(total, b, filler))).collect(),
            counts: (0..t).map(|_| Mutex::new(vec![0; total])).collect(),
            stripes: (0..t).map(|_| Mutex::new(StripeSpan::default())).collect(),
            pointers: (0..total).map(|_| BucketPointer::default()).collect(),
            overflow: Mutex::new(vec![filler; b]),
            overflow_bucket: AtomicUsize::new(usize::MAX),
            step_copies: AtomicU64::new(0),
            step_moves: AtomicU64::new(0),
        }
    }

    /// Bytes allocated by the team; independent of the input size.
    pub fn heap_bytes(&self) -> usize {
        let word = std::mem::size_of::<usize>();
        let elem = std::mem::size_of::<T>();
        let plan = self.plan.read().unwrap();
        let buffers: usize = self.buffers.iter().map(|b| b.read().unwrap().heap_bytes()).sum();
        let counts: usize = self.counts.iter().map(|c| c.lock().unwrap().capacity() * word).sum();
        buffers
            + counts
            + self.classifier.read().unwrap().heap_bytes()
            + self.pointers.capacity() * std::mem::size_of::<BucketPointer>()
            + self.stripes.capacity() * std::mem::size_of::<Mutex<StripeSpan>>()
            + self.overflow.lock().unwrap().capacity() * elem
            + (plan.delims.exact.capacity() + plan.delims.block.capacity() + plan.totals.capacity() + plan.full.capacity())
                * word
            + plan.stripes.capacity() * std::mem::size_of::<StripeSpan>()
    }

    /// Layout of the last step. Only valid between steps.
    pub fn plan(&self) -> RwLockReadGuard<'_, Plan> {
        self.plan.read().unwrap()
    }

    pub fn sync(&self) {
        if self.t > 1 {
            self.barrier.wait();
        }
    }
}

/// Per-thread scratch space.
pub(crate) struct Local<T> {
    swap: [Vec<T>; 2],
    head: Vec<T>,
    write_blocks: Vec<usize>,
    pub counters: Counters,
}

impl<T: Copy> Local<T> {
    pub fn new(k_max: usize, b: usize, filler: T) -> Self {
        Local {
            swap: [vec![filler; b], vec![filler; b]],
            head: Vec::with_capacity(b),
            write_blocks: vec![0; 2 * k_max],
            counters: Counters::default(),
        }
    }

    pub fn heap_bytes(&self) -> usize {
        let elem = std::mem::size_of::<T>();
        (self.swap[0].capacity() + self.swap[1].capacity() + self.head.capacity()) * elem
            + self.write_blocks.capacity() * std::mem::size_of::<usize>()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct StepArgs {
    pub begin: usize,
    pub n: usize,
    /// Splitter buckets before deduplication.
    pub k: usize,
    pub last_level: bool,
    pub seed: u64,
    /// Largest bucket sorted by insertion sort at the last level.
    pub small: usize,
}

/// Seed of the sampling generator of the step at `[begin, begin + n)`.
pub(crate) fn step_seed(seed: u64, begin: usize, n: usize) -> u64 {
    let mut z = seed ^ (begin as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (n as u64).rotate_left(32);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs one partition step on `data[begin..begin + n]`. Every thread of
/// the team must call this with the same `args`. Afterwards the buckets
/// are contiguous, described by [`Team::plan`]; at the last level they are
/// also sorted, otherwise every non-equality bucket starts with its
/// maximum followed by its minimum.
///
/// Returns the block moves of the whole step on thread 0.
pub(crate) fn partition_step<T, F>(
    team: &Team<T>,
    tid: usize,
    local: &mut Local<T>,
    data: RawSlice<'_, T>,
    args: &StepArgs,
    less: &F,
) -> u64
where
    T: Copy + Send + Sync,
    F: Fn(&T, &T) -> bool + Sync,
{
    let (t, b) = (team.t, team.b);
    let StepArgs { begin, n, k, .. } = *args;
    let cl = CountingLess::new(less);
    let cmp = |a: &T, c: &T| cl.less(a, c);
    let mut copies = 0u64;
    let mut moves = 0u64;

    if tid == 0 {
        team.step_copies.store(0, Ordering::SeqCst);
        team.step_moves.store(0, Ordering::SeqCst);
        // SAFETY: the other threads wait at the barrier below
        let v = unsafe { data.slice_mut(begin, begin + n) };
        let mut rng = ChaCha8Rng::seed_from_u64(step_seed(args.seed, begin, n));
        let (m, writes) =
            draw_sample(v, alpha_of(n), k, &mut rng, &cmp).expect("subproblem too small for its sample");
        // sampling is not part of the distribution tally checked below
        local.counters.element_copies += writes;
        let spl = select_splitters(&v[..m], k, &cmp);
        team.classifier.write().unwrap().reset(&spl);
        let mut plan = team.plan.write().unwrap();
        plan.begin = begin;
        plan.n = n;
        plan.num_buckets = spl.num_buckets();
        plan.equality = spl.use_equality_buckets();
        plan.last_level = args.last_level;
    }
    team.sync();

    let classifier = team.classifier.read().unwrap();
    let nb = classifier.num_buckets();
    {
        let (lo, hi) = stripe_bounds(n, b, t, tid);
        let mut buffers = team.buffers[tid].write().unwrap();
        buffers.reset(nb);
        let mut counts = team.counts[tid].lock().unwrap();
        // SAFETY: stripes are disjoint
        let stripe = unsafe { data.slice_mut(begin + lo, begin + hi) };
        let st = classify_stripe(stripe, &classifier, &mut buffers, &mut counts, &cmp);
        copies += st.copies;
        *team.stripes[tid].lock().unwrap() = StripeSpan {
            begin: lo,
            write: lo + st.write,
            end: hi,
        };
    }
    team.sync();

    if tid == 0 {
        let mut guard = team.plan.write().unwrap();
        let plan = &mut *guard;
        plan.totals.clear();
        plan.totals.resize(nb, 0);
        for c in &team.counts {
            let c = c.lock().unwrap();
            for (sum, x) in plan.totals.iter_mut().zip(&c[..nb]) {
                *sum += x;
            }
        }
        compute_delimiters_into(&plan.totals, 0, b, &mut plan.delims);
        plan.stripes.clear();
        plan.stripes.extend(team.stripes.iter().map(|s| *s.lock().unwrap()));
        full_blocks_per_bucket(&plan.stripes, &plan.delims, &mut plan.full, b);
        for i in 0..nb {
            let w = plan.delims.block[i] / b;
            team.pointers[i].set(w as i32, (w + plan.full[i]) as i32 - 1);
        }
        team.overflow_bucket.store(usize::MAX, Ordering::SeqCst);
    }
    team.sync();
    let plan = team.plan.read().unwrap();

    if t > 1 {
        let moved = fill_empty_blocks(data, begin, tid, &plan.stripes, &plan.delims, &plan.full, b);
        moves += moved;
        copies += moved * b as u64;
        team.sync();
    }

    {
        let ctx = PermuteCtx {
            data,
            begin,
            n,
            b,
            classifier: &classifier,
            pointers: &team.pointers[..nb],
            overflow: &team.overflow,
            overflow_bucket: &team.overflow_bucket,
            less: &cmp,
        };
        let mut worker = PermuteWorker::new(tid, t, nb);
        worker.run(&ctx, &mut local.swap);
        moves += worker.stats.block_moves;
        copies += worker.stats.copies;
        local.counters.reader_waits += worker.stats.reader_waits;
    }
    team.sync();

    let (bl, bh) = assign_buckets(nb, t, tid);
    let boundary = plan.delims.exact[bh];
    let head_end = plan.delims.block[bh].min(n);
    local.head.clear();
    if head_end > boundary {
        // SAFETY: nobody writes before the next barrier
        local.head.extend_from_slice(unsafe { data.slice(begin + boundary, begin + head_end) });
    }
    for j in bl..bh {
        local.write_blocks[j] = team.pointers[j].load().0 as usize;
    }
    team.sync();

    {
        let ob = team.overflow_bucket.load(Ordering::SeqCst);
        let overflow_bucket = (ob != usize::MAX).then_some(ob);
        let overflow_guard = overflow_bucket.filter(|j| (bl..bh).contains(j)).map(|_| team.overflow.lock().unwrap());
        let guards: Vec<_> = team.buffers.iter().map(|r| r.read().unwrap()).collect();
        let residuals: Vec<&BufferSet<T>> = guards.iter().map(|g| &**g).collect();
        let view = CleanupView {
            data,
            begin,
            b,
            delims: &plan.delims,
            write_blocks: &local.write_blocks,
            overflow: overflow_guard.as_deref().map_or(&[][..], |v| &v[..]),
            overflow_bucket,
            residuals: &residuals,
            head: &local.head,
            boundary,
        };
        for j in bl..bh {
            copies += view.bucket(j);
        }
        for j in bl..bh {
            if plan.is_equality_bucket(j) {
                continue;
            }
            let (lo, hi) = (plan.delims.exact[j], plan.delims.exact[j + 1]);
            // SAFETY: own buckets
            let v = unsafe { data.slice_mut(begin + lo, begin + hi) };
            if args.last_level {
                local.counters.element_copies += sort_small(v, args.small, &cmp);
            } else {
                copies += mark_bucket(v, &cmp);
            }
        }
    }

    local.counters.element_copies += copies;
    local.counters.block_moves += moves;
    local.counters.comparisons += cl.take();
    team.step_copies.fetch_add(copies, Ordering::SeqCst);
    team.step_moves.fetch_add(moves, Ordering::SeqCst);
    drop(plan);
    drop(classifier);
    team.sync();

    if tid == 0 {
        local.counters.partition_steps += 1;
        let bound = 3 * n as u64 + (nb * b * t) as u64;
        if team.step_copies.load(Ordering::SeqCst) > bound {
            local.counters.copy_bound_violations += 1;
        }
        team.step_moves.load(Ordering::SeqCst)
    } else {
        0
    }
}
