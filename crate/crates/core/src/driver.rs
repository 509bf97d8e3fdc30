//! Recursion control: parallel partitioning of large subproblems, balanced
//! sequential sorting of the rest, base cases and the constant-space
//! sequential mode.

use std::sync::Mutex;

use crate::base_case::{insertion_sort, sort_small};
use crate::config::{alpha_of, default_config, default_threads, ConfigError, SortConfig};
use crate::counters::{AuxTracker, Counters, CountingLess};
use crate::partition::{partition_step, Local, StepArgs, Team};
use crate::raw::RawSlice;

/// A subproblem `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Task {
    pub lo: usize,
    pub hi: usize,
    /// Partition steps above this task.
    pub depth: usize,
    pub parallel: bool,
}

impl Task {
    pub fn len(&self) -> usize {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi == self.lo
    }
}

/// Bookkeeping of one level of the sequential recursion; its size is what
/// the recursion adds to the auxiliary memory.
#[allow(dead_code)]
struct Frame {
    lo: usize,
    hi: usize,
    cursor: usize,
    depth: usize,
}

/// Last-level buckets up to this multiple of the base-case threshold are
/// insertion sorted; sampling leaves some buckets a few times the target.
const LAST_LEVEL_SLACK: usize = 4;

/// Bytes charged per recursion level.
pub const FRAME_BYTES: usize = std::mem::size_of::<Frame>();

/// Steps nested deeper than this fall back to heapsort. Only reachable with
/// comparators that are not strict weak orders.
const MAX_DEPTH: usize = 64;

/// Sorts `v` ascending with the default configuration.
pub fn sort<T: Ord + Copy + Send + Sync>(v: &mut [T]) {
    sort_by(v, |a: &T, b: &T| a < b);
}

/// Sorts `v` by the strict "less than" predicate `less`.
pub fn sort_by<T, F>(v: &mut [T], less: F)
where
    T: Copy + Send + Sync,
    F: Fn(&T, &T) -> bool + Sync,
{
    let cfg = default_config(v.len(), std::mem::size_of::<T>(), default_threads());
    sort_with_config(v, less, &cfg).expect("default configuration is valid");
}

/// Sequential sort without a recursion stack. `cfg.threads` must be 1.
pub fn sort_strict_in_place<T, F>(v: &mut [T], less: F, cfg: &SortConfig) -> Result<Counters, ConfigError>
where
    T: Copy + Send + Sync,
    F: Fn(&T, &T) -> bool + Sync,
{
    let cfg = cfg.clone().with_strict_in_place(true);
    sort_with_config(v, less, &cfg)
}

/// Sorts `v` with an explicit configuration and returns the instrumentation counters.
pub fn sort_with_config<T, F>(v: &mut [T], less: F, cfg: &SortConfig) -> Result<Counters, ConfigError>
where
    T: Copy + Send + Sync,
    F: Fn(&T, &T) -> bool + Sync,
{
    cfg.validate()?;
    let mut counters = Counters::default();
    let n = v.len();
    if n <= cfg.base_case_threshold() {
        let cl = CountingLess::new(&less);
        counters.element_copies += insertion_sort(v, &|a: &T, b: &T| cl.less(a, b));
        counters.comparisons += cl.take();
        return Ok(counters);
    }
    let aux = AuxTracker::default();
    if cfg.threads == 1 {
        let filler = v[0];
        let mut seq = Sequential::new(RawSlice::new(v), cfg, &less, &aux, filler);
        if cfg.strict_in_place {
            seq.sort_strict(0, n);
        } else {
            seq.sort_root(0, n, 0);
        }
        counters = seq.finish();
    } else {
        counters = sort_parallel(v, cfg, &less, &aux);
    }
    counters.peak_aux_bytes = aux.peak();
    Ok(counters)
}

/// Insertion sort on `v`; the fallback for subproblems too small to sample.
pub fn base_case<T: Copy, F: Fn(&T, &T) -> bool>(v: &mut [T], less: &F) {
    insertion_sort(v, less);
}

/// Bucket count for a subproblem of `n_sub` elements, and whether the
/// resulting buckets are sorted directly (last level).
///
/// The target leaf size is the base-case threshold `2 * n0`: with
/// `r = n_sub / (2 * n0)`, one step of `2^ceil(log2 r)` buckets if that is
/// at most `k_max`, two steps of `2^ceil(log2(r) / 2)` buckets if `r` is at
/// most `k_max^2`, `k_max` otherwise. `k` is then lowered until the sample
/// fits into the subproblem.
pub fn adaptive_k(n_sub: usize, cfg: &SortConfig) -> (usize, bool) {
    let leaf = cfg.base_case_threshold();
    let r = n_sub.div_ceil(leaf).max(2);
    let log_r = usize::BITS - (r - 1).leading_zeros();
    let k_max_log = cfg.k_max.trailing_zeros();
    let (log_k, last) = if log_r <= k_max_log {
        (log_r, true)
    } else if log_r <= 2 * k_max_log {
        (log_r.div_ceil(2), false)
    } else {
        (k_max_log, false)
    };
    let mut k = (1usize << log_k).clamp(2, cfg.k_max);
    let alpha = alpha_of(n_sub);
    while k > 2 && alpha * k - 1 > n_sub {
        k /= 2;
    }
    (k, last)
}

/// Smallest index `i` in `[lo, hi)` with `less(key, v[i])`, or `hi` if there
/// is none. Requires the predicate to be monotone over the range; costs
/// `O(log(i - lo))` comparisons.
pub fn search_next_largest<T, F: Fn(&T, &T) -> bool>(v: &[T], key: &T, lo: usize, hi: usize, less: &F) -> usize {
    if lo >= hi {
        return hi;
    }
    // exponential search for an upper bound
    let mut prev = lo;
    let mut step = 1;
    let mut cur = lo;
    loop {
        if less(key, &v[cur]) {
            break;
        }
        prev = cur + 1;
        if cur + 1 >= hi {
            return hi;
        }
        cur = (cur + step).min(hi - 1);
        step *= 2;
    }
    // v[cur] is larger, everything before prev is not
    let (mut a, mut b) = (prev, cur);
    while a < b {
        let m = a + (b - a) / 2;
        if less(key, &v[m]) {
            b = m;
        } else {
            a = m + 1;
        }
    }
    a
}

/// Parallel tasks in decreasing size order and the sequential tasks
/// distributed over threads.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schedule {
    pub parallel: Vec<Task>,
    pub sequential: Vec<Vec<Task>>,
}

/// Tasks with at least `beta * n / t` elements are partitioned by all
/// threads, largest first; the others are assigned to threads by the
/// longest-processing-time rule.
pub fn schedule(tasks: &[Task], n: usize, t: usize, beta: f64) -> Schedule {
    let min_parallel = parallel_threshold(n, t, beta);
    let (mut parallel, small): (Vec<Task>, Vec<Task>) = tasks.iter().partition(|x| x.len() >= min_parallel && t > 1);
    parallel.sort_by_key(|t| std::cmp::Reverse(t.len()));
    for p in &mut parallel {
        p.parallel = true;
    }
    Schedule {
        parallel,
        sequential: lpt(&small, t),
    }
}

fn parallel_threshold(n: usize, t: usize, beta: f64) -> usize {
    ((beta * n as f64 / t as f64).ceil() as usize).max(1)
}

/// Longest processing time first: every task, largest first, goes to the
/// least loaded thread (lowest index on ties).
pub fn lpt(tasks: &[Task], t: usize) -> Vec<Vec<Task>> {
    let mut order: Vec<Task> = tasks.to_vec();
    order.sort_by(|a, b| b.len().cmp(&a.len()).then(a.lo.cmp(&b.lo)));
    let mut load = vec![0usize; t];
    let mut out = vec![Vec::new(); t];
    for mut task in order {
        let i = (0..t).min_by_key(|&i| (load[i], i)).unwrap();
        load[i] += task.len();
        task.parallel = false;
        out[i].push(task);
    }
    out
}

/// Single-threaded sorter over a shared array.
struct Sequential<'a, 'f, T, F> {
    data: RawSlice<'a, T>,
    cfg: &'f SortConfig,
    less: &'f F,
    aux: &'f AuxTracker,
    team: Team<T>,
    local: Local<T>,
    fixed_bytes: usize,
    driver: Counters,
    first_step: bool,
}

impl<'a, 'f, T, F> Sequential<'a, 'f, T, F>
where
    T: Copy + Send + Sync,
    F: Fn(&T, &T) -> bool + Sync,
{
    fn new(data: RawSlice<'a, T>, cfg: &'f SortConfig, less: &'f F, aux: &'f AuxTracker, filler: T) -> Self {
        let team = Team::new(1, cfg.k_max, cfg.block_elems, filler);
        let local = Local::new(cfg.k_max, cfg.block_elems, filler);
        let fixed_bytes = team.heap_bytes() + local.heap_bytes();
        aux.alloc(fixed_bytes);
        Sequential {
            data,
            cfg,
            less,
            aux,
            team,
            local,
            fixed_bytes,
            driver: Counters::default(),
            first_step: true,
        }
    }

    fn finish(self) -> Counters {
        self.aux.free(self.fixed_bytes);
        let mut c = self.local.counters;
        c += &self.driver;
        c.first_step_block_moves = self.driver.first_step_block_moves;
        c
    }

    fn small(&mut self, lo: usize, hi: usize) {
        let cl = CountingLess::new(self.less);
        // SAFETY: this sorter owns [lo, hi)
        let v = unsafe { self.data.slice_mut(lo, hi) };
        self.driver.element_copies += sort_small(v, self.cfg.base_case_threshold(), &|a: &T, b: &T| cl.less(a, b));
        self.driver.comparisons += cl.take();
    }

    /// Partitions `[lo, hi)`; returns true if the buckets were sorted inline.
    fn partition(&mut self, lo: usize, hi: usize, depth: usize) -> bool {
        let n = hi - lo;
        let (k, last_level) = adaptive_k(n, self.cfg);
        let args = StepArgs {
            begin: lo,
            n,
            k,
            last_level,
            seed: self.cfg.seed,
            small: LAST_LEVEL_SLACK * self.cfg.base_case_threshold(),
        };
        let moves = partition_step(&self.team, 0, &mut self.local, self.data, &args, self.less);
        if self.first_step {
            self.first_step = false;
            self.driver.first_step_block_moves = moves;
        }
        self.driver.max_recursion_depth = self.driver.max_recursion_depth.max(depth as u64 + 1);
        last_level
    }

    fn get(&self, i: usize) -> T {
        // SAFETY: i is inside the range owned by this sorter
        unsafe { self.data.get(i) }
    }

    /// Index after the bucket starting at `a`, searching up to `hi`.
    fn bucket_end(&mut self, a: usize, hi: usize) -> usize {
        let cl = CountingLess::new(self.less);
        let key = self.get(a);
        // SAFETY: read-only view of the owned range
        let v = unsafe { self.data.slice(0, hi) };
        let end = search_next_largest(v, &key, a + 1, hi, &|x: &T, y: &T| cl.less(x, y));
        self.driver.comparisons += cl.take();
        end
    }

    /// True if the marked bucket starting at `a` holds equal elements only.
    fn is_constant(&mut self, a: usize) -> bool {
        self.driver.comparisons += 1;
        !(self.less)(&self.get(a + 1), &self.get(a))
    }

    /// Sorts `[lo, hi)` recursively, `depth` steps below the root.
    fn sort_root(&mut self, lo: usize, hi: usize, depth: usize) {
        if hi - lo <= self.cfg.base_case_threshold() || depth >= MAX_DEPTH {
            self.small(lo, hi);
        } else {
            self.sort_span(lo, hi, depth);
        }
    }

    fn sort_span(&mut self, lo: usize, hi: usize, depth: usize) {
        self.aux.alloc(FRAME_BYTES);
        if !self.partition(lo, hi, depth) {
            let thr = self.cfg.base_case_threshold();
            let mut a = lo;
            while a < hi {
                let end = self.bucket_end(a, hi);
                if end - a <= thr {
                    self.small(a, end);
                } else if self.is_constant(a) {
                    // equal elements
                } else if (a == lo && end == hi) || depth + 1 >= MAX_DEPTH {
                    // no progress
                    self.small(a, end);
                } else {
                    self.sort_span(a, end, depth + 1);
                }
                a = end;
            }
        }
        self.aux.free(FRAME_BYTES);
    }

    /// Sorts `[lo, hi)` with a loop over the marked buckets instead of a stack.
    fn sort_strict(&mut self, lo: usize, hi: usize) {
        let thr = self.cfg.base_case_threshold();
        let (mut i, mut j) = (lo, hi);
        let mut marked = false;
        while i < hi {
            let done = if j - i <= thr {
                self.small(i, j);
                true
            } else if marked && self.is_constant(i) {
                true
            } else if self.partition(i, j, 0) {
                true
            } else {
                let end = self.bucket_end(i, hi);
                if end == j {
                    self.small(i, j);
                    true
                } else {
                    j = end;
                    marked = true;
                    false
                }
            };
            if done {
                i = j;
                if i < hi {
                    j = self.bucket_end(i, hi);
                    marked = true;
                }
            }
        }
        self.driver.max_recursion_depth = 0;
    }
}

fn sort_parallel<T, F>(v: &mut [T], cfg: &SortConfig, less: &F, aux: &AuxTracker) -> Counters
where
    T: Copy + Send + Sync,
    F: Fn(&T, &T) -> bool + Sync,
{
    let n = v.len();
    let t = cfg.threads;
    let b = cfg.block_elems;
    let thr = cfg.base_case_threshold();
    let filler = v[0];
    let min_parallel = parallel_threshold(n, t, cfg.beta).max(thr + 1);
    let data = RawSlice::new(v);
    let team = Team::new(t, cfg.k_max, b, filler);
    let team_bytes = team.heap_bytes();
    aux.alloc(team_bytes);

    // at most n / min_parallel disjoint tasks are large enough to be queued
    let queue_cap = n / min_parallel + 1;
    let queue: Mutex<Vec<Task>> = Mutex::new(Vec::with_capacity(queue_cap));
    queue.lock().unwrap().push(Task {
        lo: 0,
        hi: n,
        depth: 0,
        parallel: true,
    });
    let queue_bytes = queue_cap * std::mem::size_of::<Task>();
    aux.alloc(queue_bytes);
    let small_tasks: Mutex<Vec<Task>> = Mutex::new(Vec::new());
    let current: Mutex<Option<Task>> = Mutex::new(None);
    let assignment: Mutex<Vec<Vec<Task>>> = Mutex::new(Vec::new());
    let first_moves = Mutex::new(None::<u64>);

    let worker = |tid: usize| -> Counters {
        let mut local = Local::new(cfg.k_max, b, filler);
        let local_bytes = local.heap_bytes();
        aux.alloc(local_bytes);
        let mut driver = Counters::default();
        loop {
            if tid == 0 {
                let mut q = queue.lock().unwrap();
                let best = (0..q.len()).max_by_key(|&i| (q[i].len(), std::cmp::Reverse(q[i].lo)));
                *current.lock().unwrap() = best.map(|i| q.swap_remove(i));
            }
            team.sync();
            let Some(task) = *current.lock().unwrap() else { break };
            let (k, last_level) = adaptive_k(task.len(), cfg);
            let args = StepArgs {
                begin: task.lo,
                n: task.len(),
                k,
                last_level,
                seed: cfg.seed,
                small: LAST_LEVEL_SLACK * thr,
            };
            let moves = partition_step(&team, tid, &mut local, data, &args, less);
            if tid == 0 {
                first_moves.lock().unwrap().get_or_insert(moves);
                driver.max_recursion_depth = driver.max_recursion_depth.max(task.depth as u64 + 1);
                if !last_level {
                    let plan = team.plan();
                    let mut q = queue.lock().unwrap();
                    let mut s = small_tasks.lock().unwrap();
                    for j in 0..plan.num_buckets {
                        if plan.is_equality_bucket(j) {
                            continue;
                        }
                        let lo = task.lo + plan.delims.exact[j];
                        let hi = task.lo + plan.delims.exact[j + 1];
                        let child = Task {
                            lo,
                            hi,
                            depth: task.depth + 1,
                            parallel: false,
                        };
                        if hi - lo < 2 {
                            continue;
                        }
                        // SAFETY: all threads are past the step's last barrier
                        let constant = hi - lo > thr && !less(unsafe { &data.get(lo + 1) }, unsafe { &data.get(lo) });
                        driver.comparisons += u64::from(hi - lo > thr);
                        if constant {
                            continue;
                        }
                        if hi - lo >= min_parallel {
                            q.push(Task { parallel: true, ..child });
                        } else {
                            s.push(child);
                        }
                    }
                }
            }
        }

        if tid == 0 {
            let s = small_tasks.lock().unwrap();
            aux.alloc(s.capacity() * std::mem::size_of::<Task>());
            *assignment.lock().unwrap() = lpt(&s, t);
        }
        team.sync();
        let mine = std::mem::take(&mut assignment.lock().unwrap()[tid]);
        let mut total = local.counters;
        if !mine.is_empty() {
            let mut seq = Sequential::new(data, cfg, less, aux, filler);
            seq.first_step = false;
            for task in &mine {
                seq.sort_root(task.lo, task.hi, task.depth);
            }
            total += &seq.finish();
        }
        aux.free(local_bytes);
        total += &driver;
        total
    };

    let mut counters = std::thread::scope(|s| {
        let handles: Vec<_> = (1..t).map(|tid| s.spawn(move || worker(tid))).collect();
        let mut c = worker(0);
        for h in handles {
            c += &h.join().expect("worker thread panicked");
        }
        c
    });
    counters.first_step_block_moves = first_moves.lock().unwrap().unwrap_or(0);
    aux.free(team_bytes + queue_bytes);
    counters
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    fn lt(a: &u64, b: &u64) -> bool {
        a < b
    }

    fn linear_next_largest(v: &[u64], key: u64, lo: usize, hi: usize) -> usize {
        (lo..hi).find(|&i| v[i] > key).unwrap_or(hi)
    }

    #[test]
    fn search_examples() {
        let a = [3, 3, 3, 7, 7, 9];
        assert_eq!(search_next_largest(&a, &3, 1, 6, &lt), 3);
        assert_eq!(search_next_largest(&a, &9, 0, 6, &lt), 6);
        assert_eq!(search_next_largest(&a, &1, 2, 6, &lt), 2);
        assert_eq!(search_next_largest(&a, &3, 6, 6, &lt), 6);
    }

    proptest! {
        #[test]
        fn search_matches_linear_scan(mut v in proptest::collection::vec(0u64..50, 1..200), key in 0u64..55, lo in 0usize..200) {
            v.sort();
            let lo = lo % (v.len() + 1);
            prop_assert_eq!(search_next_largest(&v, &key, lo, v.len(), &lt), linear_next_largest(&v, key, lo, v.len()));
        }

        #[test]
        fn sorts_like_std(v in proptest::collection::vec(0u64..1000, 0..3000), t in 1usize..4, strict in proptest::bool::ANY) {
            let mut cfg = default_config(v.len(), 8, t).with_strict_in_place(strict && t == 1);
            cfg.block_elems = 16;
            cfg.k_max = 16;
            let mut a = v.clone();
            sort_with_config(&mut a, lt, &cfg).unwrap();
            let mut b = v.clone();
            b.sort();
            prop_assert!(a == b);
        }
    }

    #[test]
    fn search_cost_is_logarithmic() {
        let v: Vec<u64> = (0..1 << 16).collect();
        let count = std::cell::Cell::new(0);
        let less = |a: &u64, b: &u64| {
            count.set(count.get() + 1);
            a < b
        };
        assert_eq!(search_next_largest(&v, &1000, 0, v.len(), &less), 1001);
        assert!(count.get() <= 2 * 11 + 2, "{} comparisons", count.get());
    }

    #[test]
    fn lpt_example() {
        let tasks: Vec<Task> = [6, 5, 4, 3, 2]
            .iter()
            .scan(0, |lo, &len| {
                let t = Task {
                    lo: *lo,
                    hi: *lo + len,
                    depth: 1,
                    parallel: false,
                };
                *lo += len;
                Some(t)
            })
            .collect();
        let plan = lpt(&tasks, 2);
        let loads: Vec<Vec<usize>> = plan.iter().map(|p| p.iter().map(Task::len).collect()).collect();
        assert_eq!(loads, vec![vec![6, 3, 2], vec![5, 4]]);
    }

    #[test]
    fn schedule_splits_by_beta() {
        let root = Task {
            lo: 0,
            hi: 100,
            depth: 0,
            parallel: false,
        };
        let s = schedule(&[root], 100, 4, 1.0);
        assert_eq!(s.parallel.len(), 1);
        assert!(s.parallel[0].parallel);
        let small = [
            Task { lo: 0, hi: 10, ..root },
            Task { lo: 10, hi: 30, ..root },
        ];
        let s = schedule(&small, 100, 4, 1.0);
        assert!(s.parallel.is_empty());
        assert_eq!(s.sequential.iter().map(Vec::len).sum::<usize>(), 2);
    }

    #[test]
    fn adaptive_bucket_counts() {
        let cfg = default_config(0, 8, 1);
        // 2^17 elements: two 64-way steps towards leaves of about 32 elements
        assert_eq!(adaptive_k(1 << 17, &cfg), (64, false));
        // at most k_max leaves of 32: one step
        assert_eq!(adaptive_k(32 * 256, &cfg), (256, true));
        assert_eq!(adaptive_k(32 * 100, &cfg), (128, true));
        assert_eq!(adaptive_k(1 << 30, &cfg), (256, false));
        // the sample must fit: alpha * k - 1 <= n
        let (k, last) = adaptive_k(33, &cfg);
        assert!(last);
        assert!(alpha_of(33) * k - 1 <= 33);
    }

    #[test]
    fn trivial_inputs() {
        let mut e: [u64; 0] = [];
        sort(&mut e);
        let mut v = [3u64, 1, 2];
        sort(&mut v);
        assert_eq!(v, [1, 2, 3]);
        let mut v = [2u64, 1];
        base_case(&mut v, &lt);
        assert_eq!(v, [1, 2]);
    }

    #[test]
    fn ones_take_one_step() {
        for t in [1, 2, 4] {
            let mut v = vec![1u64; 100_000];
            let cfg = default_config(v.len(), 8, t);
            let c = sort_with_config(&mut v, lt, &cfg).unwrap();
            assert_eq!(c.partition_steps, 1, "t={t}");
        }
    }

    #[test]
    fn strict_mode_has_no_stack() {
        let mut v: Vec<u64> = (0..200_000u64).map(|i| i.wrapping_mul(0x9e37_79b9_7f4a_7c15) >> 20).collect();
        let mut w = v.clone();
        let cfg = default_config(v.len(), 8, 1);
        let normal = sort_with_config(&mut v, lt, &cfg).unwrap();
        let strict = sort_strict_in_place(&mut w, lt, &cfg).unwrap();
        assert_eq!(v, w);
        assert_eq!(strict.max_recursion_depth, 0);
        assert!(normal.max_recursion_depth >= 2);
        assert_eq!(
            normal.peak_aux_bytes - strict.peak_aux_bytes,
            FRAME_BYTES as u64 * normal.max_recursion_depth
        );
    }

    #[test]
    fn k_max_two_makes_progress() {
        let mut v: Vec<u64> = (0..5000).map(|i| if i % 50 == 0 { 2 } else { 1 }).collect();
        let mut cfg = default_config(v.len(), 8, 1);
        cfg.k_max = 2;
        sort_with_config(&mut v, lt, &cfg).unwrap();
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
        let mut w: Vec<u64> = (0..5000).map(|i| if i % 50 == 0 { 2 } else { 1 }).collect();
        sort_strict_in_place(&mut w, lt, &cfg).unwrap();
        assert_eq!(v, w);
    }

    #[test]
    fn inconsistent_comparator_completes() {
        let mut v: Vec<u64> = (0..20_000u64).map(|i| i.wrapping_mul(2654435761) % 1000).collect();
        let weird = |a: &u64, b: &u64| (a ^ 0x155) % 7 < (b.rotate_left(3)) % 11;
        for t in [1, 3] {
            let cfg = default_config(v.len(), 8, t);
            sort_with_config(&mut v, weird, &cfg).unwrap();
        }
    }
}
