//! Single-threaded replay of one partition step with `t` simulated threads,
//! checking the phase invariants after every permutation step.
//!
//! Exposed for test suites; not part of the sorting API.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::AtomicUsize;
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classifier::{draw_sample, select_splitters, Classifier};
use crate::cleanup::{assign_buckets, CleanupView};
use crate::config::alpha_of;
use crate::local::{classify_stripe, BufferSet};
use crate::permute::{
    compute_delimiters, fill_empty_blocks, full_blocks_per_bucket, stripe_bounds, BucketPointer, Delimiters,
    PermuteCtx, PermuteStep, PermuteWorker, StripeSpan,
};
use crate::raw::RawSlice;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepReport {
    pub num_buckets: usize,
    /// Permutation steps taken by all simulated threads.
    pub permutation_steps: usize,
    /// Blocks verified to be in their final bucket.
    pub blocks_checked: usize,
    pub block_moves: u64,
}

/// Tracks, per bucket, how many final blocks have already been verified.
struct ZoneChecker {
    verified: Vec<usize>,
}

impl ZoneChecker {
    fn new(d: &Delimiters, b: usize) -> Self {
        ZoneChecker {
            verified: d.block[..d.num_buckets()].iter().map(|x| x / b).collect(),
        }
    }

    /// Every bucket must look like `final* unprocessed* empty*` within its
    /// block range, and final blocks must hold only elements of the bucket.
    fn check<T: Copy, C: Fn(&T, &T) -> bool>(
        &mut self,
        data: &[T],
        d: &Delimiters,
        pointers: &[BucketPointer],
        b: usize,
        classifier: &Classifier<T>,
        less: &C,
    ) -> Result<usize, String> {
        let n = data.len();
        let mut checked = 0;
        for (i, p) in pointers.iter().enumerate() {
            let (w, r) = p.load();
            let (w, r) = (w as i64, r as i64);
            let lo = (d.block[i] / b) as i64;
            let hi = (d.block[i + 1] / b) as i64;
            if w < lo || w > hi {
                return Err(format!("bucket {i}: write cursor {w} outside [{lo}, {hi}]"));
            }
            if r < lo - 1 || r >= hi {
                return Err(format!("bucket {i}: read cursor {r} outside [{}, {hi})", lo - 1));
            }
            while (self.verified[i] as i64) < w {
                let blk = self.verified[i];
                let start = blk * b;
                if start + b <= n {
                    if data[start..start + b].iter().any(|x| classifier.classify(x, less) != i) {
                        return Err(format!("bucket {i}: final block {blk} holds a foreign element"));
                    }
                    checked += 1;
                }
                self.verified[i] += 1;
            }
        }
        Ok(checked)
    }
}

/// Runs one non-last-level partition step on `v` with `t` simulated
/// threads interleaved round-robin at permutation-step granularity.
/// Cleanup runs the threads in reverse order. Fails with a description of
/// the first broken invariant.
pub fn replay_step<T, F>(v: &mut [T], k: usize, b: usize, t: usize, seed: u64, less: &F) -> Result<StepReport, String>
where
    T: Copy + Send + Sync,
    F: Fn(&T, &T) -> bool + Sync,
{
    let n = v.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, _) = draw_sample(v, alpha_of(n), k, &mut rng, less).ok_or("input too small for the sample")?;
    let spl = select_splitters(&v[..m], k, less);
    let classifier = Classifier::new(&spl);
    let nb = classifier.num_buckets();
    let filler = v[0];

    let mut buffers: Vec<BufferSet<T>> = (0..t).map(|_| BufferSet::new(nb, b, filler)).collect();
    let mut totals = vec![0usize; nb];
    let mut stripes = Vec::with_capacity(t);
    for (s, buf) in buffers.iter_mut().enumerate() {
        let (lo, hi) = stripe_bounds(n, b, t, s);
        let mut counts = vec![0; nb];
        let st = classify_stripe(&mut v[lo..hi], &classifier, buf, &mut counts, less);
        if st.write % b != 0 {
            return Err(format!("stripe {s}: flushed region not block aligned"));
        }
        for (x, c) in totals.iter_mut().zip(&counts) {
            *x += c;
        }
        stripes.push(StripeSpan { begin: lo, write: lo + st.write, end: hi });
    }
    let d = compute_delimiters(&totals, 0, b);
    let mut full = Vec::new();
    full_blocks_per_bucket(&stripes, &d, &mut full, b);
    let mut report = StepReport {
        num_buckets: nb,
        ..StepReport::default()
    };
    if t > 1 {
        let raw = RawSlice::new(v);
        for tid in 0..t {
            report.block_moves += fill_empty_blocks(raw, 0, tid, &stripes, &d, &full, b);
        }
    }
    let pointers: Vec<BucketPointer> = (0..nb).map(|_| BucketPointer::default()).collect();
    for i in 0..nb {
        let w = d.block[i] / b;
        pointers[i].set(w as i32, (w + full[i]) as i32 - 1);
    }
    let overflow = Mutex::new(vec![filler; b]);
    let overflow_bucket = AtomicUsize::new(usize::MAX);
    let mut checker = ZoneChecker::new(&d, b);
    report.blocks_checked += checker.check(v, &d, &pointers, b, &classifier, less)?;

    let mut workers: Vec<PermuteWorker> = (0..t).map(|tid| PermuteWorker::new(tid, t, nb)).collect();
    let mut swaps: Vec<[Vec<T>; 2]> = (0..t).map(|_| [vec![filler; b], vec![filler; b]]).collect();
    let mut done = vec![false; t];
    while done.iter().any(|x| !x) {
        for tid in 0..t {
            if done[tid] {
                continue;
            }
            let ctx = PermuteCtx {
                data: RawSlice::new(v),
                begin: 0,
                n,
                b,
                classifier: &classifier,
                pointers: &pointers,
                overflow: &overflow,
                overflow_bucket: &overflow_bucket,
                less,
            };
            let step = workers[tid].step(&ctx, &mut swaps[tid]);
            report.permutation_steps += 1;
            if step == PermuteStep::Done {
                done[tid] = true;
            }
            report.blocks_checked += checker.check(v, &d, &pointers, b, &classifier, less)?;
        }
    }
    report.block_moves += workers.iter().map(|w| w.stats.block_moves).sum::<u64>();
    for i in 0..nb {
        let (w, r) = pointers[i].load();
        if r >= w {
            return Err(format!("bucket {i}: unprocessed blocks left after permutation"));
        }
    }

    // heads are saved before any thread writes
    let ob = overflow_bucket.load(std::sync::atomic::Ordering::SeqCst);
    let ob = (ob != usize::MAX).then_some(ob);
    let write_blocks: Vec<usize> = pointers.iter().map(|p| p.load().0 as usize).collect();
    let heads: Vec<(usize, Vec<T>)> = (0..t)
        .map(|tid| {
            let (_, bh) = assign_buckets(nb, t, tid);
            let boundary = d.exact[bh];
            let end = d.block[bh].min(n);
            (boundary, v[boundary..end.max(boundary)].to_vec())
        })
        .collect();
    let overflow = overflow.into_inner().unwrap();
    let residuals: Vec<&BufferSet<T>> = buffers.iter().collect();
    let raw = RawSlice::new(v);
    for tid in (0..t).rev() {
        let (bl, bh) = assign_buckets(nb, t, tid);
        let view = CleanupView {
            data: raw,
            begin: 0,
            b,
            delims: &d,
            write_blocks: &write_blocks,
            overflow: &overflow,
            overflow_bucket: ob,
            residuals: &residuals,
            head: &heads[tid].1,
            boundary: heads[tid].0,
        };
        catch_unwind(AssertUnwindSafe(|| {
            for j in bl..bh {
                view.bucket(j);
            }
        }))
        .map_err(|e| {
            e.downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| e.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "cleanup panicked".into())
        })?;
    }

    for i in 0..nb {
        if let Some(p) = (d.exact[i]..d.exact[i + 1]).find(|&p| classifier.classify(&v[p], less) != i) {
            return Err(format!("bucket {i}: position {p} holds a foreign element after cleanup"));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replays_small_instances() {
        let lt = |a: &u32, b: &u32| a < b;
        for (n, b, t, k) in [(1000, 4, 1, 8), (1000, 4, 3, 8), (57, 1, 2, 4), (4099, 8, 4, 8), (300, 8, 5, 2)] {
            let orig: Vec<u32> = (0..n as u32).map(|i| i.wrapping_mul(2654435761) % 977).collect();
            let mut v = orig.clone();
            let r = replay_step(&mut v, k, b, t, 1, &lt).unwrap();
            assert!(r.permutation_steps > 0);
            let (mut a, mut c) = (orig, v);
            a.sort();
            c.sort();
            assert_eq!(a, c);
        }
    }
}
