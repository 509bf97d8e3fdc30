//! Sampling, splitter selection and branchless element classification.
//!
//! Splitters are stored as an implicit complete binary search tree
//! (`tree[1]` is the median splitter, children of node `i` are `2i` and
//! `2i + 1`). Classification descends `log2 k` levels, turning each
//! comparison result into an index increment instead of a branch.
//!
//! Bucket indices are zero-based. Without equality buckets element `e`
//! goes to bucket `i` when `s_i <= e < s_{i+1}` (`s_0 = -inf`,
//! `s_k = +inf`). With equality buckets the index space doubles: even
//! index `2i` holds the open interval `(s_i, s_{i+1})`, odd index `2i - 1`
//! holds the elements equivalent to `s_i`. The last index `2k - 1` is
//! never used.

use rand::Rng;

use crate::base_case::heapsort;

/// Number of elements classified together by [`Classifier::classify_batch`].
pub const BATCH: usize = 4;

/// Splitters selected from a sorted sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Splitters<T> {
    /// Strictly increasing, padded to `k - 1` entries by repeating the last one.
    values: Vec<T>,
    /// Number of distinct splitters before padding.
    distinct: usize,
    k: usize,
    use_equality_buckets: bool,
}

impl<T: Copy> Splitters<T> {
    /// Builds splitters from strictly increasing `distinct` values.
    ///
    /// Panics if `distinct` is empty.
    pub fn from_distinct(distinct: &[T], use_equality_buckets: bool) -> Self {
        assert!(!distinct.is_empty(), "at least one splitter required");
        let m = distinct.len();
        let k = (m + 1).next_power_of_two().max(2);
        let mut values = distinct.to_vec();
        let last = distinct[m - 1];
        values.resize(k - 1, last);
        Splitters {
            values,
            distinct: m,
            k,
            use_equality_buckets,
        }
    }

    /// Distinct splitters in increasing order.
    pub fn values(&self) -> &[T] {
        &self.values[..self.distinct]
    }

    /// Splitters including padding (`k - 1` entries).
    pub fn padded(&self) -> &[T] {
        &self.values
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn use_equality_buckets(&self) -> bool {
        self.use_equality_buckets
    }

    /// Size of the bucket index space.
    pub fn num_buckets(&self) -> usize {
        if self.use_equality_buckets {
            2 * self.k
        } else {
            self.k
        }
    }
}

/// Breadth-first layout of the balanced search tree over the splitters.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchTree<T> {
    /// `nodes[0]` is the tree root `a_1`.
    nodes: Vec<T>,
    log_k: u32,
}

impl<T: Copy> SearchTree<T> {
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn log_k(&self) -> u32 {
        self.log_k
    }

    /// In-order traversal; yields the padded splitters.
    pub fn in_order(&self) -> Vec<T> {
        fn walk<T: Copy>(nodes: &[T], i: usize, out: &mut Vec<T>) {
            if i > nodes.len() {
                return;
            }
            walk(nodes, 2 * i, out);
            out.push(nodes[i - 1]);
            walk(nodes, 2 * i + 1, out);
        }
        let mut out = Vec::with_capacity(self.nodes.len());
        walk(&self.nodes, 1, &mut out);
        out
    }
}

pub fn build_tree<T: Copy>(spl: &Splitters<T>) -> SearchTree<T> {
    let k = spl.k;
    let nodes = (1..k)
        .map(|i| {
            let level = usize::BITS - 1 - i.leading_zeros();
            let pos = i - (1 << level);
            // one-based splitter index
            let s = (2 * pos + 1) * (k >> (level + 1));
            spl.values[s - 1]
        })
        .collect();
    SearchTree {
        nodes,
        log_k: k.trailing_zeros(),
    }
}

/// Swaps `alpha * k - 1` randomly chosen elements of `v` to its front and
/// sorts them there. Returns the sample length and the number of element
/// writes, or `None` if `v` is too small.
pub fn draw_sample<T: Copy, F: Fn(&T, &T) -> bool, R: Rng + ?Sized>(
    v: &mut [T],
    alpha: usize,
    k: usize,
    rng: &mut R,
    less: &F,
) -> Option<(usize, u64)> {
    let m = (alpha * k).checked_sub(1)?;
    let n = v.len();
    if m == 0 || m > n {
        return None;
    }
    let mut writes = 0u64;
    for i in 0..m {
        let j = rng.gen_range(i..n);
        if i != j {
            v.swap(i, j);
            writes += 2;
        }
    }
    writes += heapsort(&mut v[..m], less);
    Some((m, writes))
}

/// Picks `k - 1` equidistant splitters from a sorted sample of `alpha * k - 1`
/// elements, removes duplicates and shrinks `k` accordingly.
///
/// Equality buckets are enabled iff a duplicate was removed.
pub fn select_splitters<T: Copy, F: Fn(&T, &T) -> bool>(
    sorted_sample: &[T],
    k: usize,
    less: &F,
) -> Splitters<T> {
    assert!(k >= 2 && k.is_power_of_two());
    assert!(!sorted_sample.is_empty());
    let alpha = ((sorted_sample.len() + 1) / k).max(1);
    let mut distinct: Vec<T> = Vec::with_capacity(k - 1);
    let mut removed = false;
    for i in 1..k {
        let idx = (i * alpha - 1).min(sorted_sample.len() - 1);
        let s = sorted_sample[idx];
        match distinct.last() {
            Some(prev) if !less(prev, &s) => removed = true,
            _ => distinct.push(s),
        }
    }
    Splitters::from_distinct(&distinct, removed)
}

/// Splitters in search-tree form, ready for classification.
#[derive(Debug, Clone)]
pub struct Classifier<T> {
    /// One-based tree: `tree[0]` is a filler copy of the root.
    tree: Vec<T>,
    /// `sorted[l]` is `s_l` for `l >= 1`; `sorted[0]` is a filler.
    sorted: Vec<T>,
    log_k: u32,
    k: usize,
    equality: bool,
}

impl<T: Copy> Classifier<T> {
    pub fn new(spl: &Splitters<T>) -> Self {
        let mut c = Classifier {
            tree: Vec::with_capacity(spl.k),
            sorted: Vec::with_capacity(spl.k),
            log_k: 0,
            k: 0,
            equality: false,
        };
        c.reset(spl);
        c
    }

    /// Rebuilds in place, keeping the allocations.
    pub fn reset(&mut self, spl: &Splitters<T>) {
        let tree = build_tree(spl);
        self.tree.clear();
        self.tree.push(tree.nodes[0]);
        self.tree.extend_from_slice(&tree.nodes);
        self.sorted.clear();
        self.sorted.push(spl.values[0]);
        self.sorted.extend_from_slice(&spl.values);
        self.log_k = tree.log_k;
        self.k = spl.k;
        self.equality = spl.use_equality_buckets;
    }

    /// Reserves room for up to `k` buckets so later resets do not allocate.
    pub fn reserve(&mut self, k: usize) {
        self.tree.reserve(k.saturating_sub(self.tree.len()));
        self.sorted.reserve(k.saturating_sub(self.sorted.len()));
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn log_k(&self) -> u32 {
        self.log_k
    }

    pub fn use_equality_buckets(&self) -> bool {
        self.equality
    }

    pub fn num_buckets(&self) -> usize {
        if self.equality {
            2 * self.k
        } else {
            self.k
        }
    }

    /// True if `bucket` only receives elements equivalent to one splitter.
    pub fn is_equality_bucket(&self, bucket: usize) -> bool {
        self.equality && bucket % 2 == 1
    }

    /// Padded splitters `s_1 ..= s_{k-1}`.
    pub fn splitters(&self) -> &[T] {
        &self.sorted[1..]
    }

    #[inline(always)]
    fn node(&self, i: usize) -> &T {
        debug_assert!(i < self.tree.len());
        // SAFETY: descent visits inner nodes 1..k only, and the tree holds k entries
        unsafe { self.tree.get_unchecked(i) }
    }

    #[inline(always)]
    fn leaf_to_bucket<F: Fn(&T, &T) -> bool>(&self, leaf: usize, e: &T, less: &F) -> usize {
        if self.equality {
            // `leaf != 0` masks the comparison against the filler instead of branching
            let eq = (leaf != 0) & !less(&self.sorted[leaf], e);
            2 * leaf - eq as usize
        } else {
            leaf
        }
    }

    /// Bucket of `e`. Performs exactly `log2 k` comparisons, plus one with
    /// equality buckets.
    #[inline]
    pub fn classify<F: Fn(&T, &T) -> bool>(&self, e: &T, less: &F) -> usize {
        let mut b = 1usize;
        for _ in 0..self.log_k {
            b = 2 * b + !less(e, self.node(b)) as usize;
        }
        self.leaf_to_bucket(b - self.k, e, less)
    }

    /// Classifies `elems` into `out`, descending [`BATCH`] trees at once.
    pub fn classify_batch_into<F: Fn(&T, &T) -> bool>(&self, elems: &[T], out: &mut [usize], less: &F) {
        assert_eq!(elems.len(), out.len());
        let mut chunks = elems.chunks_exact(BATCH);
        let mut outs = out.chunks_exact_mut(BATCH);
        for (c, o) in (&mut chunks).zip(&mut outs) {
            let mut b = [1usize; BATCH];
            for _ in 0..self.log_k {
                for j in 0..BATCH {
                    b[j] = 2 * b[j] + !less(&c[j], self.node(b[j])) as usize;
                }
            }
            for j in 0..BATCH {
                o[j] = self.leaf_to_bucket(b[j] - self.k, &c[j], less);
            }
        }
        for (e, o) in chunks.remainder().iter().zip(outs.into_remainder()) {
            *o = self.classify(e, less);
        }
    }

    pub fn classify_batch<F: Fn(&T, &T) -> bool>(&self, elems: &[T], less: &F) -> Vec<usize> {
        let mut out = vec![0; elems.len()];
        self.classify_batch_into(elems, &mut out, less);
        out
    }

    /// Bytes held by this classifier.
    pub fn heap_bytes(&self) -> usize {
        (self.tree.capacity() + self.sorted.capacity()) * std::mem::size_of::<T>()
    }
}
