//! Small sorts: insertion sort for base cases, heapsort for sample sorting
//! and for oversized buckets on the last recursion level.
//!
//! Both return the number of element writes they performed.

/// Insertion sort. Worst case `n(n-1)/2` comparisons.
pub fn insertion_sort<T: Copy, F: Fn(&T, &T) -> bool>(v: &mut [T], less: &F) -> u64 {
    let mut writes = 0u64;
    for i in 1..v.len() {
        let x = v[i];
        let mut j = i;
        while j > 0 && less(&x, &v[j - 1]) {
            v[j] = v[j - 1];
            j -= 1;
        }
        if j != i {
            v[j] = x;
            writes += (i - j + 1) as u64;
        }
    }
    writes
}

/// In-place heapsort, `O(n log n)` worst case and constant extra space.
pub fn heapsort<T: Copy, F: Fn(&T, &T) -> bool>(v: &mut [T], less: &F) -> u64 {
    let mut writes = 0u64;
    let n = v.len();
    if n < 2 {
        return 0;
    }
    for start in (0..n / 2).rev() {
        writes += sift_down(v, start, n, less);
    }
    for end in (1..n).rev() {
        v.swap(0, end);
        writes += 2;
        writes += sift_down(v, 0, end, less);
    }
    writes
}

fn sift_down<T: Copy, F: Fn(&T, &T) -> bool>(v: &mut [T], mut node: usize, end: usize, less: &F) -> u64 {
    let x = v[node];
    let mut writes = 0;
    loop {
        let mut child = 2 * node + 1;
        if child >= end {
            break;
        }
        if child + 1 < end && less(&v[child], &v[child + 1]) {
            child += 1;
        }
        if !less(&x, &v[child]) {
            break;
        }
        v[node] = v[child];
        writes += 1;
        node = child;
    }
    if writes > 0 {
        v[node] = x;
        writes += 1;
    }
    writes
}

/// Sorts a finished bucket: insertion sort up to `small`, heapsort beyond.
pub(crate) fn sort_small<T: Copy, F: Fn(&T, &T) -> bool>(v: &mut [T], small: usize, less: &F) -> u64 {
    if v.len() <= small {
        insertion_sort(v, less)
    } else {
        heapsort(v, less)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::cell::Cell;

    #[test]
    fn two_elements() {
        let mut v = [2, 1];
        insertion_sort(&mut v, &|a: &i32, b: &i32| a < b);
        assert_eq!(v, [1, 2]);
    }

    #[test]
    fn empty_is_noop() {
        let mut v: [u8; 0] = [];
        assert_eq!(insertion_sort(&mut v, &|a: &u8, b: &u8| a < b), 0);
        assert_eq!(heapsort(&mut v, &|a: &u8, b: &u8| a < b), 0);
    }

    #[test]
    fn sixteen_elements_comparison_bound() {
        let calls = Cell::new(0u64);
        let less = |a: &u32, b: &u32| {
            calls.set(calls.get() + 1);
            a < b
        };
        // reverse order is the worst case
        let mut v: Vec<u32> = (0..16).rev().collect();
        insertion_sort(&mut v, &less);
        assert_eq!(v, (0..16).collect::<Vec<_>>());
        assert_eq!(calls.get(), 120);
        let mut state = 12345u64;
        for _ in 0..100 {
            let mut v: Vec<u32> = (0..16)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (state >> 40) as u32
                })
                .collect();
            calls.set(0);
            insertion_sort(&mut v, &less);
            assert!(v.windows(2).all(|w| w[0] <= w[1]));
            assert!(calls.get() <= 120);
        }
    }

    proptest! {
        #[test]
        fn sorts_match_std(mut v in proptest::collection::vec(0u16..50, 0..300)) {
            let mut expected = v.clone();
            expected.sort();
            let mut h = v.clone();
            heapsort(&mut h, &|a: &u16, b: &u16| a < b);
            insertion_sort(&mut v, &|a: &u16, b: &u16| a < b);
            prop_assert_eq!(&v, &expected);
            prop_assert_eq!(&h, &expected);
        }
    }
}
