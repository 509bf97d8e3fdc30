//! Shared view of the input slice used by the worker threads.
//!
//! Threads access disjoint ranges, separated by barriers or by the
//! bucket pointer protocol of the block permutation. All accessors are
//! `unsafe`: the caller guarantees that no other thread writes the range
//! it touches at the same time.

use std::marker::PhantomData;
use std::ptr;

pub(crate) struct RawSlice<'a, T> {
    ptr: *mut T,
    len: usize,
    _marker: PhantomData<&'a mut [T]>,
}

impl<T> Clone for RawSlice<'_, T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T> Copy for RawSlice<'_, T> {}

unsafe impl<T: Send> Send for RawSlice<'_, T> {}
unsafe impl<T: Send> Sync for RawSlice<'_, T> {}

impl<'a, T: Copy> RawSlice<'a, T> {
    pub(crate) fn new(v: &'a mut [T]) -> Self {
        RawSlice {
            ptr: v.as_mut_ptr(),
            len: v.len(),
            _marker: PhantomData,
        }
    }

    #[inline(always)]
    pub(crate) unsafe fn get(&self, i: usize) -> T {
        debug_assert!(i < self.len);
        ptr::read(self.ptr.add(i))
    }

    #[inline(always)]
    pub(crate) unsafe fn set(&self, i: usize, x: T) {
        debug_assert!(i < self.len);
        ptr::write(self.ptr.add(i), x)
    }

    /// Copies `out.len()` elements starting at `start` into `out`.
    #[inline]
    pub(crate) unsafe fn read_into(&self, start: usize, out: &mut [T]) {
        debug_assert!(start + out.len() <= self.len);
        ptr::copy_nonoverlapping(self.ptr.add(start), out.as_mut_ptr(), out.len());
    }

    /// Copies `src` to positions `start..start + src.len()`.
    #[inline]
    pub(crate) unsafe fn write_from(&self, start: usize, src: &[T]) {
        debug_assert!(start + src.len() <= self.len);
        ptr::copy_nonoverlapping(src.as_ptr(), self.ptr.add(start), src.len());
    }

    /// Copies a non-overlapping range within the slice.
    #[inline]
    pub(crate) unsafe fn copy_within(&self, src: usize, dst: usize, count: usize) {
        debug_assert!(src + count <= self.len && dst + count <= self.len);
        debug_assert!(src + count <= dst || dst + count <= src);
        ptr::copy_nonoverlapping(self.ptr.add(src), self.ptr.add(dst), count);
    }

    #[inline]
    pub(crate) unsafe fn slice(&self, lo: usize, hi: usize) -> &'a [T] {
        debug_assert!(lo <= hi && hi <= self.len);
        std::slice::from_raw_parts(self.ptr.add(lo), hi - lo)
    }

    #[inline]
    #[allow(clippy::mut_from_ref)]
    pub(crate) unsafe fn slice_mut(&self, lo: usize, hi: usize) -> &'a mut [T] {
        debug_assert!(lo <= hi && hi <= self.len);
        std::slice::from_raw_parts_mut(self.ptr.add(lo), hi - lo)
    }
}
