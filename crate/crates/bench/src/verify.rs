//! Output verification: sortedness plus an order-independent multiset digest.

use crate::elements::{Element, Mix};

/// Wrapping sum of a 128-bit mix of every element. Independent of order.
pub fn digest<E: Element>(v: &[E]) -> u128 {
    v.iter().fold(0u128, |acc, x| {
        let mut h = Mix::new();
        x.absorb(&mut h);
        acc.wrapping_add(h.finish())
    })
}

/// Digest of the elements in order; equal iff the sequences are equal (up to collisions).
pub fn sequence_digest<E: Element>(v: &[E]) -> u128 {
    let mut h = Mix::new();
    for x in v {
        let mut e = Mix::new();
        x.absorb(&mut e);
        let d = e.finish();
        h.word(d as u64);
        h.word((d >> 64) as u64);
    }
    h.finish()
}

pub fn is_sorted<E: Element>(v: &[E]) -> bool {
    v.windows(2).all(|w| !E::less(&w[1], &w[0]))
}

/// True iff `output` is nondecreasing and holds the multiset digested into `input_digest`.
pub fn verify<E: Element>(input_digest: u128, output: &[E]) -> bool {
    is_sorted(output) && digest(output) == input_digest
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements::{Double, Pair};

    fn elems(keys: &[f64]) -> Vec<Pair> {
        keys.iter().map(|&k| Pair::from_key(k)).collect()
    }

    #[test]
    fn sorted_permutation_verifies() {
        let input = elems(&[3.0, 1.0, 2.0, 1.0]);
        let d = digest(&input);
        let out = elems(&[1.0, 1.0, 2.0, 3.0]);
        assert!(verify(d, &out));
    }

    #[test]
    fn replaced_element_fails() {
        let input = elems(&[3.0, 1.0, 2.0]);
        let d = digest(&input);
        assert!(!verify(d, &elems(&[1.0, 2.0, 4.0])));
        assert!(!verify(d, &elems(&[1.0, 2.0])));
        assert!(!verify(d, &elems(&[2.0, 1.0, 3.0])));
    }

    #[test]
    fn swapping_equal_keys_keeps_digest() {
        let a = elems(&[1.0, 5.0, 5.0, 7.0]);
        let mut b = a.clone();
        b.swap(1, 2);
        assert_eq!(digest(&a), digest(&b));
        assert!(verify(digest(&a), &b));
    }

    #[test]
    fn sequence_digest_sees_order() {
        let a = [Double(1.0), Double(2.0)];
        let b = [Double(2.0), Double(1.0)];
        assert_eq!(digest(&a), digest(&b));
        assert_ne!(sequence_digest(&a), sequence_digest(&b));
    }
}
