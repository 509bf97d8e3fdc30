//! Input distributions.
//!
//! Keys are produced in blocks of [`BLOCK`] indices, each with its own
//! generator stream, so any block can be produced independently.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elements::Element;

/// Indices per generator stream.
pub const BLOCK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Distribution {
    Uniform,
    Exponential,
    AlmostSorted,
    RootDup,
    TwoDup,
    EightDup,
    Sorted,
    ReverseSorted,
    Ones,
}

impl Distribution {
    pub const ALL: [Distribution; 9] = [
        Distribution::Uniform,
        Distribution::Exponential,
        Distribution::AlmostSorted,
        Distribution::RootDup,
        Distribution::TwoDup,
        Distribution::EightDup,
        Distribution::Sorted,
        Distribution::ReverseSorted,
        Distribution::Ones,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Distribution::Uniform => "uniform",
            Distribution::Exponential => "exponential",
            Distribution::AlmostSorted => "almostsorted",
            Distribution::RootDup => "rootdup",
            Distribution::TwoDup => "twodup",
            Distribution::EightDup => "eightdup",
            Distribution::Sorted => "sorted",
            Distribution::ReverseSorted => "reversesorted",
            Distribution::Ones => "ones",
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Distribution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.to_ascii_lowercase().replace(['-', '_'], "");
        Distribution::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| format!("unknown distribution '{s}'"))
    }
}

fn stream(seed: u64, block: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    rng
}

/// Uniform `[0, 1)` variates, one stream per block.
fn uniform(n: usize, seed: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    for block in 0..n.div_ceil(BLOCK) {
        let mut rng = stream(seed, block);
        let len = BLOCK.min(n - block * BLOCK);
        out.extend((0..len).map(|_| rng.gen::<f64>()));
    }
    out
}

fn isqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

fn pow_mod(base: u64, mut exp: u32, m: u64) -> u64 {
    let m = m as u128;
    let mut b = base as u128 % m;
    let mut acc = 1u128 % m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        exp >>= 1;
    }
    acc as u64
}

/// `(i^e + n/2) mod n` for every index.
fn power_dup(n: usize, e: u32) -> Vec<f64> {
    let m = n as u64;
    (0..m).map(|i| ((pow_mod(i, e, m) + m / 2) % m) as f64).collect()
}

/// Keys of `dist`; a pure function of `(dist, n, seed)`.
pub fn generate_keys(dist: Distribution, n: usize, seed: u64) -> Vec<f64> {
    match dist {
        Distribution::Uniform => uniform(n, seed),
        Distribution::Exponential => uniform(n, seed).into_iter().map(|u| -(1.0 - u).ln()).collect(),
        Distribution::Sorted => {
            let mut v = uniform(n, seed);
            v.sort_by(f64::total_cmp);
            v
        }
        Distribution::ReverseSorted => {
            let mut v = uniform(n, seed);
            v.sort_by(|a, b| b.total_cmp(a));
            v
        }
        Distribution::AlmostSorted => {
            let mut v = uniform(n, seed);
            v.sort_by(f64::total_cmp);
            if n > 1 {
                // a separate stream after the ones used for the keys
                let mut rng = stream(seed, n.div_ceil(BLOCK) + 1);
                for _ in 0..isqrt(n - 1) + 1 {
                    let i = rng.gen_range(0..n);
                    let j = rng.gen_range(0..n);
                    v.swap(i, j);
                }
            }
            v
        }
        Distribution::RootDup => {
            let r = isqrt(n).max(1);
            (0..n).map(|i| (i % r) as f64).collect()
        }
        Distribution::TwoDup => power_dup(n, 2),
        Distribution::EightDup => power_dup(n, 8),
        Distribution::Ones => vec![1.0; n],
    }
}

/// Elements of kind `E` with keys from `dist`.
pub fn generate<E: Element>(dist: Distribution, n: usize, seed: u64) -> Vec<E> {
    generate_keys(dist, n, seed).into_iter().map(E::from_key).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn distinct(v: &[f64]) -> usize {
        v.iter().map(|x| x.to_bits()).collect::<HashSet<_>>().len()
    }

    #[test]
    fn formula_examples() {
        let r = generate_keys(Distribution::RootDup, 16, 0);
        assert_eq!(r, [0., 1., 2., 3., 0., 1., 2., 3., 0., 1., 2., 3., 0., 1., 2., 3.]);
        assert_eq!(generate_keys(Distribution::TwoDup, 8, 0), [4., 5., 0., 5., 4., 5., 0., 5.]);
        assert_eq!(generate_keys(Distribution::Ones, 5, 0), [1.; 5]);
    }

    #[test]
    fn eight_dup_matches_exact_arithmetic() {
        let n = 1000u128;
        let v = generate_keys(Distribution::EightDup, n as usize, 0);
        for i in [0u128, 1, 2, 3, 17, 999] {
            let exact = (i.pow(8) + n / 2) % n;
            assert_eq!(v[i as usize], exact as f64);
        }
        // beyond u64 range of i^8
        let n = 100_003usize;
        let v = generate_keys(Distribution::EightDup, n, 0);
        let i = 99_999u128;
        let big = i.pow(4) % n as u128;
        let exact = (big * big % n as u128 + n as u128 / 2) % n as u128;
        assert_eq!(v[i as usize], exact as f64);
    }

    #[test]
    fn deterministic_and_seeded() {
        for d in Distribution::ALL {
            assert_eq!(generate_keys(d, 3000, 9), generate_keys(d, 3000, 9), "{d}");
        }
        assert_ne!(generate_keys(Distribution::Uniform, 100, 1), generate_keys(Distribution::Uniform, 100, 2));
    }

    #[test]
    fn blocks_are_independent() {
        let long = generate_keys(Distribution::Uniform, BLOCK + 10, 3);
        let short = generate_keys(Distribution::Uniform, 10, 3);
        assert_eq!(&long[..10], &short[..]);
    }

    #[test]
    fn duplicate_structure() {
        let n = 10_000;
        assert_eq!(distinct(&generate_keys(Distribution::Ones, n, 0)), 1);
        assert_eq!(distinct(&generate_keys(Distribution::RootDup, n, 0)), 100);
        assert!(distinct(&generate_keys(Distribution::TwoDup, n, 0)) < n / 2);
        let s = generate_keys(Distribution::Sorted, n, 0);
        assert!(s.windows(2).all(|w| w[0] <= w[1]));
        let r = generate_keys(Distribution::ReverseSorted, n, 0);
        assert!(r.windows(2).all(|w| w[0] >= w[1]));
        let e = generate_keys(Distribution::Exponential, n, 0);
        assert!(e.iter().all(|x| *x >= 0.0));
        let mean = e.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn almost_sorted_is_close_to_sorted() {
        let n = 10_000;
        let a = generate_keys(Distribution::AlmostSorted, n, 4);
        let mut s = a.clone();
        s.sort_by(f64::total_cmp);
        let displaced = a.iter().zip(&s).filter(|(x, y)| x != y).count();
        assert!(displaced > 0 && displaced <= 2 * 100, "{displaced}");
    }

    #[test]
    fn tiny_sizes() {
        for d in Distribution::ALL {
            assert!(generate_keys(d, 0, 1).is_empty());
            assert_eq!(generate_keys(d, 1, 1).len(), 1);
        }
    }

    #[test]
    fn names_roundtrip() {
        for d in Distribution::ALL {
            assert_eq!(d.name().parse::<Distribution>().unwrap(), d);
        }
        assert_eq!("Almost-Sorted".parse::<Distribution>().unwrap(), Distribution::AlmostSorted);
    }
}
