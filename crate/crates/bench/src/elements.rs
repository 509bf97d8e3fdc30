//! Element types of the benchmark. Every element is built from an `f64`
//! key; payloads and secondary keys are functions of that key, so equal
//! keys always give bitwise equal elements.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Double,
    Pair,
    Quartet,
    Bytes100,
}

impl ElementKind {
    pub const ALL: [ElementKind; 4] = [ElementKind::Double, ElementKind::Pair, ElementKind::Quartet, ElementKind::Bytes100];

    pub fn name(self) -> &'static str {
        match self {
            ElementKind::Double => "double",
            ElementKind::Pair => "pair",
            ElementKind::Quartet => "quartet",
            ElementKind::Bytes100 => "bytes100",
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ElementKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ElementKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown element kind '{s}'"))
    }
}

/// An element the harness can generate, sort and digest.
pub trait Element: Copy + Send + Sync + 'static {
    const KIND: ElementKind;
    fn from_key(key: f64) -> Self;
    fn less(a: &Self, b: &Self) -> bool;
    /// Feeds every byte-relevant field to `h`.
    fn absorb(&self, h: &mut Mix);
}

/// Two independent 64-bit lanes of splitmix-style mixing.
#[derive(Debug, Clone, Copy)]
pub struct Mix {
    a: u64,
    b: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Mix {
    pub fn new() -> Self {
        Mix {
            a: 0x243f_6a88_85a3_08d3,
            b: 0x1319_8a2e_0370_7344,
        }
    }

    pub fn word(&mut self, x: u64) {
        self.a = splitmix(self.a ^ x);
        self.b = splitmix(self.b.rotate_left(17) ^ x ^ 0xa409_3822_299f_31d0);
    }

    pub fn finish(self) -> u128 {
        ((self.a as u128) << 64) | self.b as u128
    }
}

impl Default for Mix {
    fn default() -> Self {
        Mix::new()
    }
}

fn derived(key: f64, salt: u64) -> u64 {
    splitmix(key.to_bits() ^ salt)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Double(pub f64);

impl Element for Double {
    const KIND: ElementKind = ElementKind::Double;

    fn from_key(key: f64) -> Self {
        Double(key)
    }

    fn less(a: &Self, b: &Self) -> bool {
        a.0.total_cmp(&b.0).is_lt()
    }

    fn absorb(&self, h: &mut Mix) {
        h.word(self.0.to_bits());
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub key: f64,
    pub payload: u64,
}

impl Element for Pair {
    const KIND: ElementKind = ElementKind::Pair;

    fn from_key(key: f64) -> Self {
        Pair {
            key,
            payload: derived(key, 1),
        }
    }

    fn less(a: &Self, b: &Self) -> bool {
        a.key.total_cmp(&b.key).is_lt()
    }

    fn absorb(&self, h: &mut Mix) {
        h.word(self.key.to_bits());
        h.word(self.payload);
    }
}

/// Three keys compared lexicographically, plus a payload.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartet {
    pub keys: [f64; 3],
    pub payload: u64,
}

impl Element for Quartet {
    const KIND: ElementKind = ElementKind::Quartet;

    fn from_key(key: f64) -> Self {
        let k1 = (derived(key, 2) >> 11) as f64;
        let k2 = (derived(key, 3) >> 11) as f64;
        Quartet {
            keys: [key, k1, k2],
            payload: derived(key, 4),
        }
    }

    fn less(a: &Self, b: &Self) -> bool {
        for i in 0..3 {
            match a.keys[i].total_cmp(&b.keys[i]) {
                std::cmp::Ordering::Less => return true,
                std::cmp::Ordering::Greater => return false,
                std::cmp::Ordering::Equal => {}
            }
        }
        false
    }

    fn absorb(&self, h: &mut Mix) {
        for k in self.keys {
            h.word(k.to_bits());
        }
        h.word(self.payload);
    }
}

/// 10-byte key compared lexicographically, 90-byte payload.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Bytes100 {
    pub key: [u8; 10],
    pub payload: [u8; 90],
}

impl fmt::Debug for Bytes100 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bytes100({:02x?})", self.key)
    }
}

/// Order-preserving byte image of an `f64` under `total_cmp`.
fn ordered_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | 1 << 63
    }
}

impl Element for Bytes100 {
    const KIND: ElementKind = ElementKind::Bytes100;

    fn from_key(key: f64) -> Self {
        let mut k = [0u8; 10];
        k[..8].copy_from_slice(&ordered_bits(key).to_be_bytes());
        k[8..].copy_from_slice(&(derived(key, 5) as u16).to_be_bytes());
        let mut payload = [0u8; 90];
        for (i, chunk) in payload.chunks_mut(8).enumerate() {
            let w = derived(key, 6 + i as u64).to_le_bytes();
            chunk.copy_from_slice(&w[..chunk.len()]);
        }
        Bytes100 { key: k, payload }
    }

    fn less(a: &Self, b: &Self) -> bool {
        a.key < b.key
    }

    fn absorb(&self, h: &mut Mix) {
        for c in self.key.chunks(8).chain(self.payload.chunks(8)) {
            let mut w = [0u8; 8];
            w[..c.len()].copy_from_slice(c);
            h.word(u64::from_le_bytes(w));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(std::mem::size_of::<Double>(), 8);
        assert_eq!(std::mem::size_of::<Pair>(), 16);
        assert_eq!(std::mem::size_of::<Quartet>(), 32);
        assert_eq!(std::mem::size_of::<Bytes100>(), 100);
    }

    #[test]
    fn orders_follow_the_key() {
        let keys = [-3.5, -0.0, 0.0, 1e-300, 1.0, 2.5, 1e10];
        for w in keys.windows(2) {
            let (a, b) = (w[0], w[1]);
            assert!(Double::less(&Double::from_key(a), &Double::from_key(b)));
            assert!(Pair::less(&Pair::from_key(a), &Pair::from_key(b)));
            assert!(Quartet::less(&Quartet::from_key(a), &Quartet::from_key(b)));
            assert!(Bytes100::less(&Bytes100::from_key(a), &Bytes100::from_key(b)));
        }
    }

    #[test]
    fn equal_keys_equal_elements() {
        assert_eq!(Quartet::from_key(7.0), Quartet::from_key(7.0));
        assert_eq!(Bytes100::from_key(7.0), Bytes100::from_key(7.0));
        let q = Quartet::from_key(7.0);
        assert!(!Quartet::less(&q, &q));
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in ElementKind::ALL {
            assert_eq!(k.name().parse::<ElementKind>().unwrap(), k);
        }
        assert!("triple".parse::<ElementKind>().is_err());
    }
}
