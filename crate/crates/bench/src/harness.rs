//! Runs sort configurations over inputs, verifies every run and writes CSV.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Result};
use ips4o::{default_config, sort_with_config, Counters};

use crate::datagen::{generate, Distribution};
use crate::elements::{Bytes100, Double, Element, ElementKind, Pair, Quartet};
use crate::verify::{digest, sequence_digest, verify};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algo {
    /// Parallel samplesort.
    Ips4o,
    /// Sequential samplesort.
    Is4o,
    /// Sequential samplesort without recursion stack.
    Strict,
    /// `slice::sort_unstable_by`.
    PlatformSort,
}

impl Algo {
    pub const ALL: [Algo; 4] = [Algo::Ips4o, Algo::Is4o, Algo::Strict, Algo::PlatformSort];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Ips4o => "ips4o",
            Algo::Is4o => "is4o",
            Algo::Strict => "strict",
            Algo::PlatformSort => "platform-sort",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Algo::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown algorithm '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSpec {
    pub algo: Algo,
    pub dist: Distribution,
    pub n: usize,
    pub kind: ElementKind,
    pub threads: usize,
    pub seed: u64,
    pub reps: usize,
}

impl RunSpec {
    /// 15 repetitions below 2^30 elements, 2 from there on.
    pub fn default_reps(n: usize) -> usize {
        if n < 1 << 30 {
            15
        } else {
            2
        }
    }

    /// Threads actually used by the algorithm.
    pub fn effective_threads(&self) -> usize {
        match self.algo {
            Algo::Ips4o => self.threads,
            _ => 1,
        }
    }
}

impl fmt::Display for RunSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} dist={} n={} kind={} threads={} seed={}",
            self.algo, self.dist, self.n, self.kind, self.threads, self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub spec: RunSpec,
    pub rep: usize,
    pub seconds: f64,
    pub verified: bool,
    pub counters: Counters,
    /// Digest of the output sequence, for comparing runs.
    pub output_digest: u128,
}

pub const CSV_HEADER: [&str; 14] = [
    "algo",
    "dist",
    "n",
    "kind",
    "threads",
    "seed",
    "rep",
    "seconds",
    "verified",
    "copies",
    "comparisons",
    "block_moves",
    "peak_aux_bytes",
    "depth",
];

fn sort_typed<E: Element>(spec: &RunSpec, v: &mut [E]) -> Result<Counters> {
    let t = spec.effective_threads();
    let cfg = default_config(v.len(), std::mem::size_of::<E>(), t);
    let counters = match spec.algo {
        Algo::Ips4o | Algo::Is4o => sort_with_config(v, E::less, &cfg)?,
        Algo::Strict => sort_with_config(v, E::less, &cfg.with_strict_in_place(true))?,
        Algo::PlatformSort => {
            v.sort_unstable_by(|a, b| {
                if E::less(a, b) {
                    std::cmp::Ordering::Less
                } else if E::less(b, a) {
                    std::cmp::Ordering::Greater
                } else {
                    std::cmp::Ordering::Equal
                }
            });
            Counters::default()
        }
    };
    Ok(counters)
}

fn run_typed<E: Element>(spec: &RunSpec, rep: usize) -> Result<RunRecord> {
    let mut v: Vec<E> = generate(spec.dist, spec.n, spec.seed);
    let before = digest(&v);
    let start = Instant::now();
    let counters = sort_typed(spec, &mut v)?;
    let seconds = start.elapsed().as_secs_f64();
    let verified = verify(before, &v);
    Ok(RunRecord {
        spec: *spec,
        rep,
        seconds,
        verified,
        counters,
        output_digest: sequence_digest(&v),
    })
}

/// Generates the input, sorts it once and verifies the output. Timing
/// covers the sort only.
pub fn run_once(spec: &RunSpec, rep: usize) -> Result<RunRecord> {
    match spec.kind {
        ElementKind::Double => run_typed::<Double>(spec, rep),
        ElementKind::Pair => run_typed::<Pair>(spec, rep),
        ElementKind::Quartet => run_typed::<Quartet>(spec, rep),
        ElementKind::Bytes100 => run_typed::<Bytes100>(spec, rep),
    }
}

fn record_row(r: &RunRecord) -> Vec<String> {
    let s = &r.spec;
    vec![
        s.algo.to_string(),
        s.dist.to_string(),
        s.n.to_string(),
        s.kind.to_string(),
        s.effective_threads().to_string(),
        s.seed.to_string(),
        r.rep.to_string(),
        format!("{:.9}", r.seconds),
        r.verified.to_string(),
        r.counters.element_copies.to_string(),
        r.counters.comparisons.to_string(),
        r.counters.block_moves.to_string(),
        r.counters.peak_aux_bytes.to_string(),
        r.counters.max_recursion_depth.to_string(),
    ]
}

fn mean_row(records: &[RunRecord]) -> Vec<String> {
    let s = &records[0].spec;
    let k = records.len() as f64;
    let avg = |f: fn(&Counters) -> u64| {
        let sum: f64 = records.iter().map(|r| f(&r.counters) as f64).sum();
        format!("{:.1}", sum / k)
    };
    vec![
        s.algo.to_string(),
        s.dist.to_string(),
        s.n.to_string(),
        s.kind.to_string(),
        s.effective_threads().to_string(),
        s.seed.to_string(),
        "mean".to_string(),
        format!("{:.9}", records.iter().map(|r| r.seconds).sum::<f64>() / k),
        records.iter().all(|r| r.verified).to_string(),
        avg(|c| c.element_copies),
        avg(|c| c.comparisons),
        avg(|c| c.block_moves),
        avg(|c| c.peak_aux_bytes),
        avg(|c| c.max_recursion_depth),
    ]
}

/// Runs every spec `reps` times, writing one row per repetition and one
/// mean row per spec. Stops at the first unverified run.
pub fn run_matrix<W: Write>(specs: &[RunSpec], out: W) -> Result<Vec<RunRecord>> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let mut all = Vec::new();
    for spec in specs {
        if spec.reps == 0 {
            bail!("{spec}: repetitions must be at least 1");
        }
        let mut records = Vec::with_capacity(spec.reps);
        for rep in 0..spec.reps {
            let r = run_once(spec, rep)?;
            if !r.verified {
                w.flush()?;
                bail!("verification failed: {spec} rep={rep}");
            }
            w.write_record(record_row(&r))?;
            records.push(r);
        }
        w.write_record(mean_row(&records))?;
        all.extend(records);
    }
    w.flush()?;
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(algo: Algo, threads: usize, reps: usize) -> RunSpec {
        RunSpec {
            algo,
            dist: Distribution::TwoDup,
            n: 5000,
            kind: ElementKind::Pair,
            threads,
            seed: 3,
            reps,
        }
    }

    #[test]
    fn row_arithmetic() {
        let specs = [spec(Algo::Ips4o, 2, 3), spec(Algo::PlatformSort, 1, 3)];
        let mut buf = Vec::new();
        let recs = run_matrix(&specs, &mut buf).unwrap();
        assert_eq!(recs.len(), 6);
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 6 + 2);
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert_eq!(lines.iter().filter(|l| l.contains(",mean,")).count(), 2);
    }

    #[test]
    fn csv_stable_without_timing() {
        let specs = [spec(Algo::Is4o, 1, 2)];
        let strip = |b: Vec<u8>| -> Vec<String> {
            String::from_utf8(b)
                .unwrap()
                .lines()
                .map(|l| {
                    let mut f: Vec<&str> = l.split(',').collect();
                    f.remove(7);
                    f.join(",")
                })
                .collect()
        };
        let (mut a, mut b) = (Vec::new(), Vec::new());
        run_matrix(&specs, &mut a).unwrap();
        run_matrix(&specs, &mut b).unwrap();
        assert_eq!(strip(a), strip(b));
    }

    #[test]
    fn strict_and_stack_driver_agree() {
        let a = run_once(&spec(Algo::Is4o, 1, 1), 0).unwrap();
        let b = run_once(&spec(Algo::Strict, 1, 1), 0).unwrap();
        assert_eq!(a.output_digest, b.output_digest);
        assert_eq!(b.counters.max_recursion_depth, 0);
    }

    #[test]
    fn thread_counts_agree() {
        let digests: Vec<u128> = [1, 2, 4]
            .iter()
            .map(|&t| run_once(&spec(Algo::Ips4o, t, 1), 0).unwrap().output_digest)
            .collect();
        assert!(digests.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn repetition_rule() {
        assert_eq!(RunSpec::default_reps(1000), 15);
        assert_eq!(RunSpec::default_reps(1 << 30), 2);
    }

    #[test]
    fn names_roundtrip() {
        for a in Algo::ALL {
            assert_eq!(a.name().parse::<Algo>().unwrap(), a);
        }
    }
}
