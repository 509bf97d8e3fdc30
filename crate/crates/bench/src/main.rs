use std::fs::File;
use std::io;

use anyhow::{Context, Result};
use clap::Parser;

use ips4o_bench::datagen::Distribution;
use ips4o_bench::elements::ElementKind;
use ips4o_bench::harness::{run_matrix, Algo, RunSpec};

/// Runs sorting benchmarks and writes one CSV row per repetition plus a
/// mean row per configuration. List-valued options take comma-separated
/// values and run their cross product.
#[derive(Debug, Parser)]
#[command(name = "bench", version)]
struct Args {
    /// ips4o, is4o, strict or platform-sort.
    #[arg(long, value_delimiter = ',', default_value = "ips4o")]
    algo: Vec<Algo>,
    /// uniform, exponential, almostsorted, rootdup, twodup, eightdup, sorted, reversesorted or ones.
    #[arg(long, value_delimiter = ',', default_value = "uniform")]
    dist: Vec<Distribution>,
    #[arg(long, value_delimiter = ',', default_value = "1000000")]
    n: Vec<usize>,
    /// double, pair, quartet or bytes100.
    #[arg(long, value_delimiter = ',', default_value = "double")]
    kind: Vec<ElementKind>,
    /// Defaults to IPS4O_THREADS or the hardware parallelism.
    #[arg(long, value_delimiter = ',')]
    threads: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Defaults to 15 below 2^30 elements and 2 above.
    #[arg(long)]
    reps: Option<usize>,
    /// Output file; standard output if omitted.
    #[arg(long)]
    csv: Option<String>,
}

fn main() -> Result<()> {
    let args = Args::parse();
    let threads = if args.threads.is_empty() {
        vec![ips4o::default_threads()]
    } else {
        args.threads.clone()
    };
    let mut specs = Vec::new();
    for &algo in &args.algo {
        for &dist in &args.dist {
            for &n in &args.n {
                for &kind in &args.kind {
                    for &t in &threads {
                        specs.push(RunSpec {
                            algo,
                            dist,
                            n,
                            kind,
                            threads: t,
                            seed: args.seed,
                            reps: args.reps.unwrap_or_else(|| RunSpec::default_reps(n)),
                        });
                    }
                }
            }
        }
    }
    match &args.csv {
        Some(path) if path != "-" => {
            let f = File::create(path).with_context(|| format!("creating {path}"))?;
            run_matrix(&specs, f)?;
        }
        _ => {
            run_matrix(&specs, io::stdout().lock())?;
        }
    }
    Ok(())
}
