//! In-place parallel samplesort.
//!
//! Elements are distributed into buckets by a sampled search tree, moved
//! in blocks so that only `O(k * b * t)` extra memory is needed, and sorted
//! recursively.
//!
//! ```
//! let mut v = vec![5u32, 3, 9, 1];
//! ips4o::sort(&mut v);
//! assert_eq!(v, [1, 3, 5, 9]);
//! ```

pub mod base_case;
pub mod classifier;
pub mod cleanup;
pub mod config;
pub mod counters;
pub mod driver;
pub mod local;
mod partition;
pub mod permute;
mod raw;
#[doc(hidden)]
pub mod stepping;

pub use config::{default_config, default_threads, ConfigError, SortConfig, THREADS_ENV};
pub use counters::Counters;
pub use driver::{sort, sort_by, sort_strict_in_place, sort_with_config};
