//! File formats, experiment harness and CLI plumbing around [`etdlab_core`].

pub mod analysis;
pub mod config;
pub mod experiment;
pub mod spec_file;
pub mod stats;

pub use etdlab_core as core;

/// Worker count: an explicit value, else the machine's available parallelism.
pub fn resolve_threads(requested: Option<usize>) -> usize {
    requested
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}
