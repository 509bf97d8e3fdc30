//! Input generators, output verification and the benchmark harness.

pub mod datagen;
pub mod elements;
pub mod harness;
pub mod verify;
