//! Real-time neural radiance caching for a CPU path tracer.

pub mod cache;
pub mod cli;
pub mod encoding;
pub mod harness;
pub mod math;
pub mod nn;
pub mod optimizer;
pub mod scenes;
pub mod tracer;
