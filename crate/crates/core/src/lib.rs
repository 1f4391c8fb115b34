//! Core library for a semantic-aware Open RAN testbed.

pub mod codec;
pub mod container;
pub mod csi;
pub mod nn;
pub mod rng;
