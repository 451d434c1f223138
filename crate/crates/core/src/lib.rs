//! Simulation and exact-oracle laboratory for cover times of the discrete
//! cylinder `T_N^d x Z`, random interlacements on `Z^{d+1}`, and the
//! excursion structure that links them.

pub mod config;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod excursions;
pub mod green;
pub mod interlace;
pub mod lattice;
pub mod linalg;
pub mod passage;
pub mod rng;
pub mod selftest;
pub mod srw;
pub mod stats;

pub use error::{Error, Result};
