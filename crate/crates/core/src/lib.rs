//! Exact hitting-time analysis, missing-mass simulation and tail-bound
//! evaluation for finite Markov chains.
//!
//! The crate is `no_std` and only needs `alloc`. Anything that touches the
//! filesystem, threads or the command line lives in the `mml` companion crate.
//!
//! ```
//! use mml_core::{hitting, TransitionMatrix, StateSet};
//!
//! let p = TransitionMatrix::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
//! let pi = p.stationary().unwrap();
//! assert!((pi.get(0) - 2.0 / 3.0).abs() < 1e-12);
//!
//! let target = StateSet::new([1], 2).unwrap();
//! let table = hitting::hitting_table(&p, &target).unwrap();
//! assert!((table.at(0) - 10.0).abs() < 1e-9);
//! ```
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bounds;
pub mod chain;
mod error;
pub mod hitting;
mod linalg;
pub mod report;
pub mod rng;
mod set;
pub mod sim;
mod sum;

pub use chain::{ChainSpec, Family, Start, StationaryDistribution, TransitionMatrix};
pub use error::Error;
pub use report::BoundReport;
pub use set::StateSet;
pub use sum::CompensatedSum;

pub type Result<T, E = Error> = core::result::Result<T, E>;
