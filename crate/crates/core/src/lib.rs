//! Adaptive stochastic optimization with total-oracle-complexity accounting.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every pure piece of the
//! system:
//!
//! - [`framework`]: the generic adaptive loop, its step-size law and traces.
//! - [`problems`]: synthetic expected-risk objectives with exact ground truth.
//! - [`oracles`]: minibatch oracles, accuracy contracts and cost models.
//! - [`methods`]: step search (SASS) and first-order trust region (STORM).
//! - [`walk`]: the one-sided random walk, its coupling with algorithm traces,
//!   hitting probabilities and the high-probability step-size floor.
//! - [`complexity`]: expected and high-probability total oracle complexity
//!   bounds and their empirical counterparts.
//!
//! IO, file formats, parallel replication and the command line live in the
//! companion `astoc` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod complexity;
mod error;
pub mod framework;
pub mod linalg;
mod math;
pub mod methods;
pub mod oracles;
pub mod problems;
pub mod rng;
pub mod stats;
pub mod walk;

pub use error::{Error, Result};
