//! Differentially oblivious algorithms on an instrumented memory layer.
//!
//! Every algorithm in this crate touches its input only through a
//! [`trace::TracedStore`], which records the ordered `(read|write, address)`
//! sequence an adversary observing memory would see. Cell contents never enter
//! the trace. On top of that layer the crate provides:
//!
//! * [`dense_tester`]: a one-sided bipartiteness tester and a wrapper that
//!   repeats it on shrinking induced subgraphs behind a noisy threshold;
//! * [`locate`]: an existence check for a predicate that halts early behind
//!   noisy checkpoint thresholds and otherwise falls back to a full scan;
//! * [`prefix`]: noisy chunked binary search over a sorted dataset, plus a
//!   padded prefix-sum scan;
//! * [`multiquery`]: a linear-scan oblivious store and a multi-query driver
//!   that migrates records into it under a harmonic privacy budget;
//! * [`verifier`]: the two-phase adversary experiment, an empirical `(ε, δ)`
//!   estimator over projected traces, and the degree-2 connectivity attack.
//!
//! Randomness is always an explicit argument; [`rng::trial_rng`] derives
//! reproducible per-trial streams from a 64-bit seed.

pub mod dense_tester;
pub mod error;
pub mod graphs;
pub mod locate;
pub mod multiquery;
pub mod noise;
pub mod prefix;
pub mod rng;
pub mod stats;
pub mod trace;
pub mod verifier;

pub use error::{Error, Result};
