//! Link-level testbench for uplink channel estimation behind one-bit ADCs.
//!
//! A base station with `M` antennas receives OFDM pilots from `K` single-
//! antenna users; each receive chain quantizes the in-phase and quadrature
//! samples to a single bit. The crate simulates that link and recovers the
//! per-subcarrier channel frequency response in two stages:
//!
//! 1. [`stage1`] — per-antenna feed-forward networks trained online against
//!    decorrelation-based labels, then averaged over random probe inputs.
//! 2. [`stage2`] — a deep-image-prior fit that treats the stage-one output
//!    as a noisy image over the antenna/subcarrier grid and denoises it by
//!    early-stopped overparameterized regression.
//!
//! [`bench`] wires both stages into an NMSE sweep against classical
//! least-squares baselines, and [`selftest`] bundles fast invariant checks
//! behind the command-line interface.

pub mod airlink;
pub mod bench;
pub mod error;
pub mod numerics;
pub mod selftest;
pub mod stage1;
pub mod stage2;

pub use error::{Error, Result};
