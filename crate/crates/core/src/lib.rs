//! One-bit compressed sensing with decoders whose running time depends on
//! `poly(k, log n)` rather than on the ambient dimension.
//!
//! The crate is organised around the two-stage recovery pattern used by every
//! scheme here: a combinatorial first stage finds a small candidate set `S`
//! (heavy hitters from a hierarchical sign sketch, or a superset of the support
//! from group-testing codes), and a convex second stage estimates the signal
//! restricted to `S`.
//!
//! * [`sensing`] holds the signal/measurement types, the sign channel and the
//!   matrix combinators (Hadamard, row-direct sum, row-wise tensor product).
//! * [`group_testing`] holds disjunctness oracles, naive decoding, the
//!   concatenated-code and recursive list-disjunct matrices, Kautz–Singleton
//!   codes and the tensor-product ("modified") decoder.
//! * [`heavy_hitters`] is the dyadic sign Count-Sketch.
//! * [`convex`] maximises a linear objective over `{‖z‖₂ ≤ 1, ‖z‖₁ ≤ √k}`.
//! * [`schemes`] wires the pieces into end-to-end pipelines.
//! * [`bench`] runs seeded Monte-Carlo trials and decode-time scaling reports.

pub mod bench;
pub mod convex;
pub mod error;
pub mod group_testing;
pub mod heavy_hitters;
pub mod rng;
pub mod schemes;
pub mod sensing;

pub use error::{Error, Result};
pub use rng::Seed;
