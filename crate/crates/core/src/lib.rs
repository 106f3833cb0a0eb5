//! Core algorithms for studying SRAM physical unclonable functions.
//!
//! * [`fingerprint`]: packed bit-vector fingerprints, per-cell start-up
//!   statistics and majority-vote reference aggregation.
//! * [`metrics`]: reliability (intra-device distance), uniqueness
//!   (inter-device distance) and distribution summaries.
//! * [`simulator`]: a per-cell probabilistic start-up model with
//!   temperature sensitivity, calibrated analytically to target noise levels.
//! * [`fe`]: a sample-then-lock fuzzy extractor built from hash-based
//!   digital lockers, with locker-count sizing and a binary helper-data
//!   format.
//!
//! The crate is `no_std` and only needs `alloc`. File formats and the
//! command-line harness live in `puf-harness`.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod error;
pub mod fe;
pub mod fingerprint;
pub mod metrics;
pub mod simulator;

pub use error::{Error, Result};
pub use fingerprint::{
    aggregate_reference, cell_statistics, classify_cells, fhd, BoardType, CellPartition,
    CellStatistics, Fingerprint, Reading, ReferenceFingerprint,
};
