//! Numerical laboratory for Gelfand–Tsetlin patterns, the toric bead model,
//! surface tension, free compression and the associated variational problem.

pub mod bead_exact;
pub mod error;
pub mod ext;
pub mod free_compression;
pub mod fsutil;
pub mod gt_engine;
pub mod hp;
pub mod measure_core;
pub mod stats;
pub mod surface_tension;
pub mod variational;
pub mod verify;

pub use error::{ErrorKind, GtError, Result};
pub use ext::ExtReal;
