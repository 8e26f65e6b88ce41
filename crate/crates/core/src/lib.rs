//! Cell-free massive MIMO user association with joint communication and
//! sensing performance models.
//!
//! The pipeline runs `scenario` → `channel` → `association`, after which
//! `comm_perf`, `sense_perf` and `net_metrics` evaluate a chosen association
//! against the all-to-all baseline. `report` packages results with a config
//! digest so runs can be audited for reproducibility.

pub mod association;
pub mod channel;
pub mod comm_perf;
pub mod error;
pub mod net_metrics;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod sense_perf;

pub use error::{Error, Result};
pub use num_complex::Complex64;
