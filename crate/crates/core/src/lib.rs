//! Replacement scheduling for multi-component systems with shared setup costs.

pub mod error;
pub mod heuristic;
pub mod io;
pub mod lab;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod pha;
pub mod scenario;

pub use error::{Error, Result};
