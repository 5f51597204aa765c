//! Steadier ray pointing under hand tremor: one-euro filtering of ray
//! orientation, a synthetic tremulous user, and a simulated paired study
//! of numpad and slider input at 1, 5 and 10 m.

pub mod config;
pub mod error;
pub mod filter;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod pointing;
pub mod report;
pub mod stats;
pub mod tremor;

pub use error::{Error, Result};
