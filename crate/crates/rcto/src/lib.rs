//! Config files, result export and the `rcto` command line for the
//! reinforced-concrete topology optimizer in `rcto-core`.

#![warn(missing_docs)]

pub mod cli;
pub mod config;
mod error;
pub mod export;
pub mod section;

pub use error::{Error, Result};
