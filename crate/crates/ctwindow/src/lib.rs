//! File formats, reports and the `ctwindow` command-line frontend built on
//! [`ctwindow_core`].

pub mod cli;
pub mod commands;
pub mod corpus;
pub mod ctv;
pub mod error;
pub mod manifest;
pub mod report;
pub mod specdoc;

pub use error::{Error, ErrorKind, Result};
