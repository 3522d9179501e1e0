//! IO, file formats and the experiment harness around `acrostic-core`.

pub mod checkpoint;
pub mod config;
pub mod diagnostics;
pub mod io;
pub mod pipeline;
