//! File formats, JSON documents and the command-line surface.

mod cli;
mod config;
mod docs;
mod tensor;

pub use cli::run;
pub use config::{parse_key_values, Entry};
pub use docs::*;
pub use tensor::*;
