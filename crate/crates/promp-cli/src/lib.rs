//! File formats, experiment harnesses and the command-line surface for the
//! `promp-core` movement-primitive library.

pub mod cli;
pub mod demos;
mod error;
pub mod experiments;
pub mod model_file;

pub use error::CliError;

pub type Result<T> = std::result::Result<T, CliError>;
