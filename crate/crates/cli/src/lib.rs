//! Command-line front end and model file format for `isotn`.

pub mod app;
pub mod model_file;

pub use app::{run, Cli};
pub use model_file::{load, save, Model};
