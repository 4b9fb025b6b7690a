//! Case-directory pipeline around the gliofuse libraries: normalization,
//! ensemble fusion, post-processing, evaluation and network demos.

pub mod cases;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use commands::{demo_net, evaluate, fuse, normalize, postprocess, DemoNetOptions, RunOutcome};
pub use config::{ModalitySuffixes, Overrides, PipelineConfig};
pub use error::{CliError, CliResult};
