//! File formats, command-line frontend and HTTP service for the
//! `deeplink-core` analysis pipeline.

pub mod cli;
pub mod formats;
pub mod pipeline;
pub mod report;
pub mod service;

pub use formats::{export_manifest, import_manifest, load_app_model, model_digest, parse_app_model, FormatError};
pub use pipeline::{Analysis, ErrorBody, PipelineError};
