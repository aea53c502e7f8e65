//! Generators and oracles shared by the integration tests and the
//! acceptance suite.
#![allow(dead_code)]

pub mod graphs;
pub mod screens;
pub mod trees;

use std::path::PathBuf;

use deeplink_core::AppModel;

pub fn corpus_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(format!("{name}.app.json"))
}

pub fn corpus_model(name: &str) -> AppModel {
    let text = std::fs::read_to_string(corpus_path(name)).expect("corpus model exists");
    let model: AppModel = serde_json::from_str(&text).expect("corpus model parses");
    model.validate().expect("corpus model is valid");
    model
}
