#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use polyrag_core::config::DeploymentConfig;
use polyrag_core::gateway::{CompletionProvider, ScriptedProvider};
use polyrag_core::{QueryResult, System};
use serde::Deserialize;

pub mod fuzz;
pub mod mutants;
pub mod oracle;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn deployment() -> DeploymentConfig {
    DeploymentConfig::load(fixtures().join("deployment.toml")).expect("shipped deployment loads")
}

pub fn scripted() -> ScriptedProvider {
    ScriptedProvider::load(fixtures().join("rules/scripted_rules.toml")).expect("rules load")
}

pub fn system() -> System {
    deployment().build_system().expect("system builds")
}

pub fn system_with(provider: impl CompletionProvider + 'static) -> System {
    deployment().build_system_with(Arc::new(provider)).expect("system builds")
}

#[derive(Debug, Deserialize)]
pub struct Expected {
    pub question: String,
    pub source: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<serde_json::Value>>,
}

pub fn expected_e2e() -> Vec<Expected> {
    let text = std::fs::read_to_string(fixtures().join("oracle/e2e_expected.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Columns and rows as plain JSON, for comparison with oracle files.
pub fn as_json(result: &QueryResult) -> (Vec<String>, Vec<Vec<serde_json::Value>>) {
    let rows = result
        .rows()
        .iter()
        .map(|r| r.iter().map(|v| serde_json::to_value(v).unwrap()).collect())
        .collect();
    (result.columns().to_vec(), rows)
}
