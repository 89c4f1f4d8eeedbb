//! Fixture loading shared by the benchmarks.

use std::path::PathBuf;

use polyrag_core::config::DeploymentConfig;
use polyrag_core::System;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn deployment() -> DeploymentConfig {
    DeploymentConfig::load(fixtures_dir().join("deployment.toml")).expect("shipped deployment loads")
}

pub fn system() -> System {
    deployment().build_system().expect("shipped deployment builds")
}

/// The eight example questions whose answers are known.
pub const EXAMPLE_QUESTIONS: [&str; 8] = [
    "Find support tickets related to MySQL issues raised by Sayali Shivpuje.",
    "Retrieve all open tickets related to Neo4j raised by Aniruddha Salve.",
    "List all active projects handled by Saba Attar.",
    "Retrieve all completed projects assigned to Mahesh Deshmukh.",
    "Find all active projects assigned to Aniruddha Salve.",
    "Retrieve all completed projects assigned to Saba Attar.",
    "List all collaborators of Arnab Mitra Utsab.",
    "Find researchers working on AI projects in the domain of healthcare.",
];
