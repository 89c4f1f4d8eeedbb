//! Adapter for a remote query service.
//!
//! The service exposes `GET {endpoint}/health`, answering 2xx when live, and
//! `POST {endpoint}/query` taking `{"dialect": "...", "query": "..."}` and
//! returning `{"columns": [...], "rows": [[...], ...]}`.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{Backend, ExecError, Rows};
use crate::dialect::ParsedQuery;
use crate::model::{DataSourceKind, Value};

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalConfig {
    /// Base URL of the query service.
    pub endpoint: String,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
}

fn default_timeout() -> u64 {
    5_000
}

#[derive(Debug)]
pub struct ExternalBackend {
    kind: DataSourceKind,
    config: ExternalConfig,
    agent: ureq::Agent,
}

impl ExternalBackend {
    pub fn new(kind: DataSourceKind, config: ExternalConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Self { kind, config, agent }
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{path}", self.config.endpoint.trim_end_matches('/'))
    }

    /// Checks the health endpoint, returning the cause on failure.
    pub fn probe(&self) -> Result<(), String> {
        let response = self.agent.get(&self.url("health")).call().map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        if (200..300).contains(&status) {
            Ok(())
        } else {
            Err(format!("health check returned HTTP {status}"))
        }
    }
}

impl Backend for ExternalBackend {
    fn kind(&self) -> DataSourceKind {
        self.kind
    }

    fn execute(&self, query: &ParsedQuery) -> Result<Rows, ExecError> {
        let body = json!({ "dialect": query.dialect().as_str(), "query": query.render() });
        let mut response = self
            .agent
            .post(&self.url("query"))
            .send_json(&body)
            .map_err(|e| ExecError::failed(e.to_string()))?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(ExecError::failed(format!("query service returned HTTP {status}")));
        }
        let value: serde_json::Value = response
            .body_mut()
            .read_json()
            .map_err(|e| ExecError::failed(format!("unreadable result: {e}")))?;
        let bad = |what: &str| ExecError::failed(format!("query service result: {what}"));
        let columns = value
            .get("columns")
            .and_then(serde_json::Value::as_array)
            .ok_or_else(|| bad("no columns array"))?
            .iter()
            .map(|c| c.as_str().map(str::to_string).ok_or_else(|| bad("column name is not a string")))
            .collect::<Result<Vec<_>, _>>()?;
        let rows = value
            .get("rows")
            .and_then(serde_json::Value::as_array)
            .ok_or_else(|| bad("no rows array"))?
            .iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| bad("row is not an array"))?
                    .iter()
                    .map(|v| Value::from_json(v).ok_or_else(|| bad("cell is not a scalar")))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Rows { columns, rows })
    }

    fn load(&self, _dataset: &serde_json::Value) -> Result<usize, ExecError> {
        Err(ExecError::NotSeedable(self.config.endpoint.clone()))
    }

    fn state_digest(&self) -> String {
        format!("external:{}", self.config.endpoint)
    }
}
