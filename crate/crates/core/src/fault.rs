//! Seeded fault injection around providers and backends.

use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::dialect::ParsedQuery;
use crate::exec::{Backend, ExecError, Rows};
use crate::gateway::{CompletionProvider, CompletionRequest, ProviderError};
use crate::model::DataSourceKind;
use crate::pipeline::System;
use crate::prompt::SYNTHESIZER_AGENT_ID;
use crate::tokens::ProviderKind;

/// A completion that every dialect's extractor finds but no validator
/// accepts.
pub const MALFORMED_COMPLETION: &str = "SELECT FROM WHERE;\nMATCH RETURN;\ndb.find(\n{ \"query\": }";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    /// Every affected completion call reports the provider as unavailable.
    ProviderUnavailable,
    /// Query-generation completions come back unparseable.
    ParseError,
    /// Backend executions fail.
    ExecutionFailed,
}

impl FaultKind {
    pub const ALL: [FaultKind; 3] = [Self::ProviderUnavailable, Self::ParseError, Self::ExecutionFailed];
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultPlan {
    pub kind: FaultKind,
    /// Probability in [0, 1] that a call is hit.
    pub rate: f64,
    pub seed: u64,
}

impl FaultPlan {
    pub fn always(kind: FaultKind) -> Self {
        Self { kind, rate: 1.0, seed: 0 }
    }
}

#[derive(Debug)]
struct Dice {
    rate: f64,
    rng: Mutex<ChaCha8Rng>,
}

impl Dice {
    fn new(rate: f64, seed: u64) -> Self {
        Self {
            rate: if rate.is_nan() { 0.0 } else { rate.clamp(0.0, 1.0) },
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    fn hit(&self) -> bool {
        let draw: f64 = self.rng.lock().unwrap_or_else(|e| e.into_inner()).random();
        draw < self.rate
    }
}

pub struct FaultyProvider {
    inner: Arc<dyn CompletionProvider>,
    kind: FaultKind,
    dice: Dice,
}

impl FaultyProvider {
    pub fn new(inner: Arc<dyn CompletionProvider>, plan: FaultPlan) -> Self {
        Self {
            inner,
            kind: plan.kind,
            dice: Dice::new(plan.rate, plan.seed),
        }
    }
}

impl CompletionProvider for FaultyProvider {
    fn kind(&self) -> ProviderKind {
        self.inner.kind()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        match self.kind {
            FaultKind::ProviderUnavailable if self.dice.hit() => {
                Err(ProviderError::Unavailable("injected fault".into()))
            }
            FaultKind::ParseError if request.prompt().agent_id() != SYNTHESIZER_AGENT_ID && self.dice.hit() => {
                Ok(MALFORMED_COMPLETION.to_string())
            }
            _ => self.inner.complete(request),
        }
    }
}

pub struct FaultyBackend {
    inner: Arc<dyn Backend>,
    dice: Dice,
}

impl FaultyBackend {
    pub fn new(inner: Arc<dyn Backend>, rate: f64, seed: u64) -> Self {
        Self {
            inner,
            dice: Dice::new(rate, seed),
        }
    }
}

impl Backend for FaultyBackend {
    fn kind(&self) -> DataSourceKind {
        self.inner.kind()
    }

    fn execute(&self, query: &ParsedQuery) -> Result<Rows, ExecError> {
        if self.dice.hit() {
            return Err(ExecError::failed("injected fault"));
        }
        self.inner.execute(query)
    }

    fn load(&self, dataset: &serde_json::Value) -> Result<usize, ExecError> {
        self.inner.load(dataset)
    }

    fn state_digest(&self) -> String {
        self.inner.state_digest()
    }
}

impl System {
    /// Wraps the provider or every backend according to `plan`.
    pub fn with_faults(mut self, plan: FaultPlan) -> Self {
        match plan.kind {
            FaultKind::ProviderUnavailable | FaultKind::ParseError => {
                let wrapped = Arc::new(FaultyProvider::new(self.gateway.provider().clone(), plan));
                self.gateway = self.gateway.with_provider(wrapped);
            }
            FaultKind::ExecutionFailed => {
                self.connections = std::mem::take(&mut self.connections)
                    .into_iter()
                    .enumerate()
                    .map(|(i, c)| {
                        let adapter = Arc::new(FaultyBackend::new(c.adapter().clone(), plan.rate, plan.seed.wrapping_add(i as u64)));
                        c.with_adapter(adapter)
                    })
                    .collect();
            }
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dialect;

    #[test]
    fn malformed_completion_fails_every_dialect() {
        for d in Dialect::ALL {
            let text = crate::agents::extract_query_from_completion(MALFORMED_COMPLETION, d).unwrap();
            let err = crate::dialect::validate(d, &text).unwrap_err();
            assert!(!err.is_read_only_violation(), "{d:?}: {err}");
        }
    }

    #[test]
    fn dice_respect_extremes() {
        let never = Dice::new(0.0, 1);
        let always = Dice::new(1.0, 1);
        assert!((0..1000).all(|_| !never.hit() && always.hit()));
        let half = Dice::new(0.5, 7);
        let hits = (0..1000).filter(|_| half.hit()).count();
        assert!((400..600).contains(&hits), "{hits}");
    }
}
