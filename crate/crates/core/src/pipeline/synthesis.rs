use std::time::Instant;

use thiserror::Error;

use crate::exec::QueryResult;
use crate::gateway::{render_answer, Gateway, ProviderError};
use crate::model::{ResponseFormat, UserQuery, Value};
use crate::prompt::{build_synthesis_prompt, PromptError, SynthesisRequest, SYNTHESIS_ROW_LIMIT};
use crate::tokens::TokenCount;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub text: String,
    pub tokens_in: TokenCount,
    pub tokens_out: TokenCount,
    pub duration_ms: u64,
}

/// Asks the gateway's synthesizer for an answer over `result`.
pub fn synthesize_answer(gateway: &Gateway, query: &UserQuery, result: &QueryResult) -> Result<Synthesis, (SynthesisError, TokenCount)> {
    let started = Instant::now();
    let prompt = build_synthesis_prompt(
        query.text(),
        result.columns(),
        result.rows(),
        query.requested_format(),
        gateway.profile(),
    );
    let tokens_in = prompt.token_count();
    let request = gateway.request(prompt).map_err(|e| (e.into(), tokens_in))?;
    let completion = gateway.complete(&request).map_err(|e| (e.into(), tokens_in))?;
    Ok(Synthesis {
        text: completion.text,
        tokens_in,
        tokens_out: completion.output_token_estimate,
        duration_ms: started.elapsed().as_millis() as u64,
    })
}

/// The scripted template applied directly, used when the gateway cannot
/// synthesize.
pub fn render_locally(question: &str, format: ResponseFormat, result: &QueryResult) -> String {
    let shown = result.rows().len().min(SYNTHESIS_ROW_LIMIT);
    let json = |v: &Value| serde_json::to_value(v).expect("values serialize");
    render_answer(&SynthesisRequest {
        question: question.to_string(),
        format,
        columns: result.columns().to_vec(),
        rows: result.rows()[..shown].iter().map(|r| r.iter().map(json).collect()).collect(),
        row_count: result.row_count(),
    })
}
