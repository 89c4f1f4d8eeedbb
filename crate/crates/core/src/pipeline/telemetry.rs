use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Duration, DurationRound, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Outcome, Stage};
use crate::tokens::TokenCount;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TelemetryEvent {
    /// RFC 3339 UTC timestamp with microseconds.
    pub timestamp: String,
    pub session_id: String,
    pub stage: Stage,
    pub duration_ms: u64,
    pub tokens_in: TokenCount,
    pub tokens_out: TokenCount,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TelemetryError {
    #[error("telemetry sink unavailable: {0}")]
    SinkUnavailable(String),
}

#[derive(Debug)]
enum Sink {
    Discard,
    Memory(Mutex<Vec<TelemetryEvent>>),
    File { path: PathBuf, file: Mutex<Option<File>> },
}

/// Where telemetry events go. Writes are serialized and each event is
/// flushed before `record` returns.
#[derive(Debug)]
pub struct Telemetry {
    sink: Sink,
}

impl Default for Telemetry {
    fn default() -> Self {
        Self::discard()
    }
}

impl Telemetry {
    pub fn discard() -> Self {
        Self { sink: Sink::Discard }
    }

    pub fn in_memory() -> Self {
        Self {
            sink: Sink::Memory(Mutex::new(Vec::new())),
        }
    }

    /// Appends JSON lines to `path`, creating it on first use.
    pub fn to_file(path: impl Into<PathBuf>) -> Self {
        Self {
            sink: Sink::File {
                path: path.into(),
                file: Mutex::new(None),
            },
        }
    }

    pub fn path(&self) -> Option<&Path> {
        match &self.sink {
            Sink::File { path, .. } => Some(path),
            _ => None,
        }
    }

    pub fn record(&self, event: &TelemetryEvent) -> Result<(), TelemetryError> {
        match &self.sink {
            Sink::Discard => Ok(()),
            Sink::Memory(events) => {
                events.lock().unwrap_or_else(|e| e.into_inner()).push(event.clone());
                Ok(())
            }
            Sink::File { path, file } => {
                let unavailable = |e: std::io::Error| TelemetryError::SinkUnavailable(format!("{}: {e}", path.display()));
                let mut guard = file.lock().unwrap_or_else(|e| e.into_inner());
                if guard.is_none() {
                    *guard = Some(OpenOptions::new().create(true).append(true).open(path).map_err(unavailable)?);
                }
                let f = guard.as_mut().expect("opened above");
                let mut line = serde_json::to_string(event).expect("events serialize");
                line.push('\n');
                let written = f.write_all(line.as_bytes()).and_then(|()| f.flush());
                if let Err(e) = written {
                    *guard = None;
                    return Err(unavailable(e));
                }
                Ok(())
            }
        }
    }

    /// Events kept by an in-memory sink.
    pub fn events(&self) -> Vec<TelemetryEvent> {
        match &self.sink {
            Sink::Memory(events) => events.lock().unwrap_or_else(|e| e.into_inner()).clone(),
            _ => Vec::new(),
        }
    }
}

/// Per-session event writer. Timestamps are strictly increasing within the
/// session and the first sink failure is kept for the response.
pub(crate) struct SessionLog<'a> {
    telemetry: &'a Telemetry,
    session_id: String,
    last: Option<DateTime<Utc>>,
    pub(crate) count: usize,
    pub(crate) sink_error: Option<TelemetryError>,
}

impl<'a> SessionLog<'a> {
    pub(crate) fn new(telemetry: &'a Telemetry, session_id: &str) -> Self {
        Self {
            telemetry,
            session_id: session_id.to_string(),
            last: None,
            count: 0,
            sink_error: None,
        }
    }

    pub(crate) fn emit(&mut self, stage: Stage, duration_ms: u64, tokens_in: TokenCount, tokens_out: TokenCount, outcome: Outcome) {
        // Compare at the precision that gets written out.
        let mut now = Utc::now().duration_trunc(Duration::microseconds(1)).unwrap_or_else(|_| Utc::now());
        if let Some(last) = self.last {
            if now <= last {
                now = last + Duration::microseconds(1);
            }
        }
        self.last = Some(now);
        self.count += 1;
        let event = TelemetryEvent {
            timestamp: now.to_rfc3339_opts(SecondsFormat::Micros, true),
            session_id: self.session_id.clone(),
            stage,
            duration_ms,
            tokens_in,
            tokens_out,
            outcome,
        };
        if let Err(e) = self.telemetry.record(&event) {
            self.sink_error.get_or_insert(e);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn session_timestamps_strictly_increase() {
        let t = Telemetry::in_memory();
        let mut log = SessionLog::new(&t, "s");
        for _ in 0..5_000 {
            log.emit(Stage::Route, 0, TokenCount::ZERO, TokenCount::ZERO, Outcome::Ok);
        }
        let events = t.events();
        let stamps: Vec<DateTime<Utc>> = events
            .iter()
            .map(|e| DateTime::parse_from_rfc3339(&e.timestamp).unwrap().with_timezone(&Utc))
            .collect();
        assert!(stamps.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn file_sink_appends_json_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let t = Telemetry::to_file(&path);
        let mut log = SessionLog::new(&t, "abc");
        log.emit(Stage::Route, 1, TokenCount(2), TokenCount(3), Outcome::Ok);
        log.emit(Stage::Prompt, 1, TokenCount(2), TokenCount(3), Outcome::Failed);
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<TelemetryEvent> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].stage, Stage::Prompt);
        assert_eq!(lines[1].outcome, Outcome::Failed);
        assert!(log.sink_error.is_none());
    }

    #[test]
    fn unwritable_sink_is_reported_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let t = Telemetry::to_file(dir.path().join("missing").join("t.jsonl"));
        let mut log = SessionLog::new(&t, "s");
        log.emit(Stage::Route, 0, TokenCount::ZERO, TokenCount::ZERO, Outcome::Ok);
        log.emit(Stage::Prompt, 0, TokenCount::ZERO, TokenCount::ZERO, Outcome::Ok);
        assert!(matches!(log.sink_error, Some(TelemetryError::SinkUnavailable(_))));
        assert_eq!(log.count, 2);
    }
}
