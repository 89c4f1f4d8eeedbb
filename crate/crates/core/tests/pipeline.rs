mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use common::{as_json, deployment, expected_e2e, scripted, system, system_with};
use polyrag_core::dialect::ParsedQuery;
use polyrag_core::exec::{Backend, BackendConnection, ExecError, Rows};
use polyrag_core::gateway::RuleSpec;
use polyrag_core::model::DataSourceKind;
use polyrag_core::pipeline::{Outcome, PipelineError, Stage, Telemetry};
use polyrag_core::prompt::build_monolithic_prompt;
use polyrag_core::{ResponseFormat, System, UserQuery, NO_SUITABLE_AGENT};

fn ask(system: &System, q: &str) -> polyrag_core::Response {
    system.answer(&UserQuery::new(q).unwrap()).unwrap()
}

fn stages(t: &Telemetry) -> Vec<(Stage, Outcome)> {
    t.events().into_iter().map(|e| (e.stage, e.outcome)).collect()
}

/// Builds a system from the shipped deployment with its parts adjusted.
fn assemble(
    provider: polyrag_core::gateway::ScriptedProvider,
    adjust: impl FnOnce(Vec<BackendConnection>) -> Vec<BackendConnection>,
    reroute: bool,
) -> System {
    let cfg = deployment();
    let router = cfg.build_router().unwrap();
    let gateway = cfg.build_gateway(Arc::new(provider)).unwrap();
    let connections = adjust(cfg.connect_all(&router).unwrap());
    let mut policy = cfg.fallback_policy();
    policy.reroute = reroute;
    System::new(router, gateway, connections)
        .with_policy(policy)
        .with_telemetry(Telemetry::in_memory())
}

#[test]
fn example_questions_reproduce_oracle_results() {
    let system = system();
    for e in expected_e2e() {
        let r = ask(&system, &e.question);
        assert!(!r.degraded(), "{}: {:?}", e.question, r.diagnostics());
        assert_eq!(r.source_id(), e.source, "{}", e.question);
        let (columns, rows) = as_json(r.result().unwrap());
        assert_eq!(columns, e.columns, "{}", e.question);
        assert_eq!(rows, e.rows, "{}", e.question);
    }
}

#[test]
fn completed_projects_question_names_delta() {
    let r = ask(&system(), "Retrieve all completed projects assigned to Mahesh Deshmukh");
    assert!(!r.degraded());
    assert_eq!(r.source_id(), "projects_sql");
    assert!(r.text().contains("Delta"), "{}", r.text());
    assert!(r.generated_query_text().contains("'Mahesh Deshmukh'"));
}

#[test]
fn unroutable_question_is_the_only_error() {
    let err = system()
        .answer(&UserQuery::new("what is the meaning of life").unwrap())
        .unwrap_err();
    assert!(matches!(err, PipelineError::NoSuitableAgent { .. }));
    assert_eq!(err.to_string(), NO_SUITABLE_AGENT);
}

#[test]
fn successful_answer_emits_six_events() {
    let system = system().with_telemetry(Telemetry::in_memory());
    let r = ask(&system, "List all active projects handled by Saba Attar");
    assert_eq!(r.event_count(), 6);
    let expected: Vec<(Stage, Outcome)> = [
        Stage::Route,
        Stage::Prompt,
        Stage::Complete,
        Stage::Validate,
        Stage::Execute,
        Stage::Synthesize,
    ]
    .into_iter()
    .map(|s| (s, Outcome::Ok))
    .collect();
    assert_eq!(stages(system.telemetry()), expected);
    let events = system.telemetry().events();
    assert!(events.iter().all(|e| e.session_id == r.session_id()));
    assert!(events[2].tokens_in.value() > 0 && events[2].tokens_out.value() > 0);
}

#[test]
fn malformed_completions_degrade_with_validate_diagnostics() {
    let mut provider = scripted();
    provider
        .prepend(&RuleSpec::new("mysql_agent", "List all active projects handled by ${person}", "SELECT FROM Projects WHERE;"))
        .unwrap();
    let system = system_with(provider).with_telemetry(Telemetry::in_memory());
    let r = ask(&system, "List all active projects handled by Saba Attar");
    assert!(r.degraded());
    assert_eq!(r.unanswered(), Some(Stage::Validate));
    assert_eq!(r.diagnostics().len(), 2);
    assert!(r.diagnostics().iter().all(|d| d.stage == Stage::Validate));
    assert_eq!(
        stages(system.telemetry()),
        [
            (Stage::Route, Outcome::Ok),
            (Stage::Prompt, Outcome::Ok),
            (Stage::Complete, Outcome::Ok),
            (Stage::Validate, Outcome::Retried),
            (Stage::Complete, Outcome::Ok),
            (Stage::Validate, Outcome::Failed),
        ]
    );
    assert_eq!(r.event_count(), 6);
}

#[test]
fn read_only_violation_is_a_validation_failure() {
    let mut provider = scripted();
    provider
        .prepend(&RuleSpec::new("mysql_agent", "List all active projects handled by ${person}", "DROP TABLE Projects;"))
        .unwrap();
    let r = ask(&system_with(provider), "List all active projects handled by Saba Attar");
    assert!(r.degraded());
    assert!(r.diagnostics()[0].note.to_lowercase().contains("read-only"), "{:?}", r.diagnostics());
}

/// Fails the first `failures` executions, then delegates.
struct Flaky {
    inner: Arc<dyn Backend>,
    failures: usize,
    calls: AtomicUsize,
}

impl Backend for Flaky {
    fn kind(&self) -> DataSourceKind {
        self.inner.kind()
    }

    fn execute(&self, query: &ParsedQuery) -> Result<Rows, ExecError> {
        if self.calls.fetch_add(1, Ordering::SeqCst) < self.failures {
            return Err(ExecError::ExecutionFailed("backend hiccup".into()));
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

fn flaky(source: &'static str, failures: usize) -> impl FnOnce(Vec<BackendConnection>) -> Vec<BackendConnection> {
    move |conns| {
        conns
            .into_iter()
            .map(|c| {
                if c.source_id() == source {
                    let inner = c.adapter().clone();
                    c.with_adapter(Arc::new(Flaky {
                        inner,
                        failures,
                        calls: AtomicUsize::new(0),
                    }))
                } else {
                    c
                }
            })
            .collect()
    }
}

#[test]
fn one_execution_failure_is_retried() {
    let system = assemble(scripted(), flaky("projects_sql", 1), false);
    let r = ask(&system, "List all active projects handled by Saba Attar");
    assert!(!r.degraded());
    assert!(r.text().contains("Alpha"));
    let events = stages(system.telemetry());
    assert_eq!(events[4], (Stage::Execute, Outcome::Retried));
    assert_eq!(events[5], (Stage::Execute, Outcome::Ok));
    assert_eq!(events.len(), 7);
}

#[test]
fn two_execution_failures_degrade_without_reroute() {
    let system = assemble(scripted(), flaky("projects_sql", 2), false);
    let r = ask(&system, "List all active projects handled by Saba Attar");
    assert!(r.degraded());
    assert_eq!(r.unanswered(), Some(Stage::Execute));
    assert_eq!(r.diagnostics().len(), 2);
    assert!(r.result().is_none());
}

#[test]
fn down_primary_source_reroutes_to_search() {
    let down = |conns: Vec<BackendConnection>| {
        conns
            .into_iter()
            .map(|c| {
                if c.source_id() == "projects_sql" {
                    BackendConnection::failed("projects_sql", c.adapter().clone(), "connection refused")
                } else {
                    c
                }
            })
            .collect()
    };
    let system = assemble(scripted(), down, true);
    let r = ask(&system, "Which projects are handled by Sayali Shivpuje?");
    assert!(r.degraded());
    assert_eq!(r.source_id(), "support_search");
    assert_eq!(r.unanswered(), None);
    assert!(r.generated_query_text().contains("\"match\""));
    // route, prompt, complete, validate, execute x2, then the reroute:
    // route, validate, execute, synthesize.
    assert_eq!(
        stages(system.telemetry()),
        [
            (Stage::Route, Outcome::Ok),
            (Stage::Prompt, Outcome::Ok),
            (Stage::Complete, Outcome::Ok),
            (Stage::Validate, Outcome::Ok),
            (Stage::Execute, Outcome::Retried),
            (Stage::Execute, Outcome::Failed),
            (Stage::Route, Outcome::Ok),
            (Stage::Validate, Outcome::Ok),
            (Stage::Execute, Outcome::Ok),
            (Stage::Synthesize, Outcome::Ok),
        ]
    );
    let notes: Vec<Stage> = r.diagnostics().iter().map(|d| d.stage).collect();
    assert_eq!(notes, [Stage::Execute, Stage::Execute, Stage::Route]);
}

#[test]
fn reroute_is_skipped_when_the_search_source_itself_failed() {
    let system = assemble(scripted(), flaky("support_search", 2), true);
    let r = ask(&system, "Find support tickets related to MySQL issues raised by Sayali Shivpuje");
    assert!(r.degraded());
    assert_eq!(r.unanswered(), Some(Stage::Execute));
}

#[test]
fn unwritable_sink_is_noted_and_the_answer_survives() {
    let dir = tempfile::tempdir().unwrap();
    let sink = Telemetry::to_file(dir.path().join("no/such/dir/telemetry.jsonl"));
    let system = system().with_telemetry(sink);
    let r = ask(&system, "List all active projects handled by Saba Attar");
    assert!(!r.degraded());
    assert!(r.text().contains("Alpha"));
    let sink_notes = r.diagnostics().iter().filter(|d| d.note.contains("telemetry sink unavailable")).count();
    assert_eq!(sink_notes, 1);
}

#[test]
fn telemetry_file_gets_one_line_per_event() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("telemetry.jsonl");
    let system = system().with_telemetry(Telemetry::to_file(&path));
    let a = ask(&system, "List all active projects handled by Saba Attar");
    let b = ask(&system, "List all collaborators of Arnab Mitra Utsab");
    let lines: Vec<serde_json::Value> = std::fs::read_to_string(&path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), a.event_count() + b.event_count());
    assert_eq!(lines[0]["stage"], "route");
    assert_eq!(lines[0]["session_id"], a.session_id());
    assert_eq!(lines[6]["session_id"], b.session_id());
}

#[test]
fn specialized_run_spends_fewer_prompt_tokens_than_monolithic() {
    let system = system();
    let profile = system.gateway().profile().clone();
    let groups: Vec<_> = system
        .router()
        .agents()
        .iter()
        .map(|a| (&a.schema, a.examples.examples()))
        .collect();
    for e in expected_e2e() {
        let q = UserQuery::new(&e.question).unwrap();
        let r = system.answer(&q).unwrap();
        let synthesis = system.synthesize(&q, r.result().unwrap()).unwrap().tokens_in();
        let mono = build_monolithic_prompt(&q, &groups, &profile).unwrap().token_count();
        assert!(
            r.tokens_in().value() < mono.value() + synthesis.value(),
            "{}: {} vs {} + {}",
            e.question,
            r.tokens_in(),
            mono,
            synthesis
        );
    }
}

#[test]
fn table_format_renders_header_and_rows() {
    let system = system();
    let q = UserQuery::new("Show all project names ordered by start date").unwrap().format(ResponseFormat::Table);
    let r = system.answer(&q).unwrap();
    let lines: Vec<&str> = r.text().lines().collect();
    assert_eq!(lines[0].split('|').map(str::trim).collect::<Vec<_>>(), ["project_name", "start_date"]);
    assert_eq!(lines.len(), 1 + 1 + 5 + 1, "{}", r.text());
    assert_eq!(lines.last(), Some(&"(5 rows)"));
    assert!(lines[2].starts_with("Beta"));
}

#[test]
fn empty_results_say_so() {
    let r = ask(&system(), "List all active projects handled by Nobody Known");
    assert!(!r.degraded());
    assert_eq!(r.result().unwrap().row_count(), 0);
    assert!(r.text().contains("no matching records"), "{}", r.text());
}

#[test]
fn concurrent_sessions_agree_with_sequential_ones() {
    let system = Arc::new(system());
    let questions: Vec<String> = expected_e2e().into_iter().map(|e| e.question).collect();
    let sequential: Vec<String> = questions.iter().map(|q| ask(&system, q).text().to_string()).collect();
    let handles: Vec<_> = questions
        .iter()
        .cloned()
        .map(|q| {
            let system = system.clone();
            std::thread::spawn(move || ask(&system, &q).text().to_string())
        })
        .collect();
    let parallel: Vec<String> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    assert_eq!(parallel, sequential);
}
