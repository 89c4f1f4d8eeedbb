use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use polyrag_core::config::{DeploymentConfig, CONFIG_ENV};
use polyrag_core::dialect::validate;
use polyrag_core::prompt::mean_ratio;
use polyrag_core::{Dialect, PipelineError, Response, ResponseFormat, Stage, System, UserQuery};

const EXIT_NO_AGENT: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_EXECUTION: u8 = 4;
const EXIT_CONFIG: u8 = 5;

#[derive(Parser)]
#[command(name = "polyrag", version, about = "Ask questions across relational, document, graph and search stores")]
struct Cli {
    /// Deployment file. Falls back to the POLYRAG_CONFIG environment variable.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Append telemetry events to this JSON-lines file.
    #[arg(long, global = true, value_name = "PATH")]
    telemetry: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Plain)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Plain,
    Table,
}

impl From<Format> for ResponseFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Plain => ResponseFormat::PlainText,
            Format::Table => ResponseFormat::Table,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Answer one question.
    Ask {
        question: String,
        /// Print the generated query before the answer.
        #[arg(long)]
        show_query: bool,
    },
    /// Answer questions read line by line until `:quit` or end of input.
    Repl {
        #[arg(long)]
        show_query: bool,
    },
    /// Check that a dataset file loads into a source.
    Seed {
        #[arg(long, value_name = "ID")]
        source: String,
        #[arg(long, value_name = "PATH")]
        file: PathBuf,
    },
    /// Check a query file against a dialect.
    Validate {
        /// sql, document, graph or search
        #[arg(long)]
        dialect: String,
        #[arg(long, value_name = "PATH")]
        file: PathBuf,
    },
    /// Compare specialized and monolithic prompt sizes over the corpus.
    BenchTokens,
}

/// A failure that ends the process with `code` after printing `message`.
struct Exit {
    code: u8,
    message: String,
}

fn config_error(e: impl std::fmt::Display) -> Exit {
    Exit {
        code: EXIT_CONFIG,
        message: format!("configuration error: {e}"),
    }
}

fn load_config(cli: &Cli) -> Result<DeploymentConfig, Exit> {
    let path = match &cli.config {
        Some(p) => p.clone(),
        None => std::env::var_os(CONFIG_ENV)
            .map(PathBuf::from)
            .ok_or_else(|| config_error(format!("no deployment file given; pass --config or set {CONFIG_ENV}")))?,
    };
    let mut cfg = DeploymentConfig::load(&path).map_err(config_error)?;
    if let Some(t) = &cli.telemetry {
        cfg.telemetry = Some(t.clone());
    }
    Ok(cfg)
}

fn build_system(cli: &Cli) -> Result<System, Exit> {
    load_config(cli)?.build_system().map_err(config_error)
}

fn exit_code(response: &Response) -> u8 {
    match response.unanswered() {
        None => 0,
        Some(Stage::Execute) => EXIT_EXECUTION,
        Some(_) => EXIT_VALIDATION,
    }
}

/// Answers one question and writes the outcome. Returns the exit code the
/// answer maps to.
fn answer(system: &System, question: &str, format: ResponseFormat, show_query: bool, out: &mut impl Write) -> io::Result<u8> {
    let query = match UserQuery::new(question) {
        Ok(q) => q.format(format),
        Err(e) => {
            writeln!(out, "{e}")?;
            return Ok(EXIT_NO_AGENT);
        }
    };
    match system.answer(&query) {
        Ok(response) => {
            if show_query && !response.generated_query_text().is_empty() {
                writeln!(out, "[{}] {}", response.source_id(), response.generated_query_text())?;
            }
            writeln!(out, "{}", response.text())?;
            for d in response.diagnostics() {
                eprintln!("note ({}): {}", d.stage, d.note);
            }
            Ok(exit_code(&response))
        }
        Err(e @ PipelineError::NoSuitableAgent { .. }) => {
            writeln!(out, "{e}")?;
            Ok(EXIT_NO_AGENT)
        }
    }
}

fn ask(cli: &Cli, question: &str, show_query: bool) -> Result<u8, Exit> {
    let system = build_system(cli)?;
    let mut out = io::stdout().lock();
    answer(&system, question, cli.format.into(), show_query, &mut out).map_err(io_exit)
}

fn repl(cli: &Cli, show_query: bool) -> Result<u8, Exit> {
    let system = build_system(cli)?;
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    let mut line = String::new();
    loop {
        write!(out, "> ").and_then(|_| out.flush()).map_err(io_exit)?;
        line.clear();
        if stdin.lock().read_line(&mut line).map_err(io_exit)? == 0 {
            writeln!(out).map_err(io_exit)?;
            return Ok(0);
        }
        let question = line.trim();
        match question {
            "" => continue,
            ":quit" | ":q" => return Ok(0),
            _ => {
                answer(&system, question, cli.format.into(), show_query, &mut out).map_err(io_exit)?;
            }
        }
    }
}

fn seed(cli: &Cli, source: &str, file: &Path) -> Result<u8, Exit> {
    let system = build_system(cli)?;
    let connection = system
        .connection(source)
        .ok_or_else(|| config_error(format!("no source `{source}` is configured")))?;
    match connection.load_seed_data(file) {
        Ok(n) => {
            println!("Loaded {n} records into {source}.");
            Ok(0)
        }
        Err(e) => Err(Exit {
            code: EXIT_EXECUTION,
            message: format!("cannot load {}: {e}", file.display()),
        }),
    }
}

fn validate_file(dialect: &str, file: &Path) -> Result<u8, Exit> {
    let dialect: Dialect = dialect.parse().map_err(config_error)?;
    let text = std::fs::read_to_string(file).map_err(|e| config_error(format!("cannot read {}: {e}", file.display())))?;
    match validate(dialect, &text) {
        Ok(_) => {
            println!("valid {dialect} query");
            Ok(0)
        }
        Err(e) => Err(Exit {
            code: EXIT_VALIDATION,
            message: format!("invalid {dialect} query: {e}"),
        }),
    }
}

fn bench_tokens(cli: &Cli) -> Result<u8, Exit> {
    let cfg = load_config(cli)?;
    let rows = cfg.token_benchmark().map_err(config_error)?;
    println!("{:>11}  {:>10}  {:>6}  {:<14}  question", "specialized", "monolithic", "ratio", "agent");
    for r in &rows {
        println!(
            "{:>11}  {:>10}  {:>6.3}  {:<14}  {}",
            r.specialized.value(),
            r.monolithic.value(),
            r.ratio(),
            r.agent_id,
            r.question
        );
    }
    let smaller = rows.iter().filter(|r| r.specialized < r.monolithic).count();
    println!("specialized smaller: {smaller}/{}", rows.len());
    println!("mean ratio: {:.4}", mean_ratio(&rows));
    Ok(0)
}

fn io_exit(e: io::Error) -> Exit {
    Exit {
        code: 1,
        message: format!("i/o error: {e}"),
    }
}

fn run(cli: &Cli) -> Result<u8, Exit> {
    match &cli.command {
        Command::Ask { question, show_query } => ask(cli, question, *show_query),
        Command::Repl { show_query } => repl(cli, *show_query),
        Command::Seed { source, file } => seed(cli, source, file),
        Command::Validate { dialect, file } => validate_file(dialect, file),
        Command::BenchTokens => bench_tokens(cli),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(exit) => {
            eprintln!("{}", exit.message);
            ExitCode::from(exit.code)
        }
    }
}
