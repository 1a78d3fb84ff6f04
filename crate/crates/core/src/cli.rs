//! The `magnitude` command line.
//!
//! Exit codes: 0 success, 1 model, scenario or engine errors, 2 I/O errors.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::data::{DataError, FsResolver};
use crate::diagnostics::{self as codes, has_errors, Diagnostic, Severity};
use crate::dsl::{canonicalize_text, parse_model, parse_model_syntax, serialize_model};
use crate::graph::{enumerate_feedback_loops, DEFAULT_MAX_LOOPS, DEFAULT_MAX_LOOP_LEN};
use crate::import::import_consequence_tree;
use crate::model::Model;
use crate::service::{serve, AppState};
use crate::sim::{
    all_scenarios, compare_runs, compute_indicator, load_data, resolve_scenario, run,
    run_scenarios, Indicator, Scenario, SimError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MODEL: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "magnitude",
    version,
    about = "Quali-quantitative system-dynamics models: check, simulate, compare"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RunFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LoopFormat {
    Text,
    Json,
    Dot,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a model, listing diagnostics.
    Check {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
    },
    /// Simulate one scenario and write its time series.
    Run {
        model: PathBuf,
        /// Scenario declared in the model; `baseline` always exists.
        #[arg(long, default_value = "baseline", conflicts_with = "scenario_file")]
        scenario: String,
        /// Scenario as a JSON file.
        #[arg(long)]
        scenario_file: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: RunFormat,
        /// Only export these series.
        #[arg(long, value_delimiter = ',')]
        select: Vec<String>,
    },
    /// List the feedback loops of the influence diagram.
    Loops {
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_LOOP_LEN)]
        max_len: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_LOOPS)]
        max_count: usize,
        #[arg(long, value_enum, default_value = "text")]
        format: LoopFormat,
    },
    /// Run scenarios and compare their indicators against a baseline.
    Compare {
        model: PathBuf,
        #[arg(long, default_value = "baseline")]
        baseline: String,
        /// Scenarios to run; all declared scenarios when omitted.
        #[arg(long = "scenario", value_delimiter = ',')]
        scenarios: Vec<String>,
        /// JSON list of indicators; the model's own indicators when omitted.
        #[arg(long)]
        indicators: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
    },
    /// Serve the JSON API.
    Serve {
        #[arg(long, env = "MAGNITUDE_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Directory of additional `.mag` models listed as examples.
        #[arg(long)]
        model_dir: Option<PathBuf>,
        /// Allowed CORS origin; any origin when omitted.
        #[arg(long)]
        cors_origin: Option<String>,
    },
    /// Print a model in canonical form.
    Fmt {
        model: PathBuf,
        /// Rewrite the file in place.
        #[arg(long)]
        write: bool,
        /// Exit 1 when the file is not in canonical form.
        #[arg(long, conflicts_with = "write")]
        check: bool,
    },
    /// Turn a JSON consequence tree into a model skeleton.
    ImportTree { tree: PathBuf },
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

/// Outcome of a command that failed, carrying its exit code.
struct Exit(i32);

type CmdResult = Result<(), Exit>;

impl Io<'_> {
    fn fail(&mut self, code: i32, msg: impl std::fmt::Display) -> Exit {
        let _ = writeln!(self.err, "error: {msg}");
        Exit(code)
    }

    fn diagnostics(&mut self, path: &Path, diags: &[Diagnostic]) {
        for d in diags {
            let _ = writeln!(self.err, "{}: {d}", path.display());
        }
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let mut io = Io { out, err };
    let r = match cli.command {
        Command::Check { model, format } => check(&mut io, &model, format),
        Command::Run {
            model,
            scenario,
            scenario_file,
            out,
            format,
            select,
        } => run_cmd(
            &mut io,
            &model,
            &scenario,
            scenario_file.as_deref(),
            &out,
            format,
            &select,
        ),
        Command::Loops {
            model,
            max_len,
            max_count,
            format,
        } => loops(&mut io, &model, max_len, max_count, format),
        Command::Compare {
            model,
            baseline,
            scenarios,
            indicators,
            format,
        } => compare(
            &mut io,
            &model,
            &baseline,
            &scenarios,
            indicators.as_deref(),
            format,
        ),
        Command::Serve {
            port,
            host,
            model_dir,
            cors_origin,
        } => serve_cmd(&mut io, SocketAddr::new(host, port), model_dir, cors_origin),
        Command::Fmt {
            model,
            write,
            check,
        } => fmt(&mut io, &model, write, check),
        Command::ImportTree { tree } => import_tree(&mut io, &tree),
    };
    match r {
        Ok(()) => EXIT_OK,
        Err(Exit(code)) => code,
    }
}

fn read(io: &mut Io, path: &Path) -> Result<String, Exit> {
    std::fs::read_to_string(path).map_err(|e| io.fail(EXIT_IO, format!("{}: {e}", path.display())))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent()
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

/// Parse and validate, printing diagnostics. Warnings go to stderr too.
fn load_model(io: &mut Io, path: &Path) -> Result<Model, Exit> {
    let text = read(io, path)?;
    let r = parse_model(&text);
    let shown: Vec<Diagnostic> = r
        .diagnostics
        .iter()
        .filter(|d| d.severity != Severity::Info || r.model.is_none())
        .cloned()
        .collect();
    io.diagnostics(path, &shown);
    r.model.ok_or(Exit(EXIT_MODEL))
}

fn data_exit(e: &DataError) -> i32 {
    if e.code() == codes::E_IO {
        EXIT_IO
    } else {
        EXIT_MODEL
    }
}

fn sim_exit(io: &mut Io, path: &Path, e: &SimError) -> Exit {
    io.diagnostics(path, &e.diagnostics());
    match e {
        SimError::Data { source, .. } => Exit(data_exit(source)),
        _ => Exit(EXIT_MODEL),
    }
}

fn check(io: &mut Io, path: &Path, format: ReportFormat) -> CmdResult {
    let text = read(io, path)?;
    let r = parse_model(&text);
    let mut diags = r.diagnostics;
    let mut io_error = false;
    if let Some(model) = &r.model {
        if let Err(SimError::Data { variable, source }) =
            load_data(model, &FsResolver::new(base_dir(path)))
        {
            io_error = source.code() == codes::E_IO;
            diags.push(Diagnostic::new(source.code(), source.to_string()).at_element(variable));
        }
    }
    match format {
        ReportFormat::Json => {
            let _ = writeln!(
                io.out,
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({ "diagnostics": diags })).unwrap()
            );
        }
        ReportFormat::Text => {
            for d in &diags {
                let _ = writeln!(io.out, "{}: {d}", path.display());
            }
            let count = |s: Severity| diags.iter().filter(|d| d.severity == s).count();
            let _ = writeln!(
                io.out,
                "{}: {} error(s), {} warning(s), {} info",
                path.display(),
                count(Severity::Error),
                count(Severity::Warning),
                count(Severity::Info)
            );
        }
    }
    if io_error {
        Err(Exit(EXIT_IO))
    } else if has_errors(&diags) {
        Err(Exit(EXIT_MODEL))
    } else {
        Ok(())
    }
}

fn scenario_from_file(io: &mut Io, path: &Path) -> Result<Scenario, Exit> {
    let text = read(io, path)?;
    serde_json::from_str(&text).map_err(|e| {
        io.fail(
            EXIT_MODEL,
            format!("{}: {}: {e}", path.display(), codes::E_BAD_JSON),
        )
    })
}

fn run_cmd(
    io: &mut Io,
    path: &Path,
    scenario: &str,
    scenario_file: Option<&Path>,
    out_dir: &Path,
    format: RunFormat,
    select: &[String],
) -> CmdResult {
    let model = load_model(io, path)?;
    let scenario = match scenario_file {
        Some(f) => scenario_from_file(io, f)?,
        None => resolve_scenario(&model, scenario).map_err(|d| {
            io.diagnostics(path, &[d]);
            Exit(EXIT_MODEL)
        })?,
    };
    let mut result = run(&model, &scenario, &FsResolver::new(base_dir(path)))
        .map_err(|e| sim_exit(io, path, &e))?;
    io.diagnostics(path, &result.diagnostics);
    if !select.is_empty() {
        result = result.select(select).map_err(|d| {
            io.diagnostics(path, &[d]);
            Exit(EXIT_MODEL)
        })?;
    }
    let (ext, body) = match format {
        RunFormat::Csv => ("csv", result.to_csv()),
        RunFormat::Json => ("json", result.to_json()),
    };
    let file = out_dir.join(format!("{}__{}.{ext}", model.id, scenario.name));
    std::fs::create_dir_all(out_dir)
        .and_then(|_| std::fs::write(&file, body))
        .map_err(|e| io.fail(EXIT_IO, format!("{}: {e}", file.display())))?;
    let _ = writeln!(
        io.out,
        "wrote {} ({} steps)",
        file.display(),
        result.steps()
    );
    for ind in &model.indicators {
        let value = match compute_indicator(&result, ind) {
            Ok(Some(v)) => crate::expr::format_number(v),
            Ok(None) => "-".into(),
            Err(_) => "(not exported)".into(),
        };
        let _ = writeln!(io.out, "  {} = {value}", ind.name);
    }
    Ok(())
}

fn loops(
    io: &mut Io,
    path: &Path,
    max_len: usize,
    max_count: usize,
    format: LoopFormat,
) -> CmdResult {
    if max_len < 2 || max_count < 1 {
        return Err(io.fail(
            EXIT_MODEL,
            "--max-len must be at least 2 and --max-count at least 1",
        ));
    }
    let text = read(io, path)?;
    let (model, diags, _) = parse_model_syntax(&text);
    let Some(model) = model else {
        io.diagnostics(path, &diags);
        return Err(Exit(EXIT_MODEL));
    };
    let report = enumerate_feedback_loops(&model, max_len, max_count);
    io.diagnostics(path, &report.diagnostics);
    let body = match format {
        LoopFormat::Text => report.to_text(),
        LoopFormat::Json => report.to_json() + "\n",
        LoopFormat::Dot => report.to_dot(&model),
    };
    let _ = write!(io.out, "{body}");
    Ok(())
}

fn compare(
    io: &mut Io,
    path: &Path,
    baseline: &str,
    names: &[String],
    indicators: Option<&Path>,
    format: ReportFormat,
) -> CmdResult {
    let model = load_model(io, path)?;
    let indicators: Vec<Indicator> = match indicators {
        Some(f) => {
            let text = read(io, f)?;
            serde_json::from_str(&text).map_err(|e| {
                io.fail(
                    EXIT_MODEL,
                    format!("{}: {}: {e}", f.display(), codes::E_BAD_JSON),
                )
            })?
        }
        None => model.indicators.clone(),
    };
    let scenarios: Vec<Scenario> = if names.is_empty() {
        all_scenarios(&model)
    } else {
        let mut list = Vec::new();
        for n in names {
            list.push(resolve_scenario(&model, n).map_err(|d| {
                io.diagnostics(path, &[d]);
                Exit(EXIT_MODEL)
            })?);
        }
        list
    };
    if !scenarios.iter().any(|s| s.name == baseline) {
        let d = Diagnostic::new(
            codes::E_NO_BASELINE,
            format!("baseline `{baseline}` is not among the compared scenarios"),
        );
        io.diagnostics(path, &[d]);
        return Err(Exit(EXIT_MODEL));
    }
    let mut runs = Vec::new();
    for r in run_scenarios(&model, &scenarios, &FsResolver::new(base_dir(path))) {
        runs.push(r.map_err(|e| sim_exit(io, path, &e))?);
    }
    let table = compare_runs(&runs, baseline, &indicators).map_err(|e| {
        io.diagnostics(path, &[e.to_diagnostic()]);
        Exit(EXIT_MODEL)
    })?;
    let body = match format {
        ReportFormat::Text => table.to_text(),
        ReportFormat::Json => table.to_json() + "\n",
    };
    let _ = write!(io.out, "{body}");
    Ok(())
}

fn serve_cmd(
    io: &mut Io,
    addr: SocketAddr,
    model_dir: Option<PathBuf>,
    cors_origin: Option<String>,
) -> CmdResult {
    let state = match &model_dir {
        Some(dir) => AppState::with_model_dir(dir)
            .map_err(|e| io.fail(EXIT_IO, format!("{}: {e}", dir.display())))?,
        None => AppState::builtin(),
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| io.fail(EXIT_IO, e))?;
    rt.block_on(serve(addr, state, cors_origin))
        .map_err(|e| io.fail(EXIT_IO, format!("{addr}: {e}")))
}

fn fmt(io: &mut Io, path: &Path, write: bool, check: bool) -> CmdResult {
    let text = read(io, path)?;
    let canonical = canonicalize_text(&text).map_err(|d| {
        io.diagnostics(path, &d);
        Exit(EXIT_MODEL)
    })?;
    if check {
        if canonical != text {
            return Err(io.fail(
                EXIT_MODEL,
                format!("{} is not in canonical form", path.display()),
            ));
        }
    } else if write {
        std::fs::write(path, canonical)
            .map_err(|e| io.fail(EXIT_IO, format!("{}: {e}", path.display())))?;
    } else {
        let _ = write!(io.out, "{canonical}");
    }
    Ok(())
}

fn import_tree(io: &mut Io, path: &Path) -> CmdResult {
    let text = read(io, path)?;
    let tree: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
        io.fail(
            EXIT_MODEL,
            format!("{}: {}: {e}", path.display(), codes::E_BAD_JSON),
        )
    })?;
    let model = import_consequence_tree(&tree).map_err(|d| {
        io.diagnostics(path, &[d]);
        Exit(EXIT_MODEL)
    })?;
    let text = serialize_model(&model).map_err(|e| io.fail(EXIT_MODEL, e))?;
    let _ = write!(io.out, "{text}");
    Ok(())
}
