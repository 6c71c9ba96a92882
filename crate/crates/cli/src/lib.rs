//! The `cptwb` command line: validation, view dumps, script replay and serving.
//!
//! Exit codes: 0 success, 1 I/O, parse or usage error, 2 validation findings,
//! 3 a script step failed in the engine.

pub mod dump;
pub mod script;

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use cptwb_core::elicit::DEFAULT_VALIDATION_TOLERANCE;
use cptwb_core::{
    build_cptree, build_scpt, reorder_parents, store, validate, Network, PrefixContext,
    TableViewState, TreeViewState,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FINDINGS: i32 = 2;
pub const EXIT_SCRIPT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "cptwb", about = "Inspect and edit conditional probability tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report columns that do not sum to 1 or were never elicited.
    Validate {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_VALIDATION_TOLERANCE)]
        tol: f64,
    },
    /// Print the tree view of a node's table.
    Tree {
        file: PathBuf,
        node: String,
        /// Number of parent levels to show expanded.
        #[arg(long)]
        depth: Option<usize>,
        /// Parent order to display, comma separated.
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<String>>,
    },
    /// Print the grid view of a node's table.
    Table {
        file: PathBuf,
        node: String,
        /// Context to shrink, e.g. `Alcoholism=absent,Hepatotoxic=present`.
        #[arg(long)]
        shrink: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<String>>,
    },
    /// Replay a `.cpts.jsonl` script and write the resulting document.
    Apply {
        file: PathBuf,
        script: PathBuf,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
}

struct Failure {
    code: i32,
    message: String,
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn engine(e: cptwb_core::Error) -> Failure {
    fail(EXIT_ERROR, format!("{}: {e}", e.name()))
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                return EXIT_ERROR;
            }
            let _ = write!(stdout, "{text}");
            return EXIT_OK;
        }
    };
    match execute(cli.command, stdout) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| fail(EXIT_ERROR, format!("cannot read {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Network, Failure> {
    let bytes = read(path)?;
    store::parse(&bytes).map_err(|e| fail(EXIT_ERROR, format!("{}: {}: {e}", path.display(), e.name())))
}

fn apply_order(net: &mut Network, node: &str, order: &Option<Vec<String>>) -> Result<(), Failure> {
    let Some(order) = order else { return Ok(()) };
    let parents = &net.node(node).map_err(engine)?.parents;
    let perm = order
        .iter()
        .map(|name| {
            parents
                .iter()
                .position(|p| p.as_str() == name)
                .ok_or_else(|| fail(EXIT_ERROR, format!("`{name}` is not a parent of `{node}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    reorder_parents(net, node, &perm).map_err(engine)
}

/// Parses `Parent=outcome,...` against the node's current parent order.
/// Outcomes may be names or indexes.
pub fn parse_context(net: &Network, node: &str, text: &str) -> Result<PrefixContext, String> {
    let spec = net.node(node).map_err(|e| e.to_string())?;
    let mut outcomes = Vec::new();
    for (i, part) in text.split(',').filter(|p| !p.trim().is_empty()).enumerate() {
        let (parent, outcome) = part
            .split_once('=')
            .ok_or_else(|| format!("`{part}` is not of the form Parent=outcome"))?;
        let (parent, outcome) = (parent.trim(), outcome.trim());
        let expected = spec
            .parents
            .get(i)
            .ok_or_else(|| format!("`{node}` has only {} parents", spec.parents.len()))?;
        if expected.as_str() != parent {
            return Err(format!("position {} is `{expected}`, not `{parent}`", i + 1));
        }
        let pspec = net.node(parent).map_err(|e| e.to_string())?;
        let k = pspec
            .outcome_index(outcome)
            .or_else(|| outcome.parse().ok().filter(|&k: &usize| k < pspec.outcomes.len()))
            .ok_or_else(|| format!("`{parent}` has no outcome `{outcome}`"))?;
        outcomes.push(k);
    }
    Ok(PrefixContext::new(node, outcomes))
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<i32, Failure> {
    let io = |e: std::io::Error| fail(EXIT_ERROR, format!("write failed: {e}"));
    match cmd {
        Command::Validate { file, tol } => {
            if tol.is_nan() || tol <= 0.0 {
                return Err(fail(EXIT_ERROR, "--tol must be positive"));
            }
            let bytes = read(&file)?;
            let net = store::parse_for_audit(&bytes)
                .map_err(|e| fail(EXIT_ERROR, format!("{}: {}: {e}", file.display(), e.name())))?;
            let report = validate(&net, tol);
            for v in &report.sum_violations {
                writeln!(out, "sum-violation {} column {} sums to {}", v.node, v.column_index, v.actual_sum)
                    .map_err(io)?;
            }
            for u in &report.unspecified {
                writeln!(out, "unspecified {} column {}", u.node, u.column_index).map_err(io)?;
            }
            Ok(if report.is_empty() { EXIT_OK } else { EXIT_FINDINGS })
        }
        Command::Tree {
            file,
            node,
            depth,
            order,
        } => {
            let mut net = load(&file)?;
            apply_order(&mut net, &node, &order)?;
            let cpt = net.cpt(&node).map_err(engine)?;
            let state = match depth {
                Some(d) => TreeViewState::expanded_to(node.as_str(), cpt, d),
                None => TreeViewState::fully_expanded(node.as_str(), cpt),
            };
            let tree = build_cptree(&net, &node, &state).map_err(engine)?;
            let text = dump::render_tree(&tree, |k| {
                (
                    cpt.column(k).expect("tree columns are in range").to_vec(),
                    cpt.status(k).expect("tree columns are in range"),
                )
            });
            out.write_all(text.as_bytes()).map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::Table {
            file,
            node,
            shrink,
            order,
        } => {
            let mut net = load(&file)?;
            apply_order(&mut net, &node, &order)?;
            let cpt = net.cpt(&node).map_err(engine)?;
            let mut state = TableViewState::new(node.as_str());
            for s in &shrink {
                let c = parse_context(&net, &node, s).map_err(|m| fail(EXIT_ERROR, m))?;
                state.toggle_shrink(cpt, &c).map_err(engine)?;
            }
            let grid = build_scpt(&net, &node, &state).map_err(engine)?;
            out.write_all(dump::render_table(&grid).as_bytes()).map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::Apply {
            file,
            script,
            output,
        } => {
            let mut net = load(&file)?;
            let text = String::from_utf8(read(&script)?)
                .map_err(|_| fail(EXIT_ERROR, format!("{} is not UTF-8", script.display())))?;
            let steps = script::parse_script(&text).map_err(|(line, m)| {
                fail(EXIT_ERROR, format!("{} line {line}: {m}", script.display()))
            })?;
            let mut session = script::Session::new();
            for (line, step) in &steps {
                session.step(&mut net, step).map_err(|e| {
                    fail(
                        EXIT_SCRIPT,
                        format!("{} line {line}: {}: {}", script.display(), e.name, e.detail),
                    )
                })?;
            }
            std::fs::write(&output, store::serialize(&net))
                .map_err(|e| fail(EXIT_ERROR, format!("cannot write {}: {e}", output.display())))?;
            Ok(EXIT_OK)
        }
        Command::Serve { port, host } => {
            let addr = SocketAddr::new(host, port);
            let rt = tokio::runtime::Runtime::new()
                .map_err(|e| fail(EXIT_ERROR, format!("cannot start runtime: {e}")))?;
            writeln!(out, "listening on http://{addr}").map_err(io)?;
            out.flush().map_err(io)?;
            rt.block_on(cptwb_service::serve(addr))
                .map_err(|e| fail(EXIT_ERROR, format!("server failed: {e}")))?;
            Ok(EXIT_OK)
        }
    }
}
