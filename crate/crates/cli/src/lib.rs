// SPDX-License-Identifier: Apache-2.0

//! `qpev` command-line driver.
//!
//! Exit codes: 0 success (every property PASS), 1 some property failed or
//! could not be decided, 2 bad input (usage, parse or I/O error), 3 solver
//! unavailable with the SMT engine.

mod bench;

pub use bench::{cmd_bench, BenchOptions, BenchReport, BenchRow, RowVerdict, DEFAULT_PHASE_CAP};

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use qpev_core::circuit::{
    applicable_sites, enumerate_mutants, generate_qpe, mutate, parse_circuit, parse_op,
    serialize_circuit, Circuit, GateOp, MutationClass, MutationParams, MutationSpec, QubitRef,
};
use qpev_core::domain::{interpret, BasisAssignment, InputTemplate};
use qpev_core::oracle::cross_validate;
use qpev_core::property::{
    emit_smtlib_with_block, verify_all, Engine, IqftBlock, PropertyError, PropertyId,
    SolverConfig, VerificationReport, VerifyOptions, SOLVER_ENV,
};

// Writes to stdout, ignoring a closed pipe.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout().lock(), $($arg)*);
    }};
}

macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("solver command `{0}` is unavailable (set --solver or {SOLVER_ENV})")]
    SolverUnavailable(String),
    #[error(transparent)]
    Property(PropertyError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::SolverUnavailable(_) => EXIT_SOLVER,
            CliError::Property(PropertyError::EngineDisagreement { .. }) => EXIT_FAIL,
            _ => EXIT_INPUT,
        }
    }
}

impl From<PropertyError> for CliError {
    fn from(e: PropertyError) -> Self {
        match e {
            PropertyError::SolverUnavailable(cmd) => CliError::SolverUnavailable(cmd),
            PropertyError::Block(msg) => CliError::Usage(format!("invalid --block: {msg}")),
            other => CliError::Property(other),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qpev", version, about = "Bit-vector abstraction verifier for QPE circuits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the textbook QPE circuit for n precision and p phase qubits.
    Generate(GenerateArgs),
    /// Check the four QPE properties on a circuit file.
    Verify(VerifyArgs),
    /// Inject one error into a circuit (lists sites when --site is omitted).
    Mutate(MutateArgs),
    /// Time correct and wrong-control circuits over a list of phase-register sizes.
    Bench(BenchArgs),
    /// Write the SMT-LIB2 encoding of a property.
    ExportSmt(ExportArgs),
    /// Dump the abstract trace of a circuit under one basis assignment.
    Trace(TraceArgs),
    /// Compare the generated circuit and its mutants on the statevector oracle.
    CrossValidate(CrossArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(short = 'n', long)]
    pub n: u32,
    #[arg(short = 'p', long)]
    pub p: u32,
    /// Output file; standard output when omitted.
    #[arg(short = 'o', long)]
    pub out: Option<PathBuf>,
    /// Overwrite an existing output file.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Internal,
    Smt,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Internal => Engine::Internal,
            EngineArg::Smt => Engine::Smt,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Solver command; `{}` or `{file}` marks the script path, otherwise it is appended.
    #[arg(long, env = SOLVER_ENV, default_value = "z3")]
    pub solver: String,
    /// Per-query solver timeout in seconds.
    #[arg(long, default_value_t = 300)]
    pub solver_timeout: u64,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            command: self.solver.clone(),
            timeout: Duration::from_secs(self.solver_timeout),
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub circuit: PathBuf,
    #[arg(long, value_enum, default_value = "internal")]
    pub engine: EngineArg,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Explicit iQFT op range `START..END` (end exclusive).
    #[arg(long)]
    pub block: Option<String>,
    /// Print the JSON report instead of the summary.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct MutateArgs {
    pub circuit: PathBuf,
    #[arg(long)]
    pub class: String,
    #[arg(long)]
    pub site: Option<usize>,
    /// Inserted or replacement qubit, e.g. `P2` or `H1`.
    #[arg(long)]
    pub qubit: Option<String>,
    /// Replacement rotation index for CRK_WRONG_K.
    #[arg(long)]
    pub k: Option<u32>,
    /// Inserted gate for CRK_EXTRA / CU_EXTRA, in circuit-file syntax.
    #[arg(long)]
    pub gate: Option<String>,
    /// Replacement target map for CU_WRONG_TGT, e.g. `1:H2,2:H2`.
    #[arg(long)]
    pub map: Option<String>,
    #[arg(short = 'o', long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(short = 'n', long, default_value_t = 6)]
    pub n: u32,
    /// Comma-separated phase-register sizes.
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32,64")]
    pub phases: Vec<u32>,
    #[arg(long, value_enum, default_value = "internal")]
    pub engine: EngineArg,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write the JSON table here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Run rows concurrently.
    #[arg(long)]
    pub parallel: bool,
    /// Per-row timeout in seconds.
    #[arg(long, default_value_t = 600)]
    pub row_timeout: u64,
    /// Permit phase sizes above the default cap.
    #[arg(long)]
    pub allow_large: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    pub circuit: PathBuf,
    /// p1..p4, or `all` (then --out is a directory).
    #[arg(long, default_value = "all")]
    pub property: String,
    #[arg(short = 'o', long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub block: Option<String>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TemplateArg {
    Fresh,
    Iqft,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    pub circuit: PathBuf,
    /// Basis bits b_1..b_n, e.g. `101`.
    #[arg(long)]
    pub assignment: String,
    #[arg(long, value_enum, default_value = "fresh")]
    pub template: TemplateArg,
}

#[derive(Debug, Args)]
pub struct CrossArgs {
    #[arg(short = 'n', long)]
    pub n: u32,
    #[arg(short = 'p', long, default_value_t = 1)]
    pub p: u32,
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, text: &str, force: bool) -> Result<(), CliError> {
    if path.exists() && !force {
        return Err(CliError::Usage(format!(
            "{} exists; pass --force to overwrite",
            path.display()
        )));
    }
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_circuit(path: &Path) -> Result<Circuit, CliError> {
    let text = read_file(path)?;
    parse_circuit(&text).map_err(|e| CliError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn parse_range(s: &str) -> Result<Range<usize>, CliError> {
    let bad = || CliError::Usage(format!("--block expects START..END, got {s:?}"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let start = a.trim().parse().map_err(|_| bad())?;
    let end = b.trim().parse().map_err(|_| bad())?;
    Ok(start..end)
}

/// Writes the generated circuit; returns the serialized text.
pub fn cmd_generate(args: &GenerateArgs) -> Result<String, CliError> {
    let c = generate_qpe(args.n, args.p).map_err(|e| CliError::Usage(e.to_string()))?;
    let text = serialize_circuit(&c);
    if let Some(path) = &args.out {
        write_file(path, &text, args.force)?;
    }
    Ok(text)
}

pub fn verify_options(args: &VerifyArgs) -> Result<VerifyOptions, CliError> {
    Ok(VerifyOptions {
        engine: args.engine.into(),
        solver: args.solver.config(),
        block: args.block.as_deref().map(parse_range).transpose()?,
        allow_fallback: false,
    })
}

/// Verifies a circuit file and writes the report if requested.
pub fn cmd_verify(args: &VerifyArgs) -> Result<VerificationReport, CliError> {
    let c = load_circuit(&args.circuit)?;
    let report = verify_all(&c, &verify_options(args)?)?;
    if let Some(path) = &args.report {
        write_file(path, &(report.to_json() + "\n"), true)?;
    }
    Ok(report)
}

pub fn report_exit_code(report: &VerificationReport) -> i32 {
    if report.all_pass() {
        EXIT_OK
    } else {
        EXIT_FAIL
    }
}

fn parse_qubit(s: &str) -> Result<QubitRef, CliError> {
    s.parse()
        .map_err(|e| CliError::Usage(format!("--qubit: {e}")))
}

/// Explicit params from the flags, or `None` when none were given.
fn explicit_params(args: &MutateArgs, c: &Circuit) -> Result<Option<MutationParams>, CliError> {
    let given = [
        args.qubit.is_some(),
        args.k.is_some(),
        args.gate.is_some(),
        args.map.is_some(),
    ];
    if given.iter().filter(|&&g| g).count() > 1 {
        return Err(CliError::Usage(
            "use at most one of --qubit, --k, --gate, --map".into(),
        ));
    }
    let usage = |e: qpev_core::circuit::ParseError| CliError::Usage(e.to_string());
    if let Some(q) = &args.qubit {
        return Ok(Some(MutationParams::Qubit(parse_qubit(q)?)));
    }
    if let Some(k) = args.k {
        return Ok(Some(MutationParams::K(k)));
    }
    if let Some(g) = &args.gate {
        return Ok(Some(MutationParams::Gate(
            parse_op(g, c.n(), c.p()).map_err(usage)?,
        )));
    }
    if let Some(m) = &args.map {
        let op = parse_op(&format!("cu c=P1 map={m}"), c.n(), c.p()).map_err(usage)?;
        if let GateOp::Cu { target_map, .. } = op {
            return Ok(Some(MutationParams::Map(target_map)));
        }
    }
    Ok(None)
}

pub enum MutateOutcome {
    /// No site given: the applicable sites.
    Sites(MutationClass, Vec<usize>),
    Mutant(MutationSpec, Circuit),
}

/// Applies one mutation; without `--site`, reports where the class applies.
pub fn cmd_mutate(args: &MutateArgs) -> Result<MutateOutcome, CliError> {
    let c = load_circuit(&args.circuit)?;
    let class: MutationClass = args.class.parse().map_err(CliError::Usage)?;
    let sites = applicable_sites(&c, class);
    let Some(site) = args.site else {
        return Ok(MutateOutcome::Sites(class, sites));
    };
    let spec = match explicit_params(args, &c)? {
        Some(params) => MutationSpec::new(class, site, params),
        None => enumerate_mutants(&c, &[class])
            .into_iter()
            .map(|(spec, _)| spec)
            .find(|spec| spec.site == site)
            .unwrap_or_else(|| MutationSpec::new(class, site, MutationParams::None)),
    };
    let mutant = mutate(&c, &spec).map_err(|e| {
        let listed: Vec<String> = sites.iter().map(usize::to_string).collect();
        CliError::Usage(format!(
            "{e}; valid sites for {class}: {}",
            if listed.is_empty() {
                "none".to_string()
            } else {
                listed.join(", ")
            }
        ))
    })?;
    if let Some(path) = &args.out {
        write_file(path, &serialize_circuit(&mutant), args.force)?;
    }
    Ok(MutateOutcome::Mutant(spec, mutant))
}

/// SMT-LIB2 scripts for the requested properties, keyed by property.
pub fn cmd_export_smt(args: &ExportArgs) -> Result<Vec<(PropertyId, String)>, CliError> {
    let c = load_circuit(&args.circuit)?;
    let block = match &args.block {
        Some(s) => Some(IqftBlock::from_range(&c, parse_range(s)?)?),
        None => None,
    };
    let ids: Vec<PropertyId> = if args.property.eq_ignore_ascii_case("all") {
        PropertyId::ALL.to_vec()
    } else {
        vec![args.property.parse().map_err(CliError::Usage)?]
    };
    let scripts = ids
        .into_iter()
        .map(|id| Ok((id, emit_smtlib_with_block(&c, id, block.as_ref())?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    match (&args.out, scripts.len()) {
        (Some(path), 1) => write_file(path, &scripts[0].1, args.force)?,
        (Some(dir), _) => {
            fs::create_dir_all(dir).map_err(|source| CliError::Io {
                path: dir.display().to_string(),
                source,
            })?;
            for (id, script) in &scripts {
                write_file(&dir.join(format!("{}.smt2", id.name())), script, args.force)?;
            }
        }
        (None, 1) => {}
        (None, _) => {
            return Err(CliError::Usage(
                "--property all needs --out DIR".into(),
            ))
        }
    }
    Ok(scripts)
}

pub fn cmd_trace(args: &TraceArgs) -> Result<serde_json::Value, CliError> {
    let c = load_circuit(&args.circuit)?;
    let a: BasisAssignment = args.assignment.parse().map_err(CliError::Usage)?;
    let template = match args.template {
        TemplateArg::Fresh => InputTemplate::Fresh,
        TemplateArg::Iqft => InputTemplate::IqftSym,
    };
    let trace = interpret(&c, &a, template).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(trace.to_json(&c))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: &Command) -> Result<i32, CliError> {
    match command {
        Command::Generate(args) => {
            let text = cmd_generate(args)?;
            if args.out.is_none() {
                out!("{text}");
            }
            Ok(EXIT_OK)
        }
        Command::Verify(args) => {
            let report = cmd_verify(args)?;
            if args.json {
                outln!("{}", report.to_json());
            } else {
                out!("{}", report.summary());
            }
            Ok(report_exit_code(&report))
        }
        Command::Mutate(args) => match cmd_mutate(args)? {
            MutateOutcome::Sites(class, sites) => {
                let listed: Vec<String> = sites.iter().map(usize::to_string).collect();
                outln!("{class} applies at sites: {}", listed.join(" "));
                Ok(EXIT_OK)
            }
            MutateOutcome::Mutant(spec, mutant) => {
                if args.out.is_none() {
                    out!("{}", serialize_circuit(&mutant));
                } else {
                    eprintln!("applied {spec}");
                }
                Ok(EXIT_OK)
            }
        },
        Command::Bench(args) => {
            let opts = BenchOptions {
                n: args.n,
                phases: args.phases.clone(),
                engine: args.engine.into(),
                solver: args.solver.config(),
                parallel: args.parallel,
                row_timeout: Duration::from_secs(args.row_timeout),
                allow_large: args.allow_large,
            };
            let report = cmd_bench(&opts)?;
            if let Some(path) = &args.report {
                write_file(path, &(report.to_json() + "\n"), true)?;
            }
            out!("{}", report.table());
            Ok(if report.expected_pattern() {
                EXIT_OK
            } else {
                EXIT_FAIL
            })
        }
        Command::ExportSmt(args) => {
            let scripts = cmd_export_smt(args)?;
            if args.out.is_none() {
                out!("{}", scripts[0].1);
            }
            Ok(EXIT_OK)
        }
        Command::Trace(args) => {
            let json = cmd_trace(args)?;
            outln!("{}", serde_json::to_string_pretty(&json).expect("trace serializes"));
            Ok(EXIT_OK)
        }
        Command::CrossValidate(args) => {
            let cv = cross_validate(args.n, args.p).map_err(|e| CliError::Usage(e.to_string()))?;
            outln!("{}", cv.to_json());
            Ok(if cv.all_exact() { EXIT_OK } else { EXIT_FAIL })
        }
    }
}
