// SPDX-License-Identifier: Apache-2.0

//! Runs an external SMT solver on a script file.
//!
//! The command is a template: a `{}` or `{file}` token is replaced by the
//! script path, otherwise the path is appended. Only the first result line
//! decides the verdict, since some solvers exit nonzero when `(get-model)`
//! follows an `unsat`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::process::{Child, Command, Stdio};
use std::sync::OnceLock;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use regex::Regex;

use crate::domain::BasisAssignment;

/// Environment variable naming the default solver command.
pub const SOLVER_ENV: &str = "QPEV_SOLVER";
pub const DEFAULT_SOLVER_TIMEOUT: Duration = Duration::from_secs(300);
/// Poll interval bounds; short solver runs dominate, so polling starts fast.
const POLL_MIN: Duration = Duration::from_micros(100);
const POLL_MAX: Duration = Duration::from_millis(20);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub command: String,
    pub timeout: Duration,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            command: std::env::var(SOLVER_ENV).unwrap_or_else(|_| "z3".into()),
            timeout: DEFAULT_SOLVER_TIMEOUT,
        }
    }
}

impl SolverConfig {
    pub fn new(command: impl Into<String>) -> Self {
        SolverConfig {
            command: command.into(),
            ..SolverConfig::default()
        }
    }
}

/// Bit-vector values from a `(get-model)` response.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolverModel {
    pub values: BTreeMap<String, u64>,
}

impl SolverModel {
    pub fn parse(text: &str) -> SolverModel {
        static DEF: OnceLock<Regex> = OnceLock::new();
        let re = DEF.get_or_init(|| {
            Regex::new(
                r"\(define-fun\s+\|?([A-Za-z_][\w.]*)\|?\s+\(\)\s+\(_\s+BitVec\s+\d+\)\s+(#b[01]+|#x[0-9a-fA-F]+|\(_\s+bv(\d+)\s+\d+\))",
            )
            .unwrap()
        });
        let mut values = BTreeMap::new();
        for cap in re.captures_iter(text) {
            let raw = &cap[2];
            let value = if let Some(bin) = raw.strip_prefix("#b") {
                u64::from_str_radix(bin, 2).ok()
            } else if let Some(hex) = raw.strip_prefix("#x") {
                u64::from_str_radix(hex, 16).ok()
            } else {
                cap.get(3).and_then(|d| d.as_str().parse().ok())
            };
            if let Some(v) = value {
                values.insert(cap[1].to_string(), v);
            }
        }
        SolverModel { values }
    }

    /// `b_1..b_n` from the model; symbols the solver left out are don't-cares
    /// and read as 0.
    pub fn assignment(&self, n: u32) -> BasisAssignment {
        BasisAssignment::new(
            (1..=n)
                .map(|j| self.values.get(&format!("b_{j}")).copied().unwrap_or(0) == 1)
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverOutcome {
    Unsat,
    Sat(SolverModel),
    Unknown { reason: String, elapsed: Duration },
    Unavailable(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverRun {
    pub outcome: SolverOutcome,
    pub elapsed: Duration,
    /// Peak resident set size of the solver process, where the platform
    /// reports it.
    pub peak_rss_bytes: Option<u64>,
}

/// Runs `cmd` on `script` with the default timeout.
pub fn run_external_solver(cmd: &str, script: &str) -> SolverOutcome {
    run_solver(&SolverConfig::new(cmd), script).outcome
}

/// Checks that the configured solver starts and answers a trivial query.
pub fn probe_solver(config: &SolverConfig) -> Result<(), String> {
    let probe = SolverConfig {
        command: config.command.clone(),
        timeout: config.timeout.min(Duration::from_secs(30)),
    };
    match run_solver(&probe, "(set-logic QF_BV)\n(check-sat)\n").outcome {
        SolverOutcome::Sat(_) => Ok(()),
        SolverOutcome::Unavailable(why) => Err(why),
        SolverOutcome::Unsat => Err(format!("`{}` answered unsat to an empty query", config.command)),
        SolverOutcome::Unknown { reason, .. } => Err(format!("`{}`: {reason}", config.command)),
    }
}

fn build_command(template: &str, path: &str) -> Option<Command> {
    let mut parts: Vec<String> = template.split_whitespace().map(String::from).collect();
    if parts.is_empty() {
        return None;
    }
    let mut substituted = false;
    for part in parts.iter_mut() {
        if part.contains("{file}") || part.contains("{}") {
            *part = part.replace("{file}", path).replace("{}", path);
            substituted = true;
        }
    }
    if !substituted {
        parts.push(path.to_string());
    }
    let mut cmd = Command::new(&parts[0]);
    cmd.args(&parts[1..]);
    // Own process group, so a timeout kill also reaches helper processes.
    #[cfg(unix)]
    std::os::unix::process::CommandExt::process_group(&mut cmd, 0);
    Some(cmd)
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> JoinHandle<String> {
    std::thread::spawn(move || {
        let mut buf = String::new();
        if let Some(mut p) = pipe {
            let _ = p.read_to_string(&mut buf);
        }
        buf
    })
}

struct Exit {
    success: bool,
    code: Option<i32>,
    peak_rss_bytes: Option<u64>,
}

#[cfg(unix)]
fn try_reap(child: &mut Child, block: bool) -> Option<Exit> {
    let pid = child.id() as libc::pid_t;
    let mut status: libc::c_int = 0;
    // SAFETY: rusage is plain data; wait4 fills it for our own child.
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    let flags = if block { 0 } else { libc::WNOHANG };
    // SAFETY: pid is a live child spawned by us and not yet reaped.
    let rc = unsafe { libc::wait4(pid, &mut status, flags, &mut usage) };
    if rc != pid {
        return None;
    }
    let exited = libc::WIFEXITED(status);
    let code = exited.then(|| libc::WEXITSTATUS(status));
    // ru_maxrss is in kilobytes on Linux, bytes on macOS.
    let scale = if cfg!(target_os = "macos") { 1 } else { 1024 };
    let rss = u64::try_from(usage.ru_maxrss).ok().filter(|&v| v > 0);
    Some(Exit {
        success: code == Some(0),
        code,
        peak_rss_bytes: rss.map(|v| v * scale),
    })
}

#[cfg(not(unix))]
fn try_reap(child: &mut Child, block: bool) -> Option<Exit> {
    let status = if block {
        child.wait().ok()
    } else {
        child.try_wait().ok().flatten()
    }?;
    Some(Exit {
        success: status.success(),
        code: status.code(),
        peak_rss_bytes: None,
    })
}

#[cfg(unix)]
fn kill_tree(child: &mut Child) {
    // SAFETY: signalling the process group we created for this child.
    unsafe {
        libc::kill(-(child.id() as libc::pid_t), libc::SIGKILL);
    }
}

#[cfg(not(unix))]
fn kill_tree(child: &mut Child) {
    let _ = child.kill();
}

/// Runs the solver described by `config` on `script`.
pub fn run_solver(config: &SolverConfig, script: &str) -> SolverRun {
    let start = Instant::now();
    let unavailable = |why: String| SolverRun {
        outcome: SolverOutcome::Unavailable(why),
        elapsed: start.elapsed(),
        peak_rss_bytes: None,
    };

    let mut file = match tempfile::Builder::new().suffix(".smt2").tempfile() {
        Ok(f) => f,
        Err(e) => return unavailable(format!("cannot create script file: {e}")),
    };
    if let Err(e) = file.write_all(script.as_bytes()).and_then(|_| file.flush()) {
        return unavailable(format!("cannot write script file: {e}"));
    }
    let path = file.path().to_string_lossy().into_owned();
    let Some(mut cmd) = build_command(&config.command, &path) else {
        return unavailable("empty solver command".into());
    };
    let mut child = match cmd
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
    {
        Ok(c) => c,
        Err(e) => return unavailable(format!("cannot start `{}`: {e}", config.command)),
    };
    let out = drain(child.stdout.take());
    let err = drain(child.stderr.take());

    let mut poll = POLL_MIN;
    let exit = loop {
        if let Some(exit) = try_reap(&mut child, false) {
            break Some(exit);
        }
        if start.elapsed() >= config.timeout {
            kill_tree(&mut child);
            let _ = try_reap(&mut child, true);
            break None;
        }
        std::thread::sleep(poll);
        poll = (poll * 2).min(POLL_MAX);
    };
    let elapsed = start.elapsed();
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();

    let Some(exit) = exit else {
        return SolverRun {
            outcome: SolverOutcome::Unknown {
                reason: format!("timeout after {:.1} s", config.timeout.as_secs_f64()),
                elapsed,
            },
            elapsed,
            peak_rss_bytes: None,
        };
    };
    let first = stdout.lines().map(str::trim).find(|l| !l.is_empty());
    let outcome = match first {
        Some("unsat") => SolverOutcome::Unsat,
        Some("sat") => SolverOutcome::Sat(SolverModel::parse(&stdout)),
        Some("unknown") => SolverOutcome::Unknown {
            reason: "solver answered unknown".into(),
            elapsed,
        },
        other => {
            let detail = stderr
                .lines()
                .chain(other)
                .map(str::trim)
                .find(|l| !l.is_empty())
                .unwrap_or("no output");
            let reason = if exit.success {
                format!("unparseable output: {detail}")
            } else {
                match exit.code {
                    Some(code) => format!("exit status {code}: {detail}"),
                    None => format!("terminated by signal: {detail}"),
                }
            };
            SolverOutcome::Unknown { reason, elapsed }
        }
    };
    SolverRun {
        outcome,
        elapsed,
        peak_rss_bytes: exit.peak_rss_bytes,
    }
}
