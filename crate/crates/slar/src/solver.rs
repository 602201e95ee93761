//! External SMT solver processes: configuration, one-shot runs, a persistent
//! session, and the [`Backend`] built on them.

use std::env;
use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use slar_core::backend::{parse_answer, Backend, Query, SatAnswer, UnknownReason};

/// Environment variable naming the solver used when none is given.
pub const SOLVER_ENV: &str = "SLAR_SOLVER";

const DEFAULT_SOLVER: &str = "z3";
const DEFAULT_TIMEOUT_MS: u64 = 10_000;
const MARKER: &str = "@slar-done";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverConfig {
    pub executable: PathBuf,
    pub args: Vec<String>,
    pub timeout_ms: u64,
    pub working_dir: Option<PathBuf>,
    /// Directory receiving a copy of every script sent.
    pub dump_dir: Option<PathBuf>,
    /// Keep one solver process alive across queries.
    pub persistent: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("solver executable not found: {0}")]
    NotFound(PathBuf),
    #[error("solver timeout must be positive")]
    ZeroTimeout,
    #[error("working directory does not exist: {0}")]
    WorkingDir(PathBuf),
    #[error("cannot create dump directory {0}: {1}")]
    DumpDir(PathBuf, io::Error),
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver timed out")]
    Timeout,
    #[error("solver failed: {0}")]
    Failed(String),
}

impl From<RunError> for UnknownReason {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Timeout => UnknownReason::Timeout,
            e => UnknownReason::SolverError(e.to_string()),
        }
    }
}

impl SolverConfig {
    /// Defaults for `executable`: z3 reads its script from standard input
    /// only when asked to.
    pub fn new(executable: impl Into<PathBuf>) -> Self {
        let executable = executable.into();
        let args = if is_z3(&executable) { vec!["-in".to_string()] } else { Vec::new() };
        SolverConfig {
            executable,
            args,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            working_dir: None,
            dump_dir: None,
            persistent: true,
        }
    }

    /// The solver named by the environment, or z3.
    pub fn from_env() -> Self {
        match env::var_os(SOLVER_ENV) {
            Some(p) if !p.is_empty() => SolverConfig::new(p),
            _ => SolverConfig::new(DEFAULT_SOLVER),
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    /// Checks the configuration and resolves the executable.
    pub fn validate(&self) -> Result<PathBuf, ConfigError> {
        if self.timeout_ms == 0 {
            return Err(ConfigError::ZeroTimeout);
        }
        if let Some(d) = &self.working_dir {
            if !d.is_dir() {
                return Err(ConfigError::WorkingDir(d.clone()));
            }
        }
        if let Some(d) = &self.dump_dir {
            fs::create_dir_all(d).map_err(|e| ConfigError::DumpDir(d.clone(), e))?;
        }
        resolve(&self.executable).ok_or_else(|| ConfigError::NotFound(self.executable.clone()))
    }

    fn command(&self, exe: &Path) -> Command {
        let mut cmd = Command::new(exe);
        cmd.args(&self.args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::null());
        if let Some(d) = &self.working_dir {
            cmd.current_dir(d);
        }
        cmd
    }
}

fn is_z3(exe: &Path) -> bool {
    exe.file_stem().map_or(false, |s| s == "z3")
}

fn resolve(exe: &Path) -> Option<PathBuf> {
    if exe.components().count() > 1 {
        return exe.is_file().then(|| exe.to_path_buf());
    }
    env::split_paths(&env::var_os("PATH")?)
        .map(|dir| dir.join(exe))
        .find(|p| p.is_file())
}

/// Runs `script` in a fresh solver process and returns its standard output.
pub fn run_solver(script: &str, cfg: &SolverConfig) -> Result<String, RunError> {
    let exe = cfg.validate()?;
    run_once(&exe, script, cfg, cfg.timeout())
}

fn run_once(exe: &Path, script: &str, cfg: &SolverConfig, timeout: Duration) -> Result<String, RunError> {
    let mut child = cfg.command(exe).spawn().map_err(|e| RunError::Failed(e.to_string()))?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let mut stdout = child.stdout.take().expect("piped stdout");
    let script = script.to_string();
    thread::spawn(move || {
        let _ = stdin.write_all(script.as_bytes());
    });
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut out = String::new();
        let res = stdout.read_to_string(&mut out).map(|_| out);
        let _ = tx.send(res);
    });
    match rx.recv_timeout(timeout) {
        Ok(Ok(out)) => {
            let status = child.wait().map_err(|e| RunError::Failed(e.to_string()))?;
            if !status.success() && matches!(parse_answer(&out), SatAnswer::Unknown(_)) {
                return Err(RunError::Failed(format!("{}: {}", status, out.trim())));
            }
            Ok(out)
        }
        Ok(Err(e)) => {
            kill(&mut child);
            Err(RunError::Failed(e.to_string()))
        }
        Err(_) => {
            kill(&mut child);
            Err(RunError::Timeout)
        }
    }
}

fn kill(child: &mut Child) {
    let _ = child.kill();
    let _ = child.wait();
}

/// A long-lived solver reading scripts separated by `(reset)`.
struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Session {
    fn spawn(exe: &Path, cfg: &SolverConfig) -> io::Result<Self> {
        let mut child = cfg.command(exe).spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Session { child, stdin, lines })
    }

    fn query(&mut self, script: &str, timeout: Duration) -> Result<String, RunError> {
        let deadline = Instant::now() + timeout;
        let framed = format!("(reset)\n{}(echo \"{}\")\n", script, MARKER);
        self.stdin
            .write_all(framed.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| RunError::Failed(e.to_string()))?;
        let mut out = String::new();
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(line) if line.trim() == MARKER => return Ok(out),
                Ok(line) => {
                    out.push_str(&line);
                    out.push('\n');
                }
                Err(RecvTimeoutError::Timeout) => return Err(RunError::Timeout),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(RunError::Failed(format!("solver exited: {}", out.trim())))
                }
            }
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        kill(&mut self.child);
    }
}

/// Answers queries with an external solver.
///
/// A deadline, once set, bounds every later query and makes
/// [`Backend::interrupted`] report true after it passes.
pub struct SolverBackend {
    cfg: SolverConfig,
    exe: PathBuf,
    session: Option<Session>,
    deadline: Option<Instant>,
    dumped: usize,
    pub calls: usize,
}

impl SolverBackend {
    pub fn new(cfg: SolverConfig) -> Result<Self, ConfigError> {
        let exe = cfg.validate()?;
        Ok(SolverBackend {
            cfg,
            exe,
            session: None,
            deadline: None,
            dumped: 0,
            calls: 0,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.deadline = deadline;
    }

    /// Answers one query; errors carry the reason the answer is unknown.
    pub fn run(&mut self, script: &str) -> Result<String, RunError> {
        let mut timeout = self.cfg.timeout();
        if let Some(d) = self.deadline {
            timeout = timeout.min(d.saturating_duration_since(Instant::now()));
            if timeout.is_zero() {
                return Err(RunError::Timeout);
            }
        }
        if !self.cfg.persistent {
            return run_once(&self.exe, script, &self.cfg, timeout);
        }
        if self.session.is_none() {
            let s = Session::spawn(&self.exe, &self.cfg).map_err(|e| RunError::Failed(e.to_string()))?;
            self.session = Some(s);
        }
        let res = self.session.as_mut().expect("session").query(script, timeout);
        if res.is_err() {
            self.session = None;
        }
        res
    }

    fn dump(&mut self, script: &str) {
        if let Some(dir) = &self.cfg.dump_dir {
            let path = dir.join(format!("query-{:06}.smt2", self.dumped));
            self.dumped += 1;
            let _ = fs::write(path, script);
        }
    }
}

impl Backend for SolverBackend {
    fn check_sat(&mut self, q: &Query) -> SatAnswer {
        self.calls += 1;
        self.dump(&q.script);
        match self.run(&q.script) {
            Ok(out) => parse_answer(&out),
            Err(e) => SatAnswer::Unknown(e.into()),
        }
    }

    fn interrupted(&self) -> bool {
        self.deadline.map_or(false, |d| Instant::now() >= d)
    }
}
