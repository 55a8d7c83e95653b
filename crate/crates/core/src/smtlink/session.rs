use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use tracing::debug;

use crate::scalar::Scalar;

use super::emit::{emit_assert, emit_declaration, emit_get_value, emit_header};
use super::sexp::{self, Sexp};
use super::term::{Formula, Model, Problem, Sort};
use super::SmtError;

/// Environment variable naming the default solver executable.
pub const SOLVER_ENV: &str = "PPCHECK_SOLVER";

/// How to reach the external solver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub program: PathBuf,
    /// Extra arguments; when empty, defaults are chosen from the program name.
    pub args: Vec<String>,
    /// Wall-clock budget per `check-sat`.
    pub timeout: Option<Duration>,
    /// Keep one process alive and use push/pop; otherwise every check re-sends the full script.
    pub incremental: bool,
    /// Write every checked script here.
    pub dump_dir: Option<PathBuf>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            program: std::env::var_os(SOLVER_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| "z3".into()),
            args: Vec::new(),
            timeout: None,
            incremental: true,
            dump_dir: None,
        }
    }
}

impl SolverConfig {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        SolverConfig {
            program: program.into(),
            ..Default::default()
        }
    }

    pub fn with_timeout(mut self, timeout: Option<Duration>) -> Self {
        self.timeout = timeout;
        self
    }

    /// Locate the executable, searching `PATH` for bare names.
    pub fn resolve(&self) -> Result<PathBuf, SmtError> {
        let p = &self.program;
        if p.components().count() > 1 {
            return if p.is_file() {
                Ok(p.clone())
            } else {
                Err(SmtError::SolverNotFound(p.clone()))
            };
        }
        std::env::var_os("PATH")
            .into_iter()
            .flat_map(|paths| std::env::split_paths(&paths).collect::<Vec<_>>())
            .map(|dir| dir.join(p))
            .find(|cand| cand.is_file())
            .ok_or_else(|| SmtError::SolverNotFound(p.clone()))
    }

    fn effective_args(&self) -> Vec<String> {
        if !self.args.is_empty() {
            return self.args.clone();
        }
        let name = self
            .program
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        if name.contains("cvc") {
            vec!["--lang=smt2".into(), "--incremental".into()]
        } else if name.contains("yices") {
            vec!["--incremental".into()]
        } else {
            vec!["-in".into(), "-smt2".into()]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Sat(Model),
    Unsat,
    Unknown(String),
}

impl Outcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, Outcome::Sat(_))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub checks: u64,
    pub sat: u64,
    pub unsat: u64,
    pub unknown: u64,
    pub solver_time: Duration,
}

impl SolverStats {
    pub fn merge(&mut self, other: &SolverStats) {
        self.checks += other.checks;
        self.sat += other.sat;
        self.unsat += other.unsat;
        self.unknown += other.unknown;
        self.solver_time += other.solver_time;
    }
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    stderr: Arc<Mutex<String>>,
}

impl Process {
    fn spawn(cfg: &SolverConfig) -> Result<Process, SmtError> {
        let program = cfg.resolve()?;
        let mut child = Command::new(&program)
            .args(cfg.effective_args())
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| SmtError::Io(format!("spawning {}: {e}", program.display())))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut stderr_pipe = child.stderr.take().expect("piped stderr");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = Arc::clone(&stderr);
        thread::spawn(move || {
            let mut buf = String::new();
            let _ = stderr_pipe.read_to_string(&mut buf);
            sink.lock().unwrap().push_str(&buf);
        });
        Ok(Process {
            child,
            stdin,
            lines: rx,
            stderr,
        })
    }

    fn send(&mut self, text: &str) -> Result<(), SmtError> {
        self.stdin
            .write_all(text.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| SmtError::Io(format!("writing to solver: {e}")))
    }

    fn crashed(&mut self) -> SmtError {
        let _ = self.child.kill();
        let _ = self.child.wait();
        // give the stderr reader a moment to drain
        thread::sleep(Duration::from_millis(20));
        SmtError::SolverCrashed(self.stderr.lock().unwrap().clone())
    }

    /// Next non-empty line; `Ok(None)` on deadline expiry.
    fn line(&mut self, deadline: Option<Instant>) -> Result<Option<String>, SmtError> {
        loop {
            let got = match deadline {
                Some(d) => {
                    let left = d.saturating_duration_since(Instant::now());
                    match self.lines.recv_timeout(left) {
                        Ok(l) => l,
                        Err(RecvTimeoutError::Timeout) => return Ok(None),
                        Err(RecvTimeoutError::Disconnected) => return Err(self.crashed()),
                    }
                }
                None => match self.lines.recv() {
                    Ok(l) => l,
                    Err(_) => return Err(self.crashed()),
                },
            };
            let got = got.trim().to_string();
            if got.is_empty() || got == "success" {
                continue;
            }
            if got.starts_with("(error") {
                return Err(SmtError::SolverError(got));
            }
            return Ok(Some(got));
        }
    }

    /// One balanced s-expression, possibly spanning several lines.
    fn sexp(&mut self) -> Result<Sexp, SmtError> {
        let mut text = String::new();
        let mut depth = 0;
        loop {
            let l = self.line(None)?.expect("no deadline");
            depth += sexp::depth_delta(&l);
            text.push_str(&l);
            text.push('\n');
            if depth <= 0 {
                break;
            }
        }
        sexp::parse(&text).map_err(SmtError::MalformedModel)
    }
}

impl Drop for Process {
    fn drop(&mut self) {
        let _ = self.stdin.write_all(b"(exit)\n");
        let _ = self.stdin.flush();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A solver session with a stack of assertion frames.
///
/// Frame 0 holds declarations' side conditions and base assertions; `push`
/// opens a new frame. Every `sat` answer is re-checked against all live
/// assertions with exact arithmetic before it is returned.
pub struct Session<S: Scalar> {
    cfg: SolverConfig,
    tag: String,
    logic: &'static str,
    decls: BTreeMap<String, Sort>,
    frames: Vec<Vec<Formula<S>>>,
    process: Option<Process>,
    stats: SolverStats,
    dumps: usize,
}

impl<S: Scalar> Session<S> {
    /// `logic` is e.g. `QF_LIA`; `tag` names dump files.
    pub fn new(cfg: &SolverConfig, logic: &'static str, tag: &str) -> Result<Self, SmtError> {
        cfg.resolve()?;
        Ok(Session {
            cfg: cfg.clone(),
            tag: tag.to_string(),
            logic,
            decls: BTreeMap::new(),
            frames: vec![Vec::new()],
            process: None,
            stats: SolverStats::default(),
            dumps: 0,
        })
    }

    /// Session preloaded with `problem`.
    pub fn with_problem(
        cfg: &SolverConfig,
        problem: &Problem<S>,
        tag: &str,
    ) -> Result<Self, SmtError> {
        let mut s = Session::new(cfg, problem.logic(), tag)?;
        for (name, sort) in problem.decls() {
            s.declare(name, *sort)?;
        }
        for f in problem.assertions() {
            s.assert(f.clone())?;
        }
        Ok(s)
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    pub fn declare(&mut self, name: &str, sort: Sort) -> Result<(), SmtError> {
        match self.decls.get(name) {
            Some(&s) if s == sort => return Ok(()),
            Some(&s) => {
                return Err(SmtError::Redeclared {
                    name: name.to_string(),
                    old: s,
                    new: sort,
                })
            }
            None => {}
        }
        self.decls.insert(name.to_string(), sort);
        if let Some(p) = self.live() {
            p.send(&emit_declaration(name, sort))?;
        }
        Ok(())
    }

    pub fn assert(&mut self, f: Formula<S>) -> Result<(), SmtError> {
        let mut vars = Vec::new();
        f.collect_variables(&mut vars);
        if let Some(v) = vars.into_iter().find(|v| !self.decls.contains_key(*v)) {
            return Err(SmtError::Undeclared(v.to_string()));
        }
        let text = emit_assert(&f, &self.decls);
        if let Some(p) = self.live() {
            p.send(&text)?;
        }
        self.frames.last_mut().unwrap().push(f);
        Ok(())
    }

    pub fn push(&mut self) -> Result<(), SmtError> {
        if let Some(p) = self.live() {
            p.send("(push 1)\n")?;
        }
        self.frames.push(Vec::new());
        Ok(())
    }

    pub fn pop(&mut self) -> Result<(), SmtError> {
        if self.frames.len() == 1 {
            return Err(SmtError::PopBase);
        }
        if let Some(p) = self.live() {
            p.send("(pop 1)\n")?;
        }
        self.frames.pop();
        Ok(())
    }

    /// Live process in incremental mode.
    fn live(&mut self) -> Option<&mut Process> {
        if self.cfg.incremental {
            self.process.as_mut()
        } else {
            None
        }
    }

    /// Current state as a replayable script, without the final commands.
    fn state_script(&self, live: bool) -> String {
        let mut out = emit_header(self.logic);
        if live {
            out.insert_str(0, "(set-option :global-declarations true)\n");
        }
        for (name, sort) in &self.decls {
            out.push_str(&emit_declaration(name, *sort));
        }
        for (i, frame) in self.frames.iter().enumerate() {
            if i > 0 && live {
                out.push_str("(push 1)\n");
            }
            for f in frame {
                out.push_str(&emit_assert(f, &self.decls));
            }
        }
        out
    }

    /// The full script the solver sees at the next check.
    pub fn script(&self) -> String {
        let mut s = self.state_script(false);
        s.push_str("(check-sat)\n");
        s.push_str(&emit_get_value(self.decls.keys().map(String::as_str)));
        s
    }

    fn dump(&mut self) -> Result<(), SmtError> {
        let Some(dir) = self.cfg.dump_dir.clone() else {
            return Ok(());
        };
        std::fs::create_dir_all(&dir).map_err(|e| SmtError::Io(e.to_string()))?;
        let path = dir.join(format!("{}-{:03}.smt2", sanitize(&self.tag), self.dumps));
        self.dumps += 1;
        std::fs::write(&path, self.script()).map_err(|e| SmtError::Io(e.to_string()))
    }

    pub fn check(&mut self) -> Result<Outcome, SmtError> {
        self.dump()?;
        let start = Instant::now();
        let result = self.check_inner();
        self.stats.checks += 1;
        self.stats.solver_time += start.elapsed();
        match &result {
            Ok(Outcome::Sat(_)) => self.stats.sat += 1,
            Ok(Outcome::Unsat) => self.stats.unsat += 1,
            Ok(Outcome::Unknown(_)) => self.stats.unknown += 1,
            Err(_) => {}
        }
        debug!(tag = %self.tag, outcome = ?result.as_ref().map(|o| match o {
            Outcome::Sat(_) => "sat", Outcome::Unsat => "unsat", Outcome::Unknown(_) => "unknown"
        }), elapsed = ?start.elapsed(), "check-sat");
        result
    }

    fn check_inner(&mut self) -> Result<Outcome, SmtError> {
        let mut proc = match self.process.take() {
            Some(p) if self.cfg.incremental => p,
            _ => {
                let mut p = Process::spawn(&self.cfg)?;
                p.send(&self.state_script(self.cfg.incremental))?;
                p
            }
        };
        proc.send("(check-sat)\n")?;
        let deadline = self.cfg.timeout.map(|t| Instant::now() + t);
        let answer = match proc.line(deadline)? {
            Some(a) => a,
            None => return Ok(Outcome::Unknown("timeout".into())),
        };
        let outcome = match answer.as_str() {
            "sat" => {
                let names: Vec<&str> = self.decls.keys().map(String::as_str).collect();
                let model = if names.is_empty() {
                    Model::new()
                } else {
                    proc.send(&emit_get_value(names.iter().copied()))?;
                    read_values(&proc.sexp()?)?
                };
                self.validate(&model)?;
                Outcome::Sat(model)
            }
            "unsat" => Outcome::Unsat,
            "unknown" => Outcome::Unknown("solver returned unknown".into()),
            other => return Err(SmtError::UnexpectedResponse(other.to_string())),
        };
        if self.cfg.incremental {
            self.process = Some(proc);
        }
        Ok(outcome)
    }

    fn validate(&self, model: &Model) -> Result<(), SmtError> {
        let mut p: Problem<S> = Problem::new();
        for (n, s) in &self.decls {
            p.declare(n.clone(), *s)?;
        }
        for f in self.frames.iter().flatten() {
            p.assert(f.clone())?;
        }
        p.check_model(model)
    }
}

fn sanitize(tag: &str) -> String {
    tag.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn read_values(e: &Sexp) -> Result<Model, SmtError> {
    let bad = |m: String| SmtError::MalformedModel(m);
    let Sexp::List(items) = e else {
        return Err(bad(format!("expected value list, got {e:?}")));
    };
    let mut model = Model::new();
    for item in items {
        match item {
            Sexp::List(pair) if pair.len() == 2 => {
                let name = pair[0]
                    .as_atom()
                    .ok_or_else(|| bad(format!("bad name in {item:?}")))?;
                model.insert(name, sexp::value(&pair[1]).map_err(bad)?);
            }
            _ => return Err(bad(format!("bad entry {item:?}"))),
        }
    }
    Ok(model)
}

/// One-shot check of `problem` in a fresh solver process.
pub fn solve<S: Scalar>(problem: &Problem<S>, cfg: &SolverConfig) -> Result<Outcome, SmtError> {
    let cfg = SolverConfig {
        incremental: false,
        ..cfg.clone()
    };
    Session::with_problem(&cfg, problem, "solve")?.check()
}
