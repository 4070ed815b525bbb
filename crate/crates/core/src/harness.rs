//! Times emulators on identical guest binaries, checks their stdout and
//! exit codes agree byte-for-byte, and serializes the measurements.
//!
//! Timing uses the host's child-resource accounting (wait4 rusage), the
//! same real/user/sys split as shell `time`; nothing is measured
//! in-process. Children run sequentially so CPU accounting stays clean.

use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("failed to spawn {program}: {source}")]
    Spawn { program: String, source: std::io::Error },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("output mismatch: {0}")]
    OutputMismatch(String),
    #[error("no emulators to run")]
    NoEmulators,
    #[error("report has no runs")]
    EmptyReport,
    #[error("emulator label {0:?} may not contain commas, quotes, or newlines")]
    BadLabel(String),
    #[error("failed to parse report: {0}")]
    Parse(String),
}

/// One timed child process.
#[derive(Debug, Clone)]
pub struct TimedRun {
    pub real_ms: f64,
    pub user_ms: f64,
    pub sys_ms: f64,
    pub stdout: Vec<u8>,
    pub exit: i32,
}

fn timeval_ms(tv: libc::timeval) -> f64 {
    tv.tv_sec as f64 * 1e3 + tv.tv_usec as f64 / 1e3
}

fn wait_child(pid: u32) -> std::io::Result<(i32, libc::rusage)> {
    let mut status: libc::c_int = 0;
    let mut rusage: libc::rusage = unsafe { std::mem::zeroed() };
    loop {
        let r = unsafe { libc::wait4(pid as libc::pid_t, &mut status, 0, &mut rusage) };
        if r == -1 {
            let err = std::io::Error::last_os_error();
            if err.kind() == std::io::ErrorKind::Interrupted {
                continue;
            }
            return Err(err);
        }
        return Ok((status, rusage));
    }
}

/// Runs `program args...` to completion, capturing stdout fully and the
/// child's wall-clock and CPU times. A nonzero exit is reported in the
/// result, not as an error.
pub fn time_process(program: &str, args: &[String]) -> Result<TimedRun, HarnessError> {
    let start = Instant::now();
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|source| HarnessError::Spawn { program: program.to_string(), source })?;

    let mut stdout = Vec::new();
    let read_result = child
        .stdout
        .take()
        .expect("stdout was piped")
        .read_to_end(&mut stdout);
    // Reap unconditionally so a failed pipe read cannot leak a zombie.
    let (status, rusage) = wait_child(child.id())?;
    let real_ms = start.elapsed().as_secs_f64() * 1e3;
    read_result?;

    let exit = if libc::WIFEXITED(status) {
        libc::WEXITSTATUS(status)
    } else if libc::WIFSIGNALED(status) {
        128 + libc::WTERMSIG(status)
    } else {
        -1
    };
    Ok(TimedRun {
        real_ms,
        user_ms: timeval_ms(rusage.ru_utime),
        sys_ms: timeval_ms(rusage.ru_stime),
        stdout,
        exit,
    })
}

/// An emulator under test: `argv ++ [guest-binary]` is the invocation.
#[derive(Debug, Clone)]
pub struct EmulatorSpec {
    pub label: String,
    pub argv: Vec<String>,
    /// The reference emulator (qemu); speedups are computed against it.
    pub reference: bool,
}

impl EmulatorSpec {
    pub fn new(label: &str, argv: Vec<String>) -> Self {
        EmulatorSpec { label: label.to_string(), argv, reference: false }
    }

    pub fn reference(label: &str, argv: Vec<String>) -> Self {
        EmulatorSpec { label: label.to_string(), argv, reference: true }
    }
}

/// One row of the report: a single timed run of one emulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub emulator: String,
    pub run: u32,
    pub real_ms: f64,
    pub user_ms: f64,
    pub sys_ms: f64,
    pub exit: i32,
    pub stdout_sha: String,
}

/// Per-emulator medians, plus the user-time speedup of this emulator
/// relative to the reference emulator when one is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub emulator: String,
    pub real_ms: f64,
    pub user_ms: f64,
    pub sys_ms: f64,
    pub exit: i32,
    pub stdout_sha: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub runs: Vec<RunRecord>,
    pub summary: Vec<SummaryRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("durations are finite"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Builds per-emulator median rows from raw runs. `reference` names the
/// emulator whose user time is the speedup numerator.
pub fn summarize(runs: &[RunRecord], reference: Option<&str>) -> Vec<SummaryRecord> {
    let mut labels: Vec<&str> = Vec::new();
    for r in runs {
        if !labels.contains(&r.emulator.as_str()) {
            labels.push(&r.emulator);
        }
    }
    let median_of = |label: &str, f: fn(&RunRecord) -> f64| {
        median(runs.iter().filter(|r| r.emulator == label).map(f).collect())
    };
    let ref_user = reference.map(|label| median_of(label, |r| r.user_ms));
    labels
        .iter()
        .map(|label| {
            let sample = runs.iter().find(|r| r.emulator == *label).expect("label came from runs");
            let user_ms = median_of(label, |r| r.user_ms);
            let speedup = match (reference, ref_user) {
                (Some(ref_label), Some(ref_user)) if *label != ref_label && user_ms > 0.0 => {
                    Some(ref_user / user_ms)
                }
                _ => None,
            };
            SummaryRecord {
                emulator: label.to_string(),
                real_ms: median_of(label, |r| r.real_ms),
                user_ms,
                sys_ms: median_of(label, |r| r.sys_ms),
                exit: sample.exit,
                stdout_sha: sample.stdout_sha.clone(),
                speedup,
            }
        })
        .collect()
}

fn first_divergence(expected: &[u8], found: &[u8]) -> String {
    let index = expected
        .iter()
        .zip(found.iter())
        .position(|(a, b)| a != b)
        .unwrap_or_else(|| expected.len().min(found.len()));
    let show = |bytes: &[u8]| match bytes.get(index) {
        Some(b) => format!("{b:#04x}"),
        None => "<end of stream>".to_string(),
    };
    format!(
        "first divergence at byte {index}: {} vs {} (lengths {} vs {})",
        show(expected),
        show(found),
        expected.len(),
        found.len()
    )
}

/// Runs every emulator `runs_per_emulator` times on the identical binary,
/// failing on any stdout or exit-code difference across emulators or
/// across runs. On success the report carries all raw runs plus medians.
pub fn run_differential(
    binary: &Path,
    emulators: &[EmulatorSpec],
    runs_per_emulator: usize,
) -> Result<BenchReport, HarnessError> {
    if emulators.is_empty() {
        return Err(HarnessError::NoEmulators);
    }
    if runs_per_emulator == 0 {
        return Err(HarnessError::EmptyReport);
    }
    let mut baseline: Option<(String, Vec<u8>, i32)> = None;
    let mut runs: Vec<RunRecord> = Vec::new();
    for spec in emulators {
        let (program, fixed_args) =
            spec.argv.split_first().ok_or(HarnessError::NoEmulators)?;
        let mut args: Vec<String> = fixed_args.to_vec();
        args.push(binary.display().to_string());
        for run in 0..runs_per_emulator {
            let timed = time_process(program, &args)?;
            match &baseline {
                None => baseline = Some((spec.label.clone(), timed.stdout.clone(), timed.exit)),
                Some((base_label, base_stdout, base_exit)) => {
                    if timed.exit != *base_exit {
                        return Err(HarnessError::OutputMismatch(format!(
                            "exit code differs: {base_label}={base_exit}, {}#{run}={}",
                            spec.label, timed.exit
                        )));
                    }
                    if timed.stdout != *base_stdout {
                        return Err(HarnessError::OutputMismatch(format!(
                            "{base_label} vs {}#{run}: {}",
                            spec.label,
                            first_divergence(base_stdout, &timed.stdout)
                        )));
                    }
                }
            }
            runs.push(RunRecord {
                emulator: spec.label.clone(),
                run: run as u32,
                real_ms: timed.real_ms,
                user_ms: timed.user_ms,
                sys_ms: timed.sys_ms,
                exit: timed.exit,
                stdout_sha: sha256_hex(&timed.stdout),
            });
        }
    }
    let reference = emulators.iter().find(|e| e.reference).map(|e| e.label.as_str());
    let summary = summarize(&runs, reference);
    Ok(BenchReport { runs, summary })
}

impl BenchReport {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.runs.is_empty() {
            return Err(HarnessError::EmptyReport);
        }
        for label in self.runs.iter().map(|r| &r.emulator).chain(self.summary.iter().map(|s| &s.emulator)) {
            if label.contains(',') || label.contains('"') || label.contains('\n') {
                return Err(HarnessError::BadLabel(label.clone()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        self.validate()?;
        serde_json::to_string_pretty(self).map_err(|e| HarnessError::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))
    }

    /// Fixed schema: emulator,run,real_ms,user_ms,sys_ms,exit,stdout_sha,
    /// speedup. Per-run rows carry a run index; summary rows say `median`
    /// and may carry a speedup.
    pub fn to_csv(&self) -> Result<String, HarnessError> {
        self.validate()?;
        let mut out = String::from("emulator,run,real_ms,user_ms,sys_ms,exit,stdout_sha,speedup\n");
        for r in &self.runs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},\n",
                r.emulator, r.run, r.real_ms, r.user_ms, r.sys_ms, r.exit, r.stdout_sha
            ));
        }
        for s in &self.summary {
            let speedup = s.speedup.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},median,{},{},{},{},{},{}\n",
                s.emulator, s.real_ms, s.user_ms, s.sys_ms, s.exit, s.stdout_sha, speedup
            ));
        }
        Ok(out)
    }

    pub fn from_csv(text: &str) -> Result<Self, HarnessError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| HarnessError::Parse("empty input".into()))?;
        if header != "emulator,run,real_ms,user_ms,sys_ms,exit,stdout_sha,speedup" {
            return Err(HarnessError::Parse(format!("unexpected header {header:?}")));
        }
        let mut report = BenchReport { runs: Vec::new(), summary: Vec::new() };
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 8 {
                return Err(HarnessError::Parse(format!("line {}: expected 8 fields", lineno + 2)));
            }
            let num = |s: &str| -> Result<f64, HarnessError> {
                s.parse().map_err(|_| HarnessError::Parse(format!("line {}: bad number {s:?}", lineno + 2)))
            };
            if fields[1] == "median" {
                report.summary.push(SummaryRecord {
                    emulator: fields[0].to_string(),
                    real_ms: num(fields[2])?,
                    user_ms: num(fields[3])?,
                    sys_ms: num(fields[4])?,
                    exit: fields[5]
                        .parse()
                        .map_err(|_| HarnessError::Parse(format!("bad exit {:?}", fields[5])))?,
                    stdout_sha: fields[6].to_string(),
                    speedup: if fields[7].is_empty() { None } else { Some(num(fields[7])?) },
                });
            } else {
                report.runs.push(RunRecord {
                    emulator: fields[0].to_string(),
                    run: fields[1]
                        .parse()
                        .map_err(|_| HarnessError::Parse(format!("bad run index {:?}", fields[1])))?,
                    real_ms: num(fields[2])?,
                    user_ms: num(fields[3])?,
                    sys_ms: num(fields[4])?,
                    exit: fields[5]
                        .parse()
                        .map_err(|_| HarnessError::Parse(format!("bad exit {:?}", fields[5])))?,
                    stdout_sha: fields[6].to_string(),
                });
            }
        }
        Ok(report)
    }

    pub fn render(&self, format: ReportFormat) -> Result<String, HarnessError> {
        match format {
            ReportFormat::Json => self.to_json(),
            ReportFormat::Csv => self.to_csv(),
        }
    }
}

/// Serializes the report to `path` in the given format.
pub fn write_report(report: &BenchReport, format: ReportFormat, path: &Path) -> Result<(), HarnessError> {
    let text = report.render(format)?;
    std::fs::write(path, text)?;
    Ok(())
}
