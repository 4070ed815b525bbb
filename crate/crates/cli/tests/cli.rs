//! End-to-end tests of the `rvum` binary: exit-code propagation, error
//! diagnostics, the benchgen/oracle/run pipeline, and report output.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rvum_core::benchgen::{oracle_dump, BenchSpec};
use rvum_core::elf::build_static_exe;
use rvum_core::harness::BenchReport;
use rvum_core::isa::{encode, Instr};

fn rvum() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rvum"))
}

fn run_rvum(args: &[&str]) -> Output {
    rvum().args(args).output().expect("spawn rvum")
}

fn assemble(instrs: &[Instr]) -> Vec<u8> {
    let mut code = Vec::new();
    for i in instrs {
        code.extend_from_slice(&encode(*i).unwrap().to_le_bytes());
    }
    build_static_exe(0x10000, &code)
}

fn exit_only_elf(code: i64) -> Vec<u8> {
    assemble(&[
        Instr::Addi { rd: 10, rs1: 0, imm: code },
        Instr::Addi { rd: 17, rs1: 0, imm: 93 },
        Instr::Ecall,
    ])
}

fn write_elf(dir: &Path, name: &str, elf: &[u8]) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, elf).unwrap();
    path
}

#[test]
fn guest_exit_code_becomes_host_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    for code in (0..=255u32).step_by(17).chain([1, 255]) {
        let path = write_elf(dir.path(), &format!("exit{code}.elf"), &exit_only_elf(code as i64));
        let out = run_rvum(&["run", "--mem-mib", "16", "--stack-mib", "1", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(code as i32), "guest exit {code}");
    }
}

#[test]
fn missing_binary_is_noinput_error() {
    let out = run_rvum(&["run", "/definitely/not/here.elf"]);
    assert_eq!(out.status.code(), Some(66));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("cannot read"), "stderr: {err}");
}

#[test]
fn non_elf_input_is_dataerr_with_magic_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("garbage");
    std::fs::write(&path, b"\x7fELGnot really an elf").unwrap();
    let out = run_rvum(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(65));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("magic"), "stderr: {err}");
}

#[test]
fn guest_trap_exits_70_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_elf(dir.path(), "break.elf", &assemble(&[Instr::Ebreak]));
    let out = run_rvum(&["run", "--mem-mib", "16", "--stack-mib", "1", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(70));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("breakpoint"), "stderr: {err}");
    assert!(err.contains("x02="), "register dump expected, stderr: {err}");
}

#[test]
fn step_limit_exits_70() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_elf(dir.path(), "loop.elf", &assemble(&[Instr::Jal { rd: 0, imm: 0 }]));
    let out = run_rvum(&[
        "run",
        "--mem-mib",
        "16",
        "--stack-mib",
        "1",
        "--max-steps",
        "100",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(70));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step limit"));
}

#[test]
fn benchgen_output_matches_run_and_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let rb = dir.path().join("rb");
    let gen = run_rvum(&["benchgen", "--count", "5000", "--out", rb.to_str().unwrap()]);
    assert_eq!(gen.status.code(), Some(0));
    let expected = oracle_dump(&BenchSpec::with_count(5000));
    assert_eq!(String::from_utf8_lossy(&gen.stdout), expected);

    let run = run_rvum(&["run", rb.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0));
    assert_eq!(run.stdout, expected.as_bytes());

    let oracle = run_rvum(&["oracle", "--count", "5000"]);
    assert_eq!(String::from_utf8_lossy(&oracle.stdout), expected);
}

#[test]
fn benchgen_count_zero_dumps_initial_values() {
    let dir = tempfile::tempdir().unwrap();
    let rb = dir.path().join("rb0");
    run_rvum(&["benchgen", "--count", "0", "--out", rb.to_str().unwrap()]);
    let run = run_rvum(&["run", rb.to_str().unwrap()]);
    let text = String::from_utf8_lossy(&run.stdout);
    assert!(text.starts_with("t0=00000000008571d1\n"), "stdout: {text}");
}

#[test]
fn custom_init_values_flow_through() {
    let dir = tempfile::tempdir().unwrap();
    let rb = dir.path().join("rbx");
    let gen = run_rvum(&["benchgen", "--count", "9", "--init", "1,2,3,4", "--out", rb.to_str().unwrap()]);
    let run = run_rvum(&["run", rb.to_str().unwrap()]);
    assert_eq!(gen.stdout, run.stdout);
    let spec = BenchSpec { count: 9, init: [1, 2, 3, 4], ..Default::default() };
    assert_eq!(String::from_utf8_lossy(&run.stdout), oracle_dump(&spec));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run_rvum(&["run"]).status.code(), Some(2));
    assert_eq!(run_rvum(&["no-such-subcommand"]).status.code(), Some(2));
    assert_eq!(run_rvum(&["bench"]).status.code(), Some(2)); // --bin required
}

#[test]
fn help_lists_documented_flags() {
    let help = run_rvum(&["run", "--help"]);
    let text = String::from_utf8_lossy(&help.stdout);
    for flag in ["--mem-mib", "--stack-mib", "--max-steps", "--trace", "--unchecked-memory", "--allow-all-fds"] {
        assert!(text.contains(flag), "run --help missing {flag}");
    }
    let help = run_rvum(&["bench", "--help"]);
    let text = String::from_utf8_lossy(&help.stdout);
    for flag in ["--bin", "--qemu", "--runs", "--format", "--out"] {
        assert!(text.contains(flag), "bench --help missing {flag}");
    }
    let help = run_rvum(&["benchgen", "--help"]);
    let text = String::from_utf8_lossy(&help.stdout);
    for flag in ["--count", "--out", "--init"] {
        assert!(text.contains(flag), "benchgen --help missing {flag}");
    }
    let help = run_rvum(&["oracle", "--help"]);
    let text = String::from_utf8_lossy(&help.stdout);
    for flag in ["--count", "--init"] {
        assert!(text.contains(flag), "oracle --help missing {flag}");
    }
}

#[test]
fn trace_goes_to_stderr_not_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let rb = dir.path().join("rb");
    run_rvum(&["benchgen", "--count", "3", "--out", rb.to_str().unwrap()]);
    let plain = run_rvum(&["run", rb.to_str().unwrap()]);
    let traced = run_rvum(&["run", "--trace", rb.to_str().unwrap()]);
    assert_eq!(plain.stdout, traced.stdout, "trace must not disturb stdout");
    let err = String::from_utf8_lossy(&traced.stderr);
    assert!(err.contains("ecall"), "trace should show disassembly, stderr: {err}");
}

#[test]
fn unchecked_memory_mode_runs_valid_guests() {
    let dir = tempfile::tempdir().unwrap();
    let rb = dir.path().join("rb");
    run_rvum(&["benchgen", "--count", "100", "--out", rb.to_str().unwrap()]);
    let checked = run_rvum(&["run", rb.to_str().unwrap()]);
    let unchecked = run_rvum(&["run", "--unchecked-memory", rb.to_str().unwrap()]);
    assert_eq!(checked.stdout, unchecked.stdout);
    assert_eq!(unchecked.status.code(), Some(0));
}

#[test]
fn bench_single_emulator_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let rb = dir.path().join("rb");
    run_rvum(&["benchgen", "--count", "100000", "--out", rb.to_str().unwrap()]);
    let report_path = dir.path().join("report.json");
    let out = rvum()
        .args(["bench", "--bin", rb.to_str().unwrap(), "--runs", "2", "--out", report_path.to_str().unwrap()])
        .env_remove("RVUM_QEMU")
        .env("PATH", "") // ensure qemu is not discovered
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&report_path).unwrap();
    let report = BenchReport::from_json(&text).unwrap();
    assert_eq!(report.runs.len(), 2);
    assert_eq!(report.summary.len(), 1);
    assert_eq!(report.summary[0].emulator, "rvum");
    assert_eq!(report.summary[0].speedup, None);
    // Both runs byte-identical: same digest.
    assert_eq!(report.runs[0].stdout_sha, report.runs[1].stdout_sha);
}

#[test]
fn bench_with_reference_emulator_computes_speedup() {
    let dir = tempfile::tempdir().unwrap();
    let rb = dir.path().join("rb");
    run_rvum(&["benchgen", "--count", "2000000", "--out", rb.to_str().unwrap()]);
    // A stand-in reference emulator: this same binary behind a qemu-style
    // single-argument interface.
    let shim = dir.path().join("fake-qemu");
    std::fs::write(&shim, format!("#!/bin/sh\nexec \"{}\" run \"$@\"\n", env!("CARGO_BIN_EXE_rvum")))
        .unwrap();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(&shim, std::fs::Permissions::from_mode(0o755)).unwrap();
    }
    let report_path = dir.path().join("report.csv");
    let out = run_rvum(&[
        "bench",
        "--bin",
        rb.to_str().unwrap(),
        "--qemu",
        shim.to_str().unwrap(),
        "--runs",
        "2",
        "--format",
        "csv",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = BenchReport::from_csv(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report.runs.len(), 4);
    assert_eq!(report.summary.len(), 2);
    let rvum_row = report.summary.iter().find(|s| s.emulator == "rvum").unwrap();
    assert!(rvum_row.speedup.is_some(), "speedup expected against the reference");
    let reference = report.summary.iter().find(|s| s.emulator == "qemu-riscv64").unwrap();
    assert_eq!(reference.speedup, None);
}

#[test]
fn bench_detects_output_divergence() {
    // A "binary" whose content changes between runs would diverge, but
    // emulators must be deterministic; instead pit the real emulator
    // against a reference that prints something else.
    let dir = tempfile::tempdir().unwrap();
    let rb = dir.path().join("rb");
    run_rvum(&["benchgen", "--count", "10", "--out", rb.to_str().unwrap()]);
    let liar = dir.path().join("liar");
    std::fs::write(&liar, "#!/bin/sh\necho not-the-dump\n").unwrap();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(&liar, std::fs::Permissions::from_mode(0o755)).unwrap();
    }
    let out = run_rvum(&["bench", "--bin", rb.to_str().unwrap(), "--qemu", liar.to_str().unwrap(), "--runs", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mismatch"));
}

#[test]
fn guest_argv_is_forwarded() {
    // exit(argc): ld a0, 0(sp); exit
    let dir = tempfile::tempdir().unwrap();
    let path = write_elf(
        dir.path(),
        "argc.elf",
        &assemble(&[
            Instr::Ld { rd: 10, rs1: 2, imm: 0 },
            Instr::Addi { rd: 17, rs1: 0, imm: 93 },
            Instr::Ecall,
        ]),
    );
    let out = run_rvum(&["run", path.to_str().unwrap(), "one", "two", "three"]);
    assert_eq!(out.status.code(), Some(4), "argc = binary + 3 guest args");
}
