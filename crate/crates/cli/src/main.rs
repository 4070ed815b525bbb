//! `rvum`: run RV64I static Linux binaries, generate the rotating
//! add/sub/sll benchmark, print its oracle expectation, and time
//! emulators against each other on identical binaries.

use std::path::PathBuf;
use std::process::exit;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rvum_core::benchgen::{generate, oracle_dump, BenchSpec};
use rvum_core::harness::{run_differential, EmulatorSpec, HarnessError, ReportFormat};
use rvum_core::loader::{build_stack, load_elf, LoaderConfig};
use rvum_core::machine::{Machine, RunLimits};
use rvum_core::syscall::LinuxSyscalls;

/// Environment variable naming the qemu binary used as `--qemu` fallback.
const QEMU_ENV: &str = "RVUM_QEMU";

// sysexits-style codes: guest traps and harness failures are
// distinguishable from guest exit codes and usage errors (2, from clap).
const EXIT_DATAERR: i32 = 65;
const EXIT_NOINPUT: i32 = 66;
const EXIT_SOFTWARE: i32 = 70;

#[derive(Parser)]
#[command(name = "rvum", version, about = "RV64I user-mode emulator, benchmark generator, and timing harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and run a static RISC-V ELF64 executable
    Run(RunArgs),
    /// Generate the rotating add/sub/sll benchmark ELF and print its expected output
    Benchgen(BenchgenArgs),
    /// Print the expected register dump for given benchmark parameters
    Oracle(OracleArgs),
    /// Time emulators on one guest binary and require byte-equal outputs
    Bench(BenchArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Guest ELF executable
    binary: PathBuf,
    /// Arguments forwarded to the guest as argv[1..]
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    guest_args: Vec<String>,
    /// Guest memory size in MiB
    #[arg(long, default_value_t = 256)]
    mem_mib: u64,
    /// Guest stack size in MiB (top of guest memory)
    #[arg(long, default_value_t = 8)]
    stack_mib: u64,
    /// Abort after this many executed instructions
    #[arg(long)]
    max_steps: Option<u64>,
    /// Write a per-instruction trace (disassembly + register deltas) to stderr
    #[arg(long)]
    trace: bool,
    /// Skip guest memory bounds checks (pass-through mode). Faster, but an
    /// out-of-range guest access is undefined behavior instead of a trap.
    #[arg(long)]
    unchecked_memory: bool,
    /// Let the guest read/write any host file descriptor, not just stdio
    #[arg(long)]
    allow_all_fds: bool,
}

#[derive(Args)]
struct BenchgenArgs {
    /// Number of body instructions
    #[arg(long, default_value_t = 2_000_000)]
    count: u64,
    /// Where to write the generated ELF
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated initial values for t0,t1,t2,t3
    #[arg(long, value_delimiter = ',',
          default_values_t = [8_745_425u64, 2_413_112, 51_124_341, 991_232_131])]
    init: Vec<u64>,
}

#[derive(Args)]
struct OracleArgs {
    /// Number of body instructions
    #[arg(long, default_value_t = 2_000_000)]
    count: u64,
    /// Comma-separated initial values for t0,t1,t2,t3
    #[arg(long, value_delimiter = ',',
          default_values_t = [8_745_425u64, 2_413_112, 51_124_341, 991_232_131])]
    init: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args)]
struct BenchArgs {
    /// Guest binary to measure
    #[arg(long)]
    bin: PathBuf,
    /// qemu user-mode emulator to compare against (fallback: $RVUM_QEMU,
    /// then `qemu-riscv64` on PATH; skipped with a warning if absent)
    #[arg(long)]
    qemu: Option<PathBuf>,
    /// Timed runs per emulator
    #[arg(long, default_value_t = 5)]
    runs: usize,
    /// Report format
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Write the report to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Benchgen(args) => cmd_benchgen(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Bench(args) => cmd_bench(args),
    };
    exit(code);
}

fn cmd_run(args: RunArgs) -> i32 {
    let bytes = match std::fs::read(&args.binary) {
        Ok(b) => b,
        Err(err) => {
            eprintln!("rvum: cannot read {}: {err}", args.binary.display());
            return EXIT_NOINPUT;
        }
    };
    let (Some(mem_size), Some(stack_size)) = (
        args.mem_mib.checked_mul(1024 * 1024),
        args.stack_mib.checked_mul(1024 * 1024),
    ) else {
        eprintln!("rvum: memory/stack size out of range");
        return 2;
    };
    if stack_size == 0 || stack_size >= mem_size {
        eprintln!("rvum: --stack-mib must be nonzero and smaller than --mem-mib");
        return 2;
    }
    let config = LoaderConfig { mem_size, stack_size, auxv_pagesz: false };
    let mut image = match load_elf(&bytes, &config) {
        Ok(image) => image,
        Err(err) => {
            eprintln!("rvum: {}: {err}", args.binary.display());
            return EXIT_DATAERR;
        }
    };
    let mut argv: Vec<Vec<u8>> = vec![args.binary.display().to_string().into_bytes()];
    argv.extend(args.guest_args.iter().map(|s| s.clone().into_bytes()));
    if let Err(err) = build_stack(&mut image, &argv, &[]) {
        eprintln!("rvum: {err}");
        return EXIT_DATAERR;
    }

    let handler = LinuxSyscalls::host().allow_all_fds(args.allow_all_fds);
    let mut machine = Machine::from_image(image, handler);
    if args.unchecked_memory {
        // Opt-in pass-through mode; the flag's help text carries the
        // safety caveat.
        unsafe { machine.mem.set_unchecked() };
    }
    if args.trace {
        machine.set_trace(Some(Box::new(std::io::stderr())));
    }

    match machine.run(&RunLimits { max_steps: args.max_steps }) {
        Ok(code) => code as i32,
        Err(err) => {
            eprintln!("rvum: {err}");
            EXIT_SOFTWARE
        }
    }
}

fn spec_from(count: u64, init: &[u64]) -> Result<BenchSpec, i32> {
    if init.len() != 4 {
        eprintln!("rvum: --init needs exactly 4 comma-separated values, got {}", init.len());
        return Err(2);
    }
    let mut values = [0u64; 4];
    values.copy_from_slice(init);
    Ok(BenchSpec { count, init: values, ..Default::default() })
}

fn cmd_benchgen(args: BenchgenArgs) -> i32 {
    let spec = match spec_from(args.count, &args.init) {
        Ok(spec) => spec,
        Err(code) => return code,
    };
    let elf = match generate(&spec) {
        Ok(elf) => elf,
        Err(err) => {
            eprintln!("rvum: cannot encode benchmark: {err}");
            return EXIT_SOFTWARE;
        }
    };
    if let Err(err) = std::fs::write(&args.out, &elf) {
        eprintln!("rvum: cannot write {}: {err}", args.out.display());
        return EXIT_SOFTWARE;
    }
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let _ = std::fs::set_permissions(&args.out, std::fs::Permissions::from_mode(0o755));
    }
    // The expected dump, for direct diffing against any emulator's stdout.
    print!("{}", oracle_dump(&spec));
    0
}

fn cmd_oracle(args: OracleArgs) -> i32 {
    match spec_from(args.count, &args.init) {
        Ok(spec) => {
            print!("{}", oracle_dump(&spec));
            0
        }
        Err(code) => code,
    }
}

fn find_in_path(name: &str) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path).map(|dir| dir.join(name)).find(|p| p.is_file())
}

/// qemu discovery order: --qemu flag, $RVUM_QEMU, PATH.
fn resolve_qemu(flag: Option<PathBuf>) -> Option<PathBuf> {
    flag.or_else(|| std::env::var_os(QEMU_ENV).map(PathBuf::from))
        .or_else(|| find_in_path("qemu-riscv64"))
}

fn cmd_bench(args: BenchArgs) -> i32 {
    let this_exe = match std::env::current_exe() {
        Ok(p) => p,
        Err(err) => {
            eprintln!("rvum: cannot locate own executable: {err}");
            return EXIT_SOFTWARE;
        }
    };
    let mut emulators =
        vec![EmulatorSpec::new("rvum", vec![this_exe.display().to_string(), "run".into()])];
    match resolve_qemu(args.qemu) {
        Some(qemu) => {
            emulators.push(EmulatorSpec::reference("qemu-riscv64", vec![qemu.display().to_string()]));
        }
        None => {
            eprintln!("rvum: warning: qemu-riscv64 not found (--qemu / ${QEMU_ENV} / PATH); timing rvum only");
        }
    }

    let report = match run_differential(&args.bin, &emulators, args.runs) {
        Ok(report) => report,
        Err(err @ HarnessError::OutputMismatch(_)) => {
            eprintln!("rvum: {err}");
            return 1;
        }
        Err(err) => {
            eprintln!("rvum: {err}");
            return EXIT_SOFTWARE;
        }
    };

    for s in &report.summary {
        let speedup = s.speedup.map(|v| format!(", speedup {v:.2}x")).unwrap_or_default();
        eprintln!(
            "rvum: {}: median real {:.1} ms, user {:.1} ms, sys {:.1} ms{speedup}",
            s.emulator, s.real_ms, s.user_ms, s.sys_ms
        );
    }

    let format = match args.format {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Csv => ReportFormat::Csv,
    };
    let rendered = match report.render(format) {
        Ok(text) => text,
        Err(err) => {
            eprintln!("rvum: {err}");
            return EXIT_SOFTWARE;
        }
    };
    match &args.out {
        Some(path) => {
            if let Err(err) = std::fs::write(path, rendered) {
                eprintln!("rvum: cannot write {}: {err}", path.display());
                return EXIT_SOFTWARE;
            }
            eprintln!("rvum: report written to {}", path.display());
        }
        None => print!("{rendered}"),
    }
    0
}
