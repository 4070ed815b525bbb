//! User-mode emulation of 64-bit RISC-V (RV64I) static Linux executables.
//!
//! The crate is organized around a plain fetch-decode-execute interpreter:
//! no translation cache, no IR, no JIT. [`isa`] converts between 32-bit
//! instruction words and decoded form; [`machine`] owns guest registers,
//! flat memory, and the execution loop; [`loader`] maps static ELF64
//! binaries and builds the Linux start stack; [`syscall`] bridges ECALLs
//! to a minimal host surface; [`benchgen`] emits the straight-line
//! rotating add/sub/sll benchmark together with an independent arithmetic
//! oracle; [`harness`] times external emulators on identical binaries and
//! checks byte-exact agreement.

pub mod benchgen;
pub mod elf;
pub mod harness;
pub mod isa;
pub mod loader;
pub mod machine;
pub mod syscall;
pub mod testkit;

pub use benchgen::{BenchSpec, SchemeParams};
pub use harness::{BenchReport, EmulatorSpec, ReportFormat};
pub use isa::{decode, disassemble, encode, IllegalInstruction, Instr};
pub use loader::{build_stack, load_elf, LoadError, LoadedImage, LoaderConfig};
pub use machine::{
    dump_t_regs, GuestState, Machine, MemoryFault, MemoryImage, RunError, RunLimits, StepOutcome,
    Trap, TrapKind,
};
pub use syscall::{LinuxSyscalls, RecordingSyscalls, SyscallHandler, SyscallOutcome};

use std::io::Write;
use std::sync::{Arc, Mutex};

use thiserror::Error;

/// In-memory sink for capturing a guest's output stream.
#[derive(Clone, Default)]
pub struct SharedBuf(Arc<Mutex<Vec<u8>>>);

impl SharedBuf {
    pub fn take(&self) -> Vec<u8> {
        std::mem::take(&mut self.0.lock().unwrap())
    }

    pub fn contents(&self) -> Vec<u8> {
        self.0.lock().unwrap().clone()
    }
}

impl Write for SharedBuf {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Run(#[from] RunError),
}

/// Output of an in-process guest run with captured stdio.
#[derive(Debug)]
pub struct CapturedRun {
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
    pub exit_code: u8,
}

/// Loads a static ELF from bytes and runs it to completion with stdout
/// and stderr captured in memory and stdin at EOF.
pub fn run_captured(
    elf_bytes: &[u8],
    argv: &[Vec<u8>],
    config: &LoaderConfig,
    limits: &RunLimits,
) -> Result<CapturedRun, ExecError> {
    let mut image = load_elf(elf_bytes, config)?;
    build_stack(&mut image, argv, &[])?;
    let stdout = SharedBuf::default();
    let stderr = SharedBuf::default();
    let handler = LinuxSyscalls::with_streams(
        Box::new(std::io::empty()),
        Box::new(stdout.clone()),
        Box::new(stderr.clone()),
    );
    let mut machine = Machine::from_image(image, handler);
    let exit_code = machine.run(limits)?;
    Ok(CapturedRun { stdout: stdout.take(), stderr: stderr.take(), exit_code })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elf::build_static_exe;
    use crate::isa::Instr;

    fn assemble(instrs: &[Instr]) -> Vec<u8> {
        let mut code = Vec::new();
        for i in instrs {
            code.extend_from_slice(&encode(*i).unwrap().to_le_bytes());
        }
        build_static_exe(0x10000, &code)
    }

    #[test]
    fn exit_only_guest_reports_code() {
        // addi a0, x0, 0; addi a7, x0, 93; ecall
        let elf = assemble(&[
            Instr::Addi { rd: 10, rs1: 0, imm: 0 },
            Instr::Addi { rd: 17, rs1: 0, imm: 93 },
            Instr::Ecall,
        ]);
        let run = run_captured(&elf, &[], &LoaderConfig::default(), &RunLimits::default()).unwrap();
        assert_eq!(run.exit_code, 0);
        assert!(run.stdout.is_empty());
    }

    #[test]
    fn guest_reads_argc_from_stack() {
        // ld a0, 0(sp); addi a7, x0, 93; ecall  -> exit(argc)
        let elf = assemble(&[
            Instr::Ld { rd: 10, rs1: 2, imm: 0 },
            Instr::Addi { rd: 17, rs1: 0, imm: 93 },
            Instr::Ecall,
        ]);
        let argv = vec![b"rb".to_vec(), b"arg1".to_vec(), b"arg2".to_vec()];
        let run = run_captured(&elf, &argv, &LoaderConfig::default(), &RunLimits::default()).unwrap();
        assert_eq!(run.exit_code, 3);
    }

    #[test]
    fn determinism_same_image_same_output_and_state() {
        let spec = benchgen::BenchSpec::with_count(64);
        let elf = benchgen::generate(&spec).unwrap();
        let config = LoaderConfig::default();

        let run_once = || {
            let mut image = load_elf(&elf, &config).unwrap();
            build_stack(&mut image, &[b"rb".to_vec()], &[]).unwrap();
            let stdout = SharedBuf::default();
            let handler = LinuxSyscalls::with_streams(
                Box::new(std::io::empty()),
                Box::new(stdout.clone()),
                Box::new(std::io::sink()),
            );
            let mut machine = Machine::from_image(image, handler);
            let exit = machine.run(&RunLimits::default()).unwrap();
            (exit, machine.state.clone(), stdout.take())
        };

        let (exit_a, state_a, out_a) = run_once();
        let (exit_b, state_b, out_b) = run_once();
        assert_eq!(exit_a, exit_b);
        assert_eq!(state_a, state_b, "final architectural state must be identical");
        assert_eq!(out_a, out_b, "stdout bytes must be identical");
    }
}
