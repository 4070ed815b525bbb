//! Linux RISC-V syscall bridge: ECALL with the number in a7 and arguments
//! in a0..a5 is translated to host operations for a minimal call set.
//! Everything else returns -ENOSYS and execution continues.

use std::io::{Read, Write};

use crate::machine::{GuestState, MemoryImage, Trap, TrapKind, REG_A0, REG_A7};

pub const SYS_READ: u64 = 63;
pub const SYS_WRITE: u64 = 64;
pub const SYS_FSTAT: u64 = 80;
pub const SYS_EXIT: u64 = 93;
pub const SYS_EXIT_GROUP: u64 = 94;
pub const SYS_SET_TID_ADDRESS: u64 = 96;
pub const SYS_BRK: u64 = 214;

pub const EBADF: i64 = 9;
pub const EIO: i64 = 5;
pub const ENOSYS: i64 = 38;

/// Result of a syscall: a value for a0 (negative errno on failure), or
/// process exit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyscallOutcome {
    Return(i64),
    Exit(u8),
}

/// Handles an ECALL. Receives the registers read-only; the machine writes
/// the returned value to a0 and advances pc, so a handler can never touch
/// any other guest register.
pub trait SyscallHandler {
    fn dispatch(&mut self, state: &GuestState, mem: &mut MemoryImage) -> Result<SyscallOutcome, Trap>;
}

/// The minimal Linux surface: read, write, exit, exit_group, brk, and
/// stubbed fstat / set_tid_address.
///
/// Host file-descriptor access is limited to stdio (0/1/2) unless
/// [`LinuxSyscalls::allow_all_fds`] is set; stdio streams are pluggable so
/// callers can capture guest output.
pub struct LinuxSyscalls {
    stdin: Box<dyn Read>,
    stdout: Box<dyn Write>,
    stderr: Box<dyn Write>,
    allow_all_fds: bool,
}

impl LinuxSyscalls {
    /// Wires the guest's stdio to the host process's stdio.
    pub fn host() -> Self {
        LinuxSyscalls::with_streams(
            Box::new(std::io::stdin()),
            Box::new(std::io::stdout()),
            Box::new(std::io::stderr()),
        )
    }

    /// Guest stdin reads EOF, stdout/stderr are discarded. For tests.
    pub fn sink() -> Self {
        LinuxSyscalls::with_streams(Box::new(std::io::empty()), Box::new(std::io::sink()), Box::new(std::io::sink()))
    }

    pub fn with_streams(stdin: Box<dyn Read>, stdout: Box<dyn Write>, stderr: Box<dyn Write>) -> Self {
        LinuxSyscalls { stdin, stdout, stderr, allow_all_fds: false }
    }

    /// Opens raw passthrough of every guest fd to the same host fd.
    pub fn allow_all_fds(mut self, allow: bool) -> Self {
        self.allow_all_fds = allow;
        self
    }

    fn args(state: &GuestState) -> [u64; 6] {
        [
            state.reg(REG_A0),
            state.reg(REG_A0 + 1),
            state.reg(REG_A0 + 2),
            state.reg(REG_A0 + 3),
            state.reg(REG_A0 + 4),
            state.reg(REG_A0 + 5),
        ]
    }

    fn sys_write(&mut self, state: &GuestState, mem: &MemoryImage) -> Result<SyscallOutcome, Trap> {
        let [fd, addr, len, ..] = Self::args(state);
        if len == 0 {
            return Ok(SyscallOutcome::Return(0));
        }
        let buf = mem
            .slice(addr, len)
            .map_err(|f| Trap { kind: TrapKind::MemoryFault { addr: f.addr }, pc: state.pc })?;
        let result = match fd {
            1 => self.stdout.write_all(buf).and_then(|_| self.stdout.flush()),
            2 => self.stderr.write_all(buf).and_then(|_| self.stderr.flush()),
            _ if self.allow_all_fds => {
                let n = unsafe { libc::write(fd as i32, buf.as_ptr().cast(), buf.len()) };
                return Ok(SyscallOutcome::Return(if n < 0 { -EIO } else { n as i64 }));
            }
            _ => return Ok(SyscallOutcome::Return(-EBADF)),
        };
        Ok(SyscallOutcome::Return(match result {
            Ok(()) => len as i64,
            Err(_) => -EIO,
        }))
    }

    fn sys_read(&mut self, state: &GuestState, mem: &mut MemoryImage) -> Result<SyscallOutcome, Trap> {
        let [fd, addr, len, ..] = Self::args(state);
        if len == 0 {
            return Ok(SyscallOutcome::Return(0));
        }
        // Validate the whole destination range up front.
        mem.translate(addr, len)
            .map_err(|f| Trap { kind: TrapKind::MemoryFault { addr: f.addr }, pc: state.pc })?;
        let mut tmp = vec![0u8; len as usize];
        let n = match fd {
            0 => match self.stdin.read(&mut tmp) {
                Ok(n) => n as i64,
                Err(_) => -EIO,
            },
            _ if self.allow_all_fds => {
                let n = unsafe { libc::read(fd as i32, tmp.as_mut_ptr().cast(), tmp.len()) };
                if n < 0 {
                    -EIO
                } else {
                    n as i64
                }
            }
            _ => -EBADF,
        };
        if n > 0 {
            mem.write(addr, &tmp[..n as usize])
                .map_err(|f| Trap { kind: TrapKind::MemoryFault { addr: f.addr }, pc: state.pc })?;
        }
        Ok(SyscallOutcome::Return(n))
    }

    fn sys_brk(state: &GuestState, mem: &mut MemoryImage) -> SyscallOutcome {
        let requested = state.reg(REG_A0);
        // Linux never reports an error here: out-of-range requests simply
        // return the unchanged break.
        if requested >= mem.brk_floor() && requested <= mem.end() {
            mem.set_brk(requested);
        }
        SyscallOutcome::Return(mem.brk() as i64)
    }

    fn sys_fstat(&self, state: &GuestState, mem: &mut MemoryImage) -> Result<SyscallOutcome, Trap> {
        let [fd, statbuf, ..] = Self::args(state);
        if fd > 2 && !self.allow_all_fds {
            return Ok(SyscallOutcome::Return(-EBADF));
        }
        // Minimal stub: zeroed struct stat with st_mode = character device,
        // enough for libc stdio setup on fds 0..2.
        let fault = |f: crate::machine::MemoryFault| Trap {
            kind: TrapKind::MemoryFault { addr: f.addr },
            pc: state.pc,
        };
        mem.write(statbuf, &[0u8; 128]).map_err(fault)?;
        mem.store_u32(statbuf + 16, 0o020620).map_err(fault)?; // st_mode
        mem.store_u32(statbuf + 20, 1).map_err(fault)?; // st_nlink
        Ok(SyscallOutcome::Return(0))
    }
}

impl SyscallHandler for LinuxSyscalls {
    fn dispatch(&mut self, state: &GuestState, mem: &mut MemoryImage) -> Result<SyscallOutcome, Trap> {
        let number = state.reg(REG_A7);
        match number {
            SYS_WRITE => self.sys_write(state, mem),
            SYS_READ => self.sys_read(state, mem),
            SYS_EXIT | SYS_EXIT_GROUP => Ok(SyscallOutcome::Exit(state.reg(REG_A0) as u8)),
            SYS_BRK => Ok(Self::sys_brk(state, mem)),
            SYS_FSTAT => self.sys_fstat(state, mem),
            SYS_SET_TID_ADDRESS => Ok(SyscallOutcome::Return(1)),
            _ => Ok(SyscallOutcome::Return(-ENOSYS)),
        }
    }
}

/// A record of one syscall as seen at the ECALL boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyscallRecord {
    pub number: u64,
    pub args: [u64; 6],
}

/// Wraps another handler and records every (number, args) pair, for
/// asserting exact call sequences in tests and the acceptance suite.
pub struct RecordingSyscalls<H> {
    pub inner: H,
    pub records: Vec<SyscallRecord>,
}

impl<H> RecordingSyscalls<H> {
    pub fn new(inner: H) -> Self {
        RecordingSyscalls { inner, records: Vec::new() }
    }
}

impl<H: SyscallHandler> SyscallHandler for RecordingSyscalls<H> {
    fn dispatch(&mut self, state: &GuestState, mem: &mut MemoryImage) -> Result<SyscallOutcome, Trap> {
        self.records.push(SyscallRecord {
            number: state.reg(REG_A7),
            args: LinuxSyscalls::args(state),
        });
        self.inner.dispatch(state, mem)
    }
}
