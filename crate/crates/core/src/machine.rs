//! Guest architectural state, the flat guest memory, and the
//! fetch-decode-execute loop.
//!
//! One `Machine` is single-threaded; separate instances are independent and
//! may run on different threads.

use std::fmt;
use std::io::Write;

use thiserror::Error;

use crate::isa::{self, Instr};
use crate::loader::LoadedImage;
use crate::syscall::{SyscallHandler, SyscallOutcome};

pub const NUM_REGS: usize = 32;

/// Stack pointer register index (x2 / sp).
pub const REG_SP: u8 = 2;
/// First syscall argument / return register (x10 / a0).
pub const REG_A0: u8 = 10;
/// Syscall number register (x17 / a7).
pub const REG_A7: u8 = 17;

/// The four temporaries dumped by generated benchmarks: t0..t3.
pub const T_REGS: [u8; 4] = [5, 6, 7, 28];

/// 32 general-purpose 64-bit registers plus the program counter.
///
/// `regs[0]` is hardwired to zero: writes through [`GuestState::set_reg`]
/// to index 0 are discarded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuestState {
    pub regs: [u64; NUM_REGS],
    pub pc: u64,
}

impl GuestState {
    pub fn new(pc: u64, sp: u64) -> Self {
        let mut state = GuestState { regs: [0; NUM_REGS], pc };
        state.set_reg(REG_SP, sp);
        state
    }

    #[inline]
    pub fn reg(&self, idx: u8) -> u64 {
        self.regs[idx as usize]
    }

    #[inline]
    pub fn set_reg(&mut self, idx: u8, value: u64) {
        if idx != 0 {
            self.regs[idx as usize] = value;
        }
    }

    /// Values of t0..t3, the registers the benchmark epilogue dumps.
    pub fn t_registers(&self) -> [u64; 4] {
        T_REGS.map(|r| self.reg(r))
    }
}

/// The canonical register dump: `t0=<16 hex>\n` .. `t3=<16 hex>\n`.
///
/// This is byte-identical to the epilogue output of generated benchmarks,
/// so emulator stdout can be diffed directly against expected values.
pub fn dump_t_regs(values: [u64; 4]) -> String {
    let mut out = String::with_capacity(80);
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("t{i}={v:016x}\n"));
    }
    out
}

/// Access to `[addr, addr+len)` fell outside guest memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("memory fault at guest address {addr:#x}")]
pub struct MemoryFault {
    pub addr: u64,
}

/// A fixed, contiguous guest memory region with simple base-offset address
/// translation. No memory-region tree, no page permissions.
pub struct MemoryImage {
    base: u64,
    bytes: Vec<u8>,
    brk: u64,
    brk_floor: u64,
    checked: bool,
}

impl fmt::Debug for MemoryImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MemoryImage")
            .field("base", &format_args!("{:#x}", self.base))
            .field("size", &self.bytes.len())
            .field("brk", &format_args!("{:#x}", self.brk))
            .field("checked", &self.checked)
            .finish()
    }
}

impl MemoryImage {
    /// Allocates `size` zeroed bytes of guest memory starting at guest
    /// address `base`. Bounds checking is on by default.
    pub fn new(base: u64, size: u64) -> Self {
        MemoryImage {
            base,
            bytes: vec![0u8; size as usize],
            brk: base,
            brk_floor: base,
            checked: true,
        }
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn size(&self) -> u64 {
        self.bytes.len() as u64
    }

    /// One past the highest guest address.
    pub fn end(&self) -> u64 {
        self.base + self.size()
    }

    pub fn brk(&self) -> u64 {
        self.brk
    }

    /// Lowest address `brk` may shrink to (end of the loaded segments).
    pub fn brk_floor(&self) -> u64 {
        self.brk_floor
    }

    pub(crate) fn init_brk(&mut self, brk: u64) {
        self.brk = brk;
        self.brk_floor = brk;
    }

    pub fn set_brk(&mut self, brk: u64) {
        self.brk = brk;
    }

    /// Switches CPU loads/stores between bounds-checked and pass-through
    /// mode.
    ///
    /// # Safety
    ///
    /// Pass-through mode (`checked = false`) performs raw pointer accesses
    /// without bounds checks, mirroring emulators that let the host fault
    /// on bad addresses. Running a guest that accesses memory outside its
    /// image is undefined behavior in that mode. The default (checked)
    /// mode turns such accesses into traps instead.
    pub unsafe fn set_unchecked(&mut self) {
        self.checked = false;
    }

    pub fn is_checked(&self) -> bool {
        self.checked
    }

    /// Translates a guest range to an offset into the backing buffer,
    /// verifying the whole range is in bounds.
    #[inline]
    pub fn translate(&self, addr: u64, len: u64) -> Result<usize, MemoryFault> {
        let end = addr.checked_add(len).ok_or(MemoryFault { addr })?;
        if addr < self.base || end > self.end() {
            return Err(MemoryFault { addr });
        }
        Ok((addr - self.base) as usize)
    }

    /// Borrow `len` guest bytes starting at `addr`. Always bounds-checked.
    pub fn slice(&self, addr: u64, len: u64) -> Result<&[u8], MemoryFault> {
        let off = self.translate(addr, len)?;
        Ok(&self.bytes[off..off + len as usize])
    }

    /// Copy `data` into guest memory at `addr`. Always bounds-checked.
    pub fn write(&mut self, addr: u64, data: &[u8]) -> Result<(), MemoryFault> {
        if data.is_empty() {
            self.translate(addr, 1).map(|_| ())?;
            return Ok(());
        }
        let off = self.translate(addr, data.len() as u64)?;
        self.bytes[off..off + data.len()].copy_from_slice(data);
        Ok(())
    }
}

macro_rules! mem_access {
    ($load:ident, $store:ident, $ty:ty) => {
        impl MemoryImage {
            #[inline]
            pub fn $load(&self, addr: u64) -> Result<$ty, MemoryFault> {
                const N: usize = std::mem::size_of::<$ty>();
                if self.checked {
                    let off = self.translate(addr, N as u64)?;
                    let mut raw = [0u8; N];
                    raw.copy_from_slice(&self.bytes[off..off + N]);
                    Ok(<$ty>::from_le_bytes(raw))
                } else {
                    unsafe {
                        let p = self.bytes.as_ptr().add(addr.wrapping_sub(self.base) as usize);
                        Ok(<$ty>::from_le(std::ptr::read_unaligned(p as *const $ty)))
                    }
                }
            }

            #[inline]
            pub fn $store(&mut self, addr: u64, value: $ty) -> Result<(), MemoryFault> {
                const N: usize = std::mem::size_of::<$ty>();
                if self.checked {
                    let off = self.translate(addr, N as u64)?;
                    self.bytes[off..off + N].copy_from_slice(&value.to_le_bytes());
                } else {
                    unsafe {
                        let p = self.bytes.as_mut_ptr().add(addr.wrapping_sub(self.base) as usize);
                        std::ptr::write_unaligned(p as *mut $ty, value.to_le());
                    }
                }
                Ok(())
            }
        }
    };
}

mem_access!(load_u8, store_u8, u8);
mem_access!(load_u16, store_u16, u16);
mem_access!(load_u32, store_u32, u32);
mem_access!(load_u64, store_u64, u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrapKind {
    IllegalInstruction { word: u32 },
    MemoryFault { addr: u64 },
    MisalignedFetch,
    Breakpoint,
}

/// An execution fault, carrying the pc of the faulting instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trap {
    pub kind: TrapKind,
    pub pc: u64,
}

impl fmt::Display for Trap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TrapKind::IllegalInstruction { word } => {
                write!(f, "illegal instruction {word:#010x} at pc={:#x}", self.pc)
            }
            TrapKind::MemoryFault { addr } => {
                write!(f, "memory fault at address {addr:#x}, pc={:#x}", self.pc)
            }
            TrapKind::MisalignedFetch => write!(f, "misaligned instruction fetch at pc={:#x}", self.pc),
            TrapKind::Breakpoint => write!(f, "breakpoint (ebreak) at pc={:#x}", self.pc),
        }
    }
}

/// Result of executing a single instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Continue,
    Exited(u8),
    Trap(Trap),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunLimits {
    pub max_steps: Option<u64>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{trap}\n{diagnostics}")]
    Trap { trap: Trap, diagnostics: String },
    #[error("step limit exceeded after {steps} instructions")]
    StepLimitExceeded { steps: u64 },
}

pub struct Machine<H> {
    pub state: GuestState,
    pub mem: MemoryImage,
    pub handler: H,
    trace: Option<Box<dyn Write>>,
}

impl<H: SyscallHandler> Machine<H> {
    pub fn new(state: GuestState, mem: MemoryImage, handler: H) -> Self {
        Machine { state, mem, handler, trace: None }
    }

    /// Builds a machine from a loaded image: pc at the ELF entry point and
    /// sp (x2) at the prepared initial stack pointer.
    pub fn from_image(image: LoadedImage, handler: H) -> Self {
        let state = GuestState::new(image.entry, image.initial_sp);
        Machine::new(state, image.mem, handler)
    }

    /// Enables a per-instruction trace (disassembly plus register deltas)
    /// written to `sink`.
    pub fn set_trace(&mut self, sink: Option<Box<dyn Write>>) {
        self.trace = sink;
    }

    /// Fetch, decode, and execute exactly one instruction.
    pub fn step(&mut self) -> StepOutcome {
        let pc = self.state.pc;
        if pc & 0x3 != 0 {
            return StepOutcome::Trap(Trap { kind: TrapKind::MisalignedFetch, pc });
        }
        let word = match self.mem.load_u32(pc) {
            Ok(w) => w,
            Err(fault) => {
                return StepOutcome::Trap(Trap { kind: TrapKind::MemoryFault { addr: fault.addr }, pc })
            }
        };
        let instr = match isa::decode(word) {
            Ok(i) => i,
            Err(_) => {
                return StepOutcome::Trap(Trap { kind: TrapKind::IllegalInstruction { word }, pc })
            }
        };
        self.execute(pc, instr)
    }

    fn execute(&mut self, pc: u64, instr: Instr) -> StepOutcome {
        use Instr::*;

        let state = &mut self.state;
        let next = pc.wrapping_add(4);
        macro_rules! mem_load {
            ($addr:expr, $load:ident, $conv:expr) => {
                match self.mem.$load($addr) {
                    Ok(v) => $conv(v),
                    Err(f) => {
                        return StepOutcome::Trap(Trap { kind: TrapKind::MemoryFault { addr: f.addr }, pc })
                    }
                }
            };
        }
        macro_rules! mem_store {
            ($addr:expr, $store:ident, $value:expr) => {
                if let Err(f) = self.mem.$store($addr, $value) {
                    return StepOutcome::Trap(Trap { kind: TrapKind::MemoryFault { addr: f.addr }, pc });
                }
            };
        }

        match instr {
            Lui { rd, imm } => state.set_reg(rd, imm as u64),
            Auipc { rd, imm } => state.set_reg(rd, pc.wrapping_add(imm as u64)),
            Jal { rd, imm } => {
                state.set_reg(rd, next);
                state.pc = pc.wrapping_add(imm as u64);
                return StepOutcome::Continue;
            }
            Jalr { rd, rs1, imm } => {
                let target = state.reg(rs1).wrapping_add(imm as u64) & !1;
                state.set_reg(rd, next);
                state.pc = target;
                return StepOutcome::Continue;
            }
            Beq { rs1, rs2, imm } => {
                state.pc = if state.reg(rs1) == state.reg(rs2) { pc.wrapping_add(imm as u64) } else { next };
                return StepOutcome::Continue;
            }
            Bne { rs1, rs2, imm } => {
                state.pc = if state.reg(rs1) != state.reg(rs2) { pc.wrapping_add(imm as u64) } else { next };
                return StepOutcome::Continue;
            }
            Blt { rs1, rs2, imm } => {
                state.pc = if (state.reg(rs1) as i64) < state.reg(rs2) as i64 {
                    pc.wrapping_add(imm as u64)
                } else {
                    next
                };
                return StepOutcome::Continue;
            }
            Bge { rs1, rs2, imm } => {
                state.pc = if state.reg(rs1) as i64 >= state.reg(rs2) as i64 {
                    pc.wrapping_add(imm as u64)
                } else {
                    next
                };
                return StepOutcome::Continue;
            }
            Bltu { rs1, rs2, imm } => {
                state.pc = if state.reg(rs1) < state.reg(rs2) { pc.wrapping_add(imm as u64) } else { next };
                return StepOutcome::Continue;
            }
            Bgeu { rs1, rs2, imm } => {
                state.pc = if state.reg(rs1) >= state.reg(rs2) { pc.wrapping_add(imm as u64) } else { next };
                return StepOutcome::Continue;
            }
            Lb { rd, rs1, imm } => {
                let a = state.reg(rs1).wrapping_add(imm as u64);
                let v = mem_load!(a, load_u8, |v: u8| v as i8 as i64 as u64);
                state.set_reg(rd, v);
            }
            Lh { rd, rs1, imm } => {
                let a = state.reg(rs1).wrapping_add(imm as u64);
                let v = mem_load!(a, load_u16, |v: u16| v as i16 as i64 as u64);
                state.set_reg(rd, v);
            }
            Lw { rd, rs1, imm } => {
                let a = state.reg(rs1).wrapping_add(imm as u64);
                let v = mem_load!(a, load_u32, |v: u32| v as i32 as i64 as u64);
                state.set_reg(rd, v);
            }
            Ld { rd, rs1, imm } => {
                let a = state.reg(rs1).wrapping_add(imm as u64);
                let v = mem_load!(a, load_u64, |v: u64| v);
                state.set_reg(rd, v);
            }
            Lbu { rd, rs1, imm } => {
                let a = state.reg(rs1).wrapping_add(imm as u64);
                let v = mem_load!(a, load_u8, |v: u8| v as u64);
                state.set_reg(rd, v);
            }
            Lhu { rd, rs1, imm } => {
                let a = state.reg(rs1).wrapping_add(imm as u64);
                let v = mem_load!(a, load_u16, |v: u16| v as u64);
                state.set_reg(rd, v);
            }
            Lwu { rd, rs1, imm } => {
                let a = state.reg(rs1).wrapping_add(imm as u64);
                let v = mem_load!(a, load_u32, |v: u32| v as u64);
                state.set_reg(rd, v);
            }
            Sb { rs1, rs2, imm } => {
                let a = state.reg(rs1).wrapping_add(imm as u64);
                mem_store!(a, store_u8, state.reg(rs2) as u8);
            }
            Sh { rs1, rs2, imm } => {
                let a = state.reg(rs1).wrapping_add(imm as u64);
                mem_store!(a, store_u16, state.reg(rs2) as u16);
            }
            Sw { rs1, rs2, imm } => {
                let a = state.reg(rs1).wrapping_add(imm as u64);
                mem_store!(a, store_u32, state.reg(rs2) as u32);
            }
            Sd { rs1, rs2, imm } => {
                let a = state.reg(rs1).wrapping_add(imm as u64);
                mem_store!(a, store_u64, state.reg(rs2));
            }
            Addi { rd, rs1, imm } => state.set_reg(rd, state.reg(rs1).wrapping_add(imm as u64)),
            Slti { rd, rs1, imm } => state.set_reg(rd, ((state.reg(rs1) as i64) < imm) as u64),
            Sltiu { rd, rs1, imm } => state.set_reg(rd, (state.reg(rs1) < imm as u64) as u64),
            Xori { rd, rs1, imm } => state.set_reg(rd, state.reg(rs1) ^ imm as u64),
            Ori { rd, rs1, imm } => state.set_reg(rd, state.reg(rs1) | imm as u64),
            Andi { rd, rs1, imm } => state.set_reg(rd, state.reg(rs1) & imm as u64),
            Slli { rd, rs1, shamt } => state.set_reg(rd, state.reg(rs1) << shamt),
            Srli { rd, rs1, shamt } => state.set_reg(rd, state.reg(rs1) >> shamt),
            Srai { rd, rs1, shamt } => state.set_reg(rd, ((state.reg(rs1) as i64) >> shamt) as u64),
            Add { rd, rs1, rs2 } => state.set_reg(rd, state.reg(rs1).wrapping_add(state.reg(rs2))),
            Sub { rd, rs1, rs2 } => state.set_reg(rd, state.reg(rs1).wrapping_sub(state.reg(rs2))),
            Sll { rd, rs1, rs2 } => state.set_reg(rd, state.reg(rs1) << (state.reg(rs2) & 0x3f)),
            Slt { rd, rs1, rs2 } => {
                state.set_reg(rd, ((state.reg(rs1) as i64) < state.reg(rs2) as i64) as u64)
            }
            Sltu { rd, rs1, rs2 } => state.set_reg(rd, (state.reg(rs1) < state.reg(rs2)) as u64),
            Xor { rd, rs1, rs2 } => state.set_reg(rd, state.reg(rs1) ^ state.reg(rs2)),
            Srl { rd, rs1, rs2 } => state.set_reg(rd, state.reg(rs1) >> (state.reg(rs2) & 0x3f)),
            Sra { rd, rs1, rs2 } => {
                state.set_reg(rd, ((state.reg(rs1) as i64) >> (state.reg(rs2) & 0x3f)) as u64)
            }
            Or { rd, rs1, rs2 } => state.set_reg(rd, state.reg(rs1) | state.reg(rs2)),
            And { rd, rs1, rs2 } => state.set_reg(rd, state.reg(rs1) & state.reg(rs2)),
            // Single-threaded user mode: memory ordering is vacuous.
            Fence { .. } => {}
            Ecall => {
                match self.handler.dispatch(&self.state, &mut self.mem) {
                    Ok(SyscallOutcome::Return(value)) => {
                        self.state.set_reg(REG_A0, value as u64);
                    }
                    Ok(SyscallOutcome::Exit(code)) => return StepOutcome::Exited(code),
                    Err(trap) => return StepOutcome::Trap(trap),
                }
                self.state.pc = next;
                return StepOutcome::Continue;
            }
            Ebreak => return StepOutcome::Trap(Trap { kind: TrapKind::Breakpoint, pc }),
            Addiw { rd, rs1, imm } => {
                let v = (state.reg(rs1) as u32).wrapping_add(imm as u32);
                state.set_reg(rd, v as i32 as i64 as u64);
            }
            Slliw { rd, rs1, shamt } => {
                let v = (state.reg(rs1) as u32) << shamt;
                state.set_reg(rd, v as i32 as i64 as u64);
            }
            Srliw { rd, rs1, shamt } => {
                let v = (state.reg(rs1) as u32) >> shamt;
                state.set_reg(rd, v as i32 as i64 as u64);
            }
            Sraiw { rd, rs1, shamt } => {
                let v = (state.reg(rs1) as i32) >> shamt;
                state.set_reg(rd, v as i64 as u64);
            }
            Addw { rd, rs1, rs2 } => {
                let v = (state.reg(rs1) as u32).wrapping_add(state.reg(rs2) as u32);
                state.set_reg(rd, v as i32 as i64 as u64);
            }
            Subw { rd, rs1, rs2 } => {
                let v = (state.reg(rs1) as u32).wrapping_sub(state.reg(rs2) as u32);
                state.set_reg(rd, v as i32 as i64 as u64);
            }
            Sllw { rd, rs1, rs2 } => {
                let v = (state.reg(rs1) as u32) << (state.reg(rs2) & 0x1f);
                state.set_reg(rd, v as i32 as i64 as u64);
            }
            Srlw { rd, rs1, rs2 } => {
                let v = (state.reg(rs1) as u32) >> (state.reg(rs2) & 0x1f);
                state.set_reg(rd, v as i32 as i64 as u64);
            }
            Sraw { rd, rs1, rs2 } => {
                let v = (state.reg(rs1) as i32) >> (state.reg(rs2) & 0x1f);
                state.set_reg(rd, v as i64 as u64);
            }
        }
        self.state.pc = next;
        StepOutcome::Continue
    }

    /// Runs until the guest exits, traps, or hits the step limit.
    /// Returns the guest's exit code.
    pub fn run(&mut self, limits: &RunLimits) -> Result<u8, RunError> {
        let mut steps: u64 = 0;
        loop {
            if let Some(max) = limits.max_steps {
                if steps >= max {
                    return Err(RunError::StepLimitExceeded { steps });
                }
            }
            let outcome = if self.trace.is_some() { self.step_traced() } else { self.step() };
            match outcome {
                StepOutcome::Continue => steps += 1,
                StepOutcome::Exited(code) => return Ok(code),
                StepOutcome::Trap(trap) => {
                    let diagnostics = self.trap_report(&trap);
                    return Err(RunError::Trap { trap, diagnostics });
                }
            }
        }
    }

    fn step_traced(&mut self) -> StepOutcome {
        let pc = self.state.pc;
        let before = self.state.regs;
        let text = self
            .mem
            .load_u32(pc)
            .ok()
            .and_then(|w| isa::decode(w).ok())
            .map(|i| i.to_string())
            .unwrap_or_else(|| "??".into());
        let outcome = self.step();
        if let Some(sink) = self.trace.as_mut() {
            let mut line = format!("{pc:#018x}  {text}");
            for (i, (old, new)) in before.iter().zip(self.state.regs.iter()).enumerate() {
                if old != new {
                    line.push_str(&format!("  x{i}: {old:#x} -> {new:#x}"));
                }
            }
            let _ = writeln!(sink, "{line}");
        }
        outcome
    }

    /// Human-readable trap context: faulting word, disassembly, registers.
    fn trap_report(&self, trap: &Trap) -> String {
        let mut out = String::new();
        match self.mem.load_u32(trap.pc) {
            Ok(word) => {
                let text = isa::decode(word).map(|i| i.to_string()).unwrap_or_else(|_| "??".into());
                out.push_str(&format!("  instr: {word:#010x}  {text}\n"));
            }
            Err(_) => out.push_str("  instr: <unreadable>\n"),
        }
        for (i, chunk) in self.state.regs.chunks(4).enumerate() {
            out.push_str("  ");
            for (j, v) in chunk.iter().enumerate() {
                out.push_str(&format!("x{:02}={v:016x} ", i * 4 + j));
            }
            out.push('\n');
        }
        out.push_str(&format!("  pc={:#018x}\n", self.state.pc));
        out
    }
}
