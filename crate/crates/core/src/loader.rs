//! Static ELF64 loading into a flat guest memory image, plus Linux-style
//! initial stack construction (argv/envp/auxv).

use thiserror::Error;

use crate::elf;
use crate::machine::MemoryImage;

pub const PAGE_SIZE: u64 = 4096;
pub const DEFAULT_MEM_SIZE: u64 = 256 * 1024 * 1024;
pub const DEFAULT_STACK_SIZE: u64 = 8 * 1024 * 1024;

const AT_NULL: u64 = 0;
const AT_PAGESZ: u64 = 6;

#[derive(Debug, Clone)]
pub struct LoaderConfig {
    /// Total guest memory size in bytes (rounded up to a page multiple).
    pub mem_size: u64,
    /// Stack region carved out of the top of guest memory.
    pub stack_size: u64,
    /// Emit an AT_PAGESZ auxv entry in addition to the AT_NULL terminator.
    pub auxv_pagesz: bool,
}

impl Default for LoaderConfig {
    fn default() -> Self {
        LoaderConfig {
            mem_size: DEFAULT_MEM_SIZE,
            stack_size: DEFAULT_STACK_SIZE,
            auxv_pagesz: false,
        }
    }
}

/// A program loaded into guest memory and ready to execute.
#[derive(Debug)]
pub struct LoadedImage {
    pub mem: MemoryImage,
    pub entry: u64,
    pub initial_sp: u64,
    pub argv: Vec<Vec<u8>>,
    pub envp: Vec<Vec<u8>>,
    stack_base: u64,
    auxv_pagesz: bool,
}

impl LoadedImage {
    /// Lowest address of the stack region.
    pub fn stack_base(&self) -> u64 {
        self.stack_base
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LoadError {
    #[error("not an ELF file (bad magic)")]
    BadMagic,
    #[error("unsupported ELF class or byte order (need 64-bit little-endian)")]
    UnsupportedClass,
    #[error("unsupported architecture: ELF machine {machine}, need RISC-V ({})", elf::EM_RISCV)]
    UnsupportedArchitecture { machine: u16 },
    #[error("unsupported ELF type {e_type:#x}: {reason}")]
    UnsupportedType { e_type: u16, reason: &'static str },
    #[error("segment at vaddr {vaddr:#x} ({size} bytes) does not fit in guest memory")]
    SegmentOutOfRange { vaddr: u64, size: u64 },
    #[error("malformed ELF: {0}")]
    Malformed(&'static str),
    #[error("argv/envp strings exceed the stack region")]
    StackOverflow,
}

fn align_down(v: u64, a: u64) -> u64 {
    v & !(a - 1)
}

fn align_up(v: u64, a: u64) -> u64 {
    v.checked_add(a - 1).map(|x| x & !(a - 1)).unwrap_or(!(a - 1))
}

fn read_u16(bytes: &[u8], off: usize) -> Result<u16, LoadError> {
    bytes
        .get(off..off + 2)
        .map(|b| u16::from_le_bytes(b.try_into().unwrap()))
        .ok_or(LoadError::Malformed("truncated header"))
}

fn read_u32(bytes: &[u8], off: usize) -> Result<u32, LoadError> {
    bytes
        .get(off..off + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .ok_or(LoadError::Malformed("truncated header"))
}

fn read_u64(bytes: &[u8], off: usize) -> Result<u64, LoadError> {
    bytes
        .get(off..off + 8)
        .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
        .ok_or(LoadError::Malformed("truncated header"))
}

struct Segment {
    vaddr: u64,
    memsz: u64,
    offset: u64,
    filesz: u64,
}

/// Parses a static RISC-V ELF64 executable and copies every PT_LOAD
/// segment into a fresh guest memory image.
///
/// The image base is the lowest segment address rounded down to a page;
/// the program break starts at the page-aligned end of the highest
/// segment; the stack region is reserved at the top of guest memory.
pub fn load_elf(bytes: &[u8], config: &LoaderConfig) -> Result<LoadedImage, LoadError> {
    if bytes.len() < 4 || bytes[0..4] != elf::MAGIC {
        return Err(LoadError::BadMagic);
    }
    if bytes.len() < elf::EHDR_SIZE {
        return Err(LoadError::Malformed("truncated ELF header"));
    }
    if bytes[4] != elf::ELFCLASS64 || bytes[5] != elf::ELFDATA2LSB {
        return Err(LoadError::UnsupportedClass);
    }
    let e_type = read_u16(bytes, 16)?;
    let e_machine = read_u16(bytes, 18)?;
    if e_machine != elf::EM_RISCV {
        return Err(LoadError::UnsupportedArchitecture { machine: e_machine });
    }
    if e_type != elf::ET_EXEC {
        let reason = if e_type == elf::ET_DYN {
            "position-independent or dynamically linked; relink with -static -no-pie"
        } else {
            "not an executable"
        };
        return Err(LoadError::UnsupportedType { e_type, reason });
    }
    let entry = read_u64(bytes, 24)?;
    let phoff = read_u64(bytes, 32)?;
    let phentsize = read_u16(bytes, 54)? as u64;
    let phnum = read_u16(bytes, 56)? as u64;
    if phentsize != elf::PHDR_SIZE as u64 {
        return Err(LoadError::Malformed("unexpected program header entry size"));
    }

    let mut segments = Vec::new();
    for i in 0..phnum {
        let off = phoff
            .checked_add(i * phentsize)
            .and_then(|o| usize::try_from(o).ok())
            .ok_or(LoadError::Malformed("program header offset overflow"))?;
        let p_type = read_u32(bytes, off)?;
        if p_type == elf::PT_INTERP {
            return Err(LoadError::UnsupportedType {
                e_type,
                reason: "dynamically linked (PT_INTERP present)",
            });
        }
        if p_type != elf::PT_LOAD {
            continue;
        }
        let p_offset = read_u64(bytes, off + 8)?;
        let p_vaddr = read_u64(bytes, off + 16)?;
        let p_filesz = read_u64(bytes, off + 32)?;
        let p_memsz = read_u64(bytes, off + 40)?;
        if p_filesz > p_memsz {
            return Err(LoadError::Malformed("segment file size exceeds memory size"));
        }
        let file_end = p_offset
            .checked_add(p_filesz)
            .ok_or(LoadError::Malformed("segment file range overflow"))?;
        if file_end > bytes.len() as u64 {
            return Err(LoadError::Malformed("segment extends past end of file"));
        }
        if p_vaddr.checked_add(p_memsz).is_none() {
            return Err(LoadError::SegmentOutOfRange { vaddr: p_vaddr, size: p_memsz });
        }
        if p_memsz > 0 {
            segments.push(Segment { vaddr: p_vaddr, memsz: p_memsz, offset: p_offset, filesz: p_filesz });
        }
    }
    if segments.is_empty() {
        return Err(LoadError::Malformed("no loadable segments"));
    }

    let mem_size = align_up(config.mem_size, PAGE_SIZE);
    let stack_size = align_up(config.stack_size, PAGE_SIZE);
    if stack_size >= mem_size {
        return Err(LoadError::Malformed("stack size must be smaller than memory size"));
    }

    let lowest = segments.iter().map(|s| s.vaddr).min().unwrap();
    let base = align_down(lowest, PAGE_SIZE);
    if base.checked_add(mem_size).is_none() {
        return Err(LoadError::SegmentOutOfRange { vaddr: lowest, size: mem_size });
    }
    let highest = segments.iter().map(|s| s.vaddr + s.memsz).max().unwrap();
    // Segments must stay clear of the stack region at the top of memory.
    let load_limit = base + (mem_size - stack_size);
    if highest > load_limit {
        let s = segments.iter().find(|s| s.vaddr + s.memsz > load_limit).unwrap();
        return Err(LoadError::SegmentOutOfRange { vaddr: s.vaddr, size: s.memsz });
    }

    let mut mem = MemoryImage::new(base, mem_size);
    for seg in &segments {
        let data = &bytes[seg.offset as usize..(seg.offset + seg.filesz) as usize];
        mem.write(seg.vaddr, data).map_err(|_| LoadError::SegmentOutOfRange {
            vaddr: seg.vaddr,
            size: seg.memsz,
        })?;
        // BSS (memsz beyond filesz) stays zero: fresh memory is zeroed.
    }
    mem.init_brk(align_up(highest, PAGE_SIZE));

    if entry < segments.iter().map(|s| s.vaddr).min().unwrap() || entry >= highest {
        return Err(LoadError::Malformed("entry point outside loaded segments"));
    }

    let top = mem.end();
    Ok(LoadedImage {
        mem,
        entry,
        initial_sp: top,
        argv: Vec::new(),
        envp: Vec::new(),
        stack_base: top - stack_size,
        auxv_pagesz: config.auxv_pagesz,
    })
}

/// Lays out the Linux process-start stack and returns the initial stack
/// pointer (also recorded in the image).
///
/// From high to low addresses: argument/environment strings, auxv
/// (AT_NULL-terminated), envp pointer array + null, argv pointer array +
/// null, argc. The returned sp is 16-byte aligned and points at argc.
pub fn build_stack(image: &mut LoadedImage, argv: &[Vec<u8>], envp: &[Vec<u8>]) -> Result<u64, LoadError> {
    let top = image.mem.end();
    let stack_base = image.stack_base;

    let mut cursor = top;
    let mut place_string = |mem: &mut MemoryImage, s: &[u8]| -> Result<u64, LoadError> {
        let need = s.len() as u64 + 1;
        if cursor < stack_base + need {
            return Err(LoadError::StackOverflow);
        }
        cursor -= need;
        mem.write(cursor, s).map_err(|_| LoadError::StackOverflow)?;
        mem.store_u8(cursor + s.len() as u64, 0).map_err(|_| LoadError::StackOverflow)?;
        Ok(cursor)
    };

    let argv_ptrs: Vec<u64> =
        argv.iter().map(|s| place_string(&mut image.mem, s)).collect::<Result<_, _>>()?;
    let envp_ptrs: Vec<u64> =
        envp.iter().map(|s| place_string(&mut image.mem, s)).collect::<Result<_, _>>()?;

    let mut auxv: Vec<(u64, u64)> = Vec::new();
    if image.auxv_pagesz {
        auxv.push((AT_PAGESZ, PAGE_SIZE));
    }
    auxv.push((AT_NULL, 0));

    // argc + argv[] + null + envp[] + null + auxv pairs
    let words = 1 + argv_ptrs.len() as u64 + 1 + envp_ptrs.len() as u64 + 1 + 2 * auxv.len() as u64;
    let sp = align_down(cursor.saturating_sub(words * 8), 16);
    if sp < stack_base {
        return Err(LoadError::StackOverflow);
    }

    let mut at = sp;
    let mut push = |mem: &mut MemoryImage, v: u64| {
        mem.store_u64(at, v).expect("stack block is in bounds");
        at += 8;
    };
    push(&mut image.mem, argv.len() as u64);
    for p in &argv_ptrs {
        push(&mut image.mem, *p);
    }
    push(&mut image.mem, 0);
    for p in &envp_ptrs {
        push(&mut image.mem, *p);
    }
    push(&mut image.mem, 0);
    for (key, value) in &auxv {
        push(&mut image.mem, *key);
        push(&mut image.mem, *value);
    }

    image.argv = argv.to_vec();
    image.envp = envp.to_vec();
    image.initial_sp = sp;
    Ok(sp)
}
