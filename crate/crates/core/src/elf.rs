//! ELF64 constants shared by the loader and the benchmark generator, and a
//! minimal writer for self-contained static RISC-V executables.

pub const MAGIC: [u8; 4] = [0x7f, b'E', b'L', b'F'];
pub const ELFCLASS64: u8 = 2;
pub const ELFDATA2LSB: u8 = 1;
pub const EV_CURRENT: u8 = 1;

pub const ET_EXEC: u16 = 2;
pub const ET_DYN: u16 = 3;
pub const EM_RISCV: u16 = 243;

pub const PT_LOAD: u32 = 1;
pub const PT_INTERP: u32 = 3;

pub const PF_X: u32 = 1;
pub const PF_W: u32 = 2;
pub const PF_R: u32 = 4;

pub const EHDR_SIZE: usize = 64;
pub const PHDR_SIZE: usize = 56;

fn p16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn p32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn p64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Builds a static ET_EXEC RISC-V ELF64 holding `code` in one PT_LOAD
/// segment. The whole file (headers included) is mapped at `load_vaddr`;
/// the entry point is the first code byte, right after the headers.
pub fn build_static_exe(load_vaddr: u64, code: &[u8]) -> Vec<u8> {
    let header_len = (EHDR_SIZE + PHDR_SIZE) as u64;
    let total = header_len + code.len() as u64;
    let entry = load_vaddr + header_len;
    let mut out = Vec::with_capacity(total as usize);

    out.extend_from_slice(&MAGIC);
    out.push(ELFCLASS64);
    out.push(ELFDATA2LSB);
    out.push(EV_CURRENT);
    out.push(0); // ELFOSABI_NONE
    out.extend_from_slice(&[0u8; 8]);
    p16(&mut out, ET_EXEC);
    p16(&mut out, EM_RISCV);
    p32(&mut out, 1); // e_version
    p64(&mut out, entry);
    p64(&mut out, EHDR_SIZE as u64); // e_phoff
    p64(&mut out, 0); // e_shoff
    p32(&mut out, 0); // e_flags: no RVC, soft-float ABI
    p16(&mut out, EHDR_SIZE as u16);
    p16(&mut out, PHDR_SIZE as u16);
    p16(&mut out, 1); // e_phnum
    p16(&mut out, 0); // e_shentsize
    p16(&mut out, 0); // e_shnum
    p16(&mut out, 0); // e_shstrndx
    debug_assert_eq!(out.len(), EHDR_SIZE);

    p32(&mut out, PT_LOAD);
    p32(&mut out, PF_R | PF_X);
    p64(&mut out, 0); // p_offset
    p64(&mut out, load_vaddr);
    p64(&mut out, load_vaddr); // p_paddr
    p64(&mut out, total); // p_filesz
    p64(&mut out, total); // p_memsz
    p64(&mut out, 0x1000); // p_align
    debug_assert_eq!(out.len(), EHDR_SIZE + PHDR_SIZE);

    out.extend_from_slice(code);
    out
}
