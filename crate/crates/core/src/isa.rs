//! RV64I instruction representation with bidirectional conversion between
//! 32-bit instruction words and decoded form, plus a plain-text disassembler.
//!
//! Only the 64-bit base integer set is understood. Compressed encodings,
//! the M/A/F/D extensions, and CSR instructions all decode to
//! [`IllegalInstruction`].

use std::fmt;

use thiserror::Error;

// Major opcodes (low 7 bits of the instruction word).
const OP_LUI: u32 = 0b011_0111;
const OP_AUIPC: u32 = 0b001_0111;
const OP_JAL: u32 = 0b110_1111;
const OP_JALR: u32 = 0b110_0111;
const OP_BRANCH: u32 = 0b110_0011;
const OP_LOAD: u32 = 0b000_0011;
const OP_STORE: u32 = 0b010_0011;
const OP_IMM: u32 = 0b001_0011;
const OP_REG: u32 = 0b011_0011;
const OP_MISC_MEM: u32 = 0b000_1111;
const OP_SYSTEM: u32 = 0b111_0011;
const OP_IMM_32: u32 = 0b001_1011;
const OP_REG_32: u32 = 0b011_1011;

/// A decoded RV64I instruction. Register fields are indices in `0..=31`,
/// immediates carry the full sign-extended value of their encoding format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instr {
    // U-type
    Lui { rd: u8, imm: i64 },
    Auipc { rd: u8, imm: i64 },
    // J-type
    Jal { rd: u8, imm: i64 },
    // I-type jump
    Jalr { rd: u8, rs1: u8, imm: i64 },
    // B-type
    Beq { rs1: u8, rs2: u8, imm: i64 },
    Bne { rs1: u8, rs2: u8, imm: i64 },
    Blt { rs1: u8, rs2: u8, imm: i64 },
    Bge { rs1: u8, rs2: u8, imm: i64 },
    Bltu { rs1: u8, rs2: u8, imm: i64 },
    Bgeu { rs1: u8, rs2: u8, imm: i64 },
    // Loads
    Lb { rd: u8, rs1: u8, imm: i64 },
    Lh { rd: u8, rs1: u8, imm: i64 },
    Lw { rd: u8, rs1: u8, imm: i64 },
    Ld { rd: u8, rs1: u8, imm: i64 },
    Lbu { rd: u8, rs1: u8, imm: i64 },
    Lhu { rd: u8, rs1: u8, imm: i64 },
    Lwu { rd: u8, rs1: u8, imm: i64 },
    // Stores
    Sb { rs1: u8, rs2: u8, imm: i64 },
    Sh { rs1: u8, rs2: u8, imm: i64 },
    Sw { rs1: u8, rs2: u8, imm: i64 },
    Sd { rs1: u8, rs2: u8, imm: i64 },
    // Integer register-immediate
    Addi { rd: u8, rs1: u8, imm: i64 },
    Slti { rd: u8, rs1: u8, imm: i64 },
    Sltiu { rd: u8, rs1: u8, imm: i64 },
    Xori { rd: u8, rs1: u8, imm: i64 },
    Ori { rd: u8, rs1: u8, imm: i64 },
    Andi { rd: u8, rs1: u8, imm: i64 },
    Slli { rd: u8, rs1: u8, shamt: u8 },
    Srli { rd: u8, rs1: u8, shamt: u8 },
    Srai { rd: u8, rs1: u8, shamt: u8 },
    // Integer register-register
    Add { rd: u8, rs1: u8, rs2: u8 },
    Sub { rd: u8, rs1: u8, rs2: u8 },
    Sll { rd: u8, rs1: u8, rs2: u8 },
    Slt { rd: u8, rs1: u8, rs2: u8 },
    Sltu { rd: u8, rs1: u8, rs2: u8 },
    Xor { rd: u8, rs1: u8, rs2: u8 },
    Srl { rd: u8, rs1: u8, rs2: u8 },
    Sra { rd: u8, rs1: u8, rs2: u8 },
    Or { rd: u8, rs1: u8, rs2: u8 },
    And { rd: u8, rs1: u8, rs2: u8 },
    // Memory ordering; executed as a no-op but fields are kept so that
    // arbitrary fence words (fm/pred/succ) round-trip through the codec.
    Fence { rd: u8, rs1: u8, imm: i64 },
    // Environment
    Ecall,
    Ebreak,
    // 32-bit register-immediate
    Addiw { rd: u8, rs1: u8, imm: i64 },
    Slliw { rd: u8, rs1: u8, shamt: u8 },
    Srliw { rd: u8, rs1: u8, shamt: u8 },
    Sraiw { rd: u8, rs1: u8, shamt: u8 },
    // 32-bit register-register
    Addw { rd: u8, rs1: u8, rs2: u8 },
    Subw { rd: u8, rs1: u8, rs2: u8 },
    Sllw { rd: u8, rs1: u8, rs2: u8 },
    Srlw { rd: u8, rs1: u8, rs2: u8 },
    Sraw { rd: u8, rs1: u8, rs2: u8 },
}

/// The word is not a valid uncompressed RV64I instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("illegal instruction word {0:#010x}")]
pub struct IllegalInstruction(pub u32);

/// A field of the instruction cannot be represented in its format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("immediate {imm} not representable in {format}-format")]
    ImmediateOutOfRange { imm: i64, format: char },
    #[error("register index {0} out of range (must be < 32)")]
    RegisterOutOfRange(u8),
    #[error("shift amount {shamt} out of range (max {max})")]
    ShamtOutOfRange { shamt: u8, max: u8 },
}

#[inline]
fn field_rd(w: u32) -> u8 {
    ((w >> 7) & 0x1f) as u8
}

#[inline]
fn field_rs1(w: u32) -> u8 {
    ((w >> 15) & 0x1f) as u8
}

#[inline]
fn field_rs2(w: u32) -> u8 {
    ((w >> 20) & 0x1f) as u8
}

#[inline]
fn funct3(w: u32) -> u32 {
    (w >> 12) & 0x7
}

#[inline]
fn funct7(w: u32) -> u32 {
    w >> 25
}

#[inline]
fn imm_i(w: u32) -> i64 {
    ((w as i32) >> 20) as i64
}

#[inline]
fn imm_s(w: u32) -> i64 {
    ((((w as i32) >> 25) << 5) | ((w >> 7) & 0x1f) as i32) as i64
}

#[inline]
fn imm_b(w: u32) -> i64 {
    let v = (((w as i32) >> 31) << 12)
        | ((((w >> 7) & 0x1) as i32) << 11)
        | ((((w >> 25) & 0x3f) as i32) << 5)
        | ((((w >> 8) & 0xf) as i32) << 1);
    v as i64
}

#[inline]
fn imm_u(w: u32) -> i64 {
    ((w & 0xffff_f000) as i32) as i64
}

#[inline]
fn imm_j(w: u32) -> i64 {
    let v = (((w as i32) >> 31) << 20)
        | ((((w >> 12) & 0xff) as i32) << 12)
        | ((((w >> 20) & 0x1) as i32) << 11)
        | ((((w >> 21) & 0x3ff) as i32) << 1);
    v as i64
}

/// Decode one 32-bit little-endian instruction word.
///
/// Dispatch is on the 7-bit major opcode first, then on funct3/funct7.
/// Every word accepted here re-encodes to the identical bit pattern.
pub fn decode(word: u32) -> Result<Instr, IllegalInstruction> {
    // Compressed (16-bit) encodings have low bits != 0b11 and are rejected.
    if word & 0b11 != 0b11 {
        return Err(IllegalInstruction(word));
    }
    let illegal = Err(IllegalInstruction(word));
    let (rd, rs1, rs2) = (field_rd(word), field_rs1(word), field_rs2(word));
    let instr = match word & 0x7f {
        OP_LUI => Instr::Lui { rd, imm: imm_u(word) },
        OP_AUIPC => Instr::Auipc { rd, imm: imm_u(word) },
        OP_JAL => Instr::Jal { rd, imm: imm_j(word) },
        OP_JALR => match funct3(word) {
            0b000 => Instr::Jalr { rd, rs1, imm: imm_i(word) },
            _ => return illegal,
        },
        OP_BRANCH => {
            let imm = imm_b(word);
            match funct3(word) {
                0b000 => Instr::Beq { rs1, rs2, imm },
                0b001 => Instr::Bne { rs1, rs2, imm },
                0b100 => Instr::Blt { rs1, rs2, imm },
                0b101 => Instr::Bge { rs1, rs2, imm },
                0b110 => Instr::Bltu { rs1, rs2, imm },
                0b111 => Instr::Bgeu { rs1, rs2, imm },
                _ => return illegal,
            }
        }
        OP_LOAD => {
            let imm = imm_i(word);
            match funct3(word) {
                0b000 => Instr::Lb { rd, rs1, imm },
                0b001 => Instr::Lh { rd, rs1, imm },
                0b010 => Instr::Lw { rd, rs1, imm },
                0b011 => Instr::Ld { rd, rs1, imm },
                0b100 => Instr::Lbu { rd, rs1, imm },
                0b101 => Instr::Lhu { rd, rs1, imm },
                0b110 => Instr::Lwu { rd, rs1, imm },
                _ => return illegal,
            }
        }
        OP_STORE => {
            let imm = imm_s(word);
            match funct3(word) {
                0b000 => Instr::Sb { rs1, rs2, imm },
                0b001 => Instr::Sh { rs1, rs2, imm },
                0b010 => Instr::Sw { rs1, rs2, imm },
                0b011 => Instr::Sd { rs1, rs2, imm },
                _ => return illegal,
            }
        }
        OP_IMM => {
            let imm = imm_i(word);
            // RV64 shift-immediates take a 6-bit shamt; the remaining
            // high bits of the I-immediate select the shift kind.
            let funct6 = word >> 26;
            let shamt = ((word >> 20) & 0x3f) as u8;
            match funct3(word) {
                0b000 => Instr::Addi { rd, rs1, imm },
                0b010 => Instr::Slti { rd, rs1, imm },
                0b011 => Instr::Sltiu { rd, rs1, imm },
                0b100 => Instr::Xori { rd, rs1, imm },
                0b110 => Instr::Ori { rd, rs1, imm },
                0b111 => Instr::Andi { rd, rs1, imm },
                0b001 if funct6 == 0b000000 => Instr::Slli { rd, rs1, shamt },
                0b101 if funct6 == 0b000000 => Instr::Srli { rd, rs1, shamt },
                0b101 if funct6 == 0b010000 => Instr::Srai { rd, rs1, shamt },
                _ => return illegal,
            }
        }
        OP_REG => match (funct3(word), funct7(word)) {
            (0b000, 0b0000000) => Instr::Add { rd, rs1, rs2 },
            (0b000, 0b0100000) => Instr::Sub { rd, rs1, rs2 },
            (0b001, 0b0000000) => Instr::Sll { rd, rs1, rs2 },
            (0b010, 0b0000000) => Instr::Slt { rd, rs1, rs2 },
            (0b011, 0b0000000) => Instr::Sltu { rd, rs1, rs2 },
            (0b100, 0b0000000) => Instr::Xor { rd, rs1, rs2 },
            (0b101, 0b0000000) => Instr::Srl { rd, rs1, rs2 },
            (0b101, 0b0100000) => Instr::Sra { rd, rs1, rs2 },
            (0b110, 0b0000000) => Instr::Or { rd, rs1, rs2 },
            (0b111, 0b0000000) => Instr::And { rd, rs1, rs2 },
            _ => return illegal,
        },
        OP_MISC_MEM => match funct3(word) {
            0b000 => Instr::Fence { rd, rs1, imm: imm_i(word) },
            _ => return illegal,
        },
        OP_SYSTEM => match word {
            0x0000_0073 => Instr::Ecall,
            0x0010_0073 => Instr::Ebreak,
            _ => return illegal,
        },
        OP_IMM_32 => {
            let shamt = ((word >> 20) & 0x1f) as u8;
            match (funct3(word), funct7(word)) {
                (0b000, _) => Instr::Addiw { rd, rs1, imm: imm_i(word) },
                (0b001, 0b0000000) => Instr::Slliw { rd, rs1, shamt },
                (0b101, 0b0000000) => Instr::Srliw { rd, rs1, shamt },
                (0b101, 0b0100000) => Instr::Sraiw { rd, rs1, shamt },
                _ => return illegal,
            }
        }
        OP_REG_32 => match (funct3(word), funct7(word)) {
            (0b000, 0b0000000) => Instr::Addw { rd, rs1, rs2 },
            (0b000, 0b0100000) => Instr::Subw { rd, rs1, rs2 },
            (0b001, 0b0000000) => Instr::Sllw { rd, rs1, rs2 },
            (0b101, 0b0000000) => Instr::Srlw { rd, rs1, rs2 },
            (0b101, 0b0100000) => Instr::Sraw { rd, rs1, rs2 },
            _ => return illegal,
        },
        _ => return illegal,
    };
    Ok(instr)
}

fn check_reg(r: u8) -> Result<u32, EncodeError> {
    if r < 32 {
        Ok(r as u32)
    } else {
        Err(EncodeError::RegisterOutOfRange(r))
    }
}

fn check_shamt(shamt: u8, max: u8) -> Result<u32, EncodeError> {
    if shamt <= max {
        Ok(shamt as u32)
    } else {
        Err(EncodeError::ShamtOutOfRange { shamt, max })
    }
}

fn enc_r(op: u32, f3: u32, f7: u32, rd: u8, rs1: u8, rs2: u8) -> Result<u32, EncodeError> {
    Ok(op
        | (check_reg(rd)? << 7)
        | (f3 << 12)
        | (check_reg(rs1)? << 15)
        | (check_reg(rs2)? << 20)
        | (f7 << 25))
}

fn enc_i(op: u32, f3: u32, rd: u8, rs1: u8, imm: i64) -> Result<u32, EncodeError> {
    if !(-2048..=2047).contains(&imm) {
        return Err(EncodeError::ImmediateOutOfRange { imm, format: 'I' });
    }
    Ok(op
        | (check_reg(rd)? << 7)
        | (f3 << 12)
        | (check_reg(rs1)? << 15)
        | (((imm as u32) & 0xfff) << 20))
}

fn enc_shift(op: u32, f3: u32, hi: u32, rd: u8, rs1: u8, shamt6: u32) -> Result<u32, EncodeError> {
    Ok(op | (check_reg(rd)? << 7) | (f3 << 12) | (check_reg(rs1)? << 15) | (shamt6 << 20) | (hi << 26))
}

fn enc_s(f3: u32, rs1: u8, rs2: u8, imm: i64) -> Result<u32, EncodeError> {
    if !(-2048..=2047).contains(&imm) {
        return Err(EncodeError::ImmediateOutOfRange { imm, format: 'S' });
    }
    let imm = (imm as u32) & 0xfff;
    Ok(OP_STORE
        | ((imm & 0x1f) << 7)
        | (f3 << 12)
        | (check_reg(rs1)? << 15)
        | (check_reg(rs2)? << 20)
        | ((imm >> 5) << 25))
}

fn enc_b(f3: u32, rs1: u8, rs2: u8, imm: i64) -> Result<u32, EncodeError> {
    if !(-4096..=4094).contains(&imm) || imm & 1 != 0 {
        return Err(EncodeError::ImmediateOutOfRange { imm, format: 'B' });
    }
    let v = imm as u32;
    Ok(OP_BRANCH
        | (((v >> 11) & 0x1) << 7)
        | (((v >> 1) & 0xf) << 8)
        | (f3 << 12)
        | (check_reg(rs1)? << 15)
        | (check_reg(rs2)? << 20)
        | (((v >> 5) & 0x3f) << 25)
        | (((v >> 12) & 0x1) << 31))
}

fn enc_u(op: u32, rd: u8, imm: i64) -> Result<u32, EncodeError> {
    if imm & 0xfff != 0 || i32::try_from(imm).is_err() {
        return Err(EncodeError::ImmediateOutOfRange { imm, format: 'U' });
    }
    Ok(op | (check_reg(rd)? << 7) | (imm as u32 & 0xffff_f000))
}

fn enc_j(rd: u8, imm: i64) -> Result<u32, EncodeError> {
    if !(-(1 << 20)..=(1 << 20) - 2).contains(&imm) || imm & 1 != 0 {
        return Err(EncodeError::ImmediateOutOfRange { imm, format: 'J' });
    }
    let v = imm as u32;
    Ok(OP_JAL
        | (check_reg(rd)? << 7)
        | (((v >> 12) & 0xff) << 12)
        | (((v >> 11) & 0x1) << 20)
        | (((v >> 1) & 0x3ff) << 21)
        | (((v >> 20) & 0x1) << 31))
}

/// Encode an instruction back into its 32-bit word. Inverse of [`decode`].
pub fn encode(instr: Instr) -> Result<u32, EncodeError> {
    use Instr::*;
    match instr {
        Lui { rd, imm } => enc_u(OP_LUI, rd, imm),
        Auipc { rd, imm } => enc_u(OP_AUIPC, rd, imm),
        Jal { rd, imm } => enc_j(rd, imm),
        Jalr { rd, rs1, imm } => enc_i(OP_JALR, 0b000, rd, rs1, imm),
        Beq { rs1, rs2, imm } => enc_b(0b000, rs1, rs2, imm),
        Bne { rs1, rs2, imm } => enc_b(0b001, rs1, rs2, imm),
        Blt { rs1, rs2, imm } => enc_b(0b100, rs1, rs2, imm),
        Bge { rs1, rs2, imm } => enc_b(0b101, rs1, rs2, imm),
        Bltu { rs1, rs2, imm } => enc_b(0b110, rs1, rs2, imm),
        Bgeu { rs1, rs2, imm } => enc_b(0b111, rs1, rs2, imm),
        Lb { rd, rs1, imm } => enc_i(OP_LOAD, 0b000, rd, rs1, imm),
        Lh { rd, rs1, imm } => enc_i(OP_LOAD, 0b001, rd, rs1, imm),
        Lw { rd, rs1, imm } => enc_i(OP_LOAD, 0b010, rd, rs1, imm),
        Ld { rd, rs1, imm } => enc_i(OP_LOAD, 0b011, rd, rs1, imm),
        Lbu { rd, rs1, imm } => enc_i(OP_LOAD, 0b100, rd, rs1, imm),
        Lhu { rd, rs1, imm } => enc_i(OP_LOAD, 0b101, rd, rs1, imm),
        Lwu { rd, rs1, imm } => enc_i(OP_LOAD, 0b110, rd, rs1, imm),
        Sb { rs1, rs2, imm } => enc_s(0b000, rs1, rs2, imm),
        Sh { rs1, rs2, imm } => enc_s(0b001, rs1, rs2, imm),
        Sw { rs1, rs2, imm } => enc_s(0b010, rs1, rs2, imm),
        Sd { rs1, rs2, imm } => enc_s(0b011, rs1, rs2, imm),
        Addi { rd, rs1, imm } => enc_i(OP_IMM, 0b000, rd, rs1, imm),
        Slti { rd, rs1, imm } => enc_i(OP_IMM, 0b010, rd, rs1, imm),
        Sltiu { rd, rs1, imm } => enc_i(OP_IMM, 0b011, rd, rs1, imm),
        Xori { rd, rs1, imm } => enc_i(OP_IMM, 0b100, rd, rs1, imm),
        Ori { rd, rs1, imm } => enc_i(OP_IMM, 0b110, rd, rs1, imm),
        Andi { rd, rs1, imm } => enc_i(OP_IMM, 0b111, rd, rs1, imm),
        Slli { rd, rs1, shamt } => enc_shift(OP_IMM, 0b001, 0b000000, rd, rs1, check_shamt(shamt, 63)?),
        Srli { rd, rs1, shamt } => enc_shift(OP_IMM, 0b101, 0b000000, rd, rs1, check_shamt(shamt, 63)?),
        Srai { rd, rs1, shamt } => enc_shift(OP_IMM, 0b101, 0b010000, rd, rs1, check_shamt(shamt, 63)?),
        Add { rd, rs1, rs2 } => enc_r(OP_REG, 0b000, 0b0000000, rd, rs1, rs2),
        Sub { rd, rs1, rs2 } => enc_r(OP_REG, 0b000, 0b0100000, rd, rs1, rs2),
        Sll { rd, rs1, rs2 } => enc_r(OP_REG, 0b001, 0b0000000, rd, rs1, rs2),
        Slt { rd, rs1, rs2 } => enc_r(OP_REG, 0b010, 0b0000000, rd, rs1, rs2),
        Sltu { rd, rs1, rs2 } => enc_r(OP_REG, 0b011, 0b0000000, rd, rs1, rs2),
        Xor { rd, rs1, rs2 } => enc_r(OP_REG, 0b100, 0b0000000, rd, rs1, rs2),
        Srl { rd, rs1, rs2 } => enc_r(OP_REG, 0b101, 0b0000000, rd, rs1, rs2),
        Sra { rd, rs1, rs2 } => enc_r(OP_REG, 0b101, 0b0100000, rd, rs1, rs2),
        Or { rd, rs1, rs2 } => enc_r(OP_REG, 0b110, 0b0000000, rd, rs1, rs2),
        And { rd, rs1, rs2 } => enc_r(OP_REG, 0b111, 0b0000000, rd, rs1, rs2),
        Fence { rd, rs1, imm } => enc_i(OP_MISC_MEM, 0b000, rd, rs1, imm),
        Ecall => Ok(0x0000_0073),
        Ebreak => Ok(0x0010_0073),
        Addiw { rd, rs1, imm } => enc_i(OP_IMM_32, 0b000, rd, rs1, imm),
        Slliw { rd, rs1, shamt } => enc_shift(OP_IMM_32, 0b001, 0b000000, rd, rs1, check_shamt(shamt, 31)?),
        Srliw { rd, rs1, shamt } => enc_shift(OP_IMM_32, 0b101, 0b000000, rd, rs1, check_shamt(shamt, 31)?),
        Sraiw { rd, rs1, shamt } => enc_shift(OP_IMM_32, 0b101, 0b010000, rd, rs1, check_shamt(shamt, 31)?),
        Addw { rd, rs1, rs2 } => enc_r(OP_REG_32, 0b000, 0b0000000, rd, rs1, rs2),
        Subw { rd, rs1, rs2 } => enc_r(OP_REG_32, 0b000, 0b0100000, rd, rs1, rs2),
        Sllw { rd, rs1, rs2 } => enc_r(OP_REG_32, 0b001, 0b0000000, rd, rs1, rs2),
        Srlw { rd, rs1, rs2 } => enc_r(OP_REG_32, 0b101, 0b0000000, rd, rs1, rs2),
        Sraw { rd, rs1, rs2 } => enc_r(OP_REG_32, 0b101, 0b0100000, rd, rs1, rs2),
    }
}

impl Instr {
    /// Lowercase mnemonic, e.g. `"addi"`.
    pub fn mnemonic(&self) -> &'static str {
        use Instr::*;
        match self {
            Lui { .. } => "lui",
            Auipc { .. } => "auipc",
            Jal { .. } => "jal",
            Jalr { .. } => "jalr",
            Beq { .. } => "beq",
            Bne { .. } => "bne",
            Blt { .. } => "blt",
            Bge { .. } => "bge",
            Bltu { .. } => "bltu",
            Bgeu { .. } => "bgeu",
            Lb { .. } => "lb",
            Lh { .. } => "lh",
            Lw { .. } => "lw",
            Ld { .. } => "ld",
            Lbu { .. } => "lbu",
            Lhu { .. } => "lhu",
            Lwu { .. } => "lwu",
            Sb { .. } => "sb",
            Sh { .. } => "sh",
            Sw { .. } => "sw",
            Sd { .. } => "sd",
            Addi { .. } => "addi",
            Slti { .. } => "slti",
            Sltiu { .. } => "sltiu",
            Xori { .. } => "xori",
            Ori { .. } => "ori",
            Andi { .. } => "andi",
            Slli { .. } => "slli",
            Srli { .. } => "srli",
            Srai { .. } => "srai",
            Add { .. } => "add",
            Sub { .. } => "sub",
            Sll { .. } => "sll",
            Slt { .. } => "slt",
            Sltu { .. } => "sltu",
            Xor { .. } => "xor",
            Srl { .. } => "srl",
            Sra { .. } => "sra",
            Or { .. } => "or",
            And { .. } => "and",
            Fence { .. } => "fence",
            Ecall => "ecall",
            Ebreak => "ebreak",
            Addiw { .. } => "addiw",
            Slliw { .. } => "slliw",
            Srliw { .. } => "srliw",
            Sraiw { .. } => "sraiw",
            Addw { .. } => "addw",
            Subw { .. } => "subw",
            Sllw { .. } => "sllw",
            Srlw { .. } => "srlw",
            Sraw { .. } => "sraw",
        }
    }
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Instr::*;
        let m = self.mnemonic();
        match *self {
            Lui { rd, imm } | Auipc { rd, imm } | Jal { rd, imm } => {
                write!(f, "{m} x{rd}, {imm}")
            }
            Jalr { rd, rs1, imm } => write!(f, "{m} x{rd}, x{rs1}, {imm}"),
            Beq { rs1, rs2, imm }
            | Bne { rs1, rs2, imm }
            | Blt { rs1, rs2, imm }
            | Bge { rs1, rs2, imm }
            | Bltu { rs1, rs2, imm }
            | Bgeu { rs1, rs2, imm } => write!(f, "{m} x{rs1}, x{rs2}, {imm}"),
            Lb { rd, rs1, imm }
            | Lh { rd, rs1, imm }
            | Lw { rd, rs1, imm }
            | Ld { rd, rs1, imm }
            | Lbu { rd, rs1, imm }
            | Lhu { rd, rs1, imm }
            | Lwu { rd, rs1, imm } => write!(f, "{m} x{rd}, {imm}(x{rs1})"),
            Sb { rs1, rs2, imm } | Sh { rs1, rs2, imm } | Sw { rs1, rs2, imm } | Sd { rs1, rs2, imm } => {
                write!(f, "{m} x{rs2}, {imm}(x{rs1})")
            }
            Addi { rd, rs1, imm }
            | Slti { rd, rs1, imm }
            | Sltiu { rd, rs1, imm }
            | Xori { rd, rs1, imm }
            | Ori { rd, rs1, imm }
            | Andi { rd, rs1, imm }
            | Addiw { rd, rs1, imm } => write!(f, "{m} x{rd}, x{rs1}, {imm}"),
            Slli { rd, rs1, shamt }
            | Srli { rd, rs1, shamt }
            | Srai { rd, rs1, shamt }
            | Slliw { rd, rs1, shamt }
            | Srliw { rd, rs1, shamt }
            | Sraiw { rd, rs1, shamt } => write!(f, "{m} x{rd}, x{rs1}, {shamt}"),
            Add { rd, rs1, rs2 }
            | Sub { rd, rs1, rs2 }
            | Sll { rd, rs1, rs2 }
            | Slt { rd, rs1, rs2 }
            | Sltu { rd, rs1, rs2 }
            | Xor { rd, rs1, rs2 }
            | Srl { rd, rs1, rs2 }
            | Sra { rd, rs1, rs2 }
            | Or { rd, rs1, rs2 }
            | And { rd, rs1, rs2 }
            | Addw { rd, rs1, rs2 }
            | Subw { rd, rs1, rs2 }
            | Sllw { rd, rs1, rs2 }
            | Srlw { rd, rs1, rs2 }
            | Sraw { rd, rs1, rs2 } => write!(f, "{m} x{rd}, x{rs1}, x{rs2}"),
            Fence { .. } | Ecall | Ebreak => write!(f, "{m}"),
        }
    }
}

/// One instruction per line, lowercase mnemonic plus operands.
pub fn disassemble(instr: Instr) -> String {
    instr.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_canonical_nop() {
        // Cross-checked against a reference assembler: nop == addi x0, x0, 0.
        assert_eq!(decode(0x0000_0013), Ok(Instr::Addi { rd: 0, rs1: 0, imm: 0 }));
    }

    #[test]
    fn decode_add_t0_t1_t2() {
        // `add t0, t1, t2` assembles to 0x007302b3.
        assert_eq!(decode(0x0073_02b3), Ok(Instr::Add { rd: 5, rs1: 6, rs2: 7 }));
    }

    #[test]
    fn decode_rejects_all_ones() {
        assert_eq!(decode(0xffff_ffff), Err(IllegalInstruction(0xffff_ffff)));
    }

    #[test]
    fn decode_rejects_compressed_low_bits() {
        assert_eq!(decode(0x0000_0001), Err(IllegalInstruction(0x0000_0001)));
        assert_eq!(decode(0x0073_02b2), Err(IllegalInstruction(0x0073_02b2)));
    }

    #[test]
    fn decode_rejects_extensions() {
        // mul t0, t1, t2 (M extension, funct7=1)
        assert!(decode(0x0273_02b3).is_err());
        // csrrw x0, mstatus, x0 (Zicsr)
        assert!(decode(0x3000_1073).is_err());
        // amoadd.w (A extension, opcode 0101111)
        assert!(decode(0x0062_a2af).is_err());
        // fld (D extension, opcode 0000111)
        assert!(decode(0x0001_3007).is_err());
    }

    #[test]
    fn decode_rejects_slliw_with_bit25_set() {
        // slliw encoding with funct7 low bit set is reserved.
        let w = encode(Instr::Slliw { rd: 1, rs1: 1, shamt: 0 }).unwrap() | (1 << 25);
        assert!(decode(w).is_err());
    }

    #[test]
    fn encode_matches_reference_assembler() {
        assert_eq!(encode(Instr::Addi { rd: 0, rs1: 0, imm: 0 }), Ok(0x0000_0013));
        assert_eq!(encode(Instr::Add { rd: 5, rs1: 6, rs2: 7 }), Ok(0x0073_02b3));
        // sd ra, 8(sp) == 0x00113423
        assert_eq!(encode(Instr::Sd { rs1: 2, rs2: 1, imm: 8 }), Ok(0x0011_3423));
        // bne a0, a1, -4 == 0xfeb51ee3
        assert_eq!(encode(Instr::Bne { rs1: 10, rs2: 11, imm: -4 }), Ok(0xfeb5_1ee3));
        // jal ra, 16 == 0x010000ef
        assert_eq!(encode(Instr::Jal { rd: 1, imm: 16 }), Ok(0x0100_00ef));
        // lui t0, 0x12345 == 0x123452b7
        assert_eq!(encode(Instr::Lui { rd: 5, imm: 0x1234_5000 }), Ok(0x1234_52b7));
        // srai t0, t1, 63 == 0x43f35293
        assert_eq!(encode(Instr::Srai { rd: 5, rs1: 6, shamt: 63 }), Ok(0x43f3_5293));
    }

    #[test]
    fn encode_rejects_out_of_range_immediates() {
        assert_eq!(
            encode(Instr::Addi { rd: 0, rs1: 0, imm: 4096 }),
            Err(EncodeError::ImmediateOutOfRange { imm: 4096, format: 'I' })
        );
        assert!(encode(Instr::Addi { rd: 0, rs1: 0, imm: 2048 }).is_err());
        assert!(encode(Instr::Addi { rd: 0, rs1: 0, imm: -2049 }).is_err());
        assert!(encode(Instr::Beq { rs1: 0, rs2: 0, imm: 1 }).is_err());
        assert!(encode(Instr::Jal { rd: 0, imm: 1 << 20 }).is_err());
        assert!(encode(Instr::Lui { rd: 0, imm: 1 }).is_err());
        assert!(encode(Instr::Lui { rd: 0, imm: 1 << 32 }).is_err());
        assert!(encode(Instr::Slli { rd: 0, rs1: 0, shamt: 64 }).is_err());
        assert!(encode(Instr::Slliw { rd: 0, rs1: 0, shamt: 32 }).is_err());
        assert_eq!(
            encode(Instr::Add { rd: 32, rs1: 0, rs2: 0 }),
            Err(EncodeError::RegisterOutOfRange(32))
        );
    }

    #[test]
    fn sign_extension_of_negative_immediates() {
        // addi t0, t1, -1
        let i = decode(encode(Instr::Addi { rd: 5, rs1: 6, imm: -1 }).unwrap()).unwrap();
        assert_eq!(i, Instr::Addi { rd: 5, rs1: 6, imm: -1 });
        // beq imm is even and sign-extended
        let i = decode(encode(Instr::Beq { rs1: 1, rs2: 2, imm: -4096 }).unwrap()).unwrap();
        assert_eq!(i, Instr::Beq { rs1: 1, rs2: 2, imm: -4096 });
        // lui with negative (high-bit) immediate
        let i = decode(0xfffff2b7).unwrap();
        assert_eq!(i, Instr::Lui { rd: 5, imm: -4096 });
    }

    #[test]
    fn fence_round_trips_arbitrary_fields() {
        // fence.tso-style word: fm=1000, pred=rw, succ=rw
        let w = 0x8330_000f;
        let i = decode(w).unwrap();
        assert!(matches!(i, Instr::Fence { .. }));
        assert_eq!(encode(i), Ok(w));
    }

    #[test]
    fn disassembly_format() {
        assert_eq!(disassemble(Instr::Add { rd: 5, rs1: 6, rs2: 7 }), "add x5, x6, x7");
        assert_eq!(disassemble(Instr::Addi { rd: 0, rs1: 0, imm: 0 }), "addi x0, x0, 0");
        assert_eq!(disassemble(Instr::Jal { rd: 1, imm: -8 }), "jal x1, -8");
        assert_eq!(disassemble(Instr::Lw { rd: 5, rs1: 6, imm: -8 }), "lw x5, -8(x6)");
        assert_eq!(disassemble(Instr::Sw { rs1: 6, rs2: 7, imm: 16 }), "sw x7, 16(x6)");
        assert_eq!(disassemble(Instr::Ecall), "ecall");
    }
}
