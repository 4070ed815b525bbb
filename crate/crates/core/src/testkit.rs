//! Instruction-space enumeration and sampling for round-trip and fuzz
//! suites. Groups every RV64I mnemonic by encoding shape and builds
//! instructions from raw field values.

use crate::isa::Instr;

/// Encoding shape, which determines which fields are meaningful and the
/// immediate's range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// rd, rs1, rs2
    R,
    /// rd, rs1, 12-bit signed imm
    I,
    /// rd, rs1, 6-bit shamt
    Shift64,
    /// rd, rs1, 5-bit shamt
    Shift32,
    /// rs1, rs2, 12-bit signed imm
    S,
    /// rs1, rs2, 13-bit signed even imm
    B,
    /// rd, 32-bit imm with low 12 bits zero
    U,
    /// rd, 21-bit signed even imm
    J,
    /// rd, rs1, 12-bit imm (fence fm/pred/succ bits)
    Fence,
    /// no fields
    Env,
}

/// Raw field values a [`Kind`] builds from; fields outside the kind's
/// shape are ignored.
#[derive(Debug, Clone, Copy, Default)]
pub struct Fields {
    pub rd: u8,
    pub rs1: u8,
    pub rs2: u8,
    pub imm: i64,
    pub shamt: u8,
}

/// One mnemonic: its shape plus a constructor from raw fields.
pub struct Kind {
    pub name: &'static str,
    pub shape: Shape,
    pub build: fn(Fields) -> Instr,
}

macro_rules! kind {
    ($name:literal, $shape:ident, $variant:ident, rd_rs1_rs2) => {
        Kind {
            name: $name,
            shape: Shape::$shape,
            build: |f| Instr::$variant { rd: f.rd, rs1: f.rs1, rs2: f.rs2 },
        }
    };
    ($name:literal, $shape:ident, $variant:ident, rd_rs1_imm) => {
        Kind {
            name: $name,
            shape: Shape::$shape,
            build: |f| Instr::$variant { rd: f.rd, rs1: f.rs1, imm: f.imm },
        }
    };
    ($name:literal, $shape:ident, $variant:ident, rd_rs1_shamt) => {
        Kind {
            name: $name,
            shape: Shape::$shape,
            build: |f| Instr::$variant { rd: f.rd, rs1: f.rs1, shamt: f.shamt },
        }
    };
    ($name:literal, $shape:ident, $variant:ident, rs1_rs2_imm) => {
        Kind {
            name: $name,
            shape: Shape::$shape,
            build: |f| Instr::$variant { rs1: f.rs1, rs2: f.rs2, imm: f.imm },
        }
    };
    ($name:literal, $shape:ident, $variant:ident, rd_imm) => {
        Kind {
            name: $name,
            shape: Shape::$shape,
            build: |f| Instr::$variant { rd: f.rd, imm: f.imm },
        }
    };
}

/// Every RV64I mnemonic.
pub const KINDS: &[Kind] = &[
    kind!("lui", U, Lui, rd_imm),
    kind!("auipc", U, Auipc, rd_imm),
    kind!("jal", J, Jal, rd_imm),
    kind!("jalr", I, Jalr, rd_rs1_imm),
    kind!("beq", B, Beq, rs1_rs2_imm),
    kind!("bne", B, Bne, rs1_rs2_imm),
    kind!("blt", B, Blt, rs1_rs2_imm),
    kind!("bge", B, Bge, rs1_rs2_imm),
    kind!("bltu", B, Bltu, rs1_rs2_imm),
    kind!("bgeu", B, Bgeu, rs1_rs2_imm),
    kind!("lb", I, Lb, rd_rs1_imm),
    kind!("lh", I, Lh, rd_rs1_imm),
    kind!("lw", I, Lw, rd_rs1_imm),
    kind!("ld", I, Ld, rd_rs1_imm),
    kind!("lbu", I, Lbu, rd_rs1_imm),
    kind!("lhu", I, Lhu, rd_rs1_imm),
    kind!("lwu", I, Lwu, rd_rs1_imm),
    kind!("sb", S, Sb, rs1_rs2_imm),
    kind!("sh", S, Sh, rs1_rs2_imm),
    kind!("sw", S, Sw, rs1_rs2_imm),
    kind!("sd", S, Sd, rs1_rs2_imm),
    kind!("addi", I, Addi, rd_rs1_imm),
    kind!("slti", I, Slti, rd_rs1_imm),
    kind!("sltiu", I, Sltiu, rd_rs1_imm),
    kind!("xori", I, Xori, rd_rs1_imm),
    kind!("ori", I, Ori, rd_rs1_imm),
    kind!("andi", I, Andi, rd_rs1_imm),
    kind!("slli", Shift64, Slli, rd_rs1_shamt),
    kind!("srli", Shift64, Srli, rd_rs1_shamt),
    kind!("srai", Shift64, Srai, rd_rs1_shamt),
    kind!("add", R, Add, rd_rs1_rs2),
    kind!("sub", R, Sub, rd_rs1_rs2),
    kind!("sll", R, Sll, rd_rs1_rs2),
    kind!("slt", R, Slt, rd_rs1_rs2),
    kind!("sltu", R, Sltu, rd_rs1_rs2),
    kind!("xor", R, Xor, rd_rs1_rs2),
    kind!("srl", R, Srl, rd_rs1_rs2),
    kind!("sra", R, Sra, rd_rs1_rs2),
    kind!("or", R, Or, rd_rs1_rs2),
    kind!("and", R, And, rd_rs1_rs2),
    kind!("fence", Fence, Fence, rd_rs1_imm),
    Kind { name: "ecall", shape: Shape::Env, build: |_| Instr::Ecall },
    Kind { name: "ebreak", shape: Shape::Env, build: |_| Instr::Ebreak },
    kind!("addiw", I, Addiw, rd_rs1_imm),
    kind!("slliw", Shift32, Slliw, rd_rs1_shamt),
    kind!("srliw", Shift32, Srliw, rd_rs1_shamt),
    kind!("sraiw", Shift32, Sraiw, rd_rs1_shamt),
    kind!("addw", R, Addw, rd_rs1_rs2),
    kind!("subw", R, Subw, rd_rs1_rs2),
    kind!("sllw", R, Sllw, rd_rs1_rs2),
    kind!("srlw", R, Srlw, rd_rs1_rs2),
    kind!("sraw", R, Sraw, rd_rs1_rs2),
];

/// Boundary register indices for exhaustive sweeps.
pub const BOUNDARY_REGS: [u8; 4] = [0, 1, 15, 31];

/// Boundary immediates / shifts for a given shape.
pub fn boundary_imms(shape: Shape) -> Vec<i64> {
    match shape {
        Shape::I | Shape::Fence => vec![-2048, -1, 0, 1, 2047],
        Shape::S => vec![-2048, -1, 0, 1, 2047],
        Shape::B => vec![-4096, -2, 0, 2, 4094],
        Shape::U => vec![i32::MIN as i64, -4096, 0, 4096, 0x7fff_f000],
        Shape::J => vec![-(1 << 20), -2, 0, 2, (1 << 20) - 2],
        Shape::Shift64 => vec![0, 1, 31, 32, 63],
        Shape::Shift32 => vec![0, 1, 15, 31],
        Shape::R | Shape::Env => vec![0],
    }
}

fn fields_for(kind: &Kind, rd: u8, rs1: u8, rs2: u8, imm: i64) -> Fields {
    match kind.shape {
        Shape::Shift64 | Shape::Shift32 => Fields { rd, rs1, rs2: 0, imm: 0, shamt: imm as u8 },
        _ => Fields { rd, rs1, rs2, imm, shamt: 0 },
    }
}

/// Exhaustive sweep: every mnemonic crossed with boundary register
/// indices and boundary immediates. Every returned instruction is valid
/// (encodable).
pub fn all_boundary_instrs() -> Vec<Instr> {
    let mut out = Vec::new();
    for kind in KINDS {
        let imms = boundary_imms(kind.shape);
        let uses_rs2 = matches!(kind.shape, Shape::R | Shape::S | Shape::B);
        let uses_rs1 = !matches!(kind.shape, Shape::U | Shape::J | Shape::Env);
        for &rd in &BOUNDARY_REGS {
            for &rs1 in if uses_rs1 { &BOUNDARY_REGS[..] } else { &[0][..] } {
                for &rs2 in if uses_rs2 { &BOUNDARY_REGS[..] } else { &[0][..] } {
                    for &imm in &imms {
                        out.push((kind.build)(fields_for(kind, rd, rs1, rs2, imm)));
                    }
                }
            }
        }
    }
    out.sort_unstable_by_key(|i| format!("{i:?}"));
    out.dedup();
    out
}

/// Builds a uniformly sampled valid instruction of the given kind from an
/// entropy source.
pub fn sample_instr(kind: &Kind, entropy: &mut dyn FnMut() -> u64) -> Instr {
    let rd = (entropy() % 32) as u8;
    let rs1 = (entropy() % 32) as u8;
    let rs2 = (entropy() % 32) as u8;
    let imm = match kind.shape {
        Shape::I | Shape::S | Shape::Fence => entropy() as i64 % 2048,
        Shape::B => (entropy() as i64 % 2048) * 2,
        Shape::U => (entropy() as i64 % (1 << 19)) << 12,
        Shape::J => (entropy() as i64 % (1 << 19)) * 2,
        Shape::Shift64 => (entropy() % 64) as i64,
        Shape::Shift32 => (entropy() % 32) as i64,
        Shape::R | Shape::Env => 0,
    };
    (kind.build)(fields_for(kind, rd, rs1, rs2, imm))
}
