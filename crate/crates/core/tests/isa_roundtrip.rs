//! Codec round-trip properties: decode(encode(i)) == i over instruction
//! space sweeps, and encode(decode(w)) == w for every word that decodes.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rvum_core::isa::{decode, encode, Instr};
use rvum_core::testkit::{self, Shape};

#[test]
fn boundary_sweep_round_trips() {
    let all = testkit::all_boundary_instrs();
    assert!(all.len() > 3000, "sweep unexpectedly small: {}", all.len());
    for instr in all {
        let word = encode(instr).unwrap_or_else(|e| panic!("encode {instr:?}: {e}"));
        assert_eq!(decode(word), Ok(instr), "word {word:#010x}");
    }
}

#[test]
fn random_words_that_decode_reencode_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut decoded = 0u32;
    for _ in 0..1_000_000 {
        let word: u32 = rng.random();
        if let Ok(instr) = decode(word) {
            decoded += 1;
            assert_eq!(encode(instr), Ok(word), "instr {instr:?}");
            check_format_invariants(instr);
        }
    }
    // Sanity: the decode table accepts a reasonable share of random words.
    assert!(decoded > 1000, "only {decoded} of 1e6 random words decoded");
}

#[test]
fn opcode_funct_sweep_round_trips() {
    // All opcodes x funct3 x funct7 with two register/imm fill patterns.
    for opcode in 0..128u32 {
        for f3 in 0..8u32 {
            for f7 in 0..128u32 {
                for fill in [0u32, 0x000f_8f80] {
                    let word = opcode | (f3 << 12) | (f7 << 25) | fill;
                    if let Ok(instr) = decode(word) {
                        assert_eq!(encode(instr), Ok(word));
                    }
                }
            }
        }
    }
}

fn check_format_invariants(instr: Instr) {
    use Instr::*;
    match instr {
        Beq { imm, .. } | Bne { imm, .. } | Blt { imm, .. } | Bge { imm, .. } | Bltu { imm, .. }
        | Bgeu { imm, .. } | Jal { imm, .. } => {
            assert_eq!(imm & 1, 0, "B/J immediates are even");
        }
        Lui { imm, .. } | Auipc { imm, .. } => {
            assert_eq!(imm & 0xfff, 0, "U immediates have low 12 bits zero");
        }
        _ => {}
    }
}

#[test]
fn i_format_sign_extension_matches_raw_field() {
    // Raw 12-bit field r decodes to r when r < 2048, else r - 4096.
    for raw in 0..4096u32 {
        let word = 0x13 | (raw << 20); // addi x0, x0, <raw>
        let expected = if raw < 2048 { raw as i64 } else { raw as i64 - 4096 };
        assert_eq!(decode(word), Ok(Instr::Addi { rd: 0, rs1: 0, imm: expected }));
    }
}

proptest! {
    #[test]
    fn any_valid_instr_round_trips(kind_idx in 0..testkit::KINDS.len(), seed: u64) {
        let kind = &testkit::KINDS[kind_idx];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut entropy = || rng.random::<u64>();
        let instr = testkit::sample_instr(kind, &mut entropy);
        let word = encode(instr).unwrap();
        prop_assert_eq!(decode(word), Ok(instr));
    }

    #[test]
    fn sampled_shift_instrs_stay_in_range(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut entropy = || rng.random::<u64>();
        for kind in testkit::KINDS.iter().filter(|k| matches!(k.shape, Shape::Shift64 | Shape::Shift32)) {
            let instr = testkit::sample_instr(kind, &mut entropy);
            prop_assert!(encode(instr).is_ok());
        }
    }
}
