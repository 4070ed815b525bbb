//! Shared helpers for the criterion benchmarks.

use rvum_core::isa::encode;
use rvum_core::testkit::{self, Shape};

/// Deterministic splitmix64 stream, enough entropy for benchmark inputs.
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}

/// `n` encoded instruction words sampled uniformly over all mnemonics
/// except the environment calls.
pub fn random_instruction_words(n: usize, seed: u64) -> Vec<u32> {
    let mut rng = SplitMix64::new(seed);
    let kinds: Vec<&testkit::Kind> =
        testkit::KINDS.iter().filter(|k| !matches!(k.shape, Shape::Env)).collect();
    let mut entropy = || rng.next_u64();
    (0..n)
        .map(|_| {
            let kind = kinds[(entropy() % kinds.len() as u64) as usize];
            encode(testkit::sample_instr(kind, &mut entropy)).expect("sampled instrs are valid")
        })
        .collect()
}
