//! Generated benchmarks executed under the interpreter must print exactly
//! what the arithmetic oracle predicts, for any scheme and count.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rvum_core::benchgen::{
    generate, oracle_dump, BenchSpec, SchemeParams, DUMP_LEN, OP_PERMUTATIONS,
};
use rvum_core::loader::LoaderConfig;
use rvum_core::machine::{Machine, RunLimits};
use rvum_core::syscall::{LinuxSyscalls, RecordingSyscalls, SyscallRecord};
use rvum_core::{build_stack, load_elf, run_captured};

fn small_mem() -> LoaderConfig {
    LoaderConfig { mem_size: 32 * 1024 * 1024, stack_size: 1024 * 1024, auxv_pagesz: false }
}

fn run_stdout(spec: &BenchSpec) -> String {
    let elf = generate(spec).unwrap();
    let run = run_captured(&elf, &[b"rb".to_vec()], &small_mem(), &RunLimits::default()).unwrap();
    assert_eq!(run.exit_code, 0);
    String::from_utf8(run.stdout).unwrap()
}

fn random_scheme(rng: &mut ChaCha8Rng) -> SchemeParams {
    SchemeParams::new(
        rng.random_range(0..4),
        rng.random_range(0..4),
        rng.random_range(0..4),
        OP_PERMUTATIONS[rng.random_range(0..6)],
    )
}

#[test]
fn emulator_matches_oracle_across_counts_and_schemes() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc0_0001);
    for count in [0u64, 1, 3, 12, 1000] {
        for _ in 0..8 {
            let spec = BenchSpec { count, init: rvum_core::benchgen::DEFAULT_INIT, scheme: random_scheme(&mut rng) };
            assert_eq!(run_stdout(&spec), oracle_dump(&spec), "spec {spec:?}");
        }
    }
}

#[test]
fn emulator_matches_oracle_with_random_init_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc0_0002);
    for _ in 0..10 {
        let spec = BenchSpec {
            count: rng.random_range(0..200),
            init: [rng.random(), rng.random(), rng.random(), rng.random()],
            scheme: random_scheme(&mut rng),
        };
        assert_eq!(run_stdout(&spec), oracle_dump(&spec), "spec {spec:?}");
    }
}

#[test]
fn dump_shape_is_fixed() {
    let text = run_stdout(&BenchSpec::with_count(17));
    assert_eq!(text.len(), DUMP_LEN);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    for (i, line) in lines.iter().enumerate() {
        assert!(line.starts_with(&format!("t{i}=")));
        assert_eq!(line.len(), 19);
        assert!(line[3..].chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
    }
}

#[test]
fn syscall_sequence_is_write_then_exit() {
    let spec = BenchSpec::with_count(5);
    let elf = generate(&spec).unwrap();
    let mut image = load_elf(&elf, &small_mem()).unwrap();
    build_stack(&mut image, &[b"rb".to_vec()], &[]).unwrap();
    let handler = RecordingSyscalls::new(LinuxSyscalls::sink());
    let mut machine = Machine::from_image(image, handler);
    let exit = machine.run(&RunLimits::default()).unwrap();
    assert_eq!(exit, 0);

    let records: &[SyscallRecord] = &machine.handler.records;
    assert_eq!(records.len(), 2, "exactly one write and one exit");
    assert_eq!(records[0].number, 64, "first call is write");
    assert_eq!(records[0].args[0], 1, "write goes to stdout");
    assert_eq!(records[0].args[2], DUMP_LEN as u64, "write length is the dump size");
    assert_eq!(records[1].number, 93, "second call is exit");
    assert_eq!(records[1].args[0], 0, "exit status 0");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn agreement_holds_for_arbitrary_schemes(
        count in 0u64..48,
        a in 0u8..4, b in 0u8..4, c in 0u8..4,
        perm in 0usize..6,
        init: [u64; 4],
    ) {
        let spec = BenchSpec { count, init, scheme: SchemeParams::new(a, b, c, OP_PERMUTATIONS[perm]) };
        prop_assert_eq!(run_stdout(&spec), oracle_dump(&spec));
    }
}
