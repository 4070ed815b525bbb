//! Runs a real compiler-produced RV64I binary (see fixtures/nqueens8.c):
//! recursive N-Queens built with clang at -O2, exercising multi-segment
//! loading, compiler-scheduled code, and guest stack recursion.

use rvum_core::loader::LoaderConfig;
use rvum_core::machine::RunLimits;
use rvum_core::run_captured;

const NQUEENS8: &[u8] = include_bytes!("fixtures/nqueens8");

#[test]
fn compiled_nqueens_prints_92_solutions() {
    let config =
        LoaderConfig { mem_size: 32 * 1024 * 1024, stack_size: 1024 * 1024, auxv_pagesz: false };
    let run = run_captured(NQUEENS8, &[b"nqueens8".to_vec()], &config, &RunLimits::default())
        .expect("fixture must load and run");
    assert_eq!(run.exit_code, 0);
    assert_eq!(String::from_utf8(run.stdout).unwrap(), "queens(8)=000000000000005c\n");
}

#[test]
fn compiled_guest_respects_step_limit() {
    let config =
        LoaderConfig { mem_size: 32 * 1024 * 1024, stack_size: 1024 * 1024, auxv_pagesz: false };
    let err = run_captured(NQUEENS8, &[], &config, &RunLimits { max_steps: Some(10) }).unwrap_err();
    assert!(err.to_string().contains("step limit"), "got: {err}");
}
