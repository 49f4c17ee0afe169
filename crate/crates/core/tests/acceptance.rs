//! Runs every acceptance criterion and prints one line per criterion, then
//! checks that broken components swapped into the suite fail where expected.

use rt_cover::acceptance::{run_acceptance_suite, run_criterion, Hooks};
use rt_cover::array::{verify_oca, CoverageReport, OrderedArray};
use rt_cover::code::{two_chain_code, Code};
use rt_cover::Result;

#[test]
fn acceptance_suite() {
    let results = run_acceptance_suite(&Hooks::default());
    for r in &results {
        println!("{r}");
        for d in &r.details {
            println!("        {d}");
        }
    }
    let failed: Vec<usize> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}

fn strict_verifier(a: &OrderedArray) -> CoverageReport {
    verify_oca(&a.with_lambda(a.lambda() + 1).unwrap())
}

/// Never copies the pair into the first block.
fn flat_two_chain(v: usize, s: usize) -> Result<Code> {
    let good = two_chain_code(v, s)?;
    let words = good
        .words()
        .iter()
        .map(|w| {
            let mut w = w.clone();
            w.0[..s].iter_mut().for_each(|x| *x = 0);
            w
        })
        .collect();
    Code::dedup(*good.space(), words, good.claimed_radius())
}

#[test]
fn off_by_one_lambda_fails_the_example() {
    let hooks = Hooks { verify: strict_verifier, ..Hooks::default() };
    assert!(!run_criterion(1, &hooks).passed);
    assert!(run_criterion(1, &Hooks::default()).passed);
}

#[test]
fn broken_two_chain_map_is_caught() {
    let hooks = Hooks { two_chain: flat_two_chain, ..Hooks::default() };
    let r = run_criterion(5, &hooks);
    assert!(!r.passed);
    assert!(r.details.iter().any(|d| d.starts_with("FAILED: two_chain_code(2,3)")), "{:?}", r.details);
    assert!(!run_criterion(6, &hooks).passed);
    assert!(run_criterion(6, &Hooks::default()).passed);
}
