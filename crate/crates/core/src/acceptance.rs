//! The reproducibility suite: every acceptance criterion as a timed check.

use std::collections::BTreeSet;
use std::fmt;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;

use crate::array::{is_ooa, verify_oca, CoverageReport, OrderedArray};
use crate::bounds::{k_bounds, two_chains_value};
use crate::code::{
    lift_hamming_to_rt, product_code, surjective_hamming_code, three_chain_code, two_chain_code, verify_covering, Code,
};
use crate::construct::{extend_depth, fuse, kleitman_spencer_ca, kleitman_spencer_number, oca_depth2_from_ca, rs_ooa};
use crate::error::Result;
use crate::metric::{sphere_volume, sphere_volume_bruteforce, RtSpace, Word};
use crate::poset::RtPoset;
use crate::search::{exact_covering_number, exact_ocan, SearchBudget};

/// Wall-clock limits per criterion, in order.
pub const TIME_LIMITS: [Duration; 10] = [
    Duration::from_millis(1),
    Duration::from_secs(30),
    Duration::from_secs(10),
    Duration::from_secs(1),
    Duration::from_secs(10),
    Duration::from_secs(30),
    Duration::from_secs(5),
    Duration::from_secs(1),
    Duration::from_secs(120),
    Duration::from_secs(300),
];

/// Work allowance per exact search in the bounds sweep, in units of
/// (ball volume^2 + space size) per node.
pub const SWEEP_WORK: u64 = 200_000_000;
pub const SWEEP_MIN_NODES: u64 = 20;
pub const SWEEP_MAX_NODES: u64 = 20_000;

/// Points where a broken component can be swapped in to check that the suite notices.
#[derive(Clone, Copy)]
pub struct Hooks {
    pub verify: fn(&OrderedArray) -> CoverageReport,
    pub two_chain: fn(usize, usize) -> Result<Code>,
}

impl Default for Hooks {
    fn default() -> Self {
        Self { verify: verify_oca, two_chain: two_chain_code }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    /// One entry per sub-check, failures first named.
    pub details: Vec<String>,
    pub elapsed: Duration,
    pub limit: Duration,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:>2}  {}  ({:.3} s, limit {} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed.as_secs_f64(),
            self.limit.as_secs_f64()
        )
    }
}

pub const TITLES: [&str; 10] = [
    "example OCA(5;2,4,2,2) verifies and has ten anti-ideals of size 2",
    "sphere volumes match brute force; chain volumes are q^R",
    "Kleitman-Spencer arrays verify; CAN(2,3,2) = 4",
    "K_3(3,2,4) <= 5 by lifting a surjective code",
    "K_2(2,3,3) <= 6: listed words, two-chain code, exact search",
    "two-chain and three-chain code sizes and coverage",
    "fusion gives OCA(7;2,4,2,2); Reed-Solomon arrays are OOAs",
    "product code over Z_4^4 with at most 12 words beats 15",
    "depth extension preserves OCAN for N <= 8, m <= 3, t <= 3",
    "bounds agree with exact search on every space of at most 4096 points",
];

/// The 5 x 8 example array, columns labelled 1..8 in blocks of two.
pub fn example_array() -> OrderedArray {
    OrderedArray::new(
        2,
        4,
        2,
        2,
        1,
        vec![
            vec![0, 1, 0, 1, 0, 1, 0, 1],
            vec![1, 1, 1, 0, 0, 0, 0, 0],
            vec![0, 0, 1, 1, 1, 0, 1, 0],
            vec![1, 0, 0, 0, 1, 1, 0, 0],
            vec![0, 0, 0, 0, 0, 0, 1, 1],
        ],
    )
    .expect("example array is well formed")
}

/// The six words printed as a 3-covering of `Z_2^6` over `[2 x 3]`.
pub fn listed_two_chain_words() -> Code {
    let space = RtSpace::with_shape(2, 2, 3).expect("valid shape");
    let words = ["000100", "001100", "010110", "001001", "011101", "000011"]
        .iter()
        .map(|w| Word(w.bytes().map(|b| b - b'0').collect()))
        .collect();
    Code::new(space, words, Some(3)).expect("distinct words")
}

/// Collects sub-check outcomes for one criterion.
#[derive(Default)]
struct Checks {
    ok: bool,
    notes: Vec<String>,
    started: bool,
}

impl Checks {
    fn new() -> Self {
        Self { ok: true, notes: Vec::new(), started: true }
    }

    fn check(&mut self, pass: bool, what: impl Into<String>) {
        debug_assert!(self.started);
        self.ok &= pass;
        self.notes.push(format!("{}: {}", if pass { "ok" } else { "FAILED" }, what.into()));
    }

    fn result<T>(&mut self, r: Result<T>, what: &str) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.check(false, format!("{what}: {e}"));
                None
            }
        }
    }
}

fn c1(h: &Hooks, c: &mut Checks) {
    let a = example_array();
    let rep = (h.verify)(&a);
    c.check(rep.valid, format!("verify_oca valid with lambda 1 ({} anti-ideals checked)", rep.checked));
    let listed: BTreeSet<Vec<usize>> = [[1, 2], [3, 4], [5, 6], [7, 8], [2, 4], [2, 6], [2, 8], [4, 6], [4, 8], [6, 8]]
        .iter()
        .map(|p| p.to_vec())
        .collect();
    if let Some(anti) = c.result(RtPoset::new(4, 2).and_then(|p| p.anti_ideals(2)), "anti-ideals") {
        let got: BTreeSet<Vec<usize>> = anti.iter().map(|j| j.labels()).collect();
        c.check(
            anti.len() == 10 && got == listed,
            format!("{} anti-ideals of size 2 match the listed ten", anti.len()),
        );
    }
}

fn c2(c: &mut Checks) {
    let mut cases = Vec::new();
    for q in 2..=3usize {
        for m in 1..=3usize {
            for s in 1..=3usize {
                if (q as u64).pow((m * s) as u32) <= 1_000_000 {
                    for r in 0..=m * s {
                        cases.push((q, m, s, r));
                    }
                }
            }
        }
    }
    let bad: Vec<_> = cases
        .par_iter()
        .filter(|&&(q, m, s, r)| {
            let formula = sphere_volume(q, m, s, r).ok().and_then(|v| v.to_u64());
            let brute = sphere_volume_bruteforce(q, m, s, r, 1_000_000).ok();
            formula.is_none() || formula != brute
        })
        .collect();
    c.check(bad.is_empty(), format!("{} volumes against brute force, mismatches {:?}", cases.len(), bad));
    let mut chain_ok = true;
    for q in 2..=5usize {
        for s in 1..=6usize {
            for r in 0..=s {
                chain_ok &= sphere_volume(q, 1, s, r).ok() == Some(BigUint::from(q).pow(r as u32));
            }
        }
    }
    c.check(chain_ok, "V_q(1,s,R) = q^R for q <= 5, R <= s <= 6");
}

fn c3(h: &Hooks, c: &mut Checks) {
    c.check(kleitman_spencer_number(3) == 4, "kleitman_spencer_number(3) = 4");
    let mut bad = Vec::new();
    for m in 2..=15 {
        match kleitman_spencer_ca(m) {
            Ok(a) if a.rows() == kleitman_spencer_number(m) && (h.verify)(&a).valid => {}
            _ => bad.push(m),
        }
    }
    c.check(bad.is_empty(), format!("CA(N;2,m,2) verifies for m in 2..=15, failures {bad:?}"));
    if let Some(out) = c.result(exact_ocan(2, 3, 1, 2, &SearchBudget::default()), "exact_ocan(2,3,1,2)") {
        c.check(out.value() == Some(4), format!("exact_ocan(2,3,1,2) = {:?}", out.value()));
    }
}

fn c4(c: &mut Checks) {
    let built = surjective_hamming_code(3, 2, None).and_then(|h| lift_hamming_to_rt(&h, 2));
    if let Some(code) = c.result(built, "lifted code") {
        c.check(code.len() == 5, format!("{} words", code.len()));
        if let Some(rep) = c.result(verify_covering(&code, 4), "verify") {
            c.check(rep.valid && rep.points_checked == 729, format!("4-covering over {} points", rep.points_checked));
        }
    }
    if let Some(b) = c.result(k_bounds(3, 3, 2, 4), "k_bounds(3,3,2,4)") {
        c.check(b.record.lower.value >= BigUint::from(3u32), format!("sphere lower bound {}", b.record.lower.value));
    }
}

fn c5(h: &Hooks, c: &mut Checks) {
    let listed = listed_two_chain_words();
    if let Some(rep) = c.result(verify_covering(&listed, 3), "listed words") {
        let miss = rep.first_uncovered.map(|w| format!(", {w} uncovered")).unwrap_or_default();
        c.check(rep.valid, format!("listed six words are a 3-covering{miss}"));
    }
    if let Some(code) = c.result((h.two_chain)(2, 3), "two_chain_code(2,3)") {
        let valid = verify_covering(&code, 3).map(|r| r.valid).unwrap_or(false);
        c.check(code.len() == 6 && valid, format!("two_chain_code(2,3): {} words, valid {valid}", code.len()));
    }
    if let Some(out) = c.result(exact_covering_number(2, 2, 3, 3, &SearchBudget::default()), "exact search") {
        let floor = sphere_floor(2, 2, 3, 3);
        let v = out.value();
        c.check(
            v.is_some_and(|k| k <= 6 && BigUint::from(k) >= floor),
            format!("exact K_2(2,3,3) = {v:?}, sphere bound {floor}"),
        );
    }
}

fn sphere_floor(q: usize, m: usize, s: usize, r: usize) -> BigUint {
    let vol = sphere_volume(q, m, s, r).expect("valid volume parameters");
    BigUint::from(q).pow((m * s) as u32).div_ceil(&vol)
}

fn c6(h: &Hooks, c: &mut Checks) {
    for (v, s) in [(2, 2), (2, 3), (3, 2)] {
        if let Some(code) = c.result((h.two_chain)(v, s), "two-chain") {
            let size = v.pow(s as u32 - 2) * (v * v - 1);
            let valid = verify_covering(&code, s).map(|r| r.valid).unwrap_or(false);
            c.check(
                code.len() == size && valid,
                format!("two-chain (v={v},s={s}): {} words of {size}, valid {valid}", code.len()),
            );
        }
        if let Some(code) = c.result(three_chain_code(v, s), "three-chain") {
            let size = v * (v.pow(s as u32) - 1);
            let valid = verify_covering(&code, 2 * s - 1).map(|r| r.valid).unwrap_or(false);
            c.check(
                code.len() == size && valid,
                format!("three-chain (v={v},s={s}): {} words of {size}, valid {valid}", code.len()),
            );
        }
    }
}

fn c7(h: &Hooks, c: &mut Checks) {
    if let Some(f) = c.result(rs_ooa(3, 2).and_then(|a| fuse(&a)), "fuse(rs_ooa(3,2))") {
        let shape = (f.rows(), f.strength(), f.m(), f.s(), f.alphabet());
        c.check(shape == (7, 2, 4, 2, 2) && (h.verify)(&f).valid, format!("fused array {shape:?} verifies"));
    }
    for (q, t) in [(2, 2), (2, 3), (3, 2), (4, 2)] {
        if let Some(a) = c.result(rs_ooa(q, t), "rs_ooa") {
            c.check(is_ooa(&a), format!("rs_ooa({q},{t}) is an OOA"));
        }
    }
}

fn c8(c: &mut Checks) {
    let built = kleitman_spencer_ca(2)
        .and_then(|ca| oca_depth2_from_ca(&ca))
        .and_then(|a| two_chain_code(2, 2).and_then(|h| product_code(&a, &h)));
    if let Some(g) = c.result(built, "product code") {
        let rep = verify_covering(&g, 2);
        let valid = rep.as_ref().map(|r| r.valid && r.points_checked == 256).unwrap_or(false);
        let direct = two_chains_value(4, 2);
        c.check(
            g.len() <= 12 && valid && BigUint::from(g.len()) < direct,
            format!("{} words over Z_4^4, valid {valid}, direct two-chain bound {direct}", g.len()),
        );
    }
}

fn c9(h: &Hooks, c: &mut Checks) {
    for t in 2..=3usize {
        for m in 1..=3usize {
            if t > m * (t - 1) {
                continue;
            }
            let budget = SearchBudget::default();
            let Some(shallow) = c.result(exact_ocan(t, m, t - 1, 2, &budget), "exact_ocan") else { continue };
            let Some(n) = shallow.value() else {
                c.check(false, format!("exact_ocan({t},{m},{},2) did not finish", t - 1));
                continue;
            };
            if n > 8 {
                continue;
            }
            if let Some(deep) = c.result(extend_depth(&shallow.witness), "extend_depth") {
                c.check(
                    deep.rows() == n && deep.s() == t && (h.verify)(&deep).valid,
                    format!("extend_depth of OCA({n};{t},{m},{},2) verifies at depth {t}", t - 1),
                );
            }
            if let Some(full) = c.result(exact_ocan(t, m, t, 2, &budget), "exact_ocan") {
                c.check(
                    full.value() == Some(n),
                    format!("OCAN({t},{m},{t},2) = {:?} vs depth {}: {n}", full.value(), t - 1),
                );
            }
        }
    }
}

/// Every (q,m,s,R) with 0 < R < ms and q^{ms} <= 4096.
pub fn sweep_instances() -> Vec<(usize, usize, usize, usize)> {
    let mut out = Vec::new();
    for q in 2..=64usize {
        for n in 2..=12usize {
            if (q as u64).checked_pow(n as u32).is_none_or(|p| p > 4096) {
                continue;
            }
            for m in (1..=n).filter(|m| n % m == 0) {
                for r in 1..n {
                    out.push((q, m, n / m, r));
                }
            }
        }
    }
    out
}

/// Node cap for one sweep instance, pinned so the sweep is deterministic.
pub fn sweep_nodes(q: usize, m: usize, s: usize, r: usize) -> u64 {
    let vol = sphere_volume(q, m, s, r).ok().and_then(|v| v.to_u64()).unwrap_or(u64::MAX);
    let points = (q as u64).pow((m * s) as u32);
    (SWEEP_WORK / vol.saturating_mul(vol).saturating_add(points)).clamp(SWEEP_MIN_NODES, SWEEP_MAX_NODES)
}

fn sweep_one(q: usize, m: usize, s: usize, r: usize) -> std::result::Result<bool, String> {
    let b = k_bounds(q, m, s, r).map_err(|e| e.to_string())?;
    let lower = &b.record.lower.value;
    let upper = &b.record.upper.value;
    if let Some(w) = b.witness().map_err(|e| e.to_string())? {
        if !w.verify().map_err(|e| e.to_string())? || BigUint::from(w.size()) > *upper {
            return Err(format!("witness for {} fails", b.record.target));
        }
    }
    let out = exact_covering_number(q, m, s, r, &SearchBudget::with_nodes(sweep_nodes(q, m, s, r)))
        .map_err(|e| e.to_string())?;
    let (lo, hi) = (BigUint::from(out.lower), BigUint::from(out.upper));
    if lo > *upper || hi < *lower || (out.exact && (hi < *lower || hi > *upper)) {
        return Err(format!("{}: search [{lo}, {hi}] vs bounds [{lower}, {upper}]", b.record.target));
    }
    Ok(out.exact)
}

fn c10(c: &mut Checks) {
    let cases = sweep_instances();
    let results: Vec<_> = cases.par_iter().map(|&(q, m, s, r)| sweep_one(q, m, s, r)).collect();
    let exact = results.iter().filter(|r| matches!(r, Ok(true))).count();
    let errors: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    c.check(
        errors.is_empty(),
        format!("{} instances, {exact} solved exactly, inconsistencies {errors:?}", cases.len()),
    );
}

/// Runs one criterion (1-based).
pub fn run_criterion(id: usize, hooks: &Hooks) -> CriterionResult {
    assert!((1..=10).contains(&id), "criteria are numbered 1 to 10");
    let mut c = Checks::new();
    let start = Instant::now();
    match id {
        1 => c1(hooks, &mut c),
        2 => c2(&mut c),
        3 => c3(hooks, &mut c),
        4 => c4(&mut c),
        5 => c5(hooks, &mut c),
        6 => c6(hooks, &mut c),
        7 => c7(hooks, &mut c),
        8 => c8(&mut c),
        9 => c9(hooks, &mut c),
        _ => c10(&mut c),
    }
    let elapsed = start.elapsed();
    let limit = TIME_LIMITS[id - 1];
    if elapsed > limit {
        c.check(false, format!("took {:.3} s", elapsed.as_secs_f64()));
    }
    CriterionResult { id, title: TITLES[id - 1], passed: c.ok, details: c.notes, elapsed, limit }
}

/// Runs the whole suite in order.
pub fn run_acceptance_suite(hooks: &Hooks) -> Vec<CriterionResult> {
    // start the worker pool outside the timed region
    (0..rayon::current_num_threads() * 4).into_par_iter().for_each(|_| {});
    (1..=10).map(|id| run_criterion(id, hooks)).collect()
}
