//! Covering codes in RT spaces: the exhaustive covering verifier and the
//! code constructions built on covering arrays and chain structure.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{parse_header, parse_symbol_line, OrderedArray};
use crate::construct::kleitman_spencer_ca;
use crate::error::{invalid, Error, Result};
use crate::metric::{within_distance, RtSpace, Word, DEFAULT_POINT_BUDGET};

/// Largest code any constructor here will materialise.
pub const MAX_CODE_WORDS: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Code {
    space: RtSpace,
    words: Vec<Word>,
    claimed_radius: Option<usize>,
}

impl Code {
    pub fn new(space: RtSpace, words: Vec<Word>, claimed_radius: Option<usize>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(words.len());
        for w in &words {
            space.check_word(w)?;
            if !seen.insert(w) {
                return invalid(format!("duplicate codeword {w}"));
            }
        }
        if let Some(r) = claimed_radius {
            if r > space.len() {
                return invalid(format!("radius {r} exceeds word length {}", space.len()));
            }
        }
        Ok(Self { space, words, claimed_radius })
    }

    /// Like `new`, silently dropping repeated words (first occurrence kept).
    pub fn dedup(space: RtSpace, words: Vec<Word>, claimed_radius: Option<usize>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(words.len());
        let words = words.into_iter().filter(|w| seen.insert(w.clone())).collect();
        Self::new(space, words, claimed_radius)
    }

    pub fn space(&self) -> &RtSpace {
        &self.space
    }

    pub fn q(&self) -> usize {
        self.space.q()
    }

    pub fn m(&self) -> usize {
        self.space.poset().m()
    }

    pub fn s(&self) -> usize {
        self.space.poset().s()
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn claimed_radius(&self) -> Option<usize> {
        self.claimed_radius
    }

    pub fn with_radius(mut self, r: usize) -> Self {
        self.claimed_radius = Some(r);
        self
    }

    pub fn without(&self, index: usize) -> Self {
        let mut words = self.words.clone();
        words.remove(index);
        Self { words, ..self.clone() }
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        if self.claimed_radius.is_none() {
            return invalid("a code file needs a radius");
        }
        std::fs::write(path, self.to_string())?;
        Ok(())
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "code q={} m={} s={}", self.q(), self.m(), self.s())?;
        match self.claimed_radius {
            Some(r) => writeln!(f, " r={r}")?,
            None => writeln!(f)?,
        }
        for w in &self.words {
            writeln!(f, "{w}")?;
        }
        Ok(())
    }
}

impl FromStr for Code {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(Error::Parse { line: 1, msg: "empty input".into() })?;
        let h = parse_header(header, "code", &["q", "m", "s", "r"])?;
        let space = RtSpace::with_shape(h[0], h[1], h[2])?;
        let mut words = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            words.push(Word(parse_symbol_line(line, i + 2, space.len())?));
        }
        Code::new(space, words, Some(h[3]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoveringReport {
    pub valid: bool,
    /// Lexicographically least point with no codeword within the radius.
    pub first_uncovered: Option<Word>,
    pub points_checked: u64,
}

impl fmt::Display for CoveringReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "valid: {}", if self.valid { "yes" } else { "no" })?;
        writeln!(f, "points checked: {}", self.points_checked)?;
        if let Some(w) = &self.first_uncovered {
            writeln!(f, "first uncovered: {w}")?;
        }
        Ok(())
    }
}

pub fn verify_covering(code: &Code, r: usize) -> Result<CoveringReport> {
    verify_covering_with_budget(code, r, DEFAULT_POINT_BUDGET)
}

/// Checks every point of the space against the code.
pub fn verify_covering_with_budget(code: &Code, r: usize, budget: u64) -> Result<CoveringReport> {
    let space = code.space();
    let n = space.point_count_within(budget)?;
    let s = space.poset().s();
    let flat: Vec<u8> = code.words().iter().flat_map(|w| w.0.iter().copied()).collect();
    let len = space.len();
    let uncovered = (0..n)
        .into_par_iter()
        .map_init(
            || vec![0u8; len],
            |buf, i| {
                space.fill_word(i, buf);
                let hit = flat.chunks_exact(len).any(|c| within_distance(s, buf, c, r));
                (!hit).then_some(i)
            },
        )
        .find_first(Option::is_some)
        .flatten();
    Ok(CoveringReport {
        valid: uncovered.is_none(),
        first_uncovered: uncovered.map(|i| space.word_at(i)),
        points_checked: n,
    })
}

/// Checks `samples` uniformly random points (ChaCha8 seeded with `seed`).
///
/// Not a proof of covering: `valid` only means no sampled point was missed.
/// Useful for spaces past the exhaustive budget.
pub fn spot_check_covering(code: &Code, r: usize, samples: u64, seed: u64) -> Result<CoveringReport> {
    let space = code.space();
    let s = space.poset().s();
    let q = space.q() as u8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut point = vec![0u8; space.len()];
    for _ in 0..samples {
        point.iter_mut().for_each(|x| *x = rng.gen_range(0..q));
        if !code.words().iter().any(|c| within_distance(s, &point, &c.0, r)) {
            return Ok(CoveringReport { valid: false, first_uncovered: Some(Word(point)), points_checked: samples });
        }
    }
    Ok(CoveringReport { valid: true, first_uncovered: None, points_checked: samples })
}

fn check_radius(m: usize, s: usize, r: usize) -> Result<()> {
    if r == 0 || r >= m * s {
        return invalid(format!("radius {r} outside 1..{}", m * s));
    }
    Ok(())
}

/// All words vanishing on the bottom-filled ideal of size `r`: `q^{ms-r}` words.
pub fn trivial_covering(q: usize, m: usize, s: usize, r: usize) -> Result<Code> {
    let space = RtSpace::with_shape(q, m, s)?;
    check_radius(m, s, r)?;
    let ideal = space.poset().bottom_filled_ideal(r)?;
    let free = ideal.complement().columns();
    let count = (q as u64)
        .checked_pow(free.len() as u32)
        .filter(|&c| c <= MAX_CODE_WORDS)
        .ok_or_else(|| Error::ResourceLimit(format!("{q}^{} codewords", free.len())))?;
    let free_space = RtSpace::with_shape(q, 1, free.len())?;
    let words = (0..count)
        .map(|i| {
            let vals = free_space.word_at(i);
            let mut w = vec![0u8; space.len()];
            for (&col, &x) in free.iter().zip(&vals.0) {
                w[col] = x;
            }
            Word(w)
        })
        .collect();
    Code::new(space, words, Some(r))
}

/// The `q` constant words; an `(ms-t)`-covering whenever `m >= (t-1)q + 1`.
pub fn constant_code(q: usize, m: usize, s: usize, r: usize) -> Result<Code> {
    let space = RtSpace::with_shape(q, m, s)?;
    let words = (0..q).map(|x| Word(vec![x as u8; space.len()])).collect();
    Code::new(space, words, Some(r))
}

/// Hamming-space code of length `(t-1)q` and radius `(t-1)q - t` built from a
/// binary CA of strength `t`: the constant words `0..q-2` and every CA row
/// with `0 -> q-2`, `1 -> q-1`.
///
/// With `ca = None` the Kleitman-Spencer CA is used for `t = 2`; larger
/// strengths need an array supplied by the caller.
pub fn surjective_hamming_code(q: usize, t: usize, ca: Option<&OrderedArray>) -> Result<Code> {
    if q < 2 || t < 2 {
        return invalid(format!("need q >= 2 and t >= 2, got q={q} t={t}"));
    }
    let m = (t - 1) * q;
    let built;
    let ca = match ca {
        Some(a) => a,
        None if t == 2 => {
            built = kleitman_spencer_ca(m)?;
            &built
        }
        None => {
            return Err(Error::Dependency(format!("no binary CA of strength {t} on {m} columns supplied")));
        }
    };
    if ca.s() != 1 || ca.alphabet() != 2 || ca.m() != m || ca.strength() != t {
        return invalid(format!(
            "expected a binary CA(N;{t},{m},2), got t={} m={} s={} v={}",
            ca.strength(),
            ca.m(),
            ca.s(),
            ca.alphabet()
        ));
    }
    let space = RtSpace::with_shape(q, m, 1)?;
    let mut words: Vec<Word> = (0..q - 2).map(|x| Word(vec![x as u8; m])).collect();
    words.extend(ca.row_iter().map(|row| Word(row.iter().map(|&b| (q - 2) as u8 + b).collect())));
    Code::dedup(space, words, Some(m - t))
}

/// Places a verified Hamming covering on the block maxima of `[m x s]`.
pub fn lift_hamming_to_rt(h: &Code, s: usize) -> Result<Code> {
    if h.s() != 1 {
        return invalid("lift expects a code in a Hamming space (s = 1)");
    }
    let r = h.claimed_radius().ok_or_else(|| Error::Dependency("code has no claimed radius".into()))?;
    if !verify_covering(h, r)?.valid {
        return Err(Error::Dependency(format!("input is not an {r}-covering")));
    }
    let m = h.m();
    let space = RtSpace::with_shape(h.q(), m, s)?;
    let words = h
        .words()
        .iter()
        .map(|w| {
            let mut out = vec![0u8; m * s];
            for (b, &x) in w.0.iter().enumerate() {
                out[b * s + s - 1] = x;
            }
            Word(out)
        })
        .collect();
    Code::new(space, words, Some(r + m * (s - 1)))
}

/// Words `x*q + y` for every row `x` of an OCA of strength `ms-R` over `Z_v`
/// and every word `y` of an `R`-covering over `Z_q`.
pub fn product_code(a: &OrderedArray, h: &Code) -> Result<Code> {
    let r = h.claimed_radius().ok_or_else(|| Error::InvalidArgument("code has no claimed radius".into()))?;
    if a.m() != h.m() || a.s() != h.s() {
        return invalid(format!("array shape [{}x{}] differs from code shape [{}x{}]", a.m(), a.s(), h.m(), h.s()));
    }
    let n = h.m() * h.s();
    if a.strength() + r != n {
        return invalid(format!("array strength {} should be ms - R = {}", a.strength(), n.saturating_sub(r)));
    }
    let q = h.q();
    let big = a.alphabet() * q;
    let space = RtSpace::with_shape(big, h.m(), h.s())?;
    let mut words = Vec::with_capacity(a.rows() * h.len());
    for x in a.row_iter() {
        for y in h.words() {
            words.push(Word(x.iter().zip(&y.0).map(|(&xi, &yi)| (xi as usize * q + yi as usize) as u8).collect()));
        }
    }
    Code::dedup(space, words, Some(r))
}

fn lex_tuples(v: usize, len: usize) -> impl Iterator<Item = Vec<u8>> {
    let n = v.pow(len as u32);
    (0..n).map(move |mut i| {
        let mut out = vec![0u8; len];
        for x in out.iter_mut().rev() {
            *x = (i % v) as u8;
            i /= v;
        }
        out
    })
}

/// `s`-covering of `Z_v^{2s}` over `[2 x s]` with `v^{s-2}(v^2-1)` words.
///
/// Block 0 is zero and block 1 reads `(a, b, z)` with `(a,b) != (0,0)` and
/// `z` free; when `b != 0` the pair `(a,b)` is also written at the top two
/// positions of block 0.
pub fn two_chain_code(v: usize, s: usize) -> Result<Code> {
    if s < 2 {
        return invalid(format!("two-chain code needs s >= 2, got {s}"));
    }
    let space = RtSpace::with_shape(v, 2, s)?;
    let mut words = Vec::new();
    for z in lex_tuples(v, s - 2) {
        for pair in lex_tuples(v, 2) {
            let (a, b) = (pair[0], pair[1]);
            if a == 0 && b == 0 {
                continue;
            }
            let mut w = vec![0u8; 2 * s];
            w[s] = a;
            w[s + 1] = b;
            w[s + 2..].copy_from_slice(&z);
            if b != 0 {
                w[s - 2] = a;
                w[s - 1] = b;
            }
            words.push(Word(w));
        }
    }
    Code::new(space, words, Some(s))
}

/// `(2s-1)`-covering of `Z_v^{3s}` over `[3 x s]` with `v(v^s-1)` words.
///
/// Block 0 is zero, block 1 is zero except its top symbol `z`, block 2 is any
/// nonzero vector; when block 2 has a nonzero top it is copied into block 0.
pub fn three_chain_code(v: usize, s: usize) -> Result<Code> {
    if s < 2 {
        return invalid(format!("three-chain code needs s >= 2, got {s}"));
    }
    let space = RtSpace::with_shape(v, 3, s)?;
    let mut words = Vec::new();
    for z in 0..v as u8 {
        for last in lex_tuples(v, s) {
            if last.iter().all(|&x| x == 0) {
                continue;
            }
            let mut w = vec![0u8; 3 * s];
            w[2 * s - 1] = z;
            w[2 * s..].copy_from_slice(&last);
            if last[s - 1] != 0 {
                w[..s].copy_from_slice(&last);
            }
            words.push(Word(w));
        }
    }
    Code::new(space, words, Some(2 * s - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::oca_depth2_from_ca;
    use crate::metric::{rt_distance, sphere_volume};
    use num_bigint::BigUint;
    use num_integer::Integer;

    fn w(s: &str) -> Word {
        Word(s.bytes().map(|b| b - b'0').collect())
    }

    fn sphere_floor(code: &Code, r: usize) -> BigUint {
        let total = BigUint::from(code.q()).pow((code.m() * code.s()) as u32);
        total.div_ceil(&sphere_volume(code.q(), code.m(), code.s(), r).unwrap())
    }

    /// Valid at its radius, at radius+1, and no smaller than the sphere bound.
    fn assert_covering(code: &Code) {
        let r = code.claimed_radius().unwrap();
        let rep = verify_covering(code, r).unwrap();
        assert!(rep.valid, "uncovered {:?}", rep.first_uncovered);
        if r < code.m() * code.s() {
            assert!(verify_covering(code, r + 1).unwrap().valid);
        }
        assert!(BigUint::from(code.len()) >= sphere_floor(code, r));
    }

    #[test]
    fn whole_space_covers() {
        let space = RtSpace::with_shape(2, 2, 2).unwrap();
        let all: Vec<Word> = (0..16).map(|i| space.word_at(i)).collect();
        let c = Code::new(space, all, Some(0)).unwrap();
        for r in 0..=4 {
            assert!(verify_covering(&c, r).unwrap().valid);
        }
    }

    #[test]
    fn listed_six_words_are_not_a_three_covering() {
        let space = RtSpace::with_shape(2, 2, 3).unwrap();
        let a: Vec<Word> = ["000100", "001100", "010110", "001001", "011101", "000011"].iter().map(|x| w(x)).collect();
        let code = Code::new(space, a, Some(3)).unwrap();
        let rep = verify_covering(&code, 3).unwrap();
        assert!(!rep.valid);
        assert_eq!(rep.first_uncovered, Some(w("111010")));
        assert!(verify_covering(&code, 4).unwrap().valid);
    }

    #[test]
    fn two_chain_examples() {
        let c = two_chain_code(2, 3).unwrap();
        assert_eq!(c.len(), 6);
        let listed: Vec<String> = c.words().iter().map(|x| x.0.iter().map(u8::to_string).collect()).collect();
        assert_eq!(listed, ["001010", "000100", "011110", "001011", "000101", "011111"]);
        assert_covering(&c);
        for i in 0..c.len() {
            assert!(!verify_covering(&c.without(i), 3).unwrap().valid, "dropping word {i}");
        }
        for (v, s, size) in [(2, 2, 3), (3, 2, 8), (2, 4, 12), (3, 3, 24)] {
            let c = two_chain_code(v, s).unwrap();
            assert_eq!(c.len(), size);
            assert_eq!(c.len(), v.pow(s as u32 - 2) * (v * v - 1));
            assert_covering(&c);
        }
        assert!(two_chain_code(2, 1).is_err());
    }

    #[test]
    fn three_chain_examples() {
        for (v, s, size) in [(2, 2, 6), (2, 3, 14), (3, 2, 24), (2, 4, 30)] {
            let c = three_chain_code(v, s).unwrap();
            assert_eq!(c.len(), size);
            assert_eq!(c.len(), v * (v.pow(s as u32) - 1));
            assert_eq!(c.claimed_radius(), Some(2 * s - 1));
            assert_covering(&c);
        }
        assert!(three_chain_code(2, 1).is_err());
    }

    #[test]
    fn trivial_examples() {
        let c = trivial_covering(2, 2, 2, 2).unwrap();
        assert_eq!(c.len(), 4);
        assert_covering(&c);
        let c = trivial_covering(3, 1, 2, 1).unwrap();
        assert_eq!(c.len(), 3);
        assert_covering(&c);
        for (q, m, s, r) in [(2, 3, 2, 1), (2, 3, 2, 4), (3, 2, 3, 2), (2, 2, 3, 5)] {
            let c = trivial_covering(q, m, s, r).unwrap();
            assert_eq!(c.len(), q.pow((m * s - r) as u32));
            assert_covering(&c);
        }
        assert!(trivial_covering(2, 1, 1, 1).is_err());
        assert!(trivial_covering(2, 2, 2, 0).is_err());
    }

    #[test]
    fn surjective_examples() {
        let c = surjective_hamming_code(3, 2, None).unwrap();
        assert_eq!((c.len(), c.m(), c.s(), c.claimed_radius()), (5, 3, 1, Some(1)));
        assert_covering(&c);

        let c = surjective_hamming_code(2, 2, None).unwrap();
        assert_eq!((c.len(), c.m(), c.claimed_radius()), (4, 2, Some(0)));
        assert!(verify_covering(&c, 0).unwrap().valid);

        // a 4-row array with a repeated column is not a CA; the code comes out broken
        let fake =
            OrderedArray::new(2, 3, 1, 2, 1, vec![vec![0, 0, 0], vec![0, 0, 1], vec![1, 1, 0], vec![1, 1, 1]]).unwrap();
        let c = surjective_hamming_code(3, 2, Some(&fake)).unwrap();
        assert!(!verify_covering(&c, 1).unwrap().valid);

        assert!(matches!(surjective_hamming_code(3, 3, None), Err(Error::Dependency(_))));
    }

    #[test]
    fn surjective_strength_three_with_supplied_ca() {
        // the full factorial on 4 binary columns is trivially a strength-3 CA
        let rows: Vec<Vec<u8>> = (0..16u8).map(|i| (0..4).map(|b| (i >> (3 - b)) & 1).collect()).collect();
        let ca = OrderedArray::new(3, 4, 1, 2, 1, rows).unwrap();
        let c = surjective_hamming_code(2, 3, Some(&ca)).unwrap();
        assert_eq!((c.m(), c.claimed_radius()), (4, Some(1)));
        assert_covering(&c);
    }

    #[test]
    fn lift_examples() {
        let h = surjective_hamming_code(3, 2, None).unwrap();
        let lifted = lift_hamming_to_rt(&h, 2).unwrap();
        assert_eq!((lifted.len(), lifted.claimed_radius()), (5, Some(4)));
        assert_covering(&lifted);

        let same = lift_hamming_to_rt(&h, 1).unwrap();
        assert_eq!(same, h);

        let lifted3 = lift_hamming_to_rt(&h, 3).unwrap();
        assert_eq!(lifted3.claimed_radius(), Some(7));
        assert_covering(&lifted3);

        let broken = h.without(0);
        assert!(matches!(lift_hamming_to_rt(&broken, 2), Err(Error::Dependency(_))));
    }

    #[test]
    fn lifted_distances_count_whole_blocks() {
        let h = surjective_hamming_code(3, 2, None).unwrap();
        let lifted = lift_hamming_to_rt(&h, 3).unwrap();
        let p = lifted.space().poset();
        for (a, b) in h.words().iter().zip(lifted.words()) {
            for (c, d) in h.words().iter().zip(lifted.words()) {
                let blocks = a.0.iter().zip(&c.0).filter(|(x, y)| x != y).count();
                assert_eq!(rt_distance(p, b, d).unwrap(), 3 * blocks);
            }
        }
    }

    #[test]
    fn product_examples() {
        let a = oca_depth2_from_ca(&kleitman_spencer_ca(2).unwrap()).unwrap();
        let h = two_chain_code(2, 2).unwrap();
        let g = product_code(&a, &h).unwrap();
        assert_eq!((g.q(), g.len(), g.claimed_radius()), (4, 12, Some(2)));
        assert_covering(&g);

        // with H the whole space, any array gives the whole product space
        let space = RtSpace::with_shape(2, 2, 2).unwrap();
        let all = Code::new(space, (0..16).map(|i| space.word_at(i)).collect(), Some(2)).unwrap();
        let g = product_code(&a, &all).unwrap();
        assert!(verify_covering(&g, 2).unwrap().valid);

        // three rows cannot cover the four pairs
        let mut rows = a.to_rows();
        rows.pop();
        let short = OrderedArray::new(2, 2, 2, 2, 1, rows).unwrap();
        let g = product_code(&short, &h).unwrap();
        assert!(!verify_covering(&g, 2).unwrap().valid);

        let wrong = oca_depth2_from_ca(&kleitman_spencer_ca(3).unwrap()).unwrap();
        assert!(product_code(&wrong, &h).is_err());
    }

    #[test]
    fn code_file_round_trip() {
        let c = two_chain_code(2, 3).unwrap();
        let text = c.to_string();
        assert!(text.starts_with("code q=2 m=2 s=3 r=3\n0 0 1 0 1 0\n"));
        assert_eq!(text.parse::<Code>().unwrap(), c);
        assert!("code q=2 m=2 s=3\n".parse::<Code>().is_err());
        assert!("code q=2 m=1 s=2 r=1\n0 0\n0 0\n".parse::<Code>().is_err());
        assert!("code q=2 m=1 s=2 r=1\n0 3\n".parse::<Code>().is_err());
    }

    #[test]
    fn budget_is_enforced() {
        let c = constant_code(2, 5, 5, 20).unwrap();
        assert!(matches!(verify_covering_with_budget(&c, 20, 1 << 20), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn spot_checks() {
        let c = two_chain_code(2, 3).unwrap();
        assert!(spot_check_covering(&c, 3, 500, 0).unwrap().valid);
        let bad = c.without(0);
        let rep = spot_check_covering(&bad, 3, 500, 7).unwrap();
        assert!(!rep.valid);
        let miss = rep.first_uncovered.unwrap();
        assert!(bad.words().iter().all(|w| rt_distance(bad.space().poset(), w, &miss).unwrap() > 3));
        assert_eq!(spot_check_covering(&bad, 3, 500, 7).unwrap().first_uncovered, Some(miss));
    }

    #[test]
    fn constant_code_covers_long_spaces() {
        // m >= (t-1)q + 1 with t = 2, q = 3: m = 4, radius ms - 2
        let c = constant_code(3, 4, 2, 6).unwrap();
        assert_covering(&c);
    }
}
