//! Exact oracles by set-cover branch-and-bound, plus the greedy heuristic.
//!
//! Both covering codes and OCAs reduce to the same problem. For codes the
//! universe is the space and each candidate center covers its ball. For OCAs
//! the universe is every pair (anti-ideal J, tuple over J) and each candidate
//! row covers one tuple per anti-ideal.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::array::OrderedArray;
use crate::code::Code;
use crate::error::{invalid, Error, Result};
use crate::metric::{raw_distance, RtSpace, Word};
use crate::poset::RtPoset;

/// Cap on stored (candidate, element) incidences, counted once per direction.
pub const MAX_INCIDENCES: u64 = 1 << 24;

/// Dense bit rows speed up gain counts; they are skipped above this many bytes.
const MAX_BITMATRIX_BYTES: usize = 64 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    /// Largest universe (codes) or candidate pool (OCAs) the search accepts.
    pub max_points: u64,
    pub max_nodes: u64,
    pub time_limit: Option<Duration>,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self { max_points: 1_000_000, max_nodes: 2_000_000, time_limit: None }
    }
}

impl SearchBudget {
    pub fn with_nodes(max_nodes: u64) -> Self {
        Self { max_nodes, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.max_points == 0 || self.max_nodes == 0 || self.time_limit == Some(Duration::ZERO) {
            return invalid("search budget limits must be positive");
        }
        Ok(())
    }
}

/// Result of an exact search. When the budget ran out `exact` is false and
/// the optimum is only known to lie in `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchOutcome<W> {
    pub lower: usize,
    pub upper: usize,
    pub exact: bool,
    pub nodes: u64,
    pub witness: W,
}

impl<W> SearchOutcome<W> {
    pub fn value(&self) -> Option<usize> {
        self.exact.then_some(self.upper)
    }
}

struct SetCover {
    n_elems: usize,
    sets: Vec<Vec<u32>>,
    elem_sets: Vec<Vec<u32>>,
    /// Elements partitioned so that no candidate covers two in one group.
    groups: Option<(Vec<u32>, usize)>,
    max_set: usize,
    /// Row-major bit matrix of the sets, `stride` words per candidate.
    bits: Option<Vec<u64>>,
    stride: usize,
}

struct Cover {
    chosen: Vec<usize>,
    lower: usize,
    exact: bool,
    nodes: u64,
}

impl SetCover {
    fn new(n_elems: usize, sets: Vec<Vec<u32>>, groups: Option<(Vec<u32>, usize)>) -> Self {
        let mut elem_sets = vec![Vec::new(); n_elems];
        for (c, set) in sets.iter().enumerate() {
            for &e in set {
                elem_sets[e as usize].push(c as u32);
            }
        }
        let max_set = sets.iter().map(Vec::len).max().unwrap_or(0);
        let stride = n_elems.div_ceil(64);
        let bits = (sets.len() * stride * 8 <= MAX_BITMATRIX_BYTES).then(|| {
            let mut bits = vec![0u64; sets.len() * stride];
            for (c, set) in sets.iter().enumerate() {
                for &e in set {
                    bits[c * stride + e as usize / 64] |= 1 << (e % 64);
                }
            }
            bits
        });
        Self { n_elems, sets, elem_sets, groups, max_set, bits, stride }
    }

    /// Repeatedly takes the candidate with the largest gain, lowest index on ties.
    fn greedy(&self, forced: &[usize]) -> Vec<usize> {
        let mut covered = vec![false; self.n_elems];
        let mut left = self.n_elems;
        let mut chosen = Vec::new();
        let take = |c: usize, covered: &mut Vec<bool>, left: &mut usize| {
            for &e in &self.sets[c] {
                if !covered[e as usize] {
                    covered[e as usize] = true;
                    *left -= 1;
                }
            }
        };
        for &c in forced {
            take(c, &mut covered, &mut left);
            chosen.push(c);
        }
        let mut heap: BinaryHeap<(usize, Reverse<usize>)> =
            self.sets.iter().enumerate().map(|(c, s)| (s.len(), Reverse(c))).collect();
        while left > 0 {
            let Some((_, Reverse(c))) = heap.pop() else { break };
            let gain = self.sets[c].iter().filter(|&&e| !covered[e as usize]).count();
            if gain == 0 {
                continue;
            }
            // gains only shrink, so a fresh key still on top is the true maximum
            if heap.peek().is_some_and(|&top| top > (gain, Reverse(c))) {
                heap.push((gain, Reverse(c)));
                continue;
            }
            take(c, &mut covered, &mut left);
            chosen.push(c);
        }
        chosen.sort_unstable();
        chosen
    }

    fn solve(&self, forced: &[usize], budget: &SearchBudget, known_lower: usize) -> Cover {
        let incumbent = self.greedy(forced);
        let mut st = State::new(self, budget);
        for &c in forced {
            st.choose(self, c);
        }
        let root_lower = (forced.len() + st.lower_bound(self)).max(known_lower);
        st.best = incumbent;
        st.target = root_lower;
        if st.best.len() > root_lower {
            st.dfs(self);
        }
        let mut chosen = st.best;
        chosen.sort_unstable();
        let exact = !st.aborted || chosen.len() <= root_lower;
        Cover { lower: if exact { chosen.len() } else { root_lower }, chosen, exact, nodes: st.nodes }
    }
}

struct State<'a> {
    cover: Vec<u32>,
    open: Vec<u64>,
    avail: Vec<u32>,
    forbidden: Vec<bool>,
    group_left: Vec<u32>,
    uncovered: usize,
    chosen: Vec<usize>,
    best: Vec<usize>,
    target: usize,
    nodes: u64,
    aborted: bool,
    budget: &'a SearchBudget,
    start: Instant,
}

impl<'a> State<'a> {
    fn new(sc: &SetCover, budget: &'a SearchBudget) -> Self {
        let mut group_left = Vec::new();
        if let Some((of, n)) = &sc.groups {
            group_left = vec![0; *n];
            for &g in of {
                group_left[g as usize] += 1;
            }
        }
        Self {
            cover: vec![0; sc.n_elems],
            open: {
                let mut open = vec![u64::MAX; sc.stride];
                if !sc.n_elems.is_multiple_of(64) {
                    open[sc.stride - 1] = (1 << (sc.n_elems % 64)) - 1;
                }
                open
            },
            avail: sc.elem_sets.iter().map(|v| v.len() as u32).collect(),
            forbidden: vec![false; sc.sets.len()],
            group_left,
            uncovered: sc.n_elems,
            chosen: Vec::new(),
            best: Vec::new(),
            target: 0,
            nodes: 0,
            aborted: false,
            budget,
            start: Instant::now(),
        }
    }

    fn choose(&mut self, sc: &SetCover, c: usize) {
        for &e in &sc.sets[c] {
            let e = e as usize;
            self.cover[e] += 1;
            if self.cover[e] == 1 {
                self.uncovered -= 1;
                self.open[e / 64] &= !(1 << (e % 64));
                if let Some((of, _)) = &sc.groups {
                    self.group_left[of[e] as usize] -= 1;
                }
            }
        }
        self.chosen.push(c);
    }

    fn unchoose(&mut self, sc: &SetCover, c: usize) {
        for &e in &sc.sets[c] {
            let e = e as usize;
            self.cover[e] -= 1;
            if self.cover[e] == 0 {
                self.uncovered += 1;
                self.open[e / 64] |= 1 << (e % 64);
                if let Some((of, _)) = &sc.groups {
                    self.group_left[of[e] as usize] += 1;
                }
            }
        }
        self.chosen.pop();
    }

    fn set_forbidden(&mut self, sc: &SetCover, c: usize, on: bool) {
        self.forbidden[c] = on;
        for &e in &sc.sets[c] {
            if on {
                self.avail[e as usize] -= 1;
            } else {
                self.avail[e as usize] += 1;
            }
        }
    }

    fn gain(&self, sc: &SetCover, c: usize) -> usize {
        match &sc.bits {
            Some(bits) => bits[c * sc.stride..(c + 1) * sc.stride]
                .iter()
                .zip(&self.open)
                .map(|(a, b)| (a & b).count_ones() as usize)
                .sum(),
            None => sc.sets[c].iter().filter(|&&e| self.cover[e as usize] == 0).count(),
        }
    }

    fn lower_bound(&self, sc: &SetCover) -> usize {
        if self.uncovered == 0 {
            return 0;
        }
        let by_size = self.uncovered.div_ceil(sc.max_set.max(1));
        let by_group = self.group_left.iter().copied().max().unwrap_or(0) as usize;
        by_size.max(by_group)
    }

    fn out_of_budget(&mut self) -> bool {
        if self.nodes >= self.budget.max_nodes {
            self.aborted = true;
        } else if let Some(limit) = self.budget.time_limit {
            if self.nodes.is_multiple_of(1024) && self.start.elapsed() > limit {
                self.aborted = true;
            }
        }
        self.aborted
    }

    fn dfs(&mut self, sc: &SetCover) {
        if self.aborted || self.best.len() <= self.target {
            return;
        }
        if self.uncovered == 0 {
            if self.chosen.len() < self.best.len() {
                self.best = self.chosen.clone();
            }
            return;
        }
        if self.chosen.len() + self.lower_bound(sc) >= self.best.len() || self.out_of_budget() {
            return;
        }
        self.nodes += 1;

        // branch on the uncovered element with the fewest remaining candidates
        let mut pick = usize::MAX;
        let mut fewest = u32::MAX;
        for e in 0..sc.n_elems {
            if self.cover[e] == 0 && self.avail[e] < fewest {
                fewest = self.avail[e];
                pick = e;
                if fewest == 0 {
                    return;
                }
            }
        }
        let mut options: Vec<(usize, usize)> = sc.elem_sets[pick]
            .iter()
            .map(|&c| c as usize)
            .filter(|&c| !self.forbidden[c])
            .map(|c| (self.gain(sc, c), c))
            .collect();
        options.sort_unstable_by_key(|&(gain, c)| (Reverse(gain), c));

        let mut banned = Vec::with_capacity(options.len());
        for (_, c) in options {
            self.choose(sc, c);
            self.dfs(sc);
            self.unchoose(sc, c);
            if self.aborted || self.best.len() <= self.target {
                break;
            }
            // later siblings never reuse an earlier choice
            self.set_forbidden(sc, c, true);
            banned.push(c);
        }
        for c in banned {
            self.set_forbidden(sc, c, false);
        }
    }
}

fn check_incidences(rows: u64, per_row: u64) -> Result<()> {
    match rows.checked_mul(per_row) {
        Some(n) if n <= MAX_INCIDENCES => Ok(()),
        _ => Err(Error::ResourceLimit(format!("{rows} x {per_row} incidences exceed {MAX_INCIDENCES}"))),
    }
}

/// Balls of radius `r` around every point, as index lists.
fn ball_system(space: &RtSpace, r: usize, budget: &SearchBudget) -> Result<SetCover> {
    let n = space.point_count_within(budget.max_points)?;
    let s = space.poset().s();
    let len = space.len();
    let q = space.q() as u64;
    let zero = vec![0u8; len];
    let offsets: Vec<Word> = (0..n).map(|i| space.word_at(i)).filter(|w| raw_distance(s, &w.0, &zero) <= r).collect();
    check_incidences(n, offsets.len() as u64)?;
    let mut buf = vec![0u8; len];
    let sets = (0..n)
        .map(|c| {
            space.fill_word(c, &mut buf);
            offsets
                .iter()
                .map(|d| buf.iter().zip(&d.0).fold(0u64, |acc, (&a, &b)| acc * q + (a as u64 + b as u64) % q) as u32)
                .collect()
        })
        .collect();
    Ok(SetCover::new(n as usize, sets, None))
}

fn code_from(space: RtSpace, chosen: &[usize], r: usize) -> Result<Code> {
    let words = chosen.iter().map(|&c| space.word_at(c as u64)).collect();
    Code::new(space, words, Some(r))
}

pub fn greedy_covering(q: usize, m: usize, s: usize, r: usize) -> Result<Code> {
    greedy_covering_with_budget(q, m, s, r, &SearchBudget::default())
}

pub fn greedy_covering_with_budget(q: usize, m: usize, s: usize, r: usize, budget: &SearchBudget) -> Result<Code> {
    budget.validate()?;
    let space = RtSpace::with_shape(q, m, s)?;
    if r > space.len() {
        return invalid(format!("radius {r} exceeds word length {}", space.len()));
    }
    let sc = ball_system(&space, r, budget)?;
    let chosen = sc.greedy(&[]);
    code_from(space, &chosen, r)
}

/// The smallest `R`-covering of `Z_q^{ms}`, or an interval when the budget runs out.
pub fn exact_covering_number(
    q: usize,
    m: usize,
    s: usize,
    r: usize,
    budget: &SearchBudget,
) -> Result<SearchOutcome<Code>> {
    budget.validate()?;
    let space = RtSpace::with_shape(q, m, s)?;
    if r > space.len() {
        return invalid(format!("radius {r} exceeds word length {}", space.len()));
    }
    if r > 0 && r < s {
        // levels above r never differ inside a ball, so the space splits into
        // q^{m(s-r)} independent copies of the depth-r problem
        space.point_count_within(budget.max_points)?;
        let inner = exact_covering_number(q, m, r, r, budget)?;
        let copies = q.pow((m * (s - r)) as u32);
        let top_space = RtSpace::with_shape(q, m, s - r)?;
        let mut words = Vec::with_capacity(copies * inner.upper);
        for top in 0..copies as u64 {
            let top = top_space.word_at(top);
            for w in inner.witness.words() {
                let mut out = Vec::with_capacity(m * s);
                for b in 0..m {
                    out.extend_from_slice(&w.0[b * r..(b + 1) * r]);
                    out.extend_from_slice(&top.0[b * (s - r)..(b + 1) * (s - r)]);
                }
                words.push(Word(out));
            }
        }
        words.sort_unstable();
        return Ok(SearchOutcome {
            lower: copies * inner.lower,
            upper: copies * inner.upper,
            exact: inner.exact,
            nodes: inner.nodes,
            witness: Code::new(space, words, Some(r))?,
        });
    }
    let sc = ball_system(&space, r, budget)?;
    // every covering translates to one containing the zero word
    let found = sc.solve(&[0], budget, 1);
    Ok(SearchOutcome {
        lower: found.lower,
        upper: found.chosen.len(),
        exact: found.exact,
        nodes: found.nodes,
        witness: code_from(space, &found.chosen, r)?,
    })
}

/// The smallest `N` admitting an `OCA(N; t, m, s, v)`, or an interval.
pub fn exact_ocan(
    t: usize,
    m: usize,
    s: usize,
    v: usize,
    budget: &SearchBudget,
) -> Result<SearchOutcome<OrderedArray>> {
    budget.validate()?;
    let poset = RtPoset::new(m, s)?;
    if t < 2 || t > poset.len() || s > t || !(2..=255).contains(&v) {
        return invalid(format!("need 2 <= t <= ms, s <= t, 2 <= v <= 255; got t={t} m={m} s={s} v={v}"));
    }
    let rows = RtSpace::with_shape(v, m, s)?;
    let n_rows = rows.point_count_within(budget.max_points)?;
    let anti = poset.anti_ideals(t)?;
    check_incidences(n_rows, anti.len() as u64)?;
    let tuples = v.pow(t as u32);
    let cols: Vec<Vec<usize>> = anti.iter().map(|a| a.columns()).collect();
    let mut buf = vec![0u8; poset.len()];
    let sets = (0..n_rows)
        .map(|i| {
            rows.fill_word(i, &mut buf);
            cols.iter()
                .enumerate()
                .map(|(j, cs)| (j * tuples + cs.iter().fold(0usize, |acc, &c| acc * v + buf[c] as usize)) as u32)
                .collect()
        })
        .collect();
    let n_elems = anti.len() * tuples;
    let groups = (0..n_elems).map(|e| (e / tuples) as u32).collect();
    let sc = SetCover::new(n_elems, sets, Some((groups, anti.len())));
    // relabeling symbols column by column makes any row the zero row
    let found = sc.solve(&[0], budget, tuples);
    let witness_rows = found.chosen.iter().map(|&c| rows.word_at(c as u64).0).collect();
    Ok(SearchOutcome {
        lower: found.lower,
        upper: found.chosen.len(),
        exact: found.exact,
        nodes: found.nodes,
        witness: OrderedArray::new(t, m, s, v, 1, witness_rows)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::verify_oca;
    use crate::code::verify_covering;
    use crate::metric::sphere_volume;
    use num_bigint::BigUint;
    use num_integer::Integer;

    fn exact(q: usize, m: usize, s: usize, r: usize) -> SearchOutcome<Code> {
        let out = exact_covering_number(q, m, s, r, &SearchBudget::default()).unwrap();
        assert!(verify_covering(&out.witness, r).unwrap().valid);
        assert_eq!(out.witness.len(), out.upper);
        out
    }

    #[test]
    fn small_exact_values() {
        assert_eq!(exact(2, 1, 2, 1).value(), Some(2));
        assert_eq!(exact(2, 2, 2, 2).value(), Some(3));
        assert_eq!(exact(3, 1, 2, 1).value(), Some(3));
        assert_eq!(exact(2, 2, 3, 3).value(), Some(6));
        for (q, m, s) in [(2, 2, 2), (3, 2, 1), (2, 1, 3)] {
            assert_eq!(exact(q, m, s, m * s).value(), Some(1));
        }
        assert_eq!(exact(2, 1, 3, 0).value(), Some(8));
        // R < s splits into copies: 9 * K_3(2,1) and 16 * K_2(2,1)
        assert_eq!(exact(3, 2, 2, 1).value(), Some(27));
        assert_eq!(exact(2, 2, 3, 1).value(), Some(32));
    }

    #[test]
    fn hamming_values() {
        // s = 1 is the Hamming space; these are the classical K_q(n, 1)
        for (q, n, k) in [(2, 3, 2), (2, 4, 4), (2, 5, 7), (3, 2, 3), (3, 3, 5)] {
            assert_eq!(exact(q, n, 1, 1).value(), Some(k), "K_{q}({n},1)");
        }
    }

    #[test]
    fn exact_lies_between_sphere_and_trivial() {
        for (q, m, s) in [(2, 2, 2), (2, 3, 2), (3, 2, 2), (2, 2, 3)] {
            for r in 1..m * s {
                let out = exact(q, m, s, r);
                let total = BigUint::from(q).pow((m * s) as u32);
                let floor = total.div_ceil(&sphere_volume(q, m, s, r).unwrap());
                let k = BigUint::from(out.value().unwrap());
                assert!(floor <= k && k <= BigUint::from(q).pow((m * s - r) as u32));
            }
        }
    }

    #[test]
    fn greedy_examples() {
        let g = greedy_covering(2, 2, 2, 2).unwrap();
        assert!(g.len() <= 4 && verify_covering(&g, 2).unwrap().valid);
        assert_eq!(greedy_covering(2, 1, 2, 2).unwrap().len(), 1);
        let g = greedy_covering(3, 1, 2, 1).unwrap();
        assert_eq!(g.len(), 3);
        assert!(verify_covering(&g, 1).unwrap().valid);
        // lowest index wins ties, so the zero word comes first
        assert_eq!(g.words()[0], Word::zero(2));
    }

    #[test]
    fn ocan_examples() {
        for (t, m, s, n) in [(2, 3, 1, 4), (2, 3, 2, 4), (2, 2, 2, 4), (2, 4, 1, 5), (3, 2, 2, 8)] {
            let out = exact_ocan(t, m, s, 2, &SearchBudget::default()).unwrap();
            assert_eq!(out.value(), Some(n), "OCAN({t},{m},{s},2)");
            assert!(verify_oca(&out.witness).valid);
            assert_eq!(out.witness.row(0), &vec![0u8; m * s][..]);
        }
        assert!(exact_ocan(3, 1, 2, 2, &SearchBudget::default()).is_err());
        assert!(exact_ocan(2, 2, 3, 2, &SearchBudget::default()).is_err());
    }

    #[test]
    fn ternary_ocan() {
        let out = exact_ocan(2, 2, 1, 3, &SearchBudget::default()).unwrap();
        assert_eq!(out.value(), Some(9));
    }

    #[test]
    fn node_cap_gives_interval() {
        let out = exact_covering_number(2, 6, 1, 1, &SearchBudget::with_nodes(10)).unwrap();
        assert!(!out.exact);
        assert!(out.lower < out.upper);
        assert_eq!(out.value(), None);
        assert!(verify_covering(&out.witness, 1).unwrap().valid);
        // K_2(6,1) = 12
        assert!(out.lower <= 12 && 12 <= out.upper);
        assert_eq!(exact(2, 6, 1, 1).value(), Some(12));
    }

    #[test]
    fn deterministic() {
        let budget = SearchBudget::with_nodes(500);
        let a = exact_covering_number(2, 3, 2, 2, &budget).unwrap();
        let b = exact_covering_number(2, 3, 2, 2, &budget).unwrap();
        assert_eq!(a, b);
        let a = exact_ocan(3, 3, 2, 2, &budget).unwrap();
        let b = exact_ocan(3, 3, 2, 2, &budget).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn guards() {
        let tiny = SearchBudget { max_points: 100, ..SearchBudget::default() };
        assert!(matches!(exact_covering_number(2, 4, 2, 2, &tiny), Err(Error::ResourceLimit(_))));
        assert!(matches!(exact_ocan(2, 4, 2, 2, &tiny), Err(Error::ResourceLimit(_))));
        let zero = SearchBudget { max_nodes: 0, ..SearchBudget::default() };
        assert!(exact_covering_number(2, 1, 2, 1, &zero).is_err());
        assert!(exact_covering_number(2, 1, 2, 3, &SearchBudget::default()).is_err());
    }
}
