//! The poset `[m x s]`: `m` disjoint chains of length `s`.
//!
//! Labels run `1..=m*s`; block `i` (0-based) holds labels `i*s+1 ..= (i+1)*s`
//! ordered bottom to top. Down-sets are stored as one height per block and
//! up-sets as one depth per block, which is all the structure a disjoint
//! union of chains has.

use num_bigint::{BigInt, BigUint};
use num_integer::binomial;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RtPoset {
    m: usize,
    s: usize,
}

impl RtPoset {
    pub fn new(m: usize, s: usize) -> Result<Self> {
        if m == 0 || s == 0 {
            return invalid(format!("poset shape must be positive, got m={m} s={s}"));
        }
        Ok(Self { m, s })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn s(&self) -> usize {
        self.s
    }

    /// Number of elements, `m*s`.
    pub fn len(&self) -> usize {
        self.m * self.s
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `(block, height)` of a 1-based label, heights counted from 1 at the bottom.
    pub fn locate(&self, label: usize) -> Result<(usize, usize)> {
        if label == 0 || label > self.len() {
            return invalid(format!("label {label} outside 1..={}", self.len()));
        }
        Ok(((label - 1) / self.s, (label - 1) % self.s + 1))
    }

    pub fn label(&self, block: usize, height: usize) -> usize {
        debug_assert!(block < self.m && (1..=self.s).contains(&height));
        block * self.s + height
    }

    /// 0-based column index of `(block, height)`.
    pub fn column(&self, block: usize, height: usize) -> usize {
        self.label(block, height) - 1
    }

    /// Smallest ideal containing every label in `labels`.
    pub fn generated_ideal<I>(&self, labels: I) -> Result<Ideal>
    where
        I: IntoIterator<Item = usize>,
    {
        let mut heights = vec![0; self.m];
        for label in labels {
            let (b, h) = self.locate(label)?;
            heights[b] = heights[b].max(h);
        }
        Ok(Ideal { heights, s: self.s })
    }

    /// All anti-ideals of size `t`, in lexicographic order of depth vectors.
    pub fn anti_ideals(&self, t: usize) -> Result<Vec<AntiIdeal>> {
        if t > self.len() {
            return invalid(format!("anti-ideal size {t} exceeds poset size {}", self.len()));
        }
        Ok(bounded_compositions(t, self.m, self.s).into_iter().map(|depths| AntiIdeal { depths, s: self.s }).collect())
    }

    /// All ideals of size `size`, in lexicographic order of height vectors.
    pub fn ideals(&self, size: usize) -> Result<Vec<Ideal>> {
        if size > self.len() {
            return invalid(format!("ideal size {size} exceeds poset size {}", self.len()));
        }
        Ok(bounded_compositions(size, self.m, self.s).into_iter().map(|heights| Ideal { heights, s: self.s }).collect())
    }

    /// The ideal of size `size` obtained by filling blocks bottom-up, block 0 first.
    pub fn bottom_filled_ideal(&self, size: usize) -> Result<Ideal> {
        if size > self.len() {
            return invalid(format!("ideal size {size} exceeds poset size {}", self.len()));
        }
        let mut left = size;
        let heights = (0..self.m)
            .map(|_| {
                let h = left.min(self.s);
                left -= h;
                h
            })
            .collect();
        Ok(Ideal { heights, s: self.s })
    }
}

/// Down-set: the bottom `heights[i]` elements of every block `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Ideal {
    heights: Vec<usize>,
    s: usize,
}

impl Ideal {
    pub fn from_heights(poset: &RtPoset, heights: Vec<usize>) -> Result<Self> {
        if heights.len() != poset.m() || heights.iter().any(|&h| h > poset.s()) {
            return invalid(format!("height vector {heights:?} does not fit [{}x{}]", poset.m(), poset.s()));
        }
        Ok(Self { heights, s: poset.s() })
    }

    pub fn heights(&self) -> &[usize] {
        &self.heights
    }

    pub fn size(&self) -> usize {
        self.heights.iter().sum()
    }

    pub fn maximal_count(&self) -> usize {
        self.heights.iter().filter(|&&h| h > 0).count()
    }

    pub fn contains(&self, poset: &RtPoset, label: usize) -> bool {
        match poset.locate(label) {
            Ok((b, h)) => b < self.heights.len() && h <= self.heights[b],
            Err(_) => false,
        }
    }

    pub fn labels(&self) -> Vec<usize> {
        let s = self.s;
        self.heights.iter().enumerate().flat_map(|(b, &h)| (1..=h).map(move |k| b * s + k)).collect()
    }

    pub fn complement(&self) -> AntiIdeal {
        AntiIdeal { depths: self.heights.iter().map(|&h| self.s - h).collect(), s: self.s }
    }
}

/// Up-set: the top `depths[i]` elements of every block `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AntiIdeal {
    depths: Vec<usize>,
    s: usize,
}

impl AntiIdeal {
    pub fn from_depths(poset: &RtPoset, depths: Vec<usize>) -> Result<Self> {
        if depths.len() != poset.m() || depths.iter().any(|&d| d > poset.s()) {
            return invalid(format!("depth vector {depths:?} does not fit [{}x{}]", poset.m(), poset.s()));
        }
        Ok(Self { depths, s: poset.s() })
    }

    pub fn depths(&self) -> &[usize] {
        &self.depths
    }

    pub fn size(&self) -> usize {
        self.depths.iter().sum()
    }

    /// Labels in increasing order.
    pub fn labels(&self) -> Vec<usize> {
        let s = self.s;
        self.depths.iter().enumerate().flat_map(|(b, &d)| (s - d + 1..=s).map(move |k| b * s + k)).collect()
    }

    /// 0-based column indices in increasing order.
    pub fn columns(&self) -> Vec<usize> {
        self.labels().into_iter().map(|l| l - 1).collect()
    }

    pub fn complement(&self) -> Ideal {
        Ideal { heights: self.depths.iter().map(|&d| self.s - d).collect(), s: self.s }
    }
}

/// Vectors of `parts` integers in `0..=cap` summing to `total`, lexicographic order.
fn bounded_compositions(total: usize, parts: usize, cap: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, idx: usize, parts: usize, cap: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if idx == parts {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let room = (parts - idx - 1) * cap;
        let lo = left.saturating_sub(room);
        let hi = left.min(cap);
        for d in lo..=hi {
            cur.push(d);
            rec(left - d, idx + 1, parts, cap, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if total <= parts * cap {
        rec(total, 0, parts, cap, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

/// Number of compositions of `total` into `parts` parts, each in `1..=cap`.
///
/// Inclusion-exclusion over the parts that overflow `cap`:
/// `sum_k (-1)^k C(parts,k) C(total - k*cap - 1, parts - 1)`.
pub fn bounded_composition_count(total: usize, parts: usize, cap: usize) -> BigUint {
    if parts == 0 {
        return if total == 0 { BigUint::from(1u8) } else { BigUint::zero() };
    }
    let mut acc = BigInt::zero();
    for k in 0..=parts {
        let Some(rest) = total.checked_sub(k * cap + 1) else { break };
        if rest + 1 < parts {
            break;
        }
        let term = BigInt::from(binomial(BigUint::from(parts), BigUint::from(k)))
            * BigInt::from(binomial(BigUint::from(rest), BigUint::from(parts - 1)));
        if k % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    debug_assert!(!acc.is_negative());
    acc.to_biguint().unwrap_or_default()
}

/// Number of ideals of `[m x s]` with `i` elements and exactly `j` maximal elements.
pub fn omega_count(m: usize, s: usize, i: usize, j: usize) -> Result<BigUint> {
    if m == 0 || s == 0 {
        return invalid(format!("poset shape must be positive, got m={m} s={s}"));
    }
    if i == 0 || i > m * s {
        return invalid(format!("ideal size {i} outside 1..={}", m * s));
    }
    if j == 0 || j > m.min(i) {
        return invalid(format!("maximal count {j} outside 1..={}", m.min(i)));
    }
    Ok(binomial(BigUint::from(m), BigUint::from(j)) * bounded_composition_count(i, j, s))
}

/// `omega_count` as a machine integer, for callers that know it fits.
pub fn omega_count_u64(m: usize, s: usize, i: usize, j: usize) -> Result<u64> {
    omega_count(m, s, i, j)?.to_u64().ok_or_else(|| crate::Error::ResourceLimit("omega count exceeds u64".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn brute_omega(m: usize, s: usize, i: usize, j: usize) -> u64 {
        let mut count = 0;
        let mut h = vec![0usize; m];
        loop {
            if h.iter().sum::<usize>() == i && h.iter().filter(|&&x| x > 0).count() == j {
                count += 1;
            }
            let mut k = 0;
            while k < m && h[k] == s {
                h[k] = 0;
                k += 1;
            }
            if k == m {
                break;
            }
            h[k] += 1;
        }
        count
    }

    #[test]
    fn generated_ideal_examples() {
        let p = RtPoset::new(2, 2).unwrap();
        let i = p.generated_ideal([2]).unwrap();
        assert_eq!(i.heights(), &[2, 0]);
        assert_eq!(i.size(), 2);
        assert_eq!(p.generated_ideal([]).unwrap().size(), 0);

        let p = RtPoset::new(4, 2).unwrap();
        let i = p.generated_ideal([1, 4, 6]).unwrap();
        assert_eq!(i.heights(), &[1, 2, 2, 0]);
        assert_eq!(i.size(), 5);
        // membership brute force: the closure is exactly {1,3,4,5,6}
        let members: Vec<usize> = (1..=8).filter(|&l| i.contains(&p, l)).collect();
        assert_eq!(members, vec![1, 3, 4, 5, 6]);
        assert_eq!(i.labels(), members);
    }

    #[test]
    fn generated_ideal_rejects_bad_label() {
        let p = RtPoset::new(2, 2).unwrap();
        assert!(p.generated_ideal([5]).is_err());
        assert!(p.generated_ideal([0]).is_err());
    }

    #[test]
    fn anti_ideals_of_four_by_two() {
        let p = RtPoset::new(4, 2).unwrap();
        let got: BTreeSet<Vec<usize>> = p.anti_ideals(2).unwrap().iter().map(|a| a.labels()).collect();
        let want: BTreeSet<Vec<usize>> =
            [[1, 2], [3, 4], [5, 6], [7, 8], [2, 4], [2, 6], [2, 8], [4, 6], [4, 8], [6, 8]]
                .iter()
                .map(|x| x.to_vec())
                .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn anti_ideal_counts() {
        let p = RtPoset::new(2, 2).unwrap();
        let empty = p.anti_ideals(0).unwrap();
        assert_eq!(empty.len(), 1);
        assert!(empty[0].labels().is_empty());
        assert_eq!(RtPoset::new(3, 2).unwrap().anti_ideals(3).unwrap().len(), 7);
        assert!(p.anti_ideals(5).is_err());
    }

    #[test]
    fn anti_ideals_are_sorted() {
        let p = RtPoset::new(3, 3).unwrap();
        let a = p.anti_ideals(4).unwrap();
        assert!(a.windows(2).all(|w| w[0].depths() < w[1].depths()));
    }

    #[test]
    fn omega_examples() {
        assert_eq!(omega_count_u64(2, 2, 2, 1).unwrap(), 2);
        assert_eq!(omega_count_u64(2, 2, 3, 2).unwrap(), 2);
        assert_eq!(omega_count_u64(2, 2, 4, 1).unwrap(), 0);
        assert!(omega_count(2, 2, 0, 1).is_err());
        assert!(omega_count(2, 2, 2, 3).is_err());
        assert!(omega_count(2, 2, 5, 1).is_err());
    }

    #[test]
    fn omega_small_chain_formula() {
        // for i <= s the count is C(m,j) C(i-1,j-1)
        for m in 1..=5usize {
            for s in 1..=5usize {
                for i in 1..=s {
                    for j in 1..=m.min(i) {
                        let want = binomial(m as u64, j as u64) * binomial(i as u64 - 1, j as u64 - 1);
                        assert_eq!(omega_count_u64(m, s, i, j).unwrap(), want);
                    }
                }
            }
        }
    }

    #[test]
    fn omega_matches_brute_force() {
        for m in 1..=6usize {
            for s in 1..=6usize {
                if m * s > 12 {
                    continue;
                }
                for i in 1..=(m * s) {
                    let mut total = 0;
                    for j in 1..=m.min(i) {
                        let w = brute_omega(m, s, i, j);
                        assert_eq!(omega_count_u64(m, s, i, j).unwrap(), w, "m={m} s={s} i={i} j={j}");
                        total += w;
                    }
                    let p = RtPoset::new(m, s).unwrap();
                    assert_eq!(p.ideals(i).unwrap().len() as u64, total);
                }
            }
        }
    }

    #[test]
    fn complement_duality() {
        for (m, s) in [(2, 2), (3, 2), (2, 3), (4, 3), (3, 4)] {
            let p = RtPoset::new(m, s).unwrap();
            for t in 0..=p.len() {
                let anti = p.anti_ideals(t).unwrap();
                let ideals = p.ideals(p.len() - t).unwrap();
                assert_eq!(anti.len(), ideals.len());
                let from_anti: BTreeSet<Ideal> = anti.iter().map(|a| a.complement()).collect();
                let direct: BTreeSet<Ideal> = ideals.iter().cloned().collect();
                assert_eq!(from_anti, direct);
                for a in &anti {
                    let c = a.complement();
                    assert_eq!(c.size(), p.len() - t);
                    assert_eq!(c.complement(), *a);
                    let mut all: Vec<usize> = a.labels();
                    all.extend(c.labels());
                    all.sort_unstable();
                    assert_eq!(all, (1..=p.len()).collect::<Vec<_>>());
                }
            }
        }
    }

    #[test]
    fn label_location_round_trip() {
        let p = RtPoset::new(3, 4).unwrap();
        for l in 1..=12 {
            let (b, h) = p.locate(l).unwrap();
            assert_eq!(p.label(b, h), l);
        }
    }

    #[test]
    fn bottom_filled() {
        let p = RtPoset::new(3, 2).unwrap();
        assert_eq!(p.bottom_filled_ideal(3).unwrap().heights(), &[2, 1, 0]);
        assert_eq!(p.bottom_filled_ideal(0).unwrap().size(), 0);
    }
}
