//! RT distance and sphere volumes.

use std::fmt;

use num_bigint::BigUint;
use num_integer::binomial;
use num_traits::{One, Pow};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::poset::{omega_count, RtPoset};

/// Default cap on the number of points any exhaustive routine will visit.
pub const DEFAULT_POINT_BUDGET: u64 = 10_000_000;

/// A word of `Z_q^{ms}`; position `j` (0-based) sits at poset label `j+1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word(pub Vec<u8>);

impl Word {
    pub fn zero(len: usize) -> Self {
        Word(vec![0; len])
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

/// `Z_q^{ms}` with the RT metric of `[m x s]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RtSpace {
    q: usize,
    poset: RtPoset,
}

impl RtSpace {
    pub fn new(q: usize, poset: RtPoset) -> Result<Self> {
        if !(2..=255).contains(&q) {
            return invalid(format!("alphabet size {q} outside 2..=255"));
        }
        Ok(Self { q, poset })
    }

    pub fn with_shape(q: usize, m: usize, s: usize) -> Result<Self> {
        Self::new(q, RtPoset::new(m, s)?)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn poset(&self) -> &RtPoset {
        &self.poset
    }

    pub fn len(&self) -> usize {
        self.poset.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `q^{ms}` if it fits in a `u64`.
    pub fn point_count(&self) -> Option<u64> {
        (self.q as u64).checked_pow(u32::try_from(self.len()).ok()?)
    }

    /// Point count, failing when it exceeds `budget`.
    pub fn point_count_within(&self, budget: u64) -> Result<u64> {
        match self.point_count() {
            Some(n) if n <= budget => Ok(n),
            _ => {
                Err(Error::ResourceLimit(format!("space {}^{} exceeds the point budget {budget}", self.q, self.len())))
            }
        }
    }

    pub fn check_word(&self, w: &Word) -> Result<()> {
        if w.len() != self.len() {
            return invalid(format!("word length {} differs from {}", w.len(), self.len()));
        }
        if let Some(&x) = w.0.iter().find(|&&x| x as usize >= self.q) {
            return invalid(format!("symbol {x} outside alphabet of size {}", self.q));
        }
        Ok(())
    }

    /// The `index`-th word in lexicographic order (position 0 most significant).
    pub fn word_at(&self, index: u64) -> Word {
        let mut w = vec![0u8; self.len()];
        self.fill_word(index, &mut w);
        Word(w)
    }

    pub(crate) fn fill_word(&self, mut index: u64, out: &mut [u8]) {
        let q = self.q as u64;
        for x in out.iter_mut().rev() {
            *x = (index % q) as u8;
            index /= q;
        }
    }

    pub fn index_of(&self, w: &Word) -> u64 {
        w.0.iter().fold(0u64, |acc, &x| acc * self.q as u64 + x as u64)
    }

    pub fn distance(&self, x: &Word, y: &Word) -> Result<usize> {
        self.check_word(x)?;
        self.check_word(y)?;
        Ok(raw_distance(self.poset.s(), &x.0, &y.0))
    }
}

/// Size of the ideal generated by the positions where `x` and `y` differ.
pub fn rt_distance(poset: &RtPoset, x: &Word, y: &Word) -> Result<usize> {
    if x.len() != poset.len() || y.len() != poset.len() {
        return invalid(format!("word lengths {} and {} do not match poset size {}", x.len(), y.len(), poset.len()));
    }
    Ok(raw_distance(poset.s(), &x.0, &y.0))
}

#[inline]
pub(crate) fn raw_distance(s: usize, x: &[u8], y: &[u8]) -> usize {
    x.chunks_exact(s)
        .zip(y.chunks_exact(s))
        .map(|(a, b)| (0..s).rev().find(|&h| a[h] != b[h]).map_or(0, |h| h + 1))
        .sum()
}

/// Same as `raw_distance`, returning early once the sum exceeds `limit`.
#[inline]
pub(crate) fn within_distance(s: usize, x: &[u8], y: &[u8], limit: usize) -> bool {
    let mut d = 0;
    for (a, b) in x.chunks_exact(s).zip(y.chunks_exact(s)) {
        if let Some(h) = (0..s).rev().find(|&h| a[h] != b[h]) {
            d += h + 1;
            if d > limit {
                return false;
            }
        }
    }
    true
}

fn check_volume_args(q: usize, m: usize, s: usize, r: usize) -> Result<()> {
    if q < 2 {
        return invalid(format!("alphabet size must be at least 2, got {q}"));
    }
    if m == 0 || s == 0 {
        return invalid(format!("poset shape must be positive, got m={m} s={s}"));
    }
    if r > m * s {
        return invalid(format!("radius {r} exceeds m*s = {}", m * s));
    }
    Ok(())
}

/// `|B(x,R)|` in `Z_q^{ms}`: `1 + sum_i sum_j q^{i-j} (q-1)^j Omega_j(i)`.
pub fn sphere_volume(q: usize, m: usize, s: usize, r: usize) -> Result<BigUint> {
    check_volume_args(q, m, s, r)?;
    let qb = BigUint::from(q);
    let q1 = BigUint::from(q - 1);
    let mut total = BigUint::one();
    for i in 1..=r {
        for j in 1..=m.min(i) {
            let omega = omega_count(m, s, i, j)?;
            total += Pow::pow(&qb, (i - j) as u64) * Pow::pow(&q1, j as u64) * omega;
        }
    }
    Ok(total)
}

/// Hamming ball volume `1 + sum_{i=1}^R (q-1)^i C(m,i)`.
pub fn hamming_volume(q: usize, m: usize, r: usize) -> Result<BigUint> {
    check_volume_args(q, m, 1, r)?;
    let q1 = BigUint::from(q - 1);
    Ok((1..=r)
        .fold(BigUint::one(), |acc, i| acc + Pow::pow(&q1, i as u64) * binomial(BigUint::from(m), BigUint::from(i))))
}

/// Counts words within distance `r` of the origin by enumeration.
pub fn sphere_volume_bruteforce(q: usize, m: usize, s: usize, r: usize, budget: u64) -> Result<u64> {
    check_volume_args(q, m, s, r)?;
    let space = RtSpace::with_shape(q, m, s)?;
    let zero = Word::zero(space.len());
    ball_count_bruteforce(&space, &zero, r, budget)
}

/// Counts words within distance `r` of `center` by enumeration.
pub fn ball_count_bruteforce(space: &RtSpace, center: &Word, r: usize, budget: u64) -> Result<u64> {
    space.check_word(center)?;
    let n = space.point_count_within(budget)?;
    let s = space.poset().s();
    let count = (0..n)
        .into_par_iter()
        .map_init(
            || vec![0u8; space.len()],
            |buf, i| {
                space.fill_word(i, buf);
                within_distance(s, buf, &center.0, r) as u64
            },
        )
        .sum();
    Ok(count)
}
