//! Array constructions: depth extension, column restrictions, the depth-2
//! OCA from a strength-2 CA, alphabet fusion, Kleitman-Spencer binary CAs and
//! polynomial-evaluation OOAs.
//!
//! None of these outputs are trusted; callers run `verify_oca` on them.

use num_integer::binomial;
use serde::{Deserialize, Serialize};

use crate::array::OrderedArray;
use crate::error::{invalid, Result};
use crate::field::FieldTable;
use crate::poset::RtPoset;

/// Source column (in `[m x (t-1)]`) for every column of `[m x t]` under depth extension.
///
/// Heights `2..=t` of block `i` copy heights `1..t` of the same block; the new
/// bottom element of block `i` copies the top of block `(i+1) mod m`.
pub fn extend_depth_column_map(m: usize, t: usize) -> Result<Vec<usize>> {
    if m < 2 {
        return invalid("depth extension needs at least two blocks");
    }
    if t < 2 {
        return invalid(format!("depth extension needs strength at least 2, got {t}"));
    }
    let src = RtPoset::new(m, t - 1)?;
    let mut map = Vec::with_capacity(m * t);
    for block in 0..m {
        map.push(src.column((block + 1) % m, t - 1));
        map.extend((1..t).map(|h| src.column(block, h)));
    }
    Ok(map)
}

/// OCA(N;t,m,t-1,v) -> OCA(N;t,m,t,v).
pub fn extend_depth(a: &OrderedArray) -> Result<OrderedArray> {
    let t = a.strength();
    if a.s() + 1 != t {
        return invalid(format!("depth extension needs s = t-1, got s={} t={t}", a.s()));
    }
    let map = extend_depth_column_map(a.m(), t)?;
    a.select_columns(&map, t, a.m(), t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Restriction {
    /// Remove the minimal column of every block: `(t,m,s) -> (t,m,s-1)`.
    DropBottomLevel,
    /// Remove every column of one block: `(t,m,s) -> (t,m-1,s)`.
    DropBlock(usize),
}

pub fn restrict(a: &OrderedArray, how: Restriction) -> Result<OrderedArray> {
    let (m, s, t) = (a.m(), a.s(), a.strength());
    let p = a.poset();
    match how {
        Restriction::DropBottomLevel => {
            if s < 2 {
                return invalid("cannot drop the bottom level of a depth-1 array");
            }
            if m * (s - 1) < t {
                return invalid(format!("strength {t} exceeds the {} remaining columns", m * (s - 1)));
            }
            let cols: Vec<usize> = (0..m).flat_map(|b| (2..=s).map(move |h| p.column(b, h))).collect();
            a.select_columns(&cols, t, m, s - 1)
        }
        Restriction::DropBlock(index) => {
            if m < 2 {
                return invalid("cannot drop the only block");
            }
            if index >= m {
                return invalid(format!("block index {index} outside 0..{m}"));
            }
            if (m - 1) * s < t {
                return invalid(format!("strength {t} exceeds the {} remaining columns", (m - 1) * s));
            }
            let cols: Vec<usize> =
                (0..m).filter(|&b| b != index).flat_map(|b| (1..=s).map(move |h| p.column(b, h))).collect();
            a.select_columns(&cols, t, m - 1, s)
        }
    }
}

/// Keeps the first `m` blocks and the top `s` levels of each.
pub fn restrict_to_shape(a: &OrderedArray, m: usize, s: usize) -> Result<OrderedArray> {
    if m > a.m() || s > a.s() || m == 0 || s == 0 {
        return invalid(format!("cannot restrict [{}x{}] to [{m}x{s}]", a.m(), a.s()));
    }
    if m * s < a.strength() {
        return invalid(format!("strength {} exceeds {} columns", a.strength(), m * s));
    }
    let p = a.poset();
    let top = a.s();
    let cols: Vec<usize> = (0..m).flat_map(|b| (top - s + 1..=top).map(move |h| p.column(b, h))).collect();
    a.select_columns(&cols, a.strength(), m, s)
}

/// CA_lambda(N;2,m,v) -> OCA_lambda(N;2,m,2,v): block `i` is CA column `i` on top
/// of CA column `(i+1) mod m`.
pub fn oca_depth2_from_ca(ca: &OrderedArray) -> Result<OrderedArray> {
    if ca.s() != 1 || ca.strength() != 2 {
        return invalid(format!("expected a strength-2 covering array, got t={} s={}", ca.strength(), ca.s()));
    }
    let m = ca.m();
    if m < 2 {
        return invalid("need at least two columns");
    }
    let cols: Vec<usize> = (0..m).flat_map(|i| [(i + 1) % m, i]).collect();
    ca.select_columns(&cols, 2, m, 2)
}

/// OCA_lambda(N;t,m,s,v) -> OCA_lambda(N-2;t,m,s,v-1).
pub fn fuse(a: &OrderedArray) -> Result<OrderedArray> {
    let v = a.alphabet();
    if v < 3 {
        return invalid(format!("fusion needs an alphabet of at least 3 symbols, got {v}"));
    }
    if a.rows() < 2 {
        return invalid("fusion needs at least two rows");
    }
    let top = (v - 1) as u8;
    let width = a.width();
    let mut rows = a.to_rows();
    // relabel each column so that row 0 reads `top` everywhere
    let first = rows[0].clone();
    for row in rows.iter_mut() {
        for (x, &pivot) in row.iter_mut().zip(&first) {
            if *x == pivot {
                *x = top;
            } else if *x == top {
                *x = pivot;
            }
        }
    }
    rows.remove(0);
    let chosen = rows.remove(0);
    for row in rows.iter_mut() {
        for i in 0..width {
            if row[i] == top {
                row[i] = if chosen[i] != top { chosen[i] } else { 0 };
            }
        }
    }
    OrderedArray::new(a.strength(), a.m(), a.s(), v - 1, a.lambda(), rows)
}

/// Least `N >= 4` with `m <= C(N-1, floor(N/2)-1)`.
pub fn kleitman_spencer_number(m: usize) -> usize {
    (4..).find(|&n: &usize| m as u128 <= binomial((n - 1) as u128, (n / 2 - 1) as u128)).unwrap()
}

/// Binary CA(N;2,m,2) with `N = kleitman_spencer_number(m)`: its columns are the first
/// `m` weight-`floor(N/2)` vectors with a leading 1, taking the positions of the
/// remaining ones in lexicographic order.
pub fn kleitman_spencer_ca(m: usize) -> Result<OrderedArray> {
    if m < 2 {
        return invalid(format!("need at least two columns, got {m}"));
    }
    let n = kleitman_spencer_number(m);
    let k = n / 2 - 1;
    let mut columns: Vec<Vec<u8>> = Vec::with_capacity(m);
    let mut pos: Vec<usize> = (1..=k).collect();
    while columns.len() < m {
        let mut col = vec![0u8; n];
        col[0] = 1;
        for &p in &pos {
            col[p] = 1;
        }
        columns.push(col);
        // next k-subset of 1..n in lexicographic order
        let mut i = k;
        while i > 0 && pos[i - 1] == n - 1 - (k - i) {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        pos[i - 1] += 1;
        for j in i..k {
            pos[j] = pos[j - 1] + 1;
        }
    }
    debug_assert_eq!(columns.len(), m);
    let rows = (0..n).map(|r| columns.iter().map(|c| c[r]).collect()).collect();
    OrderedArray::new(2, m, 1, 2, 1, rows)
}

/// OOA(q^t; t, q+1, t, q) from polynomials of degree below `t` over `GF(q)`.
///
/// Row order follows the coefficient vector `(f_0, ..., f_{t-1})`
/// lexicographically. Block `a` (a field element) holds the Hasse derivatives
/// `D^k f(a)` at height `t-k`, so its top column is `f(a)`. The last block
/// holds `f_{t-1}, ..., f_0` from the top down.
pub fn rs_ooa(q: usize, t: usize) -> Result<OrderedArray> {
    let field = FieldTable::new(q)?;
    if t < 2 {
        return invalid(format!("strength must be at least 2, got {t}"));
    }
    let n = q
        .checked_pow(t as u32)
        .filter(|&n| n <= 1 << 24)
        .ok_or_else(|| crate::Error::ResourceLimit(format!("{q}^{t} rows is too many")))?;
    let m = q + 1;
    let poset = RtPoset::new(m, t)?;
    // C(j,k) in the prime subfield
    let binom: Vec<Vec<u8>> =
        (0..t).map(|j| (0..t).map(|k| field.from_int(if k <= j { binomial(j, k) } else { 0 })).collect()).collect();
    let mut entries = Vec::with_capacity(n * m * t);
    let mut coeffs = vec![0u8; t];
    let mut row = vec![0u8; m * t];
    for r in 0..n {
        let mut x = r;
        for c in coeffs.iter_mut().rev() {
            *c = (x % q) as u8;
            x /= q;
        }
        for a in 0..q as u8 {
            // powers of a
            let mut pw = vec![1u8; t];
            for e in 1..t {
                pw[e] = field.mul(pw[e - 1], a);
            }
            for k in 0..t {
                let d =
                    (k..t).fold(0u8, |acc, j| field.add(acc, field.mul(binom[j][k], field.mul(coeffs[j], pw[j - k]))));
                row[poset.column(a as usize, t - k)] = d;
            }
        }
        for k in 0..t {
            row[poset.column(q, t - k)] = coeffs[t - 1 - k];
        }
        entries.extend_from_slice(&row);
    }
    OrderedArray::from_flat(t, poset, q, 1, n, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::tests::example_oca;
    use crate::array::{is_ooa, verify_oca};
    use crate::field::is_prime_power;
    use std::collections::BTreeSet;

    #[test]
    fn ks_numbers() {
        assert_eq!(kleitman_spencer_number(2), 4);
        assert_eq!(kleitman_spencer_number(3), 4);
        assert_eq!(kleitman_spencer_number(4), 5);
        assert_eq!(kleitman_spencer_number(10), 6);
        assert_eq!(kleitman_spencer_number(11), 7);
        assert_eq!(kleitman_spencer_number(15), 7);
        assert_eq!(kleitman_spencer_number(16), 8);
    }

    #[test]
    fn ks_arrays_verify() {
        for m in 2..=40 {
            let ca = kleitman_spencer_ca(m).unwrap();
            assert_eq!(ca.rows(), kleitman_spencer_number(m));
            assert_eq!(ca.m(), m);
            assert!(verify_oca(&ca).valid, "m={m}");
        }
        assert!(kleitman_spencer_ca(1).is_err());
    }

    #[test]
    fn ks_three_columns() {
        let ca = kleitman_spencer_ca(3).unwrap();
        assert_eq!(ca.column(0), vec![1, 1, 0, 0]);
        assert_eq!(ca.column(1), vec![1, 0, 1, 0]);
        assert_eq!(ca.column(2), vec![1, 0, 0, 1]);
    }

    #[test]
    fn ks_tight_at_threshold() {
        // dropping the last row of the 4-row CA on 3 columns breaks some pair
        let ca = kleitman_spencer_ca(3).unwrap();
        let mut rows = ca.to_rows();
        rows.pop();
        let short = OrderedArray::new(2, 3, 1, 2, 1, rows).unwrap();
        assert!(!verify_oca(&short).valid);
    }

    #[test]
    fn extend_depth_examples() {
        let ca = kleitman_spencer_ca(3).unwrap();
        let ext = extend_depth(&ca).unwrap();
        assert_eq!((ext.rows(), ext.m(), ext.s(), ext.strength()), (4, 3, 2, 2));
        assert!(verify_oca(&ext).valid);

        // a single block of depth t-1 cannot carry strength t, so m=1 fails at the map
        assert!(extend_depth_column_map(1, 2).is_err());
        assert!(extend_depth(&example_oca()).is_err());
    }

    #[test]
    fn extend_depth_eight_row_strength_three() {
        let base = restrict_to_shape(&rs_ooa(2, 3).unwrap(), 2, 2).unwrap();
        assert!(verify_oca(&base).valid);
        let ext = extend_depth(&base).unwrap();
        assert_eq!((ext.rows(), ext.m(), ext.s()), (8, 2, 3));
        assert!(verify_oca(&ext).valid);
    }

    #[test]
    fn extend_depth_maps_anti_ideals_to_anti_ideals() {
        for t in 2..=5usize {
            for m in 2..=5usize {
                if m * t > 10 {
                    continue;
                }
                let map = extend_depth_column_map(m, t).unwrap();
                let big = RtPoset::new(m, t).unwrap();
                let small = RtPoset::new(m, t - 1).unwrap();
                let targets: BTreeSet<Vec<usize>> = small.anti_ideals(t).unwrap().iter().map(|j| j.columns()).collect();
                for j in big.anti_ideals(t).unwrap() {
                    let mut image: Vec<usize> = j.columns().iter().map(|&c| map[c]).collect();
                    image.sort_unstable();
                    image.dedup();
                    assert_eq!(image.len(), t);
                    assert!(targets.contains(&image), "m={m} t={t} J={:?}", j.labels());
                }
            }
        }
    }

    #[test]
    fn restrict_examples() {
        let a = example_oca();
        let r = restrict(&a, Restriction::DropBlock(3)).unwrap();
        assert_eq!((r.m(), r.s()), (3, 2));
        assert_eq!(r.row(0), &[0, 1, 0, 1, 0, 1]);
        assert!(verify_oca(&r).valid);

        let r = restrict(&a, Restriction::DropBottomLevel).unwrap();
        assert_eq!((r.m(), r.s()), (4, 1));
        assert_eq!(r.column(0), a.column(1));
        assert!(verify_oca(&r).valid);

        let ca = kleitman_spencer_ca(2).unwrap();
        assert!(restrict(&ca, Restriction::DropBlock(0)).is_err());
        assert!(restrict(&ca, Restriction::DropBottomLevel).is_err());
        assert!(restrict(&a, Restriction::DropBlock(4)).is_err());
    }

    #[test]
    fn depth2_from_ca() {
        let ca = kleitman_spencer_ca(3).unwrap();
        let o = oca_depth2_from_ca(&ca).unwrap();
        assert_eq!((o.rows(), o.strength(), o.m(), o.s()), (4, 2, 3, 2));
        assert!(verify_oca(&o).valid);
        // the depth-2 array is exactly the depth extension
        assert_eq!(o, extend_depth(&ca).unwrap());

        let o = oca_depth2_from_ca(&kleitman_spencer_ca(4).unwrap()).unwrap();
        assert_eq!(o.rows(), 5);
        assert!(verify_oca(&o).valid);

        let ca3 = OrderedArray::new(3, 3, 1, 2, 1, vec![vec![0, 0, 0]]).unwrap();
        assert!(oca_depth2_from_ca(&ca3).is_err());
    }

    #[test]
    fn depth2_round_trip() {
        for m in 2..=12 {
            let ca = kleitman_spencer_ca(m).unwrap();
            let back = restrict(&oca_depth2_from_ca(&ca).unwrap(), Restriction::DropBottomLevel).unwrap();
            assert_eq!(back, ca);
        }
    }

    #[test]
    fn rs_ooa_small_cases() {
        for (q, t, rows, width) in [(2, 2, 4, 6), (3, 2, 9, 8), (2, 3, 8, 9), (4, 2, 16, 10)] {
            let a = rs_ooa(q, t).unwrap();
            assert_eq!((a.rows(), a.width(), a.m(), a.s()), (rows, width, q + 1, t));
            assert!(is_ooa(&a), "q={q} t={t}");
        }
    }

    #[test]
    fn rs_ooa_all_fields() {
        for q in (2..=9).filter(|&q| is_prime_power(q)) {
            for t in 2..=3 {
                if q.pow(t as u32) > 1000 {
                    continue;
                }
                assert!(is_ooa(&rs_ooa(q, t).unwrap()), "q={q} t={t}");
            }
        }
        assert!(is_ooa(&rs_ooa(2, 4).unwrap()));
        assert!(is_ooa(&rs_ooa(3, 4).unwrap()));
        assert!(rs_ooa(6, 2).is_err());
        assert!(rs_ooa(2, 1).is_err());
    }

    #[test]
    fn rs_ooa_top_column_is_evaluation() {
        // row 1 is f = f_{t-1} x^{t-1} with f_{t-1}=1; with t=2 that is f(x)=x
        let a = rs_ooa(3, 2).unwrap();
        let p = a.poset();
        for x in 0..3 {
            assert_eq!(a.entry(1, p.column(x, 2)), x as u8);
        }
        assert_eq!(a.entry(1, p.column(3, 2)), 1);
    }

    #[test]
    fn fuse_examples() {
        let f = fuse(&rs_ooa(3, 2).unwrap()).unwrap();
        assert_eq!((f.rows(), f.alphabet(), f.m(), f.s(), f.strength()), (7, 2, 4, 2, 2));
        assert!(verify_oca(&f).valid);

        let once = fuse(&rs_ooa(4, 2).unwrap()).unwrap();
        assert_eq!((once.rows(), once.alphabet()), (14, 3));
        assert!(verify_oca(&once).valid);
        let twice = fuse(&once).unwrap();
        assert_eq!((twice.rows(), twice.alphabet()), (12, 2));
        assert!(verify_oca(&twice).valid);

        assert!(fuse(&example_oca()).is_err());
    }

    #[test]
    fn fuse_larger_fields() {
        for (q, t) in [(5, 2), (4, 3), (7, 2), (5, 3), (8, 2), (9, 2)] {
            let f = fuse(&rs_ooa(q, t).unwrap()).unwrap();
            assert_eq!(f.rows(), q.pow(t as u32) - 2);
            assert_eq!(f.alphabet(), q - 1);
            assert!(verify_oca(&f).valid, "q={q} t={t}");
        }
    }
}
