//! Ordered covering arrays and their coverage verifier.
//!
//! An `OrderedArray` is an `N x ms` matrix over `0..v` whose columns are the
//! labels of `[m x s]`. It is an OCA of strength `t` and index `lambda` when
//! every anti-ideal of size `t` sees each `t`-tuple at least `lambda` times.
//! With `s = 1` this is an ordinary covering array.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::poset::{AntiIdeal, RtPoset};

/// Maximum number of violations kept in a report.
pub const VIOLATION_CAP: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderedArray {
    t: usize,
    poset: RtPoset,
    v: usize,
    lambda: usize,
    rows: usize,
    entries: Vec<u8>,
}

impl OrderedArray {
    pub fn new(t: usize, m: usize, s: usize, v: usize, lambda: usize, rows: Vec<Vec<u8>>) -> Result<Self> {
        let poset = RtPoset::new(m, s)?;
        let width = poset.len();
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * width);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return invalid(format!("row {i} has {} entries, expected {width}", row.len()));
            }
            entries.extend(row);
        }
        Self::from_flat(t, poset, v, lambda, n, entries)
    }

    pub fn from_flat(t: usize, poset: RtPoset, v: usize, lambda: usize, rows: usize, entries: Vec<u8>) -> Result<Self> {
        let width = poset.len();
        if t < 2 || t > width {
            return invalid(format!("strength {t} outside 2..={width}"));
        }
        if poset.s() > t {
            return invalid(format!("block depth {} exceeds strength {t}", poset.s()));
        }
        if !(2..=255).contains(&v) {
            return invalid(format!("alphabet size {v} outside 2..=255"));
        }
        if lambda == 0 {
            return invalid("index lambda must be positive");
        }
        if entries.len() != rows * width {
            return invalid(format!("{} entries do not form {rows} rows of {width}", entries.len()));
        }
        if let Some(&x) = entries.iter().find(|&&x| x as usize >= v) {
            return invalid(format!("symbol {x} outside alphabet of size {v}"));
        }
        Ok(Self { t, poset, v, lambda, rows, entries })
    }

    pub fn strength(&self) -> usize {
        self.t
    }

    pub fn poset(&self) -> &RtPoset {
        &self.poset
    }

    pub fn m(&self) -> usize {
        self.poset.m()
    }

    pub fn s(&self) -> usize {
        self.poset.s()
    }

    pub fn alphabet(&self) -> usize {
        self.v
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.poset.len()
    }

    pub fn row(&self, i: usize) -> &[u8] {
        let w = self.width();
        &self.entries[i * w..(i + 1) * w]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[u8]> {
        self.entries.chunks_exact(self.width())
    }

    pub fn entry(&self, row: usize, col: usize) -> u8 {
        self.entries[row * self.width() + col]
    }

    pub fn set_entry(&mut self, row: usize, col: usize, value: u8) -> Result<()> {
        if row >= self.rows || col >= self.width() {
            return invalid(format!("cell ({row},{col}) outside {}x{}", self.rows, self.width()));
        }
        if value as usize >= self.v {
            return invalid(format!("symbol {value} outside alphabet of size {}", self.v));
        }
        let w = self.width();
        self.entries[row * w + col] = value;
        Ok(())
    }

    pub fn column(&self, col: usize) -> Vec<u8> {
        self.row_iter().map(|r| r[col]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        self.row_iter().map(<[u8]>::to_vec).collect()
    }

    /// Copy with the same entries and a different claimed index.
    pub fn with_lambda(&self, lambda: usize) -> Result<Self> {
        Self::from_flat(self.t, self.poset, self.v, lambda, self.rows, self.entries.clone())
    }

    /// Copy with the same entries and a different claimed strength.
    pub fn with_strength(&self, t: usize) -> Result<Self> {
        Self::from_flat(t, self.poset, self.v, self.lambda, self.rows, self.entries.clone())
    }

    /// New array keeping the listed columns, in order, under a new shape.
    pub fn select_columns(&self, cols: &[usize], t: usize, m: usize, s: usize) -> Result<Self> {
        if let Some(&c) = cols.iter().find(|&&c| c >= self.width()) {
            return invalid(format!("column {c} outside width {}", self.width()));
        }
        let entries = self.row_iter().flat_map(|r| cols.iter().map(move |&c| r[c])).collect();
        Self::from_flat(t, RtPoset::new(m, s)?, self.v, self.lambda, self.rows, entries)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_string())?;
        Ok(())
    }
}

impl fmt::Display for OrderedArray {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "oca t={} m={} s={} v={} lambda={} n={}",
            self.t,
            self.m(),
            self.s(),
            self.v,
            self.lambda,
            self.rows
        )?;
        for row in self.row_iter() {
            let line: Vec<String> = row.iter().map(u8::to_string).collect();
            writeln!(f, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Parses `key=value` header fields in a fixed order.
pub(crate) fn parse_header(line: &str, tag: &str, keys: &[&str]) -> Result<Vec<usize>> {
    let perr = |msg: String| Error::Parse { line: 1, msg };
    let mut parts = line.split_whitespace();
    if parts.next() != Some(tag) {
        return Err(perr(format!("expected header starting with `{tag}`")));
    }
    let mut values = Vec::with_capacity(keys.len());
    for key in keys {
        let field = parts.next().ok_or_else(|| perr(format!("missing field `{key}`")))?;
        let value = field
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('='))
            .ok_or_else(|| perr(format!("expected `{key}=<value>`, found `{field}`")))?;
        values.push(value.parse().map_err(|_| perr(format!("bad value in `{field}`")))?);
    }
    if let Some(extra) = parts.next() {
        return Err(perr(format!("unexpected header field `{extra}`")));
    }
    Ok(values)
}

pub(crate) fn parse_symbol_line(line: &str, lineno: usize, width: usize) -> Result<Vec<u8>> {
    let row: Vec<u8> = line
        .split_whitespace()
        .map(|x| x.parse::<u8>().map_err(|_| Error::Parse { line: lineno, msg: format!("bad symbol `{x}`") }))
        .collect::<Result<_>>()?;
    if row.len() != width {
        return Err(Error::Parse { line: lineno, msg: format!("expected {width} symbols, found {}", row.len()) });
    }
    Ok(row)
}

impl FromStr for OrderedArray {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(Error::Parse { line: 1, msg: "empty input".into() })?;
        let h = parse_header(header, "oca", &["t", "m", "s", "v", "lambda", "n"])?;
        let (t, m, s, v, lambda, n) = (h[0], h[1], h[2], h[3], h[4], h[5]);
        let width = m * s;
        let mut rows = Vec::with_capacity(n);
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            rows.push(parse_symbol_line(line, i + 2, width)?);
        }
        if rows.len() != n {
            return Err(Error::Parse { line: 1, msg: format!("header declares n={n} but {} rows follow", rows.len()) });
        }
        OrderedArray::new(t, m, s, v, lambda, rows)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Depth vector of the anti-ideal.
    pub depths: Vec<usize>,
    /// Column labels of the anti-ideal, increasing.
    pub labels: Vec<usize>,
    /// The under-covered tuple, in label order.
    pub tuple: Vec<u8>,
    pub observed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
    /// Number of anti-ideals examined.
    pub checked: usize,
    /// Set when more than `VIOLATION_CAP` violations were found.
    pub truncated: bool,
}

impl fmt::Display for CoverageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "valid: {}", if self.valid { "yes" } else { "no" })?;
        writeln!(f, "anti-ideals checked: {}", self.checked)?;
        for v in &self.violations {
            let labels: Vec<String> = v.labels.iter().map(usize::to_string).collect();
            let tuple: Vec<String> = v.tuple.iter().map(u8::to_string).collect();
            writeln!(
                f,
                "missing: columns {{{}}} tuple ({}) seen {} times",
                labels.join(","),
                tuple.join(","),
                v.observed
            )?;
        }
        if self.truncated {
            writeln!(f, "(more violations omitted)")?;
        }
        Ok(())
    }
}

/// Occurrence count of every tuple (radix-encoded, first column most significant)
/// on the given columns.
pub(crate) fn tuple_counts(array: &OrderedArray, cols: &[usize]) -> Vec<u32> {
    let v = array.alphabet();
    let mut counts = vec![0u32; v.pow(cols.len() as u32)];
    for row in array.row_iter() {
        let code = cols.iter().fold(0usize, |acc, &c| acc * v + row[c] as usize);
        counts[code] += 1;
    }
    counts
}

fn decode_tuple(mut code: usize, v: usize, len: usize) -> Vec<u8> {
    let mut out = vec![0u8; len];
    for x in out.iter_mut().rev() {
        *x = (code % v) as u8;
        code /= v;
    }
    out
}

fn anti_ideal_violations(array: &OrderedArray, j: &AntiIdeal, cap: usize) -> Vec<Violation> {
    let cols = j.columns();
    let counts = tuple_counts(array, &cols);
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| (c as usize) < array.lambda())
        .take(cap)
        .map(|(code, &c)| Violation {
            depths: j.depths().to_vec(),
            labels: j.labels(),
            tuple: decode_tuple(code, array.alphabet(), cols.len()),
            observed: c as usize,
        })
        .collect()
}

/// Checks every anti-ideal of size `t` for `lambda`-coverage.
pub fn verify_oca(array: &OrderedArray) -> CoverageReport {
    let anti = array.poset().anti_ideals(array.strength()).expect("strength is validated on construction");
    let per_ideal: Vec<Vec<Violation>> =
        anti.par_iter().map(|j| anti_ideal_violations(array, j, VIOLATION_CAP + 1)).collect();
    let mut violations: Vec<Violation> = per_ideal.into_iter().flatten().take(VIOLATION_CAP + 1).collect();
    let truncated = violations.len() > VIOLATION_CAP;
    violations.truncate(VIOLATION_CAP);
    CoverageReport { valid: violations.is_empty(), violations, checked: anti.len(), truncated }
}

/// True iff `N = lambda v^t` and every tuple appears exactly `lambda` times on
/// every anti-ideal of size `t`.
pub fn is_ooa(array: &OrderedArray) -> bool {
    let t = array.strength();
    let target = array.alphabet().checked_pow(t as u32).and_then(|x| x.checked_mul(array.lambda()));
    if target != Some(array.rows()) {
        return false;
    }
    if !verify_oca(array).valid {
        return false;
    }
    let anti = array.poset().anti_ideals(t).expect("validated strength");
    let exact = anti.iter().all(|j| tuple_counts(array, &j.columns()).iter().all(|&c| c as usize == array.lambda()));
    debug_assert!(exact, "an OCA with N = lambda v^t must be exact");
    exact
}
