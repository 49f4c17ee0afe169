//! Arithmetic tables for the finite fields of order at most 16.
//!
//! Elements are encoded as integers `0..q`; for `q = p^k` the base-`p`
//! digits of an element are its coefficients as a polynomial over `GF(p)`
//! (least significant digit = constant term), reduced modulo the first monic
//! irreducible polynomial of degree `k` in enumeration order.

use crate::error::{invalid, Result};

pub const MAX_FIELD_ORDER: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldTable {
    order: usize,
    characteristic: usize,
    add: Vec<u8>,
    mul: Vec<u8>,
    neg: Vec<u8>,
    inv: Vec<u8>,
    primitive: u8,
}

/// `(p, k)` with `q = p^k`, if `q` is a prime power.
pub fn prime_power(q: usize) -> Option<(usize, u32)> {
    if q < 2 {
        return None;
    }
    let p = (2..=q).find(|d| q.is_multiple_of(*d))?;
    let mut rest = q;
    let mut k = 0;
    while rest.is_multiple_of(p) {
        rest /= p;
        k += 1;
    }
    (rest == 1).then_some((p, k))
}

pub fn is_prime_power(q: usize) -> bool {
    prime_power(q).is_some()
}

fn digits(x: usize, p: usize, k: usize) -> Vec<usize> {
    let mut d = Vec::with_capacity(k);
    let mut x = x;
    for _ in 0..k {
        d.push(x % p);
        x /= p;
    }
    d
}

fn undigits(d: &[usize], p: usize) -> usize {
    d.iter().rev().fold(0, |acc, &x| acc * p + x)
}

/// Product of two polynomials (coefficient vectors of length `k`) modulo the
/// monic `modulus` of degree `k`, whose lower coefficients are `modulus`.
fn poly_mul_mod(a: &[usize], b: &[usize], modulus: &[usize], p: usize) -> Vec<usize> {
    let k = modulus.len();
    let mut prod = vec![0usize; 2 * k];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + x * y) % p;
        }
    }
    // x^k = -(modulus)
    for deg in (k..2 * k).rev() {
        let c = prod[deg];
        if c == 0 {
            continue;
        }
        prod[deg] = 0;
        for (i, &mc) in modulus.iter().enumerate() {
            let idx = deg - k + i;
            prod[idx] = (prod[idx] + p * p - (c * mc) % p) % p;
        }
    }
    prod.truncate(k);
    prod
}

impl FieldTable {
    pub fn new(q: usize) -> Result<Self> {
        let Some((p, k)) = prime_power(q) else {
            return invalid(format!("field order {q} is not a prime power"));
        };
        if q > MAX_FIELD_ORDER {
            return invalid(format!("field order {q} exceeds the supported maximum {MAX_FIELD_ORDER}"));
        }
        let k = k as usize;
        let mut add = vec![0u8; q * q];
        for a in 0..q {
            let da = digits(a, p, k);
            for b in 0..q {
                let db = digits(b, p, k);
                let sum: Vec<usize> = da.iter().zip(&db).map(|(x, y)| (x + y) % p).collect();
                add[a * q + b] = undigits(&sum, p) as u8;
            }
        }
        // first modulus (as lower coefficients) giving a multiplication without zero divisors
        let mul = (0..q)
            .map(|lower| digits(lower, p, k))
            .map(|modulus| {
                let mut mul = vec![0u8; q * q];
                for a in 0..q {
                    let da = digits(a, p, k);
                    for b in 0..q {
                        let prod = poly_mul_mod(&da, &digits(b, p, k), &modulus, p);
                        mul[a * q + b] = undigits(&prod, p) as u8;
                    }
                }
                mul
            })
            .find(|mul| (1..q).all(|a| (1..q).all(|b| mul[a * q + b] != 0)))
            .expect("an irreducible polynomial of every degree exists");

        let neg = (0..q).map(|a| (0..q).find(|&b| add[a * q + b] == 0).unwrap() as u8).collect();
        let inv =
            (0..q).map(|a| if a == 0 { 0 } else { (1..q).find(|&b| mul[a * q + b] == 1).unwrap() as u8 }).collect();
        let order_of = |g: usize| {
            let mut x = g;
            let mut n = 1;
            while x != 1 {
                x = mul[x * q + g] as usize;
                n += 1;
            }
            n
        };
        let primitive = (1..q).find(|&g| order_of(g) == q - 1).unwrap() as u8;
        let table = Self { order: q, characteristic: p, add, mul, neg, inv, primitive };
        table.check_axioms()?;
        Ok(table)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn characteristic(&self) -> usize {
        self.characteristic
    }

    pub fn primitive(&self) -> u8 {
        self.primitive
    }

    #[inline]
    pub fn add(&self, a: u8, b: u8) -> u8 {
        self.add[a as usize * self.order + b as usize]
    }

    #[inline]
    pub fn mul(&self, a: u8, b: u8) -> u8 {
        self.mul[a as usize * self.order + b as usize]
    }

    pub fn neg(&self, a: u8) -> u8 {
        self.neg[a as usize]
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: u8) -> Option<u8> {
        (a != 0).then(|| self.inv[a as usize])
    }

    pub fn pow(&self, a: u8, e: usize) -> u8 {
        (0..e).fold(1, |acc, _| self.mul(acc, a))
    }

    /// The integer `n` mapped into the prime subfield.
    pub fn from_int(&self, n: usize) -> u8 {
        // 1 + 1 + ... (n mod p times); prime subfield elements are 0..p in this encoding
        (n % self.characteristic) as u8
    }

    /// Exhaustive check of the field axioms on the tables.
    pub fn check_axioms(&self) -> Result<()> {
        let q = self.order as u8;
        let els = || 0..q;
        for a in els() {
            if self.add(a, 0) != a || self.mul(a, 1) != a {
                return invalid(format!("identity fails at {a}"));
            }
            if self.add(a, self.neg(a)) != 0 {
                return invalid(format!("additive inverse fails at {a}"));
            }
            if a != 0 && self.mul(a, self.inv(a).unwrap()) != 1 {
                return invalid(format!("multiplicative inverse fails at {a}"));
            }
            for b in els() {
                if self.add(a, b) != self.add(b, a) || self.mul(a, b) != self.mul(b, a) {
                    return invalid(format!("commutativity fails at ({a},{b})"));
                }
                for c in els() {
                    if self.add(self.add(a, b), c) != self.add(a, self.add(b, c))
                        || self.mul(self.mul(a, b), c) != self.mul(a, self.mul(b, c))
                        || self.mul(a, self.add(b, c)) != self.add(self.mul(a, b), self.mul(a, c))
                    {
                        return invalid(format!("associativity/distributivity fails at ({a},{b},{c})"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prime_powers() {
        let pp: Vec<usize> = (1..=17).filter(|&q| is_prime_power(q)).collect();
        assert_eq!(pp, vec![2, 3, 4, 5, 7, 8, 9, 11, 13, 16, 17]);
        assert_eq!(prime_power(9), Some((3, 2)));
        assert_eq!(prime_power(12), None);
    }

    #[test]
    fn all_supported_fields_build() {
        for q in (2..=MAX_FIELD_ORDER).filter(|&q| is_prime_power(q)) {
            let f = FieldTable::new(q).unwrap();
            assert_eq!(f.order(), q);
            let g = f.primitive();
            let mut seen: Vec<u8> = (0..q - 1).map(|e| f.pow(g, e)).collect();
            seen.sort_unstable();
            assert_eq!(seen, (1..q as u8).collect::<Vec<_>>());
            // characteristic: p copies of 1 sum to zero
            let p = f.characteristic();
            assert_eq!((0..p).fold(0u8, |acc, _| f.add(acc, 1)), 0);
        }
    }

    #[test]
    fn rejects_unsupported_orders() {
        assert!(FieldTable::new(6).is_err());
        assert!(FieldTable::new(17).is_err());
        assert!(FieldTable::new(1).is_err());
    }

    #[test]
    fn prime_field_is_modular() {
        let f = FieldTable::new(7).unwrap();
        for a in 0..7u8 {
            for b in 0..7u8 {
                assert_eq!(f.add(a, b), (a + b) % 7);
                assert_eq!(f.mul(a, b), (a * b) % 7);
            }
        }
    }
}
