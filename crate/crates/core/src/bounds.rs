//! Lower and upper bounds on `K_q(m,s,R)` and `OCAN(t,m,s,v)`, each with
//! the rules that produced it and, where possible, a witness plan that can
//! be materialised and re-verified.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{verify_oca, OrderedArray};
use crate::code::{
    constant_code, lift_hamming_to_rt, product_code, surjective_hamming_code, three_chain_code, trivial_covering,
    two_chain_code, verify_covering, Code, MAX_CODE_WORDS,
};
use crate::construct::{
    extend_depth, fuse, kleitman_spencer_ca, kleitman_spencer_number, oca_depth2_from_ca, restrict, restrict_to_shape,
    rs_ooa, Restriction,
};
use crate::error::{invalid, Error, Result};
use crate::field::{is_prime_power, MAX_FIELD_ORDER};
use crate::metric::{sphere_volume, RtSpace};
use crate::poset::RtPoset;
use crate::search::{exact_covering_number, exact_ocan, SearchBudget};

/// Full-factorial witnesses above this many entries are left formula-only.
const MAX_FACTORIAL_ENTRIES: u64 = 1 << 26;

mod decimal {
    use num_bigint::BigUint;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    SphereCovering,
    OrthogonalCount,
    ExactSearch,
    Trivial,
    ConstantWords,
    SurjectiveLift,
    TwoChains,
    ThreeChains,
    OcaProduct,
    OoaProduct,
    FusedOoaProduct,
    OoaTwoChains,
    OoaThreeChains,
    FusedOoaTwoChains,
    DoubledLength,
    KleitmanSpencer,
    ReedSolomon,
    Fusion,
    DepthTransfer,
    UserArray,
    FullFactorial,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::SphereCovering => "sphere-covering",
            Rule::OrthogonalCount => "orthogonal-count",
            Rule::ExactSearch => "exact-search",
            Rule::Trivial => "trivial",
            Rule::ConstantWords => "constant-words",
            Rule::SurjectiveLift => "surjective-lift",
            Rule::TwoChains => "two-chains",
            Rule::ThreeChains => "three-chains",
            Rule::OcaProduct => "oca-product",
            Rule::OoaProduct => "ooa-product",
            Rule::FusedOoaProduct => "fused-ooa-product",
            Rule::OoaTwoChains => "ooa-two-chains",
            Rule::OoaThreeChains => "ooa-three-chains",
            Rule::FusedOoaTwoChains => "fused-ooa-two-chains",
            Rule::DoubledLength => "doubled-length",
            Rule::KleitmanSpencer => "kleitman-spencer",
            Rule::ReedSolomon => "reed-solomon",
            Rule::Fusion => "fusion",
            Rule::DepthTransfer => "depth-transfer",
            Rule::UserArray => "user-array",
            Rule::FullFactorial => "full-factorial",
        }
    }

    /// The inequality the rule applies.
    pub fn statement(self) -> &'static str {
        match self {
            Rule::SphereCovering => "K_q(m,s,R) >= q^(ms) / V_q(m,s,R)",
            Rule::OrthogonalCount => "OCAN(t,m,s,v) >= v^t",
            Rule::ExactSearch => "branch-and-bound over all candidates",
            Rule::Trivial => "K_q(m,s,R) <= q^(ms-R)",
            Rule::ConstantWords => "K_q(m,s,ms-t) = q when m >= (t-1)q+1",
            Rule::SurjectiveLift => "K_q((t-1)q,s,(t-1)qs-t) <= q-2+CAN(t,(t-1)q,2)",
            Rule::TwoChains => "K_v(2,s,s) <= v^(s-2)(v^2-1)",
            Rule::ThreeChains => "K_v(3,s,2s-1) <= v(v^s-1)",
            Rule::OcaProduct => "K_vq(m,s,R) <= OCAN(ms-R,m,s,v) K_q(m,s,R)",
            Rule::OoaProduct => "K_qv(m,s,ms-t) <= q^t K_v(m,s,ms-t) for prime power q, m <= q+1, s <= t",
            Rule::FusedOoaProduct => "K_(q-1)v(q+1,t,qt) <= (q^t-2) K_v(q+1,t,qt) for prime power q",
            Rule::OoaTwoChains => "K_qv(q+1,t,qt) <= q^t v^(t-2)(v^2-1) for prime power q, q+1 <= (t-1)v",
            Rule::OoaThreeChains => "K_qv(m,s,ms-s-1) <= q^(s+1) v(v^s-1) for prime power q, m <= q+1",
            Rule::FusedOoaTwoChains => "K_(q-1)v(q+1,t,qt) <= (q^t-2) v^(t-2)(v^2-1) for prime power q",
            Rule::DoubledLength => "K_2q(2m,s,2ms-3) <= q(OCAN(3,m,s,2)+CAN(2,m,2)) for q < m <= 2q, 2 <= s <= 3",
            Rule::KleitmanSpencer => "OCAN(2,m,s,2) = CAN(2,m,2) = least N with m <= C(N-1,floor(N/2)-1), s <= 2",
            Rule::ReedSolomon => "OCAN(t,m,s,q) = q^t for prime power q, m <= q+1, s <= t",
            Rule::Fusion => "OCAN(t,m,s,q-1) <= q^t-2 for prime power q, m <= q+1, s <= t",
            Rule::DepthTransfer => "OCAN(t,m,t,v) = OCAN(t,m,t-1,v)",
            Rule::UserArray => "verified user-supplied array",
            Rule::FullFactorial => "OCAN(t,m,s,v) <= v^(ms)",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Target {
    K {
        q: usize,
        m: usize,
        s: usize,
        r: usize,
    },
    #[serde(rename = "OCAN")]
    Ocan {
        t: usize,
        m: usize,
        s: usize,
        v: usize,
    },
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Target::K { q, m, s, r } => write!(f, "K_{q}({m},{s},{r})"),
            Target::Ocan { t, m, s, v } => write!(f, "OCAN({t},{m},{s},{v})"),
        }
    }
}

impl FromStr for Target {
    type Err = Error;

    /// `K q m s R` or `OCAN t m s v`.
    fn from_str(line: &str) -> Result<Self> {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Parse { line: 1, msg: format!("expected `K q m s R` or `OCAN t m s v`, got `{line}`") };
        if parts.len() != 5 {
            return Err(bad());
        }
        let mut n = [0usize; 4];
        for (slot, p) in n.iter_mut().zip(&parts[1..]) {
            *slot = p.parse().map_err(|_| bad())?;
        }
        match parts[0].to_ascii_uppercase().as_str() {
            "K" => Ok(Target::K { q: n[0], m: n[1], s: n[2], r: n[3] }),
            "OCAN" => Ok(Target::Ocan { t: n[0], m: n[1], s: n[2], v: n[3] }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub side: Side,
    pub rule: Rule,
    pub cited: String,
    pub inputs: String,
    #[serde(with = "decimal")]
    pub value: BigUint,
    pub constructive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bound {
    #[serde(with = "decimal")]
    pub value: BigUint,
    /// Every rule attaining the value, in the fixed rule order.
    pub rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundRecord {
    pub target: Target,
    pub lower: Bound,
    pub upper: Bound,
    /// True when a witness for the upper bound can be built.
    pub constructive: bool,
    pub chain: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    Code(Code),
    Array(OrderedArray),
}

impl Witness {
    pub fn size(&self) -> usize {
        match self {
            Witness::Code(c) => c.len(),
            Witness::Array(a) => a.rows(),
        }
    }

    pub fn verify(&self) -> Result<bool> {
        match self {
            Witness::Code(c) => {
                let r = c.claimed_radius().ok_or_else(|| Error::InvalidArgument("code without radius".into()))?;
                Ok(verify_covering(c, r)?.valid)
            }
            Witness::Array(a) => Ok(verify_oca(a).valid),
        }
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        match self {
            Witness::Code(c) => c.write_file(path),
            Witness::Array(a) => a.write_file(path),
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            Witness::Code(_) => "code",
            Witness::Array(_) => "oca",
        }
    }

    fn into_code(self) -> Result<Code> {
        match self {
            Witness::Code(c) => Ok(c),
            Witness::Array(_) => invalid("expected a code witness"),
        }
    }

    fn into_array(self) -> Result<OrderedArray> {
        match self {
            Witness::Array(a) => Ok(a),
            Witness::Code(_) => invalid("expected an array witness"),
        }
    }
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::Code(c) => c.fmt(f),
            Witness::Array(a) => a.fmt(f),
        }
    }
}

/// Recipe for a witness, materialised only on request.
#[derive(Debug, Clone)]
enum Plan {
    Trivial { q: usize, m: usize, s: usize, r: usize },
    Constant { q: usize, m: usize, s: usize, r: usize },
    Surjective { q: usize, t: usize, s: usize, ca: Box<Plan> },
    TwoChain { v: usize, s: usize },
    ThreeChain { v: usize, s: usize },
    Product { array: Box<Plan>, code: Box<Plan> },
    KleitmanSpencer { m: usize, s: usize },
    ReedSolomon { q: usize, t: usize, m: usize, s: usize },
    FusedReedSolomon { q: usize, t: usize, m: usize, s: usize },
    Extend(Box<Plan>),
    DropBottom(Box<Plan>),
    FullFactorial { t: usize, m: usize, s: usize, v: usize },
    Stored(Box<Witness>),
}

impl Plan {
    fn build(&self) -> Result<Witness> {
        Ok(match self {
            Plan::Trivial { q, m, s, r } => Witness::Code(trivial_covering(*q, *m, *s, *r)?),
            Plan::Constant { q, m, s, r } => Witness::Code(constant_code(*q, *m, *s, *r)?),
            Plan::Surjective { q, t, s, ca } => {
                let ca = ca.build()?.into_array()?;
                let h = surjective_hamming_code(*q, *t, Some(&ca))?;
                Witness::Code(lift_hamming_to_rt(&h, *s)?)
            }
            Plan::TwoChain { v, s } => Witness::Code(two_chain_code(*v, *s)?),
            Plan::ThreeChain { v, s } => Witness::Code(three_chain_code(*v, *s)?),
            Plan::Product { array, code } => {
                Witness::Code(product_code(&array.build()?.into_array()?, &code.build()?.into_code()?)?)
            }
            Plan::KleitmanSpencer { m, s } => {
                let ca = kleitman_spencer_ca(*m)?;
                Witness::Array(if *s == 1 { ca } else { oca_depth2_from_ca(&ca)? })
            }
            Plan::ReedSolomon { q, t, m, s } => Witness::Array(restrict_to_shape(&rs_ooa(*q, *t)?, *m, *s)?),
            Plan::FusedReedSolomon { q, t, m, s } => {
                Witness::Array(restrict_to_shape(&fuse(&rs_ooa(*q, *t)?)?, *m, *s)?)
            }
            Plan::Extend(inner) => Witness::Array(extend_depth(&inner.build()?.into_array()?)?),
            Plan::DropBottom(inner) => {
                Witness::Array(restrict(&inner.build()?.into_array()?, Restriction::DropBottomLevel)?)
            }
            Plan::FullFactorial { t, m, s, v } => {
                let space = RtSpace::with_shape(*v, *m, *s)?;
                let n = space.point_count_within(MAX_FACTORIAL_ENTRIES)?;
                let rows = (0..n).map(|i| space.word_at(i).0).collect();
                Witness::Array(OrderedArray::new(*t, *m, *s, *v, 1, rows)?)
            }
            Plan::Stored(w) => (**w).clone(),
        })
    }
}

/// A record plus the recipe for its best constructive upper bound.
#[derive(Debug, Clone)]
pub struct Bounds {
    pub record: BoundRecord,
    plan: Option<Plan>,
}

impl Bounds {
    /// Builds the witness for the upper bound, if the bound is constructive.
    pub fn witness(&self) -> Result<Option<Witness>> {
        self.plan.as_ref().map(Plan::build).transpose()
    }

    fn upper(&self) -> &BigUint {
        &self.record.upper.value
    }
}

/// User-supplied arrays and an optional search budget.
#[derive(Debug, Clone, Default)]
pub struct BoundsContext {
    arrays: Vec<OrderedArray>,
    search: Option<SearchBudget>,
}

impl BoundsContext {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a user array after checking it covers what it claims.
    pub fn with_array(mut self, a: OrderedArray) -> Result<Self> {
        if a.lambda() != 1 {
            return invalid("only index-1 arrays feed the bounds");
        }
        let report = verify_oca(&a);
        if !report.valid {
            return Err(Error::Dependency(format!(
                "supplied OCA(N={};{},{},{},{}) does not verify",
                a.rows(),
                a.strength(),
                a.m(),
                a.s(),
                a.alphabet()
            )));
        }
        self.arrays.push(a);
        Ok(self)
    }

    pub fn with_search(mut self, budget: SearchBudget) -> Self {
        self.search = Some(budget);
        self
    }

    /// The same context without the search oracle, used for nested targets.
    fn rules_only(&self) -> Self {
        Self { arrays: self.arrays.clone(), search: None }
    }
}

struct Cand {
    side: Side,
    rule: Rule,
    inputs: String,
    value: BigUint,
    plan: Option<Plan>,
}

fn pow(b: usize, e: usize) -> BigUint {
    BigUint::from(b).pow(e as u32)
}

/// Splits `n = a * b` with both factors at least 2, ordered by `a`.
fn factor_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (2..=n / 2).filter(move |a| n.is_multiple_of(*a)).map(move |a| (a, n / a))
}

fn assemble(target: Target, mut cands: Vec<Cand>) -> Result<Bounds> {
    cands.sort_by_key(|c| (c.side as u8, c.rule));
    let best = |side: Side, pick_max: bool| -> Option<Bound> {
        let vals = cands.iter().filter(|c| c.side == side).map(|c| &c.value);
        let v = if pick_max { vals.max() } else { vals.min() }?.clone();
        let mut rules: Vec<Rule> = cands.iter().filter(|c| c.side == side && c.value == v).map(|c| c.rule).collect();
        rules.dedup();
        Some(Bound { value: v, rules })
    };
    let lower = best(Side::Lower, true).ok_or_else(|| Error::InvalidArgument("no lower bound applies".into()))?;
    let upper = best(Side::Upper, false).ok_or_else(|| Error::InvalidArgument("no upper bound applies".into()))?;
    if lower.value > upper.value {
        return Err(Error::Dependency(format!("{target}: lower {} exceeds upper {}", lower.value, upper.value)));
    }
    let plan = cands.iter().filter(|c| c.side == Side::Upper && c.value == upper.value).find_map(|c| c.plan.clone());
    let chain = cands
        .into_iter()
        .map(|c| Step {
            side: c.side,
            rule: c.rule,
            cited: c.rule.statement().to_string(),
            inputs: c.inputs,
            value: c.value,
            constructive: c.plan.is_some(),
        })
        .collect();
    Ok(Bounds { record: BoundRecord { target, lower, upper, constructive: plan.is_some(), chain }, plan })
}

/// Bounds on the smallest `R`-covering of `Z_q^{ms}` under the RT metric.
pub fn k_bounds(q: usize, m: usize, s: usize, r: usize) -> Result<Bounds> {
    k_bounds_with(q, m, s, r, &BoundsContext::default())
}

pub fn k_bounds_with(q: usize, m: usize, s: usize, r: usize, ctx: &BoundsContext) -> Result<Bounds> {
    RtSpace::with_shape(q, m, s)?;
    if r == 0 || r >= m * s {
        return invalid(format!("need 0 < R < ms = {}, got R={r}", m * s));
    }
    let target = Target::K { q, m, s, r };
    let n = m * s;
    let t = n - r;
    let nested = ctx.rules_only();
    let mut cands = Vec::new();
    let mut upper = |rule, inputs: String, value, plan| {
        cands.push(Cand { side: Side::Upper, rule, inputs, value, plan });
    };

    let trivial = pow(q, t);
    let plan = (trivial <= BigUint::from(MAX_CODE_WORDS)).then_some(Plan::Trivial { q, m, s, r });
    upper(Rule::Trivial, format!("q={q}, ms-R={t}"), trivial, plan);

    if m > (t.saturating_sub(1)) * q {
        upper(
            Rule::ConstantWords,
            format!("t={t}, m={m} >= {}", (t.saturating_sub(1)) * q + 1),
            q.into(),
            Some(Plan::Constant { q, m, s, r }),
        );
    }

    if t >= 2 && m == (t - 1) * q {
        let ca = ocan_inner(t, m, 1, 2, &nested, true)?;
        let value = BigUint::from(q - 2) + ca.upper();
        let plan = ca.plan.clone().map(|p| Plan::Surjective { q, t, s, ca: Box::new(p) });
        upper(Rule::SurjectiveLift, format!("t={t}, CAN({t},{m},2) <= {} [{}]", ca.upper(), rules(&ca)), value, plan);
    }

    if m == 2 && s >= 2 && r == s {
        upper(Rule::TwoChains, format!("v={q}, s={s}"), two_chains_value(q, s), Some(Plan::TwoChain { v: q, s }));
    }
    if m == 3 && s >= 2 && r == 2 * s - 1 {
        upper(Rule::ThreeChains, format!("v={q}, s={s}"), three_chains_value(q, s), Some(Plan::ThreeChain { v: q, s }));
    }

    for (v, b) in factor_pairs(q) {
        if t >= 2 && s <= t {
            let arr = ocan_inner(t, m, s, v, &nested, true)?;
            let code = k_bounds_with(b, m, s, r, &nested)?;
            let plan = match (&arr.plan, &code.plan) {
                (Some(a), Some(c)) => Some(Plan::Product { array: Box::new(a.clone()), code: Box::new(c.clone()) }),
                _ => None,
            };
            upper(
                Rule::OcaProduct,
                format!(
                    "v={v}, OCAN({t},{m},{s},{v}) <= {} [{}], K_{b} <= {} [{}]",
                    arr.upper(),
                    rules(&arr),
                    code.upper(),
                    rules(&code)
                ),
                arr.upper() * code.upper(),
                plan,
            );
        }
        // the array alphabet is the prime-power factor here
        let (a, b) = (v, b);
        if is_prime_power(a) && m <= a + 1 && t >= 2 && s <= t {
            let code = k_bounds_with(b, m, s, r, &nested)?;
            let plan = (a <= MAX_FIELD_ORDER)
                .then_some(())
                .and(code.plan.clone())
                .map(|c| Plan::Product { array: Box::new(Plan::ReedSolomon { q: a, t, m, s }), code: Box::new(c) });
            upper(
                Rule::OoaProduct,
                format!("q={a}, t={t}, K_{b} <= {} [{}]", code.upper(), rules(&code)),
                pow(a, t) * code.upper(),
                plan,
            );
        }
        if is_prime_power(a + 1) && m == a + 2 && s >= 2 && r == (a + 1) * s {
            let code = k_bounds_with(b, m, s, r, &nested)?;
            let value = (pow(a + 1, s) - 2u32) * code.upper();
            upper(Rule::FusedOoaProduct, format!("q={}, v={b}, K_{b} <= {}", a + 1, code.upper()), value, None);
            upper(
                Rule::FusedOoaTwoChains,
                format!("q={}, v={b}, t={s}", a + 1),
                (pow(a + 1, s) - 2u32) * two_chains_value(b, s),
                None,
            );
        }
        if is_prime_power(a) && m == a + 1 && s >= 2 && r == a * s && a < (s - 1) * b {
            upper(Rule::OoaTwoChains, format!("q={a}, v={b}, t={s}"), ooa_two_chains_value(a, b, s), None);
        }
        if is_prime_power(a) && m >= 3 && m <= a + 1 && s >= 2 && r + s + 1 == n {
            let value = pow(a, s + 1) * three_chains_value(b, s);
            upper(Rule::OoaThreeChains, format!("q={a}, v={b}, s={s}"), value, None);
        }
    }

    if q.is_multiple_of(2) && m.is_multiple_of(2) && (2..=3).contains(&s) && r + 3 == n {
        let (c, half) = (q / 2, m / 2);
        if c < half && half <= 2 * c {
            let oca = ocan_inner(3, half, s, 2, &nested, true)?;
            let value = BigUint::from(c) * (oca.upper() + BigUint::from(kleitman_spencer_number(half)));
            upper(
                Rule::DoubledLength,
                format!(
                    "q={c}, m={half}, OCAN(3,{half},{s},2) <= {}, CAN(2,{half},2) = {}",
                    oca.upper(),
                    kleitman_spencer_number(half)
                ),
                value,
                None,
            );
        }
    }

    let volume = sphere_volume(q, m, s, r)?;
    cands.push(Cand {
        side: Side::Lower,
        rule: Rule::SphereCovering,
        inputs: format!("V = {volume}"),
        value: pow(q, n).div_ceil(&volume),
        plan: None,
    });

    if let Some(budget) = &ctx.search {
        match exact_covering_number(q, m, s, r, budget) {
            Ok(out) => {
                let note =
                    if out.exact { "complete".to_string() } else { format!("stopped after {} nodes", out.nodes) };
                cands.push(Cand {
                    side: Side::Lower,
                    rule: Rule::ExactSearch,
                    inputs: note.clone(),
                    value: out.lower.into(),
                    plan: None,
                });
                cands.push(Cand {
                    side: Side::Upper,
                    rule: Rule::ExactSearch,
                    inputs: note,
                    value: out.upper.into(),
                    plan: Some(Plan::Stored(Box::new(Witness::Code(out.witness)))),
                });
            }
            Err(Error::ResourceLimit(_)) => {}
            Err(e) => return Err(e),
        }
    }
    assemble(target, cands)
}

fn rules(b: &Bounds) -> String {
    b.record.upper.rules.iter().map(|r| r.name()).collect::<Vec<_>>().join(",")
}

pub fn two_chains_value(v: usize, s: usize) -> BigUint {
    pow(v, s - 2) * (pow(v, 2) - 1u32)
}

pub fn three_chains_value(v: usize, s: usize) -> BigUint {
    BigUint::from(v) * (pow(v, s) - 1u32)
}

/// `q^t v^{t-2} (v^2 - 1)`.
pub fn ooa_two_chains_value(q: usize, v: usize, t: usize) -> BigUint {
    pow(q, t) * two_chains_value(v, t)
}

/// Bounds on the smallest index-1 `OCA(N; t, m, s, v)`.
pub fn ocan_bounds(t: usize, m: usize, s: usize, v: usize) -> Result<Bounds> {
    ocan_bounds_with(t, m, s, v, &BoundsContext::default())
}

pub fn ocan_bounds_with(t: usize, m: usize, s: usize, v: usize, ctx: &BoundsContext) -> Result<Bounds> {
    ocan_inner(t, m, s, v, ctx, true)
}

fn ocan_inner(t: usize, m: usize, s: usize, v: usize, ctx: &BoundsContext, transfer: bool) -> Result<Bounds> {
    let poset = RtPoset::new(m, s)?;
    if t < 2 || t > poset.len() || s > t || !(2..=255).contains(&v) {
        return invalid(format!("need 2 <= t <= ms, s <= t, 2 <= v <= 255; got t={t} m={m} s={s} v={v}"));
    }
    let target = Target::Ocan { t, m, s, v };
    let mut cands = vec![Cand {
        side: Side::Lower,
        rule: Rule::OrthogonalCount,
        inputs: format!("v={v}, t={t}"),
        value: pow(v, t),
        plan: None,
    }];
    let mut upper = |rule, inputs: String, value, plan| {
        cands.push(Cand { side: Side::Upper, rule, inputs, value, plan });
    };

    let n = m * s;
    let entries = (v as u64).checked_pow(n as u32).and_then(|rows| rows.checked_mul(n as u64));
    let plan = entries.filter(|&e| e <= MAX_FACTORIAL_ENTRIES).map(|_| Plan::FullFactorial { t, m, s, v });
    upper(Rule::FullFactorial, format!("v={v}, ms={n}"), pow(v, n), plan);

    if t == 2 && v == 2 && s <= 2 && m >= 2 {
        let k = kleitman_spencer_number(m);
        upper(Rule::KleitmanSpencer, format!("m={m}"), k.into(), Some(Plan::KleitmanSpencer { m, s }));
    }
    if is_prime_power(v) && m <= v + 1 {
        let plan = (v <= MAX_FIELD_ORDER).then_some(Plan::ReedSolomon { q: v, t, m, s });
        upper(Rule::ReedSolomon, format!("q={v}"), pow(v, t), plan);
    }
    if is_prime_power(v + 1) && m <= v + 2 {
        let plan = (v < MAX_FIELD_ORDER).then_some(Plan::FusedReedSolomon { q: v + 1, t, m, s });
        upper(Rule::Fusion, format!("q={}", v + 1), pow(v + 1, t) - 2u32, plan);
    }
    for a in &ctx.arrays {
        if a.strength() == t && a.alphabet() == v && a.m() >= m && a.s() >= s {
            let w = restrict_to_shape(a, m, s)?;
            upper(
                Rule::UserArray,
                format!("N={} on [{}x{}]", a.rows(), a.m(), a.s()),
                a.rows().into(),
                Some(Plan::Stored(Box::new(Witness::Array(w)))),
            );
        }
    }
    if transfer {
        let other = if s == t && t <= m * (t - 1) {
            Some((t - 1, true))
        } else if s + 1 == t && t <= m * t {
            Some((t, false))
        } else {
            None
        };
        if let Some((depth, extend)) = other {
            let b = ocan_inner(t, m, depth, v, &ctx.rules_only(), false)?;
            let plan =
                b.plan.clone().map(|p| if extend { Plan::Extend(Box::new(p)) } else { Plan::DropBottom(Box::new(p)) });
            let inputs =
                format!("OCAN({t},{m},{depth},{v}) in [{}, {}] [{}]", b.record.lower.value, b.upper(), rules(&b));
            cands.push(Cand {
                side: Side::Lower,
                rule: Rule::DepthTransfer,
                inputs: inputs.clone(),
                value: b.record.lower.value.clone(),
                plan: None,
            });
            cands.push(Cand { side: Side::Upper, rule: Rule::DepthTransfer, inputs, value: b.upper().clone(), plan });
        }
    }
    if let Some(budget) = &ctx.search {
        match exact_ocan(t, m, s, v, budget) {
            Ok(out) => {
                let note =
                    if out.exact { "complete".to_string() } else { format!("stopped after {} nodes", out.nodes) };
                cands.push(Cand {
                    side: Side::Lower,
                    rule: Rule::ExactSearch,
                    inputs: note.clone(),
                    value: out.lower.into(),
                    plan: None,
                });
                cands.push(Cand {
                    side: Side::Upper,
                    rule: Rule::ExactSearch,
                    inputs: note,
                    value: out.upper.into(),
                    plan: Some(Plan::Stored(Box::new(Witness::Array(out.witness)))),
                });
            }
            Err(Error::ResourceLimit(_)) => {}
            Err(e) => return Err(e),
        }
    }
    assemble(target, cands)
}

pub fn bounds_for(target: Target, ctx: &BoundsContext) -> Result<Bounds> {
    match target {
        Target::K { q, m, s, r } => k_bounds_with(q, m, s, r, ctx),
        Target::Ocan { t, m, s, v } => ocan_bounds_with(t, m, s, v, ctx),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => invalid(format!("unknown format `{s}` (expected text, csv or json)")),
        }
    }
}

/// One line of a request file and what became of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub request: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub record: Option<BoundRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// Evaluates a request file: one `K q m s R` or `OCAN t m s v` per line,
/// blank lines and `#` comments skipped. Rows keep file order.
pub fn evaluate_requests(text: &str, ctx: &BoundsContext) -> Vec<TableRow> {
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
    lines
        .par_iter()
        .map(|&line| {
            let outcome = line.parse::<Target>().and_then(|t| bounds_for(t, ctx));
            match outcome {
                Ok(b) => TableRow { request: line.to_string(), record: Some(b.record), error: None },
                Err(e) => TableRow { request: line.to_string(), record: None, error: Some(e.to_string()) },
            }
        })
        .collect()
}

fn rule_list(rules: &[Rule]) -> String {
    rules.iter().map(|r| r.name()).collect::<Vec<_>>().join(";")
}

pub fn emit_table(rows: &[TableRow], format: Format) -> Result<String> {
    match format {
        Format::Json => {
            Ok(serde_json::to_string_pretty(rows).map_err(|e| Error::InvalidArgument(e.to_string()))? + "\n")
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| Error::InvalidArgument(e.to_string());
            w.write_record([
                "request",
                "target",
                "lower",
                "lower_rules",
                "upper",
                "upper_rules",
                "constructive",
                "chain",
                "error",
            ])
            .map_err(csv_err)?;
            for row in rows {
                let fields: Vec<String> = match &row.record {
                    Some(r) => vec![
                        row.request.clone(),
                        r.target.to_string(),
                        r.lower.value.to_string(),
                        rule_list(&r.lower.rules),
                        r.upper.value.to_string(),
                        rule_list(&r.upper.rules),
                        r.constructive.to_string(),
                        r.chain
                            .iter()
                            .map(|s| format!("{}:{}={}", s.rule, side_name(s.side), s.value))
                            .collect::<Vec<_>>()
                            .join(";"),
                        String::new(),
                    ],
                    None => {
                        let mut f = vec![row.request.clone()];
                        f.extend(std::iter::repeat_n(String::new(), 7));
                        f.push(row.error.clone().unwrap_or_default());
                        f
                    }
                };
                w.write_record(&fields).map_err(csv_err)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::InvalidArgument(e.to_string()))
        }
        Format::Text => {
            let mut out = String::new();
            for row in rows {
                match &row.record {
                    Some(r) => out.push_str(&r.to_string()),
                    None => out.push_str(&format!("{}  error: {}\n", row.request, row.error.as_deref().unwrap_or(""))),
                }
            }
            Ok(out)
        }
    }
}

fn side_name(side: Side) -> &'static str {
    match side {
        Side::Lower => "lower",
        Side::Upper => "upper",
    }
}

impl fmt::Display for BoundRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}  lower {} [{}]  upper {} [{}]{}",
            self.target,
            self.lower.value,
            rule_list(&self.lower.rules),
            self.upper.value,
            rule_list(&self.upper.rules),
            if self.constructive { "" } else { "  formula-only" }
        )?;
        for s in &self.chain {
            writeln!(
                f,
                "    {:<5} {:<22} {:>8}  {}{}  ({})",
                side_name(s.side),
                s.rule.name(),
                s.value,
                s.cited,
                if s.constructive || s.side == Side::Lower { "" } else { " [formula-only]" },
                s.inputs
            )?;
        }
        Ok(())
    }
}

/// Upper value as a machine integer, when it fits.
pub fn upper_u64(b: &Bounds) -> Option<u64> {
    b.upper().to_u64()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn upper(b: &Bounds) -> u64 {
        upper_u64(b).unwrap()
    }

    fn check_witness(b: &Bounds) -> Witness {
        let w = b.witness().unwrap().expect("constructive upper bound");
        assert!(w.verify().unwrap(), "{}", b.record.target);
        assert!(w.size() as u64 <= upper(b));
        w
    }

    #[test]
    fn surjective_lift_example() {
        let b = k_bounds(3, 3, 2, 4).unwrap();
        assert_eq!(upper(&b), 5);
        assert_eq!(b.record.upper.rules, vec![Rule::SurjectiveLift]);
        assert!(b.record.lower.value >= BigUint::from(3u32));
        assert_eq!(check_witness(&b).size(), 5);
        for s in 1..=3 {
            assert_eq!(upper(&k_bounds(3, 3, s, 3 * s - 2).unwrap()), 5);
        }
    }

    #[test]
    fn two_chains_example() {
        let b = k_bounds(2, 2, 3, 3).unwrap();
        assert_eq!(upper(&b), 6);
        assert_eq!(b.record.upper.rules, vec![Rule::TwoChains]);
        check_witness(&b);
    }

    #[test]
    fn product_beats_two_chains() {
        let b = k_bounds(4, 2, 2, 2).unwrap();
        assert_eq!(upper(&b), 12);
        assert!(b.record.upper.rules.contains(&Rule::OcaProduct));
        let two = b.record.chain.iter().find(|s| s.rule == Rule::TwoChains).unwrap();
        assert_eq!(two.value, BigUint::from(15u32));
        assert!(check_witness(&b).size() <= 12);
    }

    #[test]
    fn three_chains_applies_only_on_its_guard() {
        let b = k_bounds(2, 3, 2, 3).unwrap();
        assert!(b.record.chain.iter().any(|s| s.rule == Rule::ThreeChains));
        assert!(upper(&b) <= 6);
        let b = k_bounds(2, 3, 2, 2).unwrap();
        assert!(!b.record.chain.iter().any(|s| s.rule == Rule::ThreeChains));
    }

    #[test]
    fn surjective_guard_is_exact() {
        // m = (t-1)q needs t = ms - R; here t = 3 and (t-1)q = 6 != 3
        let b = k_bounds(3, 3, 2, 3).unwrap();
        assert!(!b.record.chain.iter().any(|s| s.rule == Rule::SurjectiveLift));
        let b = k_bounds(2, 4, 1, 1).unwrap();
        assert!(b.record.chain.iter().any(|s| s.rule == Rule::SurjectiveLift));
        let b = k_bounds(2, 4, 1, 2).unwrap();
        assert!(!b.record.chain.iter().any(|s| s.rule == Rule::SurjectiveLift));
    }

    #[test]
    fn constant_words_for_long_spaces() {
        // t = 2, q = 2: m >= 3
        let b = k_bounds(2, 3, 2, 4).unwrap();
        assert_eq!(upper(&b), 2);
        assert!(b.record.upper.rules.contains(&Rule::ConstantWords));
        check_witness(&b);
        let b = k_bounds(3, 3, 2, 4).unwrap();
        assert!(!b.record.chain.iter().any(|s| s.rule == Rule::ConstantWords));
    }

    #[test]
    fn ocan_examples() {
        let b = ocan_bounds(2, 4, 2, 2).unwrap();
        assert_eq!(upper(&b), 5);
        // the depth-1 array transfers to the same value
        assert_eq!(b.record.upper.rules, vec![Rule::KleitmanSpencer, Rule::DepthTransfer]);
        let fusion = b.record.chain.iter().find(|s| s.rule == Rule::Fusion).unwrap();
        assert_eq!(fusion.value, BigUint::from(7u32));
        check_witness(&b);

        let b = ocan_bounds(3, 3, 3, 2).unwrap();
        assert_eq!((b.record.lower.value.clone(), upper(&b)), (BigUint::from(8u32), 8));
        check_witness(&b);

        for m in 2..=12 {
            let b = ocan_bounds(2, m, 2, 2).unwrap();
            assert_eq!(upper(&b), kleitman_spencer_number(m) as u64);
        }
    }

    #[test]
    fn depth_transfer_reaches_both_depths() {
        let ca = kleitman_spencer_ca(5).unwrap().with_strength(2).unwrap();
        let ctx = BoundsContext::new().with_array(ca).unwrap();
        let b = ocan_bounds_with(2, 5, 2, 2, &ctx).unwrap();
        assert!(b.record.chain.iter().any(|s| s.rule == Rule::DepthTransfer && s.side == Side::Upper));
        check_witness(&b);
        // a depth-3 array of strength 3 from a depth-2 one
        let b = ocan_bounds(3, 4, 3, 2).unwrap();
        assert_eq!(upper(&b), 25);
        assert!(b.record.chain.iter().any(|s| s.rule == Rule::DepthTransfer && s.value == BigUint::from(25u32)));
        check_witness(&b);
    }

    #[test]
    fn user_arrays_are_verified_and_used() {
        let mut bad = kleitman_spencer_ca(3).unwrap().to_rows();
        bad.pop();
        let bad = OrderedArray::new(2, 3, 1, 2, 1, bad).unwrap();
        assert!(matches!(BoundsContext::new().with_array(bad), Err(Error::Dependency(_))));
    }

    #[test]
    fn search_tightens() {
        let ctx = BoundsContext::new().with_search(SearchBudget::default());
        let b = k_bounds_with(2, 2, 3, 3, &ctx).unwrap();
        assert_eq!(b.record.lower.value, BigUint::from(6u32));
        assert_eq!(upper(&b), 6);
        let b = ocan_bounds_with(2, 3, 1, 2, &ctx).unwrap();
        assert_eq!(b.record.lower.value, BigUint::from(4u32));
    }

    #[test]
    fn formula_only_rules() {
        // q=3 prime power, v=2: K_6(4,2,6), t=2 and 4 <= (t-1)v fails, so take t=3: K_6(4,3,9)
        let b = k_bounds(6, 4, 3, 9).unwrap();
        let step = b.record.chain.iter().find(|s| s.rule == Rule::OoaTwoChains).unwrap();
        assert!(!step.constructive);
        assert_eq!(step.value, ooa_two_chains_value(3, 2, 3));
        // (q-1)v with q=3, v=2: K_4(4,2,6)
        let b = k_bounds(4, 4, 2, 6).unwrap();
        for rule in [Rule::FusedOoaProduct, Rule::FusedOoaTwoChains] {
            assert!(b.record.chain.iter().any(|s| s.rule == rule && !s.constructive));
        }
        let b = k_bounds(4, 3, 2, 3).unwrap();
        let step = b.record.chain.iter().find(|s| s.rule == Rule::OoaThreeChains).unwrap();
        assert_eq!(step.value, BigUint::from(8u32 * 2 * 3));
        let b = k_bounds(4, 6, 2, 9).unwrap();
        assert!(b.record.chain.iter().any(|s| s.rule == Rule::DoubledLength));
    }

    #[test]
    fn composite_never_exceeds_direct_two_chains() {
        for q in [2usize, 3, 4, 5] {
            for v in 2..=3usize {
                for t in 2..=4usize {
                    if q < (t - 1) * v {
                        assert!(ooa_two_chains_value(q, v, t) <= two_chains_value(q * v, t), "q={q} v={v} t={t}");
                    }
                }
            }
        }
    }

    #[test]
    fn guards() {
        assert!(k_bounds(2, 2, 2, 0).is_err());
        assert!(k_bounds(2, 2, 2, 4).is_err());
        assert!(k_bounds(1, 2, 2, 1).is_err());
        assert!(ocan_bounds(2, 2, 3, 2).is_err());
        assert!(ocan_bounds(5, 2, 2, 2).is_err());
    }

    #[test]
    fn table_round_trip() {
        let rows = evaluate_requests("# demo\nK 3 3 2 4\n\nOCAN 2 4 2 2\nK 2 2\n", &BoundsContext::new());
        assert_eq!(rows.len(), 3);
        assert!(rows[2].error.is_some());
        let json = emit_table(&rows, Format::Json).unwrap();
        let back: Vec<TableRow> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rows);
        let csv = emit_table(&rows, Format::Csv).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(1).unwrap().starts_with("K 3 3 2 4,\"K_3(3,2,4)\","));
        let text = emit_table(&rows, Format::Text).unwrap();
        assert!(text.starts_with("K_3(3,2,4)  lower "));
        assert_eq!(emit_table(&rows, Format::Text).unwrap(), text);
        assert!("yaml".parse::<Format>().is_err());
    }
}
