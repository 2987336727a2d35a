//! The HeLP method: eigenvalue multiplicities of a putative torsion unit under
//! ordinary and Brauer characters, and enumeration of integral partial
//! augmentations for which all of them are nonnegative integers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::arith;
use crate::cyclo::{CycloError, Cyclotomic, RootOfUnity};
use crate::grpdata::{CharKind, ClassFunction, GroupData, SideConstraint};
use crate::lp::{Affine, Bound, Polyhedron};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HelpError {
    #[error("character {character} has no value on class {class}")]
    MissingValue { character: String, class: String },
    #[error("characteristic {p} of {character} divides the order {order}")]
    CharacteristicDivides { character: String, p: u64, order: u64 },
    #[error("unknown character `{0}`")]
    UnknownCharacter(String),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("{group}: the class list is incomplete, so {what} cannot be decided")]
    IncompleteClasses { group: String, what: String },
    #[error("order {order}, branch {branch}: the relaxation is unbounded along {direction}")]
    Unbounded { order: u64, branch: String, direction: String },
    #[error("order {order}, branch {branch}: search box of {size} points exceeds the limit")]
    SearchTooLarge { order: u64, branch: String, size: u128 },
    #[error("integer overflow while scaling the constraints of order {0}")]
    Overflow(u64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Cyclo(#[from] CycloError),
}

/// Partial augmentations of a unit `u` of order `n` and of its proper powers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct PartialAugmentationSystem {
    pub unit_order: u64,
    /// `ε(u^d)` for each divisor `d < n`, nonzero entries only.
    pub slots: BTreeMap<u64, BTreeMap<String, i64>>,
    /// Label of the system chosen for `u^p`, per prime `p | n`.
    pub powers: BTreeMap<u64, String>,
}

impl PartialAugmentationSystem {
    pub fn identity() -> Self {
        PartialAugmentationSystem { unit_order: 1, slots: BTreeMap::new(), powers: BTreeMap::new() }
    }

    /// The system of a group element of the given class.
    pub fn trivial(g: &GroupData, class: &str) -> Result<Self, HelpError> {
        let c = g.class(class).ok_or_else(|| HelpError::UnknownClass(class.to_string()))?;
        let n = c.order;
        let mut slots = BTreeMap::new();
        for d in arith::divisors(n) {
            if d == n {
                continue;
            }
            let img = power_of(g, class, d)?;
            slots.insert(d, BTreeMap::from([(img, 1)]));
        }
        let mut powers = BTreeMap::new();
        for p in arith::prime_divisors(n) {
            powers.insert(p, power_of(g, class, p)?);
        }
        Ok(PartialAugmentationSystem { unit_order: n, slots, powers })
    }

    /// A system from `ε(u)` and a candidate for every `u^p`.
    pub fn from_parts(
        unit_order: u64,
        epsilon: BTreeMap<String, i64>,
        power_systems: &BTreeMap<u64, PartialAugmentationSystem>,
    ) -> Result<Self, HelpError> {
        let mut slots = BTreeMap::new();
        slots.insert(1, epsilon.into_iter().filter(|(_, v)| *v != 0).collect());
        for d in arith::divisors(unit_order) {
            if d == 1 || d == unit_order {
                continue;
            }
            let mut found: Option<BTreeMap<String, i64>> = None;
            for (&p, sys) in power_systems {
                if d % p != 0 {
                    continue;
                }
                let s = sys.slot(d / p);
                match &found {
                    None => found = Some(s),
                    Some(prev) if *prev != s => {
                        return Err(HelpError::Precondition(format!("power systems disagree on u^{d}")))
                    }
                    Some(_) => {}
                }
            }
            let s = found.ok_or_else(|| HelpError::Precondition(format!("no system given for u^{d}")))?;
            slots.insert(d, s);
        }
        let powers = power_systems.iter().map(|(&p, s)| (p, s.label())).collect();
        Ok(PartialAugmentationSystem { unit_order, slots, powers })
    }

    /// `ε(u^d)`; for `d = n` the identity.
    pub fn slot(&self, d: u64) -> BTreeMap<String, i64> {
        if d.is_multiple_of(self.unit_order) {
            return BTreeMap::from([("1a".to_string(), 1)]);
        }
        self.slots.get(&d).cloned().unwrap_or_default()
    }

    pub fn epsilon(&self, class: &str) -> i64 {
        self.slots.get(&1).and_then(|s| s.get(class)).copied().unwrap_or(0)
    }

    /// The system of `u^p` inside this one.
    pub fn power_system(&self, p: u64) -> PartialAugmentationSystem {
        let m = self.unit_order / arith::gcd(p, self.unit_order);
        let step = self.unit_order / m;
        let mut slots = BTreeMap::new();
        for e in arith::divisors(m) {
            if e != m {
                slots.insert(e, self.slot(e * step));
            }
        }
        let mut sub = PartialAugmentationSystem { unit_order: m, slots, powers: BTreeMap::new() };
        for q in arith::prime_divisors(m) {
            let label = sub.power_system(q).label();
            sub.powers.insert(q, label);
        }
        sub
    }

    /// Rational conjugacy test: every entry of every slot is nonnegative.
    pub fn is_trivial(&self) -> bool {
        self.slots.values().flat_map(|s| s.values()).all(|&v| v >= 0)
    }

    /// Class name for a group-element system, else an explicit vector.
    pub fn label(&self) -> String {
        if self.unit_order == 1 {
            return "1a".to_string();
        }
        let s = self.slot(1);
        if s.len() == 1 && self.is_trivial() {
            if let Some((c, 1)) = s.iter().next().map(|(c, v)| (c.clone(), *v)) {
                return c;
            }
        }
        let inner: Vec<String> = s.iter().map(|(c, v)| format!("{c}={v}")).collect();
        format!("[{}]", inner.join(","))
    }

    /// `ε(u)` over `classes`, in the given order.
    pub fn vector(&self, classes: &[String]) -> Vec<i64> {
        classes.iter().map(|c| self.epsilon(c)).collect()
    }

    /// Nonzero `(class index, value)` pairs of `ε(u)`, then of the powers.
    fn sort_key(&self, g: &GroupData) -> Vec<(u64, usize, i64)> {
        let mut key = Vec::new();
        for (d, slot) in &self.slots {
            let mut part: Vec<_> = slot.iter().map(|(c, v)| (*d, g.class_index(c).unwrap_or(usize::MAX), *v)).collect();
            part.sort();
            key.extend(part);
        }
        key
    }
}

impl PartialAugmentationSystem {
    /// `ε(u)` in the class order of `g`, e.g. `2a=-2, 3a=3`.
    pub fn render(&self, g: &GroupData) -> String {
        let s = self.slot(1);
        let mut parts: Vec<_> = s.iter().collect();
        parts.sort_by_key(|(c, _)| g.class_index(c).unwrap_or(usize::MAX));
        parts.iter().map(|(c, v)| format!("{c}={v}")).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for PartialAugmentationSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.slot(1);
        let inner: Vec<String> = s.iter().map(|(c, v)| format!("{c}={v}")).collect();
        write!(f, "order {} ({})", self.unit_order, inner.join(", "))?;
        for (p, l) in &self.powers {
            write!(f, " u^{p}~{l}")?;
        }
        Ok(())
    }
}

fn power_of(g: &GroupData, class: &str, d: u64) -> Result<String, HelpError> {
    g.power_class(class, d as i64)
        .ok_or_else(|| HelpError::Precondition(format!("power map of {class} does not determine x^{d}")))
}

/// Eigenvalue multiplicities `μ_l` of `ζ_n^l`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EigenvalueMultiset {
    pub order: u64,
    #[serde(serialize_with = "ser_rationals")]
    pub mult: Vec<BigRational>,
}

impl EigenvalueMultiset {
    /// A multiset from listed exponents of `ζ_order`.
    pub fn from_exponents(order: u64, exps: &[u64]) -> Self {
        let mut mult = vec![BigRational::zero(); order as usize];
        for &e in exps {
            mult[(e % order) as usize] += BigRational::from_integer(1.into());
        }
        EigenvalueMultiset { order, mult }
    }

    pub fn total(&self) -> BigRational {
        self.mult.iter().sum()
    }

    /// Integer counts when every multiplicity is a nonnegative integer.
    pub fn counts(&self) -> Option<Vec<u64>> {
        self.mult
            .iter()
            .map(|m| if m.is_integer() && !m.is_negative() { m.to_integer().to_u64() } else { None })
            .collect()
    }

    pub fn is_admissible(&self) -> bool {
        self.counts().is_some()
    }

    /// Nonzero entries as roots of unity with their multiplicities.
    pub fn roots(&self) -> Vec<(RootOfUnity, BigRational)> {
        self.mult
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_zero())
            .map(|(l, m)| (RootOfUnity::new(self.order, l as i64), m.clone()))
            .collect()
    }
}

fn ser_rationals<S: serde::Serializer>(v: &[BigRational], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|q| q.to_string()))
}

fn ser_rational<S: serde::Serializer>(q: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&q.to_string())
}

fn rational(k: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(k))
}

fn check_characteristic(f: &ClassFunction, order: u64) -> Result<(), HelpError> {
    if let CharKind::Brauer(p) = f.kind {
        if order.is_multiple_of(p) {
            return Err(HelpError::CharacteristicDivides { character: f.name.clone(), p, order });
        }
    }
    Ok(())
}

/// `f(u^d) = Σ_x ε_x(u^d) f(x)`.
pub fn value_at_unit(f: &ClassFunction, pas: &PartialAugmentationSystem, d: u64) -> Result<Cyclotomic, HelpError> {
    let n = pas.unit_order;
    let d = arith::gcd(d, n);
    check_characteristic(f, n / d)?;
    let mut acc = Cyclotomic::zero();
    for (class, &e) in &pas.slot(d) {
        let v = f
            .value(class)
            .ok_or_else(|| HelpError::MissingValue { character: f.name.clone(), class: class.clone() })?;
        acc += &v.scalar_mul(&rational(e));
    }
    Ok(acc)
}

/// `μ_l = (1/n) Σ_{g | n} Tr_{Q(ζ_{n/g})/Q}(f(u^g) ζ_{n/g}^{-l})`.
pub fn multiplicities(f: &ClassFunction, pas: &PartialAugmentationSystem) -> Result<EigenvalueMultiset, HelpError> {
    let n = pas.unit_order;
    let values: Vec<(u64, Cyclotomic)> =
        arith::divisors(n).into_iter().map(|g| Ok((g, value_at_unit(f, pas, g)?))).collect::<Result<_, HelpError>>()?;
    let mut mult = Vec::with_capacity(n as usize);
    for l in 0..n as i64 {
        let mut acc = BigRational::zero();
        for (g, v) in &values {
            let k = n / g;
            acc += (v * &Cyclotomic::root(k, -l)).trace_over(k)?;
        }
        mult.push(acc / rational(n as i64));
    }
    Ok(EigenvalueMultiset { order: n, mult })
}

/// Run configuration for the enumeration.
#[derive(Debug, Clone, Default)]
pub struct HelpConfig {
    /// Character names; empty means every character of the group.
    pub characters: Vec<String>,
    /// A-priori facts, applied to units of their stated order.
    pub side: Vec<SideConstraint>,
    /// Largest integer box searched in one branch.
    pub max_box: Option<u128>,
}

impl HelpConfig {
    pub fn with_characters(names: &[&str]) -> Self {
        HelpConfig { characters: names.iter().map(|s| s.to_string()).collect(), ..Default::default() }
    }

    pub fn side(mut self, side: &[SideConstraint]) -> Self {
        self.side.extend_from_slice(side);
        self
    }
}

/// μ form `coeffs · ε + constant` for one character and exponent `l`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MuForm {
    pub character: String,
    pub l: u64,
    #[serde(serialize_with = "ser_rationals")]
    pub coeffs: Vec<BigRational>,
    #[serde(serialize_with = "ser_rational")]
    pub constant: BigRational,
}

/// The constraint system of one power-assignment branch.
#[derive(Debug, Clone, Serialize)]
pub struct BranchSystem {
    pub order: u64,
    pub powers: BTreeMap<u64, String>,
    /// Free variables, in class order.
    pub variables: Vec<String>,
    /// Classes fixed by side constraints.
    pub fixed: BTreeMap<String, i64>,
    pub forms: Vec<MuForm>,
    /// Characters left out of this branch for lack of values.
    pub skipped: Vec<String>,
    #[serde(skip)]
    power_systems: BTreeMap<u64, PartialAugmentationSystem>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchReport {
    pub powers: BTreeMap<u64, String>,
    pub skipped: Vec<String>,
    pub bounds: Vec<(String, i64, i64)>,
    pub solutions: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderReport {
    pub order: u64,
    pub variables: Vec<String>,
    pub characters: Vec<String>,
    pub skipped: Vec<String>,
    pub side: Vec<SideConstraint>,
    pub branches: Vec<BranchReport>,
    pub systems: Vec<PartialAugmentationSystem>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Enumeration {
    pub order: u64,
    /// Set when the exponent of the group already excludes the order.
    pub excluded_by_exponent: bool,
    pub main: OrderReport,
    pub suborders: Vec<OrderReport>,
}

impl Enumeration {
    pub fn systems(&self) -> &[PartialAugmentationSystem] {
        &self.main.systems
    }
}

struct Engine<'a> {
    g: &'a GroupData,
    chars: Vec<&'a ClassFunction>,
    side: Vec<SideConstraint>,
    max_box: u128,
    explicit: bool,
}

impl<'a> Engine<'a> {
    fn new(g: &'a GroupData, cfg: &HelpConfig) -> Result<Self, HelpError> {
        let chars = if cfg.characters.is_empty() {
            g.characters().collect()
        } else {
            cfg.characters
                .iter()
                .map(|n| g.character(n).ok_or_else(|| HelpError::UnknownCharacter(n.clone())))
                .collect::<Result<Vec<_>, _>>()?
        };
        let mut side = g.side_constraints.clone();
        for s in &cfg.side {
            if g.class(&s.class).is_none() {
                return Err(HelpError::UnknownClass(s.class.clone()));
            }
            if s.provenance.trim().is_empty() {
                return Err(HelpError::Precondition(format!("side constraint on {} lacks a provenance", s.class)));
            }
            side.push(s.clone());
        }
        Ok(Engine { g, chars, side, max_box: cfg.max_box.unwrap_or(50_000_000), explicit: !cfg.characters.is_empty() })
    }

    fn variables(&self, m: u64) -> Vec<String> {
        self.g.classes.iter().filter(|c| c.order != 1 && m.is_multiple_of(c.order)).map(|c| c.name.clone()).collect()
    }

    /// Characters applicable to order `m`. Without an explicit selection,
    /// characters lacking a value on a needed class are skipped.
    fn usable(&self, m: u64) -> (Vec<&'a ClassFunction>, Vec<String>) {
        let fixed = self.side_for(m).unwrap_or_default();
        let needed: Vec<String> = self
            .g
            .classes
            .iter()
            .filter(|c| m.is_multiple_of(c.order) && fixed.get(&c.name) != Some(&0))
            .map(|c| c.name.clone())
            .collect();
        let mut used = Vec::new();
        let mut skipped = Vec::new();
        for f in &self.chars {
            match f.kind {
                CharKind::Brauer(p) if m.is_multiple_of(p) => {
                    skipped.push(format!("{} (characteristic {p} divides {m})", f.name));
                    continue;
                }
                _ => {}
            }
            if !self.explicit {
                if let Some(c) = needed.iter().find(|c| f.value(c).is_none()) {
                    skipped.push(format!("{} (no value on {c})", f.name));
                    continue;
                }
            }
            used.push(*f);
        }
        (used, skipped)
    }

    fn side_for(&self, m: u64) -> Result<BTreeMap<String, i64>, HelpError> {
        let mut fixed = BTreeMap::new();
        for s in self.side.iter().filter(|s| s.unit_order == m) {
            if let Some(prev) = fixed.insert(s.class.clone(), s.value) {
                if prev != s.value {
                    return Err(HelpError::Precondition(format!(
                        "conflicting side constraints on {} for order {m}",
                        s.class
                    )));
                }
            }
        }
        Ok(fixed)
    }

    /// Consistent choices of a system for every `u^p`.
    fn branches(
        &self,
        m: u64,
        solved: &BTreeMap<u64, Vec<PartialAugmentationSystem>>,
    ) -> Vec<BTreeMap<u64, PartialAugmentationSystem>> {
        let primes = arith::prime_divisors(m);
        let mut acc: Vec<BTreeMap<u64, PartialAugmentationSystem>> = vec![BTreeMap::new()];
        for &p in &primes {
            let cands: Vec<PartialAugmentationSystem> = if m / p == 1 {
                vec![PartialAugmentationSystem::identity()]
            } else {
                solved.get(&(m / p)).cloned().unwrap_or_default()
            };
            let mut next = Vec::new();
            for partial in &acc {
                for c in &cands {
                    let ok = partial.iter().all(|(&q, other)| c.slot(q) == other.slot(p));
                    if ok {
                        let mut b = partial.clone();
                        b.insert(p, c.clone());
                        next.push(b);
                    }
                }
            }
            acc = next;
        }
        acc
    }

    fn branch_system(
        &self,
        m: u64,
        powers: BTreeMap<u64, PartialAugmentationSystem>,
        chars: &[&ClassFunction],
        fixed: &BTreeMap<String, i64>,
    ) -> Result<BranchSystem, HelpError> {
        let all_vars = self.variables(m);
        let variables: Vec<String> = all_vars.iter().filter(|v| !fixed.contains_key(*v)).cloned().collect();
        // Slots of the proper powers; ε(u) is left empty here.
        let skeleton = PartialAugmentationSystem::from_parts(m, BTreeMap::new(), &powers)?;
        let mut forms = Vec::new();
        let mut skipped = Vec::new();
        for f in chars {
            if !self.explicit {
                let missing = skeleton.slots.values().flat_map(|s| s.keys()).find(|c| f.value(c).is_none());
                if let Some(c) = missing {
                    skipped.push(format!("{} (no value on {c})", f.name));
                    continue;
                }
            }
            let mut powered = Vec::new();
            for g in arith::divisors(m) {
                if g > 1 {
                    powered.push((g, value_at_unit(f, &skeleton, g)?));
                }
            }
            let lookup = |class: &str| {
                f.value(class)
                    .cloned()
                    .ok_or_else(|| HelpError::MissingValue { character: f.name.clone(), class: class.to_string() })
            };
            let var_values: Vec<Cyclotomic> = variables.iter().map(|v| lookup(v)).collect::<Result<_, _>>()?;
            let mut fixed_value = Cyclotomic::zero();
            for (c, &e) in fixed {
                if e != 0 {
                    fixed_value += &lookup(c)?.scalar_mul(&rational(e));
                }
            }
            let nm = rational(m as i64);
            for l in 0..m as i64 {
                let zl = Cyclotomic::root(m, -l);
                let coeffs = var_values
                    .iter()
                    .map(|v| Ok((v * &zl).trace_over(m)? / &nm))
                    .collect::<Result<Vec<_>, HelpError>>()?;
                let mut constant = (&fixed_value * &zl).trace_over(m)?;
                for (g, v) in &powered {
                    let k = m / g;
                    constant += (v * &Cyclotomic::root(k, -l)).trace_over(k)?;
                }
                forms.push(MuForm { character: f.name.clone(), l: l as u64, coeffs, constant: constant / &nm });
            }
        }
        let labels = powers.iter().map(|(&p, s)| (p, s.label())).collect();
        Ok(BranchSystem {
            order: m,
            powers: labels,
            variables,
            fixed: fixed.clone(),
            forms,
            skipped,
            power_systems: powers,
        })
    }

    fn solve_branch(&self, sys: &BranchSystem) -> Result<(BranchReport, Vec<PartialAugmentationSystem>), HelpError> {
        let nv = sys.variables.len();
        let target = 1 - sys.fixed.values().sum::<i64>();
        let branch = describe_powers(&sys.powers);
        let mut report =
            BranchReport { powers: sys.powers.clone(), skipped: sys.skipped.clone(), bounds: Vec::new(), solutions: 0 };
        if nv == 0 {
            let ok = target == 0 && sys.forms.iter().all(|f| f.constant.is_integer() && !f.constant.is_negative());
            if !ok {
                return Ok((report, Vec::new()));
            }
            let found = vec![self.assemble(sys, &[])?];
            report.solutions = 1;
            return Ok((report, found));
        }
        let mut distinct: Vec<&MuForm> = Vec::new();
        let mut seen = BTreeSet::new();
        for f in &sys.forms {
            if seen.insert((f.coeffs.clone(), f.constant.clone())) {
                distinct.push(f);
            }
        }
        let sum = Affine { coeffs: vec![rational(1); nv], constant: rational(-target) };
        let ineqs: Vec<Affine> =
            distinct.iter().map(|f| Affine { coeffs: f.coeffs.clone(), constant: f.constant.clone() }).collect();
        let Some(poly) = Polyhedron::new(nv, &[sum], &ineqs) else {
            return Ok((report, Vec::new()));
        };
        let mut lo = Vec::with_capacity(nv);
        let mut hi = Vec::with_capacity(nv);
        for i in 0..nv {
            let mut e = vec![rational(0); nv];
            e[i] = rational(1);
            let mut ends = [0i64; 2];
            for (k, maximize) in [false, true].into_iter().enumerate() {
                match poly.optimize(&e, maximize) {
                    Bound::Finite(v) => {
                        let r = if maximize { v.floor() } else { v.ceil() };
                        ends[k] = r.to_integer().to_i64().ok_or(HelpError::Overflow(sys.order))?;
                    }
                    Bound::Unbounded(dir) => {
                        let parts: Vec<String> = sys
                            .variables
                            .iter()
                            .zip(&dir)
                            .filter(|(_, d)| !d.is_zero())
                            .map(|(v, d)| format!("{v}:{d}"))
                            .collect();
                        return Err(HelpError::Unbounded {
                            order: sys.order,
                            branch,
                            direction: format!("({})", parts.join(", ")),
                        });
                    }
                }
            }
            lo.push(ends[0]);
            hi.push(ends[1]);
            report.bounds.push((sys.variables[i].clone(), ends[0], ends[1]));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Ok((report, Vec::new()));
        }
        let size: u128 = lo.iter().zip(&hi).take(nv - 1).map(|(a, b)| (b - a + 1) as u128).product();
        if size > self.max_box {
            return Err(HelpError::SearchTooLarge { order: sys.order, branch, size });
        }
        let int_forms = distinct
            .iter()
            .map(|f| IntForm::new(f))
            .collect::<Option<Vec<_>>>()
            .ok_or(HelpError::Overflow(sys.order))?;
        let search = Search { forms: &int_forms, lo: &lo, hi: &hi, target };
        let points = search.run().ok_or(HelpError::Overflow(sys.order))?;
        let mut found = Vec::with_capacity(points.len());
        for p in points {
            found.push(self.assemble(sys, &p)?);
        }
        report.solutions = found.len();
        Ok((report, found))
    }

    fn assemble(&self, sys: &BranchSystem, point: &[i64]) -> Result<PartialAugmentationSystem, HelpError> {
        let mut eps: BTreeMap<String, i64> = sys.fixed.clone();
        for (v, &x) in sys.variables.iter().zip(point) {
            eps.insert(v.clone(), x);
        }
        PartialAugmentationSystem::from_parts(sys.order, eps, &sys.power_systems)
    }

    fn solve_order(
        &self,
        m: u64,
        solved: &BTreeMap<u64, Vec<PartialAugmentationSystem>>,
    ) -> Result<OrderReport, HelpError> {
        let (chars, skipped) = self.usable(m);
        let fixed = self.side_for(m)?;
        let branches = self.branches(m, solved);
        let results: Vec<(BranchReport, Vec<PartialAugmentationSystem>)> = branches
            .into_par_iter()
            .map(|b| {
                let sys = self.branch_system(m, b, &chars, &fixed)?;
                self.solve_branch(&sys)
            })
            .collect::<Result<_, _>>()?;
        let mut reports = Vec::new();
        let mut systems = Vec::new();
        for (r, s) in results {
            reports.push(r);
            systems.extend(s);
        }
        reports.sort_by(|a, b| a.powers.cmp(&b.powers));
        systems.sort_by_key(|s| s.sort_key(self.g));
        systems.dedup();
        Ok(OrderReport {
            order: m,
            variables: self.variables(m),
            characters: chars.iter().map(|f| f.name.clone()).collect(),
            skipped,
            side: self.side.iter().filter(|s| s.unit_order == m).cloned().collect(),
            branches: reports,
            systems,
        })
    }
}

fn describe_powers(p: &BTreeMap<u64, String>) -> String {
    if p.is_empty() {
        return "-".into();
    }
    p.iter().map(|(q, l)| format!("u^{q}~{l}")).collect::<Vec<_>>().join(" ")
}

/// Integral form `(a · ε + c) / modulus`.
struct IntForm {
    a: Vec<i128>,
    c: i128,
    modulus: i128,
}

impl IntForm {
    fn new(f: &MuForm) -> Option<Self> {
        let mut den = BigInt::from(1);
        for q in f.coeffs.iter().chain(std::iter::once(&f.constant)) {
            den = den.lcm(q.denom());
        }
        let scale = |q: &BigRational| (q * BigRational::from_integer(den.clone())).to_integer().to_i128();
        Some(IntForm {
            a: f.coeffs.iter().map(scale).collect::<Option<_>>()?,
            c: scale(&f.constant)?,
            modulus: den.to_i128()?,
        })
    }
}

struct Search<'s> {
    forms: &'s [IntForm],
    lo: &'s [i64],
    hi: &'s [i64],
    target: i64,
}

impl Search<'_> {
    /// All integer points in the box with `Σ ε = target` satisfying every form.
    fn run(&self) -> Option<Vec<Vec<i64>>> {
        let n = self.lo.len();
        // suffix[k][f] bounds Σ_{i ≥ k} a_i ε_i from above over the box.
        let mut suffix = vec![vec![0i128; self.forms.len()]; n + 1];
        for k in (0..n).rev() {
            for (fi, f) in self.forms.iter().enumerate() {
                let a = f.a[k];
                let m = (a.checked_mul(self.lo[k] as i128)?).max(a.checked_mul(self.hi[k] as i128)?);
                suffix[k][fi] = suffix[k + 1][fi].checked_add(m)?;
            }
        }
        let mut sum_lo = vec![0i64; n + 1];
        let mut sum_hi = vec![0i64; n + 1];
        for k in (0..n).rev() {
            sum_lo[k] = sum_lo[k + 1] + self.lo[k];
            sum_hi[k] = sum_hi[k + 1] + self.hi[k];
        }
        let first: Vec<i64> = (self.lo[0]..=self.hi[0]).collect();
        let parts: Vec<Option<Vec<Vec<i64>>>> = first
            .into_par_iter()
            .map(|x0| {
                let mut out = Vec::new();
                let mut point = vec![0i64; n];
                let partial: Vec<i128> = self.forms.iter().map(|f| f.c).collect();
                point[0] = x0;
                let ok = self.descend(0, x0, &mut point, partial, 0, &suffix, &sum_lo, &sum_hi, &mut out);
                ok.then_some(out)
            })
            .collect();
        let mut out = Vec::new();
        for p in parts {
            out.extend(p?);
        }
        out.sort();
        Some(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn descend(
        &self,
        k: usize,
        x: i64,
        point: &mut Vec<i64>,
        mut partial: Vec<i128>,
        sum: i64,
        suffix: &[Vec<i128>],
        sum_lo: &[i64],
        sum_hi: &[i64],
        out: &mut Vec<Vec<i64>>,
    ) -> bool {
        let n = self.lo.len();
        point[k] = x;
        let sum = sum + x;
        for (fi, f) in self.forms.iter().enumerate() {
            let Some(t) = f.a[k].checked_mul(x as i128).and_then(|t| partial[fi].checked_add(t)) else {
                return false;
            };
            partial[fi] = t;
            if t + suffix[k + 1][fi] < 0 {
                return true;
            }
        }
        let rest = self.target - sum;
        if rest < sum_lo[k + 1] || rest > sum_hi[k + 1] {
            return true;
        }
        if k + 1 == n {
            if rest == 0 && self.forms.iter().zip(&partial).all(|(f, &v)| v >= 0 && v % f.modulus == 0) {
                out.push(point.clone());
            }
            return true;
        }
        if k + 2 == n {
            if rest < self.lo[k + 1] || rest > self.hi[k + 1] {
                return true;
            }
            return self.descend(k + 1, rest, point, partial, sum, suffix, sum_lo, sum_hi, out);
        }
        for y in self.lo[k + 1]..=self.hi[k + 1] {
            if !self.descend(k + 1, y, point, partial.clone(), sum, suffix, sum_lo, sum_hi, out) {
                return false;
            }
        }
        true
    }
}

/// Enumerates the HeLP solutions for units of order `n`.
pub fn enumerate(g: &GroupData, n: u64, cfg: &HelpConfig) -> Result<Enumeration, HelpError> {
    let engine = Engine::new(g, cfg)?;
    let exp = g
        .exponent()
        .ok_or_else(|| HelpError::IncompleteClasses { group: g.name.clone(), what: "the exponent".into() })?;
    let excluded = arith::factorize(n).iter().any(|&(p, k)| exp % p.pow(k) != 0);
    let (chars, skipped) = engine.usable(n);
    if excluded || n == 1 {
        let systems = if n == 1 { vec![PartialAugmentationSystem::identity()] } else { Vec::new() };
        return Ok(Enumeration {
            order: n,
            excluded_by_exponent: excluded,
            main: OrderReport {
                order: n,
                variables: engine.variables(n),
                characters: chars.iter().map(|f| f.name.clone()).collect(),
                skipped,
                side: Vec::new(),
                branches: Vec::new(),
                systems,
            },
            suborders: Vec::new(),
        });
    }
    let mut solved: BTreeMap<u64, Vec<PartialAugmentationSystem>> = BTreeMap::new();
    let mut suborders = Vec::new();
    for m in arith::divisors(n) {
        if m == 1 {
            continue;
        }
        let rep = engine.solve_order(m, &solved)?;
        solved.insert(m, rep.systems.clone());
        if m == n {
            return Ok(Enumeration { order: n, excluded_by_exponent: false, main: rep, suborders });
        }
        suborders.push(rep);
    }
    unreachable!("n is among its divisors")
}

/// The μ-form systems of every power-assignment branch of order `n`.
pub fn branch_systems(g: &GroupData, n: u64, cfg: &HelpConfig) -> Result<Vec<BranchSystem>, HelpError> {
    let engine = Engine::new(g, cfg)?;
    let mut solved = BTreeMap::new();
    for m in arith::divisors(n) {
        if m == 1 || m == n {
            continue;
        }
        solved.insert(m, engine.solve_order(m, &solved)?.systems);
    }
    let (chars, _) = engine.usable(n);
    let fixed = engine.side_for(n)?;
    engine.branches(n, &solved).into_iter().map(|b| engine.branch_system(n, b, &chars, &fixed)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", content = "systems", rename_all = "snake_case")]
pub enum Verdict {
    AllTrivial,
    Exceptional(Vec<PartialAugmentationSystem>),
}

pub fn classify(systems: &[PartialAugmentationSystem]) -> Verdict {
    let bad: Vec<_> = systems.iter().filter(|s| !s.is_trivial()).cloned().collect();
    if bad.is_empty() {
        Verdict::AllTrivial
    } else {
        Verdict::Exceptional(bad)
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum PrimeGraphVerdict {
    NoPqUnits,
    Survivors { systems: Vec<PartialAugmentationSystem> },
}

/// Searches for units of order `p·q` in a group without elements of that order.
pub fn prime_graph_check(
    g: &GroupData,
    p: u64,
    q: u64,
    cfg: &HelpConfig,
) -> Result<(PrimeGraphVerdict, Enumeration), HelpError> {
    if !arith::is_prime(p) || !arith::is_prime(q) || p == q {
        return Err(HelpError::Precondition(format!("{p} and {q} must be distinct primes")));
    }
    if !g.complete_classes {
        return Err(HelpError::IncompleteClasses {
            group: g.name.clone(),
            what: "the absence of elements of order pq".into(),
        });
    }
    if let Some(c) = g.classes.iter().find(|c| c.order == p * q) {
        return Err(HelpError::Precondition(format!("class {} already has order {}", c.name, p * q)));
    }
    let e = enumerate(g, p * q, cfg)?;
    let verdict = if e.systems().is_empty() {
        PrimeGraphVerdict::NoPqUnits
    } else {
        PrimeGraphVerdict::Survivors { systems: e.systems().to_vec() }
    };
    Ok((verdict, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grpdata::bundled;

    fn eps(pairs: &[(&str, i64)]) -> BTreeMap<String, i64> {
        pairs.iter().map(|(c, v)| (c.to_string(), *v)).collect()
    }

    fn order10(g: &GroupData, e: &[(&str, i64)], square: &str) -> PartialAugmentationSystem {
        let powers = BTreeMap::from([
            (2, PartialAugmentationSystem::trivial(g, square).unwrap()),
            (5, PartialAugmentationSystem::trivial(g, "2a").unwrap()),
        ]);
        PartialAugmentationSystem::from_parts(10, eps(e), &powers).unwrap()
    }

    #[test]
    fn value_at_unit_examples() {
        let g = bundled("psl2_19").unwrap();
        let chi18 = g.character("chi18").unwrap();
        let u = order10(&g, &[("5a", 1), ("5b", -1), ("10a", 1)], "5a");
        let expect: Cyclotomic = "-2*E(5)-2*E(5)^4+E(5)^2+E(5)^3".parse().unwrap();
        assert_eq!(value_at_unit(chi18, &u, 1).unwrap(), expect);
        let t = PartialAugmentationSystem::trivial(&g, "10b").unwrap();
        assert_eq!(&value_at_unit(chi18, &t, 1).unwrap(), chi18.value("10b").unwrap());
        let phi1 = g.character("phi1").unwrap();
        assert!(matches!(
            value_at_unit(phi1, &PartialAugmentationSystem::trivial(&g, "19a").unwrap(), 1),
            Err(HelpError::CharacteristicDivides { .. })
        ));
    }

    #[test]
    fn aut_a6_order6_value() {
        let g = bundled("aut_a6").unwrap();
        let powers = BTreeMap::from([
            (2, PartialAugmentationSystem::trivial(&g, "3a").unwrap()),
            (3, PartialAugmentationSystem::trivial(&g, "2a").unwrap()),
        ]);
        let u = PartialAugmentationSystem::from_parts(6, eps(&[("2a", -2), ("3a", 3)]), &powers).unwrap();
        assert_eq!(value_at_unit(g.character("chi10").unwrap(), &u, 1).unwrap(), Cyclotomic::from_integer(-1));
        assert_eq!(value_at_unit(g.character("chi20").unwrap(), &u, 1).unwrap(), Cyclotomic::from_integer(14));
    }

    #[test]
    fn trivial_order_one() {
        let g = bundled("psl2_19").unwrap();
        let m = multiplicities(g.character("chi19").unwrap(), &PartialAugmentationSystem::identity()).unwrap();
        assert_eq!(m.counts(), Some(vec![19]));
    }

    #[test]
    fn galois_symmetry_for_rational_values() {
        let g = bundled("psl2_19").unwrap();
        let u = order10(&g, &[("5a", 1), ("5b", -1), ("10a", 1)], "5a");
        let m = multiplicities(g.character("chi19").unwrap(), &u).unwrap();
        for l in 0..10u64 {
            for k in 0..10u64 {
                if arith::gcd(l, 10) == arith::gcd(k, 10) {
                    assert_eq!(m.mult[l as usize], m.mult[k as usize]);
                }
            }
        }
    }

    #[test]
    fn power_systems_roundtrip() {
        let g = bundled("psl2_23").unwrap();
        let t = PartialAugmentationSystem::trivial(&g, "12a").unwrap();
        assert_eq!(t.power_system(2), PartialAugmentationSystem::trivial(&g, "6a").unwrap());
        assert_eq!(t.power_system(3), PartialAugmentationSystem::trivial(&g, "4a").unwrap());
        assert_eq!(t.label(), "12a");
        assert!(t.is_trivial());
    }

    #[test]
    fn classify_examples() {
        let g = bundled("psl2_19").unwrap();
        let bad = order10(&g, &[("5a", 1), ("5b", -1), ("10a", 1)], "5a");
        let good = order10(&g, &[("10b", 1)], "5a");
        assert_eq!(classify(std::slice::from_ref(&good)), Verdict::AllTrivial);
        assert_eq!(classify(&[good, bad.clone()]), Verdict::Exceptional(vec![bad]));
    }
}
