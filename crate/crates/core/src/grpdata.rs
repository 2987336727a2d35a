//! Class-level group data: conjugacy classes, power maps, ordinary and Brauer
//! characters and decomposition matrices, read from JSON documents.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::arith;
use crate::cyclo::{Cyclotomic, RootOfUnity};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrpError {
    #[error("syntax error at line {line}, column {column}: {msg}")]
    Syntax { line: usize, column: usize, msg: String },
    #[error("{location}: unknown class `{class}`")]
    UnknownClass { location: String, class: String },
    #[error("{location}: unknown character `{name}`")]
    UnknownCharacter { location: String, name: String },
    #[error("{location}: missing value on class `{class}`")]
    MissingValue { location: String, class: String },
    #[error("decomposition inconsistency for {ordinary} at p = {prime} on class {class}: expected {expected}, rows give {found}")]
    DecompositionInconsistency { prime: u64, ordinary: String, class: String, expected: String, found: String },
    #[error("power-map order inconsistency: {0}")]
    PowerMapOrder(String),
    #[error("{location}: bad value `{text}`: {msg}")]
    BadValue { location: String, text: String, msg: String },
    #[error("{location}: {msg}")]
    Invalid { location: String, msg: String },
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConjugacyClass {
    pub name: String,
    pub order: u64,
    pub size: Option<u64>,
    /// Class of `x^d` for the listed exponents `d`.
    pub powers: BTreeMap<u64, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharKind {
    Ordinary,
    Brauer(u64),
}

impl CharKind {
    pub fn characteristic(self) -> Option<u64> {
        match self {
            CharKind::Ordinary => None,
            CharKind::Brauer(p) => Some(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    Unramified,
    RamifiedQuadratic { epsilon: i64, p: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldDescriptor {
    pub kind: FieldKind,
    /// Prime at which an unramified descriptor is asserted; all primes of |G| when absent.
    pub prime: Option<u64>,
    pub note: String,
}

impl FieldDescriptor {
    pub fn new(kind: FieldKind, note: impl Into<String>) -> Result<Self, String> {
        if let FieldKind::RamifiedQuadratic { epsilon, p } = kind {
            if p % 2 == 0 || !arith::is_prime(p) {
                return Err(format!("ramified quadratic field needs an odd prime, got {p}"));
            }
            if epsilon != 1 && epsilon != -1 {
                return Err(format!("epsilon must be 1 or -1, got {epsilon}"));
            }
            if arith::modn(epsilon, 4) != p % 4 {
                return Err(format!("epsilon {epsilon} is not congruent to {p} mod 4"));
            }
        }
        Ok(FieldDescriptor { kind, prime: None, note: note.into() })
    }

    /// Whether `v` lies in a field of the declared kind at the prime `p`.
    ///
    /// Only containment is checked: the inertia subgroup at `p` (or its
    /// index-two subgroup in the ramified case) must fix `v`.
    pub fn admits(&self, v: &Cyclotomic, p: u64) -> bool {
        let c = v.conductor();
        let mut pk = 1;
        while c.is_multiple_of(pk * p) {
            pk *= p;
        }
        let rest = c / pk;
        arith::units_mod(c).into_iter().all(|t| {
            if t % rest != 1 % rest {
                return true;
            }
            let in_subgroup = match self.kind {
                FieldKind::Unramified => true,
                FieldKind::RamifiedQuadratic { p: q, .. } => q != p || arith::quadratic_residues(p).contains(&(t % p)),
            };
            !in_subgroup || v.is_fixed_by(t as i64)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassFunction {
    pub name: String,
    pub degree: u64,
    pub kind: CharKind,
    pub schur_index_one: bool,
    pub values: BTreeMap<String, Cyclotomic>,
    pub field: Option<FieldDescriptor>,
}

impl ClassFunction {
    pub fn value(&self, class: &str) -> Option<&Cyclotomic> {
        self.values.get(class)
    }
}

/// A tagged a-priori fact `ε_class(u) = value` for units of the given order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideConstraint {
    pub unit_order: u64,
    pub class: String,
    pub value: i64,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThetaFamily {
    pub prime: u64,
    /// Eigenvalue parameter per class.
    pub parameters: BTreeMap<String, RootOfUnity>,
    pub characters: Vec<ThetaCharacter>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThetaCharacter {
    pub name: String,
    pub index: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupData {
    pub name: String,
    pub order: u64,
    /// True when `classes` lists every conjugacy class of the group.
    pub complete_classes: bool,
    pub classes: Vec<ConjugacyClass>,
    pub ordinary: Vec<ClassFunction>,
    pub brauer: BTreeMap<u64, Vec<ClassFunction>>,
    pub decomposition: BTreeMap<u64, BTreeMap<String, BTreeMap<String, i64>>>,
    pub theta_family: Option<ThetaFamily>,
    pub side_constraints: Vec<SideConstraint>,
}

/// `1 + Σ_{j=1}^{i} (ρ^j + ρ^{-j})`.
pub fn theta_value(i: u64, rho: RootOfUnity) -> Cyclotomic {
    let mut acc = Cyclotomic::one();
    for j in 1..=i as i64 {
        acc += &rho.pow(j).to_cyclotomic();
        acc += &rho.pow(-j).to_cyclotomic();
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PowerMapViolation {
    pub class: String,
    pub exponent: u64,
    pub message: String,
}

impl GroupData {
    pub fn class(&self, name: &str) -> Option<&ConjugacyClass> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.name == name)
    }

    pub fn class_order(&self, name: &str) -> Option<u64> {
        self.class(name).map(|c| c.order)
    }

    /// Exponent of the group; only meaningful with a complete class list.
    pub fn exponent(&self) -> Option<u64> {
        self.complete_classes.then(|| self.classes.iter().fold(1, |e, c| arith::lcm(e, c.order)))
    }

    pub fn character(&self, name: &str) -> Option<&ClassFunction> {
        self.ordinary.iter().chain(self.brauer.values().flatten()).find(|f| f.name == name)
    }

    pub fn characters(&self) -> impl Iterator<Item = &ClassFunction> {
        self.ordinary.iter().chain(self.brauer.values().flatten())
    }

    /// Class of `x^k`, composed from the listed power maps.
    pub fn power_class(&self, class: &str, k: i64) -> Option<String> {
        let c = self.class(class)?;
        let e = arith::modn(k, c.order);
        if e == 0 {
            return Some("1a".to_string());
        }
        if e == 1 {
            return Some(c.name.clone());
        }
        if let Some(direct) = c.powers.get(&e) {
            return Some(direct.clone());
        }
        let (q, _) = arith::factorize(e)[0];
        let next = c.powers.get(&q)?;
        self.power_class(next, (e / q) as i64)
    }

    /// Checks order division and composition consistency of the power maps.
    pub fn validate_power_maps(&self) -> Vec<PowerMapViolation> {
        let mut out = Vec::new();
        let bad = |out: &mut Vec<PowerMapViolation>, class: &str, d: u64, msg: String| {
            out.push(PowerMapViolation { class: class.to_string(), exponent: d, message: msg })
        };
        for c in &self.classes {
            for (&d, target) in &c.powers {
                match self.class(target) {
                    None => bad(&mut out, &c.name, d, format!("image `{target}` is not a class")),
                    Some(t) => {
                        let want = c.order / arith::gcd(d, c.order);
                        if t.order != want {
                            bad(
                                &mut out,
                                &c.name,
                                d,
                                format!("image {target} has order {} but {}^{d} has order {want}", t.order, c.name),
                            );
                        }
                    }
                }
            }
            for q in arith::prime_divisors(c.order) {
                if !c.powers.contains_key(&q) {
                    bad(&mut out, &c.name, q, format!("no power map for prime {q} dividing the element order"));
                }
            }
        }
        if !out.is_empty() {
            return out;
        }
        for c in &self.classes {
            let keys: Vec<u64> = c.powers.keys().copied().collect();
            for &a in &keys {
                for &b in &keys {
                    let via = c.powers.get(&a).and_then(|x| self.power_class(x, b as i64));
                    let back = c.powers.get(&b).and_then(|x| self.power_class(x, a as i64));
                    if let (Some(v1), Some(v2)) = (&via, &back) {
                        if v1 != v2 {
                            bad(
                                &mut out,
                                &c.name,
                                a * b,
                                format!("(x^{a})^{b} lies in {v1} but (x^{b})^{a} lies in {v2}"),
                            );
                        }
                    }
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RawDoc::from_group(self)).expect("serializable")
    }

    pub fn parse(text: &str) -> Result<Self, GrpError> {
        parse_group_data(text)
    }
}

// ---------------------------------------------------------------------------
// File format

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDoc {
    name: String,
    order: u64,
    #[serde(default = "yes")]
    complete_classes: bool,
    classes: Vec<RawClass>,
    #[serde(default)]
    ordinary: Vec<RawChar>,
    #[serde(default)]
    brauer: BTreeMap<String, Vec<RawChar>>,
    #[serde(default)]
    decomposition: BTreeMap<String, BTreeMap<String, BTreeMap<String, i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_family: Option<RawTheta>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    side_constraints: Vec<SideConstraint>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClass {
    name: String,
    order: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    size: Option<u64>,
    #[serde(default)]
    powers: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChar {
    name: String,
    degree: u64,
    #[serde(default)]
    schur_index_one: bool,
    /// Classes the table fragment covers; every one needs a value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    classes: Option<Vec<String>>,
    #[serde(default)]
    values: serde_json::Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    field: Option<RawField>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<u64>,
    #[serde(default)]
    note: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTheta {
    prime: u64,
    parameters: BTreeMap<String, RawRoot>,
    characters: Vec<ThetaCharacter>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRoot {
    order: u64,
    exponent: i64,
}

impl RawDoc {
    fn from_group(g: &GroupData) -> Self {
        let raw_char = |f: &ClassFunction| RawChar {
            name: f.name.clone(),
            degree: f.degree,
            schur_index_one: f.schur_index_one,
            classes: None,
            values: f.values.iter().map(|(k, v)| (k.clone(), Value::String(v.to_string()))).collect(),
            field: f.field.as_ref().map(|fd| match fd.kind {
                FieldKind::Unramified => {
                    RawField { kind: "unramified".into(), epsilon: None, p: fd.prime, note: fd.note.clone() }
                }
                FieldKind::RamifiedQuadratic { epsilon, p } => RawField {
                    kind: "ramified_quadratic".into(),
                    epsilon: Some(epsilon),
                    p: Some(p),
                    note: fd.note.clone(),
                },
            }),
        };
        RawDoc {
            name: g.name.clone(),
            order: g.order,
            complete_classes: g.complete_classes,
            classes: g
                .classes
                .iter()
                .map(|c| RawClass {
                    name: c.name.clone(),
                    order: c.order,
                    size: c.size,
                    powers: c.powers.iter().map(|(d, t)| (d.to_string(), t.clone())).collect(),
                })
                .collect(),
            ordinary: g.ordinary.iter().map(raw_char).collect(),
            brauer: g.brauer.iter().map(|(p, fs)| (p.to_string(), fs.iter().map(raw_char).collect())).collect(),
            decomposition: g.decomposition.iter().map(|(p, rows)| (p.to_string(), rows.clone())).collect(),
            theta_family: g.theta_family.as_ref().map(|t| RawTheta {
                prime: t.prime,
                parameters: t
                    .parameters
                    .iter()
                    .map(|(k, r)| (k.clone(), RawRoot { order: r.order, exponent: r.exponent as i64 }))
                    .collect(),
                characters: t.characters.clone(),
            }),
            side_constraints: g.side_constraints.clone(),
        }
    }
}

fn parse_prime_key(key: &str, location: &str) -> Result<u64, GrpError> {
    key.trim()
        .parse::<u64>()
        .ok()
        .filter(|&p| arith::is_prime(p))
        .ok_or_else(|| GrpError::Invalid { location: location.to_string(), msg: format!("`{key}` is not a prime") })
}

fn parse_value(v: &Value, location: &str) -> Result<Cyclotomic, GrpError> {
    match v {
        Value::Number(n) => n.as_i64().map(Cyclotomic::from_integer).ok_or_else(|| GrpError::BadValue {
            location: location.to_string(),
            text: n.to_string(),
            msg: "numbers must be integers; write rationals as strings".into(),
        }),
        Value::String(s) => s.parse().map_err(|e: crate::cyclo::CycloError| GrpError::BadValue {
            location: location.to_string(),
            text: s.clone(),
            msg: e.to_string(),
        }),
        other => Err(GrpError::BadValue {
            location: location.to_string(),
            text: other.to_string(),
            msg: "expected a cyclotomic string or an integer".into(),
        }),
    }
}

fn build_char(raw: &RawChar, kind: CharKind, location: &str) -> Result<ClassFunction, GrpError> {
    let mut values = BTreeMap::new();
    for (class, v) in &raw.values {
        values.insert(class.clone(), parse_value(v, &format!("{location}.values.{class}"))?);
    }
    values.entry("1a".to_string()).or_insert_with(|| Cyclotomic::from_integer(raw.degree as i64));
    if let Some(domain) = &raw.classes {
        for class in domain {
            if !values.contains_key(class) {
                return Err(GrpError::MissingValue { location: location.to_string(), class: class.clone() });
            }
        }
    }
    let field = match &raw.field {
        None => None,
        Some(f) => {
            let kind = match f.kind.as_str() {
                "unramified" => FieldKind::Unramified,
                "ramified_quadratic" => {
                    let (Some(epsilon), Some(p)) = (f.epsilon, f.p) else {
                        return Err(GrpError::Invalid {
                            location: format!("{location}.field"),
                            msg: "ramified_quadratic needs `epsilon` and `p`".into(),
                        });
                    };
                    FieldKind::RamifiedQuadratic { epsilon, p }
                }
                other => {
                    return Err(GrpError::Invalid {
                        location: format!("{location}.field"),
                        msg: format!("unknown field kind `{other}`"),
                    })
                }
            };
            let mut fd = FieldDescriptor::new(kind, f.note.clone())
                .map_err(|msg| GrpError::Invalid { location: format!("{location}.field"), msg })?;
            if kind == FieldKind::Unramified {
                fd.prime = f.p;
            }
            Some(fd)
        }
    };
    Ok(ClassFunction {
        name: raw.name.clone(),
        degree: raw.degree,
        kind,
        schur_index_one: raw.schur_index_one,
        values,
        field,
    })
}

/// Parses and validates a group data document.
pub fn parse_group_data(text: &str) -> Result<GroupData, GrpError> {
    let raw: RawDoc = serde_json::from_str(text).map_err(|e| GrpError::Syntax {
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    let mut classes = Vec::with_capacity(raw.classes.len());
    for (i, rc) in raw.classes.iter().enumerate() {
        let loc = format!("classes[{i}]");
        let mut powers = BTreeMap::new();
        for (d, target) in &rc.powers {
            let d: u64 = d.trim().parse().ok().filter(|&d| d > 0).ok_or_else(|| GrpError::Invalid {
                location: format!("{loc}.powers"),
                msg: format!("`{d}` is not a positive exponent"),
            })?;
            powers.insert(d, target.clone());
        }
        if rc.order == 0 {
            return Err(GrpError::Invalid { location: loc, msg: "element order must be positive".into() });
        }
        classes.push(ConjugacyClass { name: rc.name.clone(), order: rc.order, size: rc.size, powers });
    }
    let mut ordinary = Vec::new();
    for rc in &raw.ordinary {
        ordinary.push(build_char(rc, CharKind::Ordinary, &format!("ordinary[{}]", rc.name))?);
    }
    let mut brauer: BTreeMap<u64, Vec<ClassFunction>> = BTreeMap::new();
    for (pk, list) in &raw.brauer {
        let p = parse_prime_key(pk, "brauer")?;
        let slot = brauer.entry(p).or_default();
        for rc in list {
            slot.push(build_char(rc, CharKind::Brauer(p), &format!("brauer[{p}][{}]", rc.name))?);
        }
    }
    let mut decomposition = BTreeMap::new();
    for (pk, rows) in &raw.decomposition {
        decomposition.insert(parse_prime_key(pk, "decomposition")?, rows.clone());
    }
    let theta_family = match &raw.theta_family {
        None => None,
        Some(t) => {
            if !arith::is_prime(t.prime) {
                return Err(GrpError::Invalid {
                    location: "theta_family.prime".into(),
                    msg: format!("{} is not a prime", t.prime),
                });
            }
            Some(ThetaFamily {
                prime: t.prime,
                parameters: t
                    .parameters
                    .iter()
                    .map(|(k, r)| {
                        if r.order == 0 {
                            Err(GrpError::Invalid {
                                location: format!("theta_family.parameters.{k}"),
                                msg: "root order must be positive".into(),
                            })
                        } else {
                            Ok((k.clone(), RootOfUnity::new(r.order, r.exponent)))
                        }
                    })
                    .collect::<Result<_, _>>()?,
                characters: t.characters.clone(),
            })
        }
    };
    let mut g = GroupData {
        name: raw.name,
        order: raw.order,
        complete_classes: raw.complete_classes,
        classes,
        ordinary,
        brauer,
        decomposition,
        theta_family,
        side_constraints: raw.side_constraints,
    };
    apply_theta_family(&mut g)?;
    validate(&mut g)?;
    Ok(g)
}

fn apply_theta_family(g: &mut GroupData) -> Result<(), GrpError> {
    let Some(theta) = g.theta_family.clone() else {
        return Ok(());
    };
    for class in theta.parameters.keys() {
        if g.class(class).is_none() {
            return Err(GrpError::UnknownClass { location: "theta_family.parameters".into(), class: class.clone() });
        }
    }
    let list = g.brauer.entry(theta.prime).or_default();
    for tc in &theta.characters {
        let mut generated: BTreeMap<String, Cyclotomic> =
            theta.parameters.iter().map(|(c, &rho)| (c.clone(), theta_value(tc.index, rho))).collect();
        generated.insert("1a".into(), Cyclotomic::from_integer(2 * tc.index as i64 + 1));
        let loc = format!("brauer[{}][{}]", theta.prime, tc.name);
        match list.iter_mut().find(|f| f.name == tc.name) {
            Some(explicit) => {
                for (class, v) in &explicit.values {
                    if let Some(gen) = generated.get(class) {
                        if gen != v {
                            return Err(GrpError::Invalid {
                                location: format!("{loc}.values.{class}"),
                                msg: format!("listed value {v} differs from the generated value {gen}"),
                            });
                        }
                    }
                }
                for (class, v) in generated {
                    explicit.values.entry(class).or_insert(v);
                }
            }
            None => list.push(ClassFunction {
                name: tc.name.clone(),
                degree: 2 * tc.index + 1,
                kind: CharKind::Brauer(theta.prime),
                schur_index_one: false,
                values: generated,
                field: None,
            }),
        }
    }
    Ok(())
}

fn validate(g: &mut GroupData) -> Result<(), GrpError> {
    let mut seen = BTreeSet::new();
    for c in &g.classes {
        if !seen.insert(c.name.clone()) {
            return Err(GrpError::Invalid { location: "classes".into(), msg: format!("duplicate class `{}`", c.name) });
        }
    }
    match g.class("1a") {
        Some(c) if c.order == 1 => {}
        Some(_) => {
            return Err(GrpError::Invalid { location: "classes".into(), msg: "class 1a must have order 1".into() })
        }
        None => {
            return Err(GrpError::Invalid {
                location: "classes".into(),
                msg: "the identity class 1a is missing".into(),
            })
        }
    }
    for c in &g.classes {
        if !g.order.is_multiple_of(c.order) {
            return Err(GrpError::Invalid {
                location: format!("classes[{}]", c.name),
                msg: format!("element order {} does not divide the group order {}", c.order, g.order),
            });
        }
        for target in c.powers.values() {
            if g.class(target).is_none() {
                return Err(GrpError::UnknownClass {
                    location: format!("classes[{}].powers", c.name),
                    class: target.clone(),
                });
            }
        }
    }
    if let Some(v) = g.validate_power_maps().into_iter().next() {
        return Err(GrpError::PowerMapOrder(format!("class {} exponent {}: {}", v.class, v.exponent, v.message)));
    }

    let class_orders: BTreeMap<String, u64> = g.classes.iter().map(|c| (c.name.clone(), c.order)).collect();
    let mut names = BTreeSet::new();
    let all_chars: Vec<&mut ClassFunction> = g.ordinary.iter_mut().chain(g.brauer.values_mut().flatten()).collect();
    for f in all_chars {
        let loc = match f.kind {
            CharKind::Ordinary => format!("ordinary[{}]", f.name),
            CharKind::Brauer(p) => format!("brauer[{p}][{}]", f.name),
        };
        if !names.insert(f.name.clone()) {
            return Err(GrpError::Invalid { location: loc, msg: "duplicate character name".into() });
        }
        for (class, v) in &f.values {
            let Some(&ord) = class_orders.get(class) else {
                return Err(GrpError::UnknownClass { location: loc.clone(), class: class.clone() });
            };
            if let CharKind::Brauer(p) = f.kind {
                if ord % p == 0 {
                    return Err(GrpError::Invalid {
                        location: format!("{loc}.values.{class}"),
                        msg: format!("class of order {ord} is not {p}-regular"),
                    });
                }
            }
            if ord % v.conductor() != 0 {
                return Err(GrpError::BadValue {
                    location: format!("{loc}.values.{class}"),
                    text: v.to_string(),
                    msg: format!("value does not lie in Q(E({ord}))"),
                });
            }
        }
        let deg = Cyclotomic::from_integer(f.degree as i64);
        match f.values.get("1a") {
            Some(v) if *v != deg => {
                return Err(GrpError::Invalid {
                    location: format!("{loc}.values.1a"),
                    msg: format!("value {v} at 1a differs from the degree {}", f.degree),
                })
            }
            Some(_) => {}
            None => {
                f.values.insert("1a".into(), deg);
            }
        }
        if let Some(fd) = &f.field {
            let p = match fd.kind {
                FieldKind::RamifiedQuadratic { p, .. } => Some(p),
                FieldKind::Unramified => None,
            };
            let primes: Vec<u64> = match (p, fd.prime) {
                (Some(p), _) | (None, Some(p)) => vec![p],
                (None, None) => arith::prime_divisors(g.order),
            };
            for (class, v) in &f.values {
                for &q in &primes {
                    if !fd.admits(v, q) {
                        return Err(GrpError::Invalid {
                            location: format!("{loc}.field"),
                            msg: format!("value {v} on {class} does not lie in the declared field at p = {q}"),
                        });
                    }
                }
            }
        }
    }

    for (p, rows) in &g.decomposition {
        let brauer = g.brauer.get(p).map(Vec::as_slice).unwrap_or(&[]);
        for (ord_name, row) in rows {
            let loc = format!("decomposition[{p}][{ord_name}]");
            let chi = g
                .ordinary
                .iter()
                .find(|f| f.name == *ord_name)
                .ok_or_else(|| GrpError::UnknownCharacter { location: loc.clone(), name: ord_name.clone() })?;
            let mut cols = Vec::new();
            for (br, &d) in row {
                let phi = brauer
                    .iter()
                    .find(|f| f.name == *br)
                    .ok_or_else(|| GrpError::UnknownCharacter { location: loc.clone(), name: br.clone() })?;
                if d < 0 {
                    return Err(GrpError::Invalid {
                        location: loc.clone(),
                        msg: "negative decomposition number".into(),
                    });
                }
                cols.push((phi, d));
            }
            for c in &g.classes {
                if c.order % p == 0 {
                    continue;
                }
                let Some(expected) = chi.values.get(&c.name) else { continue };
                let mut sum = Cyclotomic::zero();
                let mut complete = true;
                for (phi, d) in &cols {
                    match phi.values.get(&c.name) {
                        Some(v) => {
                            sum += &v.scalar_mul(&BigRational::from_integer(BigInt::from(*d)));
                        }
                        None => complete = false,
                    }
                }
                if complete && &sum != expected {
                    return Err(GrpError::DecompositionInconsistency {
                        prime: *p,
                        ordinary: ord_name.clone(),
                        class: c.name.clone(),
                        expected: expected.to_string(),
                        found: sum.to_string(),
                    });
                }
            }
        }
    }

    for (i, s) in g.side_constraints.iter().enumerate() {
        let loc = format!("side_constraints[{i}]");
        let Some(ord) = class_orders.get(&s.class) else {
            return Err(GrpError::UnknownClass { location: loc, class: s.class.clone() });
        };
        if s.unit_order == 0 || s.unit_order % ord != 0 {
            return Err(GrpError::Invalid {
                location: loc,
                msg: format!("class {} of order {ord} cannot occur in a unit of order {}", s.class, s.unit_order),
            });
        }
        if s.provenance.trim().is_empty() {
            return Err(GrpError::Invalid { location: loc, msg: "side constraint needs a provenance".into() });
        }
    }

    check_sizes(g)?;
    Ok(())
}

/// With every class size present: sizes sum to the group order and each fully
/// specified ordinary character has a positive integral norm.
fn check_sizes(g: &GroupData) -> Result<(), GrpError> {
    if !g.complete_classes || g.classes.iter().any(|c| c.size.is_none()) {
        return Ok(());
    }
    let total: u64 = g.classes.iter().map(|c| c.size.unwrap()).sum();
    if total != g.order {
        return Err(GrpError::Invalid {
            location: "classes".into(),
            msg: format!("class sizes sum to {total}, not the group order {}", g.order),
        });
    }
    for f in &g.ordinary {
        if g.classes.iter().any(|c| !f.values.contains_key(&c.name)) {
            continue;
        }
        let mut acc = Cyclotomic::zero();
        for c in &g.classes {
            let v = &f.values[&c.name];
            let conj = v.galois(-1).expect("-1 is a unit");
            acc += &(v * &conj).scalar_mul(&BigRational::from_integer(BigInt::from(c.size.unwrap())));
        }
        let norm = acc.as_rational().map(|q| q / BigRational::from_integer(BigInt::from(g.order)));
        match norm {
            Ok(q) if q.is_integer() && q >= BigRational::one() => {}
            _ => {
                return Err(GrpError::Invalid {
                    location: format!("ordinary[{}]", f.name),
                    msg: format!("norm {acc} / {} is not a positive integer", g.order),
                })
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Bundled data

const BUNDLED: &[(&str, &str)] = &[
    ("psl2_19", include_str!("../data/psl2_19.json")),
    ("psl2_23", include_str!("../data/psl2_23.json")),
    ("aut_a6", include_str!("../data/aut_a6.json")),
    ("m10", include_str!("../data/m10.json")),
    ("pgl2_9", include_str!("../data/pgl2_9.json")),
];

const BUNDLED_FACTS: &[(&str, &str)] = &[("aut_a6_facts", include_str!("../data/aut_a6_facts.json"))];

pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

pub fn bundled_text(name: &str) -> Option<&'static str> {
    BUNDLED.iter().chain(BUNDLED_FACTS).find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn bundled(name: &str) -> Result<GroupData, GrpError> {
    let text = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| GrpError::Io { path: name.to_string(), msg: "no bundled group of that name".into() })?;
    parse_group_data(text)
}

/// Reads a document by bundled name or file path, returning its text.
pub fn load_text(spec: &str) -> Result<String, GrpError> {
    if let Some(t) = bundled_text(spec) {
        return Ok(t.to_string());
    }
    std::fs::read_to_string(spec).map_err(|e| GrpError::Io { path: spec.to_string(), msg: e.to_string() })
}

pub fn load(spec: &str) -> Result<GroupData, GrpError> {
    parse_group_data(&load_text(spec)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> Cyclotomic {
        s.parse().unwrap()
    }

    const MINI: &str = r#"{
        "name": "mini", "order": 6,
        "classes": [
            {"name": "1a", "order": 1, "size": 1},
            {"name": "2a", "order": 2, "size": 3, "powers": {"2": "1a"}},
            {"name": "3a", "order": 3, "size": 2, "powers": {"3": "1a"}}
        ],
        "ordinary": [
            {"name": "chi1", "degree": 1, "values": {"2a": 1, "3a": 1}},
            {"name": "chi2", "degree": 2, "classes": ["1a", "2a", "3a"], "values": {"1a": 2, "2a": 0, "3a": "-1"}}
        ],
        "brauer": {"3": [
            {"name": "phi1", "degree": 1, "values": {"2a": 1}},
            {"name": "phi1b", "degree": 1, "values": {"2a": -1}}
        ]},
        "decomposition": {"3": {"chi2": {"phi1": 1, "phi1b": 1}}}
    }"#;

    #[test]
    fn parses_a_small_table() {
        let g = parse_group_data(MINI).unwrap();
        assert_eq!(g.classes.len(), 3);
        assert_eq!(g.character("chi1").unwrap().value("1a"), Some(&Cyclotomic::one()));
        assert_eq!(g.exponent(), Some(6));
        assert_eq!(g.power_class("3a", 4), Some("3a".into()));
        assert_eq!(g.power_class("3a", 2), None);
        assert_eq!(g.power_class("2a", 4), Some("1a".into()));
    }

    #[test]
    fn error_kinds_are_distinct() {
        let missing = MINI.replace(r#""values": {"1a": 2, "2a": 0, "3a": "-1"}"#, r#""values": {"1a": 2, "2a": 0}"#);
        assert!(matches!(parse_group_data(&missing), Err(GrpError::MissingValue { class, .. }) if class == "3a"));
        let bad_decomp = MINI.replace(r#""values": {"2a": -1}"#, r#""values": {"2a": 1}"#);
        assert!(matches!(parse_group_data(&bad_decomp), Err(GrpError::DecompositionInconsistency { .. })));
        let unknown = MINI.replace(r#"{"2a": 1, "3a": 1}"#, r#"{"2a": 1, "4a": 1}"#);
        assert!(matches!(parse_group_data(&unknown), Err(GrpError::UnknownClass { .. })));
        let power = MINI.replace(r#""powers": {"3": "1a"}"#, r#""powers": {"3": "2a"}"#);
        assert!(matches!(parse_group_data(&power), Err(GrpError::PowerMapOrder(_))));
        let syntax = MINI.replace("\"order\": 6,", "\"order\": 6");
        assert!(matches!(parse_group_data(&syntax), Err(GrpError::Syntax { .. })));
        let singular = MINI.replace(
            r#"{"name": "phi1", "degree": 1, "values": {"2a": 1}}"#,
            r#"{"name": "phi1", "degree": 1, "values": {"2a": 1, "3a": 1}}"#,
        );
        assert!(matches!(parse_group_data(&singular), Err(GrpError::Invalid { .. })));
    }

    #[test]
    fn theta_values() {
        let z9 = RootOfUnity::new(9, 1);
        assert_eq!(theta_value(1, z9), c("1+E(9)+E(9)^8"));
        assert_eq!(theta_value(0, RootOfUnity::new(7, 3)), Cyclotomic::one());
        assert_eq!(theta_value(2, RootOfUnity::new(12, 1)), c("2+E(12)+E(12)^11"));
        assert_eq!(theta_value(3, RootOfUnity::one()), Cyclotomic::from_integer(7));
    }

    #[test]
    fn field_descriptors() {
        let ram = FieldDescriptor::new(FieldKind::RamifiedQuadratic { epsilon: 1, p: 5 }, "").unwrap();
        let unr = FieldDescriptor::new(FieldKind::Unramified, "").unwrap();
        let alpha = c("E(5)+E(5)^4");
        assert!(ram.admits(&alpha, 5));
        assert!(!unr.admits(&alpha, 5));
        assert!(unr.admits(&alpha, 3));
        assert!(!ram.admits(&c("E(5)"), 5));
        assert!(ram.admits(&c("E(9)+E(9)^8"), 5));
        assert!(FieldDescriptor::new(FieldKind::RamifiedQuadratic { epsilon: -1, p: 5 }, "").is_err());
        assert!(FieldDescriptor::new(FieldKind::RamifiedQuadratic { epsilon: -1, p: 3 }, "").is_ok());
    }
}
