//! Task dispatch and reports: loads group and fact files, runs the HeLP,
//! lattice and module pipelines, and renders deterministic reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::arith;
use crate::grpdata::{self, FieldKind, GroupData, GrpError, SideConstraint};
use crate::help::{self, Enumeration, HelpConfig, HelpError, PartialAugmentationSystem};
use crate::lattice::{self, LatticeError, Obstruction, ObstructionReport, Rep};
use crate::modalg::{self, Derivation, DerivationVerdict, FactSet, ModalgError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Help,
    Zc,
    Pq,
    LatticeCheck,
    Order6Derive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Branch {
    All,
    Class(String),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Bundled group name or path to a group file.
    pub group: String,
    pub task: Task,
    pub orders: Vec<u64>,
    pub pair: Option<(u64, u64)>,
    pub characters: Vec<String>,
    pub side: Vec<SideConstraint>,
    pub facts: Option<String>,
    pub lattice_pair: Option<(String, String)>,
    pub branch: Branch,
    pub mu_tables: bool,
}

impl RunConfig {
    pub fn new(group: &str, task: Task) -> Self {
        RunConfig {
            group: group.to_string(),
            task,
            orders: Vec::new(),
            pair: None,
            characters: Vec::new(),
            side: Vec::new(),
            facts: None,
            lattice_pair: None,
            branch: Branch::All,
            mu_tables: false,
        }
    }
}

/// Parses `order:class=value:provenance`.
pub fn parse_side(text: &str) -> Result<SideConstraint, RunError> {
    let bad = || RunError::Config(format!("side constraint `{text}` is not order:class=value:provenance"));
    let mut it = text.splitn(3, ':');
    let order = it.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
    let (class, value) = it.next().and_then(|s| s.split_once('=')).ok_or_else(bad)?;
    let value = value.trim().parse().map_err(|_| bad())?;
    let provenance = it.next().map(str::trim).filter(|s| !s.is_empty()).ok_or_else(bad)?;
    Ok(SideConstraint { unit_order: order, class: class.trim().to_string(), value, provenance: provenance.to_string() })
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] GrpError),
    #[error(transparent)]
    Help(#[from] HelpError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Modalg(#[from] ModalgError),
}

impl RunError {
    /// 3 for precondition and unboundedness diagnostics, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        let diagnostic = match self {
            RunError::Help(e) => help_diagnostic(e),
            RunError::Lattice(LatticeError::Precondition(_) | LatticeError::NotSupported(_)) => true,
            RunError::Lattice(LatticeError::Help(e)) => help_diagnostic(e),
            RunError::Modalg(ModalgError::Precondition(_)) => true,
            RunError::Modalg(ModalgError::Help(e)) => help_diagnostic(e),
            _ => false,
        };
        if diagnostic {
            3
        } else {
            1
        }
    }
}

fn help_diagnostic(e: &HelpError) -> bool {
    matches!(
        e,
        HelpError::Precondition(_)
            | HelpError::Unbounded { .. }
            | HelpError::SearchTooLarge { .. }
            | HelpError::IncompleteClasses { .. }
            | HelpError::CharacteristicDivides { .. }
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Verified,
    Survivors,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Verified => 0,
            Status::Survivors => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemRecord {
    pub epsilon: Map<String, Value>,
    pub powers: BTreeMap<u64, String>,
    pub trivial: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<Map<String, Value>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eliminated_by: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice: Option<ObstructionReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub derivations: Vec<Derivation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderResult {
    pub order: u64,
    pub excluded_by_exponent: bool,
    pub variables: Vec<String>,
    pub characters: Vec<String>,
    pub skipped: Vec<String>,
    pub side: Vec<SideConstraint>,
    pub branches: Vec<help::BranchReport>,
    pub systems: Vec<SystemRecord>,
    pub survivors: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub task: Task,
    pub group: String,
    pub digest: String,
    pub status: Status,
    pub summary: String,
    pub results: Vec<OrderResult>,
    /// Wall-clock milliseconds; excluded from determinism comparisons.
    pub timing_ms: u128,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }

    /// The structured document without the timing field.
    pub fn deterministic_json(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Value::Object(m) = &mut v {
            m.remove("timing_ms");
        }
        v
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "helpkit {} | task {:?} | group {} | sha256 {}",
            self.version, self.task, self.group, self.digest
        );
        for r in &self.results {
            let _ = writeln!(s, "order {}:", r.order);
            if r.excluded_by_exponent {
                let _ = writeln!(s, "  excluded: the group exponent is not divisible by {}", r.order);
                continue;
            }
            if !r.characters.is_empty() {
                let _ = writeln!(s, "  characters: {}", r.characters.join(", "));
            }
            for k in &r.skipped {
                let _ = writeln!(s, "  skipped: {k}");
            }
            for c in &r.side {
                let _ = writeln!(s, "  side: ε_{}(u) = {} [{}]", c.class, c.value, c.provenance);
            }
            for b in &r.branches {
                let pw: Vec<String> = b.powers.iter().map(|(p, l)| format!("u^{p}~{l}")).collect();
                let bd: Vec<String> = b.bounds.iter().map(|(v, lo, hi)| format!("{v}∈[{lo},{hi}]")).collect();
                let _ = writeln!(s, "  branch {}: {} solution(s); bounds {}", pw.join(" "), b.solutions, bd.join(" "));
            }
            for sys in &r.systems {
                let eps: Vec<String> = sys.epsilon.iter().map(|(c, v)| format!("{c}={v}")).collect();
                let pw: Vec<String> = sys.powers.iter().map(|(p, l)| format!("u^{p}~{l}")).collect();
                let kind = if sys.trivial { "trivial" } else { "exceptional" };
                let _ = write!(s, "  {kind}: ({}) {}", eps.join(", "), pw.join(" "));
                if let Some(e) = &sys.eliminated_by {
                    let _ = write!(s, " | eliminated: {e}");
                }
                let _ = writeln!(s);
                if let Some(mu) = &sys.mu {
                    for (c, v) in mu {
                        let _ = writeln!(s, "    μ[{c}] = {v}");
                    }
                }
                if let Some(l) = &sys.lattice {
                    for c in &l.classes {
                        let rows: Vec<String> = c.table.iter().map(|(t, lo, hi)| format!("t={t}:{lo}/{hi}")).collect();
                        let _ = writeln!(s, "    lattice class {} (dim {}): {}", c.class, c.dimension, rows.join(" "));
                    }
                }
                for d in &sys.derivations {
                    let _ = writeln!(s, "    derivation for {}: {:?}", d.target, d.verdict);
                    for st in &d.trace {
                        let out = if st.output.is_empty() { "(none)".to_string() } else { st.output.join(" | ") };
                        let _ = writeln!(s, "      [{}] {}: {out}", st.id, st.op);
                    }
                }
            }
        }
        let _ = writeln!(s, "{}", self.summary);
        s
    }
}

struct Inputs {
    group: GroupData,
    texts: Vec<String>,
    facts: Option<FactSet>,
    catalog: BTreeMap<String, GroupData>,
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs, RunError> {
    let text = grpdata::load_text(&cfg.group)?;
    let group = grpdata::parse_group_data(&text)?;
    let mut texts = vec![text];
    let mut catalog = BTreeMap::new();
    let facts = match &cfg.facts {
        None => None,
        Some(spec) => {
            let t = grpdata::load_text(spec)?;
            let fs = FactSet::parse(&t)?;
            texts.push(t);
            for name in std::iter::once(fs.base_group.clone()).chain(fs.referenced_groups()) {
                if name == group.name {
                    catalog.insert(name, group.clone());
                    continue;
                }
                let t = grpdata::load_text(&name)?;
                catalog.insert(name, grpdata::parse_group_data(&t)?);
                texts.push(t);
            }
            Some(fs)
        }
    };
    Ok(Inputs { group, texts, facts, catalog })
}

fn digest(texts: &[String]) -> String {
    let mut h = Sha256::new();
    for t in texts {
        h.update((t.len() as u64).to_le_bytes());
        h.update(t.as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn record(
    g: &GroupData,
    s: &PartialAugmentationSystem,
    cfg: &RunConfig,
    chars: &[String],
) -> Result<SystemRecord, RunError> {
    let mut epsilon = Map::new();
    for c in &g.classes {
        let v = s.epsilon(&c.name);
        if v != 0 {
            epsilon.insert(c.name.clone(), v.into());
        }
    }
    let mu = if cfg.mu_tables {
        let mut m = Map::new();
        for name in chars {
            let f = g.character(name).ok_or_else(|| HelpError::UnknownCharacter(name.clone()))?;
            let ms = help::multiplicities(f, s)?;
            m.insert(name.clone(), Value::Array(ms.mult.iter().map(|q| Value::String(q.to_string())).collect()));
        }
        Some(m)
    } else {
        None
    };
    Ok(SystemRecord {
        epsilon,
        powers: s.powers.clone(),
        trivial: s.is_trivial(),
        mu,
        eliminated_by: None,
        lattice: None,
        derivations: Vec::new(),
    })
}

fn keep_branch(s: &PartialAugmentationSystem, b: &Branch) -> bool {
    match b {
        Branch::All => true,
        Branch::Class(c) => s.powers.values().any(|l| l == c),
    }
}

fn order_result(
    g: &GroupData,
    e: &Enumeration,
    cfg: &RunConfig,
) -> Result<(OrderResult, Vec<PartialAugmentationSystem>), RunError> {
    let systems: Vec<PartialAugmentationSystem> =
        e.systems().iter().filter(|s| keep_branch(s, &cfg.branch)).cloned().collect();
    let branches = e
        .main
        .branches
        .iter()
        .filter(|b| match &cfg.branch {
            Branch::All => true,
            Branch::Class(c) => b.powers.values().any(|l| l == c),
        })
        .cloned()
        .collect();
    let records = systems.iter().map(|s| record(g, s, cfg, &e.main.characters)).collect::<Result<Vec<_>, _>>()?;
    let survivors = records.iter().filter(|r| !r.trivial).count();
    Ok((
        OrderResult {
            order: e.order,
            excluded_by_exponent: e.excluded_by_exponent,
            variables: e.main.variables.clone(),
            characters: e.main.characters.clone(),
            skipped: e.main.skipped.clone(),
            side: e.main.side.clone(),
            branches,
            systems: records,
            survivors,
        },
        systems,
    ))
}

fn lattice_prime(g: &GroupData, a: &Rep, b: &Rep) -> Result<u64, RunError> {
    if let FieldKind::RamifiedQuadratic { p, .. } = a.field.kind {
        return Ok(p);
    }
    a.field.prime.or(b.field.prime).ok_or_else(|| {
        RunError::Config(format!(
            "no prime declared for the fields of {} and {} in {}",
            a.character, b.character, g.name
        ))
    })
}

fn help_config(cfg: &RunConfig) -> HelpConfig {
    HelpConfig { characters: cfg.characters.clone(), side: cfg.side.clone(), max_box: None }
}

/// The single candidate of order `n` fixed by the side constraints, for groups
/// whose class list is too incomplete for an enumeration. `u^p` lies in the
/// involution class of the dimension split fact and `u^2` in the only listed
/// class of order `p`.
fn direct_candidate(
    g: &GroupData,
    n: u64,
    cfg: &RunConfig,
    facts: &FactSet,
) -> Result<(OrderResult, Vec<PartialAugmentationSystem>), RunError> {
    let p = facts.prime;
    if n != 2 * p {
        return Err(RunError::Config(format!("the facts concern units of order {}", 2 * p)));
    }
    let side: Vec<SideConstraint> =
        g.side_constraints.iter().chain(&cfg.side).filter(|c| c.unit_order == n).cloned().collect();
    let mut eps = BTreeMap::new();
    for c in &side {
        if g.class(&c.class).is_none() {
            return Err(HelpError::UnknownClass(c.class.clone()).into());
        }
        eps.insert(c.class.clone(), c.value);
    }
    if eps.values().sum::<i64>() != 1 {
        return Err(ModalgError::Precondition(format!(
            "the side constraints for order {n} do not give partial augmentations summing to 1"
        ))
        .into());
    }
    let involution = facts
        .of_kind(modalg::FactKind::DimensionSplit)
        .next()
        .and_then(|f| f.payload.get("involution_class").and_then(|v| v.as_str()).map(String::from))
        .ok_or_else(|| ModalgError::MissingFact("dimension_split".into()))?;
    let of_order_p: Vec<&str> = g.classes.iter().filter(|c| c.order == p).map(|c| c.name.as_str()).collect();
    let [cp] = of_order_p[..] else {
        return Err(
            ModalgError::Precondition(format!("{} lists {} classes of order {p}", g.name, of_order_p.len())).into()
        );
    };
    let powers = BTreeMap::from([
        (2, PartialAugmentationSystem::trivial(g, cp)?),
        (p, PartialAugmentationSystem::trivial(g, &involution)?),
    ]);
    let s = PartialAugmentationSystem::from_parts(n, eps, &powers)?;
    let rec = record(g, &s, cfg, &cfg.characters)?;
    let res = OrderResult {
        order: n,
        excluded_by_exponent: false,
        variables: g
            .classes
            .iter()
            .filter(|c| n.is_multiple_of(c.order) && c.order > 1)
            .map(|c| c.name.clone())
            .collect(),
        characters: Vec::new(),
        skipped: Vec::new(),
        side,
        branches: Vec::new(),
        systems: vec![rec],
        survivors: 0,
    };
    Ok((res, vec![s]))
}

/// Class fusion from `g` into the base group of `facts`, read off the facts
/// that concern `g`; unlisted classes keep their name when the base has a
/// class of that name and order.
fn fusion(facts: &FactSet, g: &GroupData, base: &GroupData) -> Result<BTreeMap<String, String>, RunError> {
    let mut map = BTreeMap::new();
    if g.name != base.name {
        for f in facts.facts.iter().filter(|f| f.payload.get("group").and_then(|v| v.as_str()) == Some(g.name.as_str()))
        {
            if let Some(Value::Object(m)) = f.payload.get("fusion") {
                for (k, v) in m {
                    if let Some(v) = v.as_str() {
                        map.insert(k.clone(), v.to_string());
                    }
                }
            }
        }
    }
    for c in &g.classes {
        if map.contains_key(&c.name) {
            continue;
        }
        match base.class(&c.name) {
            Some(b) if b.order == c.order => {
                map.insert(c.name.clone(), c.name.clone());
            }
            _ => {}
        }
    }
    Ok(map)
}

/// Pushes a system of `g` forward into the base group along `fusion`.
fn transport(
    s: &PartialAugmentationSystem,
    fusion: &BTreeMap<String, String>,
    g: &GroupData,
) -> Result<PartialAugmentationSystem, RunError> {
    let image = |c: &str| {
        fusion
            .get(c)
            .cloned()
            .ok_or_else(|| RunError::Config(format!("class {c} of {} has no image in the base group", g.name)))
    };
    let mut slots = BTreeMap::new();
    for (&d, slot) in &s.slots {
        let mut out: BTreeMap<String, i64> = BTreeMap::new();
        for (c, v) in slot {
            *out.entry(image(c)?).or_default() += v;
        }
        out.retain(|_, v| *v != 0);
        slots.insert(d, out);
    }
    let powers = s.powers.iter().map(|(&p, l)| (p, fusion.get(l).cloned().unwrap_or_else(|| l.clone()))).collect();
    Ok(PartialAugmentationSystem { unit_order: s.unit_order, slots, powers })
}

/// Target of a fact set that concerns the given group.
fn target_for(facts: &FactSet, group: &str) -> Vec<String> {
    if facts.base_group == group {
        return facts.targets();
    }
    let mut out: Vec<String> = facts
        .facts
        .iter()
        .filter(|f| f.payload.get("group").and_then(|g| g.as_str()) == Some(group))
        .filter_map(|f| f.payload.get("target").and_then(|t| t.as_str()).map(String::from))
        .collect();
    out.sort();
    out.dedup();
    out
}

pub fn run(cfg: &RunConfig) -> Result<Report, RunError> {
    let start = Instant::now();
    let inputs = load_inputs(cfg)?;
    let g = &inputs.group;
    let hc = help_config(cfg);
    let mut results = Vec::new();
    let orders: Vec<u64> = match cfg.task {
        Task::Pq => {
            let (p, q) = cfg.pair.ok_or_else(|| RunError::Config("pq needs --pair p,q".into()))?;
            vec![p * q]
        }
        Task::Order6Derive if cfg.orders.is_empty() => vec![6],
        _ => {
            if cfg.orders.is_empty() {
                return Err(RunError::Config("no orders given".into()));
            }
            cfg.orders.clone()
        }
    };
    let lattice_reps = match &cfg.lattice_pair {
        Some((a, b)) => Some((Rep::from_group(g, a)?, Rep::from_group(g, b)?)),
        None => None,
    };
    if matches!(cfg.task, Task::LatticeCheck) && lattice_reps.is_none() {
        return Err(RunError::Config("lattice-check needs --lattice-pair A:B".into()));
    }
    if matches!(cfg.task, Task::Order6Derive) && inputs.facts.is_none() {
        return Err(RunError::Config("order6-derive needs --facts".into()));
    }
    for &n in &orders {
        let e = if cfg.task == Task::Pq {
            let (p, q) = cfg.pair.expect("checked");
            Some(help::prime_graph_check(g, p, q, &hc)?.1)
        } else if cfg.task == Task::Order6Derive && !g.complete_classes {
            None
        } else {
            Some(help::enumerate(g, n, &hc)?)
        };
        let (mut res, systems) = match e {
            Some(e) => order_result(g, &e, cfg)?,
            None => direct_candidate(g, n, cfg, inputs.facts.as_ref().expect("checked"))?,
        };
        let use_lattice = matches!(cfg.task, Task::Zc | Task::LatticeCheck);
        if let (true, Some((a, b))) = (use_lattice, &lattice_reps) {
            let p = lattice_prime(g, a, b)?;
            for (rec, s) in res.systems.iter_mut().zip(&systems) {
                if cfg.task == Task::Zc && rec.trivial {
                    continue;
                }
                if n % p != 0 || arith::gcd(p, n / p) != 1 {
                    continue;
                }
                let r = lattice::obstruction_check(g, s, p, n / p, a, b)?;
                if let Obstruction::Contradiction { class, t, lower_b, upper_a } = r.verdict {
                    rec.eliminated_by = Some(format!(
                        "lattice obstruction {}:{} at m-class {class}, t = {t}: {lower_b} > {upper_a}",
                        a.character, b.character
                    ));
                }
                rec.lattice = Some(r);
            }
        }
        let use_facts = matches!(cfg.task, Task::Pq | Task::Order6Derive | Task::Zc);
        if let (true, Some(fs)) = (use_facts, &inputs.facts) {
            let base = inputs.catalog.get(&fs.base_group).expect("base group loaded");
            let targets = target_for(fs, &g.name);
            if targets.is_empty() && cfg.task == Task::Order6Derive {
                return Err(RunError::Config(format!("the facts do not concern {}", g.name)));
            }
            if n == 2 * fs.prime {
                let fus = fusion(fs, g, base)?;
                for (rec, s) in res.systems.iter_mut().zip(&systems) {
                    if rec.trivial && cfg.task != Task::Order6Derive {
                        continue;
                    }
                    let moved = transport(s, &fus, g)?;
                    let mut all = !targets.is_empty();
                    for t in &targets {
                        let d = modalg::derive_order6(fs, base, &inputs.catalog, &moved, t)?;
                        all &= d.verdict == DerivationVerdict::Contradiction;
                        rec.derivations.push(d);
                    }
                    if all {
                        rec.eliminated_by = Some(format!("module derivation from {}", fs.name));
                    }
                }
            }
        }
        res.survivors = res
            .systems
            .iter()
            .filter(|r| {
                let open = r.eliminated_by.is_none();
                match cfg.task {
                    Task::Order6Derive => open,
                    _ => open && !r.trivial,
                }
            })
            .count();
        results.push(res);
    }
    let survivors: usize = results.iter().map(|r| r.survivors).sum();
    let status = if survivors == 0 { Status::Verified } else { Status::Survivors };
    let summary = match (cfg.task, status) {
        (Task::Zc | Task::Help, Status::Verified) => "all torsion orders trivial".to_string(),
        (Task::Pq, Status::Verified) => {
            let (p, q) = cfg.pair.expect("checked");
            format!("no units of order {} (p = {p}, q = {q})", p * q)
        }
        (Task::LatticeCheck, Status::Verified) => "every exceptional candidate is obstructed".to_string(),
        (Task::Order6Derive, Status::Verified) => "every candidate leads to a contradiction".to_string(),
        (_, Status::Survivors) => format!("{survivors} exceptional candidate(s) survive"),
    };
    Ok(Report {
        tool: "helpkit",
        version: VERSION,
        task: cfg.task,
        group: g.name.clone(),
        digest: digest(&inputs.texts),
        status,
        summary,
        results,
        timing_ms: start.elapsed().as_millis(),
    })
}
