//! Modules over `kC_{p·m}` described by partitions: plus/minus dimensions,
//! submodule and quotient types via Littlewood–Richardson positivity, a
//! brute-force finite-field oracle, and the scripted derivation excluding
//! units of order 6 from module facts.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grpdata::{CharKind, ClassFunction, GroupData};
use crate::help::{self, HelpError, PartialAugmentationSystem};
use crate::lattice::{self, LatticeError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModalgError {
    #[error("{character} at {class}: {msg}")]
    Dimension { character: String, class: String, msg: String },
    #[error("sizes do not match: |λ| = {lam}, |μ| + |ν| = {sum}")]
    SizeMismatch { lam: u64, sum: u64 },
    #[error("{0} is not a partition")]
    NotPartition(String),
    #[error("brute force limited to |λ| ≤ 6 and p ∈ {{3, 5}}, got |λ| = {size}, p = {p}")]
    OracleBound { size: u64, p: u64 },
    #[error("missing fact: {0}")]
    MissingFact(String),
    #[error("fact file: {0}")]
    Facts(String),
    #[error("fact inconsistent with the tables: {0}")]
    InconsistentFact(String),
    #[error("step {step} produced no candidates")]
    Empty { step: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Help(#[from] HelpError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// A partition with weakly decreasing positive parts.
pub type Partition = Vec<u64>;

fn check_partition(p: &[u64]) -> Result<(), ModalgError> {
    if p.contains(&0) || p.windows(2).any(|w| w[0] < w[1]) {
        return Err(ModalgError::NotPartition(format!("{p:?}")));
    }
    Ok(())
}

fn size(p: &[u64]) -> u64 {
    p.iter().sum()
}

fn sorted(mut p: Vec<u64>) -> Partition {
    p.sort_unstable_by(|a, b| b.cmp(a));
    p
}

/// All partitions of `n` with parts at most `max_part`, in decreasing lexicographic order.
pub fn partitions(n: u64, max_part: u64) -> Vec<Partition> {
    fn go(n: u64, max: u64, cur: &mut Vec<u64>, out: &mut Vec<Partition>) {
        if n == 0 {
            out.push(cur.clone());
            return;
        }
        for k in (1..=max.min(n)).rev() {
            cur.push(k);
            go(n - k, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(n, max_part, &mut Vec::new(), &mut out);
    out
}

/// `((f(1) + f(x)) / 2, (f(1) − f(x)) / 2)` for an involution class `x`.
pub fn plus_minus_dims(f: &ClassFunction, involution_class: &str) -> Result<(u64, u64), ModalgError> {
    let err = |msg: &str| ModalgError::Dimension {
        character: f.name.clone(),
        class: involution_class.to_string(),
        msg: msg.to_string(),
    };
    if let CharKind::Brauer(2) = f.kind {
        return Err(err("characteristic 2 has no plus/minus splitting"));
    }
    let v = f.value(involution_class).ok_or_else(|| err("no value"))?;
    let v: i64 = v
        .as_integer()
        .ok()
        .and_then(|b| i64::try_from(b).ok())
        .ok_or_else(|| err("value is not a rational integer"))?;
    let d = f.degree as i64;
    if (d + v) % 2 != 0 || v.abs() > d {
        return Err(err("degree and value give non-integral dimensions"));
    }
    Ok((((d + v) / 2) as u64, ((d - v) / 2) as u64))
}

/// Partitions of the minus part afforded by counts of `ζ_p^j`.
pub fn minus_types_from_eigenvalues(a: &[u64], p: u64) -> Result<Vec<Partition>, ModalgError> {
    let profiles = lattice::unramified_decompositions(a, p)?;
    let mut out: Vec<Partition> = profiles.iter().map(|pr| pr.reduced_dims(p)).collect();
    out.sort_by(|a, b| b.cmp(a));
    Ok(out)
}

/// Whether the Littlewood–Richardson coefficient `c^λ_{μν}` is positive.
pub fn lr_positive(lam: &[u64], mu: &[u64], nu: &[u64]) -> bool {
    if size(lam) != size(mu) + size(nu) {
        return false;
    }
    if mu.len() > lam.len() || mu.iter().zip(lam).any(|(m, l)| m > l) {
        return false;
    }
    // Cells of λ/μ in reverse reading order: rows top to bottom, right to left.
    let mut cells = Vec::new();
    for (r, &l) in lam.iter().enumerate() {
        let start = mu.get(r).copied().unwrap_or(0);
        for c in (start..l).rev() {
            cells.push((r, c as usize));
        }
    }
    let mut fill: HashMap<(usize, usize), usize> = HashMap::new();
    let mut count = vec![0u64; nu.len() + 1];
    fn dfs(
        k: usize,
        cells: &[(usize, usize)],
        mu: &[u64],
        nu: &[u64],
        fill: &mut HashMap<(usize, usize), usize>,
        count: &mut Vec<u64>,
    ) -> bool {
        let Some(&(r, c)) = cells.get(k) else { return true };
        let right = fill.get(&(r, c + 1)).copied();
        let above = if r > 0 && (c as u64) >= mu.get(r - 1).copied().unwrap_or(0) {
            fill.get(&(r - 1, c)).copied()
        } else {
            None
        };
        for v in 1..=nu.len() {
            if right.is_some_and(|rv| v > rv) {
                break;
            }
            if above.is_some_and(|av| v <= av) {
                continue;
            }
            if count[v] >= nu[v - 1] || (v > 1 && count[v] + 1 > count[v - 1]) {
                continue;
            }
            count[v] += 1;
            fill.insert((r, c), v);
            if dfs(k + 1, cells, mu, nu, fill, count) {
                return true;
            }
            fill.remove(&(r, c));
            count[v] -= 1;
        }
        false
    }
    dfs(0, &cells, mu, nu, &mut fill, &mut count)
}

/// Whether `0 → M_μ → M_λ → M_ν → 0` exists for modules over `k[t]/(t^N)`.
pub fn ses_feasible(lam: &[u64], mu: &[u64], nu: &[u64]) -> Result<bool, ModalgError> {
    for p in [lam, mu, nu] {
        check_partition(p)?;
    }
    if size(lam) != size(mu) + size(nu) {
        return Err(ModalgError::SizeMismatch { lam: size(lam), sum: size(mu) + size(nu) });
    }
    Ok(lr_positive(lam, mu, nu))
}

fn rank_mod(mut rows: Vec<Vec<u64>>, p: u64) -> usize {
    let n = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut rank = 0;
    for col in 0..n {
        let Some(piv) = (rank..rows.len()).find(|&i| !rows[i][col].is_multiple_of(p)) else { continue };
        rows.swap(rank, piv);
        let inv = crate::arith::mod_inverse(rows[rank][col], p).expect("nonzero mod prime");
        for v in rows[rank].iter_mut() {
            *v = *v * inv % p;
        }
        let pivot = rows[rank].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != rank && row[col] != 0 {
                let f = row[col];
                for (v, pv) in row.iter_mut().zip(&pivot) {
                    *v = (*v + p * p - f * pv % p) % p;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Nilpotent operator in Jordan form: each block shifts `e_j ↦ e_{j−1}`.
struct Nilpotent {
    starts: Vec<bool>,
}

impl Nilpotent {
    fn new(lam: &[u64]) -> Self {
        let mut starts = Vec::new();
        for &l in lam {
            for j in 0..l {
                starts.push(j == 0);
            }
        }
        Nilpotent { starts }
    }

    fn apply(&self, v: &[u64]) -> Vec<u64> {
        let mut w = vec![0; v.len()];
        for j in 0..v.len() {
            if !self.starts[j] {
                w[j - 1] = v[j];
            }
        }
        w
    }

    fn power(&self, v: &[u64], k: u64) -> Vec<u64> {
        (0..k).fold(v.to_vec(), |acc, _| self.apply(&acc))
    }
}

/// Partition from `r_k = rank(N^k)` for `k = 0, 1, …`.
fn type_from_ranks(ranks: &[usize]) -> Partition {
    let mut parts = Vec::new();
    for k in 1..ranks.len() {
        let at_least = ranks[k - 1] - ranks[k];
        let at_least_next = if k + 1 < ranks.len() { ranks[k] - ranks[k + 1] } else { ranks[k] };
        for _ in 0..(at_least - at_least_next) {
            parts.push(k as u64);
        }
    }
    sorted(parts)
}

/// Submodule and quotient types of all invariant subspaces of `M_λ` over `F_p`.
pub fn oracle_pairs(lam: &[u64], p: u64) -> Result<BTreeSet<(Partition, Partition)>, ModalgError> {
    check_partition(lam)?;
    let n = size(lam);
    if n > 6 || !(p == 3 || p == 5) {
        return Err(ModalgError::OracleBound { size: n, p });
    }
    type Pairs = BTreeSet<(Partition, Partition)>;
    static CACHE: OnceLock<Mutex<HashMap<(Partition, u64), Pairs>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().expect("cache").get(&(lam.to_vec(), p)) {
        return Ok(hit.clone());
    }
    let n = n as usize;
    let op = Nilpotent::new(lam);
    let depth = lam.first().copied().unwrap_or(0);
    let mut pivot_sets = Vec::new();
    for mask in 0u32..(1 << n) {
        pivot_sets.push((0..n).filter(|&j| mask & (1 << j) != 0).collect::<Vec<_>>());
    }
    let found: Vec<BTreeSet<(Partition, Partition)>> = pivot_sets
        .into_par_iter()
        .map(|pivots| {
            let mut out = BTreeSet::new();
            let d = pivots.len();
            // Free entries: row i, columns after its pivot that are not pivots.
            let free: Vec<(usize, usize)> = pivots
                .iter()
                .enumerate()
                .flat_map(|(i, &c)| ((c + 1)..n).filter(|j| !pivots.contains(j)).map(move |j| (i, j)))
                .collect();
            let total = (p as usize).pow(free.len() as u32);
            for code in 0..total {
                let mut basis = vec![vec![0u64; n]; d];
                for (i, &c) in pivots.iter().enumerate() {
                    basis[i][c] = 1;
                }
                let mut rest = code;
                for &(i, j) in &free {
                    basis[i][j] = (rest % p as usize) as u64;
                    rest /= p as usize;
                }
                let invariant = basis.iter().all(|b| {
                    let mut w = op.apply(b);
                    for (i, &c) in pivots.iter().enumerate() {
                        let f = w[c];
                        if f != 0 {
                            for (x, y) in w.iter_mut().zip(&basis[i]) {
                                *x = (*x + p * p - f * y % p) % p;
                            }
                        }
                    }
                    w.iter().all(|&x| x == 0)
                });
                if !invariant {
                    continue;
                }
                let mut sub_ranks = vec![d];
                let mut quo_ranks = vec![n - d];
                for k in 1..=depth {
                    let imgs: Vec<Vec<u64>> = basis.iter().map(|b| op.power(b, k)).collect();
                    sub_ranks.push(if d == 0 { 0 } else { rank_mod(imgs, p) });
                    let mut rows = basis.clone();
                    for j in 0..n {
                        let mut e = vec![0; n];
                        e[j] = 1;
                        rows.push(op.power(&e, k));
                    }
                    quo_ranks.push(rank_mod(rows, p) - d);
                }
                out.insert((type_from_ranks(&sub_ranks), type_from_ranks(&quo_ranks)));
            }
            out
        })
        .collect();
    let all: BTreeSet<_> = found.into_iter().flatten().collect();
    cache.lock().expect("cache").insert((lam.to_vec(), p), all.clone());
    Ok(all)
}

/// Exhaustive check for an invariant subspace of type `μ` with quotient `ν`.
pub fn brute_force_ses_oracle(lam: &[u64], mu: &[u64], nu: &[u64], p: u64) -> Result<bool, ModalgError> {
    let pairs = oracle_pairs(lam, p)?;
    Ok(pairs.contains(&(mu.to_vec(), nu.to_vec())))
}

/// Relations between components of a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    Isomorphic(usize, usize),
    NonIsomorphic(usize, usize),
}

/// Ways to write `M_total` as a direct sum of modules of the given dimensions.
pub fn split_feasible(total: &[u64], dims: &[u64], relations: &[Relation]) -> Vec<Vec<Partition>> {
    if size(total) != dims.iter().sum::<u64>() {
        return Vec::new();
    }
    let mut kinds: Vec<(u64, u64)> = Vec::new();
    for &x in total {
        match kinds.last_mut() {
            Some((v, c)) if *v == x => *c += 1,
            _ => kinds.push((x, 1)),
        }
    }
    let k = dims.len();
    let mut out = BTreeSet::new();
    let mut comps: Vec<Vec<u64>> = vec![Vec::new(); k];
    let mut filled = vec![0u64; k];
    fn go(
        idx: usize,
        kinds: &[(u64, u64)],
        dims: &[u64],
        comps: &mut Vec<Vec<u64>>,
        filled: &mut Vec<u64>,
        out: &mut BTreeSet<Vec<Partition>>,
    ) {
        if idx == kinds.len() {
            if filled.iter().zip(dims).all(|(f, d)| f == d) {
                out.insert(comps.clone());
            }
            return;
        }
        let (v, c) = kinds[idx];
        distribute(0, c, v, idx, kinds, dims, comps, filled, out);
    }
    #[allow(clippy::too_many_arguments)]
    fn distribute(
        slot: usize,
        left: u64,
        v: u64,
        idx: usize,
        kinds: &[(u64, u64)],
        dims: &[u64],
        comps: &mut Vec<Vec<u64>>,
        filled: &mut Vec<u64>,
        out: &mut BTreeSet<Vec<Partition>>,
    ) {
        if slot + 1 == dims.len() {
            if filled[slot] + left * v > dims[slot] {
                return;
            }
            filled[slot] += left * v;
            comps[slot].extend(std::iter::repeat_n(v, left as usize));
            go(idx + 1, kinds, dims, comps, filled, out);
            let l = comps[slot].len();
            comps[slot].truncate(l - left as usize);
            filled[slot] -= left * v;
            return;
        }
        for take in 0..=left {
            if filled[slot] + take * v > dims[slot] {
                break;
            }
            filled[slot] += take * v;
            comps[slot].extend(std::iter::repeat_n(v, take as usize));
            distribute(slot + 1, left - take, v, idx, kinds, dims, comps, filled, out);
            let l = comps[slot].len();
            comps[slot].truncate(l - take as usize);
            filled[slot] -= take * v;
        }
    }
    if k == 0 {
        return if total.is_empty() { vec![Vec::new()] } else { Vec::new() };
    }
    go(0, &kinds, dims, &mut comps, &mut filled, &mut out);
    out.into_iter()
        .filter(|s| {
            relations.iter().all(|r| match *r {
                Relation::Isomorphic(a, b) => s[a] == s[b],
                Relation::NonIsomorphic(a, b) => s[a] != s[b],
            })
        })
        .collect()
}

/// Name of the indecomposable minus module of dimension `s` over `kC_p`.
fn indecomposable_name(s: u64, p: u64) -> String {
    if s == 1 {
        "(k)⁻".into()
    } else if s == p - 1 {
        format!("I(kC{p})⁻")
    } else if s == p {
        format!("(kC{p})⁻")
    } else {
        format!("U{s}⁻")
    }
}

/// Notation like `2(k)⁻⊕I(kC3)⁻`, smallest summands first.
pub fn render(part: &[u64], p: u64) -> String {
    if part.is_empty() {
        return "0".into();
    }
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for &x in part {
        *counts.entry(x).or_default() += 1;
    }
    counts
        .iter()
        .map(|(&s, &c)| {
            let name = indecomposable_name(s, p);
            if c == 1 {
                name
            } else {
                format!("{c}{name}")
            }
        })
        .collect::<Vec<_>>()
        .join("⊕")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleFact {
    pub kind: FactKind,
    pub payload: serde_json::Value,
    pub provenance: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactKind {
    DimensionSplit,
    SocleHead,
    RestrictionIsomorphism,
    CliffordSum,
    FrobeniusTwin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Precondition {
    pub name: String,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactSet {
    pub name: String,
    pub base_group: String,
    pub prime: u64,
    #[serde(default)]
    pub preconditions: Vec<Precondition>,
    pub facts: Vec<ModuleFact>,
}

impl FactSet {
    pub fn parse(text: &str) -> Result<Self, ModalgError> {
        let fs: FactSet = serde_json::from_str(text).map_err(|e| ModalgError::Facts(e.to_string()))?;
        if let Some(f) = fs.facts.iter().find(|f| f.provenance.trim().is_empty()) {
            return Err(ModalgError::Facts(format!("{:?} fact without provenance", f.kind)));
        }
        Ok(fs)
    }

    pub fn of_kind(&self, kind: FactKind) -> impl Iterator<Item = &ModuleFact> {
        self.facts.iter().filter(move |f| f.kind == kind)
    }

    /// Groups other than the base named by the facts.
    pub fn referenced_groups(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .facts
            .iter()
            .filter_map(|f| f.payload.get("group").and_then(|g| g.as_str()).map(String::from))
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn targets(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .facts
            .iter()
            .filter_map(|f| f.payload.get("target").and_then(|g| g.as_str()).map(String::from))
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

fn field<'a>(f: &'a ModuleFact, key: &str) -> Result<&'a serde_json::Value, ModalgError> {
    f.payload.get(key).ok_or_else(|| ModalgError::Facts(format!("{:?} fact lacks `{key}`", f.kind)))
}

fn field_str(f: &ModuleFact, key: &str) -> Result<String, ModalgError> {
    field(f, key)?.as_str().map(String::from).ok_or_else(|| ModalgError::Facts(format!("`{key}` must be a string")))
}

fn field_list(f: &ModuleFact, key: &str) -> Result<Vec<String>, ModalgError> {
    field(f, key)?
        .as_array()
        .and_then(|a| a.iter().map(|v| v.as_str().map(String::from)).collect())
        .ok_or_else(|| ModalgError::Facts(format!("`{key}` must be a list of strings")))
}

fn field_map(f: &ModuleFact, key: &str) -> Result<Vec<(String, String)>, ModalgError> {
    field(f, key)?
        .as_object()
        .and_then(|o| o.iter().map(|(k, v)| v.as_str().map(|s| (k.clone(), s.to_string()))).collect())
        .ok_or_else(|| ModalgError::Facts(format!("`{key}` must map names to names")))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceStep {
    pub id: String,
    pub op: String,
    pub inputs: Vec<String>,
    pub output: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum DerivationVerdict {
    Contradiction,
    NoContradiction { survivors: Vec<Vec<String>> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Derivation {
    pub target: String,
    pub verdict: DerivationVerdict,
    pub trace: Vec<TraceStep>,
}

impl Derivation {
    pub fn step(&self, id: &str) -> Option<&TraceStep> {
        self.trace.iter().find(|s| s.id == id)
    }
}

struct Tracer {
    steps: Vec<TraceStep>,
}

impl Tracer {
    fn push(
        &mut self,
        id: impl Into<String>,
        op: &str,
        inputs: Vec<String>,
        output: Vec<String>,
    ) -> Result<(), ModalgError> {
        let id = id.into();
        if output.is_empty() {
            return Err(ModalgError::Empty { step: id });
        }
        self.steps.push(TraceStep { id, op: op.to_string(), inputs, output });
        Ok(())
    }
}

fn render_set(set: &[Partition], p: u64) -> Vec<String> {
    set.iter().map(|x| render(x, p)).collect()
}

fn brauer<'g>(g: &'g GroupData, p: u64, name: &str) -> Result<&'g ClassFunction, ModalgError> {
    g.brauer
        .get(&p)
        .and_then(|v| v.iter().find(|f| f.name == name))
        .ok_or_else(|| ModalgError::MissingFact(format!("Brauer character {name} of {} at {p}", g.name)))
}

fn value_of(f: &ClassFunction, class: &str) -> Result<crate::cyclo::Cyclotomic, ModalgError> {
    f.value(class).cloned().ok_or_else(|| ModalgError::MissingFact(format!("value of {} on {class}", f.name)))
}

/// Runs the module-theoretic derivation for a unit of order `2p` with the given system.
pub fn derive_order6(
    facts: &FactSet,
    base: &GroupData,
    groups: &BTreeMap<String, GroupData>,
    pas: &PartialAugmentationSystem,
    target: &str,
) -> Result<Derivation, ModalgError> {
    let p = facts.prime;
    let mut tr = Tracer { steps: Vec::new() };
    if pas.unit_order != 2 * p {
        return Err(ModalgError::Precondition(format!("unit order {} is not 2·{p}", pas.unit_order)));
    }
    for c in pas.slots.values().flat_map(|s| s.keys()) {
        if base.class(c).is_none() {
            return Err(ModalgError::Precondition(format!("class {c} is not a class of {}", base.name)));
        }
    }

    // Unramified coefficients.
    let non_integral: Vec<String> = base
        .ordinary
        .iter()
        .flat_map(|f| {
            f.values.iter().filter(|(_, v)| v.as_integer().is_err()).map(move |(c, _)| format!("{}({c})", f.name))
        })
        .collect();
    if !non_integral.is_empty() {
        return Err(ModalgError::Precondition(format!("non-integral ordinary values {non_integral:?}")));
    }
    let mut pre = vec!["all ordinary character values are rational integers".to_string()];
    pre.extend(facts.preconditions.iter().map(|c| format!("{}: {}", c.name, c.provenance)));
    tr.push("precondition", "integral_values", vec![base.name.clone()], pre)?;

    let split = facts
        .of_kind(FactKind::DimensionSplit)
        .next()
        .ok_or_else(|| ModalgError::MissingFact("dimension_split".into()))?;
    let involution = field_str(split, "involution_class")?;
    let socle_heads: Vec<&ModuleFact> = facts.of_kind(FactKind::SocleHead).collect();
    if socle_heads.is_empty() {
        return Err(ModalgError::MissingFact("socle_head".into()));
    }

    // Eigenvalues and minus types of the reduced lattices.
    let mut cand: BTreeMap<String, Vec<Partition>> = BTreeMap::new();
    let mut minus_dim: BTreeMap<String, u64> = BTreeMap::new();
    let mut modules = Vec::new();
    for f in &socle_heads {
        let name = field_str(f, "module")?;
        let chi = base
            .character(&name)
            .filter(|c| c.kind == CharKind::Ordinary)
            .ok_or_else(|| ModalgError::MissingFact(format!("ordinary character {name}")))?;
        let mult = help::multiplicities(chi, pas)?;
        let counts = lattice::counts_of(&mult, &chi.name)?;
        let shown: Vec<String> = mult.roots().iter().map(|(r, c)| format!("{c}×{r}")).collect();
        tr.push(format!("eigenvalues:{name}"), "multiplicities", vec![name.clone(), pas.render(base)], shown)?;
        let parts = lattice::split_counts(&counts, p, 1, 2)?;
        let minus = &parts.parts[&1];
        let types = minus_types_from_eigenvalues(minus, p)?;
        minus_dim.insert(name.clone(), minus.iter().sum());
        tr.push(
            format!("minus_types:{name}"),
            "minus_types_from_eigenvalues",
            vec![format!("{minus:?}")],
            render_set(&types, p),
        )?;
        cand.insert(name.clone(), types);
        modules.push((name, chi));
    }

    // Minus dimensions of the composition factors.
    let rows =
        base.decomposition.get(&p).ok_or_else(|| ModalgError::MissingFact(format!("decomposition matrix at {p}")))?;
    let mut factor_names: BTreeSet<String> = BTreeSet::new();
    for (name, _) in &modules {
        let row = rows.get(name).ok_or_else(|| ModalgError::MissingFact(format!("decomposition row of {name}")))?;
        factor_names.extend(row.keys().cloned());
    }
    let mut dims_out = Vec::new();
    for phi in &factor_names {
        let (plus, minus) = plus_minus_dims(brauer(base, p, phi)?, &involution)?;
        minus_dim.insert(phi.clone(), minus);
        dims_out.push(format!("{phi}: +{plus} -{minus}"));
    }
    tr.push("dimensions", "plus_minus_dims", vec![involution.clone()], dims_out)?;
    for (name, _) in &modules {
        let row = &rows[name];
        let sum: u64 = row.iter().map(|(phi, k)| minus_dim[phi] * (*k as u64)).sum();
        if sum != minus_dim[name] {
            return Err(ModalgError::InconsistentFact(format!(
                "minus dimension {} of {name} differs from its composition factors ({sum})",
                minus_dim[name]
            )));
        }
    }

    // A single composition factor with nontrivial minus part carries the whole minus part.
    for (name, _) in &modules {
        let row = &rows[name];
        let nontrivial: Vec<(&String, &i64)> = row.iter().filter(|(phi, _)| minus_dim[*phi] > 0).collect();
        if let [(phi, 1)] = nontrivial.as_slice() {
            let from = cand[name].clone();
            let merged: Vec<Partition> = match cand.get(*phi) {
                Some(prev) => from.into_iter().filter(|x| prev.contains(x)).collect(),
                None => from,
            };
            tr.push(format!("factor:{phi}"), "single_nontrivial_factor", vec![name.clone()], render_set(&merged, p))?;
            cand.insert((*phi).clone(), merged);
        }
    }

    // Socle and head exhausting the row give a short exact sequence of minus parts.
    let mut sums: Vec<(String, Vec<String>)> = Vec::new();
    for f in &socle_heads {
        let name = field_str(f, "module")?;
        let socle = field_list(f, "socle")?;
        let head = field_list(f, "head")?;
        let mut listed: BTreeMap<String, i64> = BTreeMap::new();
        for x in socle.iter().chain(&head) {
            *listed.entry(x.clone()).or_default() += 1;
        }
        if listed != rows[&name] {
            continue;
        }
        let sub: u64 = socle.iter().map(|x| minus_dim[x]).sum();
        let quo: u64 = head.iter().map(|x| minus_dim[x]).sum();
        if sub == 0 || quo == 0 {
            continue;
        }
        let [head_name] = head.as_slice() else {
            return Err(ModalgError::Facts(format!("head of {name} must be a single module")));
        };
        let lams = cand[&name].clone();
        let subs = partitions(sub, p);
        let heads: Vec<Partition> = cand
            .get(head_name)
            .cloned()
            .unwrap_or_else(|| partitions(quo, p))
            .into_iter()
            .filter(|nu| lams.iter().any(|l| subs.iter().any(|mu| lr_positive(l, mu, nu))))
            .collect();
        tr.push(
            format!("quotient:{head_name}"),
            "ses_feasible",
            vec![format!("{name}⁻ ∈ {:?}", render_set(&lams, p)), format!("dim {head_name}⁻ = {quo}")],
            render_set(&heads, p),
        )?;
        cand.insert(head_name.clone(), heads.clone());
        let socle_types: Vec<Partition> =
            subs.into_iter().filter(|mu| lams.iter().any(|l| heads.iter().any(|nu| lr_positive(l, mu, nu)))).collect();
        let key = socle.join("+");
        tr.push(
            format!("submodule:{key}"),
            "ses_feasible",
            vec![format!("{name}⁻"), format!("{head_name}⁻")],
            render_set(&socle_types, p),
        )?;
        cand.insert(key.clone(), socle_types);
        sums.push((key, socle));
    }
    let Some((sum_key, components)) = sums.into_iter().next() else {
        return Err(ModalgError::MissingFact("a socle/head fact exhausting a decomposition row".into()));
    };

    // Branch over the ways to split the socle into its simple summands.
    let dims: Vec<u64> = components.iter().map(|c| minus_dim[c]).collect();
    let mut branches: Vec<Vec<Partition>> = Vec::new();
    for total in &cand[&sum_key] {
        branches.extend(split_feasible(total, &dims, &[]));
    }
    let show = |b: &[Partition]| -> String {
        components.iter().zip(b).map(|(c, x)| format!("{c}⁻ = {}", render(x, p))).collect::<Vec<_>>().join(", ")
    };
    tr.push(
        "branches",
        "split_feasible",
        vec![sum_key.clone(), format!("{dims:?}")],
        branches.iter().map(|b| show(b)).collect(),
    )?;

    // Target facts.
    let mut used_target = false;
    let lookup_group =
        |name: &str| groups.get(name).ok_or_else(|| ModalgError::MissingFact(format!("group data for {name}")));
    let on_target = |f: &&ModuleFact| f.payload.get("target").and_then(|t| t.as_str()) == Some(target);
    let mut survivors = branches.clone();
    for f in facts.of_kind(FactKind::RestrictionIsomorphism).filter(on_target) {
        used_target = true;
        let g = lookup_group(&field_str(f, "group")?)?;
        let mods = field_list(f, "modules")?;
        let via = brauer(g, p, &field_str(f, "via")?)?;
        for (ct, cb) in field_map(f, "fusion")? {
            for m in &mods {
                if value_of(brauer(base, p, m)?, &cb)? != value_of(via, &ct)? {
                    return Err(ModalgError::InconsistentFact(format!(
                        "{m} on {cb} does not restrict to {} on {ct}",
                        via.name
                    )));
                }
            }
        }
        let idx: Vec<usize> = mods
            .iter()
            .map(|m| {
                components
                    .iter()
                    .position(|c| c == m)
                    .ok_or_else(|| ModalgError::Facts(format!("{m} is not a branch component")))
            })
            .collect::<Result<_, _>>()?;
        let before = survivors.len();
        survivors.retain(|b| idx.windows(2).all(|w| b[w[0]] == b[w[1]]));
        tr.push_any(
            format!("restriction:{target}"),
            "require_isomorphic",
            vec![format!("{} ≅ {} on {}", mods.join(", "), via.name, g.name), format!("{before} branches")],
            survivors.iter().map(|b| show(b)).collect(),
        );
    }
    let cliffords: Vec<&ModuleFact> = facts.of_kind(FactKind::CliffordSum).filter(on_target).collect();
    if !cliffords.is_empty() {
        used_target = true;
        let twins: Vec<(String, String)> = facts
            .of_kind(FactKind::FrobeniusTwin)
            .filter(on_target)
            .map(|f| {
                let g = lookup_group(&field_str(f, "group")?)?;
                let pair = field_list(f, "pair")?;
                let power = field(f, "power")?
                    .as_i64()
                    .ok_or_else(|| ModalgError::Facts("`power` must be an integer".into()))?;
                let [a, b] = pair.as_slice() else { return Err(ModalgError::Facts("`pair` needs two names".into())) };
                let (fa, fb) = (brauer(g, p, a)?, brauer(g, p, b)?);
                for (c, v) in &fa.values {
                    let twisted = v.galois(power).map_err(|e| ModalgError::InconsistentFact(e.to_string()))?;
                    if fb.value(c) != Some(&twisted) {
                        return Err(ModalgError::InconsistentFact(format!("{b} is not the twist of {a} on {c}")));
                    }
                }
                Ok((a.clone(), b.clone()))
            })
            .collect::<Result<_, ModalgError>>()?;
        let mut plans = Vec::new();
        for f in &cliffords {
            let g = lookup_group(&field_str(f, "group")?)?;
            let module = field_str(f, "module")?;
            let summands = field_list(f, "summands")?;
            let fusion = field_map(f, "fusion")?;
            let m = brauer(base, p, &module)?;
            for (ct, cb) in &fusion {
                let mut s = crate::cyclo::Cyclotomic::zero();
                for x in &summands {
                    s += &value_of(brauer(g, p, x)?, ct)?;
                }
                if s != value_of(m, cb)? {
                    return Err(ModalgError::InconsistentFact(format!("summands of {module} do not add up on {ct}")));
                }
            }
            let inv_target = fusion
                .iter()
                .find(|(_, cb)| *cb == involution)
                .map(|(ct, _)| ct.clone())
                .ok_or_else(|| ModalgError::Facts(format!("fusion of {module} misses {involution}")))?;
            let sdims: Vec<u64> = summands
                .iter()
                .map(|x| plus_minus_dims(brauer(g, p, x)?, &inv_target).map(|d| d.1))
                .collect::<Result<_, _>>()?;
            let rels: Vec<Relation> = twins
                .iter()
                .filter_map(|(a, b)| {
                    let i = summands.iter().position(|s| s == a)?;
                    let j = summands.iter().position(|s| s == b)?;
                    Some(Relation::Isomorphic(i, j))
                })
                .collect();
            let idx = components
                .iter()
                .position(|c| *c == module)
                .ok_or_else(|| ModalgError::Facts(format!("{module} is not a branch component")))?;
            plans.push((module, idx, summands, sdims, rels));
        }
        let mut kept = Vec::new();
        for (bi, b) in survivors.iter().enumerate() {
            let mut ok = true;
            for (module, idx, summands, sdims, rels) in &plans {
                let splits = split_feasible(&b[*idx], sdims, rels);
                let shown: Vec<String> = if splits.is_empty() {
                    vec!["none".into()]
                } else {
                    splits
                        .iter()
                        .map(|s| {
                            summands
                                .iter()
                                .zip(s)
                                .map(|(n, x)| format!("{n}⁻ = {}", render(x, p)))
                                .collect::<Vec<_>>()
                                .join(", ")
                        })
                        .collect()
                };
                tr.push_any(
                    format!("clifford:{target}:{bi}:{module}"),
                    "split_feasible",
                    vec![format!("{module}⁻ = {}", render(&b[*idx], p)), format!("{sdims:?}"), format!("{rels:?}")],
                    shown,
                );
                ok &= !splits.is_empty();
            }
            if ok {
                kept.push(b.clone());
            }
        }
        survivors = kept;
    }
    if !used_target {
        return Err(ModalgError::MissingFact(format!("restriction facts for target {target}")));
    }

    let verdict = if survivors.is_empty() {
        DerivationVerdict::Contradiction
    } else {
        DerivationVerdict::NoContradiction {
            survivors: survivors.iter().map(|b| b.iter().map(|x| render(x, p)).collect()).collect(),
        }
    };
    Ok(Derivation { target: target.to_string(), verdict, trace: tr.steps })
}

impl Tracer {
    /// Records a step whose output may legitimately be empty.
    fn push_any(&mut self, id: String, op: &str, inputs: Vec<String>, output: Vec<String>) {
        self.steps.push(TraceStep { id, op: op.to_string(), inputs, output });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grpdata::bundled;

    #[test]
    fn plus_minus_examples() {
        let g = bundled("aut_a6").unwrap();
        let phi = |n: &str| plus_minus_dims(g.character(n).unwrap(), "2a").unwrap();
        assert_eq!(phi("phi6a"), (2, 4));
        assert_eq!(phi("phi8"), (4, 4));
        assert_eq!(phi("phi1a"), (1, 0));
        assert!(plus_minus_dims(g.character("phi8").unwrap(), "3a").is_err());
    }

    #[test]
    fn minus_type_examples() {
        assert_eq!(minus_types_from_eigenvalues(&[2, 1, 1], 3).unwrap(), vec![vec![3, 1], vec![2, 1, 1]]);
        assert_eq!(minus_types_from_eigenvalues(&[0, 6, 6], 3).unwrap(), vec![vec![2; 6]]);
        assert_eq!(minus_types_from_eigenvalues(&[1, 0, 0], 3).unwrap(), vec![vec![1]]);
    }

    #[test]
    fn ses_examples() {
        let lam = vec![2; 6];
        assert!(ses_feasible(&lam, &[2, 2, 2, 1, 1], &[2, 1, 1]).unwrap());
        assert!(!ses_feasible(&lam, &[2, 2, 2, 2], &[2, 1, 1]).unwrap());
        assert!(!ses_feasible(&lam, &[2, 2, 1, 1, 1, 1], &[2, 1, 1]).unwrap());
        assert!(ses_feasible(&[3, 1], &[3, 1], &[]).unwrap());
        assert!(!ses_feasible(&[2, 2], &[1], &[3]).unwrap());
        assert!(ses_feasible(&[2, 2], &[1, 1], &[3]).is_err());
    }

    #[test]
    fn oracle_examples() {
        assert!(brute_force_ses_oracle(&[3], &[1], &[2], 3).unwrap());
        assert!(!brute_force_ses_oracle(&[3], &[1, 1], &[1], 3).unwrap());
        assert!(brute_force_ses_oracle(&[2, 2, 2], &[2, 2, 2], &[], 3).unwrap());
        assert!(brute_force_ses_oracle(&[2, 2, 2, 1], &[1], &[2, 2, 2], 3).is_err());
        for (mu, nu) in oracle_pairs(&[2, 2, 1], 3).unwrap() {
            assert!(lr_positive(&[2, 2, 1], &mu, &nu));
        }
    }

    #[test]
    fn split_examples() {
        let got = split_feasible(&[2, 2, 2, 1, 1], &[4, 4], &[]);
        assert_eq!(got, vec![vec![vec![2, 1, 1], vec![2, 2]], vec![vec![2, 2], vec![2, 1, 1]]]);
        let got = split_feasible(&[2, 1, 1], &[2, 2], &[]);
        assert_eq!(got, vec![vec![vec![1, 1], vec![2]], vec![vec![2], vec![1, 1]]]);
        assert!(split_feasible(&[2, 1, 1], &[2, 2], &[Relation::Isomorphic(0, 1)]).is_empty());
        assert_eq!(split_feasible(&[3, 1], &[4], &[]), vec![vec![vec![3, 1]]]);
    }

    #[test]
    fn rendering() {
        assert_eq!(render(&[2, 1, 1], 3), "2(k)⁻⊕I(kC3)⁻");
        assert_eq!(render(&[2, 2, 2, 1, 1], 3), "2(k)⁻⊕3I(kC3)⁻");
        assert_eq!(render(&[3, 1], 3), "(k)⁻⊕(kC3)⁻");
        assert_eq!(render(&[2; 6], 3), "6I(kC3)⁻");
    }

    #[test]
    fn partitions_count() {
        assert_eq!(partitions(6, 6).len(), 11);
        assert_eq!(partitions(8, 3).len(), 10);
        assert_eq!(partitions(0, 3), vec![Vec::<u64>::new()]);
    }
}
