//! Lattices over p-adic rings for cyclic groups of order `p·m`: splitting of
//! eigenvalue multisets by the `m`-part, summand profiles over unramified and
//! ramified quadratic rings, and the obstruction comparing two representations
//! whose reductions share their nontrivial part.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::arith;
use crate::cyclo::RootOfUnity;
use crate::grpdata::{CharKind, FieldDescriptor, FieldKind, GroupData};
use crate::help::{self, EigenvalueMultiset, HelpError, PartialAugmentationSystem};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("{root} is not an {n}-th root of unity")]
    NotNthRoot { root: String, n: u64 },
    #[error(
        "primitive {p}-th roots occur with unequal multiplicities {counts:?}: not realizable over an unramified ring"
    )]
    UnequalPrimitive { p: u64, counts: Vec<u64> },
    #[error("roots in one Galois orbit occur with unequal multiplicities {counts:?}")]
    UnequalOrbit { counts: Vec<u64> },
    #[error("not supported: {0}")]
    NotSupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no decomposition row for {character} at p = {p}")]
    MissingRow { character: String, p: u64 },
    #[error("unknown character `{0}`")]
    UnknownCharacter(String),
    #[error("the nontrivial parts at class {class} have dimensions {a} and {b}")]
    UnequalDimensions { class: u64, a: u64, b: u64 },
    #[error(transparent)]
    Help(#[from] HelpError),
}

/// Eigenvalues of order dividing `n = p^a·m`, grouped by their `m`-part.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RootClassSplit {
    pub p: u64,
    pub a: u32,
    pub m: u64,
    /// For `i ∈ 1..=m`, multiplicities of `ζ_{p^a}^j` for `j ∈ 0..p^a` in `A_i`.
    pub parts: BTreeMap<u64, Vec<u64>>,
}

impl RootClassSplit {
    pub fn rank(&self, i: u64) -> u64 {
        self.parts.get(&i).map(|v| v.iter().sum()).unwrap_or(0)
    }

    /// The multiset `∪ ζ_m^i·A_i` as counts of `ζ_n^e`.
    pub fn reassemble(&self) -> Vec<u64> {
        let q = self.p.pow(self.a);
        let n = q * self.m;
        let mut out = vec![0; n as usize];
        for (&i, part) in &self.parts {
            for (j, &c) in part.iter().enumerate() {
                let e = (i * q + j as u64 * self.m) % n;
                out[e as usize] += c;
            }
        }
        out
    }
}

/// Splits counts of `ζ_n^e` (`e ∈ 0..n`) into the parts `A_i`.
pub fn split_counts(counts: &[u64], p: u64, a: u32, m: u64) -> Result<RootClassSplit, LatticeError> {
    if !arith::is_prime(p) || arith::gcd(p, m) != 1 || a == 0 {
        return Err(LatticeError::Precondition(format!("{p}^{a}·{m} is not a coprime factorization")));
    }
    let q = p.pow(a);
    let n = q * m;
    if counts.len() as u64 != n {
        return Err(LatticeError::Precondition(format!("expected {n} counts, got {}", counts.len())));
    }
    let q_inv = arith::mod_inverse(q % m, m).unwrap_or(0);
    let m_inv = arith::mod_inverse(m % q, q).expect("coprime");
    let mut parts: BTreeMap<u64, Vec<u64>> = (1..=m).map(|i| (i, vec![0; q as usize])).collect();
    for (e, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let e = e as u64;
        // ζ_n^e = ζ_m^i · ζ_q^j with e ≡ i·q + j·m mod n.
        let mut i = (e % m) * q_inv % m.max(1);
        if i == 0 {
            i = m;
        }
        let j = (e % q) * m_inv % q;
        parts.get_mut(&i).expect("i in 1..=m")[j as usize] += c;
    }
    Ok(RootClassSplit { p, a, m, parts })
}

/// Splits a multiset of roots of unity whose orders divide `p^a·m`.
pub fn split_by_m_part(eigs: &[(RootOfUnity, u64)], p: u64, a: u32, m: u64) -> Result<RootClassSplit, LatticeError> {
    let n = p.pow(a) * m;
    let mut counts = vec![0; n as usize];
    for (r, c) in eigs {
        let e = r.exponent_in(n).ok_or_else(|| LatticeError::NotNthRoot { root: r.to_string(), n })?;
        counts[e as usize] += c;
    }
    split_counts(&counts, p, a, m)
}

/// Integer counts of a multiset, or a precondition error.
pub fn counts_of(ms: &EigenvalueMultiset, what: &str) -> Result<Vec<u64>, LatticeError> {
    ms.counts().ok_or_else(|| {
        LatticeError::Precondition(format!("eigenvalue multiplicities of {what} are not nonnegative integers"))
    })
}

/// Multiplicities of the three indecomposable lattices over an unramified ring:
/// the trivial lattice (rank 1), the augmentation ideal (rank `p−1`) and the
/// group ring (rank `p`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct UnramifiedSummandProfile {
    pub x: u64,
    pub y: u64,
    pub z: u64,
}

impl UnramifiedSummandProfile {
    pub fn rank(&self, p: u64) -> u64 {
        self.x + (p - 1) * self.y + p * self.z
    }

    /// Dimensions of the reduced summands, in decreasing order.
    pub fn reduced_dims(&self, p: u64) -> Vec<u64> {
        let mut d = vec![p; self.z as usize];
        d.extend(std::iter::repeat_n(p - 1, self.y as usize));
        d.extend(std::iter::repeat_n(1, self.x as usize));
        d
    }

    pub fn count_at_least(&self, t: u64, p: u64) -> u64 {
        self.reduced_dims(p).into_iter().filter(|&d| d >= t).count() as u64
    }

    /// Eigenvalue counts of `ζ_p^j` afforded by the profile.
    pub fn eigenvalues(&self, p: u64) -> Vec<u64> {
        let mut v = vec![self.y + self.z; p as usize];
        v[0] = self.x + self.z;
        v
    }
}

/// All unramified profiles affording the multiset with counts `a` of `ζ_p^j`.
pub fn unramified_decompositions(a: &[u64], p: u64) -> Result<Vec<UnramifiedSummandProfile>, LatticeError> {
    if a.len() as u64 != p {
        return Err(LatticeError::Precondition(format!("expected {p} counts, got {}", a.len())));
    }
    let a0 = a[0];
    let a1 = a.get(1).copied().unwrap_or(0);
    if a[1..].iter().any(|&c| c != a1) {
        return Err(LatticeError::UnequalPrimitive { p, counts: a[1..].to_vec() });
    }
    Ok((0..=a0.min(a1)).map(|z| UnramifiedSummandProfile { x: a0 - z, y: a1 - z, z }).collect())
}

/// Galois orbits on primitive exponents `1..p` over a ramified quadratic ring.
pub fn galois_orbits(fd: &FieldDescriptor, p: u64) -> Result<Vec<Vec<u64>>, LatticeError> {
    match fd.kind {
        FieldKind::RamifiedQuadratic { p: q, .. } if q == p => {}
        _ => return Err(LatticeError::Precondition(format!("field is not ramified quadratic at {p}"))),
    }
    if p == 3 {
        return Ok(vec![vec![1], vec![2]]);
    }
    let res = arith::quadratic_residues(p);
    let (r, n): (Vec<u64>, Vec<u64>) = (1..p).partition(|j| res.contains(j));
    Ok(vec![r, n])
}

/// Composition factors of a lattice over a ramified quadratic ring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RamifiedFactorContent {
    pub p: u64,
    /// Copies of the trivial simple lattice.
    pub trivial: u64,
    /// Each Galois orbit of exponents with its number of copies.
    pub orbits: Vec<(Vec<u64>, u64)>,
}

impl RamifiedFactorContent {
    /// Content of the multiset with counts `a` of `ζ_p^j`.
    pub fn from_counts(a: &[u64], orbits: &[Vec<u64>], p: u64) -> Result<Self, LatticeError> {
        let mut out = Vec::new();
        for o in orbits {
            let counts: Vec<u64> = o.iter().map(|&j| a[j as usize]).collect();
            if counts.iter().any(|&c| c != counts[0]) {
                return Err(LatticeError::UnequalOrbit { counts });
            }
            out.push((o.clone(), counts[0]));
        }
        Ok(RamifiedFactorContent { p, trivial: a[0], orbits: out })
    }

    fn orbit_rank(&self) -> u64 {
        (self.p - 1) / 2
    }
}

/// Maximum counts of indecomposable summands of rank at least `t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RamifiedBounds {
    pub max_rank: u64,
    /// Largest number of indecomposable summands of rank ≥ t.
    pub summands: BTreeMap<u64, u64>,
    /// Largest `Σ ⌊rank/t⌋`, bounding reduced summands of dimension ≥ t.
    pub reduced: BTreeMap<u64, u64>,
    pub partitions: usize,
}

/// Group types allowed for an indecomposable summand.
fn allowed_types(k: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let total = 3 * 2usize.pow(k as u32);
    for code in 0..total {
        let mut v = vec![(code % 3) as u64];
        let mut rest = code / 3;
        for _ in 0..k {
            v.push((rest % 2) as u64);
            rest /= 2;
        }
        let distinct = v.iter().filter(|&&c| c > 0).count();
        if distinct == 0 || (distinct <= 2 && v.iter().any(|&c| c > 1)) {
            continue;
        }
        out.push(v);
    }
    out
}

pub fn ramified_profile_bounds(content: &RamifiedFactorContent) -> RamifiedBounds {
    let target: Vec<u64> = std::iter::once(content.trivial).chain(content.orbits.iter().map(|o| o.1)).collect();
    let types = allowed_types(content.orbits.len());
    let orbit_rank = content.orbit_rank();
    let ranks: Vec<u64> = types.iter().map(|t| t[0] + t[1..].iter().sum::<u64>() * orbit_rank).collect();
    let total_rank: u64 = target[0] + target[1..].iter().sum::<u64>() * orbit_rank;
    let mut bounds = RamifiedBounds {
        max_rank: 0,
        summands: (1..=total_rank).map(|t| (t, 0)).collect(),
        reduced: (1..=total_rank).map(|t| (t, 0)).collect(),
        partitions: 0,
    };
    let mut mult = vec![0u64; types.len()];
    let mut rest = target.clone();
    visit(0, &types, &ranks, &mut rest, &mut mult, &mut bounds);
    bounds
}

fn visit(
    i: usize,
    types: &[Vec<u64>],
    ranks: &[u64],
    rest: &mut Vec<u64>,
    mult: &mut Vec<u64>,
    bounds: &mut RamifiedBounds,
) {
    if rest.iter().all(|&r| r == 0) {
        bounds.partitions += 1;
        let used: Vec<(u64, u64)> = mult.iter().zip(ranks).filter(|(k, _)| **k > 0).map(|(k, r)| (*k, *r)).collect();
        if let Some(&(_, r)) = used.iter().max_by_key(|(_, r)| *r) {
            bounds.max_rank = bounds.max_rank.max(r);
        }
        for (&t, best) in bounds.summands.iter_mut() {
            let c = used.iter().filter(|(_, r)| *r >= t).map(|(k, _)| k).sum::<u64>();
            *best = (*best).max(c);
        }
        for (&t, best) in bounds.reduced.iter_mut() {
            let c = used.iter().map(|(k, r)| k * (r / t)).sum::<u64>();
            *best = (*best).max(c);
        }
        return;
    }
    if i == types.len() {
        return;
    }
    let ty = &types[i];
    let cap = ty.iter().zip(rest.iter()).filter(|(c, _)| **c > 0).map(|(c, r)| r / c).min().unwrap_or(0);
    for k in (0..=cap).rev() {
        for (r, c) in rest.iter_mut().zip(ty) {
            *r -= k * c;
        }
        mult[i] = k;
        visit(i + 1, types, ranks, rest, mult, bounds);
        for (r, c) in rest.iter_mut().zip(ty) {
            *r += k * c;
        }
    }
    mult[i] = 0;
}

/// The trivial Brauer character at `p`: degree one with all values one.
fn trivial_brauer(g: &GroupData, p: u64) -> Option<String> {
    g.brauer
        .get(&p)?
        .iter()
        .find(|f| f.degree == 1 && f.values.values().all(|v| v.as_integer().ok() == Some(1.into())))
        .map(|f| f.name.clone())
}

/// Whether `row(B) − row(A)` is a nonnegative multiple of the trivial Brauer character.
pub fn trivial_quotient_link(g: &GroupData, p: u64, a: &str, b: &str) -> Result<bool, LatticeError> {
    let rows = g.decomposition.get(&p);
    let row =
        |c: &str| rows.and_then(|r| r.get(c)).ok_or_else(|| LatticeError::MissingRow { character: c.to_string(), p });
    let (ra, rb) = (row(a)?, row(b)?);
    let triv = trivial_brauer(g, p);
    let mut cols: Vec<&String> = ra.keys().chain(rb.keys()).collect();
    cols.sort();
    cols.dedup();
    Ok(cols.into_iter().all(|c| {
        let d = rb.get(c).copied().unwrap_or(0) - ra.get(c).copied().unwrap_or(0);
        if Some(c) == triv.as_ref() {
            d >= 0
        } else {
            d == 0
        }
    }))
}

/// A representation named by its character, realized over the given ring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rep {
    pub character: String,
    pub field: FieldDescriptor,
}

impl Rep {
    /// The field descriptor recorded in the group data.
    pub fn from_group(g: &GroupData, character: &str) -> Result<Self, LatticeError> {
        let f = g.character(character).ok_or_else(|| LatticeError::UnknownCharacter(character.to_string()))?;
        let field = f
            .field
            .clone()
            .ok_or_else(|| LatticeError::Precondition(format!("{character} has no declared coefficient field")))?;
        Ok(Rep { character: character.to_string(), field })
    }
}

/// Bounds on summands of reduced dimension ≥ t for one nontrivial `m`-class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassComparison {
    pub class: u64,
    pub dimension: u64,
    pub b_profiles: Vec<UnramifiedSummandProfile>,
    pub a_profiles: Option<Vec<UnramifiedSummandProfile>>,
    pub a_bounds: Option<RamifiedBounds>,
    /// `(t, lower bound for B, upper bound for A)`.
    pub table: Vec<(u64, u64, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Obstruction {
    Contradiction { class: u64, t: u64, lower_b: u64, upper_a: u64 },
    Consistent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ObstructionReport {
    pub verdict: Obstruction,
    pub rep_a: Rep,
    pub rep_b: Rep,
    pub eigenvalues_a: Vec<u64>,
    pub eigenvalues_b: Vec<u64>,
    pub split_a: RootClassSplit,
    pub split_b: RootClassSplit,
    pub classes: Vec<ClassComparison>,
}

/// Compares the nontrivial parts of two linked representations at a unit of order `p·m`.
pub fn obstruction_check(
    g: &GroupData,
    pas: &PartialAugmentationSystem,
    p: u64,
    m: u64,
    rep_a: &Rep,
    rep_b: &Rep,
) -> Result<ObstructionReport, LatticeError> {
    let n = pas.unit_order;
    if !arith::is_prime(p) {
        return Err(LatticeError::Precondition(format!("{p} is not prime")));
    }
    if n.is_multiple_of(p * p) {
        return Err(LatticeError::NotSupported(format!(
            "{p}^2 divides {n}; lattices over cyclic {p}-groups of larger order lie beyond the classification"
        )));
    }
    if n != p * m || arith::gcd(p, m) != 1 {
        return Err(LatticeError::Precondition(format!("unit order {n} is not {p}·{m} with coprime factors")));
    }
    let lookup = |r: &Rep| {
        let f = g.character(&r.character).ok_or_else(|| LatticeError::UnknownCharacter(r.character.clone()))?;
        if f.kind != CharKind::Ordinary {
            return Err(LatticeError::Precondition(format!("{} is not an ordinary character", f.name)));
        }
        if !f.schur_index_one {
            return Err(LatticeError::Precondition(format!("{} is not flagged with Schur index one", f.name)));
        }
        if let Some((c, _)) = f.values.iter().find(|(_, v)| !r.field.admits(v, p)) {
            return Err(LatticeError::Precondition(format!(
                "value of {} on {c} does not lie in the declared field",
                f.name
            )));
        }
        Ok(f)
    };
    let fa = lookup(rep_a)?;
    let fb = lookup(rep_b)?;
    if rep_b.field.kind != FieldKind::Unramified {
        return Err(LatticeError::Precondition(format!("{} must be realized over an unramified ring", fb.name)));
    }
    if !trivial_quotient_link(g, p, &rep_a.character, &rep_b.character)? {
        return Err(LatticeError::Precondition(format!(
            "reductions of {} and {} do not differ by trivial factors only",
            fa.name, fb.name
        )));
    }
    let eig_a = counts_of(&help::multiplicities(fa, pas)?, &fa.name)?;
    let eig_b = counts_of(&help::multiplicities(fb, pas)?, &fb.name)?;
    let split_a = split_counts(&eig_a, p, 1, m)?;
    let split_b = split_counts(&eig_b, p, 1, m)?;
    let orbits = match rep_a.field.kind {
        FieldKind::RamifiedQuadratic { .. } => Some(galois_orbits(&rep_a.field, p)?),
        FieldKind::Unramified => None,
    };
    let mut classes = Vec::new();
    let mut verdict = Obstruction::Consistent;
    for i in 1..m {
        let (da, db) = (split_a.rank(i), split_b.rank(i));
        if da != db {
            return Err(LatticeError::UnequalDimensions { class: i, a: da, b: db });
        }
        let b_profiles = unramified_decompositions(&split_b.parts[&i], p)?;
        let (a_profiles, a_bounds) = match &orbits {
            None => (Some(unramified_decompositions(&split_a.parts[&i], p)?), None),
            Some(o) => {
                let content = RamifiedFactorContent::from_counts(&split_a.parts[&i], o, p)?;
                (None, Some(ramified_profile_bounds(&content)))
            }
        };
        let mut table = Vec::new();
        for t in 1..=da {
            let lower = b_profiles.iter().map(|pr| pr.count_at_least(t, p)).min().unwrap_or(0);
            let upper = match (&a_profiles, &a_bounds) {
                (Some(ps), _) => ps.iter().map(|pr| pr.count_at_least(t, p)).max().unwrap_or(0),
                (_, Some(b)) => b.reduced.get(&t).copied().unwrap_or(0),
                _ => unreachable!(),
            };
            if lower > upper && verdict == Obstruction::Consistent {
                verdict = Obstruction::Contradiction { class: i, t, lower_b: lower, upper_a: upper };
            }
            table.push((t, lower, upper));
        }
        classes.push(ClassComparison { class: i, dimension: da, b_profiles, a_profiles, a_bounds, table });
    }
    Ok(ObstructionReport {
        verdict,
        rep_a: rep_a.clone(),
        rep_b: rep_b.clone(),
        eigenvalues_a: eig_a,
        eigenvalues_b: eig_b,
        split_a,
        split_b,
        classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramified(p: u64) -> FieldDescriptor {
        let eps = if p % 4 == 1 { 1 } else { -1 };
        FieldDescriptor::new(FieldKind::RamifiedQuadratic { epsilon: eps, p }, "test").unwrap()
    }

    #[test]
    fn split_roundtrip_and_trivial() {
        let counts: Vec<u64> = (0..30).map(|e| (e * 7 % 5) as u64).collect();
        let s = split_counts(&counts, 5, 1, 6).unwrap();
        assert_eq!(s.reassemble(), counts);
        let ones = {
            let mut v = vec![0; 10];
            v[0] = 4;
            v
        };
        let s = split_counts(&ones, 5, 1, 2).unwrap();
        assert_eq!(s.parts[&2], vec![4, 0, 0, 0, 0]);
        assert_eq!(s.rank(1), 0);
    }

    #[test]
    fn split_rejects_foreign_roots() {
        let r = RootOfUnity::new(3, 1);
        assert!(matches!(split_by_m_part(&[(r, 1)], 5, 1, 2), Err(LatticeError::NotNthRoot { .. })));
    }

    #[test]
    fn unramified_examples() {
        let all = unramified_decompositions(&[2, 2, 2, 2, 2], 5).unwrap();
        let got: Vec<(u64, u64, u64)> = all.iter().map(|p| (p.x, p.y, p.z)).collect();
        assert_eq!(got, vec![(2, 2, 0), (1, 1, 1), (0, 0, 2)]);
        assert_eq!(
            unramified_decompositions(&[1, 0, 0], 3).unwrap(),
            vec![UnramifiedSummandProfile { x: 1, y: 0, z: 0 }]
        );
        assert_eq!(unramified_decompositions(&[1, 1, 1, 1, 1], 5).unwrap().len(), 2);
        assert!(matches!(unramified_decompositions(&[1, 2, 1, 1, 1], 5), Err(LatticeError::UnequalPrimitive { .. })));
        for pr in &all {
            assert_eq!(pr.eigenvalues(5), vec![2; 5]);
        }
    }

    #[test]
    fn orbit_examples() {
        assert_eq!(galois_orbits(&ramified(5), 5).unwrap(), vec![vec![1, 4], vec![2, 3]]);
        assert_eq!(galois_orbits(&ramified(3), 3).unwrap(), vec![vec![1], vec![2]]);
        assert_eq!(galois_orbits(&ramified(13), 13).unwrap()[0], vec![1, 3, 4, 9, 10, 12]);
        let un = FieldDescriptor::new(FieldKind::Unramified, "test").unwrap();
        assert!(galois_orbits(&un, 5).is_err());
    }

    #[test]
    fn ramified_bounds_single_trivial() {
        let c = RamifiedFactorContent { p: 5, trivial: 1, orbits: vec![(vec![1, 4], 0), (vec![2, 3], 0)] };
        let b = ramified_profile_bounds(&c);
        assert_eq!(b.max_rank, 1);
        assert_eq!(b.summands, BTreeMap::from([(1, 1)]));
    }

    #[test]
    fn allowed_types_for_two_orbits() {
        let t = allowed_types(2);
        assert_eq!(t.len(), 8);
        assert!(t.contains(&vec![2, 1, 1]));
        assert!(!t.contains(&vec![2, 1, 0]));
        assert!(!t.contains(&vec![2, 0, 0]));
    }
}
