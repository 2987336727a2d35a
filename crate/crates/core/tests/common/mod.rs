#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use helpkit::grpdata::{bundled, bundled_names, bundled_text, parse_group_data, CharKind, GroupData};
use helpkit::help::{self, EigenvalueMultiset, HelpConfig, PartialAugmentationSystem};
use helpkit::lattice::{self, Obstruction, Rep};
use helpkit::modalg::{self, DerivationVerdict, FactSet};
use num_rational::BigRational;
use num_traits::{Signed, Zero};

pub type Check = Result<String, String>;

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn timed(limit: Duration, f: impl FnOnce() -> Check) -> Check {
    let t = Instant::now();
    let detail = f()?;
    let el = t.elapsed();
    ensure(el <= limit, || format!("took {el:?}, limit {limit:?}"))?;
    Ok(format!("{detail} ({} ms)", el.as_millis()))
}

pub fn q(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

/// ε(u) over the given classes for each system, sorted.
pub fn vectors(systems: &[PartialAugmentationSystem], classes: &[&str]) -> BTreeSet<Vec<i64>> {
    systems.iter().map(|s| classes.iter().map(|c| s.epsilon(c)).collect()).collect()
}

pub fn set(rows: &[&[i64]]) -> BTreeSet<Vec<i64>> {
    rows.iter().map(|r| r.to_vec()).collect()
}

/// Solves `A x = b` over the rationals; `None` unless the solution is unique.
pub fn solve_unique(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Option<Vec<BigRational>> {
    let n = a.first()?.len();
    let mut row = 0;
    let mut pivots = Vec::new();
    for col in 0..n {
        let Some(r) = (row..a.len()).find(|&r| !a[r][col].is_zero()) else { continue };
        a.swap(row, r);
        b.swap(row, r);
        let inv = a[row][col].recip();
        for v in a[row].iter_mut() {
            *v *= &inv;
        }
        b[row] *= &inv;
        for r in 0..a.len() {
            if r != row && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                let pr = a[row].clone();
                for (v, pv) in a[r].iter_mut().zip(&pr) {
                    *v -= &f * pv;
                }
                let br = b[row].clone();
                b[r] -= &f * br;
            }
        }
        pivots.push(col);
        row += 1;
    }
    if pivots.len() < n || b[row..].iter().any(|v| !v.is_zero()) {
        return None;
    }
    Some(b[..n].to_vec())
}

/// Rational points where the μ forms of a branch take nonnegative integer values,
/// found by choosing an invertible subsystem and enumerating its values in the
/// LP box of each form.
pub fn engine_rational_points(g: &GroupData, n: u64, chars: &[&str]) -> Result<BTreeSet<Vec<BigRational>>, String> {
    let cfg = HelpConfig::with_characters(chars);
    let branches = help::branch_systems(g, n, &cfg).map_err(|e| e.to_string())?;
    let mut out = BTreeSet::new();
    for b in &branches {
        let k = b.variables.len();
        // Row 0 is the augmentation.
        let mut rows: Vec<(Vec<BigRational>, BigRational)> = vec![(vec![q(1); k], q(1))];
        for f in &b.forms {
            rows.push((f.coeffs.clone(), f.constant.clone()));
        }
        let deg = |i: usize| g.character(&b.forms[i - 1].character).map(|f| f.degree as i64).unwrap_or(0);
        let mut order: Vec<usize> = (1..rows.len()).collect();
        order.sort_by_key(|&i| deg(i));
        let mut chosen: Vec<usize> = vec![0];
        for i in order {
            let mut trial = chosen.clone();
            trial.push(i);
            if rank(&trial.iter().map(|&j| rows[j].0.clone()).collect::<Vec<_>>()) == trial.len() {
                chosen = trial;
            }
            if chosen.len() == k {
                break;
            }
        }
        if chosen.len() < k {
            return Err(format!("branch {:?} has rank {} < {k}", b.powers, chosen.len()));
        }
        // Each μ lies in [0, f(1)].
        let ranges: Vec<Vec<i64>> =
            chosen.iter().map(|&i| if i == 0 { vec![1] } else { (0..=deg(i)).collect() }).collect();
        let mut idx = vec![0usize; ranges.len()];
        'values: loop {
            let a: Vec<Vec<BigRational>> = chosen.iter().map(|&i| rows[i].0.clone()).collect();
            let rhs: Vec<BigRational> = chosen
                .iter()
                .zip(&idx)
                .enumerate()
                .map(|(j, (&i, &t))| q(ranges[j][t]) - if i == 0 { q(0) } else { rows[i].1.clone() })
                .collect();
            if let Some(x) = solve_unique(a, rhs) {
                let ok = b.forms.iter().all(|f| {
                    let v = f.coeffs.iter().zip(&x).fold(f.constant.clone(), |acc, (c, xi)| acc + c * xi);
                    v.is_integer() && !v.is_negative()
                });
                if ok {
                    let mut full = Vec::new();
                    for c in &g.classes {
                        if let Some(p) = b.variables.iter().position(|v| *v == c.name) {
                            full.push((c.name.clone(), x[p].clone()));
                        }
                    }
                    out.insert(full.into_iter().map(|(_, v)| v).collect());
                }
            }
            let mut j = 0;
            loop {
                if j == idx.len() {
                    break 'values;
                }
                idx[j] += 1;
                if idx[j] < ranges[j].len() {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
        }
    }
    Ok(out)
}

fn rank(rows: &[Vec<BigRational>]) -> usize {
    let mut a = rows.to_vec();
    let mut r = 0;
    let n = a.first().map(|x| x.len()).unwrap_or(0);
    for col in 0..n {
        let Some(p) = (r..a.len()).find(|&i| !a[i][col].is_zero()) else { continue };
        a.swap(r, p);
        for i in 0..a.len() {
            if i != r && !a[i][col].is_zero() {
                let f = &a[i][col] / &a[r][col];
                let pr = a[r].clone();
                for (v, pv) in a[i].iter_mut().zip(&pr) {
                    *v -= &f * pv;
                }
            }
        }
        r += 1;
    }
    r
}

/// Exponents of `ζ_n` as a multiset, written as `(exponent, count)`.
pub fn multiset(n: u64, exps: &[u64]) -> EigenvalueMultiset {
    EigenvalueMultiset::from_exponents(n, exps)
}

/// Exponent of `ζ_10` for `±ζ_5^k`.
pub fn z10(sign: i64, k: u64) -> u64 {
    (2 * k + if sign < 0 { 5 } else { 0 }) % 10
}

/// Exponent of `ζ_6` for `±ζ_3^k`.
pub fn z6(sign: i64, k: u64) -> u64 {
    (2 * k + if sign < 0 { 3 } else { 0 }) % 6
}

pub fn psl2_19_order10() -> Vec<PartialAugmentationSystem> {
    help::enumerate(&bundled("psl2_19").unwrap(), 10, &HelpConfig::default()).unwrap().systems().to_vec()
}

pub fn facts() -> FactSet {
    FactSet::parse(bundled_text("aut_a6_facts").unwrap()).unwrap()
}

pub fn fact_groups(fs: &FactSet) -> BTreeMap<String, GroupData> {
    fs.referenced_groups().into_iter().map(|n| (n.clone(), bundled(&n).unwrap())).collect()
}

pub fn aut_a6_candidate(g: &GroupData) -> PartialAugmentationSystem {
    let powers = BTreeMap::from([
        (2, PartialAugmentationSystem::trivial(g, "3a").unwrap()),
        (3, PartialAugmentationSystem::trivial(g, "2a").unwrap()),
    ]);
    PartialAugmentationSystem::from_parts(6, BTreeMap::from([("2a".into(), -2), ("3a".into(), 3)]), &powers).unwrap()
}

/// The partial automorphism group data extended by a class of order 6.
pub fn aut_a6_with_6a() -> GroupData {
    let mut v: serde_json::Value = serde_json::from_str(bundled_text("aut_a6").unwrap()).unwrap();
    v["classes"].as_array_mut().unwrap().push(serde_json::json!(
        {"name": "6a", "order": 6, "powers": {"2": "3a", "3": "2a"}}
    ));
    for (name, value) in [("chi1a", 1), ("chi1b", 1), ("chi10", -7), ("chi20", -10)] {
        let f = v["ordinary"].as_array_mut().unwrap().iter_mut().find(|f| f["name"] == name).unwrap();
        f["classes"].as_array_mut().unwrap().push("6a".into());
        f["values"]["6a"] = value.into();
    }
    parse_group_data(&v.to_string()).unwrap()
}

// Criteria.

fn ordered(s: &BTreeSet<Vec<i64>>) -> String {
    format!("{:?}", s.iter().collect::<Vec<_>>())
}

pub fn criterion_1() -> Check {
    timed(Duration::from_secs(1), || {
        let g = bundled("psl2_23").unwrap();
        let e = help::enumerate(&g, 4, &HelpConfig::default()).map_err(|e| e.to_string())?;
        let got = vectors(e.systems(), &["2a", "4a"]);
        ensure(got == set(&[&[0, 1]]), || format!("got {}", ordered(&got)))?;
        Ok("order 4: ε_4a = 1 only".into())
    })
}

pub fn criterion_2() -> Check {
    timed(Duration::from_secs(1), || {
        let g = bundled("psl2_19").unwrap();
        let e = help::enumerate(&g, 9, &HelpConfig::default()).map_err(|e| e.to_string())?;
        let got = vectors(e.systems(), &["3a", "9a", "9b", "9c"]);
        ensure(got == set(&[&[0, 1, 0, 0], &[0, 0, 1, 0], &[0, 0, 0, 1]]), || format!("got {}", ordered(&got)))?;
        Ok("order 9: three trivial systems".into())
    })
}

/// Published μ conditions for order 12 on (2a, 3a, 4a, 6a, 12a, 12b), with the sign of the second.
fn order12_equations(sign: i64) -> (Vec<Vec<BigRational>>, Vec<BigRational>) {
    let rows: [([i64; 6], i64); 6] = [
        ([1, 1, 1, 1, 1, 1], 1),
        ([0, 0, 0, 0, 1, -1], sign),
        ([-1, 0, 1, 2, 1, 1], 1),
        ([1, -1, -1, 1, 2, 2], 2),
        ([-1, 1, -1, -1, 2, 2], 2),
        ([-1, -1, 1, -1, 1, 1], 1),
    ];
    (rows.iter().map(|(a, _)| a.iter().map(|&x| q(x)).collect()).collect(), rows.iter().map(|(_, b)| q(*b)).collect())
}

pub fn criterion_3() -> Check {
    let g = bundled("psl2_23").unwrap();
    let chars = ["phi1", "phi2", "phi3", "phi5"];
    let engine = timed(Duration::from_secs(5), || {
        let e = help::enumerate(&g, 12, &HelpConfig::with_characters(&chars)).map_err(|e| e.to_string())?;
        let classes = ["2a", "3a", "4a", "6a", "12a", "12b"];
        let got = vectors(e.systems(), &classes);
        ensure(got == set(&[&[0, 0, 0, 0, 1, 0], &[0, 0, 0, 0, 0, 1]]), || format!("got {}", ordered(&got)))?;
        Ok("order 12: ε_12a = 1 and ε_12b = 1".into())
    })?;
    {
        let mut published = BTreeSet::new();
        for sign in [1, -1] {
            let (a, b) = order12_equations(sign);
            published.insert(solve_unique(a, b).ok_or("the published order-12 system is singular")?);
        }
        let points = engine_rational_points(&g, 12, &chars)?;
        ensure(points == published, || format!("engine points {points:?} differ from {published:?}"))?;
    }
    Ok(format!("{engine}; rational solution sets agree"))
}

pub fn criterion_4() -> Check {
    timed(Duration::from_secs(5), || {
        let g = bundled("psl2_19").unwrap();
        let e = help::enumerate(&g, 10, &HelpConfig::with_characters(&["phi1", "phi2"])).map_err(|e| e.to_string())?;
        let classes = ["2a", "5a", "5b", "10a", "10b"];
        let on = |c: &str| {
            let s: Vec<_> =
                e.systems().iter().filter(|&s| s.powers.get(&2).map(String::as_str) == Some(c)).cloned().collect();
            vectors(&s, &classes)
        };
        let a = on("5a");
        let b = on("5b");
        ensure(a == set(&[&[0, 1, -1, 1, 0], &[0, 0, 0, 0, 1]]), || format!("branch 5a: {}", ordered(&a)))?;
        ensure(b == set(&[&[0, -1, 1, 0, 1], &[0, 0, 0, 1, 0]]), || format!("branch 5b: {}", ordered(&b)))?;
        Ok("order 10: both branches as stated".into())
    })
}

pub fn criterion_5() -> Check {
    let g = bundled("psl2_19").unwrap();
    let cand = psl2_19_order10()
        .into_iter()
        .find(|s| s.epsilon("5a") == 1 && s.epsilon("5b") == -1 && s.epsilon("10a") == 1)
        .ok_or("no exceptional order-10 candidate")?;
    let d18: Vec<u64> = [
        (1, 0),
        (1, 1),
        (1, 2),
        (1, 3),
        (1, 4),
        (1, 0),
        (1, 2),
        (1, 3),
        (-1, 0),
        (-1, 1),
        (-1, 2),
        (-1, 3),
        (-1, 4),
        (-1, 0),
        (-1, 1),
        (-1, 4),
        (-1, 1),
        (-1, 4),
    ]
    .iter()
    .map(|&(s, k)| z10(s, k))
    .collect();
    let d19: Vec<u64> = [
        (1, 0),
        (1, 1),
        (1, 2),
        (1, 3),
        (1, 4),
        (1, 1),
        (1, 2),
        (1, 3),
        (1, 4),
        (-1, 0),
        (-1, 1),
        (-1, 2),
        (-1, 3),
        (-1, 4),
        (-1, 0),
        (-1, 1),
        (-1, 2),
        (-1, 3),
        (-1, 4),
    ]
    .iter()
    .map(|&(s, k)| z10(s, k))
    .collect();
    let m18 = help::multiplicities(g.character("chi18").unwrap(), &cand).map_err(|e| e.to_string())?;
    let m19 = help::multiplicities(g.character("chi19").unwrap(), &cand).map_err(|e| e.to_string())?;
    ensure(m18 == multiset(10, &d18), || format!("chi18: {:?}", m18.counts()))?;
    ensure(m19 == multiset(10, &d19), || format!("chi19: {:?}", m19.counts()))?;
    let a6 = bundled("aut_a6").unwrap();
    let c6 = aut_a6_candidate(&a6);
    let d10: Vec<u64> = [(1, 0, 2), (1, 1, 2), (1, 2, 2), (-1, 0, 2), (-1, 1, 1), (-1, 2, 1)]
        .iter()
        .flat_map(|&(s, k, c)| std::iter::repeat_n(z6(s, k), c))
        .collect();
    let d20: Vec<u64> =
        [(1, 0, 8), (-1, 1, 6), (-1, 2, 6)].iter().flat_map(|&(s, k, c)| std::iter::repeat_n(z6(s, k), c)).collect();
    let m10 = help::multiplicities(a6.character("chi10").unwrap(), &c6).map_err(|e| e.to_string())?;
    let m20 = help::multiplicities(a6.character("chi20").unwrap(), &c6).map_err(|e| e.to_string())?;
    ensure(m10 == multiset(6, &d10), || format!("chi10: {:?}", m10.counts()))?;
    ensure(m20 == multiset(6, &d20), || format!("chi20: {:?}", m20.counts()))?;
    Ok("chi18, chi19, chi10 and chi20 multisets match".into())
}

pub fn lattice_pair(g: &GroupData) -> (Rep, Rep) {
    (Rep::from_group(g, "chi18").unwrap(), Rep::from_group(g, "chi19").unwrap())
}

pub fn criterion_6() -> Check {
    timed(Duration::from_secs(1), || {
        let g = bundled("psl2_19").unwrap();
        let (a, b) = lattice_pair(&g);
        let systems = psl2_19_order10();
        let mut seen = 0;
        for s in &systems {
            let r = lattice::obstruction_check(&g, s, 5, 2, &a, &b).map_err(|e| e.to_string())?;
            if s.is_trivial() {
                ensure(r.verdict == Obstruction::Consistent, || format!("trivial {s} gave {:?}", r.verdict))?;
            } else {
                let want = Obstruction::Contradiction { class: 1, t: 4, lower_b: 2, upper_a: 1 };
                ensure(r.verdict == want, || format!("exceptional {s} gave {:?}", r.verdict))?;
                seen += 1;
            }
        }
        ensure(seen == 2, || format!("{seen} exceptional candidates"))?;
        Ok("t = 4 with 2 > 1 on both exceptional candidates; trivial ones consistent".into())
    })
}

pub fn criterion_7() -> Check {
    timed(Duration::from_secs(1), || {
        let fs = facts();
        let base = bundled("aut_a6").unwrap();
        let groups = fact_groups(&fs);
        let pas = aut_a6_candidate(&base);
        for target in ["M10", "PGL29"] {
            let d = modalg::derive_order6(&fs, &base, &groups, &pas, target).map_err(|e| e.to_string())?;
            ensure(d.verdict == DerivationVerdict::Contradiction, || format!("{target}: {:?}", d.verdict))?;
            let out = |id: &str| d.step(id).map(|s| s.output.clone()).unwrap_or_default();
            ensure(out("quotient:phi8") == ["2(k)⁻⊕I(kC3)⁻"], || {
                format!("{target}: T8 {:?}", out("quotient:phi8"))
            })?;
            ensure(out("submodule:phi6a+phi6b") == ["2(k)⁻⊕3I(kC3)⁻"], || {
                format!("{target}: socle {:?}", out("submodule:phi6a+phi6b"))
            })?;
            ensure(out("branches").len() == 2, || format!("{target}: branches {:?}", out("branches")))?;
        }
        Ok("contradiction for M10 and PGL29 with the stated intermediate modules".into())
    })
}

pub fn criterion_8() -> Check {
    timed(Duration::from_secs(300), || {
        let mut triples = 0u64;
        for n in 1..=6 {
            for lam in modalg::partitions(n, 3) {
                let pairs = modalg::oracle_pairs(&lam, 3).map_err(|e| e.to_string())?;
                for k in 0..=n {
                    for mu in modalg::partitions(k, 3) {
                        for nu in modalg::partitions(n - k, 3) {
                            let fast = modalg::ses_feasible(&lam, &mu, &nu).map_err(|e| e.to_string())?;
                            let slow = pairs.contains(&(mu.clone(), nu.clone()));
                            ensure(fast == slow, || format!("λ={lam:?} μ={mu:?} ν={nu:?}: {fast} vs {slow}"))?;
                            triples += 1;
                        }
                    }
                }
            }
        }
        Ok(format!("{triples} triples agree over F_3"))
    })
}

/// Whether `f` has values on every class `x^d`.
fn defined_on_powers(g: &GroupData, f: &helpkit::grpdata::ClassFunction, x: &str) -> bool {
    let n = g.class_order(x).unwrap();
    helpkit::arith::divisors(n)
        .iter()
        .all(|&d| g.power_class(x, d as i64).map(|c| f.value(&c).is_some()).unwrap_or(false))
}

pub fn trivial_system_checks(g: &GroupData) -> Result<u64, String> {
    let mut checked = 0;
    for c in &g.classes {
        let s = PartialAugmentationSystem::trivial(g, &c.name).map_err(|e| e.to_string())?;
        for f in g.characters() {
            if let CharKind::Brauer(p) = f.kind {
                if c.order % p == 0 {
                    continue;
                }
            }
            if !defined_on_powers(g, f, &c.name) {
                continue;
            }
            let m = help::multiplicities(f, &s).map_err(|e| format!("{} at {}: {e}", f.name, c.name))?;
            ensure(m.is_admissible(), || format!("{}: {} at δ_{} is not admissible", g.name, f.name, c.name))?;
            ensure(m.total() == q(f.degree as i64), || {
                format!("{}: Σμ of {} at δ_{} is {}", g.name, f.name, c.name, m.total())
            })?;
            checked += 1;
        }
    }
    Ok(checked)
}

pub fn criterion_9() -> Check {
    timed(Duration::from_secs(60), || {
        let mut checked = 0;
        for name in bundled_names() {
            checked += trivial_system_checks(&bundled(name).unwrap())?;
        }
        let g = bundled("psl2_19").unwrap();
        let (a, b) = lattice_pair(&g);
        for x in ["10a", "10b"] {
            let s = PartialAugmentationSystem::trivial(&g, x).unwrap();
            let r = lattice::obstruction_check(&g, &s, 5, 2, &a, &b).map_err(|e| e.to_string())?;
            ensure(r.verdict == Obstruction::Consistent, || format!("δ_{x}: {:?}", r.verdict))?;
        }
        let fx = aut_a6_with_6a();
        checked += trivial_system_checks(&fx)?;
        let fs = facts();
        let groups = fact_groups(&fs);
        let s = PartialAugmentationSystem::trivial(&fx, "6a").unwrap();
        for target in ["M10", "PGL29"] {
            let d = modalg::derive_order6(&fs, &fx, &groups, &s, target).map_err(|e| e.to_string())?;
            ensure(matches!(d.verdict, DerivationVerdict::NoContradiction { .. }), || {
                format!("δ_6a for {target}: contradiction")
            })?;
        }
        Ok(format!("{checked} trivial (class, character) pairs; obstruction and derivation consistent"))
    })
}

pub fn criterion_10() -> Check {
    let g = bundled("aut_a6").unwrap();
    let rows = [("chi10", (6, 4)), ("chi20", (8, 12)), ("phi1a", (1, 0)), ("phi6a", (2, 4)), ("phi8", (4, 4))];
    for (name, want) in rows {
        let f = g.character(name).ok_or_else(|| format!("no {name}"))?;
        let got = modalg::plus_minus_dims(f, "2a").map_err(|e| e.to_string())?;
        ensure(got == want, || format!("{name}: {got:?}, expected {want:?}"))?;
    }
    Ok("five plus/minus rows match".into())
}

pub type Criterion = (&'static str, fn() -> Check);

pub fn all() -> Vec<Criterion> {
    vec![
        ("HeLP order 4, PSL(2,23)", criterion_1 as fn() -> Check),
        ("HeLP order 9, PSL(2,19)", criterion_2),
        ("HeLP order 12, PSL(2,23)", criterion_3),
        ("HeLP order 10, PSL(2,19), both branches", criterion_4),
        ("eigenvalue multisets", criterion_5),
        ("lattice obstruction", criterion_6),
        ("order 6 module derivation", criterion_7),
        ("short exact sequence oracle equivalence", criterion_8),
        ("trivial system properties", criterion_9),
        ("plus/minus dimensions", criterion_10),
    ]
}
