mod common;

use common::{set, vectors};
use helpkit::grpdata::{bundled, bundled_names, CharKind, GroupData, SideConstraint};
use helpkit::help::{self, HelpConfig, HelpError, PartialAugmentationSystem, PrimeGraphVerdict};
use num_traits::ToPrimitive;

/// `μ_l` by a floating-point discrete Fourier transform over all powers of the unit.
fn numeric_mu(g: &GroupData, f: &helpkit::grpdata::ClassFunction, s: &PartialAugmentationSystem) -> Vec<f64> {
    let n = s.unit_order;
    let values: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let d = if k == 0 { n } else { helpkit::arith::gcd(k, n) };
            // u^k and u^gcd(k,n) are rationally conjugate only up to Galois; apply it explicitly.
            let base = help::value_at_unit(f, s, d).unwrap();
            let t = if k == 0 { 1 } else { (k / d) as i64 };
            base.galois(t).unwrap().to_complex()
        })
        .collect();
    let _ = g;
    (0..n)
        .map(|l| {
            let mut re = 0.0;
            for (k, (vr, vi)) in values.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k as f64) * (l as f64) / n as f64;
                re += vr * ang.cos() - vi * ang.sin();
            }
            re / n as f64
        })
        .collect()
}

#[test]
fn exact_multiplicities_match_a_numeric_transform() {
    let mut checked = 0;
    for name in ["psl2_19", "psl2_23"] {
        let g = bundled(name).unwrap();
        for n in [4, 6, 9, 10, 12] {
            let Ok(e) = help::enumerate(&g, n, &HelpConfig::default()) else { continue };
            for s in e.systems() {
                for f in g.characters() {
                    let Ok(m) = help::multiplicities(f, s) else { continue };
                    let num = numeric_mu(&g, f, s);
                    for (a, b) in m.mult.iter().zip(&num) {
                        assert!((a.to_f64().unwrap() - b).abs() < 1e-6, "{name} {} {s}", f.name);
                    }
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 50);
}

#[test]
fn m10_order_six_reduces_to_the_critical_candidate() {
    let g = bundled("m10").unwrap();
    let e = help::enumerate(&g, 6, &HelpConfig::default()).unwrap();
    assert_eq!(vectors(e.systems(), &["2a", "3a"]), set(&[&[-2, 3]]));
    let (v, _) = help::prime_graph_check(&g, 2, 3, &HelpConfig::default()).unwrap();
    assert!(matches!(v, PrimeGraphVerdict::Survivors { .. }));
}

#[test]
fn pgl2_9_sign_character_removes_the_outer_branch() {
    let g = bundled("pgl2_9").unwrap();
    let e = help::enumerate(&g, 6, &HelpConfig::default()).unwrap();
    assert_eq!(e.systems().len(), 1);
    assert_eq!(e.systems()[0].powers[&3], "2a");
    // An explicit selection needs values on the outer involution class too.
    let r = help::enumerate(&g, 6, &HelpConfig::with_characters(&["chi10", "chi20"]));
    assert!(matches!(r, Err(HelpError::MissingValue { .. })));
}

#[test]
fn no_units_of_order_fifteen_in_psl2_19() {
    let g = bundled("psl2_19").unwrap();
    let (v, e) = help::prime_graph_check(&g, 3, 5, &HelpConfig::default()).unwrap();
    assert!(matches!(v, PrimeGraphVerdict::NoPqUnits));
    assert!(e.systems().is_empty());
}

#[test]
fn side_constraints_restrict_the_search() {
    let g = bundled("psl2_19").unwrap();
    let side = SideConstraint { unit_order: 10, class: "10a".into(), value: 0, provenance: "test".into() };
    let e = help::enumerate(&g, 10, &HelpConfig::default().side(&[side])).unwrap();
    assert!(e.systems().iter().all(|s| s.epsilon("10a") == 0));
    assert_eq!(e.systems().len(), 2);
}

#[test]
fn configuration_errors() {
    let g = bundled("psl2_19").unwrap();
    let e = help::enumerate(&g, 10, &HelpConfig::with_characters(&["phi1_5", "phi1", "phi2"])).unwrap();
    assert!(e.main.skipped.iter().any(|k| k.starts_with("phi1_5")));
    let r = help::multiplicities(g.character("phi1_5").unwrap(), &e.systems()[0]);
    assert!(matches!(r, Err(HelpError::CharacteristicDivides { .. })));
    let r = help::enumerate(&g, 9, &HelpConfig::with_characters(&["phi18_5"]));
    assert!(matches!(r, Err(HelpError::MissingValue { .. })));
    let r = help::enumerate(&g, 10, &HelpConfig::with_characters(&["nope"]));
    assert!(matches!(r, Err(HelpError::UnknownCharacter(_))));
    let a6 = bundled("aut_a6").unwrap();
    assert!(matches!(help::enumerate(&a6, 6, &HelpConfig::default()), Err(HelpError::IncompleteClasses { .. })));
}

#[test]
fn enumeration_is_deterministic() {
    let g = bundled("psl2_23").unwrap();
    let a = help::enumerate(&g, 12, &HelpConfig::default()).unwrap();
    let b = help::enumerate(&g, 12, &HelpConfig::default()).unwrap();
    assert_eq!(a.systems(), b.systems());
    assert_eq!(serde_json::to_string(&a.main).unwrap(), serde_json::to_string(&b.main).unwrap());
}

#[test]
fn trivial_systems_survive_their_own_enumeration() {
    for name in bundled_names() {
        let g = bundled(name).unwrap();
        if !g.complete_classes {
            continue;
        }
        for c in g.classes.iter().filter(|c| c.order > 1) {
            let delta = PartialAugmentationSystem::trivial(&g, &c.name).unwrap();
            let e = match help::enumerate(&g, c.order, &HelpConfig::default()) {
                Ok(e) => e,
                Err(HelpError::Unbounded { .. }) => continue,
                Err(e) => panic!("{name} order {}: {e}", c.order),
            };
            let side_allows = g
                .side_constraints
                .iter()
                .filter(|s| s.unit_order == c.order)
                .all(|s| delta.epsilon(&s.class) == s.value);
            if side_allows {
                assert!(e.systems().contains(&delta), "{name}: δ_{} missing", c.name);
            }
        }
    }
}

#[test]
fn brauer_characters_skip_orders_divisible_by_their_prime() {
    let g = bundled("psl2_19").unwrap();
    let e = help::enumerate(&g, 10, &HelpConfig::default()).unwrap();
    for k in &e.main.skipped {
        let name = k.split_whitespace().next().unwrap();
        let f = g.character(name).unwrap();
        assert!(matches!(f.kind, CharKind::Brauer(5)) || f.values.len() < g.classes.len() - 1, "{k}");
    }
}
