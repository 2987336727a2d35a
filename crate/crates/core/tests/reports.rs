use helpkit::report::{self, Branch, RunConfig, RunError, Status, Task};

fn zc_psl2_19() -> RunConfig {
    let mut cfg = RunConfig::new("psl2_19", Task::Zc);
    cfg.orders = vec![9, 10];
    cfg.lattice_pair = Some(("chi18".into(), "chi19".into()));
    cfg
}

#[test]
fn reports_are_deterministic() {
    let mut cfg = zc_psl2_19();
    cfg.mu_tables = true;
    let a = report::run(&cfg).unwrap();
    let b = report::run(&cfg).unwrap();
    assert_eq!(a.deterministic_json(), b.deterministic_json());
    assert_eq!(a.status, Status::Verified);
    assert_eq!(a.exit_code(), 0);
    assert!(a.deterministic_json().get("timing_ms").is_none());
}

#[test]
fn digest_depends_on_the_inputs() {
    let a = report::run(&zc_psl2_19()).unwrap();
    let mut cfg = RunConfig::new("m10", Task::Pq);
    cfg.pair = Some((2, 3));
    let b = report::run(&cfg).unwrap();
    assert_ne!(a.digest, b.digest);
    cfg.facts = Some("aut_a6_facts".into());
    let c = report::run(&cfg).unwrap();
    assert_ne!(b.digest, c.digest);
    assert_eq!(b.status, Status::Survivors);
    assert_eq!(c.status, Status::Verified);
}

#[test]
fn every_verdict_has_a_witness() {
    let r = report::run(&zc_psl2_19()).unwrap();
    for o in &r.results {
        for s in &o.systems {
            assert!(!s.epsilon.is_empty());
            if !s.trivial {
                let l = s.lattice.as_ref().expect("lattice witness");
                assert!(!l.classes.is_empty());
                assert!(s.eliminated_by.is_some());
            }
        }
    }
    let text = r.to_text();
    assert!(text.contains("all torsion orders trivial"));
    assert!(text.contains("t = 4"));
}

#[test]
fn branch_filter_and_text_output() {
    let mut cfg = RunConfig::new("psl2_19", Task::Help);
    cfg.orders = vec![10];
    cfg.branch = Branch::Class("5b".into());
    let r = report::run(&cfg).unwrap();
    assert_eq!(r.results[0].systems.len(), 2);
    assert_eq!(r.results[0].survivors, 1);
    assert_eq!(r.exit_code(), 2);
}

#[test]
fn run_errors_map_to_exit_codes() {
    let mut cfg = RunConfig::new("aut_a6", Task::Zc);
    cfg.orders = vec![6];
    let e = report::run(&cfg).unwrap_err();
    assert_eq!(e.exit_code(), 3);
    cfg.orders = vec![];
    assert!(matches!(report::run(&cfg), Err(RunError::Config(_))));
    let mut cfg = RunConfig::new("psl2_19", Task::LatticeCheck);
    cfg.orders = vec![10];
    assert_eq!(report::run(&cfg).unwrap_err().exit_code(), 1);
}
