"""Smoke test for the pyhelpkit extension module.

Build with `cargo build --release -p helpkit-py`, copy
target/release/libpyhelpkit.so to python/pyhelpkit.so and run this script
with python/ on PYTHONPATH.
"""

import pyhelpkit as hk


def main():
    assert "psl2_19" in hk.Group.bundled_names()
    g = hk.Group.load("psl2_19")
    assert g.order == 3420

    systems = hk.enumerate(g, 10)
    exceptional = [s for s in systems if not s.is_trivial()]
    assert len(systems) == 4 and len(exceptional) == 2

    mu = hk.multiplicities(g, "chi19", exceptional[0])
    assert sum(int(m) for m in mu) == 19

    r = hk.obstruction_check(g, exceptional[0], 5, 2, "chi18", "chi19")
    assert r["verdict"]["verdict"] == "contradiction", r["verdict"]
    assert (r["verdict"]["t"], r["verdict"]["lower_b"], r["verdict"]["upper_a"]) == (4, 2, 1)

    delta = hk.System.trivial(g, "10a")
    ok = hk.obstruction_check(g, delta, 5, 2, "chi18", "chi19")
    assert ok["verdict"]["verdict"] == "consistent", ok["verdict"]

    a6 = hk.Group.load("aut_a6")
    u = hk.System.from_parts(a6, 6, {"2a": -2, "3a": 3}, {2: "3a", 3: "2a"})
    d = hk.derive_order6("aut_a6_facts", u, "M10")
    assert d["verdict"]["verdict"] == "contradiction"
    assert a6.plus_minus_dims("chi20", "2a") == (8, 12)

    assert hk.ses_feasible([2, 1], [1], [2])

    code, report = hk.run("pq", "m10", pair=(2, 3), facts="aut_a6_facts")
    assert code == 0 and report["status"] == "verified"
    code, report = hk.run("zc", "psl2_19", orders=[10])
    assert code == 2

    print("pyhelpkit", hk.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
