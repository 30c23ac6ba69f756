"""Smoke test for the dfgm extension module.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml`,
then run `python crates/python/python/smoke_test.py`.
"""

import math

import dfgm


def close(a, b, tol):
    return all(abs(x - y) <= tol for x, y in zip(a, b))


def main():
    p = dfgm.QpProblem([[2.0]], [-2.0], [[1.0]], [0.5])
    assert p.validate() == []
    sol = dfgm.solve(p)
    assert sol.iters == 500
    assert close(sol.z, [0.5], 1e-9) and close(sol.lam, [1.0], 1e-9)

    q = dfgm.QpProblem([[1.0, 0.0], [0.0, 1.0]], [-3.0, -4.0], [[1.0, 1.0]], [1.0])
    sol = dfgm.solve(q, backend="parallel:2", precondition=True)
    exact = dfgm.solve_enumerate(q)
    assert close(sol.z, exact["z"], 1e-6) and exact["active_set"] == [0]
    assert dfgm.check_kkt(q, sol.z, sol.lam, tol=1e-6)["pass"]

    text = p.to_text()
    assert dfgm.QpProblem.from_text(text).to_text() == text

    r = dfgm.QpProblem.random(7, 6, 5)
    a = dfgm.solve(r, max_iters=3000, backend="naive")
    b = dfgm.solve(r, max_iters=3000, backend="blocked:2")
    assert close(a.z, b.z, 1e-9)

    assert dfgm.matvec([[1.0, 2.0], [3.0, 4.0]], [1.0, 1.0]) == [3.0, 7.0]
    assert dfgm.tree_sum([1.0, 2.0, 3.0]) == 6.0

    est = dfgm.estimate(4, 4, {"L_mul": 3, "L_add": 4, "unroll": "full", "II": 1})
    assert est["iter_cycles"] == 36 and est["solve_cycles"] == 18000

    cal = dfgm.calibrate()
    assert cal["max_rel_error"] <= 0.15 and cal["speedups"][0] >= 8.0

    mpc = dfgm.condense_mpc([[1.0]], [[1.0]], [[1.0]], [[1.0]], 1, [-1.0], [1.0], [0.0])
    assert mpc.h == [[2.0]] and mpc.m == 2

    bad = dfgm.QpProblem([[1.0]], [0.0], [[0.0]], [-1.0])
    try:
        dfgm.solve(bad)
    except dfgm.DivergenceError as e:
        assert "iteration" in str(e)
    else:
        raise AssertionError("expected DivergenceError")

    try:
        dfgm.QpProblem([[1.0, 2.0]], [0.0])
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

    assert math.isfinite(sol.gap)
    print("smoke test ok")


if __name__ == "__main__":
    main()
