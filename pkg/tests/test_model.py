import numpy as np
import pytest

from nsocp import corpus as cp
from nsocp import expr as ex
from nsocp import model as md
from nsocp import solvers as sv


def fd_jacobian(p, x):
    x = np.asarray(x, dtype=float)
    out = []
    for j, block in enumerate(p.constraints):
        rows = np.zeros((p.dims[j], p.n))
        for i in range(p.n):
            h = 1e-6 * max(1.0, abs(x[i]))
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            gp = md.evaluate(p, xp).g[j]
            gm = md.evaluate(p, xm).g[j]
            rows[:, i] = (gp - gm) / (2 * h)
        out.append(rows)
    return out


def test_evaluate_erratum_problem():
    p = cp.get("zz-erratum")
    b = md.evaluate(p, np.zeros(1))
    assert b.f == 0.0
    assert np.allclose(b.grad_f, [-1.0])
    assert np.allclose(b.g[0], [0.0, 0.0])
    assert np.allclose(b.jac[0], [[1.0], [1.0]])


def test_evaluate_duplicated_hat_jacobian():
    p = cp.get("ex32")
    b = md.evaluate(p, np.zeros(2))
    assert np.allclose(b.jac[0], [[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])


def test_jacobians_match_finite_differences():
    rng = np.random.default_rng(11)
    for name in ("zz-erratum", "ex42", "ex52", "halfline-min"):
        p = cp.get(name)
        for _ in range(5):
            x = rng.uniform(-0.8, 0.8, size=p.n)
            b = md.evaluate(p, x)
            fd = fd_jacobian(p, x)
            for j in range(p.q):
                assert np.allclose(b.jac[j], fd[j], atol=1e-6, rtol=1e-6)


def test_classify_indices():
    p = cp.get("ex33")
    idx = md.classify_indices(p, [0.0])
    assert idx.origin == {0} and not idx.boundary and not idx.interior

    hp = cp.get("halfline-min")
    idx = md.classify_indices(hp, [1.0])
    assert idx.boundary == {0}

    doc = {"name": "inside", "n": 1, "objective": "x1",
           "constraints": [{"dim": 3, "components": ["6", "3", "4"]}]}
    pi = md.problem_from_dict(doc)
    idx = md.classify_indices(pi, [0.0])
    assert idx.interior == {0}

    # (5, (3, 4)) sits exactly on the boundary: lambda1 = 0
    doc["constraints"][0]["components"] = ["5", "3", "4"]
    edge = md.problem_from_dict(doc)
    idx = md.classify_indices(edge, [0.0])
    assert idx.boundary == {0}


def test_classify_infeasible_raises_with_block():
    p = cp.get("halfline-min")
    with pytest.raises(md.InfeasiblePoint) as info:
        md.classify_indices(p, [-1.0])
    assert info.value.block == 0
    assert info.value.violation > 0


def test_classification_stable_under_small_perturbation():
    tol = 1e-7
    for name in cp.names():
        p = cp.get(name)
        x = np.asarray(p.points_of_interest[0], dtype=float)
        base = md.classify_indices(p, x, tol)
        rng = np.random.default_rng(3)
        for _ in range(10):
            dx = rng.standard_normal(p.n)
            dx *= (tol / 10) / max(np.linalg.norm(dx), 1e-30)
            try:
                moved = md.classify_indices(p, x + dx, tol)
            except md.InfeasiblePoint:
                continue
            # nothing interior may collapse to the origin set
            assert not (base.interior & moved.origin)


def test_lagrangian_grad_hand_kkt():
    p = cp.get("halfline-min")
    mu = md.Multipliers((np.array([1.0, -1.0]),))
    assert np.allclose(md.lagrangian_grad(p, [1.0], mu), [0.0], atol=1e-15)


def test_lagrangian_grad_zero_multiplier_is_objective_gradient():
    for name in ("ex42", "zz-erratum"):
        p = cp.get(name)
        x = np.asarray(p.points_of_interest[0]) + 0.3
        mu = md.Multipliers.zeros(p)
        b = md.evaluate(p, x)
        assert np.array_equal(md.lagrangian_grad(p, x, mu, b), b.grad_f)


def test_erratum_has_no_multiplier():
    # residual is -1 - (a + b) with a >= |b| over the cone, so it never
    # vanishes; check on a spread of cone points
    p = cp.get("zz-erratum")
    rng = np.random.default_rng(8)
    for _ in range(200):
        b = rng.uniform(-5, 5)
        a = abs(b) + rng.uniform(0, 5)
        mu = md.Multipliers((np.array([a, b]),))
        g = md.lagrangian_grad(p, [0.0], mu)
        assert g[0] <= -1.0 + 1e-12


def test_kkt_residual_cases():
    p = cp.get("halfline-min")
    mu = md.Multipliers((np.array([1.0, -1.0]),))
    res = md.kkt_residual(p, [1.0], mu)
    assert res.stationarity <= 1e-10
    assert res.feasibility <= 1e-10
    assert res.complementarity <= 1e-10

    res2 = md.kkt_residual(p, [3.0], md.Multipliers.zeros(p))
    assert res2.stationarity > 0.5  # feasible but nowhere near stationary

    res3 = md.kkt_residual(p, [-1.0], md.Multipliers.zeros(p))
    assert res3.feasibility > 0.5  # infeasible point


def test_akkt_check_constant_kkt_log():
    p = cp.get("halfline-min")
    mu = md.Multipliers((np.array([1.0, -1.0]),))
    res = md.kkt_residual(p, [1.0], mu)
    delta = (np.zeros(2),)
    logs = [
        md.IterateLog(k=k, x=np.array([1.0]), mu=mu, delta=delta, residuals=res, rho=1.0)
        for k in range(3)
    ]
    report = md.akkt_check(p, logs, 1e-6)
    assert report.ok
    assert report.delta_decreasing


def test_akkt_check_rejects_cone_violations():
    p = cp.get("halfline-min")
    mu = md.Multipliers((np.array([1.0, -1.0]),))
    res = md.kkt_residual(p, [1.0], mu)
    bad_delta = (np.array([-5.0, 0.0]),)  # pushes g + delta out of the cone
    logs = [
        md.IterateLog(k=k, x=np.array([1.0]), mu=mu, delta=bad_delta, residuals=res, rho=1.0)
        for k in range(2)
    ]
    assert not md.akkt_check(p, logs, 1e-6).ok


def test_akkt_check_requires_perturbations():
    p = cp.get("halfline-min")
    mu = md.Multipliers((np.array([1.0, -1.0]),))
    res = md.kkt_residual(p, [1.0], mu)
    logs = [
        md.IterateLog(k=k, x=np.array([1.0]), mu=mu, delta=None, residuals=res, rho=1.0)
        for k in range(2)
    ]
    with pytest.raises(md.MissingPerturbations):
        md.akkt_check(p, logs, 1e-6)


def test_akkt_check_on_penalty_log_with_diverging_multipliers():
    p = cp.get("zz-erratum")
    cfg = sv.SolverConfig(method="penalty", rho_growth=12.0, max_outer=40)
    logs = sv.penalty_solve(p, np.array([1.0]), cfg)
    report = md.akkt_check(p, logs, 1e-6)
    assert report.ok
    # multiplier norms are reported and explode
    assert report.mu_norms[-1] > 100 * report.mu_norms[0]


def test_problem_roundtrip():
    p = cp.get("ex42")
    doc = md.problem_to_dict(p)
    again = md.problem_from_dict(doc)
    assert again.n == p.n
    assert ex.to_string(again.objective) == ex.to_string(p.objective)
    assert again.dims == p.dims


def test_rejects_one_dimensional_blocks():
    doc = {"name": "bad", "n": 1, "objective": "x1",
           "constraints": [{"dim": 1, "components": ["x1"]}]}
    with pytest.raises(md.ModelError):
        md.problem_from_dict(doc)
