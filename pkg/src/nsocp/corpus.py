"""Built-in fixture problems with known qualification verdicts.

Each fixture is a small cone-constrained problem with one distinguished
point and a table of expected outcomes: which of the eight conditions
hold there, and whether a Lagrange multiplier exists at all.  The notes
state what makes each fixture interesting; together they separate every
pair of conditions that can be separated with one or two variables.

``run_corpus`` replays every table and doubles as the regression gate
for the analyzers; solver smoke runs cover the two fixtures with a
known solve story (clean convergence on ``halfline-min``, diverging
multipliers on ``zz-erratum``).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import cq as cqmod
from . import model as md
from . import solvers as sv

KKT_EXIST_TOL = 1e-6

FIXTURES = {
    "halfline-min": {
        "name": "halfline-min",
        "n": 1,
        "objective": "x1",
        "constraints": [{"dim": 2, "components": ["x1", "1"]}],
        "points_of_interest": [[1.0]],
        "expected": {
            "ndg": True,
            "robinson": True,
            "weak-ndg": True,
            "weak-robinson": True,
            "weak-crcq": True,
            "weak-cpld": True,
            "seq-crcq": True,
            "seq-cpld": True,
            "kkt": True,
        },
        "note": "boundary-active halfspace-like constraint; optimum x=1 with "
        "multiplier (1,-1); every condition holds",
    },
    "zz-erratum": {
        "name": "zz-erratum",
        "n": 1,
        "objective": "-x1",
        "constraints": [{"dim": 2, "components": ["x1", "x1 + x1^2"]}],
        "points_of_interest": [[0.0]],
        "expected": {
            "ndg": False,
            "robinson": False,
            "weak-ndg": False,
            "weak-robinson": False,
            "weak-crcq": False,
            "weak-cpld": False,
            "seq-crcq": False,
            "seq-cpld": False,
            "kkt": False,
        },
        "note": "unique feasible point at the origin minimizes -x but admits no "
        "multiplier; every condition fails, so penalty-type methods drive "
        "residuals to zero with exploding multipliers",
    },
    "ex31-padded": {
        "name": "ex31-padded",
        "n": 2,
        "objective": "x1 + x2",
        "constraints": [{"dim": 3, "components": ["x1", "x2", "0"]}],
        "points_of_interest": [[0.0, 0.0]],
        "expected": {
            "ndg": False,
            "robinson": True,
            "weak-ndg": True,
            "weak-robinson": True,
            "weak-crcq": True,
            "weak-cpld": True,
            "seq-crcq": False,
            "seq-cpld": True,
            "kkt": True,
        },
        "note": "a two-dimensional constraint padded with a structural zero: "
        "full-rank demands fail in the padded space but the padding is "
        "invisible to eigenvector limits along sequences",
    },
    "ex32": {
        "name": "ex32",
        "n": 2,
        "objective": "x1",
        "constraints": [{"dim": 3, "components": ["x1", "x2", "x2"]}],
        "points_of_interest": [[0.0, 0.0]],
        "expected": {
            "ndg": False,
            "robinson": True,
            "weak-ndg": True,
            "weak-robinson": True,
            "weak-crcq": True,
            "weak-cpld": True,
            "seq-crcq": False,
            "seq-cpld": True,
            "kkt": True,
        },
        "note": "duplicated hat component without structural zeros: the full "
        "family cannot have rank 3 in two variables, yet the limits forced "
        "along every sequence keep two independent vectors",
    },
    "ex33": {
        "name": "ex33",
        "n": 1,
        "objective": "x1",
        "constraints": [{"dim": 3, "components": ["4*x1", "2*x1", "x1"]}],
        "points_of_interest": [[0.0]],
        "expected": {
            "ndg": False,
            "robinson": True,
            "weak-ndg": False,
            "weak-robinson": True,
            "weak-crcq": True,
            "weak-cpld": True,
            "seq-crcq": True,
            "seq-cpld": True,
            "kkt": True,
        },
        "note": "one variable feeding a three-dimensional cone: the forced "
        "limit pair is two positive scalars, linearly dependent but "
        "positively independent",
    },
    "ex41": {
        "name": "ex41",
        "n": 1,
        "objective": "x1",
        "constraints": [{"dim": 3, "components": ["-x1", "x1", "x1"]}],
        "points_of_interest": [[0.0]],
        "expected": {
            "ndg": False,
            "robinson": False,
            "weak-ndg": False,
            "weak-robinson": False,
            "weak-crcq": True,
            "weak-cpld": True,
            "seq-crcq": False,
            "seq-cpld": False,
            "kkt": True,
        },
        "note": "forced limit pair has both entries of one sign, so positive "
        "dependence is unavoidable along sequences, yet the family never "
        "changes with the point and constant-rank style conditions survive",
    },
    "ex42": {
        "name": "ex42",
        "n": 2,
        "objective": "x1",
        "constraints": [{"dim": 2, "components": ["2*x1", "x2^2"]}],
        "points_of_interest": [[0.0, 0.0]],
        "expected": {
            "ndg": False,
            "robinson": True,
            "weak-ndg": False,
            "weak-robinson": True,
            "weak-crcq": False,
            "weak-cpld": True,
            "seq-crcq": False,
            "seq-cpld": True,
            "kkt": True,
        },
        "note": "a squared hat component collapses both limit vectors onto "
        "(2,0) at the point while they separate at every nearby point: "
        "plain constant rank breaks, the positive version does not",
    },
    "ex51": {
        "name": "ex51",
        "n": 1,
        "objective": "-x1",
        "constraints": [{"dim": 2, "components": ["-x1", "x1"]}],
        "points_of_interest": [[0.0]],
        "expected": {
            "ndg": False,
            "robinson": False,
            "weak-ndg": False,
            "weak-robinson": False,
            "weak-crcq": True,
            "weak-cpld": True,
            "seq-crcq": True,
            "seq-cpld": True,
            "kkt": True,
        },
        "note": "antisymmetric two-dimensional constraint: one slice vector is "
        "identically zero, so dependences persist under every perturbation "
        "while injectivity-style conditions fail outright",
    },
    "ex52": {
        "name": "ex52",
        "n": 1,
        "objective": "x1^2",
        "constraints": [{"dim": 3, "components": ["x1^2", "x1", "0"]}],
        "points_of_interest": [[0.0]],
        "expected": {
            "ndg": False,
            "robinson": False,
            "weak-ndg": False,
            "weak-robinson": False,
            "weak-crcq": True,
            "weak-cpld": True,
            "seq-crcq": False,
            "seq-cpld": False,
            "kkt": True,
        },
        "note": "sequence-forced limits keep both slice vectors nonzero, but "
        "perturbing the axis toward the padded coordinate annihilates them: "
        "the perturbation-robust conditions fail where the weak ones hold",
    },
}


def names() -> list:
    return sorted(FIXTURES)


def get(name: str) -> md.ProblemSpec:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; known: {', '.join(names())}")
    return md.problem_from_dict(FIXTURES[name])


def fixture_doc(name: str) -> dict:
    return dict(FIXTURES[name])


def kkt_exists(p: md.ProblemSpec, x, tol: float = KKT_EXIST_TOL) -> bool:
    resid, _ = cqmod.kkt_multiplier_search(p, x)
    bundle = md.evaluate(p, x)
    return resid <= tol * (1.0 + float(np.linalg.norm(bundle.grad_f)))


@dataclass
class FixtureResult:
    name: str
    verdicts: dict = field(default_factory=dict)  # check -> status string
    expected: dict = field(default_factory=dict)
    mismatches: list = field(default_factory=list)
    smoke: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.mismatches and all(self.smoke.values())


def run_fixture(
    name: str,
    budget: cqmod.SearchBudget | None = None,
    solver_smoke: bool = True,
) -> FixtureResult:
    budget = budget or cqmod.SearchBudget()
    p = get(name)
    x = np.asarray(p.points_of_interest[0], dtype=float)
    expected = dict(p.expected or {})
    out = FixtureResult(name=name, expected=expected)
    t0 = time.perf_counter()
    for check, want in sorted(expected.items()):
        if check == "kkt":
            got = kkt_exists(p, x)
            out.verdicts[check] = "EXISTS" if got else "NONEXISTENT"
            if got != want:
                out.mismatches.append((check, want, out.verdicts[check]))
            continue
        verdict = cqmod.run_check(p, x, check, budget)
        out.verdicts[check] = verdict.status.value
        if verdict.status == cqmod.CqStatus.UNDECIDED or verdict.holds() != want:
            out.mismatches.append((check, want, verdict.status.value))
    if solver_smoke:
        out.smoke = _solver_smoke(name, p)
    out.seconds = time.perf_counter() - t0
    return out


def _solver_smoke(name: str, p: md.ProblemSpec) -> dict:
    if name == "halfline-min":
        smoke = {}
        for method in ("penalty", "auglag", "sqp"):
            cfg = sv.SolverConfig(method=method)
            logs = sv.solve(p, np.array([5.0]), cfg)
            last = logs[-1]
            audit = md.akkt_check(p, logs, 1e-6) if len(logs) >= 2 else None
            smoke[method] = (
                abs(float(last.x[0]) - 1.0) <= 1e-5
                and float(np.linalg.norm(last.mu.mu[0] - np.array([1.0, -1.0]))) <= 1e-4
                and (audit is None or audit.ok)
            )
        return smoke
    if name == "zz-erratum":
        cfg = sv.SolverConfig(
            method="penalty", rho_growth=12.0, max_outer=40,
            stationarity_tol=1e-8, feasibility_tol=1e-8,
        )
        logs = sv.solve(p, np.array([1.0]), cfg)
        last = logs[-1]
        mu_norms = [log.mu.max_norm() for log in logs]
        grew = len(mu_norms) >= 4 and mu_norms[-1] >= 10.0 * mu_norms[-4]
        return {
            "penalty-diagnostic": last.residuals.feasibility < 1e-6
            and last.residuals.stationarity < 1e-6
            and grew
        }
    # remaining fixtures: a short penalty run must simply hold together
    cfg = sv.SolverConfig(
        method="penalty", max_outer=6, stationarity_tol=1e-6, feasibility_tol=1e-6
    )
    x0 = np.full(p.n, 0.5)
    try:
        logs = sv.solve(p, x0, cfg)
    except sv.SolverError:
        return {"penalty-smoke": False}
    return {"penalty-smoke": bool(logs)}


def run_corpus(
    name_filter: str | None = None,
    budget: cqmod.SearchBudget | None = None,
    solver_smoke: bool = True,
):
    selected = [n for n in names() if name_filter is None or name_filter in n]
    return [run_fixture(n, budget, solver_smoke) for n in selected]
