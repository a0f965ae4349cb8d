"""Problem representation and point-wise optimality machinery.

A problem is ``min f(x)`` subject to ``g_j(x)`` in the Lorentz cone of
dimension ``m_j`` for each block ``j``.  This module evaluates problems,
partitions active blocks at a feasible point into the origin / nonzero
boundary / interior index sets, and computes the Lagrangian gradient and
the three KKT residuals.  It also audits solver iterate logs against the
approximate-KKT conditions: perturbed cone feasibility and perturbed
complementarity at every recorded iterate, stationarity at the last one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .cone import (
    ConeMembership,
    SocVector,
    classify,
    eigenvalues_arr,
    project_arr,
)

DEFAULT_CLASSIFY_TOL = 1e-7


class ModelError(ValueError):
    pass


class InfeasiblePoint(ModelError):
    def __init__(self, block: int, violation: float):
        self.block = block
        self.violation = violation
        super().__init__(
            f"constraint block {block} infeasible: lambda1 = {-violation:.3e}"
        )


class MissingPerturbations(ModelError):
    pass


class DimensionMismatch(ModelError):
    pass


@dataclass(frozen=True)
class ConstraintBlock:
    dim: int
    components: tuple  # of ex.Expr, length dim

    def __post_init__(self):
        if self.dim < 2:
            raise ModelError(
                f"cone constraints need dim >= 2, got {self.dim}; scalar "
                "inequalities are not supported"
            )
        if len(self.components) != self.dim:
            raise ModelError(
                f"block declares dim {self.dim} but has {len(self.components)} components"
            )


@dataclass(frozen=True)
class ProblemSpec:
    n: int
    objective: ex.Expr
    constraints: tuple  # of ConstraintBlock
    name: str = ""
    points_of_interest: tuple = ()
    expected: dict | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ModelError("n must be >= 1")
        if len(self.constraints) < 1:
            raise ModelError("need at least one constraint block")
        if ex.max_var_index(self.objective) > self.n:
            raise ModelError("objective uses a variable beyond n")
        for j, block in enumerate(self.constraints):
            for comp in block.components:
                if ex.max_var_index(comp) > self.n:
                    raise ModelError(f"block {j} uses a variable beyond n")

    @property
    def q(self) -> int:
        return len(self.constraints)

    @property
    def dims(self) -> tuple:
        return tuple(b.dim for b in self.constraints)


def problem_from_dict(doc: dict) -> ProblemSpec:
    """Build a problem from its JSON document form."""
    try:
        n = int(doc["n"])
        objective = ex.parse(doc["objective"], n)
        blocks = []
        for raw in doc["constraints"]:
            comps = tuple(ex.parse(s, n) for s in raw["components"])
            blocks.append(ConstraintBlock(int(raw["dim"]), comps))
    except KeyError as err:
        raise ModelError(f"problem document missing field {err}") from err
    pts = tuple(tuple(float(v) for v in p) for p in doc.get("points_of_interest", []))
    return ProblemSpec(
        n=n,
        objective=objective,
        constraints=tuple(blocks),
        name=str(doc.get("name", "")),
        points_of_interest=pts,
        expected=doc.get("expected"),
    )


def problem_to_dict(p: ProblemSpec) -> dict:
    doc = {
        "name": p.name,
        "n": p.n,
        "objective": ex.to_string(p.objective),
        "constraints": [
            {"dim": b.dim, "components": [ex.to_string(c) for c in b.components]}
            for b in p.constraints
        ],
        "points_of_interest": [list(pt) for pt in p.points_of_interest],
    }
    if p.expected is not None:
        doc["expected"] = dict(p.expected)
    return doc


def load_problem(path) -> ProblemSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return problem_from_dict(json.load(fh))


# -- evaluation ---------------------------------------------------------------

@dataclass
class EvalBundle:
    """Objective, gradient, constraint values and Jacobians at one point."""

    f: float
    grad_f: np.ndarray
    g: list  # list of flat arrays, one per block
    jac: list  # list of (m_j, n) arrays

    def g_soc(self, j: int) -> SocVector:
        return SocVector.from_array(self.g[j])


def evaluate(p: ProblemSpec, x) -> EvalBundle:
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n,):
        raise DimensionMismatch(f"x has shape {x.shape}, expected ({p.n},)")
    f = ex.evaluate(p.objective, x)
    grad_f = ex.grad(p.objective, x)
    g = []
    jac = []
    for block in p.constraints:
        vals = np.array([ex.evaluate(c, x) for c in block.components])
        rows = np.vstack([ex.grad(c, x) for c in block.components])
        g.append(vals)
        jac.append(rows)
    return EvalBundle(f=f, grad_f=grad_f, g=g, jac=jac)


@dataclass(frozen=True)
class IndexClassification:
    """Partition of the block indices at a feasible point."""

    origin: frozenset
    boundary: frozenset
    interior: frozenset
    tol: float

    # short aliases matching the usual notation
    @property
    def I0(self):
        return self.origin

    @property
    def IB(self):
        return self.boundary

    @property
    def Iint(self):
        return self.interior


def classify_indices(
    p: ProblemSpec, x, tol: float = DEFAULT_CLASSIFY_TOL, bundle: EvalBundle | None = None
) -> IndexClassification:
    """Partition blocks by where ``g_j(x)`` sits in its cone.

    Raises :class:`InfeasiblePoint` when some block has ``lambda1`` below
    ``-tol``.
    """
    if bundle is None:
        bundle = evaluate(p, x)
    origin, boundary, interior = set(), set(), set()
    for j in range(p.q):
        lam1, _ = eigenvalues_arr(bundle.g[j])
        if lam1 < -tol:
            raise InfeasiblePoint(j, -lam1)
        kind = classify(bundle.g_soc(j), tol)
        if kind == ConeMembership.ORIGIN:
            origin.add(j)
        elif kind == ConeMembership.BOUNDARY_NONZERO:
            boundary.add(j)
        elif kind == ConeMembership.INTERIOR:
            interior.add(j)
        else:
            # |lam1| <= tol but lam2 barely above tol: treat as boundary
            boundary.add(j)
    return IndexClassification(
        origin=frozenset(origin),
        boundary=frozenset(boundary),
        interior=frozenset(interior),
        tol=tol,
    )


# -- Lagrangian and residuals -------------------------------------------------

@dataclass(frozen=True)
class Multipliers:
    """One multiplier vector per block, each expected inside its cone."""

    mu: tuple  # of flat arrays

    def __post_init__(self):
        object.__setattr__(
            self, "mu", tuple(np.asarray(m, dtype=float) for m in self.mu)
        )

    @staticmethod
    def zeros(p: ProblemSpec) -> "Multipliers":
        return Multipliers(tuple(np.zeros(m) for m in p.dims))

    def min_eigenvalue(self) -> float:
        return min(eigenvalues_arr(m)[0] for m in self.mu)

    def max_norm(self) -> float:
        return max(float(np.linalg.norm(m)) for m in self.mu)


@dataclass(frozen=True)
class KktResidual:
    stationarity: float
    feasibility: float
    complementarity: float

    def max(self) -> float:
        return max(self.stationarity, self.feasibility, self.complementarity)

    def within(self, tol: float) -> bool:
        return self.max() <= tol


def lagrangian_grad(
    p: ProblemSpec, x, mu: Multipliers, bundle: EvalBundle | None = None
) -> np.ndarray:
    """grad f(x) - sum_j Dg_j(x)^T mu_j."""
    if bundle is None:
        bundle = evaluate(p, x)
    if len(mu.mu) != p.q:
        raise DimensionMismatch(f"{len(mu.mu)} multiplier blocks for {p.q} constraints")
    out = bundle.grad_f.copy()
    for j in range(p.q):
        if mu.mu[j].shape != (p.dims[j],):
            raise DimensionMismatch(
                f"multiplier block {j} has shape {mu.mu[j].shape}, expected ({p.dims[j]},)"
            )
        out -= bundle.jac[j].T @ mu.mu[j]
    return out


def kkt_residual(
    p: ProblemSpec, x, mu: Multipliers, bundle: EvalBundle | None = None
) -> KktResidual:
    if bundle is None:
        bundle = evaluate(p, x)
    stat = float(np.linalg.norm(lagrangian_grad(p, x, mu, bundle)))
    feas = max(float(np.linalg.norm(project_arr(-bundle.g[j]))) for j in range(p.q))
    compl = max(abs(float(mu.mu[j] @ bundle.g[j])) for j in range(p.q))
    return KktResidual(stationarity=stat, feasibility=feas, complementarity=compl)


# -- iterate logs and the AKKT audit ------------------------------------------

@dataclass
class IterateLog:
    """One outer solver iteration: the iterate, its multiplier estimate,
    the feasibility perturbations, residuals and penalty parameter."""

    k: int
    x: np.ndarray
    mu: Multipliers
    delta: tuple | None  # per-block perturbation arrays
    residuals: KktResidual
    rho: float
    inner_iterations: int = 0

    def delta_norm(self) -> float:
        if self.delta is None:
            raise MissingPerturbations(f"iterate {self.k} has no perturbations")
        return max(float(np.linalg.norm(d)) for d in self.delta)

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "x": [float(v) for v in self.x],
            "mu": [[float(v) for v in m] for m in self.mu.mu],
            "delta": None
            if self.delta is None
            else [[float(v) for v in d] for d in self.delta],
            "residuals": {
                "stationarity": self.residuals.stationarity,
                "feasibility": self.residuals.feasibility,
                "complementarity": self.residuals.complementarity,
            },
            "rho": self.rho,
            "inner_iterations": self.inner_iterations,
        }


@dataclass
class AkktReport:
    ok: bool
    stationarity_last: float
    worst_cone_violation: float
    worst_complementarity: float
    delta_norms: list = field(default_factory=list)
    delta_decreasing: bool = False
    mu_norms: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def akkt_check(p: ProblemSpec, iterates, eps: float) -> AkktReport:
    """Audit a solver log against the approximate-KKT conditions.

    True iff the last iterate's stationarity residual is within ``eps``
    and, at every recorded iterate, the perturbed values ``g_j + delta_j``
    stay in the cone and stay orthogonal to the multipliers, both to
    ``eps``.  The trend of the perturbation norms is reported alongside:
    "decreasing" here means last <= first and last <= eps, a finite proxy
    for perturbations that vanish in the limit.
    """
    iterates = list(iterates)
    if len(iterates) < 2:
        raise ModelError("need at least 2 iterates to audit a run")
    worst_cone = 0.0
    worst_compl = 0.0
    delta_norms = []
    mu_norms = []
    for it in iterates:
        if it.delta is None:
            raise MissingPerturbations(f"iterate {it.k} has no perturbations")
        bundle = evaluate(p, it.x)
        for j in range(p.q):
            shifted = bundle.g[j] + it.delta[j]
            lam1, _ = eigenvalues_arr(shifted)
            worst_cone = max(worst_cone, -lam1)
            worst_compl = max(worst_compl, abs(float(shifted @ it.mu.mu[j])))
        delta_norms.append(it.delta_norm())
        mu_norms.append(it.mu.max_norm())
    stat_last = iterates[-1].residuals.stationarity
    ok = stat_last <= eps and worst_cone <= eps and worst_compl <= eps
    decreasing = delta_norms[-1] <= delta_norms[0] and delta_norms[-1] <= eps
    return AkktReport(
        ok=ok,
        stationarity_last=stat_last,
        worst_cone_violation=worst_cone,
        worst_complementarity=worst_compl,
        delta_norms=delta_norms,
        delta_decreasing=decreasing,
        mu_norms=mu_norms,
    )
