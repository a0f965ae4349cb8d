"""First-order solution methods sharing one unconstrained inner engine.

Three methods, all emitting auditable iterate logs:

* external penalty: minimize ``f + (rho/2) sum ||P(-g_j)||^2`` with
  ``rho`` escalating on a fixed schedule, multipliers read off as
  ``rho * P(-g_j)``;
* augmented Lagrangian (Hestenes-Powell-Rockafellar): the shifted
  penalty ``f + (rho/2)[sum ||P(mu~_j/rho - g_j)||^2 - ||mu~_j/rho||^2]``
  with safeguarded multiplier carries and rho escalation only when the
  infeasibility-complementarity measure stalls;
* SQP: a convex direction-finding subproblem with identity curvature
  and linearized cone constraints (itself solved by the augmented
  Lagrangian), a merit function built from the worst cone violation,
  and a backtracking step rule.

Every outer iterate records the perturbation ``delta_j`` that places
``g_j + delta_j`` exactly in its cone and exactly orthogonal to the
multiplier estimate, so logs can be audited downstream without access
to solver internals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as ex
from . import model as md
from .cone import project_arr
from .model import IterateLog, KktResidual, Multipliers


class SolverError(RuntimeError):
    pass


class LineSearchStalled(SolverError):
    pass


class DivergingIterates(SolverError):
    pass


class SubproblemInfeasible(SolverError):
    pass


@dataclass
class SolverConfig:
    method: str = "auglag"
    rho0: float = 1.0
    rho_growth: float = 10.0
    max_outer: int = 50
    stationarity_tol: float = 1e-8
    feasibility_tol: float = 1e-8
    inner_max_iter: int = 50000
    mu_safeguard: float = 1e6
    diverge_norm: float = 1e8
    # SQP parameters
    alpha0: float = 1.0
    sigma: float = 0.1
    gamma1: float = 1e-3
    gamma2: float = 1e3
    tau: float = 1.0
    # audit mode: alternate printed forms of the SQP step-acceptance
    # inequality and the violation measure (see violation_phi/armijo_step)
    literal_rules: bool = False

    def inner_tol(self, k: int) -> float:
        return max(self.stationarity_tol, 0.1 ** k)

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "rho0": self.rho0,
            "rho_growth": self.rho_growth,
            "max_outer": self.max_outer,
            "stationarity_tol": self.stationarity_tol,
            "feasibility_tol": self.feasibility_tol,
            "inner_max_iter": self.inner_max_iter,
            "mu_safeguard": self.mu_safeguard,
            "alpha0": self.alpha0,
            "sigma": self.sigma,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "tau": self.tau,
            "literal_rules": self.literal_rules,
        }


# -- inner engine ---------------------------------------------------------------

@dataclass
class InnerResult:
    x: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    converged: bool
    stalled: bool = False
    max_norm: float = 0.0  # largest iterate norm seen (divergence telltale)


def inner_minimize(
    fun_grad, x0, tol: float, max_iter: int, stall_window: int = 500
) -> InnerResult:
    """Gradient descent with Barzilai-Borwein step seeding and Armijo
    backtracking (c = 1e-4, halving, at most 60 halvings per step).

    ``fun_grad(x)`` must return ``(value, gradient)`` of a C^1 function.
    Terminates when the gradient norm reaches ``tol``, the budget runs
    out, or no progress has been made for ``stall_window`` iterations
    (the float noise floor of stiff penalties); the best iterate seen,
    by gradient norm, is what comes back.
    """
    c_armijo = 1e-4
    x = np.asarray(x0, dtype=float).copy()
    f, g = fun_grad(x)
    best = (x.copy(), f, g.copy(), float(np.linalg.norm(g)))
    step = 1.0 / max(1.0, best[3])
    prev_x = None
    prev_g = None
    it = 0
    stalled = False
    since_best = 0
    f_ref = f
    max_norm = float(np.linalg.norm(x))
    while it < max_iter:
        max_norm = max(max_norm, float(np.linalg.norm(x)))
        if max_norm > 1e10:
            stalled = True
            break  # runaway iterates: let the caller diagnose divergence
        gnorm = float(np.linalg.norm(g))
        if gnorm < best[3]:
            best = (x.copy(), f, g.copy(), gnorm)
            since_best = 0
            f_ref = f
        if best[3] <= tol:
            return InnerResult(best[0], best[1], best[3], it, True, False, max_norm)
        if since_best > stall_window:
            if f < f_ref - 1e-10 * max(1.0, abs(f_ref)):
                # the value is still falling without gradient progress:
                # possibly an unbounded descent, so keep going
                f_ref = f
                since_best = 0
            else:
                stalled = True
                break
        if prev_x is not None:
            s = x - prev_x
            yv = g - prev_g
            sy = float(s @ yv)
            if sy > 1e-300:
                step = float(s @ s) / sy
            else:
                # negative curvature along the step: open the throttle and
                # let the backtracking line search right-size it
                step = max(2.0 * step, 1.0 / max(1.0, gnorm))
        step = min(max(step, 1e-13), 1e13)
        t = step
        accepted = False
        for _ in range(61):
            x_try = x - t * g
            if not np.any(x_try != x):
                break  # step below float resolution: nothing to accept
            f_try, g_try = fun_grad(x_try)
            if np.isfinite(f_try) and f_try <= f - c_armijo * t * gnorm * gnorm:
                x_new, f_new, g_new = x_try, f_try, g_try
                accepted = True
                break
            t *= 0.5
        it += 1
        since_best += 1
        if not accepted:
            stalled = True
            break
        prev_x, prev_g = x, g
        x, f, g = x_new, f_new, g_new
    gnorm = float(np.linalg.norm(g))
    if gnorm < best[3]:
        best = (x, f, g, gnorm)
    return InnerResult(
        best[0], best[1], best[3], it, best[3] <= tol, stalled, max_norm
    )


# -- shared bookkeeping -----------------------------------------------------------

def _check_divergence(x, cfg: SolverConfig, inner: InnerResult | None = None):
    if float(np.linalg.norm(x)) > cfg.diverge_norm:
        raise DivergingIterates(f"iterate norm exceeded {cfg.diverge_norm:g}")
    if inner is not None and inner.max_norm > cfg.diverge_norm:
        raise DivergingIterates(
            f"inner iterates wandered beyond {cfg.diverge_norm:g}; the "
            "subproblem looks unbounded"
        )


def _kkt_ok(res: KktResidual, cfg: SolverConfig) -> bool:
    return (
        res.stationarity <= cfg.stationarity_tol
        and res.feasibility <= cfg.feasibility_tol
        and res.complementarity <= cfg.feasibility_tol
    )


def multipliers_diverging(logs) -> bool:
    """Sustained multiplier growth to large norms: the numerical signature
    of residuals converging at a point that admits no multiplier."""
    if len(logs) < 4:
        return False
    norms = [log.mu.max_norm() for log in logs]
    return norms[-1] >= 100.0 and norms[-1] >= 4.0 * norms[-4]


def classify_outcome(logs, cfg: SolverConfig) -> str:
    if not logs:
        return "iteration-limit"
    if multipliers_diverging(logs):
        return "multiplier-divergence"
    if _kkt_ok(logs[-1].residuals, cfg):
        return "kkt"
    return "iteration-limit"


# -- external penalty --------------------------------------------------------------

def penalty_value_grad(p: md.ProblemSpec, x, rho: float):
    """Value and gradient of the penalized objective (C^1, not C^2)."""
    bundle = md.evaluate(p, x)
    val = bundle.f
    grad = bundle.grad_f.copy()
    for j in range(p.q):
        proj = project_arr(-bundle.g[j])
        val += 0.5 * rho * float(proj @ proj)
        grad -= rho * (bundle.jac[j].T @ proj)
    return val, grad


def penalty_solve(p: md.ProblemSpec, x0, cfg: SolverConfig | None = None):
    """External penalty method; returns the outer IterateLog list."""
    cfg = cfg or SolverConfig(method="penalty")
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (p.n,) or not np.all(np.isfinite(x)):
        raise SolverError("x0 must be a finite vector of length n")
    rho = cfg.rho0
    logs = []
    for k in range(cfg.max_outer):
        inner = inner_minimize(
            lambda z: penalty_value_grad(p, z, rho), x, cfg.inner_tol(k), cfg.inner_max_iter
        )
        x = inner.x
        _check_divergence(x, cfg, inner)
        bundle = md.evaluate(p, x)
        mu = Multipliers(tuple(rho * project_arr(-bundle.g[j]) for j in range(p.q)))
        delta = tuple(project_arr(bundle.g[j]) - bundle.g[j] for j in range(p.q))
        res = md.kkt_residual(p, x, mu, bundle)
        logs.append(
            IterateLog(
                k=k, x=x.copy(), mu=mu, delta=delta, residuals=res, rho=rho,
                inner_iterations=inner.iterations,
            )
        )
        if _kkt_ok(res, cfg):
            break
        if inner.stalled and res.feasibility <= cfg.feasibility_tol:
            break  # float floor reached; larger rho only degrades stationarity
        rho *= cfg.rho_growth
    return logs


# -- augmented Lagrangian ------------------------------------------------------------

def auglag_value_grad(p: md.ProblemSpec, x, rho: float, mu_tilde):
    """Value and gradient of the shifted penalty.

    The gradient is assembled through the shifted projection
    ``rho * P(mu~_j/rho - g_j)``, which by positive homogeneity equals
    the Lagrangian gradient at the updated multiplier -- the identity is
    asserted per iterate by the solver.
    """
    bundle = md.evaluate(p, x)
    val = bundle.f
    grad = bundle.grad_f.copy()
    for j in range(p.q):
        shift = mu_tilde[j] / rho
        proj = project_arr(shift - bundle.g[j])
        val += 0.5 * rho * (float(proj @ proj) - float(shift @ shift))
        grad -= bundle.jac[j].T @ (rho * proj)
    return val, grad


def _auglag_multiplier(bundle, rho, mu_tilde, j):
    return project_arr(mu_tilde[j] - rho * bundle.g[j])


def auglag_solve(p: md.ProblemSpec, x0, cfg: SolverConfig | None = None):
    """Safeguarded augmented Lagrangian; returns the outer IterateLog list."""
    cfg = cfg or SolverConfig(method="auglag")
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (p.n,) or not np.all(np.isfinite(x)):
        raise SolverError("x0 must be a finite vector of length n")
    rho = cfg.rho0
    mu_tilde = [np.zeros(m) for m in p.dims]
    logs = []
    prev_measure = np.inf
    for k in range(cfg.max_outer):
        inner = inner_minimize(
            lambda z: auglag_value_grad(p, z, rho, mu_tilde),
            x,
            cfg.inner_tol(k),
            cfg.inner_max_iter,
        )
        x = inner.x
        _check_divergence(x, cfg, inner)
        bundle = md.evaluate(p, x)
        mu_arrays = tuple(_auglag_multiplier(bundle, rho, mu_tilde, j) for j in range(p.q))
        mu = Multipliers(mu_arrays)
        # gradient identity: shifted-penalty gradient == Lagrangian gradient
        _, al_grad = auglag_value_grad(p, x, rho, mu_tilde)
        lag_grad = md.lagrangian_grad(p, x, mu, bundle)
        drift = float(np.linalg.norm(al_grad - lag_grad))
        scale = 1.0 + float(np.linalg.norm(lag_grad)) + mu.max_norm()
        if drift > 1e-10 * scale:
            raise SolverError(f"augmented-Lagrangian gradient identity broke: {drift:g}")
        delta = tuple((mu_arrays[j] - mu_tilde[j]) / rho for j in range(p.q))
        res = md.kkt_residual(p, x, mu, bundle)
        logs.append(
            IterateLog(
                k=k, x=x.copy(), mu=mu, delta=delta, residuals=res, rho=rho,
                inner_iterations=inner.iterations,
            )
        )
        if _kkt_ok(res, cfg):
            break
        if inner.stalled and res.feasibility <= cfg.feasibility_tol:
            break  # float floor reached
        measure = max(res.feasibility, res.complementarity)
        if measure > 0.5 * prev_measure:
            rho *= cfg.rho_growth
        prev_measure = measure
        mu_tilde = [
            project_arr(np.clip(m, -cfg.mu_safeguard, cfg.mu_safeguard))
            for m in mu_arrays
        ]
    return logs


# -- SQP ------------------------------------------------------------------------------

def violation_phi(p: md.ProblemSpec, x, alpha: float, literal: bool = False) -> float:
    """Merit function: objective plus ``alpha`` times the summed cone
    violations.

    The default measures violation of block j as ``[-lambda1]_+``, the
    distance-like negative part of the smallest eigenvalue, which is
    zero exactly on the cone.  The ``literal`` variant keeps the
    alternate form ``[-lambda2]_+`` for comparison runs; it vanishes on
    some infeasible points and is not used by default.
    """
    if alpha < 0:
        raise SolverError("alpha must be nonnegative")
    bundle = md.evaluate(p, x)
    total = 0.0
    for j in range(p.q):
        g0 = bundle.g[j][0]
        hat_norm = float(np.linalg.norm(bundle.g[j][1:]))
        if literal:
            total += max(0.0, -g0 - hat_norm)
        else:
            total += max(0.0, hat_norm - g0)
    return bundle.f + alpha * total


def armijo_step(phi, x, d, M, sigma: float, literal: bool = False) -> float:
    """Backtracking step for the SQP merit function.

    Accepts the first ``t`` in the halving schedule whose measured
    decrease ``phi(x) - phi(x + t d)`` is at least ``sigma t d'Md``
    (sufficient decrease).  The ``literal`` variant accepts on the
    reversed inequality instead; it is kept only for auditing and stalls
    on genuinely good descent directions.
    """
    d = np.asarray(d, dtype=float)
    quad = float(d @ (M @ d))
    if quad <= 0:
        raise SolverError("direction has nonpositive curvature against M")
    phi0 = phi(x)
    t = 1.0
    for _ in range(61):
        decrease = phi0 - phi(x + t * d)
        if literal:
            if decrease <= sigma * t * quad:
                return t
        else:
            if decrease >= sigma * t * quad:
                return t
        t *= 0.5
    raise LineSearchStalled("no acceptable step within 60 halvings")


def _linearized_qp(p: md.ProblemSpec, bundle: md.EvalBundle) -> md.ProblemSpec:
    """The direction-finding subproblem as a problem over d."""

    def affine(const, coeffs):
        node = ex.Num(float(const))
        for i, c in enumerate(coeffs):
            if c == 0.0:
                continue
            term = ex.BinOp("*", ex.Num(float(c)), ex.Var(i + 1))
            node = ex.BinOp("+", node, term)
        return node

    n = p.n
    obj = ex.Num(0.0)
    for i in range(n):
        gi = float(bundle.grad_f[i])
        if gi != 0.0:
            obj = ex.BinOp("+", obj, ex.BinOp("*", ex.Num(gi), ex.Var(i + 1)))
        quad = ex.BinOp("*", ex.Num(0.5), ex.BinOp("^", ex.Var(i + 1), ex.Num(2)))
        obj = ex.BinOp("+", obj, quad)
    blocks = []
    for j in range(p.q):
        comps = tuple(
            affine(bundle.g[j][i], bundle.jac[j][i, :]) for i in range(p.dims[j])
        )
        blocks.append(md.ConstraintBlock(p.dims[j], comps))
    return md.ProblemSpec(
        n=n, objective=obj, constraints=tuple(blocks), name="sqp-subproblem"
    )


def sqp_solve(p: md.ProblemSpec, x0, cfg: SolverConfig | None = None):
    """Line-search SQP with identity curvature; the convex subproblem is
    solved by the augmented Lagrangian.  Returns the outer IterateLog
    list; raises SubproblemInfeasible when the linearized constraints
    admit no feasible direction."""
    cfg = cfg or SolverConfig(method="sqp")
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (p.n,) or not np.all(np.isfinite(x)):
        raise SolverError("x0 must be a finite vector of length n")
    alpha = cfg.alpha0
    eye = np.eye(p.n)
    sub_cfg = SolverConfig(
        method="auglag",
        rho0=1.0,
        rho_growth=10.0,
        max_outer=30,
        stationarity_tol=min(1e-9, cfg.stationarity_tol),
        feasibility_tol=min(1e-9, cfg.feasibility_tol),
        inner_max_iter=cfg.inner_max_iter,
    )
    logs = []
    for k in range(cfg.max_outer):
        bundle = md.evaluate(p, x)
        qp = _linearized_qp(p, bundle)
        try:
            sub_logs = auglag_solve(qp, np.zeros(p.n), sub_cfg)
        except DivergingIterates as err:
            raise SubproblemInfeasible(
                f"direction subproblem diverged at outer iteration {k}"
            ) from err
        if not sub_logs or classify_outcome(sub_logs, sub_cfg) != "kkt":
            feas = sub_logs[-1].residuals.feasibility if sub_logs else np.inf
            if feas > np.sqrt(sub_cfg.feasibility_tol):
                raise SubproblemInfeasible(
                    f"linearized constraints appear infeasible at outer iteration {k} "
                    f"(best direction violates them by {feas:g})"
                )
        d = sub_logs[-1].x
        mu = sub_logs[-1].mu
        delta = tuple(bundle.jac[j] @ d for j in range(p.q))
        res = md.kkt_residual(p, x, mu, bundle)
        logs.append(
            IterateLog(
                k=k, x=x.copy(), mu=mu, delta=delta, residuals=res, rho=alpha,
                inner_iterations=sum(l.inner_iterations for l in sub_logs),
            )
        )
        dnorm = float(np.linalg.norm(d))
        if dnorm <= cfg.stationarity_tol:
            break
        mu_heads = max(abs(float(mu.mu[j][0])) for j in range(p.q))
        if alpha < mu_heads:
            alpha = max(alpha, mu_heads) + cfg.tau
        t = armijo_step(
            lambda z: violation_phi(p, z, alpha, cfg.literal_rules),
            x,
            d,
            eye,
            cfg.sigma,
            cfg.literal_rules,
        )
        x = x + t * d
        _check_divergence(x, cfg)
    return logs


SOLVERS = {
    "penalty": penalty_solve,
    "auglag": auglag_solve,
    "sqp": sqp_solve,
}


def solve(p: md.ProblemSpec, x0, cfg: SolverConfig | None = None):
    cfg = cfg or SolverConfig()
    if cfg.method not in SOLVERS:
        raise SolverError(f"unknown method {cfg.method!r}")
    return SOLVERS[cfg.method](p, x0, cfg)
