"""Constraint-qualification analyzers and falsifiers.

Eight conditions are checked at a feasible point, from the classical
pair (nondegeneracy, Robinson) to their sequential weakenings
(weak-nondegeneracy, weak-Robinson) and the constant-rank family
(weak-CRCQ, weak-CPLD, seq-CRCQ, seq-CPLD).  Nondegeneracy reduces to a
single exact rank computation.  Everything else quantifies over a
continuum -- eigenvector limits along sequences, subsets of a derivative
family, perturbations of both the point and the slice axis -- so those
checks are organized as falsifiers: a VIOLATED verdict carries a hard
numeric witness, a HOLDS verdict is certified only by the search effort
behind it, and near-threshold margins come back UNDECIDED instead of
being rounded to an answer.

The search skeleton follows the structure of the conditions themselves:
directional probe sequences ``x + t_k d`` with ``t_k = 2^-k``, canonical
eigenvector limits extrapolated from the tail of the sequence where the
hat-part of a constraint does not vanish, and a grid of unit slice axes
wherever a limit is free to be chosen.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from itertools import combinations

import numpy as np

from . import model as md
from . import rank as rk
from .cone import project_arr
from .expr import DomainError

CQ_NAMES = (
    "ndg",
    "weak-ndg",
    "robinson",
    "weak-robinson",
    "weak-crcq",
    "weak-cpld",
    "seq-crcq",
    "seq-cpld",
)

# Solid implication arrows of the condition hierarchy, as (stronger,
# weaker) pairs: whenever the first HOLDS the second must not be VIOLATED.
HIERARCHY_EDGES = (
    ("ndg", "robinson"),
    ("ndg", "weak-ndg"),
    ("ndg", "seq-crcq"),
    ("weak-ndg", "weak-robinson"),
    ("weak-ndg", "weak-crcq"),
    ("robinson", "seq-cpld"),
    ("seq-crcq", "seq-cpld"),
    ("seq-crcq", "weak-crcq"),
    ("seq-cpld", "weak-cpld"),
    ("weak-robinson", "weak-cpld"),
    ("weak-crcq", "weak-cpld"),
)


class CqError(ValueError):
    pass


class ZeroHatOnBoundary(CqError):
    """A boundary-subset vector was requested where the hat-part vanishes."""


class SubsetCapExceeded(CqError):
    pass


class CqStatus(str, Enum):
    HOLDS = "HOLDS"
    VIOLATED = "VIOLATED"
    UNDECIDED = "UNDECIDED"


@dataclass
class CqVerdict:
    status: CqStatus
    witness: dict | None = None
    certificate: dict | None = None

    def __post_init__(self):
        if self.status == CqStatus.VIOLATED and self.witness is None:
            raise CqError("VIOLATED verdicts must carry a witness")
        if self.status == CqStatus.HOLDS and self.certificate is None:
            raise CqError("HOLDS verdicts must carry a certificate")

    def holds(self) -> bool:
        return self.status == CqStatus.HOLDS

    def to_json_dict(self) -> dict:
        return {
            "status": self.status.value,
            "witness": self.witness,
            "certificate": self.certificate,
        }


@dataclass(frozen=True)
class SubsetSelection:
    """Subsets (J_B, J_-, J_+) indexing the derivative family."""

    JB: frozenset
    Jminus: frozenset
    Jplus: frozenset

    def is_empty(self) -> bool:
        return not (self.JB or self.Jminus or self.Jplus)

    def to_json_dict(self) -> dict:
        return {
            "JB": sorted(self.JB),
            "Jminus": sorted(self.Jminus),
            "Jplus": sorted(self.Jplus),
        }


@dataclass
class SliceChoice:
    """One unit axis per origin-active block."""

    wbar: dict  # j -> unit ndarray

    def to_json_dict(self) -> dict:
        return {str(j): [float(v) for v in w] for j, w in sorted(self.wbar.items())}


@dataclass
class SearchBudget:
    """Knobs of the falsification searches; fixed seed, fixed verdicts."""

    seed: int = 0
    directions: int = 16          # grid directions for probe sequences
    random_directions: int = 8
    k_max: int = 20               # probe steps t_k = 2^-k for k = 1..k_max
    tail: int = 10                # "large k" proxy: the last `tail` steps
    slice_points: int = 16        # grid points per unit axis sphere
    random_slices: int = 4
    free_combo_cap: int = 128     # cap on joint grid choices for free axes
    assignment_cap: int = 256     # cap on joint slice-axis assignments
    random_probe_pairs: int = 8   # joint (point, axis) perturbation probes
    subset_cap: int = 12
    rank_rtol: float = rk.RANK_RTOL
    classify_tol: float = md.DEFAULT_CLASSIFY_TOL
    pg_starts: int = 16
    pg_steps: int = 300

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def _dedupe_units(points, tol=1e-9):
    out = []
    for p in points:
        if not any(np.linalg.norm(p - q) <= tol for q in out):
            out.append(p)
    return out


def _unit_directions(n: int, budget: SearchBudget, rng) -> list:
    if n == 1:
        return [np.array([1.0]), np.array([-1.0])]
    pts = rk._unit_sphere_grid(n, budget.directions, None)
    for _ in range(budget.random_directions):
        v = rng.standard_normal(n)
        nv = np.linalg.norm(v)
        if nv > 1e-12:
            pts.append(v / nv)
    return _dedupe_units(pts)


def _slice_grid(dim: int, budget: SearchBudget, rng) -> list:
    pts = rk._unit_sphere_grid(dim, budget.slice_points, None)
    for _ in range(budget.random_slices):
        v = rng.standard_normal(dim)
        nv = np.linalg.norm(v)
        if nv > 1e-12:
            pts.append(v / nv)
    return _dedupe_units(pts)


def _powerset(items):
    items = sorted(items)
    for r in range(len(items) + 1):
        yield from combinations(items, r)


def subset_selections(IB, I0, cap: int = 12):
    """Every (J_B, J_-, J_+) selection except the empty one."""
    if len(IB) + len(I0) > cap:
        raise SubsetCapExceeded(
            f"|IB| + |I0| = {len(IB) + len(I0)} exceeds the enumeration cap {cap}"
        )
    out = []
    for jb in _powerset(IB):
        for jm in _powerset(I0):
            for jp in _powerset(I0):
                sel = SubsetSelection(frozenset(jb), frozenset(jm), frozenset(jp))
                if not sel.is_empty():
                    out.append(sel)
    return out


# -- the derivative family -----------------------------------------------------

ZERO_HAT_TOL = 1e-12


def _block_vectors(bundle: md.EvalBundle, j: int, w=None):
    """(vec_B, vec_minus, vec_plus) for block j; any may be unused."""
    jac_t = bundle.jac[j].T
    hat = bundle.g[j][1:]
    nh = float(np.linalg.norm(hat))
    vec_b = None
    if nh > ZERO_HAT_TOL:
        u1 = np.concatenate(([0.5], -0.5 * hat / nh))
        vec_b = jac_t @ u1
    if w is None:
        return vec_b, None, None
    e_minus = np.concatenate(([1.0], -w))
    e_plus = np.concatenate(([1.0], w))
    return vec_b, jac_t @ e_minus, jac_t @ e_plus


def build_family_D(
    p: md.ProblemSpec,
    x,
    sel: SubsetSelection,
    w: dict,
    bundle: md.EvalBundle | None = None,
) -> rk.VectorFamily:
    """The labeled family selected by (J_B, J_-, J_+) at ``x``.

    ``w`` maps every index of ``Jminus | Jplus`` to a unit axis.  Blocks
    in ``JB`` use the canonical tight eigenvector of ``g_j(x)`` and
    require a nonvanishing hat-part.
    """
    if bundle is None:
        bundle = md.evaluate(p, x)
    vectors = []
    labels = []
    for j in sorted(sel.JB):
        vec_b, _, _ = _block_vectors(bundle, j)
        if vec_b is None:
            raise ZeroHatOnBoundary(f"block {j} has a vanishing hat-part at x")
        vectors.append(vec_b)
        labels.append((j, "B"))
    for j in sorted(sel.Jminus):
        _, vm, _ = _block_vectors(bundle, j, np.asarray(w[j], dtype=float))
        vectors.append(vm)
        labels.append((j, "minus"))
    for j in sorted(sel.Jplus):
        _, _, vp = _block_vectors(bundle, j, np.asarray(w[j], dtype=float))
        vectors.append(vp)
        labels.append((j, "plus"))
    return rk.VectorFamily(tuple(vectors), tuple(labels))


# -- exact checks ---------------------------------------------------------------

def check_nondegeneracy(
    p: md.ProblemSpec, x, tol: float = md.DEFAULT_CLASSIFY_TOL
) -> CqVerdict:
    """Exact rank test of the full derivative family.

    Boundary blocks contribute the single reflected-gradient vector,
    origin blocks contribute all component gradients; the condition
    holds iff the stacked family has full column rank.
    """
    bundle = md.evaluate(p, x)
    idx = md.classify_indices(p, x, tol, bundle)
    vectors = []
    labels = []
    for j in sorted(idx.boundary):
        gam = bundle.g[j].copy()
        gam[1:] = -gam[1:]
        vectors.append(bundle.jac[j].T @ gam)
        labels.append((j, "B"))
    for j in sorted(idx.origin):
        for i in range(p.dims[j]):
            vectors.append(bundle.jac[j][i, :].copy())
            labels.append((j, f"grad{i}"))
    needed = len(idx.boundary) + sum(p.dims[j] for j in idx.origin)
    got = rk.numeric_rank(vectors) if vectors else 0
    if got == needed:
        return CqVerdict(
            CqStatus.HOLDS,
            certificate={
                "rank": got,
                "required": needed,
                "samples": 1,
                "degeneracy_measure": _rank_margin(vectors),
            },
        )
    kernel = _kernel_vector(vectors)
    return CqVerdict(
        CqStatus.VIOLATED,
        witness={
            "rank": got,
            "required": needed,
            "kernel_coefficients": kernel,
            "family": [list(map(float, v)) for v in vectors],
            "labels": [list(l) for l in labels],
        },
    )


def _rank_margin(vectors) -> float:
    if not vectors:
        return float("inf")
    mat = np.column_stack(vectors)
    sigma = np.linalg.svd(mat, compute_uv=False)
    if sigma[0] <= rk.ABS_ZERO:
        return 0.0
    k = min(mat.shape[1], sigma.size)
    return float(sigma[k - 1] / sigma[0])


def _kernel_vector(vectors):
    if not vectors:
        return []
    mat = np.column_stack(vectors)
    _, _, vt = np.linalg.svd(mat, full_matrices=True)
    return [float(v) for v in vt[-1, :]]


def check_robinson(
    p: md.ProblemSpec,
    x,
    tol: float = md.DEFAULT_CLASSIFY_TOL,
    budget: SearchBudget | None = None,
) -> CqVerdict:
    """Conic linear independence of the derivative family over the
    product of halflines (boundary blocks) and Lorentz cones (origin
    blocks), decided by the kernel search in :mod:`nsocp.rank`."""
    budget = budget or SearchBudget()
    bundle = md.evaluate(p, x)
    idx = md.classify_indices(p, x, tol, bundle)
    blocks = []
    kinds = []
    owners = []
    for j in sorted(idx.boundary):
        gam = bundle.g[j].copy()
        gam[1:] = -gam[1:]
        blocks.append((bundle.jac[j].T @ gam).reshape(-1, 1))
        kinds.append(rk.ConeBlock("halfline", 1))
        owners.append(j)
    for j in sorted(idx.origin):
        blocks.append(bundle.jac[j].T.copy())
        kinds.append(rk.ConeBlock("lorentz", p.dims[j]))
        owners.append(j)
    result = rk.conic_li_certificate(
        blocks,
        kinds,
        tol=budget.rank_rtol,
        slice_points=budget.slice_points,
        pg_starts=budget.pg_starts,
        pg_steps=budget.pg_steps,
        seed=budget.seed,
    )
    if result.status == "LI":
        return CqVerdict(
            CqStatus.HOLDS,
            certificate={
                "degeneracy_measure": result.residual,
                "samples": result.samples,
                "note": "search-certified: smallest normalized kernel residual found",
            },
        )
    if result.status == "DEPENDENT":
        return CqVerdict(
            CqStatus.VIOLATED,
            witness={
                "kernel_vector": {
                    str(owners[i]): [float(v) for v in part]
                    for i, part in enumerate(result.witness)
                },
                "residual": result.residual,
            },
        )
    return CqVerdict(CqStatus.UNDECIDED)


# -- probe sequences and eigenvector limits -------------------------------------

@dataclass
class _BlockLimit:
    free: bool
    clusters: list         # candidate limit axes (unit vectors)
    w_tail: dict           # k -> forced axis at x + t_k d (None when free)
    converged: bool = True


def _tail_ks(budget: SearchBudget):
    return list(range(budget.k_max - budget.tail + 1, budget.k_max + 1))


def _probe_bundles(p: md.ProblemSpec, x, d, budget: SearchBudget):
    out = {}
    for k in _tail_ks(budget):
        t = 2.0 ** (-k)
        out[k] = md.evaluate(p, x + t * d)
    return out


def _sequence_limits(p, bundles, I0, budget: SearchBudget):
    """Per-block admissible eigenvector limits along one probe sequence."""
    ks = sorted(bundles)
    limits = {}
    for j in sorted(I0):
        hats = {k: bundles[k].g[j][1:] for k in ks}
        norms = {k: float(np.linalg.norm(hats[k])) for k in ks}
        nonzero_ks = [k for k in ks if norms[k] > 0.0]
        free = len(nonzero_ks) < len(ks)  # a vanishing hat-part frees the axis
        w_tail = {}
        for k in ks:
            w_tail[k] = hats[k] / norms[k] if norms[k] > 0.0 else None
        clusters = []
        converged = True
        if nonzero_ks:
            # group tail axes, then extrapolate each group to t -> 0
            groups = []
            for k in nonzero_ks:
                w = w_tail[k]
                placed = False
                for grp in groups:
                    if np.linalg.norm(w - w_tail[grp[-1]]) <= 1e-3:
                        grp.append(k)
                        placed = True
                        break
                if not placed:
                    groups.append([k])
            for grp in groups:
                if len(grp) >= 2:
                    k1, k0 = grp[-1], grp[-2]
                    # first-order Richardson: w(t) = wbar + c t + O(t^2)
                    west = 2.0 * w_tail[k1] - w_tail[k0]
                else:
                    west = w_tail[grp[-1]]
                nn = np.linalg.norm(west)
                if nn <= 1e-12:
                    converged = False
                    west = w_tail[grp[-1]]
                    nn = np.linalg.norm(west)
                west = west / nn
                if np.linalg.norm(west - w_tail[grp[-1]]) > 0.1:
                    converged = False
                clusters.append(west)
            clusters = _dedupe_units(clusters, tol=1e-6)
        limits[j] = _BlockLimit(
            free=free, clusters=clusters, w_tail=w_tail, converged=converged
        )
    return limits


def _assignments(options, I0, cap, rng):
    """Cartesian product of per-block axis options, capped by sampling."""
    blocks = sorted(I0)
    combos = [{}]
    for j in blocks:
        new = []
        for combo in combos:
            for kind, w in options[j]:
                ext = dict(combo)
                ext[j] = (kind, w)
                new.append(ext)
        combos = new
        if len(combos) > cap:
            picked = rng.choice(len(combos), size=cap, replace=False)
            combos = [combos[i] for i in sorted(picked)]
    return combos


# -- the weak falsifiers ---------------------------------------------------------

def _family_margin(vectors, positive: bool, rtol: float):
    """Tri-state (in)dependence of a family: plain rank or positive."""
    if positive:
        status, margin, cert = rk.pld_margin(vectors, rtol)
        return status, margin
    status, margin = rk.dependence_margin(vectors, rtol)
    return status, margin


def falsify_weak_cq(
    p: md.ProblemSpec,
    x,
    variant: str,
    budget: SearchBudget | None = None,
) -> CqVerdict:
    """Search for a probe sequence along which every admissible
    eigenvector limit leaves the full derivative family (positively,
    for the Robinson variant) linearly dependent."""
    if variant not in ("weak-ndg", "weak-robinson"):
        raise CqError(f"unknown weak variant {variant!r}")
    positive = variant == "weak-robinson"
    budget = budget or SearchBudget()
    rng = budget.rng()
    x = np.asarray(x, dtype=float)
    bundle0 = md.evaluate(p, x)
    idx = md.classify_indices(p, x, budget.classify_tol, bundle0)
    I0, IB = idx.origin, idx.boundary

    if not I0:
        # no axis freedom anywhere: the condition degenerates to the
        # fixed family of boundary vectors
        sel = SubsetSelection(frozenset(IB), frozenset(), frozenset())
        fam = build_family_D(p, x, sel, {}, bundle0)
        status, margin = _family_margin(fam.vectors, positive, budget.rank_rtol)
        if status == "independent" or len(fam) == 0:
            return CqVerdict(
                CqStatus.HOLDS,
                certificate={"degeneracy_measure": margin, "samples": 1},
            )
        if status == "dependent":
            return CqVerdict(
                CqStatus.VIOLATED,
                witness={
                    "direction": None,
                    "slice": {},
                    "note": "boundary family already dependent at the point",
                    "margin": margin,
                },
            )
        return CqVerdict(CqStatus.UNDECIDED)

    directions = _unit_directions(p.n, budget, rng)
    worst_margin = np.inf
    samples = 0
    saw_gray = False
    for d in directions:
        try:
            bundles = _probe_bundles(p, x, d, budget)
        except DomainError:
            saw_gray = True  # sequence leaves the expression domain
            continue
        limits = _sequence_limits(p, bundles, I0, budget)
        for j in I0:
            if not limits[j].clusters and not limits[j].free:
                limits[j].free = True  # defensive: no usable tail info
        options = _axis_options_with_dims(p, limits, I0, budget, rng)
        combos = _assignments(options, I0, budget.free_combo_cap, rng)
        passed = False
        gray_here = False
        fail_example = None
        for combo in combos:
            w_assign = {j: combo[j][1] for j in combo}
            fam = _setndg_family(p, x, IB, I0, w_assign, bundle0)
            status, margin = _family_margin(fam.vectors, positive, budget.rank_rtol)
            samples += 1
            worst_margin = min(worst_margin, margin)
            if status == "independent":
                passed = True
                break
            if status == "gray":
                gray_here = True
            else:
                fail_example = (w_assign, margin)
        if passed:
            continue
        if gray_here or not combos:
            saw_gray = True
            continue
        # every admissible limit fails: a hard witness
        w_assign, margin = fail_example
        return CqVerdict(
            CqStatus.VIOLATED,
            witness={
                "direction": [float(v) for v in d],
                "steps": {"schedule": "t_k = 2^-k", "k_range": _tail_ks(budget)},
                "slice": SliceChoice(w_assign).to_json_dict(),
                "margin": margin,
                "admissible_choices_examined": len(combos),
            },
        )
    if saw_gray:
        return CqVerdict(CqStatus.UNDECIDED)
    return CqVerdict(
        CqStatus.HOLDS,
        certificate={
            "degeneracy_measure": float(worst_margin),
            "samples": samples,
            "note": "search-certified over directional probe sequences",
        },
    )


def _axis_options_with_dims(p, limits, I0, budget, rng):
    options = {}
    for j in sorted(I0):
        lim = limits[j]
        opts = [("forced", w) for w in lim.clusters]
        if lim.free:
            dim = p.dims[j] - 1
            opts.extend(("free", w) for w in _slice_grid(dim, budget, rng))
        options[j] = opts
    return options


def _setndg_family(p, x, IB, I0, w_assign, bundle):
    sel = SubsetSelection(frozenset(IB), frozenset(I0), frozenset(I0))
    return build_family_D(p, x, sel, w_assign, bundle)


# -- the constant-rank falsifiers -------------------------------------------------

def falsify_constant_rank(
    p: md.ProblemSpec,
    x,
    variant: str,
    budget: SearchBudget | None = None,
) -> CqVerdict:
    """Falsify one of the constant-rank conditions at ``x``.

    Weak variants probe directional sequences: a witness is a subset of
    the derivative family that is dependent at the limit for every
    admissible eigenvector choice, yet independent along the whole tail
    of the sequence.  Sequential variants use the neighborhood reading:
    the subset must stay dependent for all nearby points and nearby unit
    axes, so a single escaping perturbation direction of (x, w) is a
    witness.
    """
    if variant in ("weak-crcq", "weak-cpld"):
        return _falsify_weak_rank(p, x, variant == "weak-cpld", budget)
    if variant in ("seq-crcq", "seq-cpld"):
        return _falsify_seq_rank(p, x, variant == "seq-cpld", budget)
    raise CqError(f"unknown constant-rank variant {variant!r}")


def _block_vector_cache(bundle, IB, I0, w_assign):
    """Per-block family vectors at one point under one axis assignment."""
    cache = {}
    for j in sorted(IB):
        vec_b, _, _ = _block_vectors(bundle, j)
        cache[(j, "B")] = vec_b
    for j in sorted(I0):
        w = w_assign[j]
        _, vm, vp = _block_vectors(bundle, j, w)
        cache[(j, "minus")] = vm
        cache[(j, "plus")] = vp
    return cache


def _select(cache, sel: SubsetSelection):
    vecs = []
    ok = True
    for j in sorted(sel.JB):
        v = cache.get((j, "B"))
        if v is None:
            ok = False
            break
        vecs.append(v)
    if not ok:
        return None
    vecs.extend(cache[(j, "minus")] for j in sorted(sel.Jminus))
    vecs.extend(cache[(j, "plus")] for j in sorted(sel.Jplus))
    return vecs


def _falsify_weak_rank(p, x, positive, budget):
    budget = budget or SearchBudget()
    rng = budget.rng()
    x = np.asarray(x, dtype=float)
    bundle0 = md.evaluate(p, x)
    idx = md.classify_indices(p, x, budget.classify_tol, bundle0)
    I0, IB = idx.origin, idx.boundary
    selections = subset_selections(IB, I0, budget.subset_cap)

    directions = _unit_directions(p.n, budget, rng)
    samples = 0
    saw_gray = False
    worst_margin = np.inf
    for d in directions:
        try:
            bundles = _probe_bundles(p, x, d, budget)
        except DomainError:
            saw_gray = True
            continue
        limits = _sequence_limits(p, bundles, I0, budget)
        options = _axis_options_with_dims(p, limits, I0, budget, rng)
        combos = _assignments(options, I0, budget.free_combo_cap, rng)
        if not combos:
            combos = [{}]
        passed = False
        gray_here = False
        fail_witness = None
        for combo in combos:
            w_assign = {j: combo[j][1] for j in combo}
            cache0 = _block_vector_cache(bundle0, IB, I0, w_assign)
            # quick exit: a fully independent family has no dependent subsets
            full = _select(cache0, SubsetSelection(frozenset(IB), frozenset(I0), frozenset(I0)))
            if full is not None and len(full) > 0:
                st_full, _ = rk.dependence_margin(full, budget.rank_rtol)
                if st_full == "independent":
                    passed = True
                    break
            elif not full:
                passed = True
                break
            # tail caches use the forced axis where it exists, else the
            # chosen limit axis held constant
            tail_caches = {}
            for k, bnd in bundles.items():
                w_k = {}
                for j in I0:
                    forced = limits[j].w_tail[k]
                    w_k[j] = forced if forced is not None else w_assign[j]
                tail_caches[k] = _block_vector_cache(bnd, IB, I0, w_k)
            combo_ok = True
            combo_gray = False
            for sel in selections:
                vecs0 = _select(cache0, sel)
                if vecs0 is None:
                    continue
                trig_status, trig_margin = _family_margin(
                    vecs0, positive, budget.rank_rtol
                )
                samples += 1
                worst_margin = min(worst_margin, trig_margin)
                if trig_status == "independent":
                    continue
                if trig_status == "gray":
                    combo_gray = True
                    continue
                verdicts = []
                for k in sorted(tail_caches):
                    vecs_k = _select(tail_caches[k], sel)
                    if vecs_k is None:
                        verdicts.append("gray")
                        continue
                    st, _ = rk.dependence_margin(vecs_k, budget.rank_rtol)
                    verdicts.append(st)
                if all(v == "independent" for v in verdicts):
                    combo_ok = False
                    fail_witness = (sel, w_assign, trig_margin)
                    break
                if any(v == "gray" for v in verdicts):
                    combo_gray = True
            if combo_ok and not combo_gray:
                passed = True
                break
            if combo_gray and combo_ok:
                gray_here = True
        if passed:
            continue
        if fail_witness is not None and not gray_here:
            sel, w_assign, margin = fail_witness
            return CqVerdict(
                CqStatus.VIOLATED,
                witness={
                    "direction": [float(v) for v in d],
                    "steps": {"schedule": "t_k = 2^-k", "k_range": _tail_ks(budget)},
                    "slice": SliceChoice(w_assign).to_json_dict(),
                    "subsets": sel.to_json_dict(),
                    "limit_margin": margin,
                    "note": "family dependent at the limit, independent along the tail",
                },
            )
        saw_gray = True
    if saw_gray:
        return CqVerdict(CqStatus.UNDECIDED)
    return CqVerdict(
        CqStatus.HOLDS,
        certificate={
            "degeneracy_measure": float(worst_margin),
            "samples": samples,
            "note": "search-certified over directional probe sequences",
        },
    )


def _tangent_dirs(w, budget, rng, count=4):
    """A few unit tangent directions at w on its sphere (empty for S^0)."""
    dim = w.size
    if dim <= 1:
        return []
    dirs = []
    basis = np.eye(dim)
    for i in range(dim):
        t = basis[i] - (basis[i] @ w) * w
        nt = np.linalg.norm(t)
        if nt > 1e-9:
            dirs.append(t / nt)
            dirs.append(-t / nt)
    for _ in range(count):
        v = rng.standard_normal(dim)
        t = v - (v @ w) * w
        nt = np.linalg.norm(t)
        if nt > 1e-9:
            dirs.append(t / nt)
    return _dedupe_units(dirs)


def _falsify_seq_rank(p, x, positive, budget):
    budget = budget or SearchBudget()
    rng = budget.rng()
    x = np.asarray(x, dtype=float)
    bundle0 = md.evaluate(p, x)
    idx = md.classify_indices(p, x, budget.classify_tol, bundle0)
    I0, IB = idx.origin, idx.boundary
    selections = subset_selections(IB, I0, budget.subset_cap)

    # axis assignments over the slice grids of every origin block
    grids = {j: _slice_grid(p.dims[j] - 1, budget, rng) for j in sorted(I0)}
    assignments = [{}]
    for j in sorted(I0):
        new = []
        for a in assignments:
            for w in grids[j]:
                ext = dict(a)
                ext[j] = w
                new.append(ext)
        assignments = new
        if len(assignments) > budget.assignment_cap:
            picked = rng.choice(len(assignments), size=budget.assignment_cap, replace=False)
            assignments = [assignments[i] for i in sorted(picked)]

    # probe points x + t d are shared across assignments; cache their bundles
    point_dirs = [None] + _unit_directions(p.n, budget, rng)  # None = stay at x
    tail = _tail_ks(budget)
    bundle_cache = {}

    def bundles_for(di):
        if di not in bundle_cache:
            if point_dirs[di] is None:
                bundle_cache[di] = {k: bundle0 for k in tail}
            else:
                try:
                    bundle_cache[di] = _probe_bundles(p, x, point_dirs[di], budget)
                except DomainError:
                    bundle_cache[di] = None
        return bundle_cache[di]

    samples = 0
    saw_gray = False
    worst_margin = np.inf
    for w_assign in assignments:
        cache0 = _block_vector_cache(bundle0, IB, I0, w_assign)
        full = _select(cache0, SubsetSelection(frozenset(IB), frozenset(I0), frozenset(I0)))
        if full:
            st_full, _ = rk.dependence_margin(full, budget.rank_rtol)
            if st_full == "independent":
                continue
        for sel in selections:
            vecs0 = _select(cache0, sel)
            if vecs0 is None:
                continue
            trig_status, trig_margin = _family_margin(vecs0, positive, budget.rank_rtol)
            samples += 1
            worst_margin = min(worst_margin, trig_margin)
            if trig_status == "independent":
                continue
            if trig_status == "gray":
                saw_gray = True
                continue
            # probe shrinking perturbations of (x, w)
            probes = []
            for di in range(len(point_dirs)):
                probes.append((di, {}))
            relevant = sorted(sel.Jminus | sel.Jplus)
            for j in relevant:
                for eta in _tangent_dirs(w_assign[j], budget, rng):
                    probes.append((0, {j: eta}))
            for _ in range(budget.random_probe_pairs):
                di = int(rng.integers(0, len(point_dirs)))
                etas = {}
                for j in relevant:
                    ts = _tangent_dirs(w_assign[j], budget, rng, count=1)
                    if ts:
                        etas[j] = ts[int(rng.integers(0, len(ts)))]
                probes.append((di, etas))
            hit = None
            for di, etas in probes:
                if point_dirs[di] is None and not etas:
                    continue
                bundles = bundles_for(di)
                if bundles is None:
                    continue  # probe left the expression domain
                verdicts = []
                for k in tail:
                    t = 2.0 ** (-k)
                    w_k = {}
                    for j in I0:
                        w = w_assign[j]
                        if j in etas:
                            wv = w + t * etas[j]
                            w = wv / np.linalg.norm(wv)
                        w_k[j] = w
                    cache_k = _block_vector_cache(bundles[k], IB, I0, w_k)
                    vecs_k = _select(cache_k, sel)
                    if vecs_k is None:
                        verdicts.append("gray")
                        continue
                    st, _ = rk.dependence_margin(vecs_k, budget.rank_rtol)
                    verdicts.append(st)
                if all(v == "independent" for v in verdicts):
                    hit = (di, etas)
                    break
                if any(v == "gray" for v in verdicts):
                    saw_gray = True
            if hit is not None:
                di, etas = hit
                return CqVerdict(
                    CqStatus.VIOLATED,
                    witness={
                        "slice": SliceChoice(w_assign).to_json_dict(),
                        "subsets": sel.to_json_dict(),
                        "point_direction": None
                        if point_dirs[di] is None
                        else [float(v) for v in point_dirs[di]],
                        "axis_directions": {
                            str(j): [float(v) for v in e] for j, e in etas.items()
                        },
                        "steps": {"schedule": "t_k = 2^-k", "k_range": tail},
                        "limit_margin": trig_margin,
                        "note": "family dependent at the point, independent along "
                        "a shrinking perturbation of (x, w)",
                    },
                )
    if saw_gray:
        return CqVerdict(CqStatus.UNDECIDED)
    return CqVerdict(
        CqStatus.HOLDS,
        certificate={
            "degeneracy_measure": float(worst_margin),
            "samples": samples,
            "note": "search-certified over sampled neighborhoods of (x, w)",
        },
    )


# -- decomposition cross-check ----------------------------------------------------

@dataclass
class NdgCrosscheck:
    ndg: CqVerdict
    weak_ndg: CqVerdict
    hat_rows_full_rank: bool
    consistent: bool

    def to_json_dict(self) -> dict:
        return {
            "ndg": self.ndg.status.value,
            "weak_ndg": self.weak_ndg.status.value,
            "hat_rows_full_rank": self.hat_rows_full_rank,
            "consistent": self.consistent,
        }


def crosscheck_ndg_decomposition(
    p: md.ProblemSpec, x, budget: SearchBudget | None = None
) -> NdgCrosscheck:
    """Cross-check: nondegeneracy should equal weak-nondegeneracy plus
    full row rank of the stacked hat-part Jacobians of origin blocks.
    A disagreement flags a search failure, not new mathematics."""
    budget = budget or SearchBudget()
    bundle = md.evaluate(p, x)
    idx = md.classify_indices(p, x, budget.classify_tol, bundle)
    rows = []
    for j in sorted(idx.origin):
        rows.extend(bundle.jac[j][1:, :])
    full_rank = (not rows) or rk.numeric_rank(rows, budget.rank_rtol) == len(rows)
    ndg = check_nondegeneracy(p, x, budget.classify_tol)
    weak = falsify_weak_cq(p, x, "weak-ndg", budget)
    if weak.status == CqStatus.UNDECIDED:
        consistent = True  # nothing to contradict
    else:
        consistent = ndg.holds() == (weak.holds() and full_rank)
    return NdgCrosscheck(
        ndg=ndg, weak_ndg=weak, hat_rows_full_rank=full_rank, consistent=consistent
    )


# -- multiplier existence -----------------------------------------------------------

def kkt_multiplier_search(p: md.ProblemSpec, x, tol: float = md.DEFAULT_CLASSIFY_TOL,
                          iterations: int = 20000):
    """Best-possible stationarity residual over complementary multipliers.

    Complementarity pins the multiplier structure blockwise: zero on
    interior blocks, a nonnegative multiple of the reflected constraint
    value on boundary blocks, a free cone element on origin blocks.
    Minimizing the Lagrangian-gradient norm over that convex set is done
    by projected gradient; the result decides whether a multiplier
    exists at ``x`` (residual ~ 0) and exhibits it.
    """
    x = np.asarray(x, dtype=float)
    bundle = md.evaluate(p, x)
    idx = md.classify_indices(p, x, tol, bundle)
    columns = []
    kinds = []
    owners = []
    for j in sorted(idx.boundary):
        gam = bundle.g[j].copy()
        gam[1:] = -gam[1:]
        gam = gam / np.linalg.norm(gam)
        columns.append((bundle.jac[j].T @ gam).reshape(-1, 1))
        kinds.append(("halfline", j, gam))
    for j in sorted(idx.origin):
        columns.append(bundle.jac[j].T.copy())
        kinds.append(("lorentz", j, None))
    target = bundle.grad_f
    if not columns:
        mu = md.Multipliers.zeros(p)
        return float(np.linalg.norm(target)), mu
    mat = np.hstack(columns)
    lip = float(np.linalg.norm(mat, 2) ** 2)
    step = 0.9 / max(lip, 1e-12)
    z = np.zeros(mat.shape[1])

    def project_z(z):
        out = z.copy()
        pos = 0
        for kind, j, _ in kinds:
            if kind == "halfline":
                out[pos] = max(out[pos], 0.0)
                pos += 1
            else:
                dim = p.dims[j]
                out[pos : pos + dim] = project_arr(out[pos : pos + dim])
                pos += dim
        return out

    prev = np.inf
    for it in range(iterations):
        r = mat @ z - target
        grad = mat.T @ r
        z = project_z(z - step * grad)
        if it % 50 == 0:
            val = float(r @ r)
            if prev - val <= 1e-18 * max(1.0, val):
                break
            prev = val
    resid = float(np.linalg.norm(mat @ z - target))
    mus = [np.zeros(m) for m in p.dims]
    pos = 0
    for kind, j, gam in kinds:
        if kind == "halfline":
            mus[j] = z[pos] * gam
            pos += 1
        else:
            dim = p.dims[j]
            mus[j] = z[pos : pos + dim].copy()
            pos += dim
    return resid, md.Multipliers(tuple(mus))


# -- one-stop dispatch ----------------------------------------------------------------

def run_check(
    p: md.ProblemSpec, x, name: str, budget: SearchBudget | None = None
) -> CqVerdict:
    budget = budget or SearchBudget()
    if name == "ndg":
        return check_nondegeneracy(p, x, budget.classify_tol)
    if name == "robinson":
        return check_robinson(p, x, budget.classify_tol, budget)
    if name in ("weak-ndg", "weak-robinson"):
        return falsify_weak_cq(p, x, name, budget)
    if name in ("weak-crcq", "weak-cpld", "seq-crcq", "seq-cpld"):
        return falsify_constant_rank(p, x, name, budget)
    raise CqError(f"unknown constraint qualification {name!r}")


def check_all(
    p: md.ProblemSpec, x, which=None, budget: SearchBudget | None = None
) -> dict:
    names = list(which) if which else list(CQ_NAMES)
    for name in names:
        if name not in CQ_NAMES:
            raise CqError(f"unknown constraint qualification {name!r}")
    return {name: run_check(p, x, name, budget) for name in names}


def hierarchy_violations(verdicts: dict) -> list:
    """Solid-arrow implications contradicted by a verdict map (UNDECIDED
    verdicts are exempt)."""
    bad = []
    for strong, weak in HIERARCHY_EDGES:
        vs = verdicts.get(strong)
        vw = verdicts.get(weak)
        if vs is None or vw is None:
            continue
        if vs.status == CqStatus.HOLDS and vw.status == CqStatus.VIOLATED:
            bad.append((strong, weak))
    return bad
