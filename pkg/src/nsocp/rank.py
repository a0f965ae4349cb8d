"""Tolerant linear-algebra predicates for small dense vector families.

Everything the constraint-qualification checks reduce to lives here:
numeric rank, positive linear (in)dependence decided by exact
simplex-constrained least squares, Caratheodory reduction of a linear
combination to an independent subfamily, and a search-based certificate
for conic linear independence over products of halflines and Lorentz
cones.  Families are tiny (a handful of vectors in R^n with small n), so
the algorithms favor exactness and determinism over asymptotics.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

RANK_RTOL = 1e-8        # singular values below RANK_RTOL * sigma_max do not count
ABS_ZERO = 1e-12        # a family whose largest singular value is below this is zero
GRAY_FACTOR = 10.0      # margins within this factor of the cutoff are inconclusive


@dataclass(frozen=True)
class VectorFamily:
    """An ordered family of same-length vectors with provenance labels.

    Labels are ``(block_index, kind)`` pairs with kind in
    ``{"B", "minus", "plus", "halfline", "lorentz"}``; they ride along so
    witnesses can report which constraint produced which vector.
    """

    vectors: tuple
    labels: tuple = ()

    def __post_init__(self):
        vecs = tuple(np.asarray(v, dtype=float) for v in self.vectors)
        object.__setattr__(self, "vectors", vecs)
        if vecs:
            width = vecs[0].size
            if any(v.size != width for v in vecs):
                raise ValueError("family vectors must share a common length")
        if self.labels and len(self.labels) != len(vecs):
            raise ValueError("labels must parallel vectors")

    def __len__(self):
        return len(self.vectors)

    def matrix(self) -> np.ndarray:
        """Vectors as columns, shape (n, p)."""
        return np.column_stack(self.vectors) if self.vectors else np.zeros((0, 0))


def _as_matrix(family) -> np.ndarray:
    if isinstance(family, VectorFamily):
        return family.matrix()
    vecs = [np.asarray(v, dtype=float) for v in family]
    return np.column_stack(vecs) if vecs else np.zeros((0, 0))


def numeric_rank(family, tol: float = RANK_RTOL) -> int:
    """Number of singular values above ``tol * sigma_max`` (0 for a
    numerically zero family)."""
    mat = _as_matrix(family)
    if mat.size == 0:
        return 0
    sigma = np.linalg.svd(mat, compute_uv=False)
    if sigma[0] <= ABS_ZERO:
        return 0
    return int(np.sum(sigma > tol * sigma[0]))


def dependence_margin(family, tol: float = RANK_RTOL):
    """Tri-state linear-dependence with a confidence margin.

    Returns ``(status, ratio)`` where status is "dependent",
    "independent" or "gray" and ratio is ``sigma_min / sigma_max``.
    The gray band is ``[tol, GRAY_FACTOR * tol)``: close enough to the
    cutoff that neither answer deserves trust.
    """
    mat = _as_matrix(family)
    p = mat.shape[1]
    if p == 0:
        return "independent", np.inf
    sigma = np.linalg.svd(mat, compute_uv=False)
    if sigma[0] <= ABS_ZERO:
        return "dependent", 0.0
    if p > mat.shape[0]:
        return "dependent", 0.0  # more vectors than the ambient dimension
    ratio = float(sigma[min(p, sigma.size) - 1] / sigma[0]) if sigma.size >= p else 0.0
    if ratio < tol:
        return "dependent", ratio
    if ratio < GRAY_FACTOR * tol:
        return "gray", ratio
    return "independent", ratio


# -- positive linear dependence ------------------------------------------------

@dataclass(frozen=True)
class PldCertificate:
    """Nonnegative coefficients summing to one that collapse the family."""

    coefficients: np.ndarray
    residual: float


def _simplex_min_norm(mat: np.ndarray):
    """Minimize ``||V a||`` over the unit simplex, exactly.

    Enumerates supports: some optimal point has a support of at most
    n + 1 vectors on which the equality-constrained system is
    nonsingular (larger supports always admit a norm-preserving
    reduction), so trying every support up to that size and keeping the
    nonnegative solutions is exhaustive.  Returns
    ``(coefficients, residual)``.
    """
    n, p = mat.shape
    best_a = None
    best_r = np.inf
    max_support = min(p, n + 1)
    count = sum(
        int(np.prod([(p - i) / (i + 1) for i in range(s)]))
        for s in range(1, max_support + 1)
    )
    if count > 200_000:
        # families here come from a handful of constraint blocks; this
        # cap only keeps pathological calls from exploding
        raise ValueError(
            f"simplex least squares over {p} vectors in R^{n} is too large"
        )
    for size in range(1, max_support + 1):
        for subset in combinations(range(p), size):
            sub = mat[:, subset]
            gram = 2.0 * (sub.T @ sub)
            kkt = np.zeros((size + 1, size + 1))
            kkt[:size, :size] = gram
            kkt[:size, size] = 1.0
            kkt[size, :size] = 1.0
            rhs = np.zeros(size + 1)
            rhs[size] = 1.0
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            a_sub = sol[:size]
            if np.min(a_sub) < -1e-11:
                continue
            a_sub = np.clip(a_sub, 0.0, None)
            total = a_sub.sum()
            if total <= 0:
                continue
            a_sub = a_sub / total
            r = float(np.linalg.norm(sub @ a_sub))
            if r < best_r:
                best_r = r
                a = np.zeros(p)
                a[list(subset)] = a_sub
                best_a = a
                if best_r == 0.0:
                    return best_a, best_r
    if best_a is None:  # defensive; singleton subsets always succeed
        best_a = np.zeros(p)
        best_a[0] = 1.0
        best_r = float(np.linalg.norm(mat[:, 0]))
    return best_a, best_r


def is_positively_linearly_dependent(family, tol: float = RANK_RTOL):
    """Certificate of positive linear dependence, or None.

    Dependent means some nonnegative, not-all-zero combination of the
    family vanishes; normalizing the coefficients to sum to one turns
    the question into minimizing ``||V a||`` over the simplex, which is
    solved exactly.  A certificate is returned iff the minimum is below
    ``tol * (1 + max_i ||v_i||)``.
    """
    mat = _as_matrix(family)
    if mat.shape[1] == 0:
        return None
    a, r = _simplex_min_norm(mat)
    scale = 1.0 + max(float(np.linalg.norm(mat[:, i])) for i in range(mat.shape[1]))
    if r <= tol * scale:
        return PldCertificate(coefficients=a, residual=r)
    return None


def pld_margin(family, tol: float = RANK_RTOL):
    """Tri-state positive-linear-dependence: ``(status, residual, cert)``."""
    mat = _as_matrix(family)
    if mat.shape[1] == 0:
        return "independent", np.inf, None
    a, r = _simplex_min_norm(mat)
    scale = 1.0 + max(float(np.linalg.norm(mat[:, i])) for i in range(mat.shape[1]))
    cutoff = tol * scale
    if r <= cutoff:
        return "dependent", r, PldCertificate(coefficients=a, residual=r)
    if r <= GRAY_FACTOR * cutoff:
        return "gray", r, None
    return "independent", r, None


# -- Caratheodory reduction ----------------------------------------------------

def caratheodory_reduce(vectors, alphas, tol: float = RANK_RTOL):
    """Rewrite ``sum_j alpha_j v_j`` over a linearly independent subfamily.

    Returns ``(indices, coefficients)`` such that the selected vectors
    are independent, the weighted sum is preserved, every kept
    coefficient has the sign of its original, and vectors entering with
    a zero coefficient are never selected.
    """
    vecs = [np.asarray(v, dtype=float) for v in vectors]
    alphas = [float(a) for a in alphas]
    if len(vecs) != len(alphas):
        raise ValueError("vectors and alphas must have equal length")
    idx = [j for j in range(len(vecs)) if alphas[j] != 0.0]
    coef = {j: alphas[j] for j in idx}
    while idx:
        mat = np.column_stack([vecs[j] for j in idx])
        if numeric_rank([vecs[j] for j in idx], tol) == len(idx):
            break
        # a null-space direction of the current subfamily
        _, _, vt = np.linalg.svd(mat, full_matrices=True)
        h = vt[-1, :]
        # step until the first coefficient crosses zero, in whichever
        # direction has a crossing
        ratios = [
            (coef[j] / h[pos], pos)
            for pos, j in enumerate(idx)
            if h[pos] != 0.0
        ]
        pos_ratios = [rp for rp in ratios if rp[0] > 0]
        neg_ratios = [rp for rp in ratios if rp[0] < 0]
        if pos_ratios and (
            not neg_ratios
            or min(r for r, _ in pos_ratios) <= -max(r for r, _ in neg_ratios)
        ):
            t = min(r for r, _ in pos_ratios)
        elif neg_ratios:
            t = max(r for r, _ in neg_ratios)
        else:
            # h is supported only on exactly-zero coefficients: impossible
            # since zero coefficients never enter idx; drop defensively
            t = 0.0
        crossing = {
            pos for r, pos in ratios if abs(r - t) <= 1e-9 * max(1.0, abs(t))
        }
        new_idx = []
        for pos, j in enumerate(idx):
            if pos in crossing:
                coef.pop(j)
                continue
            updated = coef[j] - t * h[pos]
            if updated == 0.0 or (alphas[j] > 0) != (updated > 0):
                # roundoff carried it to or past zero: it was a crossing
                coef.pop(j)
                continue
            coef[j] = updated
            new_idx.append(j)
        if len(new_idx) == len(idx):
            # degenerate step made no progress; force-drop the largest-|h| entry
            drop_pos = int(np.argmax(np.abs(h)))
            coef.pop(idx[drop_pos], None)
            new_idx = [j for pos, j in enumerate(idx) if pos != drop_pos]
        idx = new_idx
    return list(idx), [coef[j] for j in idx]


# -- conic linear independence -------------------------------------------------

@dataclass(frozen=True)
class ConeBlock:
    """A block of the product cone: 'halfline' (dim 1) or 'lorentz' (dim m)."""

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in ("halfline", "lorentz"):
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.kind == "halfline" and self.dim != 1:
            raise ValueError("halfline blocks have dim 1")
        if self.kind == "lorentz" and self.dim < 2:
            raise ValueError("lorentz blocks need dim >= 2")


@dataclass
class ConicLiResult:
    status: str  # "LI" | "DEPENDENT" | "UNDECIDED"
    residual: float  # smallest normalized ||M v|| encountered
    witness: list | None  # per-block arrays of the violating v, when found
    samples: int


def _unit_sphere_grid(dim: int, count: int, rng=None) -> list:
    """Deterministic quasi-uniform points on S^{dim-1} plus optional
    seeded random fill."""
    pts = []
    if dim == 1:
        pts = [np.array([1.0]), np.array([-1.0])]
    elif dim == 2:
        count = max(count, 8)
        for i in range(count):
            ang = 2.0 * np.pi * i / count
            pts.append(np.array([np.cos(ang), np.sin(ang)]))
    else:
        count = max(count, 16)
        # Fibonacci-style spiral on S^2 generalizes well enough here;
        # higher dims fall back to seeded normals below.
        if dim == 3:
            golden = (1 + 5 ** 0.5) / 2
            for i in range(count):
                z = 1 - 2 * (i + 0.5) / count
                r = np.sqrt(max(0.0, 1 - z * z))
                ang = 2 * np.pi * i / golden
                pts.append(np.array([r * np.cos(ang), r * np.sin(ang), z]))
        basis = np.eye(dim)
        for i in range(dim):
            pts.append(basis[i])
            pts.append(-basis[i])
    if rng is not None:
        extra = 0 if dim == 1 else max(4, count // 4)
        for _ in range(extra):
            v = rng.standard_normal(dim)
            nv = np.linalg.norm(v)
            if nv > 1e-12:
                pts.append(v / nv)
    return pts


def _slice_generators(blocks, kinds, w_choice):
    """Columns of M restricted to the slice given by ``w_choice``."""
    gens = []
    owners = []
    for j, (mat, cb) in enumerate(zip(blocks, kinds)):
        if cb.kind == "halfline":
            gens.append(mat[:, 0])
            owners.append((j, "halfline", None))
        else:
            w = w_choice[j]
            e_minus = np.concatenate(([1.0], -w))
            e_plus = np.concatenate(([1.0], w))
            gens.append(mat @ e_minus)
            owners.append((j, "minus", w))
            gens.append(mat @ e_plus)
            owners.append((j, "plus", w))
    return gens, owners


def _assemble_witness(kinds, owners, coeffs, w_choice):
    parts = []
    pos = 0
    for j, cb in enumerate(kinds):
        if cb.kind == "halfline":
            parts.append(np.array([coeffs[pos]]))
            pos += 1
        else:
            a = coeffs[pos]
            b = coeffs[pos + 1]
            pos += 2
            w = w_choice[j]
            v = np.concatenate(([a + b], (b - a) * w))
            parts.append(v)
    total = np.sqrt(sum(float(v @ v) for v in parts))
    if total > 0:
        parts = [v / total for v in parts]
    return parts


def _stack_apply(blocks, parts):
    out = None
    for mat, v in zip(blocks, parts):
        term = mat @ v
        out = term if out is None else out + term
    return out


def conic_li_certificate(
    blocks,
    kinds,
    tol: float = 1e-8,
    slice_points: int = 32,
    pg_starts: int = 64,
    pg_steps: int = 500,
    seed: int = 0,
) -> ConicLiResult:
    """Search for a nonzero cone vector in the kernel of the stacked map.

    ``blocks[j]`` is the (n, dim_j) matrix applied to the j-th cone
    block.  The cone is the product described by ``kinds``.  The search
    minimizes the normalized ``||M v||`` over all conical slices: a
    deterministic grid of slice axes, each polished by an exact
    simplex-constrained least squares, plus seeded multi-start projected
    gradient refinement.  A violating ``v`` is a hard certificate; an LI
    answer is certified only by the search effort, and near-threshold
    minima are reported as UNDECIDED rather than guessed.
    """
    blocks = [np.asarray(b, dtype=float) for b in blocks]
    blocks = [b.reshape(-1, 1) if b.ndim == 1 else b for b in blocks]
    if len(blocks) != len(kinds):
        raise ValueError("blocks and kinds must parallel")
    if not blocks:
        return ConicLiResult(status="LI", residual=np.inf, witness=None, samples=0)
    for mat, cb in zip(blocks, kinds):
        if mat.shape[1] != cb.dim:
            raise ValueError(
                f"block matrix has {mat.shape[1]} columns for cone dim {cb.dim}"
            )
    rng = np.random.default_rng(seed)
    n_blocks = len(blocks)

    scale = max(float(np.linalg.norm(b)) for b in blocks)
    cutoff = tol * max(1.0, scale)

    lorentz_idx = [j for j, cb in enumerate(kinds) if cb.kind == "lorentz"]
    grids = {}
    for j in lorentz_idx:
        grids[j] = _unit_sphere_grid(kinds[j].dim - 1, slice_points, rng)

    # enumerate slice combinations (capped; excess sampled at random)
    combos = [[]]
    for j in range(n_blocks):
        if kinds[j].kind != "lorentz":
            combos = [c + [None] for c in combos]
            continue
        combos = [c + [w] for c in combos for w in grids[j]]
        if len(combos) > 4096:
            picked = rng.choice(len(combos), size=4096, replace=False)
            combos = [combos[i] for i in picked]

    best = None  # (residual, coeffs, owners, w_choice)
    samples = 0
    for w_choice in combos:
        gens, owners = _slice_generators(blocks, kinds, w_choice)
        a, r = _simplex_min_norm(np.column_stack(gens))
        samples += 1
        if best is None or r < best[0]:
            best = (r, a, owners, w_choice)
        if r == 0.0:
            break

    # multi-start projected-gradient refinement over (coeffs, slice axes);
    # pointless when every axis sphere is the two-point S^0 (grid already
    # exhaustive), and trimmed when the grid minimum is decisively large
    exhaustive = all(kinds[j].dim == 2 for j in lorentz_idx)
    if best is not None and best[0] > 1e3 * cutoff:
        pg_starts = min(pg_starts, 8)
    if lorentz_idx and not exhaustive and best is not None and best[0] > 0.0:
        for start in range(pg_starts):
            if start == 0 and best is not None:
                w_cur = [None if w is None else w.copy() for w in best[3]]
                coeff_cur = best[1].copy()
            else:
                w_cur = []
                for j in range(n_blocks):
                    if kinds[j].kind != "lorentz":
                        w_cur.append(None)
                    else:
                        v = rng.standard_normal(kinds[j].dim - 1)
                        w_cur.append(v / max(np.linalg.norm(v), 1e-12))
                gens, _ = _slice_generators(blocks, kinds, w_cur)
                coeff_cur = rng.random(len(gens)) + 0.05
                coeff_cur /= coeff_cur.sum()
            r_final, coeff_cur, w_cur = _pg_refine(
                blocks, kinds, coeff_cur, w_cur, pg_steps
            )
            # exact polish on the final slice
            gens, owners = _slice_generators(blocks, kinds, w_cur)
            a, r = _simplex_min_norm(np.column_stack(gens))
            samples += 1
            if r < best[0]:
                best = (r, a, owners, w_cur)
            if best[0] == 0.0:
                break

    r, a, owners, w_choice = best
    witness_parts = _assemble_witness(kinds, owners, a, w_choice)
    norm_v = np.sqrt(sum(float(v @ v) for v in witness_parts))
    if norm_v <= 0:
        # all coefficients vanished; treat as no violation found
        return ConicLiResult(status="LI", residual=np.inf, witness=None, samples=samples)
    resid = float(np.linalg.norm(_stack_apply(blocks, witness_parts)))
    if resid <= cutoff:
        return ConicLiResult(
            status="DEPENDENT", residual=resid, witness=witness_parts, samples=samples
        )
    if resid <= GRAY_FACTOR * cutoff:
        return ConicLiResult(status="UNDECIDED", residual=resid, witness=None, samples=samples)
    return ConicLiResult(status="LI", residual=resid, witness=None, samples=samples)


def _pg_refine(blocks, kinds, coeffs, w_choice, steps):
    """Projected gradient on the squared kernel residual."""
    coeffs = coeffs.copy()
    w_choice = [None if w is None else w.copy() for w in w_choice]
    n_blocks = len(blocks)
    base_step = 0.5
    for t in range(steps):
        gens, owners = _slice_generators(blocks, kinds, w_choice)
        gmat = np.column_stack(gens)
        r = gmat @ coeffs
        val = float(r @ r)
        if val == 0.0:
            break
        grad_c = 2.0 * (gmat.T @ r)
        step = base_step / (1.0 + 0.05 * t)
        new_c = np.clip(coeffs - step * grad_c, 0.0, None)
        # slice-axis gradient per lorentz block
        new_w = []
        pos = 0
        for j in range(n_blocks):
            if kinds[j].kind != "lorentz":
                new_w.append(None)
                pos += 1
                continue
            a = coeffs[pos]
            b = coeffs[pos + 1]
            pos += 2
            hat = blocks[j][:, 1:]
            gw = 2.0 * (b - a) * (hat.T @ r)
            w = w_choice[j] - step * gw
            nw = np.linalg.norm(w)
            new_w.append(w / nw if nw > 1e-12 else w_choice[j])
        total = new_c.sum()
        if total <= 1e-14:
            break
        coeffs = new_c / total
        w_choice = new_w
    gens, _ = _slice_generators(blocks, kinds, w_choice)
    gmat = np.column_stack(gens)
    return float(np.linalg.norm(gmat @ coeffs)), coeffs, w_choice
