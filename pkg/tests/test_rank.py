import math

import numpy as np
import pytest

from nsocp import rank as rk


def brute_force_simplex_min(vectors, steps=50):
    """Oracle: grid search over the simplex for the smallest combination
    norm (only practical for up to ~4 vectors)."""
    mat = np.column_stack([np.asarray(v, float) for v in vectors])
    p = mat.shape[1]
    best = np.inf
    def rec(prefix, remaining, budget):
        nonlocal best
        if remaining == 1:
            a = np.array(prefix + [budget / steps])
            best = min(best, float(np.linalg.norm(mat @ a)))
            return
        for k in range(budget + 1):
            rec(prefix + [k / steps], remaining - 1, budget - k)
    rec([], p, steps)
    return best


def test_numeric_rank_examples():
    assert rk.numeric_rank([(1, 0), (0, 1)]) == 2
    assert rk.numeric_rank([(1, 0), (2, 0)]) == 1
    x = 0.3
    assert rk.numeric_rank([(1, -2 * x), (1, 2 * x)]) == 2
    assert rk.numeric_rank([(1, 0.0), (1, 0.0)]) == 1
    assert rk.numeric_rank([]) == 0
    assert rk.numeric_rank([(0.0, 0.0)]) == 0


def test_numeric_rank_invariances():
    rng = np.random.default_rng(4)
    for _ in range(50):
        vecs = [rng.standard_normal(4) for _ in range(3)]
        r = rk.numeric_rank(vecs)
        assert rk.numeric_rank(list(reversed(vecs))) == r
        scaled = [vecs[0] * 2.0] + vecs[1:]
        assert rk.numeric_rank(scaled) == r


def test_pld_examples():
    cert = rk.is_positively_linearly_dependent([(1, 0), (-1, 0)])
    assert cert is not None
    assert np.allclose(cert.coefficients, [0.5, 0.5])
    assert cert.residual <= 1e-12

    assert rk.is_positively_linearly_dependent([(1, 0), (0, 1)]) is None

    # two positive scalars: linearly dependent yet positively independent
    a = (4 * math.sqrt(5) - 5) / (2 * math.sqrt(5))
    b = (4 * math.sqrt(5) + 5) / (2 * math.sqrt(5))
    assert rk.is_positively_linearly_dependent([(a,), (b,)]) is None
    assert rk.numeric_rank([(a,), (b,)]) == 1


def test_pld_certificate_properties():
    rng = np.random.default_rng(9)
    for _ in range(100):
        p = rng.integers(2, 5)
        vecs = [rng.standard_normal(2) for _ in range(p)]
        cert = rk.is_positively_linearly_dependent(vecs)
        if cert is not None:
            a = cert.coefficients
            assert np.all(a >= 0)
            assert a.sum() == pytest.approx(1.0)
            mat = np.column_stack(vecs)
            assert np.linalg.norm(mat @ a) == pytest.approx(cert.residual, abs=1e-12)


def test_pld_agrees_with_brute_force_grid():
    rng = np.random.default_rng(10)
    for _ in range(60):
        p = rng.integers(2, 5)
        vecs = [rng.standard_normal(2) for _ in range(p)]
        _, exact = rk._simplex_min_norm(np.column_stack(vecs))
        grid = brute_force_simplex_min(vecs, steps=50)
        # exact minimum is a lower bound and the grid comes close
        assert exact <= grid + 1e-12
        assert grid - exact <= 0.1


def test_caratheodory_examples():
    j, al = rk.caratheodory_reduce([(1, 0), (0, 1), (1, 1)], [1, 1, 1])
    _check_caratheodory([(1, 0), (0, 1), (1, 1)], [1, 1, 1], j, al)

    j, al = rk.caratheodory_reduce([(1, 0)], [3])
    assert j == [0] and al == [3.0]

    j, al = rk.caratheodory_reduce([(1, 0), (2, 0)], [1, 1])
    _check_caratheodory([(1, 0), (2, 0)], [1, 1], j, al)
    assert len(j) == 1


def _check_caratheodory(vectors, alphas, idx, coeffs, tol=1e-10):
    vecs = [np.asarray(v, float) for v in vectors]
    target = sum(a * v for a, v in zip(alphas, vecs))
    scale = max(1.0, float(np.linalg.norm(target)))
    if idx:
        kept = [vecs[j] for j in idx]
        assert rk.numeric_rank(kept) == len(idx)
        got = sum(c * vecs[j] for j, c in zip(idx, coeffs))
    else:
        got = np.zeros_like(vecs[0])
    assert np.linalg.norm(got - target) <= tol * scale
    for j, c in zip(idx, coeffs):
        assert alphas[j] * c > 0
        assert alphas[j] != 0


def test_caratheodory_random_instances():
    rng = np.random.default_rng(12)
    for _ in range(300):
        n = int(rng.integers(1, 7))
        p = int(rng.integers(1, 11))
        vecs = [rng.standard_normal(n) for _ in range(p)]
        alphas = rng.standard_normal(p)
        alphas[rng.random(p) < 0.2] = 0.0
        idx, coeffs = rk.caratheodory_reduce(vecs, alphas)
        _check_caratheodory(vecs, alphas, idx, coeffs)


def test_conic_li_full_block_injective():
    mat = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]])
    res = rk.conic_li_certificate([mat], [rk.ConeBlock("lorentz", 3)])
    assert res.status == "LI"
    # oracle: dense sweep over slice axes confirms no kernel direction
    best = np.inf
    for ang in np.linspace(0, 2 * np.pi, 720, endpoint=False):
        w = np.array([np.cos(ang), np.sin(ang)])
        gens = [mat @ np.concatenate(([1.0], s * w)) for s in (-1.0, 1.0)]
        _, r = rk._simplex_min_norm(np.column_stack(gens))
        best = min(best, r)
    assert best > 0.3


def test_conic_li_finds_kernel_witness():
    mat = np.array([[1.0, 1.0]])
    res = rk.conic_li_certificate([mat], [rk.ConeBlock("lorentz", 2)])
    assert res.status == "DEPENDENT"
    v = res.witness[0]
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert v[0] >= abs(v[1]) - 1e-12  # inside the cone
    assert abs(mat @ v) <= 1e-10


def test_conic_li_empty_family():
    res = rk.conic_li_certificate([], [])
    assert res.status == "LI"


def test_conic_li_halfline_blocks():
    # two opposing halfline columns admit no nonnegative kernel combo
    res = rk.conic_li_certificate(
        [np.array([[1.0]]), np.array([[2.0]])],
        [rk.ConeBlock("halfline", 1), rk.ConeBlock("halfline", 1)],
    )
    assert res.status == "LI"
    res2 = rk.conic_li_certificate(
        [np.array([[1.0]]), np.array([[-1.0]])],
        [rk.ConeBlock("halfline", 1), rk.ConeBlock("halfline", 1)],
    )
    assert res2.status == "DEPENDENT"
