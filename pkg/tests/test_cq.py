import numpy as np
import pytest

from nsocp import corpus as cp
from nsocp import cq as cqmod
from nsocp import model as md
from nsocp.cq import CqStatus, SearchBudget, SubsetSelection


def empty_sel():
    return SubsetSelection(frozenset(), frozenset(), frozenset())


def test_build_family_erratum_yields_zero_vector():
    p = cp.get("zz-erratum")
    sel = SubsetSelection(frozenset(), frozenset({0}), frozenset())
    fam = cqmod.build_family_D(p, [0.0], sel, {0: np.array([1.0])})
    assert len(fam) == 1
    assert np.allclose(fam.vectors[0], [0.0])
    assert fam.labels[0] == (0, "minus")


def test_build_family_positively_dependent_pair():
    from nsocp import rank as rk

    p = cp.get("ex41")
    w = np.array([1.0, 1.0]) / np.sqrt(2.0)
    sel = SubsetSelection(frozenset(), frozenset({0}), frozenset({0}))
    fam = cqmod.build_family_D(p, [0.0], sel, {0: w})
    vals = sorted(float(v[0]) for v in fam.vectors)
    assert vals == pytest.approx([-1.0 - np.sqrt(2.0), -1.0 + np.sqrt(2.0)])
    # the pair admits a vanishing nonnegative combination, though neither
    # member vanishes alone
    assert rk.is_positively_linearly_dependent(fam.vectors) is not None
    assert all(abs(v) > 0.1 for v in vals)


def test_build_family_empty():
    p = cp.get("ex41")
    fam = cqmod.build_family_D(p, [0.0], empty_sel(), {})
    assert len(fam) == 0


def test_build_family_boundary_needs_nonzero_hat():
    p = cp.get("zz-erratum")
    sel = SubsetSelection(frozenset({0}), frozenset(), frozenset())
    with pytest.raises(cqmod.ZeroHatOnBoundary):
        cqmod.build_family_D(p, [0.0], sel, {})


def test_nondegeneracy_exact_decisions():
    assert cqmod.check_nondegeneracy(cp.get("ex32"), [0.0, 0.0]).status == CqStatus.VIOLATED
    assert cqmod.check_nondegeneracy(cp.get("ex31-padded"), [0.0, 0.0]).status == CqStatus.VIOLATED

    doc = {"name": "identity", "n": 2, "objective": "x1",
           "constraints": [{"dim": 2, "components": ["x1", "x2"]}]}
    ident = md.problem_from_dict(doc)
    assert cqmod.check_nondegeneracy(ident, [0.0, 0.0]).status == CqStatus.HOLDS


def test_nondegeneracy_scale_invariant():
    base = {"name": "s", "n": 2, "objective": "x1",
            "constraints": [{"dim": 3, "components": ["x1", "x2", "x2"]}]}
    scaled = {"name": "s2", "n": 2, "objective": "x1",
              "constraints": [{"dim": 3, "components": ["2*x1", "2*x2", "2*x2"]}]}
    v1 = cqmod.check_nondegeneracy(md.problem_from_dict(base), [0.0, 0.0])
    v2 = cqmod.check_nondegeneracy(md.problem_from_dict(scaled), [0.0, 0.0])
    assert v1.status == v2.status


def test_robinson_verdicts():
    assert cqmod.check_robinson(cp.get("ex33"), [0.0]).status == CqStatus.HOLDS
    assert cqmod.check_robinson(cp.get("ex42"), [0.0, 0.0]).status == CqStatus.HOLDS
    verdict = cqmod.check_robinson(cp.get("zz-erratum"), [0.0])
    assert verdict.status == CqStatus.VIOLATED
    v = np.asarray(verdict.witness["kernel_vector"]["0"])
    # hard witness: unit vector in the cone and in the kernel
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-9)
    assert v[0] >= abs(v[1]) - 1e-10
    jac = md.evaluate(cp.get("zz-erratum"), [0.0]).jac[0]
    assert float(np.abs(jac.T @ v).max()) <= 1e-10


def test_weak_ndg_verdicts():
    assert cqmod.falsify_weak_cq(cp.get("ex32"), [0.0, 0.0], "weak-ndg").status == CqStatus.HOLDS
    assert cqmod.falsify_weak_cq(cp.get("ex31-padded"), [0.0, 0.0], "weak-ndg").status == CqStatus.HOLDS
    verdict = cqmod.falsify_weak_cq(cp.get("ex33"), [0.0], "weak-ndg")
    assert verdict.status == CqStatus.VIOLATED
    # witness: the forced axis along the positive probe direction
    w = np.asarray(verdict.witness["slice"]["0"])
    assert np.allclose(np.abs(w), np.array([2.0, 1.0]) / np.sqrt(5.0), atol=1e-6)


def test_weak_robinson_separates_from_weak_ndg():
    assert (
        cqmod.falsify_weak_cq(cp.get("ex33"), [0.0], "weak-robinson").status
        == CqStatus.HOLDS
    )
    assert (
        cqmod.falsify_weak_cq(cp.get("ex41"), [0.0], "weak-robinson").status
        == CqStatus.VIOLATED
    )


def test_weak_constant_rank_erratum():
    verdict = cqmod.falsify_constant_rank(cp.get("zz-erratum"), [0.0], "weak-crcq")
    assert verdict.status == CqStatus.VIOLATED
    assert verdict.witness["subsets"]["Jminus"] == [0] or verdict.witness["subsets"]["Jplus"] == [0]
    assert cqmod.falsify_constant_rank(cp.get("zz-erratum"), [0.0], "weak-cpld").status == CqStatus.VIOLATED


def test_weak_vs_seq_separation():
    p52 = cp.get("ex52")
    assert cqmod.falsify_constant_rank(p52, [0.0], "weak-cpld").status == CqStatus.HOLDS
    verdict = cqmod.falsify_constant_rank(p52, [0.0], "seq-cpld")
    assert verdict.status == CqStatus.VIOLATED

    p51 = cp.get("ex51")
    assert cqmod.falsify_constant_rank(p51, [0.0], "seq-crcq").status == CqStatus.HOLDS
    assert cqmod.falsify_constant_rank(p51, [0.0], "seq-cpld").status == CqStatus.HOLDS


def test_subset_enumeration_and_cap():
    sels = cqmod.subset_selections({0}, {1})
    # (2 choices for JB) x (2 for Jminus) x (2 for Jplus) minus the empty one
    assert len(sels) == 7
    with pytest.raises(cqmod.SubsetCapExceeded):
        cqmod.subset_selections(set(range(8)), set(range(8)), cap=12)


def test_crosscheck_decomposition_consistent():
    for name in ("ex32", "ex31-padded"):
        report = cqmod.crosscheck_ndg_decomposition(cp.get(name), [0.0, 0.0])
        assert report.ndg.status == CqStatus.VIOLATED
        assert report.weak_ndg.status == CqStatus.HOLDS
        assert not report.hat_rows_full_rank
        assert report.consistent

    doc = {"name": "identity", "n": 2, "objective": "x1",
           "constraints": [{"dim": 2, "components": ["x1", "x2"]}]}
    report = cqmod.crosscheck_ndg_decomposition(md.problem_from_dict(doc), [0.0, 0.0])
    assert report.ndg.status == CqStatus.HOLDS
    assert report.weak_ndg.status == CqStatus.HOLDS
    assert report.hat_rows_full_rank
    assert report.consistent


def test_kkt_multiplier_search():
    resid, mu = cqmod.kkt_multiplier_search(cp.get("halfline-min"), [1.0])
    assert resid <= 1e-6
    assert np.allclose(mu.mu[0], [1.0, -1.0], atol=1e-5)
    resid_bad, _ = cqmod.kkt_multiplier_search(cp.get("zz-erratum"), [0.0])
    assert resid_bad >= 0.99


def test_verdicts_deterministic():
    p = cp.get("ex42")
    budget = SearchBudget(seed=3)
    a = cqmod.check_all(p, [0.0, 0.0], budget=budget)
    b = cqmod.check_all(p, [0.0, 0.0], budget=SearchBudget(seed=3))
    for name in a:
        assert a[name].status == b[name].status
        assert a[name].witness == b[name].witness
        assert a[name].certificate == b[name].certificate


def test_verdict_invariants():
    with pytest.raises(cqmod.CqError):
        cqmod.CqVerdict(CqStatus.VIOLATED)
    with pytest.raises(cqmod.CqError):
        cqmod.CqVerdict(CqStatus.HOLDS)


def test_hierarchy_edges_on_corpus_tables():
    # the expected truth tables themselves must respect every implication
    for name in cp.names():
        expected = cp.FIXTURES[name]["expected"]
        for strong, weak in cqmod.HIERARCHY_EDGES:
            if expected.get(strong) is True:
                assert expected.get(weak) is True, (name, strong, weak)


def test_hierarchy_violations_helper():
    holds = cqmod.CqVerdict(CqStatus.HOLDS, certificate={"degeneracy_measure": 1.0, "samples": 1})
    violated = cqmod.CqVerdict(CqStatus.VIOLATED, witness={"d": None})
    undecided = cqmod.CqVerdict(CqStatus.UNDECIDED)
    bad = cqmod.hierarchy_violations({"ndg": holds, "weak-ndg": violated})
    assert ("ndg", "weak-ndg") in bad
    assert not cqmod.hierarchy_violations({"ndg": holds, "weak-ndg": undecided})
    assert not cqmod.hierarchy_violations({"ndg": violated, "weak-ndg": holds})
