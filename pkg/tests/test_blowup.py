import math

import numpy as np
import pytest

from qhblowup.blowup import (
    _branch,
    balance_residual,
    damped_newton,
    equilibrium_failures,
    equilibrium_to_root,
    existence_verdict,
    make_root,
    root_to_equilibrium,
    solve_balance,
    stability_gap,
    vector_level,
)
from qhblowup.compactify import build_desingularized
from qhblowup.errors import GapViolated
from qhblowup.field import MultiPoly, decompose, polynomial_field


def test_damped_newton_quadratic():
    F = lambda x: np.array([x[0] ** 2 - 2.0])
    J = lambda x: np.array([[2 * x[0]]])
    x, res, _ = damped_newton(F, J, np.array([5.0]), tol=1e-14)
    assert x[0] == pytest.approx(math.sqrt(2), abs=1e-14)
    assert res < 1e-14


def test_balance_roots_scalar(get_system):
    _, d, sys_ = get_system("scalar_cubic")
    roots, _ = solve_balance(d, sys_.compact)
    ys = sorted(r.Y0[0] for r in roots)
    assert ys == pytest.approx([-1 / math.sqrt(2), 1 / math.sqrt(2)], abs=1e-13)
    for r in roots:
        assert r.A[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_balance_residual_zero_at_roots(get_analysis, get_system):
    for name in ["kk", "andrews1", "andrews2", "two_phase"]:
        _, d, _ = get_system(name)
        roots, _, _ = get_analysis(name)
        assert roots, name
        for r in roots:
            assert np.linalg.norm(balance_residual(d, r.Y0)) < 1e-10


def test_lambda_y0_is_unit_eigenvector(get_analysis, get_system):
    for name in ["kk", "andrews1", "andrews2", "log2"]:
        _, _, sys_ = get_system(name)
        roots, _, _ = get_analysis(name)
        for r in roots:
            v = np.array(sys_.alpha) * r.Y0
            assert np.linalg.norm(r.A @ v - v) < 1e-10 * max(1, np.linalg.norm(v))


def test_empty_seed_list_gives_no_roots(get_system):
    _, d, sys_ = get_system("kk")
    roots, _ = solve_balance(d, sys_.compact, seeds=[])
    assert roots == []


def test_horizon_equilibria_scalar(get_analysis):
    _, eqs, _ = get_analysis("scalar_cubic")
    fwd = sorted(e.x_star[0] for e in eqs if e.forward)
    assert fwd == pytest.approx([-1.0, 1.0], abs=1e-12)
    for e in eqs:
        assert e.C_star == pytest.approx(1.0, abs=1e-12)
        assert e.Dg[0, 0] == pytest.approx(-1.0, abs=1e-10)


def test_equilibrium_invariants_hold(get_analysis, get_system):
    for name in ["kk", "andrews1", "andrews2", "log2", "scalar_cubic"]:
        _, _, sys_ = get_system(name)
        _, eqs, _ = get_analysis(name)
        for e in eqs:
            if e.forward:
                assert equilibrium_failures(e, sys_.assumption) == {}, name


def test_andrews_flags_zero_and_negative_cstar(get_analysis):
    _, eqs, _ = get_analysis("andrews2")
    flags = {f for e in eqs for f in e.flags}
    assert "ZeroCstar" in flags and "NegativeCstar" in flags
    assert sum(e.forward for e in eqs) == 2


def test_root_equilibrium_maps_are_inverse(get_analysis, get_system):
    _, _, sys_ = get_system("kk")
    roots, _, _ = get_analysis("kk")
    for r in roots:
        eq = root_to_equilibrium(r, sys_)
        back = equilibrium_to_root(eq, sys_)
        assert np.allclose(back.Y0, r.Y0, atol=1e-10)
        assert eq.r == pytest.approx(r.r, rel=1e-12)


def test_non_isolated_root_is_not_hyperbolic():
    u, v = MultiPoly.variable(0, 2), MultiPoly.variable(1, 2)
    field = polynomial_field([u * u, u * v], (1, 1), 1)
    d = decompose(field)
    sys_ = build_desingularized(d)
    root = make_root(d, sys_.compact, np.array([1.0, 0.3]))
    assert np.linalg.norm(balance_residual(d, root.Y0)) < 1e-14
    verdict = existence_verdict(root, sys_)
    assert verdict.status == "NotHyperbolic"


def test_marginal_residual_verdict(get_analysis):
    _, _, rep = get_analysis("two_phase")
    assert rep.assumption == "marginal"
    assert all(p.verdict.status == "AssumptionViolated" for p in rep.pairs)
    # assumption-dependent identities are reported but not enforced
    assert rep.failures == {}


def test_rate_undetermined_for_zero_component(get_analysis, get_system):
    _, _, sys_ = get_system("log2")
    roots, _, _ = get_analysis("log2")
    r = min(roots, key=lambda r: abs(r.Y0[1]))
    v = existence_verdict(r, sys_)
    assert v.rates[1]["note"] == "rate-undetermined"
    assert v.rates[0]["exponent"] == pytest.approx(-1.0)


def test_stability_gap_raises_when_violated(get_analysis):
    roots, eqs, _ = get_analysis("kk")
    sink = max((e for e in eqs if e.forward), key=lambda e: e.C_star)
    saddle_root = max(roots, key=lambda r: r.Y0[0])
    with pytest.raises(GapViolated):
        stability_gap(saddle_root, sink)
    assert stability_gap(saddle_root, sink, check=False) == (2, 0)


def test_vector_level_on_jordan_block():
    M = np.array([[1.0, 1.0], [0.0, 1.0]])
    assert vector_level(M, 1.0, [1.0, 0.0]) == 1
    assert vector_level(M, 1.0, [0.0, 1.0]) == 2
    assert vector_level(M, 2.0, [1.0, 0.0]) is None


def test_branch_classification():
    assert _branch(1, 1, "A_to_Dg") == "SameChain"
    assert _branch(2, 1, "A_to_Dg") == "ChainShortened"
    assert _branch(1, 2, "Dg_to_A") == "ChainExtended"
    assert _branch(1, 0, "A_to_Dg") == "UnresolvedDirection"
    assert _branch(1, None, "A_to_Dg") == "UnresolvedDirection"


def test_jordan_exception_reported(get_analysis):
    _, _, rep = get_analysis("log2")
    branches = [p.exception_branch for p in rep.pairs if p.exception_branch]
    assert branches == ["ChainShortened"]
