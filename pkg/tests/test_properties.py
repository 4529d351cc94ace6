from fractions import Fraction

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from qhblowup.compactify import (
    P_value,
    build_desingularized,
    compactify_point,
    decompactify_point,
    derive_beta,
    grad_p,
    random_horizon_points,
    solve_kappa,
)
from qhblowup.field import MultiPoly, decompose, evaluate, polynomial_field
from qhblowup.spectral import chain_residual, eigen_decompose
from qhgen import qh_monomials, random_qh_field

SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])

coeff = st.integers(-4, 4)
exponent = st.tuples(st.integers(0, 3), st.integers(0, 3))
poly2 = st.dictionaries(exponent, coeff, max_size=5).map(lambda d: MultiPoly(d, 2))
point2 = st.tuples(st.fractions(-3, 3, max_denominator=7), st.fractions(-3, 3, max_denominator=7))


@SETTINGS
@given(poly2, poly2, point2)
def test_product_rule(p, q, x):
    for i in range(2):
        assert (p * q).diff(i) == p.diff(i) * q + p * q.diff(i)
    assert (p * q).evaluate_exact(x) == p.evaluate_exact(x) * q.evaluate_exact(x)


@SETTINGS
@given(poly2, point2)
def test_float_evaluation_matches_exact(p, x):
    exact = float(p.evaluate_exact(x))
    approx = p(np.array([float(v) for v in x]))
    assert abs(approx - exact) <= 1e-12 * max(1.0, abs(exact), sum(abs(float(c)) for c in p.terms.values()) * 81)


alphas = st.lists(st.integers(0, 3), min_size=1, max_size=3).filter(any)


@SETTINGS
@given(alphas, st.data())
def test_compactification_round_trip(alpha, data):
    compact = derive_beta(alpha)
    n = len(alpha)
    y = np.array(data.draw(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=n, max_size=n)))
    kap = solve_kappa(y, compact)
    x = compactify_point(y, compact)
    assert P_value(x, compact) < 1
    assert abs(P_value(x, compact) - (1 - 1 / kap)) < 1e-12
    back = decompactify_point(x, compact)
    assert np.max(np.abs(back - y)) <= 1e-12 * kap ** max(alpha) * max(1.0, np.max(np.abs(y)))


@SETTINGS
@given(st.integers(0, 10 ** 6))
def test_quasi_homogeneous_scaling(seed):
    rng = np.random.default_rng(seed)
    field = random_qh_field(rng)
    alpha = np.array(field.alpha, dtype=float)
    k = float(field.k)
    y = rng.normal(size=field.n)
    s = float(rng.uniform(0.5, 2.0))
    lhs = evaluate(field, s ** alpha * y)
    rhs = s ** (k + alpha) * evaluate(field, y)
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10)


@SETTINGS
@given(st.integers(0, 10 ** 6))
def test_decomposition_recombines(seed):
    rng = np.random.default_rng(seed)
    field = random_qh_field(rng)
    n = field.n
    # add a lower-weight perturbation
    extra = []
    for i in range(n):
        mons = qh_monomials(field.alpha, int(field.k) + field.alpha[i] - 1)
        terms = {mons[0]: int(rng.integers(1, 4))} if mons else {}
        extra.append(field.components[i].numerator + MultiPoly(terms, n))
    full = polynomial_field(extra, field.alpha, field.k)
    d = decompose(full)
    for a, b in zip(d.recombine().components, full.components):
        assert a == b
    for a, b in zip(d.qh_part.components, field.components):
        assert a == b


@SETTINGS
@given(st.integers(0, 10 ** 6))
def test_horizon_invariance_of_g(seed):
    rng = np.random.default_rng(seed)
    field = random_qh_field(rng)
    sys_ = build_desingularized(decompose(field))
    for x in random_horizon_points(sys_.compact, 5, rng):
        g = sys_.g_value(x)
        assert abs(grad_p(x, sys_.compact) @ g) <= 1e-10 * max(1.0, np.linalg.norm(g))


@SETTINGS
@given(st.integers(0, 10 ** 6), st.sampled_from([[1, 1, 1], [2, 1], [3], [1, 2]]))
def test_jordan_chains_recovered(seed, blocks):
    rng = np.random.default_rng(seed)
    n = sum(blocks)
    J = np.zeros((n, n))
    pos = 0
    for size in blocks:
        J[pos:pos + size, pos:pos + size] = 2.0 * np.eye(size) + np.eye(size, k=1)
        pos += size
    S = np.eye(n) + 0.3 * rng.normal(size=(n, n))
    M = S @ J @ np.linalg.inv(S)
    ed = eigen_decompose(M, rank_tol=1e-6)
    assert len(ed.clusters) == 1
    cl = ed.clusters[0]
    assert sorted(cl.chain_lengths) == sorted(blocks)
    for ch in cl.chains:
        assert chain_residual(M, cl.value, ch) < 1e-5


def test_fraction_coefficients_survive():
    p = MultiPoly({(1, 0): Fraction(1, 3)}, 2)
    assert (p * 3).terms == {(1, 0): 1}
