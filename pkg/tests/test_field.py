from fractions import Fraction

import numpy as np
import pytest

from qhblowup.errors import DenominatorZero, MixedDenominator, NotAsymptoticallyQH
from qhblowup.field import (
    MultiPoly,
    RationalFn,
    RationalVectorField,
    decompose,
    evaluate,
    polynomial_field,
    verify_qh_identity,
)


def var(i, n=2):
    return MultiPoly.variable(i, n)


def test_polynomial_arithmetic_exact():
    u, v = var(0), var(1)
    p = (u + v) ** 2
    assert p.terms == {(2, 0): 1, (1, 1): 2, (0, 2): 1}
    assert (p - u * u - 2 * u * v - v * v).is_zero()
    assert p.evaluate_exact([Fraction(1, 3), Fraction(2, 3)]) == 1


def test_polynomial_derivative_and_evaluation():
    u, v = var(0), var(1)
    p = u ** 3 * v - 2 * v ** 2
    assert p.diff(0) == 3 * u ** 2 * v
    assert p.diff(1) == u ** 3 - 4 * v
    assert p([2.0, 3.0]) == pytest.approx(24 - 18)
    batch = p(np.array([[2.0, 3.0], [1.0, 1.0]]))
    assert batch == pytest.approx([6.0, -1.0])


def test_weights():
    u, v = var(0), var(1)
    p = u ** 2 + v
    assert p.weights((1, 2)) == {2}
    assert (u ** 2 + u).weights((1, 2)) == {1, 2}


def test_rational_quotient_rule():
    u, v = var(0), var(1)
    f = RationalFn(u * v, v + 1)
    df = f.diff(1)
    x = np.array([0.7, 1.3])
    h = 1e-6
    fd = (f(x + [0, h]) - f(x - [0, h])) / (2 * h)
    assert df(x) == pytest.approx(fd, rel=1e-8)


def test_rational_denominator_zero_raises():
    u, v = var(0), var(1)
    f = RationalFn(u, v)
    with pytest.raises(DenominatorZero):
        f(np.array([1.0, 0.0]), index=0)


def test_constant_denominator_is_absorbed():
    u = var(0)
    f = RationalFn(u, MultiPoly.constant(2, 2))
    assert f.is_polynomial()
    assert f.numerator.terms == {(1, 0): Fraction(1, 2)}


def test_jacobian_matches_finite_differences():
    u, v = var(0), var(1)
    field = polynomial_field([u ** 2 - v, u ** 3 * Fraction(1, 3) + u * v], (1, 2), 1)
    x = np.array([0.4, -1.1])
    J = field.jacobian_at(x)
    h = 1e-6
    fd = np.column_stack([(evaluate(field, x + h * e) - evaluate(field, x - h * e)) / (2 * h) for e in np.eye(2)])
    assert np.allclose(J, fd, atol=1e-8)


def test_decompose_splits_by_weight():
    u, v = var(0), var(1)
    field = polynomial_field([u ** 2 - v + u, u ** 3 + 3 * u * v - u ** 2], (1, 2), 1)
    d = decompose(field)
    assert d.qh_part.components[0].numerator == u ** 2 - v
    assert d.residual_part.components[0].numerator == u
    assert d.qh_part.components[1].numerator == u ** 3 + 3 * u * v
    assert d.residual_part.components[1].numerator == -(u ** 2)
    assert d.residual_deficits[1] == (1,)
    rec = d.recombine()
    for a, b in zip(rec.components, field.components):
        assert a == b


def test_decompose_rejects_higher_weight():
    u, v = var(0), var(1)
    field = polynomial_field([u ** 3, v], (1, 1), 1)
    with pytest.raises(NotAsymptoticallyQH):
        decompose(field)


def test_decompose_rejects_mixed_denominator():
    u, v = var(0), var(1)
    comp = RationalFn(u ** 2, u + v ** 2)
    field = RationalVectorField((comp, RationalFn(v)), (1, 1), 1)
    with pytest.raises(MixedDenominator):
        decompose(field)


def test_euler_identity_for_bundled_fields(get_system):
    for name in ["kk", "two_phase", "andrews1", "andrews2", "log", "log2", "scalar_cubic"]:
        _, d, _ = get_system(name)
        rep = verify_qh_identity(d, samples=50, seed=1)
        assert rep.worst < 1e-10, name
