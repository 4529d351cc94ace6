import numpy as np
import pytest

from qhblowup.compactify import (
    P_value,
    compactify_point,
    decompactify_point,
    derive_beta,
    grad_p,
    kappa_of,
    p_value,
    random_horizon_points,
    solve_kappa,
)
from qhblowup.errors import OnHorizon


def test_beta_from_alpha():
    c = derive_beta((1, 2))
    assert c.c == 2 and c.beta == (2, 1)
    c = derive_beta((0, 1))
    assert c.c == 1 and c.beta == (0, 1)
    assert c.active == (False, True)
    c = derive_beta((2, 3, 6))
    assert c.c == 6 and c.beta == (3, 2, 1)


def test_kappa_equation():
    compact = derive_beta((1, 2))
    y = np.array([3.0, -7.0])
    kap = solve_kappa(y, compact)
    P = p_value(y, compact) ** (2 * compact.c)
    assert kap ** (2 * compact.c - 1) * (kap - 1) == pytest.approx(P, rel=1e-13)


def test_round_trip_and_disk():
    compact = derive_beta((1, 2))
    rng = np.random.default_rng(3)
    for _ in range(50):
        y = rng.normal(size=2) * 10 ** rng.uniform(-3, 5)
        x = compactify_point(y, compact)
        assert p_value(x, compact) < 1
        # 1 - P(x) = 1/kappa, so the inverse map amplifies roundoff by about kappa
        kap = solve_kappa(y, compact)
        back = decompactify_point(x, compact)
        assert np.max(np.abs(back - y)) <= 1e-13 * kap * np.max(np.abs(y))


def test_origin_maps_to_origin():
    compact = derive_beta((1, 1))
    assert np.allclose(compactify_point(np.zeros(2), compact), 0)
    assert kappa_of(np.zeros(2), compact) == 1


def test_decompactify_rejects_horizon():
    compact = derive_beta((1, 2))
    with pytest.raises(OnHorizon):
        decompactify_point(np.array([1.0, 0.0]), compact)


def test_inactive_coordinate_not_scaled():
    compact = derive_beta((0, 1))
    y = np.array([2.5, 4.0])
    x = compactify_point(y, compact)
    assert x[0] == 2.5
    assert P_value(x, compact) < 1


def test_random_horizon_points_lie_on_horizon():
    compact = derive_beta((1, 2))
    pts = random_horizon_points(compact, 20, np.random.default_rng(0))
    for x in pts:
        assert P_value(x, compact) == pytest.approx(1, abs=1e-14)


def test_grad_p_euler_relation():
    compact = derive_beta((1, 2))
    x = np.array([0.3, -0.6])
    lam = np.array(compact.alpha, dtype=float)
    assert grad_p(x, compact) @ (lam * x) == pytest.approx(p_value(x, compact), rel=1e-13)


def test_desingularized_scalar_field(get_system):
    _, _, sys_ = get_system("scalar_cubic")
    # c = 1: g = (1 + x^2)/2 * f~ - x^2 * f~ with f~ = -x(1-x^2)^2 + x^3
    for x in [0.0, 0.3, 0.9, 1.0]:
        ft = -x * (1 - x ** 2) ** 2 + x ** 3
        expected = (1 + x ** 2) / 2 * ft - x ** 2 * ft
        assert sys_.g_value(np.array([x]))[0] == pytest.approx(expected, abs=1e-14)


def test_horizon_is_invariant(get_system):
    _, _, sys_ = get_system("kk")
    pts = random_horizon_points(sys_.compact, 20, np.random.default_rng(1))
    for x in pts:
        drift = grad_p(x, sys_.compact) @ sys_.g_value(x)
        assert abs(drift) < 1e-12
