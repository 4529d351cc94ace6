"""Quasi-parabolic compactification and the desingularized vector field.

Writing Q(x) = 1 - sum_j x_j^(2 beta_j) for the reciprocal of kappa, every
monomial of weighted degree w in component j turns into the same monomial
times Q^(k + alpha_j - w) after compactification. That keeps g an exact
rational function of x with no division by Q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, reduce

import numpy as np

from .errors import NoConvergence, OnHorizon, ResidualTooLarge
from .field import MultiPoly, QHDecomposition, RationalFn

KAPPA_RTOL = 1e-14
KAPPA_MAXITER = 200


@dataclass(frozen=True)
class Compactification:
    alpha: tuple[int, ...]
    beta: tuple[int, ...]
    c: int

    @property
    def n(self):
        return len(self.alpha)

    @property
    def active(self) -> tuple[bool, ...]:
        return tuple(a != 0 for a in self.alpha)

    @cached_property
    def _idx(self):
        return np.array([i for i, a in enumerate(self.alpha) if a])

    @cached_property
    def _beta2(self):
        return np.array([2 * self.beta[i] for i in self._idx], dtype=float)

    def P_poly(self) -> MultiPoly:
        """The polynomial p(x)^(2c)."""
        return sum(
            (MultiPoly.variable(i, self.n, 2 * self.beta[i]) for i in self._idx),
            MultiPoly.zero(self.n),
        )

    def Q_poly(self) -> MultiPoly:
        return 1 - self.P_poly()


def derive_beta(alpha) -> Compactification:
    """beta_i = c / alpha_i with c the lcm of the nonzero alpha_i; zero alpha gets beta = 0."""
    alpha = tuple(int(a) for a in alpha)
    if any(a < 0 for a in alpha) or not any(alpha):
        raise ValueError("alpha must be nonnegative and not identically zero")
    c = reduce(math.lcm, (a for a in alpha if a))
    beta = tuple(c // a if a else 0 for a in alpha)
    return Compactification(alpha, beta, c)


def P_value(x, compact: Compactification):
    """p(x)^(2c); accepts a point or a batch of points."""
    x = np.asarray(x, dtype=float)
    sub = x[..., compact._idx]
    return np.sum(sub ** compact._beta2, axis=-1)


def p_value(x, compact: Compactification):
    return P_value(x, compact) ** (1.0 / (2 * compact.c))


def grad_P(x, compact: Compactification) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for i in compact._idx:
        b2 = 2 * compact.beta[i]
        out[..., i] = b2 * x[..., i] ** (b2 - 1)
    return out


def grad_p(x, compact: Compactification) -> np.ndarray:
    """Gradient of p; on the horizon this is (beta_j / c) x_j^(2 beta_j - 1)."""
    x = np.asarray(x, dtype=float)
    P = P_value(x, compact)
    scale = P ** (1.0 / (2 * compact.c) - 1.0) / (2 * compact.c)
    return grad_P(x, compact) * np.asarray(scale)[..., None]


def _log_P(y, compact):
    # log sum_j |y_j|^(2 beta_j), computed without overflow
    terms = [
        2 * compact.beta[i] * math.log(abs(y[i])) for i in compact._idx if y[i] != 0
    ]
    if not terms:
        return -math.inf
    m = max(terms)
    return m + math.log(sum(math.exp(t - m) for t in terms))


def solve_kappa(y, compact: Compactification) -> float:
    """kappa >= 1 with kappa^(2c-1) (kappa - 1) = p(y)^(2c)."""
    return 1.0 + _solve_delta(_log_P(y, compact), 2 * compact.c)


def _solve_delta(logP, c2):
    # delta = kappa - 1 solves (2c-1) log1p(delta) + log(delta) = log P;
    # working in delta keeps full relative accuracy when p(y) is tiny
    if logP == -math.inf:
        return 0.0

    def phi(d):
        return (c2 - 1) * math.log1p(d) + math.log(d) - logP

    # phi is increasing; (1+d)^(2c-1) d >= max(d, d^(2c)) gives the upper
    # bound, and d <= hi gives the lower one
    log_hi = min(logP, logP / c2)
    hi = math.exp(log_hi)
    if hi == 0.0:
        return 0.0  # delta below the smallest double; kappa = 1 exactly
    lo = math.exp(logP - (c2 - 1) * math.log1p(hi))
    d = hi
    for _ in range(KAPPA_MAXITER):
        val = phi(d)
        if val > 0:
            hi = d
        else:
            lo = d
        deriv = (c2 - 1) / (1 + d) + 1 / d
        new = d - val / deriv
        if not (lo < new < hi):
            new = 0.5 * (lo + hi)
        if abs(new - d) <= KAPPA_RTOL * new or hi - lo <= KAPPA_RTOL * hi:
            return new
        d = new
    raise NoConvergence(f"kappa solve did not converge for log P = {logP}")


def compactify_point(y, compact: Compactification) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    kap = solve_kappa(y, compact)
    return y * kap ** (-np.array(compact.alpha, dtype=float))


def kappa_of(x, compact: Compactification) -> float:
    P = float(P_value(x, compact))
    if P >= 1:
        raise OnHorizon(f"p(x)^(2c) = {P} >= 1")
    return 1.0 / (1.0 - P)


def decompactify_point(x, compact: Compactification) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    kap = kappa_of(x, compact)
    return x * kap ** np.array(compact.alpha, dtype=float)


def random_horizon_points(compact: Compactification, count, rng, spread=1.0):
    """Random points with p(x) = 1, built by rescaling random vectors along alpha-weights."""
    pts = []
    alpha = np.array(compact.alpha, dtype=float)
    while len(pts) < count:
        z = rng.normal(scale=spread, size=compact.n)
        P = float(P_value(z, compact))
        if P < 1e-12:
            continue
        s = P ** (-1.0 / (2 * compact.c))
        pts.append(z * s ** alpha)
    return np.array(pts)


def _transform_component(comp: RationalFn, alpha, k, index, Q: MultiPoly):
    """f~_j: each term picks up Q^(k + alpha_j - w); returns (f~_j, list of exponents of Q)."""
    n = comp.nvars
    den = comp.denominator
    w_den = next(iter(den.weights(alpha))) if not den.is_zero() else Fraction(0)
    target = k + alpha[index]
    num = MultiPoly.zero(n)
    powers = []
    Qpow = {0: MultiPoly.constant(1, n)}
    for exp, c in comp.numerator.terms.items():
        d = target - (comp.numerator.weight(exp, alpha) - w_den)
        if d < 0:
            raise ResidualTooLarge(f"component {index}: term of weight above k + alpha_i")
        if d.denominator != 1:
            raise ResidualTooLarge(
                f"component {index}: term leaves the fractional power kappa^(-{d})"
            )
        d = int(d)
        if d not in Qpow:
            Qpow[d] = Q ** d
        num = num + MultiPoly({exp: c}, n) * Qpow[d]
        powers.append(d)
    return RationalFn(num, den), powers


@dataclass(frozen=True, eq=False)
class CompactifiedSystem:
    base: QHDecomposition
    compact: Compactification
    f_tilde: tuple[RationalFn, ...]
    G: RationalFn
    factor: MultiPoly
    g: tuple[RationalFn, ...]
    assumption: str
    warnings: tuple[str, ...] = ()

    @property
    def n(self):
        return self.base.n

    @property
    def k(self):
        return self.base.k

    @property
    def alpha(self):
        return self.base.alpha

    @property
    def c(self):
        return self.compact.c

    @cached_property
    def g_jacobian(self):
        return tuple(tuple(gi.diff(l) for l in range(self.n)) for gi in self.g)

    @cached_property
    def _alpha_arr(self):
        return np.array(self.alpha, dtype=float)

    def g_value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([gi(x, index=i) for i, gi in enumerate(self.g)], axis=-1)

    def Dg(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array(
            [[e(x, index=i) for e in row] for i, row in enumerate(self.g_jacobian)]
        )

    def f_tilde_value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([f(x, index=i) for i, f in enumerate(self.f_tilde)], axis=-1)

    def G_value(self, x):
        return G_value(x, self)

    def P(self, x):
        return P_value(x, self.compact)

    def p(self, x):
        return p_value(x, self.compact)

    def time_rescale_factor(self, x):
        return time_rescale_factor(x, self)

    def equilibrium_residual(self, x) -> np.ndarray:
        """(factor) f~(x) - G(x) Lambda x, evaluated directly from f~ and G."""
        x = np.asarray(x, dtype=float)
        fac = 1 - (2 * self.c - 1) / (2 * self.c) * (1 - self.P(x))
        return fac * self.f_tilde_value(x) - self.G_value(x) * self._alpha_arr * x

    def to_str(self):
        names = self.base.field.names
        return "\n".join(
            f"{nm}' = {gi.to_str(names)}" for nm, gi in zip(names, self.g)
        )


def build_desingularized(decomp: QHDecomposition) -> CompactifiedSystem:
    field = decomp.recombine()
    alpha, k, n = field.alpha, field.k, field.n
    compact = derive_beta(alpha)
    Q = compact.Q_poly()
    f_tilde, all_powers = [], []
    for i, comp in enumerate(field.components):
        ft, powers = _transform_component(comp, alpha, k, i, Q)
        f_tilde.append(ft)
        all_powers.append([d for d in powers if d > 0])

    warnings = []
    marginal = [i for i, ds in enumerate(all_powers) if 1 in ds]
    if marginal:
        assumption = "marginal"
        warnings.append(
            "residual terms of weight k + alpha_i - 1 in components "
            f"{marginal}: residual decays only like 1/kappa"
        )
    else:
        assumption = "ok"

    G = RationalFn.constant(0, n)
    for j in range(n):
        if alpha[j]:
            b2 = 2 * compact.beta[j]
            coeff = MultiPoly({tuple(b2 - 1 if l == j else 0 for l in range(n)): Fraction(1, alpha[j])}, n)
            G = G + f_tilde[j] * coeff

    c = compact.c
    factor = (1 + (2 * c - 1) * compact.P_poly()) * Fraction(1, 2 * c)
    g = []
    for i in range(n):
        gi = f_tilde[i] * factor
        if alpha[i]:
            gi = gi - G * MultiPoly.variable(i, n) * alpha[i]
        g.append(gi)
    return CompactifiedSystem(
        decomp, compact, tuple(f_tilde), G, factor, tuple(g), assumption, tuple(warnings)
    )


def G_value(x, sys: CompactifiedSystem):
    x = np.asarray(x, dtype=float)
    return sys.G(x)


def time_rescale_factor(x, sys: CompactifiedSystem):
    """dt/dtau = (1 - p^(2c))^k (1 - (2c-1)/(2c) (1 - p^(2c)))."""
    Q = 1 - P_value(x, sys.compact)
    Q = np.maximum(Q, 0.0)
    c = sys.c
    return Q ** float(sys.k) * (1 - (2 * c - 1) / (2 * c) * Q)
