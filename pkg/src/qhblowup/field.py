"""Rational vector fields with exact coefficients and their quasi-homogeneous split.

Polynomials are stored as ``{exponent tuple: Fraction}`` maps. All algebra
(products, derivatives, weighted degrees) is exact; floating point enters only
when a polynomial is evaluated at a numeric point.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DenominatorZero, MixedDenominator, NotAsymptoticallyQH


def _frac(c) -> Fraction:
    return c if isinstance(c, Fraction) else Fraction(c)


class MultiPoly:
    """Sparse multivariate polynomial in ``nvars`` variables over the rationals.

    >>> x = MultiPoly.variable(0, 2)
    >>> y = MultiPoly.variable(1, 2)
    >>> str(x * x - y)
    'x0^2 - x1'
    """

    __slots__ = ("nvars", "terms", "__dict__")

    def __init__(self, terms: Mapping[tuple, object], nvars: int):
        clean = {}
        for exp, c in terms.items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != nvars:
                raise ValueError(f"exponent {exp} has length {len(exp)}, expected {nvars}")
            if any(e < 0 for e in exp):
                raise ValueError(f"negative exponent in {exp}")
            c = _frac(c)
            if c != 0:
                clean[exp] = clean.get(exp, Fraction(0)) + c
                if clean[exp] == 0:
                    del clean[exp]
        self.nvars = nvars
        self.terms = dict(sorted(clean.items(), reverse=True))

    @classmethod
    def zero(cls, nvars):
        return cls({}, nvars)

    @classmethod
    def constant(cls, c, nvars):
        return cls({(0,) * nvars: c}, nvars)

    @classmethod
    def variable(cls, i, nvars, power=1):
        exp = [0] * nvars
        exp[i] = power
        return cls({tuple(exp): 1}, nvars)

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[object, Sequence[int]]], nvars):
        """Build from ``(coefficient, exponents)`` pairs; repeated monomials add up."""
        acc: dict[tuple, Fraction] = {}
        for c, exp in terms:
            exp = tuple(exp)
            acc[exp] = acc.get(exp, Fraction(0)) + _frac(c)
        return cls(acc, nvars)

    def is_zero(self):
        return not self.terms

    def is_constant(self):
        return all(not any(e) for e in self.terms)

    def constant_value(self) -> Fraction:
        return self.terms.get((0,) * self.nvars, Fraction(0))

    def degree(self):
        return max((sum(e) for e in self.terms), default=-1)

    def weight(self, exp, alpha) -> Fraction:
        return sum((Fraction(a) * e for a, e in zip(alpha, exp)), Fraction(0))

    def weights(self, alpha) -> set:
        return {self.weight(e, alpha) for e in self.terms}

    def _coerce(self, other):
        if isinstance(other, MultiPoly):
            if other.nvars != self.nvars:
                raise ValueError("polynomials live in different numbers of variables")
            return other
        return MultiPoly.constant(other, self.nvars)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, Fraction(0)) + c
        return MultiPoly(out, self.nvars)

    __radd__ = __add__

    def __neg__(self):
        return MultiPoly({e: -c for e, c in self.terms.items()}, self.nvars)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        out: dict[tuple, Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, Fraction(0)) + c1 * c2
        return MultiPoly(out, self.nvars)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power of a polynomial")
        result = MultiPoly.constant(1, self.nvars)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, MultiPoly):
            return self.nvars == other.nvars and self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self == MultiPoly.constant(other, self.nvars)
        return NotImplemented

    def __hash__(self):
        return hash((self.nvars, tuple(self.terms.items())))

    def diff(self, i: int) -> "MultiPoly":
        out = {}
        for e, c in self.terms.items():
            if e[i]:
                d = list(e)
                d[i] -= 1
                out[tuple(d)] = c * e[i]
        return MultiPoly(out, self.nvars)

    @cached_property
    def _compiled(self):
        if not self.terms:
            return np.zeros((0, self.nvars), dtype=np.int64), np.zeros(0)
        exps = np.array(list(self.terms.keys()), dtype=np.int64)
        coeffs = np.array([float(c) for c in self.terms.values()])
        return exps, coeffs

    def __call__(self, x):
        """Evaluate at a point (shape ``(n,)``) or a batch of points (shape ``(m, n)``)."""
        x = np.asarray(x, dtype=float)
        exps, coeffs = self._compiled
        single = x.ndim == 1
        pts = x[None, :] if single else x
        if not len(coeffs):
            out = np.zeros(pts.shape[0])
        else:
            mons = np.prod(pts[:, None, :] ** exps[None, :, :], axis=2)
            out = mons @ coeffs
        return out[0] if single else out

    def evaluate_exact(self, x: Sequence[Fraction]) -> Fraction:
        total = Fraction(0)
        for e, c in self.terms.items():
            t = c
            for xi, ei in zip(x, e):
                if ei:
                    t *= _frac(xi) ** ei
            total += t
        return total

    def to_str(self, names=None):
        names = names or [f"x{i}" for i in range(self.nvars)]
        if not self.terms:
            return "0"
        parts = []
        for e, c in self.terms.items():
            mon = "*".join(
                n if p == 1 else f"{n}^{p}" for n, p in zip(names, e) if p
            )
            mag = abs(c)
            if mon and mag == 1:
                body = mon
            elif mon:
                body = f"{mag}*{mon}"
            else:
                body = str(mag)
            sign = "-" if c < 0 else "+"
            parts.append((sign, body))
        first_sign, first = parts[0]
        s = ("-" if first_sign == "-" else "") + first
        for sign, body in parts[1:]:
            s += f" {sign} {body}"
        return s

    def __str__(self):
        return self.to_str()

    def __repr__(self):
        return f"MultiPoly({self.to_str()!r}, nvars={self.nvars})"


class RationalFn:
    """Quotient of two :class:`MultiPoly`; no cancellation is attempted."""

    __slots__ = ("numerator", "denominator", "__dict__")

    def __init__(self, numerator: MultiPoly, denominator: MultiPoly | None = None):
        if denominator is None:
            denominator = MultiPoly.constant(1, numerator.nvars)
        if denominator.is_zero():
            raise ZeroDivisionError("rational function with zero denominator")
        if denominator.is_constant():
            numerator = numerator * (1 / denominator.constant_value())
            denominator = MultiPoly.constant(1, numerator.nvars)
        self.numerator = numerator
        self.denominator = denominator

    @property
    def nvars(self):
        return self.numerator.nvars

    @classmethod
    def constant(cls, c, nvars):
        return cls(MultiPoly.constant(c, nvars))

    def is_polynomial(self):
        return self.denominator.is_constant()

    def is_zero(self):
        return self.numerator.is_zero()

    def _coerce(self, other):
        if isinstance(other, RationalFn):
            return other
        if isinstance(other, MultiPoly):
            return RationalFn(other)
        return RationalFn.constant(other, self.nvars)

    def __add__(self, other):
        other = self._coerce(other)
        if self.denominator == other.denominator:
            return RationalFn(self.numerator + other.numerator, self.denominator)
        return RationalFn(
            self.numerator * other.denominator + other.numerator * self.denominator,
            self.denominator * other.denominator,
        )

    __radd__ = __add__

    def __neg__(self):
        return RationalFn(-self.numerator, self.denominator)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        if other.is_polynomial():
            return RationalFn(self.numerator * other.numerator, self.denominator)
        if self.is_polynomial():
            return RationalFn(self.numerator * other.numerator, other.denominator)
        return RationalFn(
            self.numerator * other.numerator, self.denominator * other.denominator
        )

    __rmul__ = __mul__

    def diff(self, i: int) -> "RationalFn":
        n, d = self.numerator, self.denominator
        if d.is_constant():
            return RationalFn(n.diff(i), d)
        dd = d.diff(i)
        if dd.is_zero():
            return RationalFn(n.diff(i), d)
        return RationalFn(n.diff(i) * d - n * dd, d * d)

    def __call__(self, x, index=None):
        x = np.asarray(x, dtype=float)
        num = self.numerator(x)
        if self.is_polynomial():
            return num
        den = self.denominator(x)
        if np.any(den == 0):
            raise DenominatorZero(index, x.tolist())
        return num / den

    def __eq__(self, other):
        if not isinstance(other, RationalFn):
            return NotImplemented
        return self.numerator * other.denominator == other.numerator * self.denominator

    def __hash__(self):
        return hash((self.numerator, self.denominator))

    def to_str(self, names=None):
        num = self.numerator.to_str(names)
        if self.is_polynomial():
            return num
        return f"({num}) / ({self.denominator.to_str(names)})"

    def __str__(self):
        return self.to_str()

    def __repr__(self):
        return f"RationalFn({self.to_str()!r})"


@dataclass(frozen=True, eq=False)
class RationalVectorField:
    """Vector field of type ``alpha`` and order ``k + 1``."""

    components: tuple[RationalFn, ...]
    alpha: tuple[int, ...]
    k: Fraction
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "alpha", tuple(int(a) for a in self.alpha))
        object.__setattr__(self, "k", _frac(self.k))
        n = len(self.components)
        if len(self.alpha) != n:
            raise ValueError(f"alpha has length {len(self.alpha)} but field has {n} components")
        if any(a < 0 for a in self.alpha) or not any(self.alpha):
            raise ValueError("alpha must be nonnegative and not identically zero")
        if self.k <= 0:
            raise ValueError("order parameter k must be positive")
        if any(c.nvars != n for c in self.components):
            raise ValueError("every component must be a function of all n variables")
        if self.names is None:
            object.__setattr__(self, "names", tuple(f"x{i}" for i in range(n)))

    @property
    def n(self):
        return len(self.components)

    @property
    def Lambda(self) -> np.ndarray:
        return np.diag(np.array(self.alpha, dtype=float))

    def __call__(self, point):
        return evaluate(self, point)

    @cached_property
    def jacobian(self):
        return jacobian(self)

    def jacobian_at(self, point) -> np.ndarray:
        point = np.asarray(point, dtype=float)
        return np.array(
            [[entry(point, index=i) for entry in row] for i, row in enumerate(self.jacobian)]
        )

    def to_str(self):
        return "\n".join(
            f"{name}' = {c.to_str(self.names)}" for name, c in zip(self.names, self.components)
        )


def polynomial_field(polys: Sequence[MultiPoly], alpha, k, names=None) -> RationalVectorField:
    return RationalVectorField(tuple(RationalFn(p) for p in polys), alpha, k, names)


def evaluate(field: RationalVectorField, point) -> np.ndarray:
    """Evaluate every component at ``point``; batches of points are accepted too."""
    point = np.asarray(point, dtype=float)
    if point.shape[-1] != field.n:
        raise ValueError(f"point has dimension {point.shape[-1]}, field has {field.n}")
    vals = [c(point, index=i) for i, c in enumerate(field.components)]
    return np.stack(vals, axis=-1)


def jacobian(field: RationalVectorField) -> tuple[tuple[RationalFn, ...], ...]:
    """Symbolic Jacobian ``D f = (d f_i / d y_l)``."""
    return tuple(tuple(c.diff(l) for l in range(field.n)) for c in field.components)


@dataclass(frozen=True, eq=False)
class QHDecomposition:
    field: RationalVectorField
    qh_part: RationalVectorField
    residual_part: RationalVectorField
    # For each component, the weight deficit k + alpha_i - w of every residual term.
    residual_deficits: tuple[tuple[Fraction, ...], ...] = dc_field(default=())

    @property
    def alpha(self):
        return self.field.alpha

    @property
    def k(self):
        return self.field.k

    @property
    def n(self):
        return self.field.n

    def recombine(self) -> RationalVectorField:
        comps = tuple(q + r for q, r in zip(self.qh_part.components, self.residual_part.components))
        return RationalVectorField(comps, self.alpha, self.k, self.field.names)


def _denominator_weight(den: MultiPoly, alpha, index) -> Fraction:
    ws = den.weights(alpha)
    if len(ws) != 1:
        raise MixedDenominator(
            f"denominator of component {index} is not quasi-homogeneous: weights {sorted(ws)}"
        )
    return ws.pop()


def decompose(field: RationalVectorField) -> QHDecomposition:
    """Split ``f = f_qh + f_res`` by weighted degree, component by component."""
    alpha, k, n = field.alpha, field.k, field.n
    qh, res, deficits = [], [], []
    for i, comp in enumerate(field.components):
        target = k + alpha[i]
        w_den = _denominator_weight(comp.denominator, alpha, i)
        top, low, defs = {}, {}, []
        for exp, c in comp.numerator.terms.items():
            w = comp.numerator.weight(exp, alpha) - w_den
            if w == target:
                top[exp] = c
            elif w < target:
                low[exp] = c
                defs.append(target - w)
            else:
                raise NotAsymptoticallyQH(
                    f"component {i}: term with weight {w} exceeds k + alpha_i = {target}"
                )
        qh.append(RationalFn(MultiPoly(top, n), comp.denominator))
        res.append(RationalFn(MultiPoly(low, n), comp.denominator))
        deficits.append(tuple(sorted(set(defs))))
    return QHDecomposition(
        field,
        RationalVectorField(tuple(qh), alpha, k, field.names),
        RationalVectorField(tuple(res), alpha, k, field.names),
        tuple(deficits),
    )


@dataclass(frozen=True)
class QHIdentityReport:
    max_residual: tuple[float, ...]
    samples: int

    @property
    def worst(self):
        return max(self.max_residual, default=0.0)


def _random_points(rng, n, samples, scale=2.0):
    return rng.uniform(-scale, scale, size=(samples, n))


def verify_qh_identity(decomp: QHDecomposition, samples: int = 100, seed=0) -> QHIdentityReport:
    """Max of ``|sum_l alpha_l y_l d f_i/d y_l - (k + alpha_i) f_i|`` over random points."""
    qh = decomp.qh_part
    rng = np.random.default_rng(seed)
    alpha = np.array(qh.alpha, dtype=float)
    k = float(qh.k)
    worst = np.zeros(qh.n)
    used = 0
    while used < samples:
        y = _random_points(rng, qh.n, 1)[0]
        try:
            f = evaluate(qh, y)
            J = qh.jacobian_at(y)
        except DenominatorZero:
            continue
        lhs = J @ (alpha * y)
        rhs = (k + alpha) * f
        worst = np.maximum(worst, np.abs(lhs - rhs))
        used += 1
    return QHIdentityReport(tuple(float(w) for w in worst), samples)
