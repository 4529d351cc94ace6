"""Random quasi-homogeneous polynomial fields for property tests."""

import itertools


from qhblowup.field import MultiPoly, polynomial_field


def qh_monomials(alpha, target, max_deg=6):
    """Exponent vectors e with <alpha, e> == target."""
    n = len(alpha)
    out = []
    for e in itertools.product(range(max_deg + 1), repeat=n):
        if sum(a * x for a, x in zip(alpha, e)) == target:
            out.append(e)
    return out


def random_qh_field(rng, n=None, max_terms=3):
    """Random polynomial field of type alpha and order k + 1 with small integer coefficients."""
    if n is None:
        n = int(rng.integers(2, 4))
    while True:
        alpha = tuple(int(a) for a in rng.integers(1, 3, size=n))
        k = int(rng.integers(1, 3))
        polys = []
        for i in range(n):
            mons = qh_monomials(alpha, k + alpha[i])
            pick = rng.choice(len(mons), size=min(max_terms, len(mons)), replace=False)
            terms = {}
            for j in pick:
                c = int(rng.integers(-3, 4))
                if c:
                    terms[mons[j]] = c
            polys.append(MultiPoly(terms, n))
        if all(p.terms for p in polys):
            return polynomial_field(polys, alpha, k)
