"""Balance-law roots, horizon equilibria and the correspondence between them.

A balance-law root Y0 solves -(1/k) Lambda Y0 + f_qh(Y0) = 0 and describes the
leading coefficients of a type-I blow-up. The same blow-up shows up as an
equilibrium x* of the desingularized field g on the horizon p(x) = 1. The two
are linked by x* = r^(-Lambda) Y0 with r = p(Y0) = (k C*)^(-1/k), and the
eigenstructures of A and Dg(x*) are linked through the projection P*.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .compactify import CompactifiedSystem, P_value, grad_p, p_value
from .errors import (
    BlowupError,
    DenominatorZero,
    GapViolated,
    NonPositiveCstar,
    NoConvergence,
    PairingFailed,
    ResidualTooLarge,
    SingularNewtonJacobian,
)
from .field import QHDecomposition, evaluate
from .spectral import DEFAULT_RANK_TOL, EigenData, eigen_decompose, subspace_angle

DEFAULT_SOLVE_TOL = 1e-11
DEDUPE_TOL = 1e-7
HYP_TOL = 1e-7
PAIR_TOL = 1e-6
ZERO_CSTAR_TOL = 1e-10
DEFAULT_SEED_COUNT = 64
DEGENERATE_TOL = 1e-5
DEGENERATE_MERGE = 1e-3


# ---------------------------------------------------------------------------
# Newton


def damped_newton(F, J, x0, tol, maxiter=200, max_halvings=30, step_tol=1e-12):
    """Newton iteration with backtracking on ||F||.

    Converged means ||F|| <= tol and the last Newton step was negligible, so
    that roots of higher multiplicity (where Newton is only linear) are still
    located to full accuracy rather than abandoned once ||F|| is small.
    ``F`` may raise ``ValueError`` or ``DenominatorZero`` outside its domain;
    such trial points are treated as infinitely bad by the line search.
    """
    x = np.array(x0, dtype=float)
    fx = F(x)
    nf = np.linalg.norm(fx)
    for it in range(maxiter):
        if nf == 0.0:
            return x, nf, it
        Jx = J(x)
        try:
            if Jx.size and np.linalg.cond(Jx) > 1e14:
                raise np.linalg.LinAlgError
            step = np.linalg.solve(Jx, -fx) if Jx.size else np.zeros(0)
        except np.linalg.LinAlgError:
            if nf <= tol:
                return x, nf, it
            raise SingularNewtonJacobian(x.tolist()) from None
        if nf <= tol and np.linalg.norm(step) <= step_tol * max(1.0, np.linalg.norm(x)):
            return x + step, nf, it
        t = 1.0
        for _ in range(max_halvings):
            trial = x + t * step
            try:
                ft = F(trial)
                nt = np.linalg.norm(ft)
            except (ValueError, ZeroDivisionError, FloatingPointError):
                nt = np.inf
            if np.isfinite(nt) and nt < (1 - 1e-4 * t) * nf:
                break
            t *= 0.5
        else:
            # no decrease possible: accept if we are already at roundoff level
            if nf <= tol:
                return x, nf, it
            raise NoConvergence(f"line search stalled at {x.tolist()} with |F| = {nf:.3e}")
        x, fx, nf = trial, ft, nt
    if nf <= tol:
        return x, nf, maxiter
    raise NoConvergence(f"Newton did not converge from {list(x0)} (|F| = {nf:.3e})")


def _dedupe(points, key=lambda p: p):
    kept = []
    for p in points:
        v = key(p)
        if all(np.linalg.norm(v - key(q)) > DEDUPE_TOL * max(1.0, np.linalg.norm(v)) for q in kept):
            kept.append(p)
    kept.sort(key=lambda p: tuple(np.round(key(p), 9)))
    return kept


def _halton(n, count, seed=0):
    sampler = qmc.Halton(d=max(n, 1), scramble=False)
    sampler.fast_forward(1 + seed)
    return sampler.random(count)


# ---------------------------------------------------------------------------
# balance law


@dataclass
class BalanceRoot:
    Y0: np.ndarray
    residual: float
    A: np.ndarray
    A_eigen: EigenData
    r: float

    @property
    def n(self):
        return len(self.Y0)


def balance_residual(decomp: QHDecomposition, Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    alpha = np.array(decomp.alpha, dtype=float)
    return -alpha * Y / float(decomp.k) + evaluate(decomp.qh_part, Y)


def balance_matrix(decomp: QHDecomposition, Y) -> np.ndarray:
    """A = -(1/k) Lambda + Df_qh(Y)."""
    alpha = np.array(decomp.alpha, dtype=float)
    return -np.diag(alpha) / float(decomp.k) + decomp.qh_part.jacobian_at(Y)


def make_root(decomp, compact, Y0, rank_tol=DEFAULT_RANK_TOL) -> BalanceRoot:
    Y0 = np.asarray(Y0, dtype=float)
    A = balance_matrix(decomp, Y0)
    return BalanceRoot(
        Y0,
        float(np.linalg.norm(balance_residual(decomp, Y0))),
        A,
        eigen_decompose(A, rank_tol),
        float(p_value(Y0, compact)),
    )


def default_balance_seeds(alpha, count=DEFAULT_SEED_COUNT, seed=0):
    """Quasi-random points on weighted spheres of radius in [1/8, 8]."""
    n = len(alpha)
    u = _halton(n + 1, count, seed)
    alpha = np.array(alpha, dtype=float)
    active = alpha > 0
    c = math.lcm(*[int(a) for a in alpha if a])
    beta2 = np.where(active, 2 * c / np.where(active, alpha, 1), 0)
    seeds = []
    for row in u:
        z = 2 * row[:n] - 1
        z = np.where(active, z, 4 * z)
        P = np.sum(np.abs(z[active]) ** beta2[active])
        if P < 1e-12:
            continue
        s = P ** (-1 / (2 * c))
        radius = 8.0 ** (2 * row[n] - 1)
        seeds.append(np.where(active, z * (s * radius) ** alpha, z))
    return seeds


def solve_balance(decomp: QHDecomposition, compact, seeds=None, solve_tol=DEFAULT_SOLVE_TOL,
                  rank_tol=DEFAULT_RANK_TOL):
    """Newton from every seed; returns (sorted distinct roots, per-seed failures)."""
    if seeds is None:
        seeds = default_balance_seeds(decomp.alpha)
    F = lambda Y: balance_residual(decomp, Y)
    J = lambda Y: balance_matrix(decomp, Y)
    found, failures = [], []
    for s in seeds:
        s = np.asarray(s, dtype=float)
        try:
            Y, _, _ = damped_newton(F, J, s, solve_tol)
        except (BlowupError, FloatingPointError) as exc:
            failures.append((s.tolist(), exc.name if isinstance(exc, BlowupError) else "NoConvergence"))
            continue
        if not np.all(np.isfinite(Y)):
            continue
        # the trivial root and roots with no active part do not describe blow-up
        if p_value(Y, compact) <= 1e-6 * max(1.0, np.linalg.norm(Y)):
            continue
        found.append(Y)
    roots = [make_root(decomp, compact, Y, rank_tol) for Y in _dedupe(found)]
    return roots, failures


# ---------------------------------------------------------------------------
# horizon equilibria


@dataclass
class HorizonEquilibrium:
    x_star: np.ndarray
    C_star: float
    r: float
    Dg: np.ndarray
    Dg_eigen: EigenData
    A_g: np.ndarray
    P_star: np.ndarray
    v_star: np.ndarray
    grad_p: np.ndarray
    invariants: dict
    flags: tuple = ()

    @property
    def n(self):
        return len(self.x_star)

    @property
    def forward(self):
        return self.C_star > ZERO_CSTAR_TOL


def make_equilibrium(sys: CompactifiedSystem, x, rank_tol=DEFAULT_RANK_TOL) -> HorizonEquilibrium:
    x = np.asarray(x, dtype=float)
    n = len(x)
    alpha = np.array(sys.alpha, dtype=float)
    k = float(sys.k)
    C = float(sys.G_value(x))
    v = alpha * x
    gp = grad_p(x, sys.compact)
    Pst = np.outer(v, gp)
    Dg = sys.Dg(x)
    A_g = -C * np.diag(alpha) + sys.base.qh_part.jacobian_at(x)
    r = (k * C) ** (-1 / k) if C > 0 else math.nan
    flags = []
    if C < -ZERO_CSTAR_TOL:
        flags.append("NegativeCstar")
    elif abs(C) <= ZERO_CSTAR_TOL:
        flags.append("ZeroCstar")
    I = np.eye(n)
    nv = max(np.linalg.norm(v), 1e-300)
    inv = {
        "g_residual": float(np.linalg.norm(sys.g_value(x))),
        "horizon_residual": float(abs(p_value(x, sys.compact) - 1)),
        "gradp_v_minus_1": float(abs(gp @ v - 1)),
        "projection_idempotency": float(np.linalg.norm(Pst @ Pst - Pst)),
        "Ag_eigenpair": float(np.linalg.norm(A_g @ v - k * C * v) / nv),
        "fqh_minus_C_Lambda_x": float(
            np.linalg.norm(evaluate(sys.base.qh_part, x) - C * v)
        ),
        "Dg_eigenpair": float(np.linalg.norm(Dg @ v + C * v) / nv),
        "Dg_decomposition": float(np.linalg.norm(Dg - ((I - Pst) @ A_g - C * Pst))),
    }
    return HorizonEquilibrium(
        x, C, r, Dg, eigen_decompose(Dg, rank_tol), A_g, Pst, v, gp, inv, tuple(flags)
    )


# invariants that depend on Assumption 3 holding with a margin
ASSUMPTION_DEPENDENT = ("Dg_eigenpair", "Dg_decomposition")


def equilibrium_failures(eq: HorizonEquilibrium, assumption="ok", solve_tol=1e-9):
    limits = {
        "g_residual": max(solve_tol, 1e-9),
        "horizon_residual": 1e-12,
        "gradp_v_minus_1": 1e-9,
        "projection_idempotency": 1e-10,
        "Ag_eigenpair": 1e-8,
        "fqh_minus_C_Lambda_x": 1e-9,
        "Dg_eigenpair": 1e-8,
        "Dg_decomposition": 1e-8,
    }
    scale = max(1.0, np.linalg.norm(eq.Dg), np.linalg.norm(eq.A_g))
    out = {}
    for name, val in eq.invariants.items():
        if assumption != "ok" and name in ASSUMPTION_DEPENDENT:
            continue
        lim = limits[name]
        if name in ("Dg_decomposition", "Ag_eigenpair", "Dg_eigenpair"):
            lim *= scale
        if not val <= lim:
            out[name] = val
    return out


def _onto_horizon(x, compact):
    """Scale x along alpha-weights so that p(x) = 1."""
    P = float(P_value(x, compact))
    if P <= 0:
        return None
    s = P ** (-1 / (2 * compact.c))
    return x * s ** np.array(compact.alpha, dtype=float)


def default_horizon_seeds(compact, count=DEFAULT_SEED_COUNT, seed=0):
    n = compact.n
    if sum(compact.active) == 1 and n == 1:
        return [np.array([1.0]), np.array([-1.0])]
    u = _halton(n, count, seed)
    seeds = []
    for row in u:
        z = 2 * row - 1
        z = np.where(compact.active, z, 4 * z)
        h = _onto_horizon(z, compact)
        if h is not None:
            seeds.append(h)
    return seeds


class _Chart:
    """Horizon chart solving p(x) = 1 for one active coordinate m."""

    def __init__(self, sys, m, sign):
        self.sys = sys
        self.m = m
        self.sign = sign
        self.free = [i for i in range(sys.n) if i != m]
        self.b2m = 2 * sys.compact.beta[m]

    def lift(self, z):
        x = np.empty(self.sys.n)
        x[self.free] = z
        x[self.m] = 0.0
        rest = 1.0 - float(P_value(x, self.sys.compact))
        if rest < 0:
            raise ValueError("point leaves the horizon chart")
        x[self.m] = self.sign * rest ** (1.0 / self.b2m)
        return x

    def F(self, z):
        x = self.lift(z)
        return self.sys.g_value(x)[self.free]

    def J(self, z):
        x = self.lift(z)
        D = self.sys.Dg(x)
        comp = self.sys.compact
        b2 = np.array([2 * b for b in comp.beta])
        dP = np.array([b2[i] * x[i] ** (b2[i] - 1) if comp.active[i] else 0.0 for i in range(len(x))])
        if dP[self.m] == 0:
            raise SingularNewtonJacobian(x.tolist(), "chart coordinate vanished")
        dxm = -dP[self.free] / dP[self.m]
        return D[np.ix_(self.free, self.free)] + np.outer(D[self.free, self.m], dxm)


def find_horizon_equilibria(sys: CompactifiedSystem, seeds=None, solve_tol=DEFAULT_SOLVE_TOL,
                            rank_tol=DEFAULT_RANK_TOL):
    """Equilibria of g on p(x) = 1 from every seed; returns (equilibria, failures)."""
    comp = sys.compact
    if seeds is None:
        seeds = default_horizon_seeds(comp)
    active = [i for i in range(sys.n) if comp.active[i]]
    found, failures = [], []
    for s in seeds:
        s = _onto_horizon(np.asarray(s, dtype=float), comp)
        if s is None:
            continue
        m = max(active, key=lambda i: abs(s[i]))
        chart = _Chart(sys, m, 1.0 if s[m] >= 0 else -1.0)
        try:
            z, _, _ = damped_newton(chart.F, chart.J, s[chart.free], solve_tol)
            x = chart.lift(z)
            res = float(np.linalg.norm(sys.g_value(x)))
            if res > max(1e-9, 10 * solve_tol):
                raise NoConvergence(f"full residual too large at {x.tolist()}")
            Jc = chart.J(z)
            smin = float(np.linalg.svd(Jc, compute_uv=False)[-1]) if Jc.size else 1.0
        except (BlowupError, ValueError, FloatingPointError) as exc:
            name = exc.name if isinstance(exc, BlowupError) else "NoConvergence"
            failures.append((s.tolist(), name))
            continue
        found.append((x, res, smin < DEGENERATE_TOL))
    eqs = []
    for x in _merge_candidates(found):
        try:
            eqs.append(make_equilibrium(sys, x, rank_tol))
        except DenominatorZero as exc:
            failures.append((x.tolist(), exc.name))
    return eqs, failures


def _merge_candidates(found):
    """Dedupe Newton end points.

    Near a degenerate equilibrium Newton converges only linearly and stops at
    scattered points around it, so those are merged with a loose radius and
    the candidate with the smallest residual is kept.
    """
    kept = []
    for x, res, degenerate in sorted(found, key=lambda t: t[1]):
        dup = False
        for y, _, ydeg in kept:
            tol = DEGENERATE_MERGE if (degenerate or ydeg) else DEDUPE_TOL * max(1.0, np.linalg.norm(x))
            if np.linalg.norm(x - y) <= tol:
                dup = True
                break
        if not dup:
            kept.append((x, res, degenerate))
    xs = [x for x, _, _ in kept]
    xs.sort(key=lambda p: tuple(np.round(p, 9)))
    return xs


# ---------------------------------------------------------------------------
# the two maps


def root_to_equilibrium(root: BalanceRoot, sys: CompactifiedSystem, rank_tol=DEFAULT_RANK_TOL,
                        tol=1e-9) -> HorizonEquilibrium:
    """x* = r^(-Lambda) Y0 with r = p(Y0)."""
    r = root.r
    if not r > 0:
        raise ResidualTooLarge("root has no active component")
    alpha = np.array(sys.alpha, dtype=float)
    x = root.Y0 * r ** (-alpha)
    res = float(np.linalg.norm(sys.g_value(x)))
    if res > tol * max(1.0, np.linalg.norm(root.Y0)):
        raise ResidualTooLarge(f"g(x*) = {res:.3e} at the image of the root")
    return make_equilibrium(sys, x, rank_tol)


def equilibrium_to_root(eq: HorizonEquilibrium, sys: CompactifiedSystem,
                        rank_tol=DEFAULT_RANK_TOL, tol=1e-9) -> BalanceRoot:
    """Y0 = r^Lambda x* with r = (k C*)^(-1/k)."""
    if not eq.C_star > 0:
        raise NonPositiveCstar(f"C* = {eq.C_star}")
    k = float(sys.k)
    r = (k * eq.C_star) ** (-1 / k)
    alpha = np.array(sys.alpha, dtype=float)
    Y0 = eq.x_star * r ** alpha
    root = make_root(sys.base, sys.compact, Y0, rank_tol)
    if root.residual > tol * max(1.0, np.linalg.norm(Y0)):
        raise ResidualTooLarge(f"balance residual {root.residual:.3e} at the image of x*")
    return root


# ---------------------------------------------------------------------------
# verdicts


@dataclass
class Verdict:
    status: str
    reasons: list
    rates: list

    def to_dict(self):
        return {"status": self.status, "reasons": list(self.reasons), "rates": list(self.rates)}


def existence_verdict(root: BalanceRoot, sys: CompactifiedSystem, hyp_tol=HYP_TOL) -> Verdict:
    reasons = []
    hyperbolic = root.A_eigen.min_abs_real() > hyp_tol
    if not hyperbolic:
        reasons.append("A has an eigenvalue on the imaginary axis")
    if sys.assumption != "ok":
        reasons.append(f"residual decay assumption is {sys.assumption}")
    if sys.assumption != "ok":
        status = "AssumptionViolated"
    elif not hyperbolic:
        status = "NotHyperbolic"
    else:
        status = "BlowUpProven"
    k = sys.k
    scale = max(1.0, np.linalg.norm(root.Y0))
    rates = []
    for i, (y, a) in enumerate(zip(root.Y0, sys.alpha)):
        if abs(y) > 1e-10 * scale:
            rates.append({"component": i, "coefficient": float(y), "exponent": float(-a / k)})
        else:
            rates.append({"component": i, "coefficient": None, "exponent": None,
                          "note": "rate-undetermined"})
    return Verdict(status, reasons, rates)


def stability_gap(root: BalanceRoot, eq: HorizonEquilibrium, check=True, hyp_tol=HYP_TOL):
    """(m, m_A): stable counts of Dg(x*) and of A; m = m_A + 1 under hyperbolicity."""
    m = eq.Dg_eigen.count_stable(hyp_tol)
    m_A = root.A_eigen.count_stable(hyp_tol)
    if check and m != m_A + 1:
        raise GapViolated(f"m = {m}, m_A = {m_A}")
    return m, m_A


# ---------------------------------------------------------------------------
# correspondence


def vector_level(M, value, v, tol=1e-6):
    """Smallest N with (M - value)^N v = 0 numerically, or None."""
    n = M.shape[0]
    B = M - value * np.eye(n)
    scale = max(1.0, np.linalg.norm(M, 2))
    w = np.asarray(v, dtype=complex if np.iscomplexobj(v) or np.iscomplexobj(value) else float)
    nv = np.linalg.norm(w)
    if nv == 0:
        return 0
    w = w / nv
    for N in range(1, n + 1):
        w = B @ w
        if np.linalg.norm(w) <= tol * scale**N:
            return N
    return None


def _match_values(src, dst):
    """Greedy nearest matching; returns the worst relative distance."""
    dst = list(dst)
    worst = 0.0
    for s in sorted(src, key=lambda z: (z.real, z.imag)):
        if not dst:
            return math.inf
        j = min(range(len(dst)), key=lambda i: abs(dst[i] - s))
        worst = max(worst, abs(dst[j] - s) / max(1.0, abs(s)))
        dst.pop(j)
    return worst


def _remove_nearest(values, target):
    values = list(values)
    j = min(range(len(values)), key=lambda i: abs(values[i] - target))
    values.pop(j)
    return values


@dataclass
class PairReport:
    root: BalanceRoot
    equilibrium: HorizonEquilibrium
    residuals: dict
    vector_maps: list
    exception_branch: str | None
    verdict: Verdict
    gap: tuple | None
    gap_ok: bool | None
    failures: dict


@dataclass
class CorrespondenceReport:
    pairs: list
    assumption: str
    warnings: list = field(default_factory=list)

    @property
    def failures(self):
        out = {}
        for i, p in enumerate(self.pairs):
            for k, v in p.failures.items():
                out[f"pair{i}.{k}"] = v
        return out

    @property
    def stability(self):
        return [p.gap for p in self.pairs]

    @property
    def verdicts(self):
        return [p.verdict.status for p in self.pairs]


def _pair(root, eq, sys, rank_tol):
    k = float(sys.k)
    alpha = np.array(sys.alpha, dtype=float)
    n = len(alpha)
    I = np.eye(n)
    r = root.r
    C = eq.C_star
    A, Dg, A_g, Pst = root.A, eq.Dg, eq.A_g, eq.P_star
    ok = sys.assumption == "ok"
    scaleA = max(1.0, np.linalg.norm(A))
    scaleD = max(1.0, np.linalg.norm(Dg), np.linalg.norm(A_g))
    res = {}
    dep = set()

    res["r_match"] = abs(r - eq.r) / max(1.0, r)
    lam_y = alpha * root.Y0
    res["A_eigenpair_1"] = np.linalg.norm(A @ lam_y - lam_y) / (np.linalg.norm(lam_y) * scaleA)
    res["A_fqh_eigenvector"] = np.linalg.norm(
        A @ evaluate(sys.base.qh_part, root.Y0) - evaluate(sys.base.qh_part, root.Y0)
    ) / (np.linalg.norm(lam_y) * scaleA)
    res["Dg_eigenpair_minusC"] = eq.invariants["Dg_eigenpair"] / scaleD
    dep.add("Dg_eigenpair_minusC")
    Rk = np.diag(r ** (k + alpha))
    Rinv = np.diag(r ** (-alpha))
    res["conjugacy"] = np.linalg.norm(A - Rk @ A_g @ Rinv) / scaleA
    res["intertwining"] = np.linalg.norm(Dg @ (I - Pst) - (I - Pst) @ A_g) / scaleD
    dep.add("intertwining")
    res["Dg_decomposition"] = eq.invariants["Dg_decomposition"] / scaleD
    dep.add("Dg_decomposition")

    # remaining eigenvalues: lambda = r^(-k) lambda~
    rem_A = _remove_nearest(root.A_eigen.eigenvalues, 1.0)
    rem_D = _remove_nearest(eq.Dg_eigen.eigenvalues, -C)
    res["eigenvalue_pairing"] = _match_values([z * r ** (-k) for z in rem_A], rem_D)
    dep.add("eigenvalue_pairing")

    # remaining (generalized) eigenvectors, both directions
    maps = []
    worst_vec = 0.0
    kC = k * C
    exception = []
    Rl = np.diag(r ** alpha)
    for cl in root.A_eigen.clusters:
        lt = cl.value
        is_exc = abs(lt - 1) <= 1e-6
        lam = lt * r ** (-k)
        for chain in cl.chains:
            for U in chain:
                U = np.asarray(U)
                if is_exc and subspace_angle(U, lam_y) <= 1e-6:
                    continue
                w = (I - Pst) @ Rinv @ U
                la = vector_level(A, lt, U)
                if np.linalg.norm(w) <= 1e-9 * np.linalg.norm(U):
                    ld = 0
                else:
                    ld = vector_level(Dg, lam, w)
                entry = {"direction": "A_to_Dg", "eigenvalue_A": lt, "eigenvalue_Dg": lam,
                         "level_A": la, "level_Dg": ld}
                if is_exc:
                    entry["branch"] = _branch(la, ld, "A_to_Dg")
                    exception.append(entry["branch"])
                elif ld != la:
                    worst_vec = max(worst_vec, 1.0)
                maps.append(entry)
    for cl in eq.Dg_eigen.clusters:
        lam = cl.value
        if abs(lam + C) <= 1e-6 * max(1.0, abs(C)) and abs(lam - kC) > 1e-6:
            # the common -C direction, plus possibly remaining vectors sharing that value
            vecs = [u for ch in cl.chains for u in ch if subspace_angle(u, eq.v_star) > 1e-6]
        else:
            vecs = [u for ch in cl.chains for u in ch]
        is_exc = abs(lam - kC) <= 1e-6 * max(1.0, kC)
        lt = lam * r**k
        for u in vecs:
            u = np.asarray(u)
            U = Rl @ (A_g - kC * I) @ u
            ld = vector_level(Dg, lam, u)
            if np.linalg.norm(U) <= 1e-9 * np.linalg.norm(u) * scaleD:
                la = 0
            else:
                la = vector_level(A, lt, U)
            entry = {"direction": "Dg_to_A", "eigenvalue_A": lt, "eigenvalue_Dg": lam,
                     "level_A": la, "level_Dg": ld}
            if is_exc:
                entry["branch"] = _branch(ld, la, "Dg_to_A")
                exception.append(entry["branch"])
            elif la != ld:
                worst_vec = max(worst_vec, 1.0)
            maps.append(entry)
    res["eigenvector_levels"] = worst_vec
    dep.add("eigenvector_levels")

    branch = None
    if exception:
        for b in ("UnresolvedDirection", "ChainShortened", "ChainExtended", "SameChain"):
            if b in exception:
                branch = b
                break

    verdict = existence_verdict(root, sys)
    hyperbolic = root.A_eigen.min_abs_real() > HYP_TOL
    gap = stability_gap(root, eq, check=False)
    gap_ok = (gap[0] == gap[1] + 1) if hyperbolic else None

    failures = {}
    for name, val in res.items():
        if not ok and name in dep:
            continue
        if not val <= PAIR_TOL:
            failures[name] = float(val)
    if ok and hyperbolic and not gap_ok:
        failures["stability_gap"] = float(gap[0] - gap[1])
    res = {k2: float(v) for k2, v in res.items()}
    return PairReport(root, eq, res, maps, branch, verdict, gap, gap_ok, failures)


def _branch(level_from, level_to, direction):
    if level_to == 0:
        return "UnresolvedDirection"
    if level_to is None or level_from is None:
        return "UnresolvedDirection"
    if level_to == level_from:
        return "SameChain"
    if direction == "A_to_Dg" and level_to == level_from - 1:
        return "ChainShortened"
    if direction == "Dg_to_A" and level_to == level_from + 1:
        return "ChainExtended"
    return "UnresolvedDirection"


def pair_up(roots, equilibria, sys, rank_tol=DEFAULT_RANK_TOL):
    """Match roots with forward-time equilibria through the two maps.

    A root whose image was not among the solved equilibria is paired with the
    image itself; likewise for equilibria without a matching root.
    """
    pairs = []
    used = set()
    forward = [e for e in equilibria if e.forward]
    for root in roots:
        try:
            img = root_to_equilibrium(root, sys, rank_tol)
        except BlowupError:
            continue
        match = None
        for j, e in enumerate(forward):
            if j not in used and np.linalg.norm(e.x_star - img.x_star) <= 1e-7:
                match = j
                break
        if match is not None:
            used.add(match)
            pairs.append((root, forward[match]))
        elif img.forward:
            pairs.append((root, img))
    for j, e in enumerate(forward):
        if j in used:
            continue
        try:
            pairs.append((equilibrium_to_root(e, sys, rank_tol), e))
        except BlowupError:
            continue
    pairs.sort(key=lambda p: tuple(np.round(p[1].x_star, 9)))
    return pairs


def build_correspondence(pairs, sys: CompactifiedSystem, rank_tol=DEFAULT_RANK_TOL,
                         raise_on_failure=False) -> CorrespondenceReport:
    reports = [_pair(root, eq, sys, rank_tol) for root, eq in pairs]
    rep = CorrespondenceReport(reports, sys.assumption, list(sys.warnings))
    if raise_on_failure and rep.failures:
        raise PairingFailed(rep.failures)
    return rep
