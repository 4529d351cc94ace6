"""Flows of the desingularized field, blow-up times and expansion residuals."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .compactify import CompactifiedSystem, P_value, compactify_point, time_rescale_factor
from .errors import DegenerateFit, DenominatorZero, NotConverging, StepSizeUnderflow
from .field import RationalVectorField

# Dormand-Prince 5(4) tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_E = _B - np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
# continuous extension: b_i(s) = sum_j _P[i, j] s^(j+1)
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


def dopri5(fun, t0, y0, t_end, rtol=1e-10, atol=1e-12, h0=None, sample_times=None, max_steps=10**6):
    """Adaptive Dormand-Prince integration of y' = fun(t, y).

    Returns (step times, step states, samples) where samples are dense-output
    values at ``sample_times`` (which must lie in [t0, t_end]).
    """
    y = np.array(y0, dtype=float)
    t = float(t0)
    f = fun(t, y)
    if h0 is None:
        scale = atol + rtol * np.abs(y)
        d0 = np.sqrt(np.mean((y / scale) ** 2))
        d1 = np.sqrt(np.mean((f / scale) ** 2))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h = min(h0, t_end - t) if t_end > t else 0.0
    ts, ys = [t], [y.copy()]
    sample_times = np.asarray(sample_times if sample_times is not None else [], dtype=float)
    samples = np.empty((len(sample_times), len(y)))
    si = 0
    while si < len(sample_times) and sample_times[si] <= t:
        samples[si] = y
        si += 1
    K = np.empty((7, len(y)))
    steps = 0
    while t < t_end:
        if steps > max_steps:
            raise StepSizeUnderflow(f"step budget exhausted at t = {t}")
        h = min(h, t_end - t)
        if h <= 1e-14 * max(1.0, abs(t)):
            raise StepSizeUnderflow(f"step size {h:.3e} underflows at t = {t}")
        K[0] = f
        for i in range(1, 7):
            K[i] = fun(t + _C[i] * h, y + h * (np.array(_A[i]) @ K[:i]))
        y_new = y + h * (_B @ K)
        err = h * (_E @ K)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        en = math.sqrt(np.mean((err / scale) ** 2)) if len(y) else 0.0
        if en <= 1.0:
            t_new = t + h
            while si < len(sample_times) and sample_times[si] <= t_new:
                s = (sample_times[si] - t) / h
                coeffs = _P @ np.array([s, s**2, s**3, s**4])
                samples[si] = y + h * (coeffs @ K)
                si += 1
            t, y, f = t_new, y_new, K[6].copy()
            ts.append(t)
            ys.append(y.copy())
            steps += 1
            fac = 10.0 if en == 0 else min(10.0, 0.9 * en ** -0.2)
        else:
            fac = max(0.2, 0.9 * en ** -0.2)
        h *= fac
    return np.array(ts), np.array(ys), samples


@dataclass
class Trajectory:
    tau: np.ndarray
    states: np.ndarray
    t_physical: np.ndarray
    P: np.ndarray
    G: np.ndarray
    log_kappa: np.ndarray
    step_tau: np.ndarray
    step_states: np.ndarray

    def to_csv(self, path, names=None):
        names = names or [f"x{i}" for i in range(self.states.shape[1])]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau", "t"] + list(names) + ["p", "G"])
            for i in range(len(self.tau)):
                p = self.P[i] ** (1.0 / self.two_c) if self.P[i] > 0 else 0.0
                w.writerow(
                    [f"{self.tau[i]:.15g}", f"{self.t_physical[i]:.15g}"]
                    + [f"{v:.15g}" for v in self.states[i]]
                    + [f"{p:.15g}", f"{self.G[i]:.15g}"]
                )

    two_c: int = 2


def _augmented(sys: CompactifiedSystem):
    n = sys.n

    def fun(_, z):
        x = z[:n]
        out = np.empty(n + 1)
        out[:n] = sys.g_value(x)
        out[n] = time_rescale_factor(x, sys)
        return out

    return fun


def integrate(sys: CompactifiedSystem, x0, tau_end, rtol=1e-10, atol=1e-12, t0=0.0,
              sample_dt=None) -> Trajectory:
    """Integrate x' = g(x) together with t' = dt/dtau, sampling on a uniform tau grid."""
    x0 = np.asarray(x0, dtype=float)
    if P_value(x0, sys.compact) > 1 + 1e-12:
        raise ValueError("initial point lies outside the closed disk p(x) <= 1")
    n = sys.n
    if sample_dt is None:
        sample_dt = min(0.01, tau_end / 1000) if tau_end > 0 else 1.0
    count = int(math.floor(tau_end / sample_dt + 1e-9)) + 1 if tau_end > 0 else 1
    taus = np.arange(count) * sample_dt
    z0 = np.concatenate([x0, [t0]])
    st, sz, samples = dopri5(_augmented(sys), 0.0, z0, tau_end, rtol, atol, sample_times=taus)
    states = samples[:, :n]
    P = P_value(states, sys.compact)
    with np.errstate(divide="ignore"):
        logk = np.where(P < 1, -np.log1p(-np.minimum(P, 1.0)), np.inf)
    G = np.asarray(sys.G_value(states), dtype=float)
    return Trajectory(taus, states, samples[:, n], P, G, logk, st, sz[:, :n], 2 * sys.c)


def monitor_lemma_G(traj: Trajectory, min_gap=1e-2) -> float:
    """Largest |d(log kappa)/dtau - G(x)| over samples with 1 - p^(2c) > min_gap.

    The derivative is a five-point central difference on the uniform sample grid.
    """
    tau, lk, G = traj.tau, traj.log_kappa, traj.G
    if len(tau) < 5:
        return 0.0
    h = tau[1] - tau[0]
    worst = 0.0
    for i in range(2, len(tau) - 2):
        if not all(1 - traj.P[j] > min_gap for j in range(i - 2, i + 3)):
            continue
        d = (lk[i - 2] - 8 * lk[i - 1] + 8 * lk[i + 1] - lk[i + 2]) / (12 * h)
        worst = max(worst, abs(d - G[i]))
    return worst


@dataclass
class BlowUpTimeEstimate:
    t_max: float
    tail_bound: float
    converged: bool
    tau_end: float
    C_end: float


def _tmax_integrand(x, sys):
    return time_rescale_factor(x, sys)


def estimate_tmax(sys: CompactifiedSystem, x0, t0=0.0, rtol=1e-10, atol=1e-12, tau_chunk=10.0,
                  tail_tol=1e-10, tau_max=2000.0) -> BlowUpTimeEstimate:
    """t_max = t0 + int_0^inf (dt/dtau) dtau along the trajectory from x0.

    The integral is carried along with the state. Once the trajectory sits near
    the horizon the integrand decays like exp(-k C* tau); the remaining tail is
    added as integrand / (k G(x)).
    """
    z = np.concatenate([np.asarray(x0, dtype=float), [t0]])
    n = sys.n
    k = float(sys.k)
    fun = _augmented(sys)
    tau = 0.0
    while True:
        _, zs, _ = dopri5(fun, tau, z, tau + tau_chunk, rtol, atol)
        z = zs[-1]
        tau += tau_chunk
        x = z[:n]
        Q = 1 - float(P_value(x, sys.compact))
        Gx = float(sys.G_value(x))
        integrand = float(_tmax_integrand(x, sys))
        near = Q < 1e-2 and Gx > 0
        tail = integrand / (k * Gx) if near else math.inf
        if near and tail < tail_tol:
            return BlowUpTimeEstimate(float(z[n] + tail), tail, True, tau, Gx)
        if tau >= tau_max:
            if near:
                return BlowUpTimeEstimate(float(z[n] + tail), tail, False, tau, Gx)
            raise NotConverging(
                f"trajectory from {list(x0)} has not approached the horizon by tau = {tau}"
            )


def tmax_from_y(sys: CompactifiedSystem, y0, **kw) -> BlowUpTimeEstimate:
    return estimate_tmax(sys, compactify_point(y0, sys.compact), **kw)


def blowup_slopes(traj: Trajectory, sys: CompactifiedSystem, t_max, theta_window=(1e-7, 1e-3),
                  min_points=10):
    """Log-log slope of |y_i| against theta = t_max - t over the window, per component."""
    alpha = np.array(sys.alpha, dtype=float)
    theta = t_max - traj.t_physical
    mask = (theta > theta_window[0]) & (theta < theta_window[1]) & (traj.P < 1)
    if mask.sum() < min_points:
        raise DegenerateFit(f"only {int(mask.sum())} samples fall in the theta window")
    x = traj.states[mask]
    kap = 1.0 / (1.0 - traj.P[mask])
    y = x * kap[:, None] ** alpha
    lt = np.log(theta[mask])
    out = []
    for i in range(sys.n):
        yi = np.abs(y[:, i])
        if np.any(yi == 0):
            out.append(None)
            continue
        slope = np.polyfit(lt, np.log(yi), 1)[0]
        out.append(float(slope))
    return out


# ---------------------------------------------------------------------------
# truncated expansions


@dataclass
class ExpansionTerm:
    component: int
    coefficient: object  # mpmath number
    power: object  # mpmath number


def _mp_poly(poly, x):
    total = mpmath.mpf(0)
    for e, c in poly.terms.items():
        t = mpmath.mpf(c.numerator) / c.denominator
        for xi, ei in zip(x, e):
            if ei:
                t *= xi**ei
        total += t
    return total


def _mp_field(field: RationalVectorField, y):
    out = []
    for i, comp in enumerate(field.components):
        den = _mp_poly(comp.denominator, y)
        if den == 0:
            raise DenominatorZero(i, [float(v) for v in y])
        out.append(_mp_poly(comp.numerator, y) / den)
    return out


@dataclass
class ExpansionFit:
    component: int
    status: str  # "fit" or "exact"
    slope: float | None
    points: int
    residuals: list

    @property
    def monotone(self):
        r = [abs(v) for v in self.residuals]
        return all(a < b for a, b in zip(r, r[1:]))


def expansion_residual_order(field: RationalVectorField, expansion, t_max_ref=0.0,
                             window=(1e-6, 1e-2), npts=25, dps=50, min_points=12):
    """Fit the decay exponent of y' - f(y) for a truncated series in theta = t_max - t.

    ``expansion`` is a list of ExpansionTerm. Each component is
    y_i = sum c theta^p, differentiated term by term; the residual is evaluated
    in ``dps``-digit arithmetic so cancellation between large terms does not
    hide its true size. Residuals below 1e3 * eps * (size of the terms) are
    dropped before the least-squares fit. ``t_max_ref`` only shifts the time
    axis and does not enter the residual.
    """
    n = field.n
    with mpmath.workdps(dps):
        eps = mpmath.mpf(10) ** (-dps)
        thetas = [
            mpmath.mpf(window[0]) * (mpmath.mpf(window[1]) / window[0]) ** (mpmath.mpf(j) / (npts - 1))
            for j in range(npts)
        ]
        per_comp = [[] for _ in range(n)]
        for th in thetas:
            y = [mpmath.mpf(0)] * n
            dy = [mpmath.mpf(0)] * n
            size = [mpmath.mpf(0)] * n
            for term in expansion:
                i = term.component
                val = term.coefficient * th**term.power
                y[i] += val
                # d/dt = -d/dtheta
                dy[i] += -term.coefficient * term.power * th ** (term.power - 1)
                size[i] = max(size[i], abs(val) / th)
            f = _mp_field(field, y)
            for i in range(n):
                r = dy[i] - f[i]
                scale = max(size[i], abs(f[i]), abs(dy[i]))
                per_comp[i].append((th, r, scale))
        fits = []
        for i in range(n):
            rows = per_comp[i]
            usable = [(th, r) for th, r, sc in rows if abs(r) > 1e3 * eps * sc]
            resid = [float(r) for _, r, _ in rows]
            if not usable:
                fits.append(ExpansionFit(i, "exact", None, 0, resid))
                continue
            if len(usable) < min_points:
                raise DegenerateFit(
                    f"component {i}: only {len(usable)} residuals above roundoff"
                )
            lx = np.array([float(mpmath.log(th)) for th, _ in usable])
            ly = np.array([float(mpmath.log(abs(r))) for _, r in usable])
            slope = float(np.polyfit(lx, ly, 1)[0])
            fits.append(ExpansionFit(i, "fit", slope, len(usable), resid))
    return fits
