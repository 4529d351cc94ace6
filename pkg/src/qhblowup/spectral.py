"""Eigenvalues and Jordan chains of small dense real matrices.

Eigenvalues come from LAPACK (via numpy). Multiplicity decisions are made by
clustering the computed eigenvalues and then counting the nullities of
(M - mu I)^j with a rank tolerance, which is how the Jordan structure is read
off. Chains are built from the top level down.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_RANK_TOL = 1e-8
CLUSTER_TOL = 1e-7


def _svd_null(M, thresh):
    M = np.atleast_2d(M)
    _, s, vh = np.linalg.svd(M)
    rank = int(np.sum(s > thresh))
    return vh[rank:].conj().T, s


def nullspace(M, rank_tol=DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis (as columns) of the numerical kernel of ``M``.

    Singular values below ``rank_tol * sigma_max`` count as zero.
    """
    M = np.atleast_2d(np.asarray(M))
    _, s, _ = np.linalg.svd(M)
    smax = s[0] if len(s) else 0.0
    if smax == 0.0:
        return np.eye(M.shape[1], dtype=M.dtype)
    basis, _ = _svd_null(M, rank_tol * smax)
    return basis


def _orth(vectors, n, dtype):
    if not vectors:
        return np.zeros((n, 0), dtype=dtype)
    S = np.column_stack(vectors)
    u, s, _ = np.linalg.svd(S, full_matrices=False)
    if not len(s) or s[0] == 0:
        return np.zeros((n, 0), dtype=dtype)
    return u[:, s > 1e-10 * s[0]]


def _phase_scale(v):
    """Factor making v unit length with its largest entry real positive (first index on ties)."""
    mags = np.abs(v)
    i = int(np.argmax(mags > (1 - 1e-9) * mags.max()))
    return (abs(v[i]) / v[i]) / np.linalg.norm(v)


@dataclass
class EigenCluster:
    value: complex
    multiplicity: int
    chains: list = field(default_factory=list)
    nullities: list = field(default_factory=list)

    @property
    def is_real(self):
        return self.value.imag == 0.0

    @property
    def geometric_multiplicity(self):
        return len(self.chains)

    @property
    def chain_lengths(self):
        return sorted((len(c) for c in self.chains), reverse=True)

    @property
    def eigenvectors(self):
        return [c[0] for c in self.chains]


@dataclass
class EigenData:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    clusters: list
    condition: float
    rank_tol: float

    @property
    def n(self):
        return self.matrix.shape[0]

    def count_stable(self, tol=0.0):
        return int(np.sum(self.eigenvalues.real < -tol))

    def count_unstable(self, tol=0.0):
        return int(np.sum(self.eigenvalues.real > tol))

    def min_abs_real(self):
        return float(np.min(np.abs(self.eigenvalues.real)))

    def cluster_near(self, value, tol=1e-6):
        best, dist = None, np.inf
        for cl in self.clusters:
            d = abs(cl.value - value)
            if d < dist:
                best, dist = cl, d
        scale = max(1.0, abs(value))
        return best if dist <= tol * scale else None

    def chain_heads(self):
        return np.column_stack([c[0] for cl in self.clusters for c in cl.chains])

    def all_vectors(self):
        return np.column_stack([v for cl in self.clusters for c in cl.chains for v in c])


def _cluster(eigs, tol):
    # single linkage on the complex plane
    order = sorted(range(len(eigs)), key=lambda i: (eigs[i].real, eigs[i].imag))
    groups = []
    for i in order:
        placed = None
        for g in groups:
            if any(abs(eigs[i] - eigs[j]) <= tol for j in g):
                if placed is None:
                    g.append(i)
                    placed = g
                else:
                    placed.extend(g)
                    g.clear()
        groups = [g for g in groups if g]
        if placed is None:
            groups.append([i])
    return groups


def _merge_defective(M, eigs, groups, rank_tol, scale):
    """Merge nearby clusters that the rank test says form one defective eigenvalue.

    A Jordan block of size m perturbed by roundoff splits into m eigenvalues
    about (eps)^(1/m) apart, far more than the clustering tolerance. Groups
    within scale * rank_tol^(1/m) of each other are merged when
    (M - mu I)^m has m singular values below rank_tol * scale^m.
    """
    n = M.shape[0]
    merged = True
    while merged and len(groups) > 1:
        merged = False
        for a in range(len(groups)):
            for b in range(a + 1, len(groups)):
                g = groups[a] + groups[b]
                m = len(g)
                mu = complex(np.mean(eigs[g]))
                radius = max(abs(eigs[i] - mu) for i in g)
                if radius > scale * rank_tol ** (1.0 / m):
                    continue
                B = np.linalg.matrix_power(M - mu * np.eye(n), m)
                s = np.linalg.svd(B, compute_uv=False)
                if np.all(s[n - m:] <= rank_tol * scale**m):
                    groups[a] = g
                    del groups[b]
                    merged = True
                    break
            if merged:
                break
    return groups


def _chains_for(M, mu, mult, rank_tol, scale):
    n = M.shape[0]
    dtype = complex if isinstance(mu, complex) else float
    B = M.astype(dtype) - mu * np.eye(n)
    kernels = [np.zeros((n, 0), dtype=dtype)]
    nullities = [0]
    Bj = np.eye(n, dtype=dtype)
    for j in range(1, mult + 1):
        Bj = Bj @ B
        basis, s = _svd_null(Bj, rank_tol * scale**j)
        d = basis.shape[1]
        if j == 1 and d == 0:
            # clustered eigenvalue not resolved by the tolerance; keep the
            # least singular direction
            basis = np.linalg.svd(Bj)[2][-1:].conj().T
            d = 1
        if d < nullities[-1]:
            d = nullities[-1]
            basis = kernels[-1]
        kernels.append(basis)
        nullities.append(d)
        if d >= mult or d == nullities[-2]:
            break
    top = len(nullities) - 1
    while top > 1 and nullities[top] == nullities[top - 1]:
        top -= 1

    chains = []
    for j in range(top, 0, -1):
        needed = (nullities[j] - nullities[j - 1]) - (
            (nullities[j + 1] - nullities[j]) if j + 1 <= top else 0
        )
        if needed <= 0:
            continue
        level_vecs = [ch[j - 1] for ch in chains]
        lower = kernels[j - 1]
        S = _orth([lower[:, i] for i in range(lower.shape[1])] + level_vecs, n, dtype)
        K = kernels[j]
        proj = K - S @ (S.conj().T @ K)
        _, _, vh = np.linalg.svd(proj)
        picks = K @ vh[:needed].conj().T
        for col in range(picks.shape[1]):
            v = picks[:, col]
            v = v - lower @ (lower.conj().T @ v)
            chain = [v]
            for _ in range(j - 1):
                chain.insert(0, B @ chain[0])
            scale_by = _phase_scale(chain[0])
            chain = [w * scale_by for w in chain]
            if dtype is float:
                chain = [np.real(w) for w in chain]
            chains.append(chain)
    return chains, nullities[1:]


def eigen_decompose(M, rank_tol=DEFAULT_RANK_TOL) -> EigenData:
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    n = M.shape[0]
    norm = np.linalg.norm(M, 2) if n else 0.0
    scale = max(norm, 1.0)
    eigs, vecs = np.linalg.eig(M)
    try:
        condition = float(np.linalg.cond(vecs))
    except np.linalg.LinAlgError:
        condition = np.inf
    groups = _cluster(list(eigs), CLUSTER_TOL * scale)
    groups = _merge_defective(M, eigs, groups, rank_tol, scale)

    clusters = []
    for g in groups:
        mu = complex(np.mean(eigs[g]))
        if abs(mu.imag) <= CLUSTER_TOL * scale:
            mu = complex(mu.real, 0.0)
        clusters.append((mu, len(g)))
    result = []
    for mu, mult in clusters:
        if mu.imag == 0.0:
            chains, nulls = _chains_for(M, mu.real, mult, rank_tol, scale)
            result.append(EigenCluster(mu, mult, chains, nulls))
        elif mu.imag > 0:
            chains, nulls = _chains_for(M, mu, mult, rank_tol, scale)
            result.append(EigenCluster(mu, mult, chains, nulls))
        else:
            result.append(EigenCluster(mu, mult, None, None))
    # conjugate partners for clusters in the lower half plane
    uppers = [cl for cl in result if cl.value.imag > 0]
    for cl in result:
        if cl.chains is None:
            partner = min(uppers, key=lambda u: abs(u.value - cl.value.conjugate()), default=None)
            if partner is None:
                chains, nulls = _chains_for(M, cl.value, cl.multiplicity, rank_tol, scale)
            else:
                chains = [[w.conj() for w in ch] for ch in partner.chains]
                nulls = list(partner.nullities)
            cl.chains, cl.nullities = chains, nulls
    result.sort(key=lambda cl: (cl.value.real, cl.value.imag))
    values = np.array(sorted(eigs, key=lambda z: (z.real, z.imag)), dtype=complex)
    if np.all(np.abs(values.imag) <= CLUSTER_TOL * scale):
        values = values.real.astype(complex)
    return EigenData(M, values, result, condition, rank_tol)


def chain_residual(M, value, chain) -> float:
    """Largest residual of the relations (M - value) v_1 = 0, (M - value) v_{j+1} = v_j."""
    n = M.shape[0]
    B = M - value * np.eye(n)
    worst = np.linalg.norm(B @ chain[0])
    for a, b in zip(chain[:-1], chain[1:]):
        worst = max(worst, np.linalg.norm(B @ b - a))
    return float(worst)


def subspace_angle(u, v) -> float:
    """Angle between the lines spanned by u and v (radians)."""
    u = np.asarray(u)
    v = np.asarray(v)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return np.pi / 2
    cos = abs(np.vdot(u, v)) / (nu * nv)
    cos = min(1.0, cos)
    # sin form is accurate for tiny angles
    w = v / nv - (np.vdot(u, v) / (nu * nv)) * (u / nu)
    return float(np.arctan2(np.linalg.norm(w), cos))


def subspace_distance(U, V) -> float:
    """Largest principal angle between the column spans of U and V."""
    U = np.atleast_2d(np.asarray(U))
    V = np.atleast_2d(np.asarray(V))
    if U.shape[0] != V.shape[0]:
        U, V = U.T, V.T
    qu = _orth([U[:, i] for i in range(U.shape[1])], U.shape[0], U.dtype)
    qv = _orth([V[:, i] for i in range(V.shape[1])], V.shape[0], V.dtype)
    if qu.shape[1] != qv.shape[1]:
        return np.pi / 2
    r = qv - qu @ (qu.conj().T @ qv)
    s = np.linalg.norm(r, 2) if r.size else 0.0
    return float(np.arcsin(min(1.0, s)))
