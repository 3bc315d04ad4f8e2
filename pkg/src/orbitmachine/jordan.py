"""Orbit trichotomy for a square matrix.

Split the space as X_1 + ... + X_n + Z, where Z collects the generalised
eigenspaces with |lambda| < 1 and each X_i is spanned by a Jordan chain
e_{i,1}, ..., e_{i,m_i} of an eigenvalue with |lambda_i| >= 1
(T e_{i,k} = lambda_i e_{i,k} + e_{i,k-1}).  With Y = span of the chain
heads e_{i,1} for |lambda_i| = 1 plus Z, every orbit T^n x

* diverges when x is outside Y,
* stays between two positive constants when x is in Y but not in Z,
* tends to zero when x is in Z.

Eigenvalues are grouped into clusters (a defective eigenvalue comes out of
floating point as a tight cloud) and each cluster's invariant subspace is
taken from an ordered complex Schur form, so membership questions reduce to
distances to orthonormal bases.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg as sla

__all__ = [
    "OrbitClass", "IllConditionedError", "Cluster", "TrichotomyDecomposition", "Verdict",
    "OracleResult", "decompose", "classify", "orbit_oracle", "random_instance",
]

MAX_DIM = 64
UNIT_TOL = 1e-9        # |mu| within this of 1 counts as on the circle
OFF_TOL = 1e-6         # and beyond this as clearly off it
CLUSTER_TOL = 1e-4
RANK_TOL = 1e-8
MEMBER_TOL = 1e-6      # relative distance below which x is taken to lie in a subspace
CLEAR_TOL = 1e-4       # and above which it clearly does not


class OrbitClass(str, enum.Enum):
    DIVERGES = "DIVERGES"
    BOUNDED_AWAY = "BOUNDED_AWAY"
    DECAYS = "DECAYS"
    UNDECIDED = "UNDECIDED"


class IllConditionedError(ValueError):
    pass


@dataclass
class Cluster:
    """Eigenvalues grouped around ``mu``; chains only for |mu| >= 1."""

    mu: complex
    kind: str                      # "inner", "unit" or "outer"
    eigenvalues: np.ndarray
    basis: np.ndarray | None = None    # orthonormal basis of the invariant subspace
    chains: list = field(default_factory=list)   # each an (N, m_i) array, heads first

    @property
    def multiplicity(self) -> int:
        return len(self.eigenvalues)


@dataclass
class TrichotomyDecomposition:
    T: np.ndarray
    eigenvalues: np.ndarray
    clusters: list
    Z: np.ndarray
    Y: np.ndarray
    alpha: float
    chain_residual: float

    @property
    def heads(self) -> list:
        return [c[:, 0] for cl in self.clusters if cl.kind == "unit" for c in cl.chains]

    def invariance_residual(self, basis: np.ndarray) -> float:
        """``||T Q - Q (Q^H T Q)||`` for an orthonormal basis Q."""
        if basis.shape[1] == 0:
            return 0.0
        R = basis.conj().T @ self.T @ basis
        return float(np.linalg.norm(self.T @ basis - basis @ R, 2))

    def distance(self, x, basis: np.ndarray) -> float:
        """Relative distance from x to the span of an orthonormal basis."""
        x = np.asarray(x, dtype=complex)
        nx = np.linalg.norm(x)
        if basis.shape[1] == 0:
            return 1.0
        r = x - basis @ (basis.conj().T @ x)
        return float(np.linalg.norm(r) / nx)


def _as_matrix(T) -> np.ndarray:
    T = np.asarray(T)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {T.shape}")
    if T.shape[0] > MAX_DIM:
        raise ValueError(f"dimension {T.shape[0]} exceeds {MAX_DIM}")
    if not np.all(np.isfinite(T)):
        raise ValueError("matrix has non-finite entries")
    return T.astype(complex if np.iscomplexobj(T) else float)


def _cluster(eigs: np.ndarray, tol: float) -> list:
    # single linkage on the eigenvalue cloud
    n = len(eigs)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(eigs[i] - eigs[j]) <= tol * max(1.0, abs(eigs[i])):
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [eigs[g] for g in sorted(groups.values(), key=lambda g: min(g))]


def _invariant_subspace(T: np.ndarray, select) -> tuple:
    """Orthonormal basis of the invariant subspace for selected eigenvalues,
    plus the (upper triangular) restriction of T to it."""
    S, Q, sdim = sla.schur(T.astype(complex), output="complex", sort=select)
    return Q[:, :sdim], S[:sdim, :sdim]


def _null(A: np.ndarray, tol: float) -> np.ndarray:
    if A.shape[0] == 0:
        return np.eye(A.shape[1], dtype=complex)
    u, s, vh = np.linalg.svd(A)
    scale = max(1.0, s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol * scale))
    return vh[rank:].conj().T


def _chains(N: np.ndarray, tol: float) -> list:
    """Jordan chains of a nilpotent matrix, heads first: N c_k = c_{k-1}, N c_1 = 0."""
    k = N.shape[0]
    powers = [np.eye(k, dtype=complex)]
    kernels = [np.zeros((k, 0), dtype=complex)]
    while kernels[-1].shape[1] < k:
        powers.append(powers[-1] @ N)
        kernels.append(_null(powers[-1], tol))
        if len(powers) > k + 1:
            raise IllConditionedError("nilpotent part did not vanish within the rank tolerance")
    top = len(kernels) - 1
    chains = []
    for j in range(top, 0, -1):
        # vectors of longer chains already sitting at height j
        level = [c[j - 1] for c in chains if len(c) >= j]
        spanned = np.column_stack([kernels[j - 1]] + [v[:, None] for v in level])
        need = kernels[j].shape[1] - kernels[j - 1].shape[1] - len(level)
        if need <= 0:
            continue
        K = kernels[j]
        if spanned.shape[1]:
            q, _ = np.linalg.qr(spanned)
            K = K - q @ (q.conj().T @ K)
        u, s, _ = np.linalg.svd(K, full_matrices=False)
        for v in u[:, :need].T:
            chain = [v]
            for _ in range(j - 1):
                chain.insert(0, N @ chain[0])
            chains.append(chain)
    return [np.column_stack(c) for c in chains]


def decompose(T, cluster_tol: float = CLUSTER_TOL, rank_tol: float = RANK_TOL) -> TrichotomyDecomposition:
    """Jordan structure relative to the unit circle, with Y and Z bases."""
    T = _as_matrix(T)
    N = T.shape[0]
    eigs = np.linalg.eigvals(T)
    clusters = []
    for group in _cluster(eigs, cluster_tol):
        mu = complex(np.mean(group))
        off = abs(abs(mu) - 1.0)
        if UNIT_TOL < off <= OFF_TOL:
            raise IllConditionedError(
                f"eigenvalue cluster at {mu:.12g} sits {off:.3g} from the unit circle")
        kind = "unit" if off <= UNIT_TOL else ("inner" if abs(mu) < 1 else "outer")
        clusters.append(Cluster(mu, kind, np.asarray(group)))

    inner = [c for c in clusters if c.kind == "inner"]
    inner_eigs = np.concatenate([c.eigenvalues for c in inner]) if inner else np.zeros(0)
    alpha = float(np.max(np.abs(inner_eigs))) if inner_eigs.size else 0.0
    cut = (alpha + 1.0) / 2.0
    Z, _ = _invariant_subspace(T, lambda z: abs(z) < cut) if inner else (np.zeros((N, 0), complex), None)

    residual = 0.0
    heads = []
    for cl in clusters:
        if cl.kind == "inner":
            continue
        radius = cluster_tol * max(1.0, abs(cl.mu)) + np.max(np.abs(cl.eigenvalues - cl.mu))
        Q, A = _invariant_subspace(T, lambda z, mu=cl.mu, r=radius: abs(z - mu) <= 2 * r)
        if Q.shape[1] != cl.multiplicity:
            raise IllConditionedError(f"could not isolate the eigenvalue cluster at {cl.mu:.6g}")
        cl.basis = Q
        # the cluster's nilpotent part, with the rounding cloud on the diagonal removed
        Nil = np.triu(A - cl.mu * np.eye(len(A)), 1)
        for c in _chains(Nil, rank_tol):
            full = Q @ c
            scale = np.linalg.norm(full[:, 0])
            full = full / scale
            cl.chains.append(full)
            if cl.kind == "unit":
                heads.append(full[:, 0])
    # coordinate functionals f_{i,k} from the full Jordan-plus-Z basis
    cols = [c for cl in clusters for c in cl.chains]
    B = np.column_stack(cols + [Z]) if cols else Z
    if B.shape[1] != N:
        raise IllConditionedError("Jordan chains and Z do not span the space")
    F = np.linalg.inv(B)
    TB = F @ T @ B
    pos = 0
    for cl in clusters:
        for c in cl.chains:
            m = c.shape[1]
            for k in range(m):
                residual = max(residual, abs(TB[pos + k, pos + k] - cl.mu))
                if k:
                    residual = max(residual, abs(TB[pos + k - 1, pos + k] - 1.0))
            pos += m
    Y = np.column_stack([Z] + [h[:, None] for h in heads]) if heads else Z
    if Y.shape[1]:
        Y, _ = np.linalg.qr(Y)
    return TrichotomyDecomposition(T, eigs, clusters, Z, Y, alpha, float(residual))


@dataclass(frozen=True)
class Verdict:
    cls: OrbitClass
    dist_Y: float
    dist_Z: float


def _side(dist: float, member_tol: float, clear_tol: float, what: str) -> bool:
    if dist <= member_tol:
        return True
    if dist >= clear_tol:
        return False
    raise IllConditionedError(f"relative distance {dist:.3g} to {what} is inside the tolerance band")


def classify(T, x, decomposition: TrichotomyDecomposition | None = None,
             member_tol: float = MEMBER_TOL, clear_tol: float = CLEAR_TOL) -> Verdict:
    """Place x relative to Y and Z."""
    x = np.asarray(x)
    if not np.any(x):
        raise ValueError("x must be nonzero")
    dec = decompose(T) if decomposition is None else decomposition
    dY = dec.distance(x, dec.Y)
    dZ = dec.distance(x, dec.Z)
    if not _side(dY, member_tol, clear_tol, "Y"):
        return Verdict(OrbitClass.DIVERGES, dY, dZ)
    if _side(dZ, member_tol, clear_tol, "Z"):
        return Verdict(OrbitClass.DECAYS, dY, dZ)
    return Verdict(OrbitClass.BOUNDED_AWAY, dY, dZ)


@dataclass(frozen=True)
class OracleResult:
    cls: OrbitClass
    norms: np.ndarray       # ||T^n x|| / ||x||, n = 0..steps
    M: float | None         # bounds the ratio above and its inverse, for bounded orbits


def _exact_int_form(T, x):
    """Integer matrix A, integer vector v and denominator D with T = A / D."""
    Tq = [[Fraction(e) for e in row] for row in np.asarray(T, dtype=object)]
    xq = [Fraction(e) for e in np.asarray(x, dtype=object).reshape(-1)]
    D = math.lcm(*(e.denominator for row in Tq for e in row))
    dx = math.lcm(*(e.denominator for e in xq))
    A = [[int(e * D) for e in row] for row in Tq]
    v = [int(e * dx) for e in xq]
    return A, v, D


def _log_norm(v) -> float:
    s = sum(e * e for e in v)
    return 0.5 * math.log(s) if s else -math.inf


def _orbit_log_norms(T, x, steps: int, exact: bool) -> np.ndarray:
    """``log(||T^n x|| / ||x||)`` for n = 0..steps."""
    out = np.empty(steps + 1)
    if exact:
        A, v, D = _exact_int_form(T, x)
        logD = math.log(D)
        l0 = _log_norm(v)
        if l0 == -math.inf:
            raise ValueError("x must be nonzero")
        out[0] = 0.0
        for t in range(1, steps + 1):
            v = [sum(a * b for a, b in zip(row, v)) for row in A]
            out[t] = _log_norm(v) - t * logD - l0
        return out
    T = _as_matrix(T)
    v = np.asarray(x, dtype=complex if np.iscomplexobj(T) else float)
    n0 = np.linalg.norm(v)
    if n0 == 0:
        raise ValueError("x must be nonzero")
    v = v / n0
    shift = 0.0
    out[0] = 0.0
    for t in range(1, steps + 1):
        v = T @ v
        nv = np.linalg.norm(v)
        if nv == 0:
            out[t:] = -math.inf
            break
        # renormalise to keep the iteration inside float range
        shift += math.log(nv)
        v = v / nv
        out[t] = shift
    return out


def orbit_oracle(T, x, steps: int = 400, grow: float = 10.0, decay: float = 1e-6,
                 trend: float = 1.05, exact: bool | None = None) -> OracleResult:
    """Classify by iterating x -> T x and watching the norm.

    Diverging means the final norm exceeds ``grow`` times the start and the
    last quarter peaks above the preceding quarter by ``trend``; decaying
    means the final norm is below ``decay`` times the start; bounded means
    neither, with the last two quarters peaking at comparable heights.
    Anything else is UNDECIDED.

    With ``exact`` (the default for real input) the iteration runs in exact
    rational arithmetic on the given entries, floats included, so rounding
    never leaks into growing modes.
    """
    if steps < 50:
        raise ValueError("use at least 50 steps")
    if exact is None:
        exact = not (np.iscomplexobj(np.asarray(T)) or np.iscomplexobj(np.asarray(x)))
    logs = _orbit_log_norms(T, x, steps, exact)
    norms = np.exp(np.minimum(logs, 700.0))
    q = steps // 4
    mid = logs[2 * q:3 * q].max()
    late = logs[3 * q:].max()
    final = logs[-1]
    lt = math.log(trend)
    if final > math.log(grow):
        cls = OrbitClass.DIVERGES if late > lt + mid else OrbitClass.UNDECIDED
    elif final < math.log(decay):
        cls = OrbitClass.DECAYS
    elif late > lt + mid or late < mid - math.log(2.0):
        cls = OrbitClass.UNDECIDED
    else:
        cls = OrbitClass.BOUNDED_AWAY
    M = None
    if cls is OrbitClass.BOUNDED_AWAY:
        M = float(math.exp(max(logs.max(), -logs.min())))
    return OracleResult(cls, norms, M)


# (a, b, c) with a^2 + b^2 = c^2: rotations with rational entries
_TRIPLES = [(3, 4, 5), (5, 12, 13), (8, 15, 17), (7, 24, 25), (20, 21, 29), (12, 35, 37)]


def _rational_rotations():
    out = []
    for a, b, c in _TRIPLES:
        for ca, sb in ((a, b), (b, a), (-a, b), (-b, a)):
            out.append((Fraction(ca, c), Fraction(sb, c)))
    return out


def _exact_inverse(P: np.ndarray) -> np.ndarray:
    import sympy

    inv = sympy.Matrix(P.tolist()).inv()
    return np.array([[Fraction(int(e.p), int(e.q)) for e in row] for row in inv.tolist()], dtype=object)


def random_instance(rng: np.random.Generator, max_dim: int = 8, cond_max: float = 1e3):
    """A rational matrix ``P J P^-1`` with known block structure and test vectors.

    Blocks are decaying (moduli <= 13/16), unit-modulus (+-1, rational
    rotations, or a 2x2 Jordan block at +-1) or growing (moduli >= 5/4).
    Returns ``(T, [(x, expected OrbitClass), ...])`` as object arrays of
    Fractions, with one vector per class that the block mix allows.
    """
    kinds = ["dec", "dec_rot", "dec_jordan", "unit", "unit_rot", "unit_jordan", "grow", "grow_rot"]
    rotations = _rational_rotations()
    while True:
        blocks, dim, used = [], 0, set()
        target = int(rng.integers(2, max_dim + 1))
        while dim < target:
            kind = kinds[int(rng.integers(len(kinds)))]
            size = 2 if kind.endswith(("rot", "jordan")) else 1
            if dim + size > target:
                continue
            if kind.endswith("rot"):
                c, s = rotations[int(rng.integers(len(rotations)))]
                r = {"dec_rot": Fraction(int(rng.integers(1, 4)), 4), "unit_rot": Fraction(1),
                     "grow_rot": Fraction(int(rng.integers(5, 9)), 4)}[kind]
                key = (r * c, r * s)
                J = [[r * c, -r * s], [r * s, r * c]]
            else:
                sign = int(rng.choice([-1, 1]))
                lam = {"dec": Fraction(int(rng.integers(0, 14)), 16), "dec_jordan": Fraction(int(rng.integers(1, 14)), 16),
                       "unit": Fraction(1), "unit_jordan": Fraction(1),
                       "grow": Fraction(int(rng.integers(10, 17)), 8)}[kind] * sign
                key = (lam, 0)
                J = [[lam, Fraction(1)], [Fraction(0), lam]] if kind.endswith("jordan") else [[lam]]
            if key in used:
                continue
            used.add(key)
            blocks.append((kind, dim, J))
            dim += size
        P = rng.integers(-3, 4, (dim, dim))
        if abs(round(np.linalg.det(P))) >= 1 and np.linalg.cond(P) <= cond_max:
            break
    J = np.full((dim, dim), Fraction(0), dtype=object)
    for _, start, Jb in blocks:
        for i, row in enumerate(Jb):
            for j, e in enumerate(row):
                J[start + i, start + j] = e
    Pq = P.astype(object) * Fraction(1)
    T = Pq.dot(J).dot(_exact_inverse(P))

    decay_idx, head_idx, out_idx = [], [], []
    for kind, start, Jb in blocks:
        idx = list(range(start, start + len(Jb)))
        if kind.startswith("dec"):
            decay_idx += idx
        elif kind == "unit_jordan":
            head_idx.append(idx[0])
            out_idx.append(idx[1])
        elif kind.startswith("unit"):
            head_idx += idx
        else:
            out_idx += idx

    def make(groups):
        y = np.full(dim, Fraction(0), dtype=object)
        for g in groups:
            for i in g:
                y[i] = Fraction(int(rng.integers(4, 13)), 8) * int(rng.choice([-1, 1]))
        return Pq.dot(y)

    cases = []
    if decay_idx:
        cases.append((make([decay_idx]), OrbitClass.DECAYS))
    if head_idx:
        cases.append((make([head_idx, decay_idx]), OrbitClass.BOUNDED_AWAY))
    if out_idx:
        cases.append((make([out_idx, head_idx, decay_idx]), OrbitClass.DIVERGES))
    return T, cases
