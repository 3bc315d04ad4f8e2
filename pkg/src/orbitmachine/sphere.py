"""Projective geometry on the real unit sphere of l2^d.

``rho(u, v) = sqrt(1 - <u,v>^2)`` is the sine of the angle between the lines
through u and v, so it identifies ``u`` with ``-u``.  Target sets are finite
unions of antipodal pairs and rho-caps; nets are deterministic angular grids
filtered against the target set, and the feed enumeration lays the stage
nets end to end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "UnitVector", "AntipodalPair", "Cap", "SymmetricSet", "Net", "FeedEnumeration",
    "rho", "rho_to_set", "perp_basis", "delta", "build_net", "enumerate_feeds",
    "stage_budget", "default_K", "projective_grid", "sample_sphere", "covering_misses",
]


class UnitVector:
    """A point of the unit sphere; renormalised on construction."""

    __slots__ = ("coords",)

    def __init__(self, coords):
        if isinstance(coords, UnitVector):
            coords = coords.coords
        a = np.array(coords, dtype=float).reshape(-1)
        nrm = float(np.linalg.norm(a))
        if a.size < 1 or not np.isfinite(nrm) or nrm == 0.0:
            raise ValueError(f"cannot normalise {coords!r}")
        if abs(nrm - 1.0) > 1e-15:
            a = a / nrm
        a.setflags(write=False)
        self.coords = a

    @classmethod
    def basis(cls, d: int, i: int) -> "UnitVector":
        e = np.zeros(d)
        e[i] = 1.0
        return cls(e)

    @property
    def d(self) -> int:
        return self.coords.size

    def __neg__(self):
        return UnitVector(-self.coords)

    def __array__(self, dtype=None, copy=None):
        return self.coords if dtype is None else self.coords.astype(dtype)

    def __iter__(self):
        return iter(self.coords.tolist())

    def __eq__(self, other):
        if not isinstance(other, UnitVector):
            return NotImplemented
        return bool(np.array_equal(self.coords, other.coords))

    def __hash__(self):
        return hash(self.coords.tobytes())

    def __repr__(self):
        return f"UnitVector({self.coords.tolist()})"


def _arr(u) -> np.ndarray:
    return u.coords if isinstance(u, UnitVector) else np.asarray(u, dtype=float)


def rho(u, v):
    """Projective sine distance; broadcasts over leading axes.

    Evaluated through the shorter chord ``c`` as ``c*sqrt(1 - c^2/4)`` so it
    stays accurate for nearly parallel vectors.
    """
    u, v = _arr(u), _arr(v)
    c = np.minimum(np.linalg.norm(u - v, axis=-1), np.linalg.norm(u + v, axis=-1))
    c = np.minimum(c, math.sqrt(2.0))
    out = np.minimum(c * np.sqrt(np.maximum(0.0, 1.0 - 0.25 * c * c)), 1.0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class AntipodalPair:
    center: UnitVector

    def distance(self, u):
        return rho(u, self.center)

    def to_json(self):
        return {"type": "pair", "center": list(self.center)}


@dataclass(frozen=True)
class Cap:
    """``{v : rho(v, center) <= radius}``; radius 1 is the whole sphere."""

    center: UnitVector
    radius: float

    def __post_init__(self):
        if not 0.0 < self.radius <= 1.0:
            raise ValueError(f"cap radius must lie in (0, 1], got {self.radius}")

    def distance(self, u):
        # infimum of rho over the cap: sine of the excess angle
        alpha = np.arcsin(np.clip(rho(u, self.center), 0.0, 1.0))
        beta = math.asin(self.radius)
        out = np.sin(np.maximum(alpha - beta, 0.0))
        return float(out) if np.ndim(out) == 0 else out

    def to_json(self):
        return {"type": "cap", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class SymmetricSet:
    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("target set must be non-empty")
        dims = {c.center.d for c in comps}
        if len(dims) != 1:
            raise ValueError(f"components live in different dimensions {sorted(dims)}")
        object.__setattr__(self, "components", comps)

    @property
    def d(self) -> int:
        return self.components[0].center.d

    @classmethod
    def pair(cls, center) -> "SymmetricSet":
        return cls((AntipodalPair(UnitVector(center)),))

    @classmethod
    def cap(cls, center, radius: float) -> "SymmetricSet":
        return cls((Cap(UnitVector(center), float(radius)),))

    @classmethod
    def from_json(cls, items: Sequence[dict]) -> "SymmetricSet":
        comps = []
        for it in items:
            kind = it.get("type")
            extra = set(it) - {"type", "center", "radius"}
            if extra:
                raise ValueError(f"unknown keys in target set component: {sorted(extra)}")
            if kind == "pair":
                if "radius" in it:
                    raise ValueError("an antipodal pair takes no radius")
                comps.append(AntipodalPair(UnitVector(it["center"])))
            elif kind == "cap":
                comps.append(Cap(UnitVector(it["center"]), float(it["radius"])))
            else:
                raise ValueError(f"unknown component type {kind!r}")
        return cls(tuple(comps))

    def to_json(self) -> list:
        return [c.to_json() for c in self.components]

    def distance(self, u):
        ds = [c.distance(u) for c in self.components]
        out = ds[0]
        for x in ds[1:]:
            out = np.minimum(out, x)
        return float(out) if np.ndim(out) == 0 else out

    def __contains__(self, u) -> bool:
        return self.distance(u) == 0.0


def rho_to_set(u, E: SymmetricSet):
    if not isinstance(E, SymmetricSet):
        raise TypeError("E must be a SymmetricSet")
    return E.distance(u)


def perp_basis(v) -> np.ndarray:
    """Orthonormal basis of ``v``-perp as the rows of a ``(d-1, d)`` array.

    Gram-Schmidt (two passes) over the canonical vectors in index order,
    skipping the one most aligned with ``v``.
    """
    v = _arr(UnitVector(v))
    d = v.size
    skip = int(np.argmax(np.abs(v)))
    rows = [v]
    for i in range(d):
        if i == skip:
            continue
        w = np.zeros(d)
        w[i] = 1.0
        for _ in range(2):
            for b in rows:
                w = w - np.dot(w, b) * b
        rows.append(w / np.linalg.norm(w))
    return np.array(rows[1:])


def delta(v, E: SymmetricSet, u, basis: np.ndarray | None = None) -> np.ndarray:
    """Coordinates of ``u`` in ``v``-perp divided by ``rho(v, E)``."""
    r = rho_to_set(v, E)
    if r <= 0.0:
        raise ValueError("delta is undefined for v in E (rho(v, E) = 0)")
    if basis is None:
        basis = perp_basis(v)
    return basis @ _arr(u) / r


# -- nets ------------------------------------------------------------------

def _sphere_grid(k: int, r: float, half: bool = False) -> np.ndarray:
    """Grid on S^k in R^(k+1) with geodesic covering radius <= r.

    With ``half`` the polar angle only runs over [0, pi/2], which covers the
    sphere up to the antipodal identification.
    """
    if k == 0:
        return np.array([[1.0], [-1.0]])
    span = math.pi / 2 if half else math.pi
    # S^0 is covered exactly, so the whole budget may go to the polar angle
    polar_budget = r if k == 1 else r / 2
    n = max(1, math.ceil(span / (2 * polar_budget)))
    h = span / n
    blocks = []
    for i in range(n):
        phi = (i + 0.5) * h
        s = math.sin(phi)
        rest = r - h / 2
        sub_r = rest / s if s > 0 else math.inf
        sub = _sphere_grid(k - 1, sub_r) if sub_r < math.pi else _sphere_grid(k - 1, 1.0)[:1]
        col = np.full((sub.shape[0], 1), math.cos(phi))
        blocks.append(np.hstack([col, s * sub]))
    return np.vstack(blocks)


def projective_grid(d: int, r: float) -> np.ndarray:
    """Unit vectors such that every line in R^d is within rho <= r of one of them."""
    if d < 2:
        raise ValueError("d must be at least 2")
    return _sphere_grid(d - 1, r, half=True)


@dataclass(frozen=True)
class Net:
    stage: int
    d: int
    points: np.ndarray = field(repr=False)

    @property
    def mesh(self) -> Fraction:
        return Fraction(1, 2 ** self.stage)

    @property
    def filter_threshold(self) -> Fraction:
        return Fraction(1, 2 ** (self.stage + 1))

    def __len__(self):
        return self.points.shape[0]

    def nearest(self, u) -> tuple[int, float]:
        rs = rho(self.points, _arr(u)[None, :])
        i = int(np.argmin(rs))
        return i, float(rs[i])


def build_net(d: int, n: int, E: SymmetricSet) -> Net:
    """Stage-n net: grid of rho-mesh 2^-(n+1), kept where rho(., E) >= 2^-(n+1).

    Every u with rho(u, E) >= 2^-n then has a kept point within 2^-(n+1).
    Points are listed by decreasing distance to E, so feeds with large
    amplitudes land on later (longer) blocks of the stage.
    """
    if d < 2 or n < 1:
        raise ValueError(f"need d >= 2 and n >= 1, got d={d}, n={n}")
    if E.d != d:
        raise ValueError(f"target set lives in dimension {E.d}, not {d}")
    thr = 2.0 ** -(n + 1)
    grid = projective_grid(d, thr)
    dist = E.distance(grid)
    keep = np.flatnonzero(dist >= thr)
    # farthest from E first, grid order among (near-)ties
    order = np.lexsort((keep, -np.round(dist[keep], 12)))
    pts = np.ascontiguousarray(grid[keep[order]])
    pts.setflags(write=False)
    return Net(n, d, pts)


def stage_budget(d: int, n: int, K: int) -> int:
    """Feed slots reserved for stage n: ``K * 2^(n(d-1))``."""
    return K * 2 ** (n * (d - 1))


def default_K(nets: Sequence[Net]) -> int:
    """Smallest K for which every stage net fits its budget."""
    return max(1, *(math.ceil(len(net) / stage_budget(net.d, net.stage, 1)) for net in nets))


@dataclass(frozen=True)
class FeedEnumeration:
    d: int
    K: int
    C: tuple  # C[0] = C_1 = 1, ..., C[N] = C_{N+1}
    points: np.ndarray = field(repr=False)   # row k-1 is w_k
    stages: tuple                            # stages[k-1] = stage of k
    net_index: tuple                         # which net point w_k repeats (0-based)

    @property
    def horizon(self) -> int:
        return len(self.stages)

    @property
    def n_stages(self) -> int:
        return len(self.C) - 1

    def w(self, k: int) -> np.ndarray:
        return self.points[k - 1]

    def stage(self, k: int) -> int:
        return self.stages[k - 1]

    def stage_range(self, n: int) -> range:
        return range(self.C[n - 1], self.C[n])


def enumerate_feeds(nets: Sequence[Net], K: int | None = None) -> FeedEnumeration:
    """Concatenate stage nets, each cycled to fill its ``K*2^(n(d-1))`` slots."""
    nets = list(nets)
    if not nets:
        raise ValueError("need at least one stage net")
    d = nets[0].d
    for i, net in enumerate(nets, start=1):
        if net.stage != i:
            raise ValueError(f"nets must be given for stages 1..N in order (got stage {net.stage} at {i})")
        if len(net) == 0:
            raise ValueError(f"stage {i} net is empty: the target set leaves no room at mesh 2^-{i}")
    if K is None:
        K = default_K(nets)
    C = [1]
    pts, stages, idx = [], [], []
    for net in nets:
        b = stage_budget(d, net.stage, K)
        if len(net) > b:
            raise ValueError(f"K={K} too small: stage {net.stage} net has {len(net)} points, budget {b}")
        sel = np.arange(b) % len(net)
        pts.append(net.points[sel])
        stages.extend([net.stage] * b)
        idx.extend(sel.tolist())
        C.append(C[-1] + b)
    points = np.vstack(pts)
    points.setflags(write=False)
    return FeedEnumeration(d, K, tuple(C), points, tuple(stages), tuple(idx))


def sample_sphere(rng: np.random.Generator, d: int, size: int) -> np.ndarray:
    x = rng.standard_normal((size, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def covering_misses(net: Net, E: SymmetricSet, samples: int, rng: np.random.Generator,
                    chunk: int = 512) -> tuple[int, int, float]:
    """Draw ``samples`` points of W_n and count those with no net point within 2^-n.

    Returns ``(misses, draws, worst_distance)``.
    """
    thr = 2.0 ** -net.stage
    accepted = []
    draws = 0
    need = samples
    while need > 0:
        batch = sample_sphere(rng, net.d, max(4 * need, 256))
        draws += batch.shape[0]
        ok = batch[E.distance(batch) >= thr]
        accepted.append(ok[:need])
        need -= min(need, ok.shape[0])
        if draws > 10_000 * samples:
            raise RuntimeError(f"W_{net.stage} is too thin to sample")
    u = np.vstack(accepted)
    worst = 0.0
    misses = 0
    for s in range(0, u.shape[0], chunk):
        block = u[s:s + chunk]
        g = np.abs(block @ net.points.T)
        best = net.points[np.argmax(g, axis=1)]
        r = rho(block, best)
        misses += int(np.sum(r > thr))
        worst = max(worst, float(r.max()))
    return misses, draws, worst
