"""The assembled operator on ``l2^d (+) X^(d-1)_2`` for X = c0 or l_p.

Copy ``j`` of X is cut into consecutive blocks; block ``k`` has length
``T_k`` and is rotated by the shift.  Each block also receives the feed
``F_k`` driven by the amplitude ``a_{k,j} = <u, e_{w_k,j}> / rho(w_k, E)``.
Because the shift and the feeds commute block by block, the state of block
k at time t only depends on ``t mod T_k`` and is given by the closed-form
two-bump profile of :mod:`orbitmachine.carousel`.  Orbit norms are therefore
evaluated exactly, block by block, for astronomically large times.

Exactness: carousel profiles, index arithmetic and amplitudes (taken as the
exact rational value of their float) are exact.  For p=2 the feed magnitude
``eps_k = n / m_k^(3/2)`` is irrational; squared norms are then carried as
``rational + sum_k c_k * eps_k`` (:class:`SurdSum`), which is exact as well.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import carousel
from .carousel import PNorm, bump_power_sum, bump_value, estimate_constant_L
from .schedule import Schedule, Variant, build_schedule
from .sphere import (
    FeedEnumeration, Net, SymmetricSet, build_net, enumerate_feeds, perp_basis, rho,
)

MEMBERSHIP_TOL = 1e-12


@dataclass(frozen=True)
class MachineConfig:
    d: int
    p: PNorm
    E: SymmetricSet
    N: int
    variant: Variant = Variant()
    K: int | None = None
    k_max: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "p", PNorm.parse(self.p))
        if self.d < 2:
            raise ValueError("d must be at least 2")
        if self.N < 1:
            raise ValueError("need at least one stage")
        if self.E.d != self.d:
            raise ValueError(f"target set has dimension {self.E.d}, machine has d={self.d}")
        if self.K is not None and self.K < 1:
            raise ValueError("K must be a positive integer")
        if self.k_max is not None and self.k_max < 1:
            raise ValueError("k_max must be positive")


@dataclass(frozen=True)
class SurdSum:
    """Exact number ``rational + sum_k coeffs[k] * eps_k``."""

    rational: Fraction = Fraction(0)
    coeffs: tuple = ()

    def __add__(self, other: "SurdSum") -> "SurdSum":
        if not other.coeffs:
            return SurdSum(self.rational + other.rational, self.coeffs)
        acc = dict(self.coeffs)
        for k, c in other.coeffs:
            acc[k] = acc.get(k, 0) + c
        return SurdSum(self.rational + other.rational,
                       tuple(sorted((k, c) for k, c in acc.items() if c != 0)))

    def to_float(self, eps: Sequence[float]) -> float:
        return float(self.rational) + sum(c * eps[k - 1] for k, c in self.coeffs)

    @property
    def is_rational(self) -> bool:
        return not self.coeffs


@dataclass(frozen=True)
class BlockInfo:
    k: int
    n: int
    m: int
    T: int
    offset: int          # slots offset+1 .. offset+T of every copy
    w: np.ndarray = field(repr=False)
    rho_w: float = 0.0
    basis: np.ndarray = field(default=None, repr=False)


@dataclass
class Machine:
    config: MachineConfig
    nets: list
    feeds: FeedEnumeration
    schedule: Schedule
    blocks: list
    k_max: int
    L: object

    @property
    def d(self) -> int:
        return self.config.d

    @property
    def p(self) -> PNorm:
        return self.config.p

    @property
    def horizon(self) -> int:
        return len(self.blocks)

    @property
    def K(self) -> int:
        return self.feeds.K

    def block(self, k: int) -> BlockInfo:
        return self.blocks[k - 1]

    @property
    def used_slots(self) -> int:
        last = self.blocks[-1]
        return last.offset + last.T

    def truncated_slots(self, k_max: int | None = None) -> int:
        b = self.block(k_max or self.k_max)
        return b.offset + b.T

    def locate(self, slot: int) -> tuple[int | None, int]:
        """Map a 1-based slot of a copy to ``(k, position)``; ``k`` is None past the last block."""
        if slot < 1:
            raise ValueError("slots are 1-based")
        i = bisect.bisect_left(self._offsets, slot) - 1
        if i >= len(self.blocks):
            return None, slot
        b = self.blocks[i]
        if slot > b.offset + b.T:
            return None, slot
        return b.k, slot - b.offset

    def slot(self, k: int, position: int) -> int:
        b = self.block(k)
        if not 1 <= position <= b.T:
            raise ValueError(f"position {position} outside block {k} of length {b.T}")
        return b.offset + position

    def stage_at(self, t: int) -> int:
        """Stage of the block whose divergence window ``m_k <= t < m_{k+1}`` holds t."""
        i = bisect.bisect_right(self._ms, t)
        return 0 if i == 0 else self.blocks[i - 1].n

    def amplitudes(self, u) -> np.ndarray:
        """``a[k-1, j-1] = <u, e_{w_k,j}> / rho(w_k, E)`` for every block."""
        u = np.asarray(u, dtype=float).reshape(-1)
        if u.size != self.d:
            raise ValueError(f"u must have {self.d} coordinates")
        return self._bases @ u / self._rhos[:, None]

    def __post_init__(self):
        self._offsets = [b.offset for b in self.blocks]
        self._ms = [b.m for b in self.blocks]
        self._bases = np.array([b.basis for b in self.blocks])
        self._rhos = np.array([b.rho_w for b in self.blocks])
        p = self.config.p
        self.eps_pow = [self.schedule[b.k].eps_pow(p) for b in self.blocks]
        self.eps_float = [float(self.schedule[b.k].eps(p)) for b in self.blocks]


def build_machine(config: MachineConfig) -> Machine:
    nets = []
    for n in range(1, config.N + 1):
        net = build_net(config.d, n, config.E)
        if len(net) == 0:
            raise ValueError(f"stage {n}: the target set leaves no net points (W_{n} is empty)")
        nets.append(net)
    feeds = enumerate_feeds(nets, config.K)
    horizon = feeds.horizon
    k_max = config.k_max or horizon
    if k_max > horizon:
        raise ValueError(f"k_max={k_max} exceeds the {horizon} enumerated feeds (C_(N+1) = {horizon + 1})")
    schedule = build_schedule(config.d, config.p, feeds.stage, horizon, config.variant)
    blocks = []
    offset = 0
    for k in range(1, horizon + 1):
        e = schedule[k]
        w = feeds.w(k)
        r = config.E.distance(w)
        if not r > 0:
            raise ValueError(f"feed w_{k} lies in E")
        blocks.append(BlockInfo(k, e.n, e.m, e.T, offset, w, r, perp_basis(w)))
        offset += e.T
    return Machine(config, nets, feeds, schedule, blocks, k_max, estimate_constant_L(config.p))


# -- states ----------------------------------------------------------------

def _frac_map(x) -> dict:
    if x is None:
        return {}
    out = {}
    for key, v in dict(x).items():
        j, s = key
        v = carousel.as_fraction(v)
        if v != 0:
            out[(int(j), int(s))] = v
    return out


@dataclass
class PointState:
    """``(u, x)`` with amplitudes cached per block and copy."""

    machine: Machine
    u: np.ndarray
    x: dict
    amps: np.ndarray = field(repr=False)
    amps_exact: list = field(repr=False)

    @classmethod
    def make(cls, machine: Machine, u, x=None) -> "PointState":
        u = np.asarray(u, dtype=float).reshape(-1)
        x = _frac_map(x)
        for (j, s) in x:
            if not 1 <= j <= machine.d - 1:
                raise ValueError(f"copy index {j} outside 1..{machine.d - 1}")
            if s < 1:
                raise ValueError("slots are 1-based")
        a = machine.amplitudes(u) if np.any(u) else np.zeros((machine.horizon, machine.d - 1))
        exact = [[Fraction(float(v)) for v in row] for row in a]
        return cls(machine, u, x, a, exact)


def shift_x(machine: Machine, x: Mapping, t: int) -> dict:
    """``S^t`` on a finitely supported x: positions advance by ``t mod T_k`` inside block k."""
    out = {}
    for (j, s), v in x.items():
        k, pos = machine.locate(s)
        if k is not None:
            T = machine.block(k).T
            s = machine.block(k).offset + (pos - 1 + t) % T + 1
        out[(j, s)] = v
    return out


def _x_norm_pow(vals: Iterable[Fraction], p: PNorm):
    vals = list(vals)
    if p is PNorm.INF:
        return max((abs(v) for v in vals), default=Fraction(0))
    return sum((abs(v) ** p.value for v in vals), Fraction(0))


def block_state(machine: Machine, k: int, a: Fraction, t: int, xs: Mapping[int, Fraction]):
    """Exact p-norm data of block k in one copy at time t.

    ``xs`` maps 0-based positions of the block to the (already shifted) x
    values living there.  Returns ``(value, eps_coeff)``: for p=1 the norm,
    for p=inf the norm, for p=2 the squared norm ``value + eps_coeff*eps_k``.
    """
    b = machine.block(k)
    p = machine.p
    T, m = b.T, b.m
    r = t % T
    ep = machine.eps_pow[k - 1]
    if r == 0 or a == 0:
        if p is PNorm.TWO:
            return _x_norm_pow(xs.values(), p), Fraction(0)
        return _x_norm_pow(xs.values(), p), Fraction(0)
    if p is PNorm.TWO:
        base = ep * a * a * bump_power_sum(T, m, r, p)
        cross = 0
        sq = Fraction(0)
        for i, beta in xs.items():
            cross += bump_value(T, m, r, i) * beta
            sq += beta * beta
        return base + sq, 2 * a * cross
    scale = ep * a  # eps is rational for p = 1 and p = inf
    rest = abs(scale) * bump_power_sum(T, m, r, p, skip=xs.keys())
    vals = [scale * bump_value(T, m, r, i) + beta for i, beta in xs.items()]
    if p is PNorm.INF:
        return max([rest, *(abs(v) for v in vals)]), Fraction(0)
    return rest + sum((abs(v) for v in vals), Fraction(0)), Fraction(0)


def _block_sq(p: PNorm, value: Fraction, coeff: Fraction, k: int) -> SurdSum:
    if p is PNorm.TWO:
        return SurdSum(value, ((k, coeff),) if coeff else ())
    return SurdSum(value * value)


@dataclass(frozen=True)
class OrbitRecord:
    t: int
    stage: int
    total: float
    shift_part: float
    perturb_part: float
    blocks: tuple          # pure-perturbation norm of each block k <= k_max
    tail_bound: float
    total_sq: SurdSum      # exact ||R^t(u,x)||^2 over the truncated system
    perturb_sq: SurdSum

    @property
    def lower(self) -> float:
        return self.total - self.tail_bound

    @property
    def upper(self) -> float:
        return self.total + self.tail_bound


def _copy_sq(machine: Machine, state: PointState, j: int, t: int, k_max: int,
             x_by_block: dict, x_outside: list, executor=None):
    """Squared X-norm of copy j, with and without x, as SurdSums, plus per-block perturbation squares."""
    p = machine.p
    ks = range(1, k_max + 1)

    def one(k):
        a = state.amps_exact[k - 1][j - 1]
        xs = x_by_block.get(k, {})
        full = block_state(machine, k, a, t, xs)
        pure = block_state(machine, k, a, t, {}) if xs else full
        return full, pure

    results = list(executor.map(one, ks)) if executor is not None else [one(k) for k in ks]
    pure_sq = [_block_sq(p, v, c, k) for k, (_, (v, c)) in zip(ks, results)]
    # x in blocks beyond k_max or past the last block keeps its exact shifted values
    if p is PNorm.TWO:
        full = SurdSum(_x_norm_pow(x_outside, p))
        for k, ((v, c), _) in zip(ks, results):
            full = full + _block_sq(p, v, c, k)
        pure = SurdSum()
        for s in pure_sq:
            pure = pure + s
        return full, pure, pure_sq
    if p is PNorm.INF:
        fv = max([_x_norm_pow(x_outside, p), *(v for (v, _), _ in results)])
        pv = max([Fraction(0), *(v for _, (v, _) in results)])
    else:
        fv = _x_norm_pow(x_outside, p) + sum((v for (v, _), _ in results), Fraction(0))
        pv = sum((v for _, (v, _) in results), Fraction(0))
    return SurdSum(fv * fv), SurdSum(pv * pv), pure_sq


def _split_x(machine: Machine, x: Mapping, j: int, k_max: int):
    by_block: dict = {}
    outside = []
    for (jj, s), v in x.items():
        if jj != j:
            continue
        k, pos = machine.locate(s)
        if k is not None and k <= k_max:
            by_block.setdefault(k, {})[pos - 1] = v
        else:
            outside.append(v)
    return by_block, outside


def orbit_norm(machine: Machine, u, x=None, t: int = 0, k_max: int | None = None,
               executor=None, state: PointState | None = None) -> OrbitRecord:
    """``||R^t(u, x)||`` over blocks ``<= k_max`` with a certified tail bound."""
    if t < 0:
        raise ValueError("t must be non-negative")
    k_max = k_max or machine.k_max
    if state is None:
        state = PointState.make(machine, u, x)
    xt = shift_x(machine, state.x, t)
    u_sq = sum((Fraction(float(c)) ** 2 for c in state.u), Fraction(0))
    total = SurdSum(u_sq)
    pert = SurdSum()
    block_sq = [SurdSum() for _ in range(k_max)]
    for j in range(1, machine.d):
        by_block, outside = _split_x(machine, xt, j, k_max)
        full, pure, per_block = _copy_sq(machine, state, j, t, k_max, by_block, outside, executor)
        total = total + full
        pert = pert + pure
        block_sq = [acc + s for acc, s in zip(block_sq, per_block)]
    eps = machine.eps_float
    x_norm = _x_total_norm(machine.p, state.x, machine.d)
    return OrbitRecord(
        t=t,
        stage=machine.stage_at(t),
        total=math.sqrt(max(0.0, total.to_float(eps))),
        shift_part=x_norm,
        perturb_part=math.sqrt(max(0.0, pert.to_float(eps))),
        blocks=tuple(math.sqrt(max(0.0, s.to_float(eps))) for s in block_sq),
        tail_bound=tail_bound(machine, state, k_max, t),
        total_sq=total,
        perturb_sq=pert,
    )


def _x_total_norm(p: PNorm, x: Mapping, d: int) -> float:
    sq = Fraction(0)
    for j in range(1, d):
        v = _x_norm_pow([val for (jj, _), val in x.items() if jj == j], p)
        sq += v * v if p is not PNorm.TWO else v
    return math.sqrt(sq)


def tail_bound(machine: Machine, u, k_max: int | None = None, t: int | None = None) -> float:
    """Norm bound for everything the blocks ``k > k_max`` would add.

    Each block obeys the uniform estimate ``L*eps_k*m_k^((p+1)/p)*|a| = L*n_k*|a|``;
    with a time ``t`` the small-time estimate ``L*n_k*s/m_k*|a|`` with
    ``s = min(t mod T_k, T_k - t mod T_k)`` is used where it is sharper.
    Blocks are combined by the triangle inequality, copies in l2.
    """
    k_max = machine.k_max if k_max is None else k_max
    amps = u.amps if isinstance(u, PointState) else machine.amplitudes(u)
    L = float(machine.L)
    total = 0.0
    norms = np.linalg.norm(amps[k_max:], axis=1).tolist() if k_max < len(amps) else []
    for b, a in zip(machine.blocks[k_max:], norms):
        if a == 0.0:
            continue
        factor = 1.0
        if t is not None:
            r = t % b.T
            s = min(r, b.T - r)
            if s == 0:
                continue
            if s <= b.m:
                factor = s / b.m
        total += L * b.n * factor * a
    return total


def orbit(machine: Machine, u, x=None, times: Iterable[int] = (), k_max=None, executor=None):
    state = PointState.make(machine, u, x)
    return [orbit_norm(machine, u, x, t, k_max, executor, state) for t in times]


# -- brute force -----------------------------------------------------------

ORACLE_BUDGET = 10 ** 7


def dense_oracle(machine: Machine, u, x=None, steps: int = 0, k_max: int | None = None,
                 budget: int = ORACLE_BUDGET) -> list[OrbitRecord]:
    """Apply R coordinate by coordinate on the truncated system and report norms.

    Every copy is materialised as two arrays per block: the coefficient of
    ``eps_k`` (fed by ``F_k``) and the part coming from x, so the p=2 case
    stays exact.  x must live in blocks ``<= k_max``.
    """
    k_max = k_max or machine.k_max
    p = machine.p
    dim = machine.truncated_slots(k_max)
    cost = steps * dim * (machine.d - 1)
    if cost > budget:
        raise ValueError(f"oracle needs {cost} coordinate updates, budget is {budget}")
    state = PointState.make(machine, u, x)
    bounds = [(b.offset, b.T, b.m) for b in machine.blocks[:k_max]]
    copies = []
    for j in range(1, machine.d):
        fed = [[Fraction(0)] * T for _, T, _ in bounds]
        free = [[Fraction(0)] * T for _, T, _ in bounds]
        for (jj, s), v in state.x.items():
            if jj != j:
                continue
            k, pos = machine.locate(s)
            if k is None or k > k_max:
                raise ValueError(f"x has support at slot {s} outside the first {k_max} blocks")
            free[k - 1][pos - 1] += v
        copies.append((fed, free))

    u_sq = sum((Fraction(float(c)) ** 2 for c in state.u), Fraction(0))
    eps = machine.eps_float
    x_norm = _x_total_norm(p, state.x, machine.d)
    out = []
    for t in range(steps + 1):
        if t > 0:
            for j, (fed, free) in enumerate(copies, start=1):
                for idx, (_, T, m) in enumerate(bounds):
                    a = state.amps_exact[idx][j - 1]
                    f = fed[idx]
                    f[:] = f[-1:] + f[:-1]
                    for i in range(m):
                        f[i] += a
                        f[i + m] -= a
                    g = free[idx]
                    g[:] = g[-1:] + g[:-1]
        total = SurdSum(u_sq)
        pert = SurdSum()
        for fed, free in copies:
            tot_j, pert_j = SurdSum(), SurdSum()
            if p is PNorm.TWO:
                for idx, k in enumerate(range(1, k_max + 1)):
                    ep = machine.eps_pow[idx]
                    ff = sum((v * v for v in fed[idx]), Fraction(0))
                    fg = sum((a * b for a, b in zip(fed[idx], free[idx])), Fraction(0))
                    gg = sum((v * v for v in free[idx]), Fraction(0))
                    tot_j = tot_j + SurdSum(ep * ff + gg, ((k, 2 * fg),) if fg else ())
                    pert_j = pert_j + SurdSum(ep * ff)
            else:
                vals_t, vals_p = [], []
                for idx in range(k_max):
                    ep = machine.eps_pow[idx]
                    vals_t += [ep * a + b for a, b in zip(fed[idx], free[idx])]
                    vals_p += [ep * a for a in fed[idx]]
                nt, np_ = _x_norm_pow(vals_t, p), _x_norm_pow(vals_p, p)
                tot_j, pert_j = SurdSum(nt * nt), SurdSum(np_ * np_)
            total = total + tot_j
            pert = pert + pert_j
        out.append(OrbitRecord(
            t=t, stage=machine.stage_at(t),
            total=math.sqrt(max(0.0, total.to_float(eps))),
            shift_part=x_norm,
            perturb_part=math.sqrt(max(0.0, pert.to_float(eps))),
            blocks=(), tail_bound=tail_bound(machine, state, k_max, t),
            total_sq=total, perturb_sq=pert,
        ))
    return out


# -- the two halves of the dichotomy ----------------------------------------

@dataclass
class StageTrace:
    n: int
    k: int
    window: tuple          # [m_k, T_k - m_k)
    times: tuple
    min_total: float
    argmin_t: int
    certified_bound: float  # (2/(p+1))^(1/p) * n * ||a_k||_2
    stage_bound: float      # (2/(p+1))^(1/p) * n
    tail_at_min: float
    slack: float            # min over t of total - (stage_bound - tail)
    in_truncation: bool

    @property
    def ok(self) -> bool:
        return self.slack >= 0 and self.min_total + self.tail_at_min >= self.certified_bound


def lower_constant(p: PNorm) -> float:
    return 1.0 if p is PNorm.INF else (2.0 / (p.value + 1)) ** (1.0 / p.value)


def window_times(b: BlockInfo, rng: np.random.Generator | None = None, samples: int = 8) -> list[int]:
    """Structured sample of ``[m_k, T_k - m_k)``: edges, bump-disjoint zone, quartiles, random."""
    lo, hi = b.m, b.T - b.m  # half-open
    pts = {lo, lo + 1, hi - 1, hi - 2, 2 * b.m, b.T - 2 * b.m, (lo + hi) // 2,
           lo + (hi - lo) // 4, lo + 3 * (hi - lo) // 4}
    if rng is not None:
        span = hi - lo
        for _ in range(samples):
            # exact uniform draw over a possibly huge integer range
            nbits = span.bit_length()
            while True:
                r = int.from_bytes(rng.bytes((nbits + 7) // 8), "big") >> (8 * ((nbits + 7) // 8) - nbits)
                if r < span:
                    break
            pts.add(lo + r)
    return sorted(t for t in pts if lo <= t < hi)


def divergence_trace(machine: Machine, u, stages: Iterable[int], seed: int = 0,
                     samples: int = 8, k_max: int | None = None) -> list[StageTrace]:
    """Sample each stage's first block window and compare with the certified lower bound."""
    if machine.config.E.distance(u) > MEMBERSHIP_TOL:
        raise ValueError("divergence_trace needs u in E; use near_return for u outside E")
    k_max = k_max or machine.k_max
    rng = np.random.default_rng(seed)
    state = PointState.make(machine, u)
    c = lower_constant(machine.p)
    out = []
    for n in stages:
        if n > machine.feeds.n_stages:
            raise ValueError(f"stage {n} was not enumerated (N={machine.feeds.n_stages})")
        k = machine.feeds.stage_range(n)[0]
        b = machine.block(k)
        times = window_times(b, rng, samples)
        recs = [orbit_norm(machine, u, None, t, k_max, state=state) for t in times]
        amp = float(np.linalg.norm(state.amps[k - 1]))
        i = int(np.argmin([r.total for r in recs]))
        slack = min(r.total - (c * n - r.tail_bound) for r in recs)
        out.append(StageTrace(n, k, (b.m, b.T - b.m), tuple(times), recs[i].total, times[i],
                              c * n * amp, c * n, recs[i].tail_bound, slack, k <= k_max))
    return out


@dataclass
class NearReturn:
    n: int
    n0: int
    k_n: int
    t: int
    delta_norm: float
    deficit: float
    deficit_sq: SurdSum
    earlier_blocks_zero: bool
    tail: float
    bound: float        # per-block estimates assembled as in the return argument
    envelope: float     # L * n * 2^(n0+1-n)

    @property
    def ok(self) -> bool:
        return self.earlier_blocks_zero and self.deficit <= self.bound * (1 + 1e-12) + 1e-300


def first_stage(distance: float) -> int:
    """Least n0 with ``distance >= 2^-n0``."""
    if distance <= 0:
        raise ValueError("u lies in E")
    n0 = 0
    while distance < 2.0 ** -n0:
        n0 += 1
    return n0


def near_return(machine: Machine, u, n: int, k_max: int | None = None) -> NearReturn:
    """Deficit ``||R^{T_{k_n - 1}}(u, 0) - (u, 0)||`` at the best stage-n feed."""
    k_max = k_max or machine.k_max
    dist = machine.config.E.distance(u)
    if dist <= MEMBERSHIP_TOL:
        raise ValueError("near_return needs u outside E")
    n0 = first_stage(dist)
    if n <= n0:
        raise ValueError(f"stage {n} must exceed n0={n0} (rho(u,E)={dist:.6g})")
    if n > machine.feeds.n_stages:
        raise ValueError(f"stage {n} was not enumerated (N={machine.feeds.n_stages})")
    state = PointState.make(machine, u)
    ks = list(machine.feeds.stage_range(n))
    norms = np.linalg.norm(state.amps[np.array(ks) - 1], axis=1)
    k_n = ks[int(np.argmin(norms))]
    t = machine.schedule.T(k_n - 1)
    rec = orbit_norm(machine, u, None, t, k_max, state=state)
    zero = True
    for r in range(1, min(k_n, k_max + 1)):
        for j in range(1, machine.d):
            v, c = block_state(machine, r, state.amps_exact[r - 1][j - 1], t, {})
            zero = zero and v == 0 and c == 0
    L = float(machine.L)
    per_copy = []
    for j in range(machine.d - 1):
        s = 0.0
        for b in machine.blocks[k_n - 1:]:
            a = abs(float(state.amps[b.k - 1, j]))
            if b.k == k_n:
                s += L * b.n * a
            else:
                s += L * b.n * (t / b.m) * a
        per_copy.append(s)
    return NearReturn(n, n0, k_n, t, float(norms.min()), rec.perturb_part, rec.perturb_sq, zero,
                      rec.tail_bound, math.sqrt(sum(s * s for s in per_copy)),
                      L * n * 2.0 ** (n0 + 1 - n))


def coordinate(machine: Machine, state: PointState, j: int, slot: int, t: int,
               shifted: Mapping | None = None) -> SurdSum:
    """Exact value of slot ``slot`` of copy j in ``R^t(u, x)``."""
    if shifted is None:
        shifted = shift_x(machine, state.x, t)
    val = SurdSum(shifted.get((j, slot), Fraction(0)))
    k, pos = machine.locate(slot)
    if k is None:
        return val
    b = machine.block(k)
    a = state.amps_exact[k - 1][j - 1]
    d = bump_value(b.T, b.m, t, pos - 1)
    if d and a:
        if machine.p is PNorm.TWO:
            val = val + SurdSum(Fraction(0), ((k, a * d),))
        else:
            val = val + SurdSum(machine.eps_pow[k - 1] * a * d)
    return val


@dataclass
class Probe:
    exact: SurdSum
    value: float

    @property
    def is_zero(self) -> bool:
        return self.exact.rational == 0 and not self.exact.coeffs


def weak_probe(machine: Machine, u, x, functional: Mapping, k: int) -> Probe:
    """``|f(R^{T_k}(u, x)) - f(u, x)|`` for a finitely supported coordinate functional.

    ``functional`` maps ``(j, slot)`` to a rational coefficient.
    """
    state = PointState.make(machine, u, x)
    t = machine.schedule.T(k)
    shifted = shift_x(machine, state.x, t)
    diff = SurdSum()
    for (j, s), c in _frac_map(functional).items():
        now = coordinate(machine, state, j, s, t, shifted)
        before = state.x.get((j, s), Fraction(0))
        diff = diff + SurdSum(c * (now.rational - before), tuple((kk, c * v) for kk, v in now.coeffs))
    return Probe(diff, abs(diff.to_float(machine.eps_float)))
