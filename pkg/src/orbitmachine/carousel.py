"""Single-block shift-and-feed machine on a T-cycle.

The machine acts on ``R (+) l_p^T`` by ``R(a, y) = (a, S(y) + F(a))`` where
``S`` rotates the cycle one place and ``F(a)`` deposits ``+eps*a`` on
positions ``1..m`` and ``-eps*a`` on ``m+1..2m``.  Started from ``(a, 0)`` the
state after ``t`` steps is a standing tent minus a copy of the same tent
rotated by ``t``; everything here is built on that picture.

Positions are 1-based at every public interface.  All arithmetic is exact:
amplitudes and feed magnitudes are :class:`fractions.Fraction`, and p-norm
inequalities are compared on p-th powers so that no root is ever taken.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence


class PNorm(enum.Enum):
    """Norm selector for the coordinate spaces ``l_p``."""

    ONE = 1
    TWO = 2
    INF = "inf"

    @classmethod
    def parse(cls, value) -> "PNorm":
        if isinstance(value, PNorm):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            if key in ("inf", "infinity", "oo", "max"):
                return cls.INF
            value = int(key)
        if isinstance(value, float) and math.isinf(value):
            return cls.INF
        if value == 1:
            return cls.ONE
        if value == 2:
            return cls.TWO
        raise ValueError(f"unsupported p-norm {value!r}; expected 1, 2 or 'inf'")

    @property
    def exponent(self) -> int | None:
        return None if self is PNorm.INF else self.value

    def __str__(self) -> str:
        return str(self.value)


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    return Fraction(x)


@dataclass(frozen=True)
class CarouselParams:
    T: int
    m: int
    eps: Fraction
    p: PNorm = PNorm.TWO

    def __post_init__(self):
        object.__setattr__(self, "eps", as_fraction(self.eps))
        object.__setattr__(self, "p", PNorm.parse(self.p))
        if int(self.T) != self.T or int(self.m) != self.m:
            raise ValueError("T and m must be integers")
        if self.m < 1 or self.T < 1:
            raise ValueError(f"T and m must be positive (got T={self.T}, m={self.m})")
        if 4 * self.m > self.T:
            raise ValueError(f"need 4m <= T, got m={self.m}, T={self.T}")
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")


@dataclass(frozen=True)
class CarouselProfile:
    """State ``P R^t (a, 0)``: sparse map from 1-based position to value."""

    params: CarouselParams
    amplitude: Fraction
    time: int
    values: dict = field(default_factory=dict)

    def dense(self) -> list[Fraction]:
        out = [Fraction(0)] * self.params.T
        for i, v in self.values.items():
            out[i - 1] = v
        return out

    @property
    def support(self) -> list[int]:
        return sorted(self.values)

    @classmethod
    def from_dense(cls, params, amplitude, time, dense: Sequence) -> "CarouselProfile":
        vals = {i + 1: Fraction(v) for i, v in enumerate(dense) if v != 0}
        return cls(params, as_fraction(amplitude), time, vals)

    def __eq__(self, other):
        if not isinstance(other, CarouselProfile):
            return NotImplemented
        return (self.params, self.amplitude, self.time, self.values) == (
            other.params, other.amplitude, other.time, other.values)

    def __hash__(self):
        return hash((self.params, self.amplitude, self.time, tuple(sorted(self.values.items()))))


# -- the two-bump picture -------------------------------------------------

def tent(y: int, m: int) -> int:
    """Cumulative feed pattern: ``y+1`` on ``[0, m)``, ``2m-1-y`` on ``[m, 2m-1)``, else 0."""
    if y < 0:
        return 0
    if y < m:
        return y + 1
    if y < 2 * m - 1:
        return 2 * m - 1 - y
    return 0


def bump_value(T: int, m: int, t: int, x: int) -> int:
    """Integer profile ``D`` at 0-based position ``x``; the state is ``eps*a*D``."""
    t %= T
    x %= T
    return tent(x, m) - tent((x - t) % T, m)


def _sum_linear(alpha: int, beta: int, lo: int, hi: int) -> int:
    # sum of alpha + beta*i for i in [lo, hi)
    n = hi - lo
    if n <= 0:
        return 0
    return n * alpha + beta * (hi * (hi - 1) - lo * (lo - 1)) // 2


def _abs_sum_linear(alpha: int, beta: int, n: int) -> int:
    if beta < 0:
        alpha, beta = alpha + beta * (n - 1), -beta
    if beta == 0:
        return n * abs(alpha)
    neg = 0 if alpha >= 0 else min(n, (-alpha + beta - 1) // beta)
    return _sum_linear(alpha, beta, neg, n) - _sum_linear(alpha, beta, 0, neg)


def _segments(T: int, m: int, t: int, skip: Iterable[int] = ()):
    """Yield ``(start, length, alpha, beta)`` with ``D(start+i) = alpha + beta*i``."""
    t %= T
    skip = {s % T for s in skip}
    cuts = {0, T, m, 2 * m - 1, t, (t + m) % T, (t + 2 * m - 1) % T}
    for s in skip:
        cuts.update((s, s + 1))
    cuts = sorted(c for c in cuts if 0 <= c <= T)
    for b0, b1 in zip(cuts, cuts[1:]):
        if b0 in skip and b1 == b0 + 1:
            continue
        n = b1 - b0
        alpha = bump_value(T, m, t, b0)
        beta = bump_value(T, m, t, b0 + 1) - alpha if n > 1 else 0
        yield b0, n, alpha, beta


def bump_power_sum(T: int, m: int, t: int, p, skip: Iterable[int] = ()) -> int:
    """Exact ``sum |D|^p`` (p=1,2) or ``max |D|`` (p=inf) over the cycle.

    Runs in O(1 + len(skip)) regardless of T, m and t; positions listed in
    ``skip`` (0-based) are left out.
    """
    p = PNorm.parse(p)
    if t % T == 0:
        return 0
    total = 0
    for _, n, alpha, beta in _segments(T, m, t, skip):
        if p is PNorm.INF:
            total = max(total, abs(alpha), abs(alpha + beta * (n - 1)))
        elif p is PNorm.ONE:
            total += _abs_sum_linear(alpha, beta, n)
        else:
            s1 = n * (n - 1) // 2
            s2 = (n - 1) * n * (2 * n - 1) // 6
            total += n * alpha * alpha + 2 * alpha * beta * s1 + beta * beta * s2
    return total


# -- operations ------------------------------------------------------------

def feed_vector(params: CarouselParams, a) -> CarouselProfile:
    a = as_fraction(a)
    v = params.eps * a
    vals = {}
    if v != 0:
        for i in range(1, params.m + 1):
            vals[i] = v
            vals[i + params.m] = -v
    return CarouselProfile(params, a, 1, vals)


def shift_apply(values: Sequence) -> list:
    """Rotate one place: position i receives position i-1, position 1 receives T."""
    values = list(values)
    if not values:
        return values
    return [values[-1]] + values[:-1]


def step(state: CarouselProfile) -> CarouselProfile:
    """One application of shift-then-feed, done on the sparse representation."""
    params = state.params
    T, m = params.T, params.m
    # 1-based position i moves to i+1, the last one wraps to 1
    y = {i % T + 1: v for i, v in state.values.items()}
    v = params.eps * state.amplitude
    if v:
        for i in range(1, m + 1):
            y[i] = y.get(i, 0) + v
            y[i + m] = y.get(i + m, 0) - v
        y = {i: w for i, w in y.items() if w}
    return CarouselProfile(params, state.amplitude, state.time + 1, y)


def zero_state(params: CarouselParams, a) -> CarouselProfile:
    return CarouselProfile(params, as_fraction(a), 0, {})


def iterate(params: CarouselParams, a, t: int) -> CarouselProfile:
    """t-fold :func:`step` from the zero state; the reference path for small T."""
    state = zero_state(params, a)
    for _ in range(t):
        state = step(state)
    return state


def state_at(params: CarouselParams, a, t: int) -> CarouselProfile:
    """Closed-form state after ``t`` steps from ``(a, 0)``, O(m) work."""
    if t < 0:
        raise ValueError("t must be non-negative")
    a = as_fraction(a)
    T, m = params.T, params.m
    scale = params.eps * a
    vals = {}
    r = t % T
    if scale != 0 and r != 0:
        # fed tent at the origin minus the same tent carried forward by r
        D = {}
        for y in range(2 * m - 1):
            D[y] = D.get(y, 0) + tent(y, m)
            x = (r + y) % T
            D[x] = D.get(x, 0) - tent(y, m)
        scaled = {}
        for x in sorted(D):
            d = D[x]
            if d:
                if d not in scaled:
                    scaled[d] = scale * d
                vals[x + 1] = scaled[d]
    return CarouselProfile(params, a, t, vals)


def profile_norm_pow(profile: CarouselProfile, p=None) -> Fraction:
    """``||y||_p^p`` for p=1,2 and ``||y||_inf`` for p=inf, exactly."""
    p = PNorm.parse(p if p is not None else profile.params.p)
    vals = profile.values.values()
    if p is PNorm.INF:
        return max((abs(v) for v in vals), default=Fraction(0))
    return sum((abs(v) ** p.value for v in vals), Fraction(0))


def profile_norm(profile: CarouselProfile, p=None):
    """The p-norm: a Fraction for p=1 and p=inf, a float for p=2."""
    p = PNorm.parse(p if p is not None else profile.params.p)
    s = profile_norm_pow(profile, p)
    if p is PNorm.TWO:
        return math.sqrt(s)
    return s


def state_norm_pow(params: CarouselParams, a, t: int) -> Fraction:
    """Same value as ``profile_norm_pow(state_at(...))`` without building the profile."""
    a = as_fraction(a)
    p = params.p
    s = bump_power_sum(params.T, params.m, t, p)
    scale = abs(params.eps * a)
    if p is PNorm.INF:
        return scale * s
    return scale ** p.value * s


def estimate_constant_L(p):
    """``(2^(p+3)/(p+1))^(1/p)``; 1 for p=inf.  Exact where rational."""
    p = PNorm.parse(p)
    if p is PNorm.INF:
        return Fraction(1)
    if p is PNorm.ONE:
        return Fraction(8)
    return math.sqrt(32 / 3)


def estimate_constant_L_pow(p) -> Fraction:
    """``L^p`` as an exact rational (``L`` itself for p=inf)."""
    p = PNorm.parse(p)
    if p is PNorm.INF:
        return Fraction(1)
    return Fraction(2 ** (p.value + 3), p.value + 1)


def lower_constant_pow(p) -> Fraction:
    """p-th power of the lower-estimate constant ``(2/(p+1))^(1/p)``."""
    p = PNorm.parse(p)
    if p is PNorm.INF:
        return Fraction(1)
    return Fraction(2, p.value + 1)


# -- local estimates -------------------------------------------------------

LOWER, UNIFORM, SMALL_TIME = "lower", "uniform", "small_time"


@dataclass(frozen=True)
class EstimateRecord:
    t: int
    kind: str
    norm_pow: Fraction
    bound_pow: Fraction
    satisfied: bool
    p: PNorm

    def _root(self, x: Fraction) -> float:
        if self.p is PNorm.TWO:
            return math.sqrt(x)
        return float(x)

    @property
    def norm(self) -> float:
        return self._root(self.norm_pow)

    @property
    def bound(self) -> float:
        return self._root(self.bound_pow)


@dataclass
class EstimateReport:
    params: CarouselParams
    amplitude: Fraction
    records: list[EstimateRecord]
    L: object

    @property
    def violations(self) -> list[EstimateRecord]:
        return [r for r in self.records if not r.satisfied]

    @property
    def ok(self) -> bool:
        return not self.violations


def estimate_bounds_pow(params: CarouselParams, a, t: int) -> dict:
    """The active bounds at time t, as p-th powers keyed by kind."""
    a = abs(as_fraction(a))
    T, m, eps, p = params.T, params.m, params.eps, params.p
    Lp = estimate_constant_L_pow(p)
    out = {}
    if p is PNorm.INF:
        if m <= t <= T - m:
            out[LOWER] = eps * m * a
        out[UNIFORM] = Lp * eps * m * a
        if t <= m:
            out[SMALL_TIME] = Lp * eps * t * a
        return out
    k = p.value
    base = (eps * a) ** k
    if m <= t <= T - m:
        out[LOWER] = lower_constant_pow(p) * base * m ** (k + 1)
    out[UNIFORM] = Lp * base * m ** (k + 1)
    if t <= m:
        out[SMALL_TIME] = Lp * base * m * t ** k
    return out


def verify_estimates(params: CarouselParams, a) -> EstimateReport:
    """Check the lower, uniform and small-time estimates at every t in 1..T.

    Violations are reported in the returned records rather than raised.
    """
    a = as_fraction(a)
    if a == 0:
        raise ValueError("amplitude must be non-zero")
    records = []
    for t in range(1, params.T + 1):
        norm_pow = state_norm_pow(params, a, t)
        for kind, bound in estimate_bounds_pow(params, a, t).items():
            ok = norm_pow >= bound if kind == LOWER else norm_pow <= bound
            records.append(EstimateRecord(t, kind, norm_pow, bound, ok, params.p))
    return EstimateReport(params, a, records, estimate_constant_L(params.p))
