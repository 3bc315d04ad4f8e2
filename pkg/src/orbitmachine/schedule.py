"""Block sizes m_k, cycle lengths T_k and feed magnitudes eps_k.

``T_0 = 1``, ``m_1 = 1``, ``m_k = T_{k-1} - m_{k-1}`` and ``T_k`` is either
``(5^(dn) + 1) T_{k-1}`` (the growth needed for the boundedness argument) or
``factor * T_{k-1}`` for a desk-scale toy run.  Everything is integer; the
feed magnitude ``eps_k = n / m_k^((p+1)/p)`` is carried as the pair
``(n, m_k)`` and only ever raised to the p-th power exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .carousel import PNorm

PAPER = "paper"
TOY = "toy"

PASS, FAIL, NOT_APPLICABLE = "PASS", "FAIL", "NOT-APPLICABLE"


@dataclass(frozen=True)
class Variant:
    kind: str = PAPER
    factor: int | None = None

    def __post_init__(self):
        if self.kind not in (PAPER, TOY):
            raise ValueError(f"unknown schedule variant {self.kind!r}")
        if self.kind == TOY:
            if self.factor is None or int(self.factor) != self.factor:
                raise ValueError("toy schedule needs an integer factor")
            if self.factor < 5:
                raise ValueError(f"toy factor must be at least 5, got {self.factor}")
        elif self.factor is not None:
            raise ValueError("the paper variant takes no factor")

    @classmethod
    def toy(cls, factor: int = 5) -> "Variant":
        return cls(TOY, factor)

    def __str__(self):
        return PAPER if self.kind == PAPER else f"toy({self.factor})"


@dataclass(frozen=True)
class Entry:
    k: int
    n: int
    m: int
    T: int

    def eps_pow(self, p: PNorm) -> Fraction:
        """``eps_k^p`` for p=1,2 and ``eps_k`` for p=inf, exactly."""
        if p is PNorm.INF:
            return Fraction(self.n, self.m)
        q = p.value
        return Fraction(self.n ** q, self.m ** (q + 1))

    def eps(self, p: PNorm):
        """eps_k itself: a Fraction for p=1 and p=inf, a float for p=2."""
        if p is PNorm.TWO:
            return self.n / (self.m * math.sqrt(self.m))
        return self.eps_pow(p)


@dataclass(frozen=True)
class Schedule:
    d: int
    p: PNorm
    variant: Variant
    entries: tuple

    T0 = 1

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, k: int) -> Entry:
        if not 1 <= k <= len(self.entries):
            raise IndexError(f"block {k} outside 1..{len(self.entries)}")
        return self.entries[k - 1]

    def T(self, k: int) -> int:
        return self.T0 if k == 0 else self[k].T

    def m(self, k: int) -> int:
        return self[k].m

    def growth(self, k: int) -> int:
        """Ratio ``T_k / T_{k-1}`` prescribed by the variant."""
        if self.variant.kind == TOY:
            return self.variant.factor
        return 5 ** (self.d * self[k].n) + 1


def build_schedule(d: int, p, stage_of, k_max: int, variant: Variant = Variant()) -> Schedule:
    """Build entries ``k = 1..k_max``; ``stage_of`` maps k to its stage n.

    ``stage_of`` may be a callable, a mapping, or a sequence indexed from k=1.
    """
    p = PNorm.parse(p)
    if d < 2:
        raise ValueError("d must be at least 2")
    if k_max < 1:
        raise ValueError("k_max must be positive")
    stage = _stage_lookup(stage_of)
    entries = []
    T_prev, m_prev = 1, None
    last_n = 0
    for k in range(1, k_max + 1):
        n = int(stage(k))
        if n < 1 or n < last_n:
            raise ValueError(f"stage map must be positive and non-decreasing (k={k}, n={n})")
        last_n = n
        m = 1 if k == 1 else T_prev - m_prev
        growth = variant.factor if variant.kind == TOY else 5 ** (d * n) + 1
        T = growth * T_prev
        if 4 * m > T:
            raise ValueError(f"schedule breaks 4m <= T at k={k}: m={m}, T={T}")
        entries.append(Entry(k, n, m, T))
        T_prev, m_prev = T, m
    return Schedule(d, p, variant, tuple(entries))


def _stage_lookup(stage_of) -> Callable[[int], int]:
    if callable(stage_of):
        return stage_of
    if isinstance(stage_of, Mapping):
        return stage_of.__getitem__
    seq = list(stage_of)
    return lambda k: seq[k - 1]


@dataclass
class Check:
    name: str
    status: str
    violations: list = field(default_factory=list)


@dataclass
class InvariantReport:
    checks: list

    @property
    def ok(self) -> bool:
        return all(c.status != FAIL for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def check_invariants(s: Schedule) -> InvariantReport:
    """Re-verify every schedule invariant from the stored integers."""
    E = s.entries
    checks = []

    bad = [] if E and E[0].m == 1 else [1]
    bad += [e.k for prev, e in zip(E, E[1:]) if e.m != prev.T - prev.m]
    checks.append(Check("m_recurrence", FAIL if bad else PASS, bad))

    bad = []
    T_prev = s.T0
    for e in E:
        if e.T != s.growth(e.k) * T_prev:
            bad.append(e.k)
        T_prev = e.T
    checks.append(Check("T_recurrence", FAIL if bad else PASS, bad))

    bad = [e.k for e in E if 4 * e.m > e.T]
    checks.append(Check("four_m_le_T", FAIL if bad else PASS, bad))

    bad = []
    Ts = [s.T0] + [e.T for e in E]
    for l in range(len(Ts)):
        for r in range(l + 1, len(Ts)):
            if Ts[r] % Ts[l]:
                bad.append((l, r))
    checks.append(Check("divisibility", FAIL if bad else PASS, bad))

    if s.variant.kind == PAPER:
        bad = [e.k for e, nxt in zip(E, E[1:]) if nxt.m < 5 ** (s.d * e.n) * e.m]
        checks.append(Check("growth_5_dn", FAIL if bad else PASS, bad))
    else:
        checks.append(Check("growth_5_dn", NOT_APPLICABLE, []))

    # eps_k * m_k^((p+1)/p) = n, compared on p-th powers
    bad = []
    for e in E:
        if s.p is PNorm.INF:
            if e.eps_pow(s.p) * e.m != e.n:
                bad.append(e.k)
        elif e.eps_pow(s.p) * Fraction(e.m) ** (s.p.value + 1) != e.n ** s.p.value:
            bad.append(e.k)
    checks.append(Check("eps_formula", FAIL if bad else PASS, bad))

    bad = [e.k for prev, e in zip(E, E[1:]) if e.n < prev.n]
    checks.append(Check("stage_monotone", FAIL if bad else PASS, bad))
    return InvariantReport(checks)


def with_entry(s: Schedule, k: int, **changes) -> Schedule:
    """Copy of ``s`` with block k's fields replaced (for negative controls)."""
    entries = list(s.entries)
    entries[k - 1] = replace(entries[k - 1], **changes)
    return replace(s, entries=tuple(entries))


def paper_horizon(d: int, stage_of, bits: int = 256) -> int:
    """Largest k with ``T_k < 2^bits`` under the ``paper`` variant growth rule."""
    stage = _stage_lookup(stage_of)
    T, k = 1, 0
    while True:
        T *= 5 ** (d * stage(k + 1)) + 1
        if T >= 2 ** bits:
            return k
        k += 1
