"""Block vector systems in spaces with a symmetric basis.

Each system lives on a finite block F of basis slots and consists of n
vectors z_1..z_n together with a permutation pi of F.  Every permutation
operator S with S(e_i) = e_{pi(i)} on F then cycles the z's:
S(z_l) = z_{l+1}, indices mod n.  Three constructions cover the three
asymptotic behaviours of a symmetric norm:

* Case I (c0-like): z_l is a normalised run of m equal coefficients and pi
  translates runs, valid when lambda(n m) / lambda(m) < 2.
* Case II (l1-like): the dual construction, only built here for l1 itself.
* Case III (l2-like): Walsh vectors indexed by sign patterns.

plus the plain unit-vector system used by the operator machine for c0 and l^p.
Coefficient patterns are stored as small integers so the cycling property is
checked exactly; the common normalisation is a separate scalar.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .carousel import PNorm

__all__ = [
    "SymmetricNorm", "LpNorm", "LorentzNorm", "CallableNorm", "CaseHypothesisError",
    "ZSystem", "EquivalenceEstimate", "CaseReport", "DualityChain",
    "lambda_mu", "dual_norm", "case1_system", "case2_system", "case3_system",
    "unit_system", "walsh_signs", "walsh_permutation", "shift_simulation_check",
    "permutation_order", "equivalence_estimate", "case2_duality_chain", "detect_case",
]

CASE_I, CASE_II, CASE_III, UNIT = "I", "II", "III", "UNIT"


class SymmetricNorm:
    """A norm on finitely supported sequences, invariant under permutations
    and sign changes, with ``||e_1|| = 1``."""

    name = "norm"
    p: PNorm | None = None

    def __call__(self, x) -> float:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"name": self.name}


@dataclass(frozen=True)
class LpNorm(SymmetricNorm):
    p: PNorm = PNorm.TWO

    def __post_init__(self):
        object.__setattr__(self, "p", PNorm.parse(self.p))

    @property
    def name(self):
        return f"l{self.p.value}"

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            return 0.0
        return float(np.linalg.norm(x, ord=np.inf if self.p is PNorm.INF else self.p.value))

    def pow_exact(self, x) -> Fraction:
        """Exact ``||x||^p`` (plain ``||x||`` for p=inf) of a rational vector."""
        vals = [abs(Fraction(v)) for v in x]
        if self.p is PNorm.INF:
            return max(vals, default=Fraction(0))
        return sum((v ** self.p.value for v in vals), Fraction(0))

    def describe(self):
        return {"name": "lp", "p": self.p.value}


@dataclass(frozen=True)
class LorentzNorm(SymmetricNorm):
    """``sum_i i^(-alpha) x*_i`` over the decreasing rearrangement of |x|."""

    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("Lorentz exponent must lie in (0, 1)")

    @property
    def name(self):
        return f"lorentz({self.alpha:g})"

    def __call__(self, x) -> float:
        a = np.sort(np.abs(np.asarray(x, dtype=float)))[::-1]
        w = np.arange(1, a.size + 1, dtype=float) ** -self.alpha
        return float(a @ w)

    def describe(self):
        return {"name": "lorentz", "alpha": self.alpha}


class CallableNorm(SymmetricNorm):
    """Wrap a user function; symmetry is the caller's promise."""

    def __init__(self, fn: Callable, name: str = "custom"):
        self.fn = fn
        self.name = name

    def __call__(self, x) -> float:
        return float(self.fn(np.asarray(x, dtype=float)))


def dual_norm(norm: SymmetricNorm, f, starts: int = 4, seed: int = 0) -> float:
    """``sup { <f, x> : ||x|| <= 1 }`` by constrained local maximisation.

    The problem is a linear objective over a convex body, so any local
    maximum is global; several random starts guard against solver stalls.
    """
    f = np.asarray(f, dtype=float)
    rng = np.random.default_rng(seed)
    cons = [{"type": "ineq", "fun": lambda x: 1.0 - norm(x)}]
    best = 0.0
    for _ in range(starts):
        x0 = rng.standard_normal(f.size)
        x0 /= 2.0 * norm(x0)
        res = minimize(lambda x: -float(f @ x), x0, method="SLSQP", constraints=cons,
                       options={"maxiter": 500, "ftol": 1e-12})
        x = res.x
        nx = norm(x)
        if nx > 0:
            best = max(best, float(f @ x) / max(nx, 1.0))
    return best


def lambda_mu(norm: SymmetricNorm, n: int, method: str = "symmetric"):
    """``lambda(n) = ||e_1+..+e_n||`` and ``mu(n) = ||e*_1+..+e*_n||``.

    For a symmetric norm averaging a maximiser of the sum functional over
    permutations keeps the sum and does not raise the norm, so the dual sup
    is attained at a constant vector and ``mu(n) = n / lambda(n)``.
    ``method="optimize"`` solves the dual problem numerically instead.
    """
    if n < 1:
        raise ValueError("n must be positive")
    lam = norm(np.ones(n))
    if method == "symmetric":
        mu = n / lam
    elif method == "optimize":
        mu = dual_norm(norm, np.ones(n))
    else:
        raise ValueError(f"unknown method {method!r}")
    return lam, mu


class CaseHypothesisError(ValueError):
    def __init__(self, msg, ratio):
        super().__init__(msg)
        self.ratio = ratio


@dataclass(frozen=True)
class ZSystem:
    """n vectors on the slots of one block plus the cycling permutation.

    ``pattern[l-1, i]`` is the integer coefficient of z_l at ``slots[i]``;
    the vectors themselves are ``scale * pattern``.  ``perm[i]`` is the
    position inside ``slots`` of the image of ``slots[i]``.
    """

    case: str
    n: int
    slots: tuple
    pattern: np.ndarray
    perm: tuple
    scale: float = 1.0
    m: int | None = None
    lam: float | None = None
    mu: float | None = None
    notes: tuple = ()

    def __post_init__(self):
        p = np.asarray(self.pattern, dtype=np.int64)
        p.setflags(write=False)
        object.__setattr__(self, "pattern", p)
        if p.shape != (self.n, len(self.slots)):
            raise ValueError(f"pattern shape {p.shape} does not match n={self.n}, |F|={len(self.slots)}")
        if len(self.perm) != len(self.slots):
            raise ValueError("permutation length differs from block size")

    @property
    def size(self) -> int:
        return len(self.slots)

    def vectors(self) -> np.ndarray:
        return self.scale * self.pattern.astype(float)

    def vector(self, l: int) -> np.ndarray:
        return self.scale * self.pattern[l - 1].astype(float)

    def slot_map(self) -> dict:
        return {self.slots[i]: self.slots[j] for i, j in enumerate(self.perm)}

    def combine(self, a) -> np.ndarray:
        """Coordinates of ``sum_l a_l z_l`` on the block."""
        a = np.asarray(a, dtype=float)
        return self.scale * (a @ self.pattern)

    def order(self) -> int:
        return permutation_order(self.perm)

    def to_json(self) -> dict:
        return {
            "case": self.case, "n": self.n, "slots": list(self.slots),
            "pattern": self.pattern.tolist(), "perm": list(self.perm),
            "scale": self.scale, "m": self.m, "lam": self.lam, "mu": self.mu,
            "notes": list(self.notes),
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "ZSystem":
        return cls(obj["case"], obj["n"], tuple(obj["slots"]), np.array(obj["pattern"]),
                   tuple(obj["perm"]), obj["scale"], obj.get("m"), obj.get("lam"),
                   obj.get("mu"), tuple(obj.get("notes", ())))


def permutation_order(perm: Sequence[int]) -> int:
    seen = [False] * len(perm)
    order = 1
    for i in range(len(perm)):
        if seen[i]:
            continue
        length, j = 0, i
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        order = order * length // math.gcd(order, length)
    return order


def _block_translation(n: int, m: int) -> tuple:
    # run l (0-based) moves onto run l+1, the last run wraps to the first
    return tuple(((i // m + 1) % n) * m + i % m for i in range(n * m))


def _run_pattern(n: int, m: int) -> np.ndarray:
    pat = np.zeros((n, n * m), dtype=np.int64)
    for l in range(n):
        pat[l, l * m:(l + 1) * m] = 1
    return pat


def case1_system(n: int, m: int, norm: SymmetricNorm, k: int = 0) -> ZSystem:
    """Runs of m equal coefficients on slots k+1..k+n*m, scaled by 1/lambda(m)."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    lam_m = norm(np.ones(m))
    ratio = norm(np.ones(n * m)) / lam_m
    if not ratio < 2:
        raise CaseHypothesisError(
            f"lambda(n m)/lambda(m) = {ratio:.6g} is not below 2 (n={n}, m={m})", ratio)
    slots = tuple(range(k + 1, k + n * m + 1))
    return ZSystem(CASE_I, n, slots, _run_pattern(n, m), _block_translation(n, m),
                   1.0 / lam_m, m=m, lam=lam_m)


def case2_system(n: int, m: int, norm: SymmetricNorm, k: int = 0) -> ZSystem:
    """The dual-side construction, available for l1 only.

    In l1 the normalised run ``(e_{k+1}+..+e_{k+m})/m`` already satisfies
    ``z*_1(z_1) = 1 >= 1/2`` and the other z's are its translates.
    """
    if not (isinstance(norm, LpNorm) and norm.p is PNorm.ONE):
        raise NotImplementedError("the dual construction is only built for the l1 norm")
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    slots = tuple(range(k + 1, k + n * m + 1))
    return ZSystem(CASE_II, n, slots, _run_pattern(n, m), _block_translation(n, m),
                   1.0 / m, m=m, lam=float(m), mu=1.0,
                   notes=("dual construction specialised to l1",))


def walsh_signs(n: int) -> list:
    """The default bijection f: slot i -> sign pattern, first coordinate most significant."""
    return [tuple(1 if (i >> (n - 1 - l)) & 1 else -1 for l in range(n)) for i in range(2 ** n)]


def walsh_permutation(f: Sequence[tuple]) -> tuple:
    """``f^-1 o pi_hat o f`` with ``pi_hat(sigma) = sigma o tau^-1``."""
    index = {tuple(s): i for i, s in enumerate(f)}
    if len(index) != len(f):
        raise ValueError("f is not injective")
    # (sigma o tau^-1)(l) = sigma(l-1), cyclically
    return tuple(index[tuple(s[-1:]) + tuple(s[:-1])] for s in f)


def case3_system(n: int, f: Sequence[tuple] | None = None) -> ZSystem:
    """Walsh vectors ``z_l = sum_sigma sigma(l) e_{f^-1(sigma)}`` on slots 2^n+1..2^(n+1)."""
    if n < 1:
        raise ValueError("n must be positive")
    f = walsh_signs(n) if f is None else [tuple(s) for s in f]
    if len(f) != 2 ** n or set(f) != set(itertools.product((-1, 1), repeat=n)):
        raise ValueError("f must be a bijection onto the sign patterns")
    pattern = np.array(f, dtype=np.int64).T
    slots = tuple(range(2 ** n + 1, 2 ** (n + 1) + 1))
    return ZSystem(CASE_III, n, slots, pattern, walsh_permutation(f))


def unit_system(n: int, block: Sequence[int]) -> ZSystem:
    """z_l the l-th unit vector of the block, pi the n-cycle through it."""
    block = tuple(int(b) for b in block)
    if len(block) != n:
        raise ValueError(f"block has {len(block)} slots, expected {n}")
    if len(set(block)) != n:
        raise ValueError("block slots must be distinct")
    return ZSystem(UNIT, n, block, np.eye(n, dtype=np.int64), tuple((i + 1) % n for i in range(n)))


def shift_simulation_check(system: ZSystem, action=None) -> bool:
    """True iff moving every z_l along the slot action gives z_{l+1} exactly.

    ``action`` maps absolute slots to absolute slots (mapping or callable);
    it defaults to the system's own permutation.
    """
    if action is None:
        target = list(system.perm)
    else:
        move = action.__getitem__ if isinstance(action, Mapping) else action
        where = {s: i for i, s in enumerate(system.slots)}
        try:
            target = [where[move(s)] for s in system.slots]
        except KeyError:
            return False
        if len(set(target)) != len(target):
            return False
    pat = system.pattern
    moved = np.zeros_like(pat)
    moved[:, target] = pat
    return bool(np.array_equal(moved, np.roll(pat, -1, axis=0)))


@dataclass(frozen=True)
class EquivalenceEstimate:
    n: int
    norm: str
    p: PNorm
    lower: float
    upper: float
    samples: int

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("lower constant exceeds upper constant")


def _default_p(system: ZSystem, norm: SymmetricNorm) -> PNorm:
    if system.case == CASE_I:
        return PNorm.INF
    if system.case == CASE_II:
        return PNorm.ONE
    if system.case == CASE_III:
        return PNorm.TWO
    if norm.p is None:
        raise ValueError("give p explicitly for a unit system in a non-l^p norm")
    return norm.p


def equivalence_estimate(system: ZSystem, norm: SymmetricNorm, trials: int = 32,
                         p=None, seed: int = 0) -> EquivalenceEstimate:
    """Extremes of ``||sum a_l z_l|| / ||a||_p`` over test coefficient vectors.

    The test set is every single spike, the constant and alternating
    patterns, and ``trials`` seeded Gaussian directions.  The true
    equivalence constants lie outside the reported bracket.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    p = _default_p(system, norm) if p is None else PNorm.parse(p)
    n = system.n
    tests = [np.eye(n)[l] for l in range(n)]
    tests.append(np.ones(n))
    tests.append(np.array([(-1.0) ** l for l in range(n)]))
    rng = np.random.default_rng(seed)
    tests.extend(rng.standard_normal((trials, n)))
    cnorm = LpNorm(p)
    ratios = [norm(system.combine(a)) / cnorm(a) for a in tests if cnorm(a) > 0]
    return EquivalenceEstimate(n, norm.name, p, min(ratios), max(ratios), len(ratios))


@dataclass(frozen=True)
class DualityChain:
    """``||sum a z|| <= sum|a| <= 2 (sum s_l z*_l)(sum a z) <= 4 ||sum a z||``."""

    norm: Fraction
    coeff_sum: Fraction
    paired: Fraction

    @property
    def ok(self) -> bool:
        return self.norm <= self.coeff_sum <= 2 * self.paired <= 4 * self.norm


def case2_duality_chain(system: ZSystem, a) -> DualityChain:
    """Evaluate the l1 duality chain exactly for rational coefficients."""
    if system.case != CASE_II:
        raise ValueError("duality chain applies to the dual construction only")
    a = [Fraction(v) for v in a]
    m = system.m
    coords = [Fraction(0)] * system.size
    for l, al in enumerate(a):
        for i in np.flatnonzero(system.pattern[l]):
            coords[i] += al * Fraction(int(system.pattern[l, i]), m)
    norm = sum((abs(c) for c in coords), Fraction(0))
    # z*_l = run indicator / mu(m), mu(m) = 1 in l1; s_l = sign(a_l)
    paired = Fraction(0)
    for l, al in enumerate(a):
        s = 1 if al >= 0 else -1
        paired += s * sum((coords[i] for i in np.flatnonzero(system.pattern[l])), Fraction(0))
    return DualityChain(norm, sum((abs(v) for v in a), Fraction(0)), paired)


@dataclass(frozen=True)
class CaseReport:
    case: str | None
    conclusive: bool
    witnesses_I: dict = field(default_factory=dict)
    witnesses_II: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)


def _witness(f: Callable[[int], float], n: int, m_max: int):
    """Smallest m <= m_max with f(n m)/f(m) < 2, plus the ratio trail."""
    trail = []
    for m in range(1, m_max + 1):
        r = f(n * m) / f(m)
        trail.append(r)
        if r < 2:
            return m, trail
    return None, trail


def _stably_failing(trail: list) -> bool:
    # the ratio is not drifting down towards 2 over the second half of the search
    half = trail[len(trail) // 2:]
    return min(half) >= 2 and half[-1] >= half[0] - 1e-9


def detect_case(norm: SymmetricNorm, n_max: int = 8, m_max: int = 64) -> CaseReport:
    """Decide which construction applies by testing n = 2..n_max, m = 1..m_max.

    Case I (resp. II) is declared when every n has a witness m.  Case III is
    declared only when both ratios fail at some n without drifting towards 2;
    otherwise the report is inconclusive with no case chosen.
    """
    lam = lambda k: norm(np.ones(k))
    mu = lambda k: k / lam(k)
    w1, w2, fails = {}, {}, {}
    for n in range(2, n_max + 1):
        m, trail = _witness(lam, n, m_max)
        if m is None:
            fails.setdefault("I", {})[n] = trail[-1]
            if not _stably_failing(trail):
                fails.setdefault("unstable", set()).add(("I", n))
        else:
            w1[n] = m
        m, trail = _witness(mu, n, m_max)
        if m is None:
            fails.setdefault("II", {})[n] = trail[-1]
            if not _stably_failing(trail):
                fails.setdefault("unstable", set()).add(("II", n))
        else:
            w2[n] = m
    full = n_max - 1
    if len(w1) == full:
        return CaseReport(CASE_I, True, w1, w2, fails)
    if len(w2) == full:
        return CaseReport(CASE_II, True, w1, w2, fails)
    if not fails.get("unstable"):
        return CaseReport(CASE_III, True, w1, w2, fails)
    return CaseReport(None, False, w1, w2, fails)
