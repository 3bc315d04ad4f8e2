import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orbitmachine.carousel import PNorm
from orbitmachine.machine import (
    MachineConfig, PointState, SurdSum, build_machine, coordinate, dense_oracle,
    divergence_trace, first_stage, near_return, orbit, orbit_norm, shift_x, tail_bound,
    weak_probe, window_times,
)
from orbitmachine.schedule import Variant
from orbitmachine.sphere import SymmetricSet

E2 = SymmetricSet.pair([1.0, 0.0])


def machine(p="2", N=3, k_max=None, d=2, E=E2, factor=5):
    return build_machine(MachineConfig(d, p, E, N, Variant.toy(factor), k_max=k_max))


@pytest.fixture(scope="module")
def M2():
    return machine("2", k_max=3)


def test_surd_sum_arithmetic():
    a = SurdSum(Fraction(1, 2), ((1, Fraction(3)),))
    b = SurdSum(Fraction(1, 3), ((1, Fraction(-3)), (2, Fraction(1))))
    c = a + b
    assert c.rational == Fraction(5, 6) and c.coeffs == ((2, Fraction(1)),)
    assert c.to_float([10.0, 0.5]) == pytest.approx(5 / 6 + 0.5)
    assert SurdSum(Fraction(2)).is_rational


def test_config_validation():
    with pytest.raises(ValueError):
        MachineConfig(2, "2", SymmetricSet.pair([1, 0, 0]), 3)
    with pytest.raises(ValueError):
        MachineConfig(2, "2", E2, 0)
    with pytest.raises(ValueError):
        machine(k_max=10 ** 6)


def test_layout(M2):
    C = M2.feeds.C
    assert C[0] == 1 and [C[n] - C[n - 1] for n in (1, 2, 3)] == [2 * M2.K, 4 * M2.K, 8 * M2.K]
    assert M2.block(1).T == 5 and M2.block(2).offset == 5
    assert M2.locate(6) == (2, 1)
    assert M2.slot(2, 1) == 6
    with pytest.raises(ValueError):
        M2.locate(0)
    assert M2.locate(M2.used_slots + 1)[0] is None


def test_first_stage():
    assert first_stage(1.0) == 0
    assert first_stage(0.3) == 2
    with pytest.raises(ValueError):
        first_stage(0.0)


@pytest.mark.parametrize("p", ["1", "2", "inf"])
def test_closed_form_matches_dense(p):
    M = machine(p, k_max=3)
    u = [0.6, -0.8]
    x = {(1, 2): Fraction(1, 3), (1, 7): Fraction(-2)}
    fast = orbit(M, u, x, range(0, 126), k_max=3)
    slow = dense_oracle(M, u, x, steps=125, k_max=3)
    for a, b in zip(fast, slow):
        assert a.total_sq == b.total_sq
        assert a.perturb_sq == b.perturb_sq


def test_dense_oracle_budget(M2):
    with pytest.raises(ValueError):
        dense_oracle(M2, [0, 1], None, steps=10, budget=10)
    with pytest.raises(ValueError):
        dense_oracle(M2, [0, 1], {(1, 10 ** 4): 1}, steps=1, k_max=2)


def test_shift_isometry_without_feeds(M2):
    x = {(1, 1): Fraction(1), (1, 6): Fraction(-1, 2), (1, 31): Fraction(3)}
    nx = math.sqrt(1 + 0.25 + 9)
    for t in (0, 1, 7, 124, 5 ** 12 + 3):
        r = orbit_norm(M2, [0.0, 0.0], x, t)
        assert r.total == pytest.approx(nx) and r.perturb_part == 0


def test_shift_x_moves_within_block(M2):
    far = M2.used_slots + 3
    x = {(1, 5): 1, (1, 6): 2, (1, far): 7}
    y = shift_x(M2, {k: Fraction(v) for k, v in x.items()}, 1)
    assert y == {(1, 1): 1, (1, 7): 2, (1, far): 7}


def test_feeds_vanish_at_cycle_multiples(M2):
    u = [0.0, 1.0]
    for k in (1, 2, 3):
        t = M2.schedule.T(k)
        rec = orbit_norm(M2, u, None, t, k_max=M2.horizon)
        assert all(v == 0 for v in rec.blocks[:k])


def test_weak_probe_returns(M2):
    x = {(1, 2): Fraction(1, 7), (1, 9): Fraction(2)}
    f = {(1, 2): 1, (1, 9): Fraction(1, 2), (1, 20): 3}
    for k in (2, 3, 4):
        assert weak_probe(M2, [0.3, 0.2], x, f, k).is_zero
    # a functional reaching into block k+1 sees its feed
    assert not weak_probe(M2, [0.3, 0.2], None, {(1, 32): 1}, 2).is_zero


def test_coordinate_matches_profile(M2):
    st_ = PointState.make(M2, [0.0, 1.0])
    vals = [coordinate(M2, st_, 1, s, 1) for s in range(1, 6)]
    a = st_.amps_exact[0][0]
    assert [v.coeffs for v in vals] == [((1, a),), ((1, -a),), (), (), ()]


def test_tail_bound_behaviour(M2):
    assert tail_bound(M2, [0.0, 1.0], k_max=M2.horizon) == 0
    full = tail_bound(M2, [0.0, 1.0], k_max=3)
    assert full > 0
    assert tail_bound(M2, [0.0, 1.0], k_max=3, t=M2.schedule.T(3)) < full
    assert tail_bound(M2, [0.0, 0.0], k_max=3) == 0


def test_tail_bound_covers_truncation(M2):
    u = [0.2, 0.9]
    for t in (3, 17, 60, 111):
        short = orbit_norm(M2, u, None, t, k_max=2)
        full = orbit_norm(M2, u, None, t, k_max=M2.horizon)
        assert abs(full.total - short.total) <= short.tail_bound + 1e-12


def test_window_times_inside(M2):
    b = M2.block(3)
    ts = window_times(b, np.random.default_rng(0), 16)
    assert all(b.m <= t < b.T - b.m for t in ts)


def test_divergence_in_E():
    M = machine("2", N=3)
    for tr in divergence_trace(M, [1.0, 0.0], [1, 2, 3]):
        assert tr.ok and tr.min_total >= tr.stage_bound - tr.tail_at_min
    with pytest.raises(ValueError):
        divergence_trace(M, [0.0, 1.0], [1])


def test_near_return_outside_E():
    u = [1.0, 0.0]
    E = SymmetricSet.pair([0.0, 1.0])
    M = build_machine(MachineConfig(2, "2", E, 5, Variant.toy(5)))
    recs = [near_return(M, u, n) for n in range(2, 6)]
    assert all(r.ok for r in recs)
    assert recs[-1].deficit < recs[0].deficit / 2
    with pytest.raises(ValueError):
        near_return(M, [0.0, 1.0], 3)


@settings(max_examples=25, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.integers(0, 400),
       st.dictionaries(st.integers(1, 40), st.fractions(-3, 3, max_denominator=5), max_size=4))
def test_truncated_orbit_is_periodic(a, b, t, xs):
    M = _M1
    x = {(1, s): v for s, v in xs.items()}
    T = M.schedule.T(2)
    r0 = orbit_norm(M, [a, b], x, t, k_max=2)
    r1 = orbit_norm(M, [a, b], x, t + T, k_max=2)
    assert r0.total_sq == r1.total_sq


_M1 = machine("1", k_max=2)


def test_amplitude_examples(M2):
    a = M2.amplitudes([1.0, 0.0])
    assert np.allclose(np.abs(a), 1.0)
    w = M2.block(4).w
    assert abs(M2.amplitudes(w)[3, 0]) < 1e-12


def test_tail_bound_monotone(M2):
    vals = [tail_bound(M2, [0.3, 0.95], k_max=k) for k in range(1, M2.horizon + 1)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert vals[-1] == 0


def test_triangle_consistency(M2):
    x = {(1, 3): Fraction(2), (1, 20): Fraction(-1, 2)}
    nx = math.sqrt(4 + 0.25)
    for t in (1, 6, 40, 99):
        a = orbit_norm(M2, [0.6, 0.8], x, t).total
        b = orbit_norm(M2, [0.6, 0.8], None, t).total
        assert abs(a - b) <= nx + 1e-12


def test_block_lengths_example():
    M = build_machine(MachineConfig(2, "2", E2, 5, Variant.toy(5), k_max=6))
    assert [M.block(k).T for k in range(1, 7)] == [5, 25, 125, 625, 3125, 15625]
