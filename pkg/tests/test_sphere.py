import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orbitmachine.sphere import (
    SymmetricSet, UnitVector, build_net, covering_misses, default_K, delta, enumerate_feeds,
    perp_basis, projective_grid, rho, sample_sphere, stage_budget,
)


def line_sine(u, v):
    # independent oracle: |u x v| is the sine of the angle between the lines
    u = np.asarray(u, float) / np.linalg.norm(u)
    v = np.asarray(v, float) / np.linalg.norm(v)
    return float(np.linalg.norm(np.cross(u, v)))


def test_unit_vector_normalises():
    u = UnitVector([3.0, 4.0])
    assert np.allclose(u.coords, [0.6, 0.8])
    assert (-u) == UnitVector([-3, -4])
    with pytest.raises(ValueError):
        UnitVector([0.0, 0.0])


def test_rho_examples():
    e1, e2 = [1.0, 0.0], [0.0, 1.0]
    assert rho(e1, e2) == pytest.approx(1.0)
    assert rho(e1, [-1.0, 0.0]) == 0.0
    assert rho(e1, [1 / math.sqrt(2), 1 / math.sqrt(2)]) == pytest.approx(1 / math.sqrt(2))


vec3 = st.lists(st.floats(-1, 1, allow_nan=False), min_size=3, max_size=3).filter(
    lambda v: np.linalg.norm(v) > 1e-3)


@settings(max_examples=200, deadline=None)
@given(vec3, vec3, vec3)
def test_rho_is_pseudometric(a, b, c):
    u, v, w = (UnitVector(x) for x in (a, b, c))
    assert rho(u, v) == pytest.approx(line_sine(a, b), abs=1e-12)
    assert rho(u, v) == pytest.approx(rho(v, u), abs=1e-15)
    assert rho(u, -v) == pytest.approx(rho(u, v), abs=1e-15)
    assert rho(u, w) <= rho(u, v) + rho(v, w) + 1e-12
    assert 0.0 <= rho(u, v) <= 1.0


def test_cap_distance_is_infimum():
    # brute-force infimum over a dense sample of the cap boundary and interior
    E = SymmetricSet.cap([1.0, 0.0], 0.3)
    beta = math.asin(0.3)
    angles = np.linspace(-beta, beta, 20001)
    cap = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    for theta in np.linspace(0, math.pi, 37):
        u = np.array([math.cos(theta), math.sin(theta)])
        brute = float(np.min(rho(cap, u[None, :])))
        assert E.distance(u) == pytest.approx(brute, abs=2e-5)
    assert [1.0, 0.0] in E and [-1.0, 0.0] in E


def test_symmetric_set_json_roundtrip():
    E = SymmetricSet.from_json([{"type": "pair", "center": [0, 1, 0]},
                                {"type": "cap", "center": [1, 0, 0], "radius": 0.2}])
    assert SymmetricSet.from_json(E.to_json()) == E
    with pytest.raises(ValueError):
        SymmetricSet.from_json([{"type": "pair", "center": [1, 0], "radius": 0.1}])
    with pytest.raises(ValueError):
        SymmetricSet.from_json([{"type": "blob", "center": [1, 0]}])
    with pytest.raises(ValueError):
        SymmetricSet.cap([1, 0], 1.5)


def test_perp_basis_orthonormal():
    rng = np.random.default_rng(3)
    for d in (2, 3, 5):
        for v in sample_sphere(rng, d, 10):
            B = perp_basis(v)
            assert B.shape == (d - 1, d)
            assert np.allclose(B @ B.T, np.eye(d - 1), atol=1e-12)
            assert np.allclose(B @ v, 0, atol=1e-12)


def test_delta_scaling():
    E = SymmetricSet.pair([1.0, 0.0])
    v = [0.0, 1.0]
    out = delta(v, E, [1.0, 0.0])
    assert np.allclose(np.abs(out), [1.0])
    with pytest.raises(ValueError):
        delta([1.0, 0.0], E, [0.0, 1.0])


def test_projective_grid_mesh():
    rng = np.random.default_rng(0)
    for d, r in [(2, 0.1), (3, 0.2), (3, 0.05)]:
        g = projective_grid(d, r)
        u = sample_sphere(rng, d, 2000)
        worst = np.max(np.sqrt(np.maximum(0.0, 1 - np.max(np.abs(u @ g.T), axis=1) ** 2)))
        assert worst <= r


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_net_filter_and_covering(d, n):
    E = SymmetricSet.pair(np.eye(d)[0])
    net = build_net(d, n, E)
    assert len(net) > 0
    assert np.all(E.distance(net.points) >= float(net.filter_threshold))
    misses, draws, worst = covering_misses(net, E, 2000, np.random.default_rng(n))
    assert misses == 0 and worst <= float(net.mesh)


def test_net_is_ordered_by_distance_to_E():
    E = SymmetricSet.pair([1.0, 0.0])
    net = build_net(2, 4, E)
    dist = E.distance(net.points)
    assert np.all(np.diff(np.round(dist, 12)) <= 0)


def test_net_deterministic():
    E = SymmetricSet.cap([0, 0, 1], 0.3)
    a, b = build_net(3, 3, E), build_net(3, 3, E)
    assert np.array_equal(a.points, b.points)


def test_net_rejects_bad_input():
    with pytest.raises(ValueError):
        build_net(1, 1, SymmetricSet.pair([1.0]))
    with pytest.raises(ValueError):
        build_net(3, 1, SymmetricSet.pair([1.0, 0.0]))


def test_feed_enumeration_layout():
    E = SymmetricSet.pair([1.0, 0.0])
    nets = [build_net(2, n, E) for n in range(1, 6)]
    K = default_K(nets)
    feeds = enumerate_feeds(nets, K)
    assert K == 4
    assert feeds.C == (1, 9, 25, 57, 121, 249)
    assert feeds.horizon == 248
    for n in range(1, 6):
        r = feeds.stage_range(n)
        assert len(r) == stage_budget(2, n, K)
        assert all(feeds.stage(k) == n for k in r)
        # every net point is used within its stage
        used = {feeds.net_index[k - 1] for k in r}
        assert used == set(range(len(nets[n - 1])))
    with pytest.raises(ValueError):
        enumerate_feeds(nets, K=1)
    with pytest.raises(ValueError):
        enumerate_feeds(nets[1:])


def test_perp_basis_rule_examples():
    B = perp_basis([1.0, 0.0, 0.0])
    assert np.allclose(B, [[0, 1, 0], [0, 0, 1]])
    B = perp_basis([1.0, 1.0, 0.0])
    assert abs(B[0, 2]) < 1e-15
    th = 0.4
    B = perp_basis([math.cos(th), math.sin(th)])
    assert np.allclose(np.abs(B[0]), [math.sin(th), math.cos(th)])


def test_delta_norm_identity():
    rng = np.random.default_rng(2)
    E = SymmetricSet.cap([0.0, 0.0, 1.0], 0.2)
    for v, u in zip(sample_sphere(rng, 3, 50), sample_sphere(rng, 3, 50)):
        if E.distance(v) == 0:
            continue
        assert np.linalg.norm(delta(v, E, u)) * E.distance(v) == pytest.approx(rho(u, v), abs=1e-10)
        # members of E are stretched to norm at least 1
    pair = SymmetricSet.pair([0.0, 0.0, 1.0])
    for v in sample_sphere(rng, 3, 20):
        assert np.linalg.norm(delta(v, pair, [0.0, 0.0, 1.0])) >= 1 - 1e-12


def test_distance_difference_bound():
    rng = np.random.default_rng(9)
    E = SymmetricSet.from_json([{"type": "cap", "center": [1, 0, 0], "radius": 0.3},
                                {"type": "pair", "center": [0, 1, 1]}])
    u, v = sample_sphere(rng, 3, 500), sample_sphere(rng, 3, 500)
    assert np.all(E.distance(v) >= E.distance(u) - rho(u, v) - 1e-10)


def test_whole_sphere_cap_gives_empty_net():
    E = SymmetricSet.cap([1.0, 0.0], 1.0)
    assert len(build_net(2, 1, E)) == 0
    with pytest.raises(ValueError):
        enumerate_feeds([build_net(2, 1, E)])


def test_pair_distance_formula():
    E = SymmetricSet.pair([1.0, 0.0])
    for th in np.linspace(0, math.pi, 13):
        assert E.distance([math.cos(th), math.sin(th)]) == pytest.approx(abs(math.sin(th)), abs=1e-12)
